"""Neural forecaster built from scratch on numpy: dilated 2-d convolution,
an LSTM cell with backpropagation through time, a linear head, and Adam.

Four wirings of the same pieces are supported (see ForecastModel):

  lstm             window rows -> LSTM -> linear head
  cnn              window as 1xTxF image -> conv(d=1) -> flatten -> head
  cnn_lstm         conv(d=1, shape-preserving) -> per-step flatten -> LSTM -> head
  dilated_cnn_lstm same, with dilation d >= 2 and padding p = d

Everything is float64 and deterministic for a fixed seed; analytic
gradients are validated against central finite differences (see
gradcheck).
"""
from __future__ import annotations

import base64
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import expit as sigmoid

from .errors import ParameterError, ShapeError
from .numcore import Rng

VARIANTS = ("cnn", "lstm", "cnn_lstm", "dilated_cnn_lstm")
KERNEL_SIZE = 3


def receptive_field(kernel_size: int, dilation: int) -> int:
    """Input span covered by one output of a dilated convolution."""
    if kernel_size < 1:
        raise ParameterError(f"kernel_size must be >= 1, got {kernel_size}")
    if dilation < 1:
        raise ParameterError(f"dilation must be >= 1, got {dilation}")
    return dilation * (kernel_size - 1) + 1


# ---------------------------------------------------------------------------
# layers


@dataclass
class Conv2dLayer:
    """3x3 convolution with dilation, stride 1, zero padding.

    kernel is (out_channels, in_channels, 3, 3); with padding == dilation
    the spatial extent is preserved.
    """

    kernel: np.ndarray
    bias: np.ndarray
    dilation: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.dilation < 1:
            raise ParameterError(f"dilation must be >= 1, got {self.dilation}")
        if self.padding < 0:
            raise ParameterError(f"padding must be >= 0, got {self.padding}")
        if self.kernel.ndim != 4 or self.kernel.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ShapeError(f"kernel must be (out, in, 3, 3), got {self.kernel.shape}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError(f"bias must be ({self.kernel.shape[0]},), got {self.bias.shape}")

    def out_extent(self, n: int) -> int:
        return n + 2 * self.padding - self.dilation * (KERNEL_SIZE - 1)

    def forward(self, x: np.ndarray):
        """x is (B, in_channels, H, W); returns ((B, out, H', W'), cache)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != self.kernel.shape[1]:
            raise ShapeError(
                f"conv input must be (B, {self.kernel.shape[1]}, H, W), got {x.shape}"
            )
        h_out, w_out = self.out_extent(x.shape[2]), self.out_extent(x.shape[3])
        if h_out < 1 or w_out < 1:
            raise ShapeError(
                f"input {x.shape[2]}x{x.shape[3]} too small for kernel span "
                f"{receptive_field(KERNEL_SIZE, self.dilation)} with padding {self.padding}"
            )
        p, d = self.padding, self.dilation
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        out = np.zeros((x.shape[0], self.kernel.shape[0], h_out, w_out))
        out += self.bias.reshape(1, -1, 1, 1)
        for u in range(KERNEL_SIZE):
            for v in range(KERNEL_SIZE):
                patch = xp[:, :, u * d : u * d + h_out, v * d : v * d + w_out]
                out += np.einsum("oi,bihw->bohw", self.kernel[:, :, u, v], patch, optimize=True)
        cache = {"xp": xp, "in_shape": x.shape, "out_shape": out.shape}
        return out, cache

    def backward(self, cache: dict, grad_out: np.ndarray):
        """Gradients w.r.t. (input, kernel, bias) for a scalar loss."""
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if grad_out.shape != cache["out_shape"]:
            raise ShapeError(f"grad_out shape {grad_out.shape} != forward output {cache['out_shape']}")
        xp = cache["xp"]
        p, d = self.padding, self.dilation
        _, _, h_out, w_out = grad_out.shape
        grad_kernel = np.zeros_like(self.kernel)
        grad_xp = np.zeros_like(xp)
        for u in range(KERNEL_SIZE):
            for v in range(KERNEL_SIZE):
                patch = xp[:, :, u * d : u * d + h_out, v * d : v * d + w_out]
                grad_kernel[:, :, u, v] = np.einsum("bohw,bihw->oi", grad_out, patch, optimize=True)
                grad_xp[:, :, u * d : u * d + h_out, v * d : v * d + w_out] += np.einsum(
                    "oi,bohw->bihw", self.kernel[:, :, u, v], grad_out, optimize=True
                )
        grad_bias = grad_out.sum(axis=(0, 2, 3))
        h_in, w_in = cache["in_shape"][2], cache["in_shape"][3]
        grad_x = grad_xp[:, :, p : p + h_in, p : p + w_in]
        return grad_x, grad_kernel, grad_bias


@dataclass
class LstmParams:
    """Gate weights over the concatenated [h_prev, x_t] plus biases."""

    w_f: np.ndarray
    w_i: np.ndarray
    w_g: np.ndarray
    w_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        hidden = self.w_f.shape[0]
        for name in ("w_f", "w_i", "w_g", "w_o"):
            w = getattr(self, name)
            if w.ndim != 2 or w.shape[0] != hidden:
                raise ShapeError(f"{name} must be (hidden, hidden+input), got {w.shape}")
        for name in ("b_f", "b_i", "b_g", "b_o"):
            b = getattr(self, name)
            if b.shape != (hidden,):
                raise ShapeError(f"{name} must be ({hidden},), got {b.shape}")

    @property
    def hidden_size(self) -> int:
        return self.w_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_f.shape[1] - self.w_f.shape[0]


@dataclass
class LstmState:
    """One timestep of the recurrence with the gate activations cached."""

    h: np.ndarray
    c: np.ndarray
    f: np.ndarray
    i: np.ndarray
    z: np.ndarray
    o: np.ndarray
    concat: np.ndarray = field(repr=False, default=None)
    tanh_c: np.ndarray = field(repr=False, default=None)


def lstm_zero_state(params: LstmParams, batch: int) -> LstmState:
    zeros = np.zeros((batch, params.hidden_size))
    return LstmState(h=zeros, c=zeros.copy(), f=None, i=None, z=None, o=None)


def lstm_step(params: LstmParams, x_t: np.ndarray, prev: LstmState) -> LstmState:
    """One recurrence step.

    f/i/o are sigmoid gates, z the tanh candidate; the cell update is
    c = f*c_prev + i*z and the hidden output h = o*tanh(c).
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    squeeze = x_t.ndim == 1
    if squeeze:
        x_t = x_t[None, :]
    if x_t.shape[1] != params.input_size:
        raise ShapeError(f"x_t has {x_t.shape[1]} features, params expect {params.input_size}")
    h_prev = prev.h if prev.h.ndim == 2 else prev.h[None, :]
    c_prev = prev.c if prev.c.ndim == 2 else prev.c[None, :]
    if h_prev.shape[0] != x_t.shape[0]:
        raise ShapeError(f"batch mismatch: h has {h_prev.shape[0]} rows, x_t {x_t.shape[0]}")

    concat = np.concatenate([h_prev, x_t], axis=1)
    f = sigmoid(concat @ params.w_f.T + params.b_f)
    i = sigmoid(concat @ params.w_i.T + params.b_i)
    z = np.tanh(concat @ params.w_g.T + params.b_g)
    o = sigmoid(concat @ params.w_o.T + params.b_o)
    c = f * c_prev + i * z
    tanh_c = np.tanh(c)
    h = o * tanh_c
    if squeeze:
        return LstmState(h=h[0], c=c[0], f=f[0], i=i[0], z=z[0], o=o[0], concat=concat, tanh_c=tanh_c)
    return LstmState(h=h, c=c, f=f, i=i, z=z, o=o, concat=concat, tanh_c=tanh_c)


def lstm_forward(params: LstmParams, x_seq: np.ndarray):
    """Run the cell over (B, T, input); returns (states per step, h_T)."""
    x_seq = np.asarray(x_seq, dtype=np.float64)
    if x_seq.ndim != 3:
        raise ShapeError(f"x_seq must be (B, T, input), got {x_seq.shape}")
    state = lstm_zero_state(params, x_seq.shape[0])
    states = []
    for t in range(x_seq.shape[1]):
        state = lstm_step(params, x_seq[:, t, :], state)
        states.append(state)
    return states, states[-1].h


def lstm_backward(params: LstmParams, states: list[LstmState], grad_h_seq: np.ndarray):
    """Backpropagation through time.

    grad_h_seq is (B, T, hidden): the loss gradient w.r.t. each step's
    hidden output (zeros except the last step when only h_T feeds the
    head). Returns (dict of parameter gradients keyed like LstmParams
    fields, gradient w.r.t. the input sequence).
    """
    grad_h_seq = np.asarray(grad_h_seq, dtype=np.float64)
    t_steps = len(states)
    batch, hidden = states[-1].h.shape
    if grad_h_seq.shape != (batch, t_steps, hidden):
        raise ShapeError(f"grad_h_seq must be {(batch, t_steps, hidden)}, got {grad_h_seq.shape}")

    grads = {name: np.zeros_like(getattr(params, name)) for name in
             ("w_f", "w_i", "w_g", "w_o", "b_f", "b_i", "b_g", "b_o")}
    input_size = params.input_size
    grad_x = np.zeros((batch, t_steps, input_size))

    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in range(t_steps - 1, -1, -1):
        st = states[t]
        c_prev = states[t - 1].c if t > 0 else np.zeros((batch, hidden))
        dh = grad_h_seq[:, t, :] + dh_next
        do = dh * st.tanh_c
        dc = dc_next + dh * st.o * (1.0 - st.tanh_c**2)
        df = dc * c_prev
        di = dc * st.z
        dz = dc * st.i

        da_f = df * st.f * (1.0 - st.f)
        da_i = di * st.i * (1.0 - st.i)
        da_g = dz * (1.0 - st.z**2)
        da_o = do * st.o * (1.0 - st.o)

        grads["w_f"] += da_f.T @ st.concat
        grads["w_i"] += da_i.T @ st.concat
        grads["w_g"] += da_g.T @ st.concat
        grads["w_o"] += da_o.T @ st.concat
        grads["b_f"] += da_f.sum(axis=0)
        grads["b_i"] += da_i.sum(axis=0)
        grads["b_g"] += da_g.sum(axis=0)
        grads["b_o"] += da_o.sum(axis=0)

        dconcat = da_f @ params.w_f + da_i @ params.w_i + da_g @ params.w_g + da_o @ params.w_o
        dh_next = dconcat[:, :hidden]
        grad_x[:, t, :] = dconcat[:, hidden:]
        dc_next = dc * st.f
    return grads, grad_x


def dense_forward(w: np.ndarray, b: float, x: np.ndarray):
    """Scalar head w.x + b over a batch; returns ((B,), cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense input must be (B, {w.shape[0]}), got {x.shape}")
    return x @ w + b, x


def dense_backward(w: np.ndarray, cache: np.ndarray, grad_out: np.ndarray):
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (cache.shape[0],):
        raise ShapeError(f"grad_out must be ({cache.shape[0]},), got {grad_out.shape}")
    grad_w = cache.T @ grad_out
    grad_b = float(grad_out.sum())
    grad_x = np.outer(grad_out, w)
    return grad_x, grad_w, grad_b


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise ParameterError("mse_loss needs at least one element")
    diff = pred - target
    loss = float(np.mean(diff**2))
    grad = 2.0 * diff / pred.size
    return loss, grad


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0


def adam_init(params: dict) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(
    state: AdamState,
    params: dict,
    grads: dict,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam update, applied to params in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, p in params.items():
        g = grads[name]
        if np.shape(g) != np.shape(p):
            raise ShapeError(f"grad shape {np.shape(g)} != param shape {np.shape(p)} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


# ---------------------------------------------------------------------------
# model configuration and the variant wirings


@dataclass
class ModelConfig:
    """Architecture variant plus training hyperparameters."""

    variant: str = "dilated_cnn_lstm"
    dilation: int | None = None
    window: int = 5
    hidden_size: int = 32
    out_channels: int = 16
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss: str = "mse"
    init_scheme: str = "uniform"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.dilation is None:
            self.dilation = 2 if self.variant == "dilated_cnn_lstm" else 1
        if self.variant == "dilated_cnn_lstm" and self.dilation < 2:
            raise ParameterError(f"dilated_cnn_lstm needs dilation >= 2, got {self.dilation}")
        if self.variant in ("cnn", "lstm", "cnn_lstm") and self.dilation != 1:
            raise ParameterError(f"variant {self.variant!r} requires dilation 1, got {self.dilation}")
        if self.window < 1:
            raise ParameterError(f"window must be >= 1, got {self.window}")
        if self.hidden_size < 1 or self.out_channels < 1:
            raise ParameterError("hidden_size and out_channels must be >= 1")
        if self.learning_rate <= 0:
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ParameterError(f"epochs must be >= 0, got {self.epochs}")
        if self.loss != "mse":
            raise ParameterError(f"only mse loss is supported, got {self.loss!r}")
        if self.init_scheme not in ("uniform", "zeros"):
            raise ParameterError(f"init_scheme must be 'uniform' or 'zeros', got {self.init_scheme!r}")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown ModelConfig fields: {sorted(unknown)}")
        return cls(**d)


class ForecastModel:
    """One of the four variant networks over a T x F window.

    Parameters live in a flat name -> array dict (the same arrays the
    layer objects reference), which is what Adam updates in place and
    what checkpoints serialize.
    """

    def __init__(self, config: ModelConfig, n_features: int, params: dict | None = None):
        if n_features < 1:
            raise ParameterError(f"n_features must be >= 1, got {n_features}")
        self.config = config
        self.n_features = n_features
        self.rng = Rng(config.seed)

        v = config.variant
        self._uses_conv = v != "lstm"
        self._uses_lstm = v != "cnn"
        d = config.dilation if v == "dilated_cnn_lstm" else 1

        expected = self._block_shapes()
        if params is None:
            params = self._init_params(expected)
        else:
            got = {k: np.shape(p) for k, p in params.items()}
            want = {k: tuple(s) for k, s in expected.items()}
            if got != want:
                raise ShapeError(f"parameter blocks {got} do not match expected {want}")
        self.params = params
        self._bind_layers(d)

    # parameter blocks, in a fixed order so seeded init is reproducible
    def _block_shapes(self) -> dict:
        cfg = self.config
        shapes = {}
        if self._uses_conv:
            shapes["conv_kernel"] = (cfg.out_channels, 1, KERNEL_SIZE, KERNEL_SIZE)
            shapes["conv_bias"] = (cfg.out_channels,)
        if self._uses_lstm:
            lstm_in = cfg.out_channels * self.n_features if self._uses_conv else self.n_features
            for gate in ("f", "i", "g", "o"):
                shapes[f"W_{gate}"] = (cfg.hidden_size, cfg.hidden_size + lstm_in)
            for gate in ("f", "i", "g", "o"):
                shapes[f"b_{gate}"] = (cfg.hidden_size,)
            head_in = cfg.hidden_size
        else:
            head_in = cfg.out_channels * cfg.window * self.n_features
        shapes["dense_w"] = (head_in,)
        shapes["dense_b"] = ()
        return shapes

    def _fan_in(self, name: str, shapes: dict) -> int:
        if name.startswith("conv"):
            return KERNEL_SIZE * KERNEL_SIZE  # single input channel
        if name.startswith(("W_", "b_")):
            return self.config.hidden_size + self._lstm_input_size()
        return max(1, shapes["dense_w"][0])

    def _lstm_input_size(self) -> int:
        if not self._uses_lstm:
            return 0
        return self.config.out_channels * self.n_features if self._uses_conv else self.n_features

    def _init_params(self, shapes: dict) -> dict:
        params = {}
        for name, shape in shapes.items():
            if self.config.init_scheme == "zeros":
                params[name] = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(self._fan_in(name, shapes))
                params[name] = self.rng.uniform(shape, -bound, bound)
            params[name] = np.asarray(params[name], dtype=np.float64).reshape(shape)
        return params

    def _bind_layers(self, dilation: int) -> None:
        if self._uses_conv:
            padding = dilation if self._uses_lstm else 1
            self.conv = Conv2dLayer(
                kernel=self.params["conv_kernel"],
                bias=self.params["conv_bias"],
                dilation=dilation,
                padding=padding,
            )
        else:
            self.conv = None
        if self._uses_lstm:
            self.lstm = LstmParams(
                w_f=self.params["W_f"], w_i=self.params["W_i"],
                w_g=self.params["W_g"], w_o=self.params["W_o"],
                b_f=self.params["b_f"], b_i=self.params["b_i"],
                b_g=self.params["b_g"], b_o=self.params["b_o"],
            )
        else:
            self.lstm = None

    def _check_windows(self, windows: np.ndarray) -> np.ndarray:
        w = np.asarray(windows, dtype=np.float64)
        if w.ndim == 2:
            w = w[None, :, :]
        if w.ndim != 3 or w.shape[1] != self.config.window or w.shape[2] != self.n_features:
            raise ShapeError(
                f"windows must be (B, {self.config.window}, {self.n_features}), got {np.shape(windows)}"
            )
        return w

    def forward(self, windows: np.ndarray):
        """Predictions (B,) for a batch of standardized windows, plus cache."""
        x = self._check_windows(windows)
        cache = {"batch": x.shape[0]}
        v = self.config.variant

        if v == "lstm":
            seq = x
        else:
            conv_out, conv_cache = self.conv.forward(x[:, None, :, :])
            cache["conv"] = conv_cache
            if v == "cnn":
                head_in = conv_out.reshape(x.shape[0], -1)
            else:
                # per-timestep flatten: (B, C, T, F) -> (B, T, C*F)
                cache["conv_out_shape"] = conv_out.shape
                seq = conv_out.transpose(0, 2, 1, 3).reshape(x.shape[0], x.shape[1], -1)

        if self._uses_lstm:
            states, h_last = lstm_forward(self.lstm, seq)
            cache["states"] = states
            cache["seq_shape"] = seq.shape
            head_in = h_last

        preds, dense_cache = dense_forward(self.params["dense_w"], float(self.params["dense_b"]), head_in)
        cache["dense"] = dense_cache
        return preds, cache

    def backward(self, cache: dict, grad_preds: np.ndarray):
        """Parameter gradients (same keys as params) and window gradients."""
        grads = {}
        grad_head, grads["dense_w"], gb = dense_backward(
            self.params["dense_w"], cache["dense"], grad_preds
        )
        grads["dense_b"] = np.asarray(gb, dtype=np.float64).reshape(())
        v = self.config.variant

        if self._uses_lstm:
            batch, t_steps, _ = cache["seq_shape"]
            grad_h_seq = np.zeros((batch, t_steps, self.config.hidden_size))
            grad_h_seq[:, -1, :] = grad_head
            lstm_grads, grad_seq = lstm_backward(self.lstm, cache["states"], grad_h_seq)
            for gate in ("f", "i", "g", "o"):
                grads[f"W_{gate}"] = lstm_grads[f"w_{gate}"]
                grads[f"b_{gate}"] = lstm_grads[f"b_{gate}"]
        if v == "lstm":
            return grads, grad_seq

        if v == "cnn":
            grad_conv_out = grad_head.reshape(cache["conv"]["out_shape"])
        else:
            b, c, t, f = cache["conv_out_shape"]
            grad_conv_out = grad_seq.reshape(b, t, c, f).transpose(0, 2, 1, 3)
        grad_img, grads["conv_kernel"], grads["conv_bias"] = self.conv.backward(
            cache["conv"], grad_conv_out
        )
        return grads, grad_img[:, 0, :, :]

    def predict(self, windows: np.ndarray) -> np.ndarray:
        preds, _ = self.forward(windows)
        return preds


# ---------------------------------------------------------------------------
# checkpoint (de)serialization: JSON with base64-encoded little-endian f64


CHECKPOINT_VERSION = 1


def encode_array(a: np.ndarray) -> dict:
    shape = list(np.shape(a))  # before ascontiguousarray, which promotes 0-d to 1-d
    arr = np.ascontiguousarray(a, dtype="<f8")
    return {
        "shape": shape,
        "dtype": "<f8",
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_array(d: dict) -> np.ndarray:
    if d.get("dtype") != "<f8":
        raise ParameterError(f"unsupported checkpoint dtype {d.get('dtype')!r}")
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).copy()


def model_to_dict(model: ForecastModel) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_json_dict(),
        "seed": model.config.seed,
        "n_features": model.n_features,
        "params": {name: encode_array(p) for name, p in model.params.items()},
    }


def model_from_dict(d: dict) -> ForecastModel:
    if d.get("format_version") != CHECKPOINT_VERSION:
        raise ParameterError(f"unsupported checkpoint version {d.get('format_version')!r}")
    config = ModelConfig.from_json_dict(d["config"])
    params = {name: decode_array(enc) for name, enc in d["params"].items()}
    return ForecastModel(config, d["n_features"], params=params)

"""End-to-end forecasting pipeline over dated CSV panels.

Stages: load -> align (forward fill) -> standardize (train-span stats
only) -> window -> chronological split -> train -> predict ->
de-standardize -> evaluate. The comparison harness trains the five
labeled selection/architecture combinations and reports metrics in a
fixed table layout.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from datetime import date

import numpy as np

from . import neural, regsel
from .errors import (
    CoverageError,
    CsvFormatError,
    DivergenceError,
    DuplicateDateError,
    InsufficientDataError,
    MapeUndefinedError,
    MissingInputError,
    ParameterError,
    ScalingError,
    ShapeError,
)
from .neural import ForecastModel, ModelConfig, adam_init, adam_step, mse_loss
from .regsel import SelectionReport

COMPARE_LABELS = (
    "RR-CNN",
    "RR-LSTM",
    "RR-CNN-LSTM",
    "RR-DILATED_CNN-LSTM",
    "SCAD-DILATED_CNN-LSTM",
)
# (label, variant, which selection feeds it)
COMPARE_CELLS = (
    ("RR-CNN", "cnn", "rr"),
    ("RR-LSTM", "lstm", "rr"),
    ("RR-CNN-LSTM", "cnn_lstm", "rr"),
    ("RR-DILATED_CNN-LSTM", "dilated_cnn_lstm", "rr"),
    ("SCAD-DILATED_CNN-LSTM", "dilated_cnn_lstm", "scad"),
)
CELL_SEED_STRIDE = 7919  # per-cell rng offset inside one comparison seed


def atomic_write_text(path, text: str) -> None:
    """Write via temp file + rename so partial files never appear."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# panel types


@dataclass
class SeriesFragment:
    """Dated columns fresh off one CSV; may still contain missing values (NaN)."""

    dates: list[date]
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        n = len(self.dates)
        for name, col in self.columns.items():
            if len(col) != n:
                raise ShapeError(f"column {name!r} has {len(col)} rows for {n} dates")


@dataclass
class TimeSeriesFrame:
    """Aligned panel: strictly increasing dates, complete numeric columns."""

    dates: list[date]
    columns: dict[str, np.ndarray]
    target_name: str

    def __post_init__(self):
        if self.target_name not in self.columns:
            raise ParameterError(f"target column {self.target_name!r} not in panel")
        n = len(self.dates)
        for i in range(1, n):
            if self.dates[i] <= self.dates[i - 1]:
                raise DuplicateDateError(
                    f"dates must be strictly increasing; offending date {self.dates[i].isoformat()}"
                )
        for name, col in self.columns.items():
            if len(col) != n:
                raise ShapeError(f"column {name!r} has {len(col)} rows for {n} dates")
            if not np.all(np.isfinite(col)):
                raise ParameterError(f"column {name!r} contains missing/non-finite values")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def feature_names(self) -> list[str]:
        return [n for n in self.columns if n != self.target_name]

    @property
    def target(self) -> np.ndarray:
        return self.columns[self.target_name]

    def values(self, names: list[str]) -> np.ndarray:
        return np.column_stack([self.columns[n] for n in names])

    def subframe(self, names: list[str]) -> "TimeSeriesFrame":
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise ParameterError(f"unknown columns {missing}")
        return TimeSeriesFrame(
            dates=list(self.dates),
            columns={n: self.columns[n].copy() for n in names},
            target_name=self.target_name,
        )


def frame_to_csv_text(frame: TimeSeriesFrame, date_column: str = "date") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(frame.columns)
    writer.writerow([date_column] + names)
    for i, d in enumerate(frame.dates):
        writer.writerow([d.isoformat()] + [repr(float(frame.columns[n][i])) for n in names])
    return buf.getvalue()


def write_frame_csv(frame: TimeSeriesFrame, path, date_column: str = "date") -> None:
    atomic_write_text(path, frame_to_csv_text(frame, date_column))


# ---------------------------------------------------------------------------
# loading and alignment


def load_csv_series(path, date_column: str = "date", value_columns: list[str] | None = None) -> SeriesFragment:
    """Parse one CSV into a fragment; empty cells become NaN (missing).

    Rows are sorted by date; duplicate dates and unparseable cells raise
    with row/column context.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise MissingInputError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if date_column not in header:
            raise CsvFormatError(f"{path}: no {date_column!r} column in header {header}")
        date_idx = header.index(date_column)
        wanted = value_columns if value_columns is not None else [h for h in header if h != date_column]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise CsvFormatError(f"{path}: columns {missing} not in header")
        col_idx = {c: header.index(c) for c in wanted}

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            raw_date = row[date_idx].strip()
            try:
                d = date.fromisoformat(raw_date)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: row {lineno}: cannot parse date {raw_date!r} (expected YYYY-MM-DD)"
                ) from None
            values = []
            for c in wanted:
                cell = row[col_idx[c]].strip() if col_idx[c] < len(row) else ""
                if cell == "":
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {c!r}: cannot parse {cell!r} as a number"
                    ) from None
            rows.append((d, values))

    rows.sort(key=lambda r: r[0])
    for i in range(1, len(rows)):
        if rows[i][0] == rows[i - 1][0]:
            raise DuplicateDateError(f"{path}: duplicate date {rows[i][0].isoformat()}")
    dates = [r[0] for r in rows]
    data = np.array([r[1] for r in rows], dtype=np.float64).reshape(len(rows), len(wanted))
    return SeriesFragment(dates=dates, columns={c: data[:, j].copy() for j, c in enumerate(wanted)})


def align_series(
    target: SeriesFragment,
    exogenous: list[SeriesFragment],
    target_name: str | None = None,
) -> TimeSeriesFrame:
    """Forward-fill every exogenous series onto the target's date index.

    Markets trade on different calendars, so each exogenous value at a
    target date is the most recent observation at or before it. Leading
    target dates where some series has no observation yet are dropped;
    a series with no usable overlap at all raises CoverageError.
    """
    if target_name is None:
        if len(target.columns) != 1:
            raise ParameterError("target fragment has several columns; pass target_name")
        target_name = next(iter(target.columns))
    tgt = target.columns[target_name]
    if not np.all(np.isfinite(tgt)):
        raise CsvFormatError(f"target column {target_name!r} has missing values")

    n = len(target.dates)
    aligned: dict[str, np.ndarray] = {target_name: tgt.copy()}
    first_valid = 0
    for frag in exogenous:
        for name, col in frag.columns.items():
            if name in aligned:
                raise ParameterError(f"duplicate column name {name!r} across fragments")
            obs = [(d, v) for d, v in zip(frag.dates, col) if math.isfinite(v)]
            if not obs or obs[0][0] > target.dates[-1]:
                raise CoverageError(
                    f"series {name!r} has no observations within the target span"
                )
            filled = np.empty(n)
            k = -1
            for i, d in enumerate(target.dates):
                while k + 1 < len(obs) and obs[k + 1][0] <= d:
                    k += 1
                filled[i] = obs[k][1] if k >= 0 else math.nan
            aligned[name] = filled
            lead = int(np.argmax(np.isfinite(filled))) if not math.isfinite(filled[0]) else 0
            first_valid = max(first_valid, lead)

    dates = list(target.dates[first_valid:])
    columns = {name: col[first_valid:].copy() for name, col in aligned.items()}
    return TimeSeriesFrame(dates=dates, columns=columns, target_name=target_name)


# ---------------------------------------------------------------------------
# standardization


@dataclass
class StandardScaler:
    """Per-column z-score transform with statistics from the train span only."""

    names: list[str]
    mean: np.ndarray
    sd: np.ndarray

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ParameterError(f"scaler knows nothing about column {name!r}") from None

    def transform(self, frame: TimeSeriesFrame) -> TimeSeriesFrame:
        columns = {}
        for name, col in frame.columns.items():
            j = self._index(name)
            columns[name] = (col - self.mean[j]) / self.sd[j]
        return TimeSeriesFrame(dates=list(frame.dates), columns=columns, target_name=frame.target_name)

    def inverse_column(self, name: str, values: np.ndarray) -> np.ndarray:
        j = self._index(name)
        return np.asarray(values, dtype=np.float64) * self.sd[j] + self.mean[j]

    def transform_column(self, name: str, values: np.ndarray) -> np.ndarray:
        j = self._index(name)
        return (np.asarray(values, dtype=np.float64) - self.mean[j]) / self.sd[j]

    def to_json_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": [float(v) for v in self.mean],
            "sd": [float(v) for v in self.sd],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "StandardScaler":
        return cls(names=list(d["names"]), mean=np.array(d["mean"]), sd=np.array(d["sd"]))


def fit_scaler(frame: TimeSeriesFrame, train_end_index: int) -> StandardScaler:
    """Column means/sds (ddof=1) over rows [0, train_end_index)."""
    if train_end_index < 2:
        raise ParameterError(f"train_end_index must be >= 2, got {train_end_index}")
    if train_end_index > len(frame):
        raise ParameterError(f"train_end_index {train_end_index} exceeds panel length {len(frame)}")
    names = list(frame.columns)
    mean = np.empty(len(names))
    sd = np.empty(len(names))
    for j, name in enumerate(names):
        span = frame.columns[name][:train_end_index]
        mean[j] = span.mean()
        sd[j] = span.std(ddof=1)
        if sd[j] <= 0:
            raise ScalingError(f"column {name!r} is constant on the training span")
    return StandardScaler(names=names, mean=mean, sd=sd)


# ---------------------------------------------------------------------------
# windowing and splitting


@dataclass
class WindowBatch:
    """Sliding one-step-ahead samples.

    inputs[i] holds standardized rows [i, i+window); its target is row
    i+window's target column, stored both standardized (for training)
    and on the original scale (for reporting).
    """

    inputs: np.ndarray  # (N, window, F)
    targets_std: np.ndarray
    targets_orig: np.ndarray
    target_dates: list[date]
    input_last_dates: list[date]
    feature_names: list[str]
    window: int

    def __len__(self) -> int:
        return len(self.targets_std)

    def check_no_lookahead(self) -> None:
        for last_in, tgt in zip(self.input_last_dates, self.target_dates):
            if not last_in < tgt:
                raise ParameterError(
                    f"lookahead: window ending {last_in.isoformat()} does not precede "
                    f"target {tgt.isoformat()}"
                )


def make_windows(
    frame: TimeSeriesFrame,
    window: int = 5,
    horizon: int = 1,
    original: TimeSeriesFrame | None = None,
) -> WindowBatch:
    """Build N - window - horizon + 1 samples from a standardized frame.

    `original` (the pre-scaling panel, same index) supplies the
    original-scale targets; without it they fall back to the
    standardized values.
    """
    if window < 1 or horizon < 1:
        raise ParameterError("window and horizon must be >= 1")
    n = len(frame)
    n_samples = n - window - horizon + 1
    if n_samples < 1:
        raise InsufficientDataError(
            f"panel has {n} rows; need more than {window + horizon - 1} for one sample"
        )
    names = list(frame.columns)
    mat = frame.values(names)
    idx = np.arange(n_samples)[:, None] + np.arange(window)[None, :]
    inputs = mat[idx]  # (N, window, F)
    tgt_rows = np.arange(n_samples) + window + horizon - 1
    targets_std = frame.target[tgt_rows].copy()
    if original is not None:
        if len(original) != n:
            raise ShapeError("original frame length differs from standardized frame")
        targets_orig = original.columns[frame.target_name][tgt_rows].copy()
    else:
        targets_orig = targets_std.copy()
    return WindowBatch(
        inputs=inputs,
        targets_std=targets_std,
        targets_orig=targets_orig,
        target_dates=[frame.dates[i] for i in tgt_rows],
        input_last_dates=[frame.dates[i + window - 1] for i in range(n_samples)],
        feature_names=names,
        window=window,
    )


def chrono_split(batch: WindowBatch, train_fraction: float = 0.9) -> tuple[WindowBatch, WindowBatch]:
    """First floor(train_fraction*n) samples train, the rest test; order kept."""
    n = len(batch)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    k = int(math.floor(train_fraction * n))
    k = min(max(k, 1), n - 1)

    def take(sl: slice) -> WindowBatch:
        return WindowBatch(
            inputs=batch.inputs[sl],
            targets_std=batch.targets_std[sl],
            targets_orig=batch.targets_orig[sl],
            target_dates=batch.target_dates[sl],
            input_last_dates=batch.input_last_dates[sl],
            feature_names=batch.feature_names,
            window=batch.window,
        )

    return take(slice(0, k)), take(slice(k, n))


# ---------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    mse: float
    mae: float
    mape: float


def evaluate(pred: np.ndarray, actual: np.ndarray) -> Metrics:
    """MSE, MAE, and MAPE (as a fraction, |err|/actual) on matching vectors.

    A zero actual makes MAPE undefined; the raised error still carries
    the MSE/MAE that remain well defined.
    """
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.ndim != 1:
        raise ShapeError(f"pred {pred.shape} and actual {actual.shape} must be equal-length vectors")
    if pred.size == 0:
        raise ParameterError("evaluate needs at least one point")
    err = actual - pred
    mse = float(np.mean(err**2))
    mae = float(np.mean(np.abs(err)))
    if np.any(actual == 0.0):
        raise MapeUndefinedError("MAPE undefined: an actual value is zero", mse=mse, mae=mae)
    mape = float(np.mean(np.abs(err) / actual))
    return Metrics(mse=mse, mae=mae, mape=mape)


@dataclass
class MetricsRow:
    label: str
    mse: float
    mae: float
    mape: float
    seed: int

    def to_json_dict(self) -> dict:
        return {"label": self.label, "mse": self.mse, "mae": self.mae, "mape": self.mape, "seed": self.seed}


@dataclass
class MetricsReport:
    """Five-row comparison table plus per-seed detail and the win rate."""

    rows: list[MetricsRow]  # one per label, metrics averaged over seeds
    per_seed: list[MetricsRow]
    seeds: list[int]
    dilated_win_rate: float
    dataset_label: str = "synthetic"
    runtime_seconds: float = 0.0  # informational; never serialized

    def to_json_dict(self) -> dict:
        return {
            "dataset_label": self.dataset_label,
            "seeds": list(self.seeds),
            "dilated_vs_plain_win_rate": self.dilated_win_rate,
            "rows": [r.to_json_dict() for r in self.rows],
            "per_seed": [r.to_json_dict() for r in self.per_seed],
        }

    def to_text_table(self) -> str:
        width = max(len(r.label) for r in self.rows) + 2
        lines = [f"{'model':<{width}}{'MSE':>12}{'MAE':>12}{'MAPE':>12}"]
        for r in self.rows:
            lines.append(f"{r.label:<{width}}{r.mse:>12.6f}{r.mae:>12.6f}{r.mape:>12.6f}")
        lines.append(
            f"dilated-vs-plain win rate: {self.dilated_win_rate:.3f} over seeds {self.seeds}"
        )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: ForecastModel
    scaler: StandardScaler
    feature_names: list[str]
    history: list[float]
    metrics: MetricsRow
    dates: list[date]
    actuals: np.ndarray
    predictions: np.ndarray
    runtime_seconds: float


DIVERGENCE_LOSS = 1e100  # standardized targets make any loss near this garbage


def fit_arrays(model: ForecastModel, inputs: np.ndarray, targets: np.ndarray) -> list[float]:
    """Mini-batch Adam over config.epochs; returns per-epoch training MSE.

    Batches are reshuffled every epoch from the model's seeded rng; the
    short final batch is kept. A non-finite (or absurdly large) epoch
    loss raises DivergenceError naming the epoch; Adam's stepwise-bounded
    updates mean explosions show up as huge finite losses well before any
    float overflow.
    """
    cfg = model.config
    n = len(targets)
    if n == 0:
        raise ParameterError("no training samples")
    state = adam_init(model.params)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = model.rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            preds, cache = model.forward(inputs[idx])
            loss, grad = mse_loss(preds, targets[idx])
            grads, _ = model.backward(cache, grad)
            adam_step(state, model.params, grads, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
            total += loss * len(idx)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss) or epoch_loss > DIVERGENCE_LOSS:
            raise DivergenceError(f"training diverged at epoch {epoch}", epoch=epoch)
        history.append(epoch_loss)
    return history


def restrict_features(frame: TimeSeriesFrame, selection) -> list[str]:
    """Model input columns: target first, then the selected exogenous features.

    selection may be a SelectionReport, an explicit name list, or None
    for all features.
    """
    if selection is None:
        chosen = list(frame.feature_names)
    elif isinstance(selection, SelectionReport):
        selected = set(selection.selected_names)
        chosen = [n for n in frame.feature_names if n in selected]
    else:
        known = set(frame.feature_names)
        unknown = [n for n in selection if n not in known]
        if unknown:
            raise ParameterError(f"selected features not in panel: {unknown}")
        chosen = [n for n in frame.feature_names if n in set(selection)]
    if not chosen:
        raise ParameterError("selection leaves no exogenous features")
    return [frame.target_name] + chosen


def train_model(
    frame: TimeSeriesFrame,
    selection,
    config: ModelConfig,
    label: str | None = None,
    train_fraction: float = 0.9,
) -> TrainResult:
    """Scale, window, split, train, and score one model on the panel."""
    t0 = time.perf_counter()
    cols = restrict_features(frame, selection)
    sub = frame.subframe(cols)

    n_samples = len(sub) - config.window
    if n_samples < 2:
        raise InsufficientDataError(
            f"panel has {len(sub)} rows; too few for window {config.window} plus a split"
        )
    n_train = int(math.floor(train_fraction * n_samples))
    n_train = min(max(n_train, 1), n_samples - 1)
    scaler = fit_scaler(sub, train_end_index=n_train + config.window)
    sub_std = scaler.transform(sub)
    batch = make_windows(sub_std, window=config.window, original=sub)
    batch.check_no_lookahead()
    train_b, test_b = chrono_split(batch, train_fraction)

    model = ForecastModel(config, n_features=len(cols))
    history = fit_arrays(model, train_b.inputs, train_b.targets_std)

    preds_std = model.predict(test_b.inputs)
    preds = scaler.inverse_column(frame.target_name, preds_std)
    metrics = evaluate(preds, test_b.targets_orig)
    row = MetricsRow(
        label=label or config.variant,
        mse=metrics.mse,
        mae=metrics.mae,
        mape=metrics.mape,
        seed=config.seed,
    )
    return TrainResult(
        model=model,
        scaler=scaler,
        feature_names=cols,
        history=history,
        metrics=row,
        dates=list(test_b.target_dates),
        actuals=test_b.targets_orig.copy(),
        predictions=preds,
        runtime_seconds=time.perf_counter() - t0,
    )


def _cell_config(base: ModelConfig, variant: str, seed: int) -> ModelConfig:
    d = base.to_json_dict()
    d["variant"] = variant
    d["dilation"] = base.dilation if variant == "dilated_cnn_lstm" else None
    d["seed"] = seed
    return ModelConfig.from_json_dict(d)


def compare_variants(
    frame: TimeSeriesFrame,
    rr_selection: SelectionReport,
    scad_selection: SelectionReport,
    base_config: ModelConfig,
    seeds: list[int],
    train_fraction: float = 0.9,
) -> MetricsReport:
    """Train the five labeled combinations per seed and aggregate.

    Each (cell, seed) gets its own derived rng stream (seed plus a fixed
    per-cell offset), so cells are independent and reproducible. The win
    rate counts seeds where the dilated variant beats plain CNN-LSTM on
    test MSE (informational).
    """
    if not seeds:
        raise ParameterError("need at least one seed")
    if rr_selection.n_selected == 0 or scad_selection.n_selected == 0:
        raise ParameterError("both selections must keep at least one feature")
    t0 = time.perf_counter()
    selections = {"rr": rr_selection, "scad": scad_selection}

    per_seed: list[MetricsRow] = []
    by_label: dict[str, list[MetricsRow]] = {label: [] for label in COMPARE_LABELS}
    wins = 0
    for seed in seeds:
        seed_rows = {}
        for k, (label, variant, sel_key) in enumerate(COMPARE_CELLS):
            cfg = _cell_config(base_config, variant, seed + k * CELL_SEED_STRIDE)
            result = train_model(frame, selections[sel_key], cfg, label=label, train_fraction=train_fraction)
            row = MetricsRow(label=label, mse=result.metrics.mse, mae=result.metrics.mae,
                             mape=result.metrics.mape, seed=seed)
            seed_rows[label] = row
            per_seed.append(row)
            by_label[label].append(row)
        if seed_rows["RR-DILATED_CNN-LSTM"].mse < seed_rows["RR-CNN-LSTM"].mse:
            wins += 1

    rows = [
        MetricsRow(
            label=label,
            mse=float(np.mean([r.mse for r in by_label[label]])),
            mae=float(np.mean([r.mae for r in by_label[label]])),
            mape=float(np.mean([r.mape for r in by_label[label]])),
            seed=-1,
        )
        for label in COMPARE_LABELS
    ]
    return MetricsReport(
        rows=rows,
        per_seed=per_seed,
        seeds=list(seeds),
        dilated_win_rate=wins / len(seeds),
        runtime_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# panel-level feature selection


def lagged_design(frame: TimeSeriesFrame, lag: int = 1) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Design matrix of exogenous features lagged by `lag` against the target."""
    if lag < 1:
        raise ParameterError(f"lag must be >= 1, got {lag}")
    if len(frame) <= lag + 2:
        raise InsufficientDataError(f"panel has {len(frame)} rows; too few for lag {lag}")
    names = frame.feature_names
    x = frame.values(names)[:-lag]
    y = frame.target[lag:]
    return x, y, names


def select_panel_features(
    frame: TimeSeriesFrame,
    lag: int = 1,
    alpha: float = 0.05,
    ridge_lambda: float | None = None,
    scad_lambda: float | None = None,
    scad_a: float = 3.7,
    grid_points: int = 20,
) -> tuple[SelectionReport, SelectionReport]:
    """Run the two selectors against the lagged panel.

    Ridge keeps every feature whose approximate t-test clears alpha; its
    default lambda is n (heavy shrinkage), which pools weight across
    correlated features so whole clusters stay significant. SCAD selects
    its nonzero support at a validation-tuned lambda unless one is fixed.
    """
    x, y, names = lagged_design(frame, lag)
    n = len(y)

    x_mean = x.mean(axis=0)
    x_sd = x.std(axis=0, ddof=1)
    if np.any(x_sd <= 0):
        bad = [names[j] for j in np.nonzero(x_sd <= 0)[0]]
        raise ScalingError(f"constant features cannot be standardized: {bad}")
    xs = (x - x_mean) / x_sd

    lam_r = float(n) if ridge_lambda is None else float(ridge_lambda)
    ridge = regsel.ridge_fit(xs, y, lam_r)
    rr_report = regsel.select_features(ridge, names, alpha, dataset_label="rr", feature_scale=x_sd)

    if scad_lambda is None:
        scad, _, _, _ = regsel.tune_penalized(x, y, "scad", a=scad_a, n_points=grid_points)
    else:
        lasso = regsel.penalized_fit(x, y, regsel.PenaltySpec("lasso", float(scad_lambda), scad_a))
        scad = regsel.penalized_fit(
            x, y, regsel.PenaltySpec("scad", float(scad_lambda), scad_a), beta_init=lasso.beta
        )
    scad_report = regsel.select_features(scad, names, alpha, dataset_label="scad")
    return rr_report, scad_report


# ---------------------------------------------------------------------------
# prediction file


def predictions_csv_text(dates: list[date], actuals: np.ndarray, predictions: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "actual", "predicted"])
    for d, a, p in zip(dates, actuals, predictions):
        writer.writerow([d.isoformat(), repr(float(a)), repr(float(p))])
    return buf.getvalue()

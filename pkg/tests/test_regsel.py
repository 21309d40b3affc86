import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridcast import regsel
from hybridcast.errors import IllConditioningError, ParameterError, SingularityError
from hybridcast.regsel import PenaltySpec, RegressionFit


def make_fit(sigma2, eigenvalues):
    """Minimal fit object for diagnostics tests."""
    p = len(eigenvalues)
    return RegressionFit(
        beta=np.zeros(p), beta0=0.0, penalty=PenaltySpec("none"),
        sigma2_hat=sigma2, gram_eigenvalues=np.asarray(eigenvalues, dtype=float),
        support=(), converged=True, iterations=1, n_obs=10, dof=5, gram=np.eye(p),
    )


class TestPenaltySpec:
    def test_negative_lambda_rejected(self):
        with pytest.raises(ParameterError):
            PenaltySpec("lasso", -1.0)

    def test_scad_needs_a_above_two(self):
        with pytest.raises(ParameterError):
            PenaltySpec("scad", 1.0, a=2.0)

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            PenaltySpec("elastic", 1.0)


class TestOls:
    def test_identity_design_no_intercept(self):
        fit = regsel.ols_fit(np.eye(2), [2.0, 4.0], intercept=False)
        assert fit.beta == pytest.approx([2.0, 4.0])

    def test_exact_recovery(self, rng):
        x = rng.standard_normal((40, 4))
        beta_true = np.array([1.5, -2.0, 0.5, 3.0])
        y = 2.0 + x @ beta_true
        fit = regsel.ols_fit(x, y)
        assert fit.beta == pytest.approx(beta_true, abs=1e-9)
        assert fit.beta0 == pytest.approx(2.0, abs=1e-9)

    def test_residual_orthogonality(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal(30)
        fit = regsel.ols_fit(x, y)
        resid = y - fit.predict(x)
        assert np.max(np.abs(x.T @ resid)) <= 1e-8

    def test_duplicated_column_is_singular(self, rng):
        col = rng.standard_normal(20)
        x = np.column_stack([col, col, rng.standard_normal(20)])
        with pytest.raises(SingularityError, match="ridge"):
            regsel.ols_fit(x, rng.standard_normal(20))


class TestRidge:
    def test_identity_design_halves(self):
        fit = regsel.ridge_fit(np.eye(2), [2.0, 4.0], lam=1.0, center=False)
        assert fit.beta == pytest.approx([1.0, 2.0])

    def test_total_shrinkage(self, rng):
        x = rng.standard_normal((20, 3))
        y = rng.standard_normal(20)
        fit = regsel.ridge_fit(x, y, lam=1e9, center=False)
        assert np.linalg.norm(fit.beta) < 1e-6

    def test_lambda_zero_rejected(self):
        with pytest.raises(ParameterError):
            regsel.ridge_fit(np.eye(2), [1.0, 2.0], lam=0.0)

    def test_normal_equation_residual(self, rng):
        x = rng.standard_normal((50, 5))
        y = rng.standard_normal(50)
        lam = 0.7
        fit = regsel.ridge_fit(x, y, lam, center=False)
        resid = (x.T @ x + lam * np.eye(5)) @ fit.beta - x.T @ y
        assert np.max(np.abs(resid)) <= 1e-8

    def test_stationarity_centered(self, rng):
        x = rng.standard_normal((40, 4))
        y = rng.standard_normal(40)
        lam = 2.5
        fit = regsel.ridge_fit(x, y, lam)
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        stat = xc.T @ (xc @ fit.beta - yc) + lam * fit.beta
        assert np.max(np.abs(stat)) <= 1e-8

    def test_matches_ols_at_tiny_lambda(self, rng):
        x = rng.standard_normal((60, 4))
        y = x @ np.array([1.0, -1.0, 2.0, 0.5]) + 0.1 * rng.standard_normal(60)
        ols = regsel.ols_fit(x, y)
        ridge = regsel.ridge_fit(x, y, lam=1e-8)
        assert ridge.beta == pytest.approx(ols.beta, abs=1e-6)
        assert ridge.beta0 == pytest.approx(ols.beta0, abs=1e-6)

    def test_shrinkage_monotone_in_lambda(self, rng):
        x = rng.standard_normal((50, 5))
        y = rng.standard_normal(50)
        norms = [np.linalg.norm(regsel.ridge_fit(x, y, lam).beta) for lam in (0.1, 1.0, 10.0)]
        assert norms[0] >= norms[1] >= norms[2]


class TestMseDiagnostic:
    def test_orthonormal_design(self):
        assert regsel.estimator_mse_diagnostic(make_fit(1.0, [1.0, 1.0, 1.0])) == pytest.approx(3.0)

    def test_zero_sigma(self):
        assert regsel.estimator_mse_diagnostic(make_fit(0.0, [2.0, 5.0])) == 0.0

    def test_tiny_eigenvalue_guard(self):
        with pytest.raises(IllConditioningError):
            regsel.estimator_mse_diagnostic(make_fit(1.0, [1e-14, 1.0, 1.0]))


class TestSoftThreshold:
    @pytest.mark.parametrize("z,lam,expected", [(3, 1, 2), (-0.5, 1, 0), (-3, 1, -2)])
    def test_examples(self, z, lam, expected):
        assert regsel.soft_threshold(z, lam) == pytest.approx(expected)

    @given(st.floats(-100, 100), st.floats(0, 50))
    def test_shrinks_toward_zero(self, z, lam):
        out = regsel.soft_threshold(z, lam)
        assert abs(out) <= abs(z)
        assert out * z >= 0  # never flips sign


A_DEFAULT = 3.7


class TestScadPenalty:
    @pytest.mark.parametrize("b,expected", [(0.5, 0.5), (1.0, 1.0), (3.7, 2.35)])
    def test_examples(self, b, expected):
        assert regsel.scad_penalty(b, 1.0, A_DEFAULT) == pytest.approx(expected)

    @pytest.mark.parametrize("lam,a", [(1.0, 3.7), (0.37, 2.5), (2.4, 5.0)])
    def test_continuity_at_breakpoints(self, lam, a):
        for point in (lam, a * lam):
            below = regsel.scad_penalty(np.nextafter(point, 0.0), lam, a)
            at = regsel.scad_penalty(point, lam, a)
            assert abs(at - below) <= 1e-12

    def test_bad_a(self):
        with pytest.raises(ParameterError):
            regsel.scad_penalty(1.0, 1.0, a=2.0)

    def test_derivative_matches_finite_differences(self, rng):
        lam, a, h = 1.3, 3.7, 1e-6
        checked = 0
        while checked < 100:
            b = float(rng.uniform(h, 2 * a * lam))
            if min(abs(b - lam), abs(b - a * lam)) < 10 * h:
                continue  # stay off the breakpoints
            fd = (regsel.scad_penalty(b + h, lam, a) - regsel.scad_penalty(b - h, lam, a)) / (2 * h)
            assert regsel.scad_penalty_derivative(b, lam, a) == pytest.approx(fd, abs=1e-6)
            checked += 1


class TestScadDerivative:
    @pytest.mark.parametrize("b,expected", [(0.5, 1.0), (2.0, 1.7 / 2.7), (5.0, 0.0)])
    def test_examples(self, b, expected):
        assert regsel.scad_penalty_derivative(b, 1.0, A_DEFAULT) == pytest.approx(expected)

    def test_bad_a(self):
        with pytest.raises(ParameterError):
            regsel.scad_penalty_derivative(1.0, 1.0, a=1.5)


class TestScadThreshold:
    @pytest.mark.parametrize(
        "z,expected",
        [(0.5, 0.0), (3.0, (2.7 * 3.0 - 3.7) / 1.7), (5.0, 5.0), (2.0, 1.0)],
    )
    def test_examples(self, z, expected):
        assert regsel.scad_threshold(z, 1.0, A_DEFAULT) == pytest.approx(expected)

    @pytest.mark.parametrize("lam,a", [(1.0, 3.7), (0.8, 2.2), (2.0, 6.0)])
    def test_continuity_at_branch_points(self, lam, a):
        for point in (2 * lam, a * lam):
            lo = regsel.scad_threshold(np.nextafter(point, 0), lam, a)
            hi = regsel.scad_threshold(np.nextafter(point, np.inf), lam, a)
            assert abs(lo - hi) <= 1e-12

    @given(
        st.floats(-50, 50),
        st.floats(0.01, 10),
        st.floats(2.01, 10),
    )
    def test_odd_nonexpansive_identity(self, z, lam, a):
        out = regsel.scad_threshold(z, lam, a)
        assert regsel.scad_threshold(-z, lam, a) == pytest.approx(-out, abs=1e-12)
        assert abs(out) <= abs(z) + 1e-12
        if abs(z) >= a * lam:
            assert out == z

    def test_bad_a(self):
        with pytest.raises(ParameterError):
            regsel.scad_threshold(1.0, 1.0, a=2.0)


def orthonormal_standardized_design(rng, n, m):
    """Columns with zero mean and x_j'x_j = n, mutually orthogonal."""
    x = rng.standard_normal((n, m))
    x -= x.mean(axis=0)
    q, _ = np.linalg.qr(x)
    return q * np.sqrt(n)


class TestPenalizedFit:
    def test_orthonormal_lasso_equals_soft_threshold(self, rng):
        n, m, lam = 200, 6, 0.4
        x = orthonormal_standardized_design(rng, n, m)
        y = rng.standard_normal(n) * 2.0
        yc = y - y.mean()
        beta0_hat = x.T @ yc / n  # per-coordinate unpenalized estimate
        fit = regsel.penalized_fit(x, y, PenaltySpec("lasso", lam), tol=1e-10)
        expected = [regsel.soft_threshold(b, lam) for b in beta0_hat]
        assert fit.beta == pytest.approx(expected, abs=1e-8)

    def test_orthonormal_scad_equals_scad_threshold(self, rng):
        n, m, lam, a = 200, 6, 0.4, 3.7
        x = orthonormal_standardized_design(rng, n, m)
        y = rng.standard_normal(n) * 2.0
        yc = y - y.mean()
        beta0_hat = x.T @ yc / n
        fit = regsel.penalized_fit(x, y, PenaltySpec("scad", lam, a), tol=1e-10)
        expected = [regsel.scad_threshold(b, lam, a) for b in beta0_hat]
        assert fit.beta == pytest.approx(expected, abs=1e-8)

    def test_full_shrinkage_at_lambda_max(self, rng):
        x = rng.standard_normal((50, 8))
        y = rng.standard_normal(50)
        lam = regsel.lambda_max(x, y)
        fit = regsel.penalized_fit(x, y, PenaltySpec("lasso", lam * 1.0001))
        assert np.all(fit.beta == 0.0)
        assert fit.support == ()

    def test_lasso_objective_non_increasing(self, rng):
        x = rng.standard_normal((60, 10))
        y = x @ rng.standard_normal(10) + rng.standard_normal(60)
        fit = regsel.penalized_fit(x, y, PenaltySpec("lasso", 0.05))
        hist = np.array(fit.objective_history)
        assert np.all(np.diff(hist) <= 1e-10 * np.maximum(1.0, np.abs(hist[:-1])))

    def test_max_iter_flags_unconverged(self, rng):
        x = rng.standard_normal((40, 5))
        y = rng.standard_normal(40)
        fit = regsel.penalized_fit(x, y, PenaltySpec("lasso", 1e-4), tol=1e-14, max_iter=1)
        assert not fit.converged
        assert fit.iterations == 1

    def test_wrong_kind_rejected(self, rng):
        with pytest.raises(ParameterError):
            regsel.penalized_fit(np.eye(3), [1.0, 2.0, 3.0], PenaltySpec("ridge", 1.0))

    def test_original_scale_prediction(self, rng):
        # un-standardized input: coefficients come back on the raw scale
        x = rng.standard_normal((80, 3)) * np.array([10.0, 0.1, 1.0]) + np.array([5.0, -2.0, 0.0])
        beta_true = np.array([0.3, -4.0, 1.0])
        y = 1.0 + x @ beta_true + 0.01 * rng.standard_normal(80)
        fit = regsel.penalized_fit(x, y, PenaltySpec("lasso", 1e-4), tol=1e-12, max_iter=5000)
        assert fit.predict(x) == pytest.approx(y, abs=0.1)
        assert fit.beta == pytest.approx(beta_true, abs=0.05)

    def test_constant_column_gets_zero_coefficient(self, rng):
        x = rng.standard_normal((60, 3))
        x[:, 1] = 4.0  # constant: cannot carry signal, must stay at zero
        y = 2.0 * x[:, 0] + 0.1 * rng.standard_normal(60)
        fit = regsel.penalized_fit(x, y, PenaltySpec("lasso", 0.01))
        assert fit.beta[1] == 0.0
        assert 1 not in fit.support
        assert 0 in fit.support

    def test_lasso_kkt_conditions_on_general_designs(self, rng):
        """Subgradient optimality on correlated designs, not just orthonormal ones.

        On the internally standardized scale: |x_j'r/n| <= lam at zeros,
        and x_j'r/n = lam * sign(beta_j) on the support.
        """
        for trial in range(5):
            base = rng.standard_normal((120, 1))
            x = 0.6 * base + rng.standard_normal((120, 6))  # correlated columns
            y = x @ rng.standard_normal(6) + rng.standard_normal(120)
            lam = 0.2
            fit = regsel.penalized_fit(x, y, PenaltySpec("lasso", lam), tol=1e-12, max_iter=5000)
            assert fit.converged

            xs = (x - x.mean(axis=0)) / np.sqrt(np.mean((x - x.mean(axis=0)) ** 2, axis=0))
            beta_std = fit.beta * np.sqrt(np.mean((x - x.mean(axis=0)) ** 2, axis=0))
            r = (y - y.mean()) - xs @ beta_std
            corr = xs.T @ r / len(y)
            for j in range(6):
                if beta_std[j] == 0.0:
                    assert abs(corr[j]) <= lam + 1e-8
                else:
                    assert corr[j] == pytest.approx(lam * np.sign(beta_std[j]), abs=1e-8)


class TestTunePenalized:
    def test_grid_shape_and_choice(self, rng):
        x = rng.standard_normal((100, 6))
        y = x[:, 0] * 2.0 + 0.3 * rng.standard_normal(100)
        fit, lam, grid, val_mse = regsel.tune_penalized(x, y, "lasso", n_points=10)
        assert len(grid) == len(val_mse) == 10
        assert lam in grid
        assert 0 in fit.support  # the true predictor survives

    def test_sparse_recovery_scad(self, rng):
        x = rng.standard_normal((150, 10))
        y = x[:, 2] * 1.5 - x[:, 7] * 2.0 + 0.2 * rng.standard_normal(150)
        fit, _, _, _ = regsel.tune_penalized(x, y, "scad")
        assert set(fit.support) >= {2, 7}
        assert len(fit.support) <= 6


class TestSelectFeatures:
    def test_scad_support_selection(self):
        fit = RegressionFit(
            beta=np.array([0.0, 1.2, 0.0, -0.4]), beta0=0.0,
            penalty=PenaltySpec("scad", 1.0), sigma2_hat=1.0,
            gram_eigenvalues=np.ones(4), support=(1, 3), converged=True,
            iterations=3, n_obs=50, dof=45, gram=np.eye(4),
        )
        report = regsel.select_features(fit, ["a", "b", "c", "d"], dataset_label="scad")
        assert report.selected_names == ["b", "d"]
        assert report.rows[0].t is None

    def test_ridge_report_covers_all_features(self, rng):
        x = rng.standard_normal((100, 4))
        y = x @ np.array([3.0, 0.0, -3.0, 0.0]) + 0.5 * rng.standard_normal(100)
        fit = regsel.ridge_fit(x, y, lam=1.0)
        report = regsel.select_features(fit, list("abcd"), alpha=0.05, dataset_label="rr")
        assert len(report.rows) == 4
        assert all(r.p is not None for r in report.rows)
        selected = set(report.selected_names)
        assert {"a", "c"} <= selected

    def test_json_roundtrip(self, tmp_path):
        fit = RegressionFit(
            beta=np.array([0.5, 0.0]), beta0=0.1, penalty=PenaltySpec("lasso", 0.2),
            sigma2_hat=1.0, gram_eigenvalues=np.ones(2), support=(0,), converged=True,
            iterations=2, n_obs=30, dof=27, gram=np.eye(2),
        )
        report = regsel.select_features(fit, ["u", "v"], dataset_label="scad")
        path = tmp_path / "sel.json"
        report.write_json(path)
        loaded = regsel.SelectionReport.from_json_dict(json.loads(path.read_text()))
        assert loaded.selected_names == report.selected_names
        assert loaded.penalty == report.penalty
        assert loaded.dataset_label == "scad"

    def test_csv_columns(self, tmp_path):
        fit = RegressionFit(
            beta=np.array([0.5]), beta0=0.0, penalty=PenaltySpec("lasso", 0.2),
            sigma2_hat=1.0, gram_eigenvalues=np.ones(1), support=(0,), converged=True,
            iterations=1, n_obs=10, dof=8, gram=np.eye(1),
        )
        report = regsel.select_features(fit, ["u"], dataset_label="scad")
        path = tmp_path / "sel.csv"
        report.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "name,coef,t,p,selected"
        assert lines[1].startswith("u,") and lines[1].endswith(",true")

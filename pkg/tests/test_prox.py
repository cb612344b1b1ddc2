import numpy as np
import pytest

from mrfisar import (ComplexImage, RegWeights, build_grid, full_mask, objective,
                     soft_threshold, tv_norm, tv_prox)
from mrfisar.operator import RadarConfig, SensingOperator, default_grid
from mrfisar.prox import tv_prox_values


def cimage(values):
    arr = np.atleast_2d(np.asarray(values, dtype=complex))
    g = build_grid(arr.shape[1], arr.shape[0], 1.0, 1.0)
    return ComplexImage(g, arr)


def tv_loops(u):
    """Naive double-loop isotropic TV of one real array (oracle)."""
    m, n = u.shape
    total = 0.0
    for i in range(m):
        for j in range(n):
            dv = u[i + 1, j] - u[i, j] if i < m - 1 else 0.0
            dh = u[i, j + 1] - u[i, j] if j < n - 1 else 0.0
            total += np.sqrt(dv * dv + dh * dh)
    return total


def tv_denoise_dual_ascent(b, tau, tol=1e-8, max_iter=2_000_000):
    """Plain projected dual gradient (no momentum), run to a tiny duality
    gap.  Independent oracle for tv_prox."""
    m, n = b.shape
    p = np.zeros((m - 1, n))
    q = np.zeros((m, n - 1))
    step = 1.0 / (8.0 * tau)
    x = b.copy()
    for _ in range(max_iter):
        ap = p + step * (x[:-1, :] - x[1:, :])
        aq = q + step * (x[:, :-1] - x[:, 1:])
        a2 = np.zeros(b.shape)
        a2[:-1, :] += ap**2
        a2[:, :-1] += aq**2
        denom = np.maximum(1.0, np.sqrt(a2))
        p = ap / denom[:-1, :]
        q = aq / denom[:, :-1]
        div = np.zeros(b.shape)
        div[:-1, :] += p
        div[1:, :] -= p
        div[:, :-1] += q
        div[:, 1:] += -q
        x = b - tau * div
        pair = float((p * (x[:-1, :] - x[1:, :])).sum() + (q * (x[:, :-1] - x[:, 1:])).sum())
        gap = tau * (tv_loops(x) - pair)
        if gap <= tol:
            break
    return x


class TestSoftThreshold:
    def test_zero_threshold_is_identity(self):
        img = cimage([[1 + 2j, -3.5, 0.25j, 0]])
        out = soft_threshold(img, 0.0)
        np.testing.assert_array_equal(out.values, img.values)

    def test_closed_form_3_4j(self):
        out = soft_threshold(cimage([[3 + 4j]]), 1.0)
        assert out.values[0, 0] == pytest.approx(2.4 + 3.2j)

    def test_small_magnitudes_vanish(self):
        img = cimage([[0.5, -0.3j, 0.4 + 0.3j, 2.0]])
        out = soft_threshold(img, 0.5)
        np.testing.assert_array_equal(out.values[0, :3], 0)
        assert out.values[0, 3] == pytest.approx(1.5)

    def test_magnitude_shrinks_phase_kept(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        out = soft_threshold(cimage(v), 0.35).values
        shrunk = np.abs(v) - np.abs(out)
        np.testing.assert_allclose(shrunk, np.minimum(np.abs(v), 0.35), atol=1e-12)
        keep = np.abs(out) > 0
        np.testing.assert_allclose(np.angle(out[keep]), np.angle(v[keep]), atol=1e-12)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold(cimage([[1.0]]), -0.1)

    def test_nonexpansive(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            u = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
            v = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
            tau = float(rng.uniform(0, 2))
            du = soft_threshold(cimage(u), tau).values - soft_threshold(cimage(v), tau).values
            assert np.linalg.norm(du) <= np.linalg.norm(u - v) + 1e-12

    def test_exactly_solves_subproblem(self):
        # S(v) minimizes tau*||x||_1 + 0.5||x - v||^2 over 1000 perturbations
        rng = np.random.default_rng(2)
        v = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        tau = 0.6
        s = soft_threshold(cimage(v), tau).values

        def f1(x):
            return tau * np.abs(x).sum() + 0.5 * np.linalg.norm(x - v) ** 2

        best = f1(s)
        for _ in range(1000):
            z = s + rng.normal(scale=0.05, size=s.shape) * np.exp(
                2j * np.pi * rng.random(s.shape))
            assert f1(z) >= best - 1e-12

    def test_input_unmodified(self):
        v = np.full((3, 3), 1 + 1j)
        img = cimage(v)
        before = img.values.copy()
        soft_threshold(img, 0.7)
        np.testing.assert_array_equal(img.values, before)


class TestTvNorm:
    def test_constant_image_is_zero(self):
        assert tv_norm(cimage(np.full((5, 5), 2.5))) == 0.0

    def test_single_horizontal_jump(self):
        assert tv_norm(cimage([[0.0, 1.0]])) == pytest.approx(1.0)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(3)
        u = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
        expected = tv_loops(u.real) + tv_loops(u.imag)
        assert tv_norm(cimage(u)) == pytest.approx(expected, rel=1e-13)

    def test_absolute_homogeneity(self):
        rng = np.random.default_rng(4)
        u = rng.normal(size=(6, 6))
        base = tv_norm(cimage(u))
        for a in (-2.0, 0.5, 3.25):
            assert tv_norm(cimage(a * u)) == pytest.approx(abs(a) * base, rel=1e-12)


class TestTvProx:
    def test_zero_tau_identity(self):
        img = cimage(np.random.default_rng(0).normal(size=(4, 4)))
        np.testing.assert_array_equal(tv_prox(img, 0.0).values, img.values)

    def test_constant_image_fixed_point(self):
        img = cimage(np.full((6, 6), 1.3))
        out = tv_prox(img, 2.0, inner_iters=50)
        np.testing.assert_allclose(out.values, img.values, atol=1e-12)

    def test_piecewise_constant_matches_dual_ascent_oracle(self):
        b = np.zeros((4, 4))
        b[:2, :] = 1.0
        b[3, 3] = 2.0
        oracle = tv_denoise_dual_ascent(b, 0.5, tol=1e-8)
        out = tv_prox_values(b, 0.5, inner_iters=5000, tol=1e-12)
        np.testing.assert_allclose(out, oracle, atol=1e-4)

    def test_objective_never_worse_than_input(self):
        rng = np.random.default_rng(5)
        for k in range(10):
            b = rng.normal(size=(8, 8))
            tau = float(rng.uniform(0.05, 1.0))
            for iters in (1, 3, 20):
                out = tv_prox_values(b, tau, inner_iters=iters)
                h_out = 0.5 * ((out - b) ** 2).sum() + tau * tv_loops(out)
                h_in = tau * tv_loops(b)
                assert h_out <= h_in + 1e-10

    def test_complex_parts_processed_independently(self):
        rng = np.random.default_rng(6)
        b = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        out = tv_prox_values(b, 0.4, inner_iters=200, tol=1e-10)
        re = tv_prox_values(b.real, 0.4, inner_iters=200, tol=1e-10)
        im = tv_prox_values(b.imag, 0.4, inner_iters=200, tol=1e-10)
        np.testing.assert_allclose(out, re + 1j * im, atol=1e-12)

    def test_validation(self):
        img = cimage([[1.0]])
        with pytest.raises(ValueError):
            tv_prox(img, -1.0)
        with pytest.raises(ValueError):
            tv_prox(img, 1.0, inner_iters=0)

    def test_input_unmodified(self):
        rng = np.random.default_rng(7)
        img = cimage(rng.normal(size=(5, 5)))
        before = img.values.copy()
        tv_prox(img, 0.8)
        np.testing.assert_array_equal(img.values, before)


class TestObjective:
    @staticmethod
    def _setup():
        cfg = RadarConfig.from_scan(35e9, 1e9, 6, 5000.0, 1.7, 6)
        grid = default_grid(cfg, 6, 6)
        op = SensingOperator(cfg, grid, full_mask(6, 6))
        return cfg, grid, op

    def test_zero_image_is_half_data_norm(self):
        _, grid, op = self._setup()
        rng = np.random.default_rng(0)
        y = op.apply_forward(ComplexImage(grid, rng.normal(size=grid.shape)))
        w = RegWeights(0.3, 0.1)
        val = objective(op, y, ComplexImage.zeros(grid), w)
        assert val == pytest.approx(0.5 * np.linalg.norm(y.samples) ** 2, rel=1e-12)

    def test_exact_fit_with_zero_penalties_is_zero(self):
        _, grid, op = self._setup()
        x = ComplexImage(grid, np.random.default_rng(1).normal(size=grid.shape))
        y = op.apply_forward(x)
        assert objective(op, y, x, RegWeights(0.0, 0.0)) == pytest.approx(0.0, abs=1e-15)

    def test_matches_componentwise_oracle(self):
        _, grid, op = self._setup()
        rng = np.random.default_rng(2)
        x = ComplexImage(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
        y = op.apply_forward(ComplexImage(grid, rng.normal(size=grid.shape)))
        w = RegWeights(0.7, 0.25)
        expected = (0.5 * np.linalg.norm(y.samples - op.forward_values(x.values)) ** 2
                    + 0.7 * np.abs(x.values).sum()
                    + 0.25 * (tv_loops(x.values.real) + tv_loops(x.values.imag)))
        assert objective(op, y, x, w) == pytest.approx(expected, rel=1e-12)


class TestRegWeights:
    def test_weight_sum_enforced(self):
        with pytest.raises(ValueError):
            RegWeights(1.0, 1.0, w1=0.6, w2=0.6)
        with pytest.raises(ValueError):
            RegWeights(1.0, 1.0, w1=0.0, w2=1.0)
        with pytest.raises(ValueError):
            RegWeights(-1.0, 0.0)

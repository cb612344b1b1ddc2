"""Proximal operators and objective evaluation for the l1 + TV penalties.

TV here is the isotropic discrete total variation with forward differences
and reflexive boundary (boundary differences drop).  Complex images are
handled as the sum of the TV of the real and imaginary parts, and tv_prox
is applied to each part independently; this keeps both subproblems convex
and real-valued.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ComplexImage

__all__ = [
    "RegWeights",
    "soft_threshold",
    "tv_norm",
    "tv_prox",
    "objective",
]


@dataclass(frozen=True)
class RegWeights:
    """Penalty weights lambda1 (l1), lambda_tv (TV) and the composite
    splitting weights w1 + w2 = 1."""

    lambda1: float
    lambda_tv: float
    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self) -> None:
        if self.lambda1 < 0 or self.lambda_tv < 0:
            raise ValueError("penalty weights must be >= 0")
        if self.w1 <= 0 or self.w2 <= 0 or abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ValueError("splitting weights must be positive with w1 + w2 = 1")


def soft_threshold_values(values: np.ndarray, tau: float) -> np.ndarray:
    """Complex soft threshold: shrink magnitudes by tau, keep phases."""
    if tau < 0:
        raise ValueError("threshold must be >= 0")
    if tau == 0:
        return values.copy()
    mag = np.abs(values)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > 0, np.maximum(mag - tau, 0.0) / np.where(mag > 0, mag, 1.0), 0.0)
    return values * scale


def soft_threshold(image: ComplexImage, tau: float) -> ComplexImage:
    return ComplexImage(image.grid, soft_threshold_values(image.values, tau))


def _tv_iso(u: np.ndarray) -> float:
    gv = u[1:, :] - u[:-1, :]
    gh = u[:, 1:] - u[:, :-1]
    g2 = np.zeros(u.shape)
    g2[:-1, :] += gv**2
    g2[:, :-1] += gh**2
    return float(np.sqrt(g2).sum())


def tv_norm_values(values: np.ndarray) -> float:
    if np.iscomplexobj(values):
        return _tv_iso(values.real) + _tv_iso(values.imag)
    return _tv_iso(np.asarray(values, dtype=float))


def tv_norm(image: ComplexImage) -> float:
    """Isotropic discrete TV, summed over real and imaginary parts."""
    return tv_norm_values(image.values)


def _dual_div(p: np.ndarray, q: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """L(p, q): adjoint of the forward-difference pair below."""
    out = np.zeros(shape)
    out[:-1, :] += p
    out[1:, :] -= p
    out[:, :-1] += q
    out[:, 1:] -= q
    return out


def _fgp_denoise(b: np.ndarray, tau: float, max_iter: int, tol: float) -> np.ndarray:
    """min_u 0.5||u - b||^2 + tau TV(u) by fast gradient projection on the
    dual, keeping the best primal iterate seen (guarantees the returned
    point never has a worse objective than b itself)."""
    m, n = b.shape
    p = np.zeros((max(m - 1, 0), n))
    q = np.zeros((m, max(n - 1, 0)))
    rp, rq = p.copy(), q.copy()
    t = 1.0
    step = 1.0 / (8.0 * tau)
    best_x = b.copy()
    best_obj = tau * _tv_iso(b)
    for _ in range(max_iter):
        xr = b - tau * _dual_div(rp, rq, b.shape)
        ap = rp + step * (xr[:-1, :] - xr[1:, :])
        aq = rq + step * (xr[:, :-1] - xr[:, 1:])
        # isotropic projection onto the per-pixel unit ball
        a2 = np.zeros(b.shape)
        a2[:-1, :] += ap**2
        a2[:, :-1] += aq**2
        denom = np.maximum(1.0, np.sqrt(a2))
        p_new = ap / denom[:-1, :]
        q_new = aq / denom[:, :-1]
        x = b - tau * _dual_div(p_new, q_new, b.shape)
        tv_x = _tv_iso(x)
        primal = 0.5 * float(((x - b) ** 2).sum()) + tau * tv_x
        if primal < best_obj:
            best_obj = primal
            best_x = x
        pair = float((p_new * (x[:-1, :] - x[1:, :])).sum()
                     + (q_new * (x[:, :-1] - x[:, 1:])).sum())
        gap = tau * (tv_x - pair)
        if gap <= tol * max(1.0, abs(primal)):
            break
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        rp = p_new + ((t - 1.0) / t_next) * (p_new - p)
        rq = q_new + ((t - 1.0) / t_next) * (q_new - q)
        p, q, t = p_new, q_new, t_next
    return best_x


def tv_prox_values(values: np.ndarray, tau: float, inner_iters: int = 20,
                   tol: float = 1e-6) -> np.ndarray:
    if tau < 0:
        raise ValueError("threshold must be >= 0")
    if inner_iters < 1:
        raise ValueError("need at least one inner iteration")
    if tau == 0:
        return values.copy()
    if np.iscomplexobj(values):
        return (_fgp_denoise(values.real, tau, inner_iters, tol)
                + 1j * _fgp_denoise(values.imag, tau, inner_iters, tol))
    return _fgp_denoise(np.asarray(values, dtype=float), tau, inner_iters, tol)


def tv_prox(image: ComplexImage, tau: float, inner_iters: int = 20,
            tol: float = 1e-6) -> ComplexImage:
    """Approximate minimizer of 0.5||u - image||^2 + tau TV(u), applied to
    the real and imaginary parts independently."""
    return ComplexImage(image.grid, tv_prox_values(image.values, tau, inner_iters, tol))


def objective(op, y, x: ComplexImage, w: RegWeights) -> float:
    """F(x) = 0.5||y - phi x||^2 + lambda1 ||x||_1 + lambda_tv ||x||_TV."""
    if x.grid != op.grid:
        raise ValueError("image grid does not match operator grid")
    residual = y.samples - op.forward_values(x.values)
    return (0.5 * float(np.vdot(residual, residual).real)
            + w.lambda1 * float(np.abs(x.values).sum())
            + w.lambda_tv * tv_norm_values(x.values))

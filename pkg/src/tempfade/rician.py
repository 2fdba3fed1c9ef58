"""Rician distribution: density, sampling and maximum-likelihood fitting.

The fitter works on many frames at once. With the second sample moment
``m2 = mean(r**2)`` the likelihood equations reduce to

    sigma**2 = (m2 - s**2) / 2
    s        = mean(r * A(r * s / sigma**2)),     A = I1 / I0

so the maximum over ``(s, sigma)`` is found by a safeguarded Newton search
on the profile gradient ``g(s) = mean(r*A(z)) - s`` over ``0 < s < sqrt(m2)``.
A positive root exists iff ``mean(r**4) < 2*m2**2``; otherwise the maximum
sits on the boundary ``s = 0`` (Rayleigh).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import i0e, i1e

from .errors import DegenerateError

MAX_ITER = 200
GRAD_TOL = 1e-8
# sigma floor relative to the sample RMS on zero-spread frames
SIGMA_FLOOR = 1e-12

# rows per chunk when fitting a frame matrix
_CHUNK_ELEMS = 1 << 21


def rician_pdf(x, s, sigma):
    """Rician density at ``x`` (broadcasting)."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    var = np.asarray(sigma, dtype=float) ** 2
    z = x * s / var
    # exp(-(x^2+s^2)/2v) * I0(z) == exp(-(x-s)^2/2v) * i0e(z)
    return np.where(x >= 0, x / var * np.exp(-(x - s) ** 2 / (2 * var)) * i0e(z), 0.0)


def rician_logpdf(x, s, sigma):
    x = np.asarray(x, dtype=float)
    var = np.asarray(sigma, dtype=float) ** 2
    with np.errstate(divide="ignore"):
        return (np.log(x) - np.log(var) - (x - s) ** 2 / (2 * var)
                + np.log(i0e(x * s / var)))


def sample_rician(s: float, sigma: float, n, rng) -> np.ndarray:
    """Envelope samples |s + sigma*(X + jY)| with X, Y standard normal."""
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    return np.hypot(s + sigma * x, sigma * y)


def bessel_ratio(z):
    """A(z) = I1(z) / I0(z), stable for all z >= 0."""
    return i1e(z) / i0e(z)


def _bessel_ratio_deriv(z, a):
    # A'(z) = 1 - A/z - A^2, with A'(0) = 1/2
    with np.errstate(divide="ignore", invalid="ignore"):
        d = 1.0 - a / z - a * a
    return np.where(z < 1e-6, 0.5 - 3.0 * z * z / 16.0, d)


@dataclass(frozen=True)
class FitResult:
    """Vectorised fit output; every field has one entry per row."""

    s: np.ndarray
    sigma: np.ndarray
    log_likelihood: np.ndarray
    grad_norm: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    degenerate: np.ndarray


def _profile(r, s):
    """sigma^2(s), g(s) and g'(s) for every row of ``r`` at the row's ``s``."""
    sc = s[:, None]
    var = np.mean((r - sc) * (r + sc), axis=1) / 2.0
    var = np.maximum(var, np.finfo(float).tiny)
    z = r * (sc / var[:, None])
    a = bessel_ratio(z)
    g = np.mean(r * a, axis=1) - s
    dz = r * ((var + s * s) / (var * var))[:, None]
    dg = np.mean(r * _bessel_ratio_deriv(z, a) * dz, axis=1) - 1.0
    return var, g, dg


def _fit_block(r: np.ndarray, max_iter: int, tol: float):
    n_rows = r.shape[0]
    m2 = np.mean(r * r, axis=1)
    m4 = np.mean(r ** 4, axis=1)
    rms = np.sqrt(m2)
    spread = np.ptp(r, axis=1)

    s = np.zeros(n_rows)
    var = m2 / 2.0
    iters = np.zeros(n_rows, dtype=int)
    grad = np.zeros(n_rows)
    converged = np.ones(n_rows, dtype=bool)
    degenerate = spread == 0.0

    # moment (K-factor) initialisation: s^4 = 2 m2^2 - m4 for a Rician law
    d = 2.0 * m2 * m2 - m4
    active = (d > 0) & ~degenerate
    lo = np.zeros(n_rows)
    hi = rms.copy()
    s[active] = np.minimum(np.sqrt(np.sqrt(d[active])), 0.999 * rms[active])
    converged[active] = False

    for it in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        v, g, dg = _profile(r[idx], s[idx])
        sigma = np.sqrt(v)
        # gradient of the mean log-likelihood w.r.t. (s, log sigma), s-part scaled by sigma
        gn = np.abs(g) / sigma * np.sqrt(1.0 + (s[idx] / sigma) ** 2)
        grad[idx] = gn
        iters[idx] = it + 1
        lo[idx] = np.where(g > 0, s[idx], lo[idx])
        hi[idx] = np.where(g > 0, hi[idx], s[idx])
        done = (gn < tol) | (hi[idx] - lo[idx] <= 4 * np.spacing(hi[idx]))
        converged[idx[done]] = True
        step = idx[~done]
        if step.size == 0:
            active[idx] = False
            break
        gs, dgs = g[~done], dg[~done]
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = s[step] - gs / dgs
        bis = 0.5 * (lo[step] + hi[step])
        ok = np.isfinite(newton) & (newton > lo[step]) & (newton < hi[step])
        s[step] = np.where(ok, newton, bis)
        active[idx[done]] = False

    s = np.where(spread == 0.0, rms, s)
    var = np.mean((r - s[:, None]) * (r + s[:, None]), axis=1) / 2.0
    floor = (SIGMA_FLOOR * rms) ** 2
    degenerate |= var <= floor
    var = np.maximum(var, floor)
    sigma = np.sqrt(var)
    with np.errstate(divide="ignore"):
        ll = np.sum(rician_logpdf(r, s[:, None], sigma[:, None]), axis=1)
    return s, sigma, ll, grad, iters, converged, degenerate


def fit_rician_rows(r, max_iter: int = MAX_ITER, tol: float = GRAD_TOL) -> FitResult:
    """Maximum-likelihood (s, sigma) for every row of a 2-D sample matrix."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[1] == 0:
        raise ValueError("expected a non-empty 2-D sample matrix")
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("envelope samples must be finite and non-negative")
    if np.any(np.all(r == 0, axis=1)):
        raise DegenerateError("all-zero envelope frame")
    rows = max(1, _CHUNK_ELEMS // r.shape[1])
    parts = [_fit_block(r[i:i + rows], max_iter, tol) for i in range(0, r.shape[0], rows)]
    return FitResult(*(np.concatenate(p) for p in zip(*parts)))


def k_factor(s, sigma):
    """Rician K-factor s^2 / (2 sigma^2)."""
    return np.asarray(s) ** 2 / (2.0 * np.asarray(sigma) ** 2)

"""Frame-sliced Rician fitting of an envelope trace.

The trace is cut into 5 ms frames. Inside each frame the channel is taken as
static, so the envelope follows a Rician law R(s, sigma); fitting every frame
gives the dynamic track (s(t), sigma(t)).

Goodness of fit is the residue

    residue = sum_k (r_k - rhat_k)**2 / r_k        (bins with r_k > 0)

where ``r_k`` is the empirical probability of histogram bin k and ``rhat_k``
the fitted density at the bin centre times the bin width. The track-level
value is the mean over frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import DegenerateError
from .link import FRAME_S, RSSI_WINDOW_S, Frame, IQTrace, frame_length
from .rician import fit_rician_rows, rician_pdf

N_BINS = 40
MIN_FIT_SAMPLES = 50
STATIONARITY_THRESHOLD = 3.0
# cap on samples used for the whole-trace fit (deterministic stride subsample)
GLOBAL_FIT_MAX_SAMPLES = 1 << 21


@dataclass(frozen=True)
class HistogramPdf:
    bin_edges: np.ndarray
    densities: np.ndarray
    counts: np.ndarray

    @property
    def width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def probabilities(self) -> np.ndarray:
        return self.densities * self.width


@dataclass(frozen=True)
class RicianFit:
    s: float
    sigma: float
    log_likelihood: float
    residue: float
    n_samples: int
    converged: bool = True
    degenerate: bool = False
    iterations: int = 0
    grad_norm: float = 0.0

    @property
    def k_factor(self) -> float:
        return self.s ** 2 / (2.0 * self.sigma ** 2)


@dataclass(frozen=True)
class DynamicRicianTrack:
    frame_times: np.ndarray
    fits: list = field(repr=False)
    mean_residue: float = math.nan

    def __len__(self):
        return len(self.fits)

    @property
    def s(self) -> np.ndarray:
        return np.array([f.s for f in self.fits])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([f.sigma for f in self.fits])

    @property
    def residues(self) -> np.ndarray:
        return np.array([f.residue for f in self.fits])


def histogram_pdf(samples, bins: int = N_BINS) -> HistogramPdf:
    """Uniform-bin density histogram over [min, max] of ``samples``."""
    samples = np.asarray(samples, dtype=float)
    lo, hi = float(samples.min()), float(samples.max())
    if hi <= lo:
        raise DegenerateError("zero-spread samples cannot be binned")
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    dens = counts / (samples.size * (edges[1] - edges[0]))
    return HistogramPdf(edges, dens, counts)


def residue(hist: HistogramPdf, fit) -> float:
    """Fitting residue of one frame's histogram against a Rician fit."""
    p = hist.probabilities
    phat = rician_pdf(hist.centers, fit.s, fit.sigma) * hist.width
    m = hist.counts > 0
    return float(np.sum((p[m] - phat[m]) ** 2 / p[m]))


def _batch_histograms(r: np.ndarray, bins: int):
    """Per-row histograms over each row's [min, max]; returns counts, lo, width."""
    lo = r.min(axis=1)
    width = (r.max(axis=1) - lo) / bins
    safe = np.where(width > 0, width, 1.0)
    idx = np.minimum(((r - lo[:, None]) / safe[:, None]).astype(np.int64), bins - 1)
    idx += (np.arange(r.shape[0]) * bins)[:, None]
    counts = np.bincount(idx.ravel(), minlength=r.shape[0] * bins).reshape(r.shape[0], bins)
    return counts, lo, width


def _batch_residue(counts, lo, width, s, sigma) -> np.ndarray:
    n = counts.sum(axis=1, keepdims=True)
    bins = counts.shape[1]
    centers = lo[:, None] + (np.arange(bins) + 0.5) * width[:, None]
    phat = rician_pdf(centers, np.asarray(s)[..., None], np.asarray(sigma)[..., None]) * width[:, None]
    p = counts / n
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, (p - phat) ** 2 / p, 0.0)
    res = terms.sum(axis=1)
    return np.where(width > 0, res, math.nan)


def slice_frames(trace: IQTrace, frame_s: float = FRAME_S) -> list:
    """Consecutive non-overlapping frames; a trailing partial frame is dropped."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    if not frame_s > 0:
        raise ValueError("frame length must be positive")
    n = frame_length(trace.sample_rate_hz, frame_s)
    n_frames = len(trace) // n if n else 0
    return [Frame(k, trace.samples[k * n:(k + 1) * n], trace.sample_rate_hz,
                  trace.start_time_s + k * n / trace.sample_rate_hz)
            for k in range(n_frames)]


def _frame_matrix(trace: IQTrace, frame_s: float):
    if len(trace) == 0:
        raise ValueError("empty trace")
    n = frame_length(trace.sample_rate_hz, frame_s)
    n_frames = len(trace) // n if n else 0
    x = trace.samples[:n_frames * n].reshape(n_frames, n)
    times = trace.start_time_s + np.arange(n_frames) * n / trace.sample_rate_hz
    return x, times


def _envelope_rows(x: np.ndarray, norm_mw: float) -> np.ndarray:
    re = x.real.astype(float)
    im = x.imag.astype(float)
    return np.sqrt(norm_mw * (re * re + im * im))


def _fits_from_rows(r: np.ndarray, bins: int) -> list:
    res = fit_rician_rows(r)
    counts, lo, width = _batch_histograms(r, bins)
    resid = _batch_residue(counts, lo, width, res.s, res.sigma)
    n = r.shape[1]
    return [RicianFit(float(res.s[i]), float(res.sigma[i]), float(res.log_likelihood[i]),
                      float(resid[i]), n, bool(res.converged[i]), bool(res.degenerate[i]),
                      int(res.iterations[i]), float(res.grad_norm[i]))
            for i in range(r.shape[0])]


def fit_rician_mle(envelopes, bins: int = N_BINS) -> RicianFit:
    """Maximum-likelihood Rician fit of one set of envelope samples.

    The residue field is computed against a ``bins``-bin histogram of the
    same samples (NaN when all samples are equal).
    """
    r = np.asarray(envelopes, dtype=float).ravel()
    if r.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples, got {r.size}")
    if np.any(r < 0):
        raise ValueError("envelope samples must be non-negative")
    return _fits_from_rows(r[None, :], bins)[0]


def track(trace: IQTrace, frame_s: float = FRAME_S, bins: int = N_BINS,
          chunk_frames: int = 400) -> DynamicRicianTrack:
    """Fit every frame of ``trace``; returns the (s, sigma, residue) track."""
    x, times = _frame_matrix(trace, frame_s)
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 frames, got {x.shape[0]}")
    if x.shape[1] < MIN_FIT_SAMPLES:
        raise ValueError(f"frames hold {x.shape[1]} samples, need {MIN_FIT_SAMPLES}")
    fits = []
    for i in range(0, x.shape[0], chunk_frames):
        fits.extend(_fits_from_rows(_envelope_rows(x[i:i + chunk_frames], trace.norm_mw), bins))
    res = np.array([f.residue for f in fits])
    return DynamicRicianTrack(times, fits, float(np.nanmean(res)) if np.any(np.isfinite(res)) else math.nan)


def correlation(tr: DynamicRicianTrack) -> float:
    """Pearson correlation between the s and sigma series of a track."""
    if len(tr) < 10:
        raise ValueError(f"need at least 10 frames, got {len(tr)}")
    s, sg = tr.s, tr.sigma
    if np.ptp(s) == 0 or np.ptp(sg) == 0:
        raise DegenerateError("correlation undefined for a constant series")
    return float(np.corrcoef(s, sg)[0, 1])


@dataclass(frozen=True)
class StationarityResult:
    """``verdict`` is None when the trace is degenerate (no spread)."""

    verdict: Optional[str]
    ratio: float
    global_residue: float
    frame_residue: float
    global_fit: Optional[RicianFit] = None
    degenerate: bool = False

    @property
    def stationary(self) -> Optional[bool]:
        return None if self.verdict is None else self.verdict == "stationary"


def stationarity_check(trace: IQTrace, frame_s: float = FRAME_S, bins: int = N_BINS,
                       threshold: float = STATIONARITY_THRESHOLD,
                       tr: Optional[DynamicRicianTrack] = None) -> StationarityResult:
    """Compare one whole-trace Rician fit against the per-frame fits.

    Each frame histogram is scored against the single global fit; the ratio of
    that mean residue to the mean per-frame-fit residue is ~1 for a
    stationary trace. The verdict is "non-stationary" iff ratio > threshold.
    """
    x, _ = _frame_matrix(trace, frame_s)
    if x.shape[0] < 10:
        raise ValueError(f"need at least 10 frames, got {x.shape[0]}")
    if tr is None:
        tr = track(trace, frame_s, bins)
    flat = x.reshape(-1)
    stride = max(1, math.ceil(flat.size / GLOBAL_FIT_MAX_SAMPLES))
    r_sub = _envelope_rows(flat[::stride][None, :], trace.norm_mw)[0]
    if np.ptp(r_sub) == 0 or not np.isfinite(tr.mean_residue):
        return StationarityResult(None, math.nan, math.nan, math.nan, None, True)
    gfit = fit_rician_mle(r_sub, bins)
    g_res = []
    for i in range(0, x.shape[0], 400):
        r = _envelope_rows(x[i:i + 400], trace.norm_mw)
        counts, lo, width = _batch_histograms(r, bins)
        g_res.append(_batch_residue(counts, lo, width, gfit.s, gfit.sigma))
    g = np.concatenate(g_res)
    global_residue = float(np.nanmean(g))
    ratio = global_residue / tr.mean_residue
    verdict = "non-stationary" if ratio > threshold else "stationary"
    return StationarityResult(verdict, ratio, global_residue, tr.mean_residue, gfit, False)


def rssi_errors(trace: IQTrace, frame_s: float = FRAME_S, window_s: float = RSSI_WINDOW_S) -> np.ndarray:
    """Per-frame |RSSI - 10 log10(frame mean power)| in dB."""
    x, _ = _frame_matrix(trace, frame_s)
    if x.shape[0] < 1:
        raise ValueError("trace shorter than one frame")
    n_win = int(round(window_s * trace.sample_rate_hz))
    if n_win < 1 or n_win > x.shape[1]:
        raise ValueError("RSSI window does not fit in a frame")
    p = trace.norm_mw * (x.real.astype(float) ** 2 + x.imag.astype(float) ** 2)
    with np.errstate(divide="ignore"):
        rssi = np.floor(10.0 * np.log10(p[:, :n_win].mean(axis=1)) + 0.5)
        true = 10.0 * np.log10(p.mean(axis=1))
    return np.abs(rssi - true)


def rssi_error_stats(trace: IQTrace, frame_s: float = FRAME_S) -> tuple:
    """Mean and maximum absolute RSSI error over all frames, in dB."""
    err = rssi_errors(trace, frame_s)
    return float(np.mean(err)), float(np.max(err))


def jitter(series) -> float:
    """RMS frame-to-frame change of a track series relative to its mean level."""
    series = np.asarray(series, dtype=float)
    return float(np.sqrt(np.mean(np.diff(series) ** 2)) / np.mean(series))


def ks_statistic(envelopes, fit) -> float:
    """Kolmogorov-Smirnov distance of samples against a Rician fit (auxiliary)."""
    dist = stats.rice(fit.s / fit.sigma, scale=fit.sigma)
    return float(stats.kstest(np.asarray(envelopes, dtype=float), dist.cdf).statistic)


def summarize(trace: IQTrace, tr: DynamicRicianTrack, stat: StationarityResult,
              ks_frames: int = 20) -> dict:
    """Structured summary of an envelope analysis run."""
    try:
        corr = correlation(tr)
    except (DegenerateError, ValueError):
        corr = None
    mean_err, max_err = rssi_error_stats(trace)
    x, _ = _frame_matrix(trace, FRAME_S)
    picks = np.unique(np.linspace(0, len(tr) - 1, min(ks_frames, len(tr))).astype(int))
    ks = []
    for i in picks:
        f = tr.fits[i]
        if not f.degenerate and i < x.shape[0]:
            ks.append(ks_statistic(_envelope_rows(x[i:i + 1], trace.norm_mw)[0], f))
    s = tr.s
    return {
        "n_frames": len(tr),
        "mean_residue": tr.mean_residue,
        "correlation_s_sigma": corr,
        "stationarity": {"verdict": stat.verdict, "ratio": stat.ratio,
                         "global_residue": stat.global_residue},
        "rssi": {"mean_abs_error_db": mean_err, "max_abs_error_db": max_err},
        "s_range": {"min": float(s.min()), "max": float(s.max())},
        "sigma_mean": float(np.mean(tr.sigma)),
        "ks_statistic_mean": float(np.mean(ks)) if ks else None,
    }

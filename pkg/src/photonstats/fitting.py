"""Recover photon-number probabilities from a pulse-area histogram.

Peaks in the histogram correspond to photon numbers. Each is a Gaussian; the
area under a peak counts the events at that photon number, and normalizing
the areas by their total yields the probability per gate. Peaks are assigned
photon numbers by the ordinal position of their centers (pedestal first).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .distributions import MIN_CUTOFF, PhotonDistribution
from .ioutil import SCHEMA_VERSION

SQRT_2PI = math.sqrt(2.0 * math.pi)
SMOOTH_WINDOW = 3
XTOL = 1e-8
MAX_ITER = 200
# A real peak must stand above max(absolute floor, 3 sqrt(height)); Poisson
# wiggles on the flank of a tall peak have prominence of order 2 sqrt(height)
# after 3-bin smoothing, so 3 sqrt rejects them with margin.
PROMINENCE_FLOOR = 4.0
PROMINENCE_PER_SQRT = 3.0


class PeakOverlapWarning(UserWarning):
    """Two fitted peaks sit closer than half a peak width."""


@dataclass(frozen=True)
class FittedPeak:
    photon_number: int
    center: float
    width: float
    area: float
    area_std_error: float


@dataclass(frozen=True)
class PeakFitResult:
    """Sum-of-Gaussians fit: per-peak parameters plus convergence status."""

    peaks: tuple[FittedPeak, ...]
    residual_norm: float
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "peaks": [
                {
                    "photon_number": p.photon_number,
                    "center": p.center,
                    "width": p.width,
                    "area": p.area,
                    "area_std_error": p.area_std_error,
                }
                for p in self.peaks
            ],
            "residual_norm": self.residual_norm,
            "converged": self.converged,
        }


def _smooth(y: np.ndarray) -> np.ndarray:
    kernel = np.ones(SMOOTH_WINDOW) / SMOOTH_WINDOW
    return np.convolve(y.astype(np.float64), kernel, mode="same")


def _half_max_width(smoothed: np.ndarray, idx: int, bin_width: float) -> float:
    """Estimate a Gaussian sigma from the half-maximum crossings around idx."""
    half = smoothed[idx] / 2.0
    left = idx
    while left > 0 and smoothed[left - 1] > half and left > idx - 50:
        left -= 1
    right = idx
    while right < smoothed.size - 1 and smoothed[right + 1] > half and right < idx + 50:
        right += 1
    fwhm_bins = max(right - left, 1)
    return max(fwhm_bins * bin_width / 2.3548, bin_width / 2.0)


def detect_peaks(h) -> list[tuple[float, float, float]]:
    """Initial (center, width, height) guesses, ordered by center.

    Local-maxima scan on a 3-bin moving average, filtered by prominence so
    counting noise on the flanks of tall peaks is rejected. Any histogram
    with a nonzero bin yields at least one guess (falling back to the global
    maximum).
    """
    counts = h.counts
    if counts.size == 0 or counts.sum() == 0:
        raise ValueError("empty histogram: no counts to detect peaks in")
    smoothed = _smooth(counts)
    centers = h.bin_centers
    bw = h.bin_width

    idxs, props = find_peaks(smoothed, distance=2, prominence=0.0)
    keep = []
    for idx, prom in zip(idxs, props["prominences"]):
        if prom >= max(PROMINENCE_FLOOR, PROMINENCE_PER_SQRT * math.sqrt(smoothed[idx])):
            keep.append(idx)
    if not keep:
        keep = [int(np.argmax(smoothed))]
    return [
        (float(centers[i]), _half_max_width(smoothed, i, bw), float(max(smoothed[i], 1.0)))
        for i in keep
    ]


def _sum_of_gaussians(x: np.ndarray, params: np.ndarray) -> np.ndarray:
    y = np.zeros_like(x)
    for k in range(params.size // 3):
        height, center, width = params[3 * k : 3 * k + 3]
        y = y + height * np.exp(-0.5 * ((x - center) / width) ** 2)
    return y


def _fit_window(x, y, sigma, p0, lo, hi):
    def residuals(params):
        return (_sum_of_gaussians(x, params) - y) / sigma

    return least_squares(
        residuals,
        np.clip(p0, lo, hi),
        bounds=(lo, hi),
        xtol=XTOL,
        ftol=1e-12,
        gtol=1e-12,
        max_nfev=MAX_ITER * (p0.size + 1),
    )


def _bounds_for(n_peaks: int, x: np.ndarray, bin_width: float):
    lo = np.tile([0.0, x[0] - bin_width, bin_width / 10.0], n_peaks)
    hi = np.tile([np.inf, x[-1] + bin_width, x[-1] - x[0]], n_peaks)
    return lo, hi


def _area_uncertainties(result, params: np.ndarray, bin_width: float) -> np.ndarray:
    """Per-peak area standard errors from the curvature of the weighted objective."""
    n_peaks = params.size // 3
    jac = result.jac
    try:
        cov = np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((params.size, params.size), np.nan)
    stds = np.empty(n_peaks)
    for k in range(n_peaks):
        height, _, width = params[3 * k : 3 * k + 3]
        grad = np.zeros(params.size)
        grad[3 * k] = width * SQRT_2PI / bin_width
        grad[3 * k + 2] = height * SQRT_2PI / bin_width
        var = float(grad @ cov @ grad)
        stds[k] = math.sqrt(var) if math.isfinite(var) and var > 0 else 0.0
    return stds


def fit_peaks(h, guesses, *, simultaneous: bool = True) -> PeakFitResult:
    """Weighted nonlinear least squares of a sum of Gaussians to the histogram.

    Args:
        h: AreaHistogram to fit.
        guesses: iterable of (center, width, height) initial guesses.
        simultaneous: fit all peaks jointly (handles overlapping tails); when
            False, each peak is fitted alone on the window between its
            neighbors' midpoints.

    Returns:
        PeakFitResult with peak areas in event-count units. On
        non-convergence the best iterate is returned with converged=False.
    """
    guesses = sorted(guesses, key=lambda g: g[0])
    if not guesses:
        raise ValueError("need at least one peak guess")
    x = h.bin_centers
    y = h.counts.astype(np.float64)
    sigma = np.sqrt(np.maximum(y, 1.0))
    bw = h.bin_width

    if simultaneous:
        p0 = np.array([v for (c, w, amp) in guesses for v in (amp, c, w)])
        lo, hi = _bounds_for(len(guesses), x, bw)
        result = _fit_window(x, y, sigma, p0, lo, hi)
        params = result.x
        converged = bool(result.status > 0)
        residual_norm = float(np.linalg.norm(result.fun))
        area_stds = _area_uncertainties(result, params, bw)
        triples = [tuple(params[3 * k : 3 * k + 3]) for k in range(len(guesses))]
    else:
        centers_guess = [g[0] for g in guesses]
        edges = [x[0] - bw]
        edges += [0.5 * (a + b) for a, b in zip(centers_guess, centers_guess[1:])]
        edges += [x[-1] + bw]
        triples, area_stds_l, sq_norms = [], [], []
        converged = True
        for k, (c, w, amp) in enumerate(guesses):
            mask = (x >= edges[k]) & (x < edges[k + 1])
            if mask.sum() < 4:
                mask = np.ones_like(mask)
            p0 = np.array([amp, c, w])
            lo, hi = _bounds_for(1, x[mask], bw)
            result = _fit_window(x[mask], y[mask], sigma[mask], p0, lo, hi)
            converged &= bool(result.status > 0)
            triples.append(tuple(result.x))
            area_stds_l.append(_area_uncertainties(result, result.x, bw)[0])
            sq_norms.append(float(result.fun @ result.fun))
        residual_norm = math.sqrt(math.fsum(sq_norms))
        area_stds = np.asarray(area_stds_l)

    order = np.argsort([t[1] for t in triples])
    peaks = []
    for rank, k in enumerate(order):
        height, center, width = triples[k]
        width = abs(width)
        area = height * width * SQRT_2PI / bw
        std = max(area_stds[k], math.sqrt(max(area, 0.0)))
        peaks.append(FittedPeak(rank, float(center), float(width), float(area), float(std)))

    for a, b in zip(peaks, peaks[1:]):
        if b.center - a.center < 0.5 * max(a.width, b.width):
            warnings.warn(
                f"peaks {a.photon_number} and {b.photon_number} overlap "
                f"(centers {a.center:.3g} and {b.center:.3g}); consider merging",
                PeakOverlapWarning,
                stacklevel=2,
            )
    return PeakFitResult(tuple(peaks), residual_norm=residual_norm, converged=converged)


def areas_to_probabilities(fit: PeakFitResult):
    """Normalize fitted peak areas into per-gate probabilities.

    Probabilities are indexed by the peaks' photon numbers and padded with
    zeros up to the minimum usable cutoff. Returns the distribution together
    with the integer-rounded event counts behind each probability.
    """
    if not fit.converged:
        raise ValueError("fit did not converge; refusing to normalize its areas")
    areas = np.array([p.area for p in fit.peaks])
    total = areas.sum()
    if total <= 0:
        raise ValueError("total fitted area is zero")
    size = max(areas.size, MIN_CUTOFF + 1)
    probs = np.zeros(size)
    probs[: areas.size] = areas / total
    event_counts = np.zeros(size, dtype=np.int64)
    event_counts[: areas.size] = np.rint(areas).astype(np.int64)
    return PhotonDistribution(probs), event_counts

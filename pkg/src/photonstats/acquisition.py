"""Monte Carlo model of the gated acquisition chain.

Each laser gate draws a true photon number from the source, thins it through
the detector efficiency, adds Poisson dark counts, and (optionally) turns the
detected count into one pulse-area sample: a Gaussian centered at
offset + k * gain whose width grows with k. Samples beyond the digitizer
range are tallied as overflow rather than binned.

Randomness is organized in fixed-size gate blocks, each with its own seeded
stream derived from (seed, stream tag, block index). Outputs are therefore
bit-reproducible and independent of how blocks might be distributed over
workers; splitting a run into block-aligned shards and concatenating gives
the same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from io import StringIO
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .channel import DEFAULT_CUTOFF, detector_matrix, apply_channel
from .distributions import SourceSpec, make_distribution
from .fitting import areas_to_probabilities, detect_peaks, fit_peaks
from .ioutil import SCHEMA_VERSION
from .nonclassical import GammaReport, gamma_significance

GATE_BLOCK = 1 << 16
_COUNT_STREAM = 0
_AREA_STREAM = 1
_SWEEP_STREAM = 2


@dataclass(frozen=True)
class DetectorModel:
    """Efficiency, dark counts, and pulse-area response of the detector chain.

    The pulse area for k detected photons is Gaussian with mean
    offset + k * gain and standard deviation sqrt(sigma0^2 + k * sigma_per_photon^2).
    ``adc_max`` is the digitizer saturation point: larger areas are lost to
    overflow.
    """

    eta: float = 0.67
    dark_mean: float = 4e-4
    gain: float = 10.0
    offset: float = 0.0
    sigma0: float = 1.0
    sigma_per_photon: float = 0.3
    adc_max: float = 120.0
    dark_after_loss: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.eta}")
        if self.dark_mean < 0:
            raise ValueError(f"dark count mean must be >= 0, got {self.dark_mean}")
        if self.gain <= 0:
            raise ValueError(f"gain must be positive, got {self.gain}")
        if self.sigma0 <= 0 or self.sigma_per_photon < 0:
            raise ValueError("peak widths must be positive (sigma0 > 0, sigma_per_photon >= 0)")
        if self.adc_max <= self.offset:
            raise ValueError("adc_max must exceed the pedestal offset")

    def peak_center(self, k) -> np.ndarray | float:
        return self.offset + np.asarray(k) * self.gain

    def peak_width(self, k) -> np.ndarray | float:
        return np.sqrt(self.sigma0**2 + np.asarray(k) * self.sigma_per_photon**2)

    def check_resolvable(self, cutoff: int) -> None:
        """Require gain > 4x the widest peak up to ``cutoff`` so peaks separate."""
        widest = float(self.peak_width(cutoff))
        if self.gain <= 4.0 * widest:
            raise ValueError(
                f"peaks unresolvable: gain {self.gain} must exceed 4 x width "
                f"{widest:.3f} at photon number {cutoff}"
            )

    def to_json_dict(self) -> dict:
        return {
            "eta": self.eta,
            "dark_mean": self.dark_mean,
            "gain": self.gain,
            "offset": self.offset,
            "sigma0": self.sigma0,
            "sigma_per_photon": self.sigma_per_photon,
            "adc_max": self.adc_max,
            "dark_after_loss": self.dark_after_loss,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DetectorModel":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class AreaHistogram:
    """Binned pulse-area counts from ``n_gates`` gates plus the overflow tally."""

    bin_edges: np.ndarray
    counts: np.ndarray
    n_gates: int
    overflow: int = 0

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be a strictly increasing 1-D sequence")
        if counts.shape != (edges.size - 1,):
            raise ValueError("counts length must be number of bins")
        if np.any(counts < 0):
            raise ValueError("bin counts must be nonnegative")
        if int(counts.sum()) + self.overflow > self.n_gates:
            raise ValueError("binned counts plus overflow exceed the number of gates")
        edges = edges.copy()
        counts = counts.copy()
        edges.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    def to_csv(self) -> str:
        out = StringIO()
        out.write("bin_center,count\n")
        for c, n in zip(self.bin_centers, self.counts):
            out.write(f"{float(c)!r},{int(n)}\n")
        return out.getvalue()

    def sidecar_dict(self, detector: DetectorModel | None = None) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "bin_edges": [float(e) for e in self.bin_edges],
            "n_gates": self.n_gates,
            "overflow": self.overflow,
        }
        if detector is not None:
            d["detector"] = detector.to_json_dict()
        return d

    @classmethod
    def from_csv(cls, text: str, sidecar: dict | None = None) -> "AreaHistogram":
        rows = [line for line in text.splitlines() if line.strip()]
        if not rows or rows[0].strip() != "bin_center,count":
            raise ValueError("expected CSV header 'bin_center,count'")
        centers = np.empty(len(rows) - 1)
        counts = np.empty(len(rows) - 1, dtype=np.int64)
        for k, line in enumerate(rows[1:]):
            c_str, n_str = line.split(",")
            centers[k] = float(c_str)
            counts[k] = int(n_str)
        if sidecar is not None:
            edges = np.asarray(sidecar["bin_edges"], dtype=np.float64)
            return cls(edges, counts, n_gates=int(sidecar["n_gates"]),
                       overflow=int(sidecar.get("overflow", 0)))
        # No sidecar (e.g. instrument data): assume uniform bins, no overflow.
        if centers.size < 2:
            raise ValueError("cannot infer bin edges from fewer than two bins")
        width = centers[1] - centers[0]
        edges = np.concatenate([centers - width / 2.0, [centers[-1] + width / 2.0]])
        return cls(edges, counts, n_gates=int(counts.sum()), overflow=0)

    @classmethod
    def load(cls, csv_path: str | Path, sidecar_path: str | Path | None = None) -> "AreaHistogram":
        import json

        text = Path(csv_path).read_text()
        sidecar = None
        if sidecar_path is not None and Path(sidecar_path).exists():
            sidecar = json.loads(Path(sidecar_path).read_text())
        return cls.from_csv(text, sidecar)


def default_pairs_per_uw(
    target_p1: float = 0.0818,
    power_uw: float = 1.0,
    eta: float = 0.67,
    dark_mean: float = 4e-4,
    calibration_cutoff: int = 40,
) -> float:
    """Mean pairs per gate per microwatt that puts the one-count probability
    at ``target_p1`` for the given detector at ``power_uw``.

    There is no absolute photon-flux calibration to fall back on, so the
    default anchors the simulated 1 uW operating point to the measured
    one-count probability.
    """
    m = detector_matrix(eta, dark_mean, calibration_cutoff)

    def p1_minus_target(mu: float) -> float:
        src = SourceSpec(kind="pdc_pairs", cutoff=calibration_cutoff, mean=mu)
        return float(apply_channel(m, make_distribution(src)).probs[1]) - target_p1

    mu_at_power = brentq(p1_minus_target, 1e-6, 2.0, xtol=1e-13)
    return mu_at_power / power_uw


@dataclass(frozen=True)
class PumpModel:
    """Pump powers to sweep and the power-to-pair-rate calibration."""

    powers: tuple[float, ...]
    pairs_per_uW: float | None = None
    pair_statistics: str = "poissonian"

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        if not self.powers or any(p <= 0 for p in self.powers):
            raise ValueError("pump powers must be a nonempty list of positive values")
        if self.pairs_per_uW is None:
            object.__setattr__(self, "pairs_per_uW", default_pairs_per_uw())
        if self.pairs_per_uW <= 0:
            raise ValueError(f"pairs_per_uW must be positive, got {self.pairs_per_uW}")

    def mean_pairs(self, power_uw: float) -> float:
        return self.pairs_per_uW * power_uw

    def to_json_dict(self) -> dict:
        return {
            "powers": list(self.powers),
            "pairs_per_uW": self.pairs_per_uW,
            "pair_statistics": self.pair_statistics,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PumpModel":
        return cls(
            powers=tuple(d["powers"]),
            pairs_per_uW=d.get("pairs_per_uW"),
            pair_statistics=d.get("pair_statistics", "poissonian"),
        )


def _block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, block]))


def _draw_true_counts(spec: SourceSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw per-gate true photon numbers from the (untruncated) source law."""
    if spec.kind == "poisson":
        return rng.poisson(spec.mean, size)
    if spec.kind == "pdc_pairs":
        if spec.pair_statistics == "poissonian":
            pairs = rng.poisson(spec.mean, size)
        else:
            # Bose-Einstein pair number: geometric on {1, 2, ...} shifted to {0, 1, ...}
            pairs = rng.geometric(1.0 / (1.0 + spec.mean), size) - 1
        return 2 * pairs
    if spec.kind == "fock":
        return np.full(size, spec.n, dtype=np.int64)
    # mixture: pick a component per gate, then draw each component's gates
    idx = rng.choice(len(spec.weights), size=size, p=np.asarray(spec.weights))
    out = np.zeros(size, dtype=np.int64)
    for ci, comp in enumerate(spec.components):
        mask = idx == ci
        if mask.any():
            out[mask] = _draw_true_counts(comp, int(mask.sum()), rng)
    return out


def simulate_gate_counts(
    source: SourceSpec,
    det: DetectorModel,
    n_gates: int,
    seed: int,
) -> np.ndarray:
    """Per-gate detected photon counts for ``n_gates`` gates.

    Each photon survives independently with probability eta (exact binomial
    thinning) and Poisson(dark_mean) dark counts are added per gate. With
    ``dark_after_loss=False`` the dark counts are injected before thinning
    instead.
    """
    if n_gates < 1:
        raise ValueError(f"n_gates must be >= 1, got {n_gates}")
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")
    out = np.empty(n_gates, dtype=np.int64)
    for block, start in enumerate(range(0, n_gates, GATE_BLOCK)):
        size = min(GATE_BLOCK, n_gates - start)
        rng = _block_rng(seed, _COUNT_STREAM, block)
        true = _draw_true_counts(source, size, rng)
        if det.dark_after_loss:
            detected = rng.binomial(true, det.eta) + rng.poisson(det.dark_mean, size)
        else:
            detected = rng.binomial(true + rng.poisson(det.dark_mean, size), det.eta)
        out[start : start + size] = detected
    return out


def synthesize_histogram(
    counts: np.ndarray,
    det: DetectorModel,
    bins: int,
    seed: int,
) -> AreaHistogram:
    """One pulse-area sample per gate, binned over [offset - 5 sigma0, adc_max].

    Samples above adc_max are tallied as overflow; the rare sample below the
    binning range is clipped into the first bin, so binned counts plus
    overflow always equal the number of gates.
    """
    if bins < 10:
        raise ValueError(f"need at least 10 bins, got {bins}")
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")
    counts = np.asarray(counts)
    low = det.offset - 5.0 * det.sigma0
    edges = np.linspace(low, det.adc_max, bins + 1)
    hist = np.zeros(bins, dtype=np.int64)
    overflow = 0
    for block, start in enumerate(range(0, counts.size, GATE_BLOCK)):
        k = counts[start : start + GATE_BLOCK]
        rng = _block_rng(seed, _AREA_STREAM, block)
        areas = rng.normal(det.peak_center(k), det.peak_width(k))
        over = areas > det.adc_max
        overflow += int(over.sum())
        kept = np.clip(areas[~over], low, det.adc_max)
        hist += np.histogram(kept, bins=edges)[0]
    return AreaHistogram(edges, hist, n_gates=int(counts.size), overflow=overflow)


def histogram_to_probabilities(hist: AreaHistogram):
    """Fit pipeline shorthand: detect peaks, fit, normalize areas."""
    guesses = detect_peaks(hist)
    fit = fit_peaks(hist, guesses)
    dist, event_counts = areas_to_probabilities(fit)
    return dist, event_counts, fit


def pump_sweep(
    pump: PumpModel,
    det: DetectorModel,
    n_gates: int,
    seed: int,
    *,
    cutoff: int = DEFAULT_CUTOFF,
    bins: int = 500,
) -> list[tuple[float, GammaReport]]:
    """Run the full simulate-fit-analyze pipeline at each pump power.

    Returns one (power, GammaReport) row per entry of ``pump.powers``. Each
    power gets an independent deterministic seed derived from (seed, index).
    """
    det.check_resolvable(cutoff)
    rows: list[tuple[float, GammaReport]] = []
    for i, power in enumerate(pump.powers):
        sub = np.random.SeedSequence([seed, _SWEEP_STREAM, i]).generate_state(2)
        source = SourceSpec(
            kind="pdc_pairs",
            cutoff=cutoff,
            mean=pump.mean_pairs(power),
            pair_statistics=pump.pair_statistics,
        )
        gates = simulate_gate_counts(source, det, n_gates, seed=int(sub[0]))
        hist = synthesize_histogram(gates, det, bins, seed=int(sub[1]))
        dist, event_counts, _ = histogram_to_probabilities(hist)
        report = gamma_significance(tuple(event_counts[1:4]))
        rows.append((power, report))
    return rows

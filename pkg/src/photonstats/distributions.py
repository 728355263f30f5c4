"""Finite photon-number distributions and the source models that produce them.

A distribution is a plain probability vector over photon number n = 0..cutoff.
Sources are described declaratively by :class:`SourceSpec` and realized by
:func:`make_distribution`; pair-emitting sources put mass only on even photon
numbers (two photons per pair).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path

import numpy as np
from scipy import stats

SUM_TOL = 1e-12
LOST_MASS_TOL = 1e-6
MIN_CUTOFF = 3

SOURCE_KINDS = ("poisson", "pdc_pairs", "fock", "mixture")
PAIR_STATISTICS = ("poissonian", "thermal")


class TruncationLossError(ValueError):
    """Raised when a cutoff is too small to hold the required probability mass.

    Carries the mass that fell outside the truncation window in ``lost_mass``.
    """

    def __init__(self, lost_mass: float, context: str = ""):
        self.lost_mass = float(lost_mass)
        where = f" in {context}" if context else ""
        super().__init__(
            f"probability mass {self.lost_mass:.3e} lost beyond the cutoff{where} "
            f"(tolerance {LOST_MASS_TOL:.0e}); increase the cutoff"
        )


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """Probability vector over photon number 0..cutoff.

    ``normalized`` asserts the entries sum to 1 within SUM_TOL; ``signed``
    permits negative entries (reconstructed distributions only). Both flags
    are validated on construction, and the underlying array is made read-only.
    """

    probs: np.ndarray
    normalized: bool = True
    signed: bool = False

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1:
            raise ValueError(f"probability vector must be 1-D, got shape {p.shape}")
        if p.size < MIN_CUTOFF + 1:
            raise ValueError(f"cutoff must be >= {MIN_CUTOFF}, got {p.size - 1}")
        if not np.all(np.isfinite(p)):
            raise ValueError("probability vector contains non-finite entries")
        if not self.signed and np.any(p < 0):
            raise ValueError("negative entries in a distribution not flagged signed")
        if self.normalized and abs(p.sum() - 1.0) > SUM_TOL:
            raise ValueError(
                f"entries sum to {p.sum()!r}, not 1 within {SUM_TOL:.0e}; "
                "construct with normalized=False if that is intended"
            )
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    @property
    def physical(self) -> bool:
        return not self.signed

    def to_csv(self) -> str:
        out = StringIO()
        out.write("n,probability\n")
        for n, p in enumerate(self.probs):
            out.write(f"{n},{float(p)!r}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, *, normalized: bool | None = None,
                 signed: bool | None = None) -> "PhotonDistribution":
        rows = [line for line in text.splitlines() if line.strip()]
        if not rows or rows[0].strip() != "n,probability":
            raise ValueError("expected CSV header 'n,probability'")
        probs = np.empty(len(rows) - 1)
        for k, line in enumerate(rows[1:]):
            n_str, p_str = line.split(",")
            if int(n_str) != k:
                raise ValueError(f"photon numbers must be contiguous from 0, got {n_str} at row {k}")
            probs[k] = float(p_str)
        if signed is None:
            signed = bool(np.any(probs < 0))
        if normalized is None:
            normalized = abs(probs.sum() - 1.0) <= SUM_TOL
        return cls(probs, normalized=normalized, signed=signed)


@dataclass(frozen=True)
class SourceSpec:
    """Declarative description of a photon-number source.

    kind:
        ``poisson``   -- coherent-light statistics; ``mean`` photons per gate.
        ``pdc_pairs`` -- pair emitter; ``mean`` pairs per gate, photon number
                         is twice the pair number, pair number follows
                         ``pair_statistics`` ("poissonian" or "thermal").
        ``fock``      -- point mass at photon number ``n``.
        ``mixture``   -- convex combination of ``components`` with ``weights``.
    """

    kind: str
    cutoff: int
    mean: float | None = None
    pair_statistics: str = "poissonian"
    n: int | None = None
    weights: tuple[float, ...] | None = None
    components: tuple["SourceSpec", ...] = field(default=None)

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}; expected one of {SOURCE_KINDS}")
        if self.cutoff < MIN_CUTOFF:
            raise ValueError(f"cutoff must be >= {MIN_CUTOFF}, got {self.cutoff}")
        if self.kind in ("poisson", "pdc_pairs"):
            if self.mean is None or not math.isfinite(self.mean) or self.mean < 0:
                raise ValueError(f"{self.kind} source needs a finite mean >= 0, got {self.mean}")
            if self.kind == "pdc_pairs" and self.pair_statistics not in PAIR_STATISTICS:
                raise ValueError(
                    f"pair_statistics must be one of {PAIR_STATISTICS}, got {self.pair_statistics!r}"
                )
        elif self.kind == "fock":
            if self.n is None or self.n < 0:
                raise ValueError(f"fock source needs n >= 0, got {self.n}")
            if self.n > self.cutoff:
                raise ValueError(f"fock n={self.n} exceeds cutoff {self.cutoff}")
        elif self.kind == "mixture":
            if not self.weights or not self.components:
                raise ValueError("mixture source needs weights and components")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            object.__setattr__(self, "components", tuple(self.components))
            if len(self.weights) != len(self.components):
                raise ValueError("mixture weights and components differ in length")
            if any(w < 0 for w in self.weights):
                raise ValueError("mixture weights must be nonnegative")
            if abs(math.fsum(self.weights) - 1.0) > SUM_TOL:
                raise ValueError(f"mixture weights sum to {math.fsum(self.weights)!r}, not 1")
            for c in self.components:
                if c.cutoff != self.cutoff:
                    raise ValueError("mixture components must share the mixture cutoff")

    def to_json_dict(self) -> dict:
        d = {"kind": self.kind, "cutoff": self.cutoff}
        if self.kind == "poisson":
            d["mean"] = self.mean
        elif self.kind == "pdc_pairs":
            d["mean"] = self.mean
            d["pair_statistics"] = self.pair_statistics
        elif self.kind == "fock":
            d["n"] = self.n
        elif self.kind == "mixture":
            d["weights"] = list(self.weights)
            d["components"] = [c.to_json_dict() for c in self.components]
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SourceSpec":
        kind = d.get("kind")
        kwargs = {"kind": kind, "cutoff": d.get("cutoff")}
        if kind in ("poisson", "pdc_pairs"):
            kwargs["mean"] = d.get("mean")
        if kind == "pdc_pairs" and "pair_statistics" in d:
            kwargs["pair_statistics"] = d["pair_statistics"]
        if kind == "fock":
            kwargs["n"] = d.get("n")
        if kind == "mixture":
            kwargs["weights"] = tuple(d.get("weights", ()))
            kwargs["components"] = tuple(cls.from_json_dict(c) for c in d.get("components", ()))
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SourceSpec":
        return cls.from_json_dict(json.loads(text))


def _pair_number_pmf(mean: float, statistics: str, max_pairs: int) -> np.ndarray:
    """Pair-count pmf over 0..max_pairs, not renormalized."""
    k = np.arange(max_pairs + 1)
    if statistics == "poissonian":
        return stats.poisson.pmf(k, mean)
    # Bose-Einstein occupation: P(k) = mean^k / (1 + mean)^(k + 1)
    return np.exp(k * np.log(mean) - (k + 1) * np.log1p(mean)) if mean > 0 else (k == 0).astype(float)


def make_distribution(spec: SourceSpec) -> PhotonDistribution:
    """Realize a source spec as a normalized, physical distribution.

    The distribution is truncated at ``spec.cutoff`` and silently renormalized
    only when the mass lost to truncation is below LOST_MASS_TOL; otherwise a
    :class:`TruncationLossError` is raised.
    """
    size = spec.cutoff + 1
    if spec.kind == "fock":
        p = np.zeros(size)
        p[spec.n] = 1.0
        return PhotonDistribution(p)

    if spec.kind == "mixture":
        parts = [make_distribution(c) for c in spec.components]
        w = np.asarray(spec.weights)
        w = w / w.sum()
        p = np.zeros(size)
        for wi, di in zip(w, parts):
            p += wi * di.probs
        return PhotonDistribution(p)

    if spec.kind == "poisson":
        raw = stats.poisson.pmf(np.arange(size), spec.mean)
    else:  # pdc_pairs: photon number = 2 * pair number
        raw = np.zeros(size)
        pair_pmf = _pair_number_pmf(spec.mean, spec.pair_statistics, spec.cutoff // 2)
        raw[0 : 2 * (spec.cutoff // 2) + 1 : 2] = pair_pmf

    lost = 1.0 - raw.sum()
    if lost > LOST_MASS_TOL:
        raise TruncationLossError(lost, context=f"{spec.kind} source at cutoff {spec.cutoff}")
    return PhotonDistribution(raw / raw.sum())


def mean_photon_number(d: PhotonDistribution) -> float:
    """First moment sum(n * p_n); assumes d is normalized."""
    return float(np.arange(d.probs.size) @ d.probs)


def parity_expectation(d: PhotonDistribution) -> float:
    """Expectation of (-1)^n, i.e. P_even - P_odd; lies in [-1, 1]."""
    return float(d.probs[0::2].sum() - d.probs[1::2].sum())


def load_distribution_csv(path: str | Path, **kwargs) -> PhotonDistribution:
    return PhotonDistribution.from_csv(Path(path).read_text(), **kwargs)

"""Command-line pipeline: simulate, analyze, reconstruct, sweep.

Every command reads a JSON run config, takes ``--seed``/``--out`` overrides,
and writes CSV data plus JSON reports. Outputs are deterministic for a fixed
(config, seed) pair and all file writes are atomic.

Exit codes: 0 success, 2 config error, 3 fit failure, 4 numerical warning
escalated by --strict.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acquisition import (
    AreaHistogram,
    DetectorModel,
    PumpModel,
    pump_sweep,
    simulate_gate_counts,
    synthesize_histogram,
)
from .channel import (
    ConditionNumberWarning,
    detector_matrix,
    invert_channel,
    truncation_diagnostics,
)
from .distributions import PhotonDistribution, SourceSpec
from .fitting import PeakOverlapWarning, areas_to_probabilities, detect_peaks, fit_peaks
from .ioutil import SCHEMA_VERSION, dumps_canonical, write_text_atomic
from .nonclassical import eta_from_ratio, gamma_significance, parity_test

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    """Run configuration is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    """Fully reproducible description of one pipeline run."""

    source: SourceSpec
    detector: DetectorModel
    n_gates: int
    cutoff: int
    seed: int
    output_dir: Path
    pump: PumpModel | None = None
    bins: int = 500

    def __post_init__(self):
        if self.n_gates < 1:
            raise ConfigError(f"n_gates must be >= 1, got {self.n_gates}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed}")
        if self.bins < 10:
            raise ConfigError(f"bins must be >= 10, got {self.bins}")
        if self.source.cutoff != self.cutoff:
            raise ConfigError(
                f"source cutoff {self.source.cutoff} does not match run cutoff {self.cutoff}"
            )
        self.detector.check_resolvable(self.cutoff)
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    @classmethod
    def from_json_dict(cls, d: dict) -> "RunConfig":
        try:
            pump = d.get("pump")
            return cls(
                source=SourceSpec.from_json_dict(d["source"]),
                detector=DetectorModel.from_json_dict(d["detector"]),
                pump=PumpModel.from_json_dict(pump) if pump else None,
                n_gates=int(d["n_gates"]),
                cutoff=int(d["cutoff"]),
                seed=int(d["seed"]),
                output_dir=Path(d.get("output_dir", ".")),
                bins=int(d.get("bins", 500)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid run config: {exc}") from exc

    def to_json_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "source": self.source.to_json_dict(),
            "detector": self.detector.to_json_dict(),
            "n_gates": self.n_gates,
            "cutoff": self.cutoff,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "bins": self.bins,
        }
        if self.pump is not None:
            d["pump"] = self.pump.to_json_dict()
        return d


def load_config(path: str | Path, seed: int | None = None, out: str | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["output_dir"] = out
    return RunConfig.from_json_dict(raw)


def _emit_error(exc: Exception, code: int) -> int:
    payload = {"error": str(exc), "type": type(exc).__name__, "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def cmd_simulate(config: RunConfig) -> int:
    """Simulate gates, synthesize the pulse-area histogram, write CSV + JSON."""
    gates = simulate_gate_counts(config.source, config.detector, config.n_gates, config.seed)
    hist = synthesize_histogram(gates, config.detector, config.bins, config.seed)

    out = config.output_dir
    write_text_atomic(out / "histogram.csv", hist.to_csv())
    write_text_atomic(out / "histogram.json", dumps_canonical(hist.sidecar_dict(config.detector)))

    observed = np.bincount(gates, minlength=config.cutoff + 1)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n_gates": config.n_gates,
        "seed": config.seed,
        "detected_count_frequencies": {
            str(k): int(n) for k, n in enumerate(observed) if n > 0
        },
        "source": config.source.to_json_dict(),
        "detector": config.detector.to_json_dict(),
    }
    write_text_atomic(out / "gate_counts.json", dumps_canonical(summary))
    return EXIT_OK


def cmd_analyze(histogram_csv: Path, out_dir: Path, strict: bool = False) -> int:
    """Fit the histogram, derive probabilities and classicality reports."""
    sidecar_path = histogram_csv.with_suffix(".json")
    hist = AreaHistogram.load(histogram_csv, sidecar_path)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PeakOverlapWarning)
        guesses = detect_peaks(hist)
        fit = fit_peaks(hist, guesses)

    report = {
        "schema_version": SCHEMA_VERSION,
        "histogram": str(histogram_csv),
        "n_gates": hist.n_gates,
        "overflow": hist.overflow,
        "fit": fit.to_json_dict(),
        "warnings": [str(w.message) for w in caught],
    }
    if not fit.converged:
        report["error"] = "peak fit did not converge"
        write_text_atomic(out_dir / "analysis.json", dumps_canonical(report))
        return EXIT_FIT

    dist, event_counts = areas_to_probabilities(fit)
    p = dist.probs
    report.update(
        {
            "probabilities": [float(v) for v in p],
            "event_counts": [int(c) for c in event_counts],
            "gamma_report": gamma_significance(tuple(event_counts[1:4])).to_json_dict(),
            "parity_report": parity_test(dist).to_json_dict(),
            "eta_estimate": eta_from_ratio(float(p[1]), float(p[2])) if p[1] > 0 else None,
        }
    )
    write_text_atomic(out_dir / "analysis.json", dumps_canonical(report))
    if strict and caught:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_reconstruct(analysis_json: Path, config: RunConfig, strict: bool = False) -> int:
    """Invert the detector matrix against measured probabilities."""
    analysis = json.loads(Path(analysis_json).read_text())
    probs = np.asarray(analysis["probabilities"], dtype=np.float64)

    n = config.cutoff + 1
    padded = np.zeros(n)
    padded[: min(probs.size, n)] = probs[:n]
    measured = PhotonDistribution(
        padded, normalized=abs(padded.sum() - 1.0) <= 1e-12, signed=False
    )

    det = config.detector
    matrix = detector_matrix(
        det.eta, det.dark_mean, config.cutoff, dark_after_loss=det.dark_after_loss
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConditionNumberWarning)
        reconstructed = invert_channel(matrix, measured)
    diag = truncation_diagnostics(reconstructed)

    out = config.output_dir
    write_text_atomic(out / "reconstruction.csv", reconstructed.to_csv())
    report = {
        "schema_version": SCHEMA_VERSION,
        "analysis": str(analysis_json),
        "eta": det.eta,
        "dark_mean": det.dark_mean,
        "cutoff": config.cutoff,
        "negativity": diag.to_json_dict(),
        "warnings": [str(w.message) for w in caught],
    }
    write_text_atomic(out / "negativity.json", dumps_canonical(report))
    if strict and caught:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    """Run the pipeline across pump powers and write the trend CSV."""
    if config.pump is None:
        raise ConfigError("sweep requires a pump section in the config")
    rows = pump_sweep(
        config.pump,
        config.detector,
        config.n_gates,
        config.seed,
        cutoff=config.cutoff,
        bins=config.bins,
    )
    lines = ["power_uW,gamma,std_error,n_std"]
    for power, rep in rows:
        lines.append(f"{power!r},{rep.gamma!r},{rep.std_error!r},{rep.n_std_above_classical!r}")
    write_text_atomic(config.output_dir / "sweep.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser, config_required: bool = True) -> None:
    sub.add_argument("--config", type=Path, required=config_required,
                     help="JSON run configuration")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--out", type=str, default=None, help="override the output directory")
    sub.add_argument("--strict", action="store_true",
                     help="escalate numerical warnings to exit code 4")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonstats",
        description="Simulate and analyze photon-number statistics of a pulsed pair source",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser("simulate", help="simulate gates and write the histogram"))

    p_an = subs.add_parser("analyze", help="fit a histogram into probabilities and reports")
    p_an.add_argument("--histogram", type=Path, required=True, help="histogram CSV to analyze")
    _add_common(p_an, config_required=False)

    p_re = subs.add_parser("reconstruct", help="invert the detector model on an analysis")
    p_re.add_argument("--analysis", type=Path, required=True, help="analysis JSON to invert")
    _add_common(p_re)

    _add_common(subs.add_parser("sweep", help="run the pipeline across pump powers"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            out_dir = Path(args.out) if args.out else Path(".")
            if args.config is not None and args.out is None:
                out_dir = load_config(args.config, args.seed, args.out).output_dir
            try:
                return cmd_analyze(args.histogram, out_dir, strict=args.strict)
            except (ValueError, ZeroDivisionError) as exc:
                return _emit_error(exc, EXIT_FIT)

        config = load_config(args.config, args.seed, args.out)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "reconstruct":
            return cmd_reconstruct(args.analysis, config, strict=args.strict)
        if args.command == "sweep":
            return cmd_sweep(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        return _emit_error(exc, EXIT_CONFIG)
    except (ValueError, ZeroDivisionError, OSError) as exc:
        return _emit_error(exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())

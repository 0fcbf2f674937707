"""Command-line front end: fitting, inference, placebo tests, experiments.

Exit status 0 on success, 2 on configuration or validation problems
(the message names the offending input), 1 on numerical failures. All
result files are written atomically (temp file plus rename), so a
failed run leaves no truncated outputs behind.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    DomainError,
    MfscmError,
    PanelParseError,
    PanelValidationError,
    SampleSizeError,
)
from .estimator import FitConfig, effects, effects_to_csv, fit, fit_result_to_dict, placebo_in_time
from .inference import BlockRule, BootstrapConfig, block_bootstrap_ci
from .panel import load_panel, read_manifest
from .simlab import VARIANTS, coverage_experiment, make_dgp, risk_ratio_experiment

log = logging.getLogger("mfscm")

_CONFIG_ERRORS = (ConfigError, PanelParseError, PanelValidationError, DomainError, SampleSizeError)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, doc: dict) -> None:
    _atomic_write(path, json.dumps(doc, indent=2) + "\n")


def _parse_grid(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad integer list {text!r} (expected e.g. '40,80,160')")


def _check_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ConfigError("level must lie in (0,1)")
    return level


def _fit_bundle(args):
    panel = load_panel(args.manifest)
    cfg = FitConfig.from_manifest(read_manifest(args.manifest))
    fit_result = fit(panel, cfg)
    eff = effects(fit_result, panel)
    return panel, fit_result, eff


def _summary_weights(weights: dict[str, float], top: int = 8) -> str:
    ordered = sorted(weights.items(), key=lambda kv: -kv[1])
    shown = [f"{u}={w:.4f}" for u, w in ordered if w > 1e-6][:top]
    rest = sum(1 for _, w in ordered if w > 1e-6) - len(shown)
    tail = f" (+{rest} more)" if rest > 0 else ""
    return ", ".join(shown) + tail


def cmd_fit(args) -> int:
    panel, fit_result, eff = _fit_bundle(args)
    out = Path(args.out)
    _write_json(out / "fit.json", fit_result_to_dict(fit_result, eff))
    _atomic_write(out / "effects.csv", effects_to_csv(eff))
    print(f"weights: {_summary_weights(fit_result.weights)}")
    print(f"pre_mse: {fit_result.pre_mse:.6g}   objective: {fit_result.objective:.6g}")
    print(f"ate: {eff.ate:.6g}  over t={panel.T0 + 1}..{panel.T}")
    print(f"wrote {out / 'fit.json'}")
    return 0


def cmd_infer(args) -> int:
    _check_level(args.level)
    panel, fit_result, eff = _fit_bundle(args)
    cfg = BootstrapConfig(
        n_boot=args.n_boot,
        seed=args.seed,
        level=args.level,
        block_rule=BlockRule.parse(args.block_rule),
    )
    ci = block_bootstrap_ci(panel, fit_result, eff, cfg)
    out = Path(args.out)
    _write_json(out / "fit.json", fit_result_to_dict(fit_result, eff))
    _write_json(out / "ci.json", ci.to_dict())
    if args.dump_stats:
        lines = ["n,stat"] + [f"{i + 1},{repr(float(s))}" for i, s in enumerate(ci.boot_stats)]
        _atomic_write(out / "boot_stats.csv", "\n".join(lines) + "\n")
    print(f"weights: {_summary_weights(fit_result.weights)}")
    print(f"pre_mse: {fit_result.pre_mse:.6g}")
    print(
        f"ate: {ci.ate:.6g}   {100 * (1 - ci.level):g}% CI: ({ci.ci_lower:.6g}, {ci.ci_upper:.6g})"
        f"   [m={ci.block_size}, N={ci.n_boot}]"
    )
    print(f"wrote {out / 'ci.json'}")
    return 0


def cmd_placebo(args) -> int:
    panel = load_panel(args.manifest)
    cfg = FitConfig.from_manifest(read_manifest(args.manifest))
    fit_result, eff = placebo_in_time(panel, args.pseudo_t0, cfg)
    out = Path(args.out)
    _write_json(out / "placebo.json", fit_result_to_dict(fit_result, eff))
    _atomic_write(out / "placebo_effects.csv", effects_to_csv(eff))
    print(f"placebo split at t={args.pseudo_t0} (true T0={panel.T0})")
    print(f"pseudo ate: {eff.ate:.6g} over t={args.pseudo_t0 + 1}..{panel.T0}")
    print(f"wrote {out / 'placebo.json'}")
    return 0


def cmd_sim_risk(args) -> int:
    dgp = make_dgp(args.J, args.seed)
    variants = tuple(args.variant) if args.variant else VARIANTS
    res = risk_ratio_experiment(
        dgp,
        _parse_grid(args.T0),
        args.T1,
        S=args.reps,
        M=args.M,
        workers=args.workers,
        variants=variants,
    )
    out = Path(args.out)
    _write_json(out / "risk.json", res.to_json_dict())
    _atomic_write(out / "risk.csv", res.risk_table_csv())
    for cell in res.cells:
        ratios = "  ".join(f"{v}={r:.4f}" for v, r in cell["ratios"].items())
        print(f"T0={cell['T0']}: {ratios}")
    print(f"wrote {out / 'risk.csv'}")
    return 0


def cmd_sim_coverage(args) -> int:
    levels = tuple(_check_level(float(x)) for x in args.level.split(","))
    dgp = make_dgp(args.J, args.seed)
    res = coverage_experiment(
        dgp,
        _parse_grid(args.T0),
        _parse_grid(args.T1),
        reps=args.reps,
        n_boot=args.n_boot,
        levels=levels,
        block_rule=BlockRule.parse(args.block_rule),
        effect=args.effect,
        workers=args.workers,
    )
    out = Path(args.out)
    _write_json(out / "coverage.json", res.to_json_dict())
    _atomic_write(out / "coverage.csv", res.coverage_table_csv())
    for cell in res.cells:
        per = "  ".join(
            f"{k}: cov={cell['coverage'][k]:.3f} len={cell['mean_length'][k]:.3f}"
            for k in cell["coverage"]
        )
        print(f"T0={cell['T0']} T1={cell['T1']}: {per}")
    print(f"wrote {out / 'coverage.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfscm",
        description="Mixed-frequency synthetic control estimation, inference, and experiments.",
    )
    parser.add_argument("--version", action="version", version=f"mfscm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--manifest", required=True, help="panel manifest (TOML)")
        p.add_argument("--out", required=True, help="output directory")

    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("fit", help="fit weights and report effects", formatter_class=fmt)
    add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("infer", help="fit plus bootstrap confidence interval", formatter_class=fmt)
    add_common(p)
    p.add_argument("--level", type=float, default=0.1, help="significance level in (0,1)")
    p.add_argument("--n-boot", type=int, default=1000, help="bootstrap draws")
    p.add_argument("--block-rule", default="pow:0.8", help="pow:A | fixed:M | minpow:A:MIN")
    p.add_argument("--seed", type=int, default=0, help="bootstrap master seed")
    p.add_argument("--dump-stats", action="store_true", help="also write boot_stats.csv")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("placebo", help="placebo-in-time refit", formatter_class=fmt)
    add_common(p)
    p.add_argument("--pseudo-t0", type=int, required=True, help="pseudo treatment date (< T0)")
    p.set_defaults(func=cmd_placebo)

    p = sub.add_parser("sim-risk", help="risk-ratio experiment", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--J", type=int, default=20, help="donor count")
    p.add_argument("--T0", default="20,80,320,1280", help="comma-separated pre-treatment sizes")
    p.add_argument("--T1", type=int, default=100, help="post-treatment periods")
    p.add_argument("--reps", type=int, default=100, help="training replications per cell")
    p.add_argument("--M", type=int, default=500, help="pooled evaluation draws")
    p.add_argument("--seed", type=int, default=0, help="experiment master seed")
    p.add_argument("--workers", type=int, default=1, help="parallel workers")
    p.add_argument(
        "--variant",
        action="append",
        choices=VARIANTS,
        help="restrict to one or more estimator variants (repeatable)",
    )
    p.set_defaults(func=cmd_sim_risk)

    p = sub.add_parser("sim-coverage", help="interval-coverage experiment", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--J", type=int, default=20, help="donor count")
    p.add_argument("--T0", default="40", help="comma-separated pre-treatment sizes")
    p.add_argument("--T1", default="20", help="comma-separated post-treatment sizes")
    p.add_argument("--reps", type=int, default=1000, help="Monte Carlo replications per cell")
    p.add_argument("--n-boot", type=int, default=1000, help="bootstrap draws per replication")
    p.add_argument("--level", default="0.1,0.05,0.01", help="comma-separated significance levels")
    p.add_argument("--block-rule", default="minpow:0.5:10", help="pow:A | fixed:M | minpow:A:MIN")
    p.add_argument("--effect", type=float, default=0.0, help="injected constant treatment effect")
    p.add_argument("--seed", type=int, default=0, help="experiment master seed")
    p.add_argument("--workers", type=int, default=1, help="parallel workers")
    p.set_defaults(func=cmd_sim_coverage)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("MFSC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MfscmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"error: linear algebra failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

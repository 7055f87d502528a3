"""``hullconc`` command-line entry point.

Exit codes: 0 success, 1 config or usage error, 2 runtime error,
3 soundness violation.  ``HULLCONC_THREADS`` overrides the thread count
unless ``--threads`` is given.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import parse_law_spec, parse_model_spec
from .errors import ConfigError, HullconcError, SoundnessError
from .experiments import ExperimentConfig, run_experiment
from .geometry import build_net, coverage_stats
from .io import (
    RunManifest,
    config_from_manifest,
    now_iso,
    parse_config,
    parse_grid,
    validate_config,
    verify_manifest,
    write_json,
    write_manifest,
    write_report,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SOUNDNESS = 0, 1, 2, 3

BODIES = ("interval", "square", "triangle", "gaussian-hull")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _progress(msg: str) -> None:
    print(f"hullconc: {msg}", file=sys.stderr, flush=True)


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("HULLCONC_THREADS")
    if env is None or env == "":
        return None
    try:
        value = int(env)
    except ValueError:
        raise ConfigError(f"HULLCONC_THREADS={env!r} is not an integer", "HULLCONC_THREADS") from None
    if value < 1:
        raise ConfigError("must be positive", "HULLCONC_THREADS")
    return value


def _summary_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".summary.json")


def _run_and_write(cfg: ExperimentConfig, csv_path: Path, json_path: Path | None = None) -> RunManifest:
    started = now_iso()
    _progress(f"running {cfg.kind} ({len(cfg.models)} model(s), {len(cfg.n)} n value(s), threads={cfg.threads})")
    report = run_experiment(cfg)
    json_path = json_path or _summary_path(csv_path)
    entries = [
        write_report(report.rows, csv_path, "csv", report.columns),
        write_report(report.summary, json_path, "json"),
    ]
    man = write_manifest(cfg, entries, started, str(csv_path) + ".manifest.json")
    _progress(f"wrote {csv_path} ({len(report.rows)} rows), {json_path}, manifest")
    return man


# ------------------------------------------------------------ subcommands


def cmd_experiment(args) -> int:
    overrides = {"trials": args.trials, "seed": args.seed, "threads": _threads(args.threads)}
    cfg = parse_config(args.config, overrides)
    expected = args.command.replace("-", "_")
    if cfg.kind != expected:
        raise ConfigError(f"config describes {cfg.kind!r}, not {expected!r}", "experiment")
    csv_path = Path(args.out) if args.out else Path(cfg.csv)
    json_path = None
    if not args.out and cfg.json:
        json_path = Path(cfg.json)
    _run_and_write(cfg, csv_path, json_path)
    return EXIT_OK


def cmd_order_stats(args) -> int:
    n = [int(float(v)) for v in args.n.split(",")]
    cfg = ExperimentConfig(
        kind="lemma4", laws=args.law.split(","), n=n, t_grid=parse_grid(args.t_grid),
        threads=_threads(args.threads) or 1,
    )
    for i, spec in enumerate(cfg.laws):
        try:
            parse_law_spec(spec)
        except HullconcError as exc:
            raise ConfigError(str(exc), f"law[{i}]") from None
    validate_config(cfg)
    _run_and_write(cfg, Path(args.out))
    return EXIT_OK


def _body_oracle(name: str, n: int):
    from .bodies import ExpectedHullOracle
    from .distributions import gaussian
    from .geometry import Polytope, polytope_gauge

    if name == "interval":
        return polytope_gauge(Polytope([[-1.0], [1.0]]), "interval")
    if name == "square":
        return polytope_gauge(Polytope([[1, 1], [1, -1], [-1, 1], [-1, -1]]), "square")
    if name == "triangle":
        return polytope_gauge(Polytope([[2, 0], [-1, 1], [-1, -1]]), "triangle")
    if name == "gaussian-hull":
        g = ExpectedHullOracle(gaussian(np.eye(2)), n).polar_gauge()
        g.name = f"polar of E P_n, gaussian:I2, n={n}"
        return g
    raise ConfigError(f"unknown body {name!r}; choose from {', '.join(BODIES)}", "body")


def cmd_net(args) -> int:
    if not 0.0 < args.epsilon <= 0.5:
        raise ConfigError("epsilon must lie in (0, 1/2]", "epsilon")
    body = _body_oracle(args.body, args.n)
    net = build_net(body, args.epsilon, seed=args.seed, candidate_budget=args.budget)
    stats = coverage_stats(net, probes=args.probes, seed=args.seed + 1)
    write_json(net.to_dict(), args.out)
    _progress(f"net of size {net.size} (bound {net.bound:.6g}); {stats['uncovered']} of {stats['probes']} probes uncovered")
    return EXIT_OK


def cmd_sandwich(args) -> int:
    try:
        model = parse_model_spec(args.model)
    except HullconcError as exc:
        raise ConfigError(str(exc), "model") from None
    cfg = ExperimentConfig(
        kind="theorem1", models=[str(model)], n=[args.n], epsilon=[args.epsilon], trials=args.trials,
        seed=args.seed, mode=args.mode, replicates=args.replicates, m_dirs=args.m_dirs,
        threads=_threads(args.threads) or 1,
    )
    validate_config(cfg)
    out = Path(args.out)
    _run_and_write(cfg, out, out.with_name(out.stem + ".certificate.json"))
    return EXIT_OK


def cmd_verify(args) -> int:
    status = verify_manifest(args.manifest)
    for name, ok in status.items():
        print(f"{'ok' if ok else 'MISMATCH'}  {name}")
    return EXIT_OK if all(status.values()) else EXIT_RUNTIME


def cmd_reproduce(args) -> int:
    """Re-run a manifest's config into a scratch directory and compare digests."""
    original = RunManifest.load(args.manifest)
    cfg = config_from_manifest(args.manifest)
    names = list(original.outputs)
    csv_name = next(n for n in names if n.endswith(".csv"))
    json_name = next(n for n in names if n.endswith(".json"))
    with tempfile.TemporaryDirectory() as tmp:
        man = _run_and_write(cfg, Path(tmp) / csv_name, Path(tmp) / json_name)
    same = True
    for name, digest in original.outputs.items():
        ok = man.outputs.get(name) == digest
        same &= ok
        print(f"{'reproduced' if ok else 'DIFFERS'}  {name}")
    return EXIT_OK if same else EXIT_RUNTIME


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hullconc", description="Random-polytope concentration experiments.")
    p.add_argument("--version", action="version", version=f"hullconc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    o = sub.add_parser("order-stats", help="tail bounds for the sample maximum")
    o.add_argument("--law", required=True, help="comma list of uniform, normal, exponential, triangular[:param]")
    o.add_argument("--n", required=True, help="comma list of sample sizes (>= 12)")
    o.add_argument("--t-grid", default="0.05:1.0:0.05", help="start:stop:step or comma list")
    o.add_argument("--out", required=True)
    o.add_argument("--threads", type=int)
    o.set_defaults(func=cmd_order_stats)

    nt = sub.add_parser("net", help="greedy epsilon-net on a body boundary")
    nt.add_argument("--body", required=True, choices=BODIES)
    nt.add_argument("--epsilon", type=float, required=True)
    nt.add_argument("--seed", type=int, default=0)
    nt.add_argument("--n", type=int, default=1000, help="sample size for gaussian-hull")
    nt.add_argument("--budget", type=int, help="consecutive covered candidates before stopping")
    nt.add_argument("--probes", type=int, default=10_000)
    nt.add_argument("--out", required=True)
    nt.set_defaults(func=cmd_net)

    s = sub.add_parser("sandwich", help="certify and brute-force sandwich defects of sampled polytopes")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--mode", choices=("analytic", "mc"), default="analytic")
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replicates", type=int, default=10_000)
    s.add_argument("--m-dirs", type=int, default=10_000)
    s.add_argument("--threads", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sandwich)

    for name in ("theorem1", "corollary2", "strong-law", "lemma4", "inclusion"):
        e = sub.add_parser(name, help=f"run the {name} experiment from a TOML config")
        e.add_argument("config")
        e.add_argument("--trials", type=int)
        e.add_argument("--seed", type=int)
        e.add_argument("--out", help="CSV path; the summary and manifest are written beside it")
        e.add_argument("--threads", type=int)
        e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="check output digests against a manifest")
    v.add_argument("manifest")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("reproduce", help="re-run a manifest's config and compare digests")
    r.add_argument("manifest")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hullconc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SoundnessError as exc:
        print(f"hullconc: SOUNDNESS VIOLATION: {exc}", file=sys.stderr)
        return EXIT_SOUNDNESS
    except (HullconcError, OSError, ValueError, ArithmeticError) as exc:
        print(f"hullconc: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

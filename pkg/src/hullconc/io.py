"""Config parsing, deterministic CSV/JSON writers and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import ConfigError
from .experiments import ExperimentConfig

__all__ = [
    "parse_config",
    "config_from_mapping",
    "config_hash",
    "format_value",
    "write_report",
    "write_csv",
    "write_json",
    "RunManifest",
    "write_manifest",
    "verify_manifest",
    "parse_grid",
    "validate_config",
]

KINDS = ("theorem1", "corollary2", "strong_law", "lemma4", "inclusion")

_TOP_KEYS = {
    "experiment", "seed", "model", "models", "laws", "n", "schedule", "epsilon", "t_grid",
    "trials", "mode", "replicates", "m_dirs", "n_dirs", "net_budget", "draws", "threads", "output",
}
_SCHEDULE_KEYS = {"k_min", "k_max", "base"}
_OUTPUT_KEYS = {"csv", "json"}
_MODEL_KEYS = {"kind", "dim", "cov", "diag", "half_widths", "scales", "calibration_size"}


def parse_grid(spec) -> list[float]:
    """``[0.1, 0.2]`` or ``"start:stop:step"`` (inclusive) or ``"a,b,c"``."""
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    text = str(spec)
    if ":" in text:
        a, b, h = (float(v) for v in text.split(":"))
        k = int(math.floor((b - a) / h + 1e-9))
        return [round(a + i * h, 12) for i in range(k + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def _model_spec(value, key: str) -> str:
    """Normalize a model entry to its textual spec."""
    from .distributions import parse_model_spec

    if isinstance(value, dict):
        unknown = set(value) - _MODEL_KEYS
        if unknown:
            raise ConfigError(f"unknown key {sorted(unknown)[0]!r}", key)
    try:
        return str(parse_model_spec(value))
    except Exception as exc:
        raise ConfigError(str(exc), key) from None


def _ints(value, key: str) -> list[int]:
    vals = value if isinstance(value, list) else [value]
    try:
        out = [int(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError("expected integers", key) from None
    if any(float(v) != o for v, o in zip(vals, out)):
        raise ConfigError("expected integers", key)
    return out


def config_from_mapping(data: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a parsed config mapping and fill defaults."""
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r}", sorted(unknown)[0])
    kind = str(data.get("experiment", "")).replace("-", "_")
    if kind not in KINDS:
        raise ConfigError(f"experiment must be one of {', '.join(KINDS)}", "experiment")
    cfg = ExperimentConfig(kind=kind)

    if "models" in data and "model" in data:
        raise ConfigError("give either model or models", "models")
    if "models" in data:
        cfg.models = [_model_spec(v, f"models[{i}]") for i, v in enumerate(data["models"])]
    elif "model" in data:
        cfg.models = [_model_spec(data["model"], "model")]
    if "laws" in data:
        from .distributions import parse_law_spec

        for i, s in enumerate(data["laws"]):
            try:
                parse_law_spec(s)
            except Exception as exc:
                raise ConfigError(str(exc), f"laws[{i}]") from None
        cfg.laws = [str(s) for s in data["laws"]]

    if "schedule" in data:
        sched = data["schedule"]
        if not isinstance(sched, dict):
            raise ConfigError("expected a table", "schedule")
        bad = set(sched) - _SCHEDULE_KEYS
        if bad:
            raise ConfigError(f"unknown key {sorted(bad)[0]!r}", f"schedule.{sorted(bad)[0]}")
        for k in ("k_min", "k_max"):
            if k not in sched:
                raise ConfigError("missing required key", f"schedule.{k}")
        base = int(sched.get("base", 2))
        k_min, k_max = int(sched["k_min"]), int(sched["k_max"])
        if k_max < k_min:
            raise ConfigError("k_max must be >= k_min", "schedule.k_max")
        cfg.n = [base**k for k in range(k_min, k_max + 1)]
    if "n" in data:
        if "schedule" in data:
            raise ConfigError("give either n or schedule", "n")
        cfg.n = _ints(data["n"], "n")
    if not cfg.n:
        raise ConfigError("missing required key", "n")

    if "epsilon" in data:
        try:
            cfg.epsilon = parse_grid(data["epsilon"])
        except ValueError:
            raise ConfigError("cannot parse", "epsilon") from None
    if "t_grid" in data:
        try:
            cfg.t_grid = parse_grid(data["t_grid"])
        except ValueError:
            raise ConfigError("cannot parse", "t_grid") from None

    for key in ("seed", "trials", "replicates", "m_dirs", "n_dirs", "net_budget", "draws", "threads"):
        if key in data:
            setattr(cfg, key, _ints(data[key], key)[0])
    if "mode" in data:
        cfg.mode = str(data["mode"]).replace("monte_carlo", "mc")
        if cfg.mode not in ("analytic", "mc"):
            raise ConfigError("mode must be analytic or mc", "mode")

    out = data.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("expected a table", "output")
    bad = set(out) - _OUTPUT_KEYS
    if bad:
        raise ConfigError(f"unknown key {sorted(bad)[0]!r}", f"output.{sorted(bad)[0]}")
    cfg.csv = str(out.get("csv", f"{kind}.csv"))
    cfg.json = str(out.get("json", ""))

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    from .distributions import parse_model_spec

    if cfg.trials < 1:
        raise ConfigError("must be positive", "trials")
    if cfg.threads < 1:
        raise ConfigError("must be positive", "threads")
    if cfg.kind == "theorem1":
        if not cfg.epsilon:
            raise ConfigError("missing required key", "epsilon")
        for i, e in enumerate(cfg.epsilon):
            if not 0.0 < e < 0.5:
                raise ConfigError(f"epsilon={e} violates ε ∈ (0,1/2)", f"epsilon[{i}]")
        if cfg.m_dirs < 1000:
            raise ConfigError("brute force needs at least 1000 directions", "m_dirs")
    if cfg.kind in ("theorem1", "strong_law", "inclusion"):
        for spec in cfg.models:
            d = parse_model_spec(spec).dim
            for i, n in enumerate(cfg.n):
                if n < d + 1:
                    raise ConfigError(f"n={n} violates n >= d+1 = {d + 1}", f"n[{i}]")
    if cfg.kind in ("lemma4", "corollary2", "inclusion"):
        for i, n in enumerate(cfg.n):
            if n < 12:
                raise ConfigError(f"n={n} violates n >= 12", f"n[{i}]")
    if cfg.kind == "lemma4":
        if not cfg.t_grid:
            raise ConfigError("missing required key", "t_grid")
        if any(t <= 0 for t in cfg.t_grid):
            raise ConfigError("t must be positive", "t_grid")
    if cfg.kind == "corollary2":
        for i, spec in enumerate(cfg.models):
            if not parse_model_spec(spec).analytic:
                raise ConfigError("corollary2 needs an analytic model", f"models[{i}]")
    if cfg.kind == "strong_law":
        for i, n in enumerate(cfg.n):
            if n < 16 or n & (n - 1):
                raise ConfigError("schedule must be powers of two starting at n >= 16", f"n[{i}]")
    if cfg.kind == "inclusion" and cfg.draws < 10_000:
        raise ConfigError("needs at least 10^4 draws", "draws")


def parse_config(path, overrides: dict | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {str(p)!r} does not exist")
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return config_from_mapping(data, overrides)


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form; output paths and thread count excluded."""
    d = cfg.to_dict()
    for key in ("csv", "json", "threads"):
        d.pop(key, None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ------------------------------------------------------------------ writers


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if hasattr(v, "item"):
        return format_value(v.item())
    return str(v)


def write_csv(records: Iterable[dict], path, columns: list[str]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([format_value(rec.get(c)) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    return v


def write_json(obj, path) -> None:
    text = json.dumps(_jsonable(obj), indent=2, allow_nan=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_report(records, path, format: str = "csv", columns: list[str] | None = None) -> dict:
    """Write ``records`` deterministically and return a manifest entry."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        records = list(records)
        if columns is None:
            columns = list(records[0]) if records else []
        write_csv(records, path, columns)
    elif format == "json":
        write_json(records, path)
    else:
        raise ValueError(f"unknown format {format!r}")
    return {"path": str(path), "sha256": sha256_file(path), "bytes": path.stat().st_size}


# ---------------------------------------------------------------- manifests


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    master_seed: int
    started: str
    finished: str
    outputs: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(cfg: ExperimentConfig, entries: list[dict], started: str, path) -> RunManifest:
    man = RunManifest(
        tool_version=__version__,
        config_hash=config_hash(cfg),
        master_seed=cfg.seed,
        started=started,
        finished=now_iso(),
        outputs={os.path.basename(e["path"]): e["sha256"] for e in entries},
        config=cfg.to_dict(),
    )
    write_json({"schema_version": 1, **asdict(man)}, path)
    return man


def verify_manifest(path) -> dict[str, bool]:
    """Digest check of every output listed in a manifest (paths relative to it)."""
    man = RunManifest.load(path)
    base = Path(path).parent
    return {name: (base / name).exists() and sha256_file(base / name) == digest for name, digest in man.outputs.items()}


def config_from_manifest(path) -> ExperimentConfig:
    man = RunManifest.load(path)
    return ExperimentConfig(**man.config)

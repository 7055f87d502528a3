"""Experiment drivers.  Each ``run_*`` takes an :class:`ExperimentConfig` and
returns a :class:`Report` of plain rows plus a summary dictionary.

Trial seeds are ``derive_seed(master, config_index, ..., trial)`` and results
are merged in trial order, so the worker count never changes the output.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .bodies import (
    ExpectedHullOracle,
    certify_sandwich,
    inclusion_probability,
    random_directions,
    sandwich_bruteforce,
    theorem1_delta,
    wilson_interval,
)
from .distributions import DistributionModel, directional_law, parse_law_spec, parse_model_spec, sample
from .errors import DomainError, SoundnessError
from .geometry import Polytope, build_net
from .order_stats import LEMMA4_MIN_N, expected_max, lemma4_verify, quantile_sandwich_check
from .seeding import derive_seed

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "Report",
    "run_theorem1",
    "run_corollary2",
    "run_strong_law",
    "run_lemma4",
    "run_inclusion",
    "run_experiment",
    "direction_grid",
    "exact_interval_sandwich_probability",
    "strong_law_margins",
    "inclusion_series_partial_sums",
    "theorem1_feasible",
]

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    kind: str
    models: list[str] = field(default_factory=lambda: ["gaussian:I2"])
    laws: list[str] = field(default_factory=list)
    n: list[int] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)
    t_grid: list[float] = field(default_factory=list)
    trials: int = 100
    seed: int = 0
    mode: str = "analytic"
    replicates: int = 10_000
    m_dirs: int = 10_000
    n_dirs: int = 1000
    net_budget: int = 20_000
    draws: int = 10_000
    threads: int = 1
    csv: str = ""
    json: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialRecord:
    model: str
    trial: int
    n: int
    d: int
    epsilon: float
    seed: int
    certified: bool
    min_ratio: float
    max_ratio: float
    delta: float
    clamped: bool
    net_size: int
    eps_out: float
    eps_in: float
    sandwich: bool
    reason: str
    wall_time: float = 0.0

    # wall time is left out of the CSV so reruns stay byte-identical
    CSV_FIELDS = (
        "model", "trial", "n", "d", "epsilon", "seed", "certified", "min_ratio", "max_ratio",
        "delta", "clamped", "net_size", "eps_out", "eps_in", "sandwich", "reason",
    )

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


@dataclass
class Report:
    kind: str
    columns: list[str]
    rows: list[dict]
    summary: dict


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def theorem1_feasible(n: int, epsilon: float, dim: int) -> bool:
    """Whether ``n >= exp(7 d eps^-1 log eps^-1)``."""
    return math.log(n) >= 7.0 * dim / epsilon * math.log(1.0 / epsilon)


def theorem1_bound(n: int, epsilon: float) -> float:
    return max(0.0, 1.0 - 3.0 * math.exp(-epsilon / 4.0 * math.log(n)))


def exact_interval_sandwich_probability(model: DistributionModel, n: int, margin: float, EH: ExpectedHullOracle) -> float:
    """Exact ``P{(1-m)E+ <= max <= (1+m)E+ and (1-m)E- <= -min <= (1+m)E-}`` in d = 1.

    ``E+``/``E-`` are the expected-hull supports in directions ``+1``/``-1``.
    Inclusion-exclusion over the events "all points in an interval".
    """
    if model.dim != 1:
        raise DomainError("exact interval probability is one-dimensional")
    law = directional_law(model, [1.0])
    e_plus = EH.support(np.array([1.0]))
    e_minus = EH.support(np.array([-1.0]))
    u1, u2 = (1 - margin) * e_plus, (1 + margin) * e_plus
    l1, l2 = -(1 + margin) * e_minus, -(1 - margin) * e_minus

    def all_in(a, b):
        # P{a <= X <= b}^n, the mass outside taken from both tails
        out = law.cdf(a) + law.sf(b)
        if out >= 1.0:
            return 0.0
        return math.exp(n * math.log1p(-out))

    return all_in(l1, u2) - all_in(l2, u2) - all_in(l1, u1) + all_in(l2, u1)


# ----------------------------------------------------------------- theorem 1


def run_theorem1(cfg: ExperimentConfig) -> Report:
    rows: list[dict] = []
    summary_rows = []
    ci = 0
    for model_spec in cfg.models:
        model = parse_model_spec(model_spec)
        d = model.dim
        for n in cfg.n:
            if n < d + 1:
                raise DomainError(f"n={n} is below d+1={d + 1}")
            EH = ExpectedHullOracle(model, n, cfg.mode, cfg.replicates, seed=derive_seed(cfg.seed, ci, 0))
            dirs = random_directions(d, cfg.m_dirs, derive_seed(cfg.seed, ci, 2))
            hd = EH.support(dirs)
            for eps in cfg.epsilon:
                ci += 1
                prescribed, delta, clamped = theorem1_delta(n, eps, d)
                net = build_net(EH.polar_gauge(), delta, seed=derive_seed(cfg.seed, ci, 1), candidate_budget=cfg.net_budget)

                def trial(t, n=n, eps=eps, ci=ci, net=net, delta=delta, prescribed=prescribed, clamped=clamped):
                    start = time.perf_counter()
                    seed = derive_seed(cfg.seed, ci, 3, t)
                    P = Polytope(sample(model, n, seed))
                    cert = certify_sandwich(P, EH, eps, net, delta, prescribed, clamped)
                    eps_out, eps_in = sandwich_bruteforce(P, EH, directions=dirs, eh_values=hd)
                    rec = TrialRecord(
                        model=str(model), trial=t, n=n, d=d, epsilon=eps, seed=seed,
                        certified=cert.certified, min_ratio=cert.min_ratio, max_ratio=cert.max_ratio,
                        delta=delta, clamped=clamped, net_size=net.size,
                        eps_out=eps_out, eps_in=eps_in, sandwich=eps_out <= eps and eps_in <= eps,
                        reason=cert.reason, wall_time=time.perf_counter() - start,
                    )
                    if rec.certified and not rec.sandwich:
                        raise SoundnessError(
                            f"certified trial {t} (n={n}, eps={eps}) has brute-force defects "
                            f"({eps_out:.6g}, {eps_in:.6g})"
                        )
                    return rec

                records = _pmap(trial, list(range(cfg.trials)), cfg.threads)
                rows.extend(r.row() for r in records)
                k = len(records)
                n_cert = sum(r.certified for r in records)
                n_sand = sum(r.sandwich for r in records)
                entry = {
                    "model": str(model),
                    "d": d,
                    "n": n,
                    "epsilon": eps,
                    "trials": k,
                    "delta": delta,
                    "delta_prescribed": prescribed,
                    "clamped": clamped,
                    "net_size": net.size,
                    "p_certified": n_cert / k if k else math.nan,
                    "p_certified_ci": list(wilson_interval(n_cert, k)),
                    "p_sandwich": n_sand / k if k else math.nan,
                    "p_sandwich_ci": list(wilson_interval(n_sand, k)),
                    "bound": theorem1_bound(n, eps),
                    "feasible": theorem1_feasible(n, eps, d),
                    "min_ratio": min((r.min_ratio for r in records), default=math.nan),
                    "max_ratio": max((r.max_ratio for r in records), default=math.nan),
                    "soundness_violations": 0,
                }
                if d == 1 and model.analytic:
                    entry["p_exact_sandwich"] = exact_interval_sandwich_probability(model, n, eps, EH)
                    entry["p_exact_certified"] = exact_interval_sandwich_probability(model, n, eps / 2, EH)
                summary_rows.append(entry)
    return Report("theorem1", list(TrialRecord.CSV_FIELDS), rows, {"configs": summary_rows})


# ---------------------------------------------------------------- corollary 2


def direction_grid(model: DistributionModel, count: int) -> np.ndarray:
    """Low-discrepancy unit directions plus signed axes and covariance eigenvectors."""
    d = model.dim
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2 * math.pi * (np.arange(count) + 0.5) / count
        grid = np.column_stack([np.cos(ang), np.sin(ang)])
    elif d == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        r = np.sqrt(1 - z * z)
        phi = math.pi * (3 - math.sqrt(5)) * i
        grid = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    else:
        half = random_directions(d, (count + 1) // 2, 0, include_axes=False)
        grid = np.vstack([half, -half])
    _, vecs = np.linalg.eigh(model.covariance())
    extra = np.vstack([np.eye(d), -np.eye(d), vecs.T, -vecs.T])
    return np.vstack([extra, grid])


def _fmt_dir(u: np.ndarray) -> str:
    return ";".join(f"{v:.17g}" for v in u)


COROLLARY2_COLUMNS = [
    "model", "d", "n", "theta", "h_eh", "quantile", "lower_factor", "upper_factor",
    "slack_left", "slack_right", "holds_left", "holds_right", "lower_factor_ln18", "slack_left_ln18",
]


def run_corollary2(cfg: ExperimentConfig, tol: float = 1e-8) -> Report:
    rows = []
    summary = []
    for model_spec in cfg.models:
        model = parse_model_spec(model_spec)
        if not model.analytic:
            raise DomainError(f"corollary2 needs an analytic model, got {model}")
        dirs = direction_grid(model, cfg.n_dirs)
        for n in cfg.n:
            if n < LEMMA4_MIN_N:
                raise DomainError("corollary2 needs n >= 12")
            EH = ExpectedHullOracle(model, n)
            lo_f = 1.0 - 3.0 / math.log(n)
            hi_f = 1.0 + 1.0 / math.log(n)
            ln18_f = 1.0 - math.log(18.0) / math.log(n)

            def check(u, n=n, EH=EH, lo_f=lo_f, hi_f=hi_f, ln18_f=ln18_f):
                h = EH.support(u)
                q = directional_law(model, u).isf(1.0 / n)
                sl, sr = q - lo_f * h, hi_f * h - q
                s = tol * max(1.0, abs(h))
                return {
                    "model": str(model), "d": model.dim, "n": n, "theta": _fmt_dir(u),
                    "h_eh": h, "quantile": q, "lower_factor": lo_f, "upper_factor": hi_f,
                    "slack_left": sl, "slack_right": sr,
                    "holds_left": sl >= -s, "holds_right": sr >= -s,
                    "lower_factor_ln18": ln18_f, "slack_left_ln18": q - ln18_f * h,
                }

            block = _pmap(check, list(dirs), cfg.threads)
            rows.extend(block)
            summary.append({
                "model": str(model),
                "d": model.dim,
                "n": n,
                "directions": len(block),
                "failures": sum(not (r["holds_left"] and r["holds_right"]) for r in block),
                "min_slack_left": min(r["slack_left"] for r in block),
                "min_slack_right": min(r["slack_right"] for r in block),
                "max_slack_right_relative": max(r["slack_right"] / r["h_eh"] for r in block),
                "min_slack_left_ln18": min(r["slack_left_ln18"] for r in block),
            })
    return Report("corollary2", COROLLARY2_COLUMNS, rows, {"configs": summary})


# --------------------------------------------------------------- strong law


def strong_law_margins(n: int) -> tuple[float, float]:
    """``(3 ln ln n / ln n, 8 ln ln n / ln n)``."""
    ln = math.log(n)
    ll = math.log(ln)
    return 3.0 * ll / ln, 8.0 * ll / ln


STRONG_LAW_COLUMNS = [
    "model", "d", "k", "n", "eps_in", "eps_out", "margin_in", "margin_out", "holds_in", "holds_out",
]


def run_strong_law(cfg: ExperimentConfig) -> Report:
    """One growing i.i.d. path per model; prefix hulls at ``n = 2^k``."""
    ks = sorted(int(round(math.log2(n))) for n in cfg.n)
    if any(2**k != n for k, n in zip(ks, sorted(cfg.n))):
        raise DomainError("strong-law schedule must consist of powers of two")
    if ks[0] < 4:
        raise DomainError("strong-law schedule must start at n >= 16")
    rows = []
    summary = []
    for mi, model_spec in enumerate(cfg.models):
        model = parse_model_spec(model_spec)
        d = model.dim
        stream = sample(model, 2 ** ks[-1], derive_seed(cfg.seed, mi, 0))
        if d == 1:
            dirs = np.array([[1.0], [-1.0]])
        else:
            dirs = random_directions(d, cfg.m_dirs, derive_seed(cfg.seed, mi, 1))
        running = np.full(dirs.shape[0], -np.inf)
        pos = 0
        block = []
        for k in ks:
            n = 2**k
            running = np.maximum(running, (stream[pos:n] @ dirs.T).max(axis=0))
            pos = n
            EH = ExpectedHullOracle(model, n)
            ratio = running / EH.support(dirs)
            eps_out = float(ratio.max() - 1.0)
            eps_in = float(1.0 - ratio.min())
            m_in, m_out = strong_law_margins(n)
            block.append({
                "model": str(model), "d": d, "k": k, "n": n, "eps_in": eps_in, "eps_out": eps_out,
                "margin_in": m_in, "margin_out": m_out,
                "holds_in": eps_in <= m_in, "holds_out": eps_out <= m_out,
            })
        n_hat = None
        for i in range(len(block) - 1, -1, -1):
            if block[i]["holds_in"] and block[i]["holds_out"]:
                n_hat = block[i]["n"]
            else:
                break
        rows.extend(block)
        summary.append({"model": str(model), "d": d, "n_hat": n_hat if n_hat is not None else "not yet"})
    return Report("strong_law", STRONG_LAW_COLUMNS, rows, {"paths": summary})


# ------------------------------------------------------------------- lemma 4


LEMMA4_COLUMNS = [
    "law", "n", "t", "e_max", "p_right", "bound_right", "p_left", "bound_left",
    "holds_right", "holds_left", "bound_left_proof",
]


def _laws(cfg: ExperimentConfig):
    if cfg.laws:
        return [parse_law_spec(s) for s in cfg.laws]
    out = []
    for spec in cfg.models:
        model = parse_model_spec(spec)
        out.append(directional_law(model, np.eye(model.dim)[0]))
    return out


def run_lemma4(cfg: ExperimentConfig) -> Report:
    for n in cfg.n:
        if n < LEMMA4_MIN_N:
            raise DomainError(f"n={n} is below the admissible minimum {LEMMA4_MIN_N}")
    rows = []
    quantiles = []
    pairs = [(law, n) for law in _laws(cfg) for n in cfg.n]

    def one(pair):
        law, n = pair
        e = expected_max(law, n)
        reps = [lemma4_verify(law, n, t, e_max=e).as_row() for t in cfg.t_grid]
        qs = quantile_sandwich_check(law, n, e_max=e)
        return reps, qs

    for reps, qs in _pmap(one, pairs, cfg.threads):
        rows.extend({k: r[k] for k in LEMMA4_COLUMNS} for r in reps)
        quantiles.append({
            "law": rows[-1]["law"], "n": qs.n, "e_max": qs.e_max,
            "max_quantile_1_over_e": qs.max_q_low, "max_quantile_1_minus_1_over_e": qs.max_q_high,
            "quantile_1_minus_1_over_n": qs.q_one_over_n, "quantile_1_minus_9_over_20n": qs.q_nine_twentieths,
            "all_hold": qs.all_ok,
        })
    failures = sum(not (r["holds_right"] and r["holds_left"]) for r in rows)
    return Report("lemma4", LEMMA4_COLUMNS, rows, {"failures": failures, "quantile_sandwich": quantiles})


# ----------------------------------------------------------------- inclusion


def inclusion_series_partial_sums(ns: Iterable[int]) -> list[float]:
    """``sum_{j=12}^{n} 2 j^{-1-eps_j/4}`` with ``eps_j = 8 ln ln j / ln j``."""
    ns = list(ns)
    top = max(ns)
    j = np.arange(12, top + 1, dtype=float)
    lj = np.log(j)
    eps = 8.0 * np.log(lj) / lj
    terms = 2.0 * np.exp(-(1.0 + eps / 4.0) * lj)
    cums = np.cumsum(terms)
    return [float(cums[n - 12]) if n >= 12 else 0.0 for n in ns]


INCLUSION_COLUMNS = [
    "model", "d", "n", "epsilon", "estimate", "ci_low", "ci_high", "certified_in", "certified_out",
    "indeterminate", "bound", "exact", "partial_sum",
]


def run_inclusion(cfg: ExperimentConfig) -> Report:
    rows = []
    for mi, model_spec in enumerate(cfg.models):
        model = parse_model_spec(model_spec)
        sums = inclusion_series_partial_sums(cfg.n)
        for ni, n in enumerate(cfg.n):
            if n < LEMMA4_MIN_N:
                raise DomainError("inclusion schedule must start at n >= 12")
            eps = 8.0 * math.log(math.log(n)) / math.log(n)
            EH = ExpectedHullOracle(model, n, cfg.mode, cfg.replicates, seed=derive_seed(cfg.seed, mi, ni, 0))
            net = None
            if model.dim > 1:
                net = build_net(EH.polar_gauge(), 0.1, seed=derive_seed(cfg.seed, mi, ni, 1), candidate_budget=cfg.net_budget)
            est = inclusion_probability(model, EH, eps, cfg.draws, derive_seed(cfg.seed, mi, ni, 2), net=net)
            exact = math.nan
            if model.dim == 1 and model.analytic:
                law = directional_law(model, [1.0])
                a = (1 + eps) * EH.support(np.array([1.0]))
                b = (1 + eps) * EH.support(np.array([-1.0]))
                exact = 1.0 - law.sf(a) - law.cdf(-b)
            rows.append({
                "model": str(model), "d": model.dim, "n": n, "epsilon": eps, "estimate": est.estimate,
                "ci_low": est.ci_low, "ci_high": est.ci_high, "certified_in": est.certified_in,
                "certified_out": est.certified_out, "indeterminate": est.indeterminate,
                "bound": 1.0 - 6.0 * math.exp(-(1.0 + eps / 4.0) * math.log(n)),
                "exact": exact, "partial_sum": sums[ni],
            })
    return Report("inclusion", INCLUSION_COLUMNS, rows, {"rows": len(rows)})


RUNNERS = {
    "theorem1": run_theorem1,
    "corollary2": run_corollary2,
    "strong_law": run_strong_law,
    "lemma4": run_lemma4,
    "inclusion": run_inclusion,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    report = RUNNERS[cfg.kind](cfg)
    report.summary = {"schema_version": SCHEMA_VERSION, "experiment": cfg.kind, **report.summary}
    return report

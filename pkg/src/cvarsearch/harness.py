"""Experiment orchestration: config files, replications, CSV outputs.

An experiment is a pure function of (config, master seed): replications
draw their initial means and all simulation noise from per-replication
substreams, so reruns are bit-identical and the worker count used to farm
replications out never changes any number.

Outputs per experiment:

* ``iterations.csv``  one row per (replication, iteration) with the fixed
  header ``rep,k,alpha,grad_norm,best_cvar,cum_evals,mean_0,...``;
* ``curve.csv``       aggregate best-value-so-far ratio curve against
  cumulative search evaluations (mean and 10/90 percent quantiles across
  replications), the ratio being best fresh target-level CVaR divided by
  the reference optimum;
* ``alpha.csv``       mean risk-level trajectory per iteration;
* ``summary.json``    per-replication digests plus totals and the echoed
  config.

The reference optimum is analytic for the quadratic-bowl benchmark and a
cached large-budget search for the others, keyed by a hash of the
reference-relevant config fields.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from .benchmarks import (
    BENCHMARK_IDS,
    BenchmarkLoss,
    BenchmarkSpec,
    l0_min_cvar_oracle,
)
from .engine import (
    ConstantSchedule,
    GassConfig,
    PowerGrowthSchedule,
    PowerLawStepSize,
    RunResult,
    evaluate_candidates,
    run_gass_cvar,
    run_gass_cvar_arl,
)
from .sampling import ProjectionBox, SamplingParams
from .schedule import RiskSchedule, inner_sample_size
from .shaping import ShapeConfig
from .streams import as_seed_sequence, generator, substream

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ReplicationOutcome",
    "ExperimentResult",
    "load_config",
    "save_config",
    "run_experiment",
    "run_replication",
    "evaluate_final",
    "emit_csv",
    "emit_reference_run",
    "budget_to_threshold",
    "ALGORITHMS",
]

ALGORITHMS = ("gass_cvar", "gass_cvar_arl")


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; see the README for the key schema."""

    benchmark: str
    dim: int
    algorithm: str
    alpha_star: float
    effective_size: int
    n_candidates: int
    max_iterations: int
    replications: int
    master_seed: int
    alpha_init: float = 0.0
    n_growth_exponent: float = 0.0
    s_o: float = 1e5
    rho: float = 0.1
    epsilon: float = 1e-10
    step_a: float = 50.0
    step_b: float = 2000.0
    step_gamma: float = 0.6
    mean_init_lo: float = -30.0
    mean_init_hi: float = 30.0
    var_init: float = 1000.0
    mean_box_lo: float = -50.0
    mean_box_hi: float = 50.0
    var_box_lo: float = 1e-6
    var_box_hi: float = 2000.0
    grad_norm_stop: float = 1e-3
    final_eval_budget: int = 100_000
    reference_n_candidates: int = 5000
    reference_inner_budget: int = 100_000
    reference_max_iterations: int = 100

    def __post_init__(self):
        _validate(self)


def _fail(key: str, detail: str):
    raise ConfigError(f"config key {key!r}: {detail}")


def _validate(c: ExperimentConfig):
    if c.benchmark not in BENCHMARK_IDS:
        _fail("benchmark", f"unknown benchmark {c.benchmark!r}, expected one of {BENCHMARK_IDS}")
    if c.dim < 1:
        _fail("dim", "must be >= 1")
    if c.benchmark == "powell" and c.dim < 4:
        _fail("dim", "powell requires dim >= 4")
    if c.algorithm not in ALGORITHMS:
        _fail("algorithm", f"expected one of {ALGORITHMS}")
    if not (0.0 <= c.alpha_star < 1.0):
        _fail("alpha_star", "must lie in [0, 1)")
    if not (0.0 <= c.alpha_init <= c.alpha_star):
        _fail("alpha_init", "must lie in [0, alpha_star]")
    if c.effective_size < 2:
        _fail("effective_size", "must be >= 2")
    if c.n_candidates < 2:
        _fail("n_candidates", "must be >= 2")
    if c.n_growth_exponent < 0:
        _fail("n_growth_exponent", "must be >= 0")
    if not (math.isfinite(c.s_o) and c.s_o > 0):
        _fail("s_o", "must be positive and finite")
    if not (0.0 < c.rho <= 1.0):
        _fail("rho", "must lie in (0, 1]")
    if not (math.isfinite(c.epsilon) and c.epsilon > 0):
        _fail("epsilon", "must be positive and finite")
    if not (c.step_a > 0):
        _fail("step_a", "must be > 0")
    if not (c.step_b > 0):
        _fail("step_b", "must be > 0")
    if not (0.5 < c.step_gamma <= 1.0):
        _fail("step_gamma", "must lie in (0.5, 1]")
    if c.mean_init_lo > c.mean_init_hi:
        _fail("mean_init_lo", "must be <= mean_init_hi")
    if c.mean_box_lo > c.mean_box_hi:
        _fail("mean_box_lo", "must be <= mean_box_hi")
    if not (c.mean_box_lo <= c.mean_init_lo and c.mean_init_hi <= c.mean_box_hi):
        _fail("mean_init_lo", "initial-mean range must lie inside the mean box")
    if not (math.isfinite(c.var_box_lo) and c.var_box_lo > 0):
        _fail("var_box_lo", "must be positive and finite")
    if c.var_box_lo > c.var_box_hi:
        _fail("var_box_lo", "must be <= var_box_hi")
    if not (c.var_box_lo <= c.var_init <= c.var_box_hi):
        _fail("var_init", "must lie inside the variance box")
    if c.max_iterations < 1:
        _fail("max_iterations", "must be >= 1")
    if c.replications < 1:
        _fail("replications", "must be >= 1")
    if c.master_seed < 0:
        _fail("master_seed", "must be >= 0")
    if not (math.isfinite(c.grad_norm_stop) and c.grad_norm_stop >= 0):
        _fail("grad_norm_stop", "must be finite and >= 0")
    for key in ("final_eval_budget", "reference_inner_budget"):
        if getattr(c, key) < 1:
            _fail(key, "must be >= 1")
    if c.reference_n_candidates < 2:
        _fail("reference_n_candidates", "must be >= 2")
    if c.reference_max_iterations < 1:
        _fail("reference_max_iterations", "must be >= 1")


_INT_FIELDS = {
    "dim", "effective_size", "n_candidates", "max_iterations", "replications",
    "master_seed", "final_eval_budget", "reference_n_candidates",
    "reference_inner_budget", "reference_max_iterations",
}
_STR_FIELDS = {"benchmark", "algorithm"}


def load_config(path) -> ExperimentConfig:
    """Read a YAML mapping of flat keys into an ExperimentConfig.

    Unknown keys, missing required keys, wrong types and constraint
    violations all raise ConfigError naming the key.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path}: not valid YAML ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path}: expected a mapping of keys to values")
    known = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"config key {key!r}: unknown key")
        try:
            if key in _STR_FIELDS:
                if not isinstance(value, str):
                    raise TypeError("expected a string")
                values[key] = value
            elif key in _INT_FIELDS:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError("expected an integer")
                values[key] = int(value)
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError("expected a number")
                values[key] = float(value)
        except TypeError as exc:
            raise ConfigError(f"config key {key!r}: {exc} (got {value!r})") from exc
    required = [name for name, f in known.items()
                if f.default is dataclasses.MISSING]
    missing = [name for name in required if name not in values]
    if missing:
        raise ConfigError(f"config key {missing[0]!r}: required key is missing")
    config = ExperimentConfig(**values)
    if config.n_growth_exponent == 0.0:
        # not an error: constant schedules are the practical defaults, they
        # just fall outside the asymptotic conditions behind the guarantees
        warnings.warn(
            "constant candidate and simulation counts do not satisfy the "
            "asymptotic growth conditions behind the convergence guarantees",
            stacklevel=2,
        )
    return config


def save_config(config: ExperimentConfig, path):
    """Write the config back out as YAML; load_config inverts this exactly."""
    data = dataclasses.asdict(config)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)


def _projection_box(c: ExperimentConfig) -> ProjectionBox:
    d = c.dim
    return ProjectionBox(
        mean_lo=np.full(d, c.mean_box_lo),
        mean_hi=np.full(d, c.mean_box_hi),
        var_lo=np.full(d, c.var_box_lo),
        var_hi=np.full(d, c.var_box_hi),
    )


def _gass_config(c: ExperimentConfig, mean0: np.ndarray) -> GassConfig:
    if c.n_growth_exponent > 0:
        counts = PowerGrowthSchedule(c.n_candidates, c.n_growth_exponent)
    else:
        counts = ConstantSchedule(c.n_candidates)
    return GassConfig(
        init_params=SamplingParams(mean=mean0, variance=np.full(c.dim, c.var_init)),
        box=_projection_box(c),
        shape=ShapeConfig(s_o=c.s_o, rho=c.rho),
        step_size=PowerLawStepSize(c.step_a, c.step_b, c.step_gamma),
        n_candidates=counts,
        epsilon=c.epsilon,
        max_iterations=c.max_iterations,
        grad_norm_stop=c.grad_norm_stop,
    )


@dataclass(frozen=True)
class ReplicationOutcome:
    """One replication's run result under its replication index."""

    rep: int
    result: RunResult

    @property
    def search_evals(self) -> int:
        return self.result.records[-1].cumulative_loss_evals

    @property
    def best_values(self) -> np.ndarray:
        """Running best of the fresh target-level values, per iteration."""
        return np.minimum.accumulate(self.result.record_values)


def run_replication(config: ExperimentConfig, rep: int) -> ReplicationOutcome:
    """Run one replication; depends only on (config, rep)."""
    rep = int(rep)
    if not 0 <= rep:
        raise ValueError("rep must be >= 0")
    rep_seq = substream(as_seed_sequence(config.master_seed), rep)
    rng_init = generator(substream(rep_seq, 0))
    mean0 = rng_init.uniform(config.mean_init_lo, config.mean_init_hi, config.dim)
    gcfg = _gass_config(config, mean0)
    loss = BenchmarkLoss(BenchmarkSpec(config.benchmark, config.dim))
    engine_seed = substream(rep_seq, 1)
    if config.algorithm == "gass_cvar":
        budget = ConstantSchedule(inner_sample_size(config.alpha_star, config.effective_size))
        result = run_gass_cvar(
            gcfg, loss, config.alpha_star, budget, engine_seed,
            final_eval_budget=config.final_eval_budget, evaluate_records=True,
        )
    else:
        result = run_gass_cvar_arl(
            gcfg, loss, RiskSchedule.start(config.alpha_init, config.alpha_star),
            config.effective_size, engine_seed,
            final_eval_budget=config.final_eval_budget,
        )
    return ReplicationOutcome(rep=rep, result=result)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    reference_value: float
    outcomes: list[ReplicationOutcome]
    # aggregate ratio curve columns, aligned arrays
    curve_evals: np.ndarray
    curve_mean_ratio: np.ndarray
    curve_q10_ratio: np.ndarray
    curve_q90_ratio: np.ndarray
    curve_mean_value: np.ndarray
    # mean risk level per iteration index
    alpha_mean: np.ndarray


def _step_values(evals: np.ndarray, bests: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # right-continuous step lookup; grid points before the first eval are
    # excluded by grid construction
    idx = np.searchsorted(evals, grid, side="right") - 1
    return bests[np.clip(idx, 0, bests.size - 1)]


def _aggregate(config: ExperimentConfig, reference_value: float,
               outcomes: list[ReplicationOutcome]) -> ExperimentResult:
    all_evals = [np.array([r.cumulative_loss_evals for r in o.result.records])
                 for o in outcomes]
    all_bests = [o.best_values for o in outcomes]
    start = max(e[0] for e in all_evals)
    grid = np.unique(np.concatenate(all_evals))
    grid = grid[grid >= start]
    table = np.vstack([_step_values(e, b, grid) for e, b in zip(all_evals, all_bests)])
    ratios = table / reference_value
    k_max = max(len(o.result.records) for o in outcomes)
    alpha_rows = np.vstack([
        np.array([o.result.records[min(k, len(o.result.records) - 1)].alpha
                  for k in range(k_max)])
        for o in outcomes
    ])
    return ExperimentResult(
        config=config,
        reference_value=reference_value,
        outcomes=outcomes,
        curve_evals=grid,
        curve_mean_ratio=ratios.mean(axis=0),
        curve_q10_ratio=np.quantile(ratios, 0.1, axis=0),
        curve_q90_ratio=np.quantile(ratios, 0.9, axis=0),
        curve_mean_value=table.mean(axis=0),
        alpha_mean=alpha_rows.mean(axis=0),
    )


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   reference_value: float | None = None,
                   cache_dir=None) -> ExperimentResult:
    """All replications plus aggregation.

    ``workers`` > 1 farms replications out to processes; results are
    identical to the serial run because every replication derives its own
    substreams.  The reference optimum is computed (or read from cache)
    unless passed in.
    """
    workers = int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if reference_value is None:
        reference_value = emit_reference_run(config, cache_dir=cache_dir)
    reps = range(config.replications)
    if workers == 1:
        outcomes = [run_replication(config, rep) for rep in reps]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_replication, config, rep) for rep in reps]
            outcomes = [f.result() for f in futures]
    return _aggregate(config, float(reference_value), outcomes)


def evaluate_final(loss, candidates, alpha_star: float, budget: int,
                   seed) -> tuple[np.ndarray, float]:
    """Fresh target-level value per candidate; returns (argmin, its value)."""
    values = evaluate_candidates(loss, candidates, alpha_star, budget, seed)
    j = int(np.argmin(values))
    return np.asarray(candidates[j], dtype=float), float(values[j])


def budget_to_threshold(outcome: ReplicationOutcome, threshold: float) -> int | None:
    """Search evaluations spent when the fresh best value first reached
    threshold; None if it never did."""
    bests = outcome.best_values
    hit = np.nonzero(bests <= threshold)[0]
    if hit.size == 0:
        return None
    return int(outcome.result.records[int(hit[0])].cumulative_loss_evals)


# --- reference optimum ---------------------------------------------------

_REFERENCE_FIELDS = (
    "benchmark", "dim", "alpha_star", "s_o", "rho", "epsilon",
    "step_a", "step_b", "step_gamma", "mean_init_lo", "mean_init_hi",
    "var_init", "mean_box_lo", "mean_box_hi", "var_box_lo", "var_box_hi",
    "reference_n_candidates", "reference_inner_budget", "reference_max_iterations",
)


def _reference_key(config: ExperimentConfig) -> str:
    payload = {name: getattr(config, name) for name in _REFERENCE_FIELDS}
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def emit_reference_run(config: ExperimentConfig, cache_dir=None) -> float:
    """Reference optimum for the ratio curves.

    The quadratic bowl has an analytic optimum.  Other benchmarks get one
    large-budget fixed-level run seeded from the config hash; the value is
    cached in ``reference_cache.json`` under that hash when a cache
    directory is given.
    """
    if config.benchmark == "l0":
        return float(l0_min_cvar_oracle(config.dim, config.alpha_star)[1])
    key = _reference_key(config)
    cache_path = None
    if cache_dir is not None:
        cache_path = os.path.join(cache_dir, "reference_cache.json")
        if os.path.exists(cache_path):
            with open(cache_path, "r", encoding="utf-8") as fh:
                cache = json.load(fh)
            if key in cache:
                return float(cache[key])
    ref_seed = substream(np.random.SeedSequence(int(key[:16], 16)), 0)
    mean0 = generator(substream(ref_seed, 0)).uniform(
        config.mean_init_lo, config.mean_init_hi, config.dim
    )
    ref_cfg = dataclasses.replace(
        config,
        n_candidates=config.reference_n_candidates,
        max_iterations=config.reference_max_iterations,
        replications=1,
    )
    gcfg = _gass_config(ref_cfg, mean0)
    loss = BenchmarkLoss(BenchmarkSpec(config.benchmark, config.dim))
    result = run_gass_cvar(
        gcfg, loss, config.alpha_star,
        ConstantSchedule(config.reference_inner_budget),
        substream(ref_seed, 1),
        final_eval_budget=config.reference_inner_budget,
    )
    value = float(result.final_best_cvar)
    if cache_path is not None:
        cache = {}
        if os.path.exists(cache_path):
            with open(cache_path, "r", encoding="utf-8") as fh:
                cache = json.load(fh)
        cache[key] = value
        os.makedirs(cache_dir, exist_ok=True)
        with open(cache_path, "w", encoding="utf-8") as fh:
            json.dump(cache, fh, sort_keys=True, indent=1)
    return value


# --- CSV emission --------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def emit_csv(result: ExperimentResult, out_dir) -> dict[str, str]:
    """Write iterations.csv, curve.csv, alpha.csv and summary.json.

    All content is a pure function of the result, so rewriting the same
    result reproduces the files byte for byte.
    """
    os.makedirs(out_dir, exist_ok=True)
    d = result.config.dim
    paths = {}

    path = os.path.join(out_dir, "iterations.csv")
    header = "rep,k,alpha,grad_norm,best_cvar,cum_evals," + ",".join(
        f"mean_{i}" for i in range(d)
    )
    lines = [header]
    for outcome in result.outcomes:
        for rec in outcome.result.records:
            mean_cols = ",".join(_fmt(v) for v in rec.params_snapshot.mean)
            lines.append(
                f"{outcome.rep},{rec.k},{_fmt(rec.alpha)},{_fmt(rec.grad_norm)},"
                f"{_fmt(rec.best_cvar_estimate)},{rec.cumulative_loss_evals},{mean_cols}"
            )
    _write_lines(path, lines)
    paths["iterations"] = path

    path = os.path.join(out_dir, "curve.csv")
    lines = ["cum_evals,mean_ratio,q10_ratio,q90_ratio,mean_best_cvar"]
    for i in range(result.curve_evals.size):
        lines.append(
            f"{int(result.curve_evals[i])},{_fmt(result.curve_mean_ratio[i])},"
            f"{_fmt(result.curve_q10_ratio[i])},{_fmt(result.curve_q90_ratio[i])},"
            f"{_fmt(result.curve_mean_value[i])}"
        )
    _write_lines(path, lines)
    paths["curve"] = path

    path = os.path.join(out_dir, "alpha.csv")
    lines = ["k,mean_alpha"]
    for k in range(result.alpha_mean.size):
        lines.append(f"{k},{_fmt(result.alpha_mean[k])}")
    _write_lines(path, lines)
    paths["alpha"] = path

    path = os.path.join(out_dir, "summary.json")
    digests = []
    for outcome in result.outcomes:
        r = outcome.result
        digests.append({
            "rep": outcome.rep,
            "iterations": len(r.records),
            "terminated_by": r.terminated_by,
            "final_best_cvar": r.final_best_cvar,
            "final_best_candidate": [float(v) for v in r.final_best_candidate],
            "search_evals": outcome.search_evals,
            "final_eval_count": r.final_eval_count,
        })
    summary = {
        "config": dataclasses.asdict(result.config),
        "reference_value": result.reference_value,
        "replications": digests,
        "total_search_evals": sum(d["search_evals"] for d in digests),
        "total_final_evals": sum(d["final_eval_count"] for d in digests),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    paths["summary"] = path
    return paths


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")

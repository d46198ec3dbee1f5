"""Experiment orchestration: simulate, train, backtest, estimate, emit.

A run is a deterministic function of its configuration: every phase draws
from its own seed stream derived from the master seed by a fixed label, so
changing e.g. the estimation sample count never disturbs training data.
Simulation is chunked with per-chunk child seeds and merged in chunk order,
which keeps results independent of the worker count.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import BacktestReport, quantile_sets, run_backtest
from .models import OptionPortfolioModel, PutModel, SamplePairs, VAModel
from .nn import (NetworkArchitecture, NetworkParams, TrainingConfig, TrainingHistory,
                 forward, params_to_dict, train)
from .risk import RiskEstimate, var_es_with_trace
from .sampling import ISSpec, mean_shift

MODEL_IDS = ("put", "options20", "va-gmib")
MEASURES = ("plain", "is")

_PHASE_LABELS = {"pilot": 1, "train": 2, "validation": 3, "test": 4,
                 "estimate_plain": 5, "estimate_is": 6}

_CHUNK_OUTER = 16384  # fixed chunk size: results never depend on thread count


def phase_seed(master_seed: int, label: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), _PHASE_LABELS[label]])


def build_model(model_id: str):
    if model_id == "put":
        return PutModel()
    if model_id == "options20":
        return OptionPortfolioModel()
    if model_id == "va-gmib":
        return VAModel()
    raise ValueError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; serializes to/from a flat JSON document."""

    model: str
    measure: str
    n_train_outer: int
    n_train_inner: int
    n_validation: int
    n_test: int
    n_estimate: int
    architecture: NetworkArchitecture
    training: TrainingConfig
    alpha_var: float = 0.995
    alpha_es: float = 0.99
    alpha_is: float | None = None  # IS construction level; defaults to alpha_var
    seed: int = 0
    backtest_multiplier: float = 3.0
    per_epoch_backtest: bool = False
    trace_points: int = 25
    output_dir: str | None = None

    def __post_init__(self):
        if self.model not in MODEL_IDS:
            raise ValueError(f"model must be one of {MODEL_IDS}")
        if self.measure not in MEASURES:
            raise ValueError(f"measure must be one of {MEASURES}")
        for name in ("n_train_outer", "n_train_inner", "n_validation", "n_test", "n_estimate"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for alpha in (self.alpha_var, self.alpha_es, self.alpha_is):
            if alpha is not None and not 0.0 < alpha < 1.0:
                raise ValueError("alpha levels must lie in (0, 1)")

    @property
    def n_train(self) -> int:
        return self.n_train_outer * self.n_train_inner

    @property
    def is_level(self) -> float:
        return self.alpha_var if self.alpha_is is None else self.alpha_is

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "measure": self.measure,
            "alpha_var": self.alpha_var,
            "alpha_es": self.alpha_es,
            "alpha_is": self.alpha_is,
            "n_train_outer": self.n_train_outer,
            "n_train_inner": self.n_train_inner,
            "n_validation": self.n_validation,
            "n_test": self.n_test,
            "n_estimate": self.n_estimate,
            "architecture": {
                "input_dim": self.architecture.input_dim,
                "hidden_sizes": list(self.architecture.hidden_sizes),
                "output_activation": self.architecture.output_activation,
                "batch_norm": self.architecture.batch_norm,
            },
            "training": {
                "epochs": self.training.epochs,
                "batch_size": self.training.batch_size,
                "learning_rate": self.training.learning_rate,
                "beta1": self.training.beta1,
                "beta2": self.training.beta2,
                "adam_epsilon": self.training.adam_epsilon,
                "patience": self.training.patience,
                "seed": self.training.seed,
            },
            "seed": self.seed,
            "backtest_multiplier": self.backtest_multiplier,
            "per_epoch_backtest": self.per_epoch_backtest,
            "trace_points": self.trace_points,
            "output_dir": self.output_dir,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        arch = NetworkArchitecture(
            input_dim=int(doc["architecture"]["input_dim"]),
            hidden_sizes=tuple(doc["architecture"]["hidden_sizes"]),
            output_activation=doc["architecture"].get("output_activation", "exponential"),
            batch_norm=bool(doc["architecture"].get("batch_norm", True)),
        )
        tr = doc["training"]
        training = TrainingConfig(
            epochs=int(tr["epochs"]),
            batch_size=int(tr["batch_size"]),
            learning_rate=float(tr.get("learning_rate", 1e-3)),
            beta1=float(tr.get("beta1", 0.9)),
            beta2=float(tr.get("beta2", 0.999)),
            adam_epsilon=float(tr.get("adam_epsilon", 1e-7)),
            patience=int(tr.get("patience", 5)),
            seed=int(tr.get("seed", doc.get("seed", 0))),
        )
        return ExperimentConfig(
            model=doc["model"],
            measure=doc.get("measure", "plain"),
            alpha_var=float(doc.get("alpha_var", 0.995)),
            alpha_es=float(doc.get("alpha_es", 0.99)),
            alpha_is=None if doc.get("alpha_is") is None else float(doc["alpha_is"]),
            n_train_outer=int(doc["n_train_outer"]),
            n_train_inner=int(doc["n_train_inner"]),
            n_validation=int(doc["n_validation"]),
            n_test=int(doc["n_test"]),
            n_estimate=int(doc["n_estimate"]),
            architecture=arch,
            training=training,
            seed=int(doc.get("seed", 0)),
            backtest_multiplier=float(doc.get("backtest_multiplier", 3.0)),
            per_epoch_backtest=bool(doc.get("per_epoch_backtest", False)),
            trace_points=int(doc.get("trace_points", 25)),
            output_dir=doc.get("output_dir"),
        )

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


_DESK_DEFAULTS = {
    # model: (hidden sizes, n_outer, n_inner, epochs)
    "put": ((5,), 200_000, 1, 40),
    "options20": ((15, 15), 40_000, 5, 100),
    "va-gmib": ((4, 4), 40_000, 5, 40),
}


def default_config(model_id: str, measure: str = "plain", seed: int = 0,
                   output_dir: str | None = None, **overrides) -> ExperimentConfig:
    """Desk-scale defaults per experiment (full scale is a config away)."""
    hidden, n_outer, n_inner, epochs = _DESK_DEFAULTS[model_id]
    model = build_model(model_id)
    base = {
        "model": model_id,
        "measure": measure,
        "n_train_outer": n_outer,
        "n_train_inner": n_inner,
        "n_validation": 50_000,
        "n_test": 50_000,
        "n_estimate": 100_000,
        "architecture": NetworkArchitecture(model.d, hidden, "exponential", True),
        "training": TrainingConfig(epochs=epochs, batch_size=10_000, seed=seed),
        "seed": seed,
        "output_dir": output_dir,
    }
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass
class RunResult:
    config: ExperimentConfig
    estimates: dict[str, dict[str, RiskEstimate]]  # measure -> {"var", "es"}
    backtest: BacktestReport
    history: TrainingHistory
    params: NetworkParams
    timings: dict[str, float] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


# --- chunked simulation ------------------------------------------------------

def _chunk_sizes(n: int, chunk: int) -> list[int]:
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    return sizes


def simulate_pairs_chunked(model, n_outer: int, n_inner: int,
                           seedseq: np.random.SeedSequence, spec: ISSpec | None,
                           threads: int | None = None) -> SamplePairs:
    sizes = _chunk_sizes(n_outer, _CHUNK_OUTER)
    children = seedseq.spawn(len(sizes))
    jobs = list(zip(sizes, children))

    def run(job):
        size, child = job
        return model.simulate_pairs(size, n_inner, child, spec)

    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    return SamplePairs(
        x=np.concatenate([p.x for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        log_weight=np.concatenate([p.log_weight for p in parts]),
    )


def simulate_factors_chunked(model, n: int, seedseq: np.random.SeedSequence,
                             spec: ISSpec | None,
                             threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    sizes = _chunk_sizes(n, _CHUNK_OUTER)
    children = seedseq.spawn(len(sizes))
    jobs = list(zip(sizes, children))

    def run(job):
        size, child = job
        draws = model.simulate_factors(size, np.random.default_rng(child), spec)
        return draws.x, draws.log_weight

    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# --- experiment phases -------------------------------------------------------

_BACKTEST_SET_SPECS = {
    # per-model indicator regions over the factor coordinates
    "put": [[(0, "<", 0.40)], [(0, ">", 0.70)]],
    "options20": [
        [(i, ">", 0.20) for i in range(3)] + [(10 + i, "<", 0.80) for i in range(3)],
        [(i, "<", 0.80) for i in range(3)] + [(10 + i, ">", 0.20) for i in range(3)],
    ],
    "va-gmib": [[(0, ">", 0.70), (1, "<", 0.30)], [(0, "<", 0.30), (1, ">", 0.70)]],
}


def default_backtest_sets(model_id: str, test_x: np.ndarray):
    return quantile_sets(test_x, _BACKTEST_SET_SPECS[model_id])


def _trace_counts(n: int, points: int) -> list[int]:
    if points < 2 or n < 2:
        return [n]
    counts = np.unique(np.round(np.logspace(np.log10(min(100, n)), np.log10(n), points))
                       .astype(int))
    return [int(c) for c in counts if c >= 1]


def estimate_risk(losses: np.ndarray, log_weights: np.ndarray | None,
                  alpha_var: float, alpha_es: float,
                  trace_points: int) -> dict[str, RiskEstimate]:
    ratios = None if log_weights is None else np.exp(log_weights)
    counts = _trace_counts(losses.size, trace_points)
    return {
        "var": var_es_with_trace(losses, alpha_var, counts, ratios),
        "es": var_es_with_trace(losses, alpha_es, counts, ratios),
    }


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> RunResult:
    """Simulate, train, backtest and estimate; deterministic given the config."""
    model = build_model(config.model)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    profile = model.monotonicity_profile(seed=phase_seed(config.seed, "pilot"))
    is_spec = mean_shift(model.loading_matrix, profile, config.is_level)
    train_spec = is_spec if config.measure == "is" else None

    train_pairs = simulate_pairs_chunked(
        model, config.n_train_outer, config.n_train_inner,
        phase_seed(config.seed, "train"), train_spec, threads)
    val_pairs = simulate_pairs_chunked(
        model, config.n_validation, 1,
        phase_seed(config.seed, "validation"), train_spec, threads)
    test_pairs = simulate_pairs_chunked(
        model, config.n_test, 1,
        phase_seed(config.seed, "test"), train_spec, threads)
    timings["simulate"] = time.perf_counter() - t0

    sets = default_backtest_sets(config.model, test_pairs.x)
    epoch_callback = None
    if config.per_epoch_backtest:
        def epoch_callback(epoch, params):
            report = run_backtest(params, config.architecture, test_pairs.x,
                                  test_pairs.y, sets, config.backtest_multiplier)
            entry = {"a": report.residual_mean, "b": report.prediction_weighted}
            entry.update({label: stat for label, stat, _ in report.set_stats})
            return {key: (stat.value, stat.std_error) for key, stat in entry.items()}

    t0 = time.perf_counter()
    params, history = train(config.architecture, config.training,
                            train_pairs.x, train_pairs.y,
                            val_pairs.x, val_pairs.y, epoch_callback)
    timings["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    report = run_backtest(params, config.architecture, test_pairs.x, test_pairs.y,
                          sets, config.backtest_multiplier)
    timings["backtest"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    estimates: dict[str, dict[str, RiskEstimate]] = {}
    for measure in MEASURES:
        spec = is_spec if measure == "is" else None
        x, log_w = simulate_factors_chunked(
            model, config.n_estimate, phase_seed(config.seed, f"estimate_{measure}"),
            spec, threads)
        losses = forward(params, config.architecture, x, mode="infer")
        estimates[measure] = estimate_risk(
            losses, log_w if measure == "is" else None,
            config.alpha_var, config.alpha_es, config.trace_points)
    timings["estimate"] = time.perf_counter() - t0

    provenance = {"config_hash": config.config_hash(), "seed": config.seed,
                  "version": __version__}
    return RunResult(config=config, estimates=estimates, backtest=report,
                     history=history, params=params, timings=timings,
                     provenance=provenance)


def run_reference(model_id: str, alpha_var: float = 0.995, alpha_es: float = 0.99,
                  n_ref: int = 1_000_000, seed: int = 0) -> dict:
    """Reference risk figures per model; the VA returns published constants."""
    model = build_model(model_id)
    if model_id == "va-gmib":
        doc = dict(VAModel.reference())
        doc["note"] = "published comparison constants; ES anchors are not authoritative"
        return {"model": model_id, **doc}
    var_ref, es_ref = model.reference(alpha_var, alpha_es, n_ref, seed + 1)
    return {"model": model_id, "alpha_var": alpha_var, "alpha_es": alpha_es,
            "n_ref": n_ref, "var": var_ref, "es": es_ref}


# --- output emission ---------------------------------------------------------

def _estimate_summary(est: dict[str, RiskEstimate]) -> dict:
    return {
        "var": est["var"].var,
        "var_alpha": est["var"].alpha,
        "var_tail_index": est["var"].tail_index,
        "es": est["es"].es,
        "es_alpha": est["es"].alpha,
        "n": est["var"].n,
    }


def summary_dict(result: RunResult, include_timings: bool = True) -> dict:
    doc = {
        "model": result.config.model,
        "measure_trained": result.config.measure,
        "alpha_var": result.config.alpha_var,
        "alpha_es": result.config.alpha_es,
        "alpha_is": result.config.is_level,
        "estimates": {m: _estimate_summary(e) for m, e in result.estimates.items()},
        "backtest_passed": result.backtest.passed,
        "training": {
            "epochs_run": len(result.history.train_mse),
            "best_epoch": result.history.best_epoch,
            "final_train_mse": result.history.train_mse[-1],
            "final_val_mse": result.history.val_mse[-1],
        },
        "provenance": result.provenance,
    }
    if include_timings:
        doc["timings"] = result.timings
    return doc


def emit_outputs(result: RunResult, out_dir) -> dict[str, Path]:
    """Write summary.json, convergence.csv, history.csv, backtest.json, network.json."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {}

        paths["summary"] = out / "summary.json"
        with open(paths["summary"], "w") as fh:
            json.dump(summary_dict(result), fh, indent=2, sort_keys=True)

        paths["convergence"] = out / "convergence.csv"
        with open(paths["convergence"], "w") as fh:
            fh.write("sample_count,var,es,measure\n")
            for measure, est in result.estimates.items():
                var_trace = {n: v for n, v, _ in est["var"].trace}
                es_trace = {n: e for n, _, e in est["es"].trace}
                for n in sorted(var_trace):
                    fh.write(f"{n},{var_trace[n]!r},{es_trace[n]!r},{measure}\n")

        paths["history"] = out / "history.csv"
        with open(paths["history"], "w") as fh:
            fh.write("epoch,train_mse,val_mse\n")
            hist = result.history
            for i, (tr, va) in enumerate(zip(hist.train_mse, hist.val_mse), start=1):
                fh.write(f"{i},{tr!r},{va!r}\n")

        paths["backtest"] = out / "backtest.json"
        with open(paths["backtest"], "w") as fh:
            json.dump(result.backtest.to_dict(), fh, indent=2, sort_keys=True)

        paths["network"] = out / "network.json"
        with open(paths["network"], "w") as fh:
            json.dump(params_to_dict(result.params, result.config.architecture), fh)

        if result.config.per_epoch_backtest and result.history.extras:
            paths["backtest_trace"] = out / "backtest_trace.csv"
            with open(paths["backtest_trace"], "w") as fh:
                fh.write("epoch,statistic,stat,se\n")
                for epoch, extra in enumerate(result.history.extras, start=1):
                    for label, (value, se) in extra.items():
                        fh.write(f"{epoch},{label},{value!r},{se!r}\n")
        return paths
    except OSError as exc:
        raise OSError(f"failed writing outputs under {out}: {exc}") from exc

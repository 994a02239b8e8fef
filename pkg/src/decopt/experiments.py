"""Experiment sweeps: quantizer x seed grids, stepsize tuning, summaries."""

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, engine, quantizers, topology
from .errors import (
    AllDivergedError,
    BudgetExhaustedError,
    DecoptError,
    InvalidSpecError,
    NonFiniteError,
)


def log_grid(lo: float, hi: float, count: int):
    """Log-spaced grid from lo to hi inclusive."""
    if lo <= 0 or hi < lo or count < 1:
        raise InvalidSpecError(f"bad grid bounds ({lo}, {hi}, {count})")
    if count == 1:
        return (float(lo),)
    return tuple(float(v) for v in np.logspace(math.log10(lo), math.log10(hi), count))


@dataclass
class ExperimentSpec:
    """One sweep: a problem on a topology, a list of quantizers, seeds."""

    name: str
    graph: topology.Graph
    objective: object
    option: str
    quantizers: tuple
    stepsize_mode: str = "theoretical"  # theoretical | explicit | grid
    theta: float | None = None
    eta: float | None = None
    alpha: float | None = None
    theta_grid: tuple = ()
    eta_grid: tuple = ()
    iters: int = 10**4
    eps: float | None = None
    seeds: tuple = (0,)
    delta_sharing: str = engine.PER_NODE
    z_accumulation: str = engine.EDGE_ORDER
    track_lyapunov: bool = True

    def __post_init__(self):
        if not self.quantizers:
            raise InvalidSpecError("quantizer list is empty")
        if not self.seeds:
            raise InvalidSpecError("seed list is empty")
        if self.stepsize_mode not in ("theoretical", "explicit", "grid"):
            raise InvalidSpecError(f"bad stepsize_mode {self.stepsize_mode!r}")
        if self.stepsize_mode == "explicit" and self.theta is None:
            raise InvalidSpecError("explicit mode needs theta")
        if self.stepsize_mode == "grid" and not self.theta_grid:
            raise InvalidSpecError("grid mode needs theta_grid")


def _schedule_for(spec: ExperimentSpec, qspec, theta=None, eta=None):
    """Explicit schedule from spec fields (grid/explicit modes)."""
    d = spec.objective.dim
    w = quantizers.omega(qspec, d)
    alpha = spec.alpha if spec.alpha is not None else 1.0 / (w + 1.0)
    theta = theta if theta is not None else spec.theta
    eta = eta if eta is not None else spec.eta
    return engine.StepsizeSchedule(theta=theta, eta=eta, alpha=alpha, omega=w)


def _config_for(spec: ExperimentSpec, qspec, seed, stepsizes):
    return engine.RunConfig(
        option=spec.option,
        graph=spec.graph,
        quantizer=qspec,
        objective=spec.objective,
        stepsizes=stepsizes,
        iters=spec.iters,
        eps=spec.eps,
        seed=seed,
        delta_sharing=spec.delta_sharing,
        z_accumulation=spec.z_accumulation,
        track_lyapunov=spec.track_lyapunov,
    )


def _execute(config):
    """Run one cell; budget exhaustion keeps the partial trace, divergence keeps the error."""
    try:
        return engine.run(config), None
    except BudgetExhaustedError as exc:
        return exc.trace, None
    except (NonFiniteError, DecoptError) as exc:
        return None, exc


def iterations_to_eps(trace, eps) -> float:
    """First iteration index with max-node error <= eps, inf if never reached."""
    hits = np.nonzero(trace.max_err <= eps)[0]
    return float(trace.iters[hits[0]]) if hits.size else math.inf


@dataclass
class CellResult:
    quantizer: quantizers.QuantizerSpec
    seed: int
    trace: object
    error: Exception | None


@dataclass
class SummaryRow:
    quantizer: str
    omega: float
    iterations_to_eps: float  # median over seeds, inf when unreached
    bits_to_eps: float
    error_at_budget: float


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    cells: list = field(default_factory=list)
    summary: list = field(default_factory=list)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """One trace per (quantizer, seed); engine failures are recorded, not fatal."""
    result = ExperimentResult(spec=spec)
    for qspec in spec.quantizers:
        if spec.stepsize_mode == "theoretical":
            stepsizes = "theoretical"
        else:
            stepsizes = _schedule_for(spec, qspec)
        iters_hit, bits_hit, final_errs = [], [], []
        for seed in spec.seeds:
            config = _config_for(spec, qspec, seed, stepsizes)
            trace, err = _execute(config)
            result.cells.append(CellResult(qspec, seed, trace, err))
            if trace is None:
                continue
            final_errs.append(float(trace.max_err[-1]))
            if spec.eps is not None:
                t = iterations_to_eps(trace, spec.eps)
                iters_hit.append(t)
                per_iter = diagnostics.bits_per_iteration(config)
                bits_hit.append(t * per_iter if math.isfinite(t) else math.inf)
        result.summary.append(SummaryRow(
            quantizer=qspec.label(),
            omega=quantizers.omega(qspec, spec.objective.dim),
            iterations_to_eps=statistics.median(iters_hit) if iters_hit else math.inf,
            bits_to_eps=statistics.median(bits_hit) if bits_hit else math.inf,
            error_at_budget=statistics.median(final_errs) if final_errs else math.inf,
        ))
    return result


@dataclass
class TunedCell:
    quantizer: str
    theta: float
    eta: float | None
    schedule: engine.StepsizeSchedule
    metric: float
    grid: list  # (theta, eta, metric) per grid point


def tune(spec: ExperimentSpec, metric: str = "iterations") -> dict:
    """Grid-search stepsizes per quantizer cell.

    metric "iterations": median iterations to spec.eps (requires eps);
    metric "error": median max-node error at the budget.  Ties break
    toward larger theta.  Raises AllDivergedError if no grid point of any
    cell survives.
    """
    if spec.stepsize_mode != "grid":
        raise InvalidSpecError("tune needs a grid-mode spec")
    if metric not in ("iterations", "error"):
        raise InvalidSpecError(f"bad metric {metric!r}")
    if metric == "iterations" and spec.eps is None:
        raise InvalidSpecError("iterations metric needs a target eps")
    eta_grid = spec.eta_grid if spec.eta_grid else (spec.eta,)
    tuned = {}
    any_finite = False
    for qspec in spec.quantizers:
        evaluated = []
        for theta in spec.theta_grid:
            for eta in eta_grid:
                schedule = _schedule_for(spec, qspec, theta=theta, eta=eta)
                scores = []
                for seed in spec.seeds:
                    trace, err = _execute(_config_for(spec, qspec, seed, schedule))
                    if trace is None:
                        scores = None
                        break
                    if metric == "iterations":
                        scores.append(iterations_to_eps(trace, spec.eps))
                    else:
                        scores.append(float(trace.max_err[-1]))
                if scores is None:
                    evaluated.append((theta, eta, math.inf))
                else:
                    evaluated.append((theta, eta, statistics.median(scores)))
        finite = [e for e in evaluated if math.isfinite(e[2])]
        if not finite:
            tuned[qspec.label()] = None
            continue
        any_finite = True
        best = sorted(finite, key=lambda e: (e[2], -e[0]))[0]
        tuned[qspec.label()] = TunedCell(
            quantizer=qspec.label(),
            theta=best[0],
            eta=best[1],
            schedule=_schedule_for(spec, qspec, theta=best[0], eta=best[1]),
            metric=best[2],
            grid=evaluated,
        )
    if not any_finite:
        raise AllDivergedError("every grid point diverged or missed the target")
    return tuned


def write_summary_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("quantizer,omega,iterations_to_eps,bits_to_eps,error_at_budget\n")
        for row in result.summary:
            fh.write(f"{row.quantizer},{float(row.omega)!r},{float(row.iterations_to_eps)!r},"
                     f"{float(row.bits_to_eps)!r},{float(row.error_at_budget)!r}\n")

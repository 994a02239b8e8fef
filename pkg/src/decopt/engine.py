"""The quantized primal-dual iteration over a network.

One ``step`` runs, for every node: a primal update (one of four oracle
options), the quantized difference messages Delta_ij = Q(x_i - h_i) + h_i,
the reference update h_i <- h_i + alpha Q(x_i - h_i) with an independent
draw, and the dual update z_i <- z_i - theta * sum_j w_ij (Delta_ij -
Delta_ji) accumulated in the fixed global edge order.  Processing each
edge once and applying the two directed terms (exact IEEE negations of
each other) to both endpoints keeps the node sum of the dual variables
conserved; the per-step residual of that pairing is recorded on the
state and is exactly zero whenever weights are symmetric and both
endpoints use the same message pair.

Primal options:
  A  x_i <- gradient of the convex conjugate of f_i at z_i (dual-friendly)
  B  x_i <- x_i - eta (grad f_i(x_i) - z_i)
  C  x_i <- x_i - eta (stochastic grad - z_i)
  D  x_i <- x_i - eta (variance-reduced finite-sum estimate - z_i),
     with per-node anchor points refreshed with probability 1/m
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import diagnostics, quantizers, streams, topology
from .errors import (
    BudgetExhaustedError,
    InvalidSpecError,
    MissingMError,
    MissingSigmaError,
    NonFiniteError,
)

OPTIONS = ("A", "B", "C", "D")
PER_NODE = "per_node"
PER_EDGE = "per_edge"
EDGE_ORDER = "edge_order"
MATRIX = "matrix"

_GUARD = 1e100


@dataclass(frozen=True)
class StepsizeSchedule:
    """Dual stepsize theta, primal stepsize eta (None for option A),
    reference-tracking stepsize alpha, and the contraction factor the
    theory predicts for this configuration (None for ad-hoc stepsizes)."""

    theta: float
    eta: float | None
    alpha: float
    predicted_rate: float | None = None
    omega: float = 0.0


@dataclass
class NetworkState:
    """Per-node iterates as d-by-n columns, plus option-D anchor data."""

    x: np.ndarray
    z: np.ndarray
    h: np.ndarray
    k: int = 0
    anchors: np.ndarray | None = None
    anchor_grads: np.ndarray | None = None
    grad_calls: int = 0
    dual_residual: float = 0.0


@dataclass
class RunConfig:
    option: str
    graph: topology.Graph
    quantizer: quantizers.QuantizerSpec
    objective: object
    stepsizes: object = "theoretical"  # StepsizeSchedule or "theoretical"
    iters: int = 1000
    eps: float | None = None
    seed: int = 0
    delta_sharing: str = PER_NODE
    z_accumulation: str = EDGE_ORDER
    track_lyapunov: bool = True
    diverge_factor: float = 1e9  # abort when max_err exceeds this times the initial error

    def __post_init__(self):
        if self.option not in OPTIONS:
            raise InvalidSpecError(f"option must be one of {OPTIONS}, got {self.option!r}")
        if self.delta_sharing not in (PER_NODE, PER_EDGE):
            raise InvalidSpecError(f"bad delta_sharing {self.delta_sharing!r}")
        if self.z_accumulation not in (EDGE_ORDER, MATRIX):
            raise InvalidSpecError(f"bad z_accumulation {self.z_accumulation!r}")
        if self.graph.n != self.objective.n_nodes:
            raise InvalidSpecError(
                f"graph has {self.graph.n} nodes but objective has {self.objective.n_nodes}"
            )


def theoretical_stepsizes(option, profile, mu, L, omega, m=None,
                          sigma_sq=None, epsilon=None) -> StepsizeSchedule:
    """Stepsizes and contraction rates guaranteed by the convergence theory.

    alpha = 1/(omega+1) throughout.  theta is mu over (lambda_max + 12
    omega maxw) for option A and half that for B/C/D; eta is 1/L (B),
    the epsilon-dependent minimum (C), or 1/(6L) (D).
    """
    if mu <= 0 or L < mu:
        raise InvalidSpecError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    maxw = profile.max_edge_weight
    lam_max, lam_min = profile.lambda_max, profile.lambda_min_plus
    alpha = 1.0 / (omega + 1.0)
    penal = lam_max + 12.0 * omega * maxw
    if option == "A":
        theta = mu / penal
        rate = 1.0 / max(2.0 * (omega + 1.0), L * penal / (mu * lam_min))
        return StepsizeSchedule(theta, None, alpha, rate, omega)
    theta = mu / (2.0 * lam_max + 24.0 * omega * maxw)
    if option == "B":
        eta = 1.0 / L
        rate = 1.0 / max(2.0 * (omega + 1.0), 2.0 * L * penal / (mu * lam_min))
        return StepsizeSchedule(theta, eta, alpha, rate, omega)
    if option == "C":
        if sigma_sq is None:
            raise MissingSigmaError("option C schedule needs the gradient variance at the optimum")
        sigma = math.sqrt(sigma_sq)
        if sigma == 0.0:
            eta = 1.0 / (2.0 * L)
        else:
            if epsilon is None or epsilon <= 0.0:
                raise InvalidSpecError("option C schedule needs a target epsilon when sigma > 0")
            eta = min(
                1.0 / (2.0 * L),
                math.sqrt(epsilon) / (4.0 * sigma * math.sqrt(omega + 1.0)),
                epsilon * mu * lam_min / (16.0 * sigma_sq * penal),
            )
        rate = 1.0 / max(2.0 * (omega + 1.0), 2.0 * penal / (eta * mu * lam_min))
        return StepsizeSchedule(theta, eta, alpha, rate, omega)
    if option == "D":
        if m is None:
            raise MissingMError("option D schedule needs the per-node component count")
        eta = 1.0 / (6.0 * L)
        rate = 1.0 / max(2.0 * m, 2.0 * (omega + 1.0), 12.0 * L * penal / (mu * lam_min))
        return StepsizeSchedule(theta, eta, alpha, rate, omega)
    raise InvalidSpecError(f"unknown option {option!r}")


def compression_for_free_bound(profile, kappa: float) -> float:
    """Largest variance parameter that provably costs no extra iterations."""
    if kappa < 1.0:
        raise InvalidSpecError(f"condition number must be >= 1, got {kappa}")
    return min(profile.rho / profile.rho_inf, kappa * profile.rho)


@dataclass
class _Runtime:
    schedule: StepsizeSchedule
    profile: topology.SpectralProfile
    edges: tuple
    x_star: np.ndarray
    z_star: np.ndarray
    bits_per_iter: int
    directed_src: np.ndarray | None  # per_edge mode: source node per directed column
    incidence: np.ndarray | None  # weighted edge-to-node incidence, matrix z path


def prepare(config: RunConfig) -> _Runtime:
    """Resolve stepsizes and precompute everything a run reuses."""
    obj = config.objective
    d = obj.dim
    lap = topology.build_laplacian(config.graph)
    profile = topology.spectral_profile(lap)
    w = quantizers.omega(config.quantizer, d)
    if config.stepsizes == "theoretical":
        schedule = theoretical_stepsizes(
            config.option, profile, obj.mu, obj.L, w,
            m=obj.m, sigma_sq=obj.sigma_sq, epsilon=config.eps,
        )
    elif isinstance(config.stepsizes, StepsizeSchedule):
        schedule = config.stepsizes
        if schedule.omega != w:
            schedule = replace(schedule, omega=w)
        if config.option != "A" and schedule.eta is None:
            raise InvalidSpecError(f"option {config.option} needs a primal stepsize eta")
    else:
        raise InvalidSpecError(f"bad stepsizes {config.stepsizes!r}")
    if config.option == "D" and obj.m is None:
        raise MissingMError("option D needs a finite-sum objective")
    if config.option == "A":
        obj.dual_grad(0, np.zeros(d))  # fail fast when no conjugate exists
    directed_src = None
    if config.delta_sharing == PER_EDGE:
        directed_src = np.empty(2 * len(config.graph.edges), dtype=int)
        for e, (i, j, _) in enumerate(config.graph.edges):
            directed_src[2 * e] = i
            directed_src[2 * e + 1] = j
    incidence = None
    if config.z_accumulation == MATRIX and config.delta_sharing == PER_EDGE:
        incidence = np.zeros((len(config.graph.edges), config.graph.n))
        for e, (i, j, w) in enumerate(config.graph.edges):
            incidence[e, i] = w
            incidence[e, j] = -w
    x_star, z_star = obj.centralized_solution()
    return _Runtime(
        schedule=schedule,
        profile=profile,
        edges=config.graph.edges,
        x_star=x_star,
        z_star=z_star,
        bits_per_iter=diagnostics.bits_per_iteration(config),
        directed_src=directed_src,
        incidence=incidence,
    )


def init_state(config: RunConfig) -> NetworkState:
    """z = h = 0 (the zero dual sum is required); x at the objective default."""
    obj = config.objective
    x0 = obj.default_x0()
    state = NetworkState(
        x=x0.copy(),
        z=np.zeros_like(x0),
        h=np.zeros_like(x0),
    )
    if config.option == "D":
        state.anchors = x0.copy()
        state.anchor_grads = obj.grad_all(x0)
        state.grad_calls = int(np.sum(obj.m_per_node))
    return state


def _primal(state, config, runtime, rng):
    obj = config.objective
    eta = runtime.schedule.eta
    opt = config.option
    if opt == "A":
        x_new = obj.dual_grad_all(state.z)
        return x_new, None, None, state.grad_calls + obj.n_nodes
    if opt == "B":
        x_new = state.x - eta * (obj.grad_all(state.x) - state.z)
        calls = state.grad_calls + sum(obj.grad_cost(i) for i in range(obj.n_nodes))
        return x_new, None, None, calls
    if opt == "C":
        x_new = state.x - eta * (obj.stoch_grad_all(state.x, rng) - state.z)
        return x_new, None, None, state.grad_calls + obj.n_nodes
    # option D: bias-corrected component gradients around the anchors
    n = obj.n_nodes
    ms = obj.m_per_node
    if np.all(ms == ms[0]):
        picks = rng.integers(0, int(ms[0]), size=n)
    else:
        picks = np.array([int(rng.integers(0, int(ms[i]))) for i in range(n)])
    coins = rng.random(n)
    G = np.empty_like(state.x)
    calls = state.grad_calls
    for i in range(n):
        j = int(picks[i])
        G[:, i] = (
            obj.component_grad(i, j, state.x[:, i])
            - obj.component_grad(i, j, state.anchors[:, i])
            + state.anchor_grads[:, i]
        )
        calls += 2
    x_new = state.x - eta * (G - state.z)
    anchors = state.anchors.copy()
    anchor_grads = state.anchor_grads.copy()
    for i in range(n):
        if coins[i] < 1.0 / float(ms[i]):
            anchors[:, i] = state.x[:, i]
            anchor_grads[:, i] = obj.grad(i, state.x[:, i])
            calls += int(ms[i])
    return x_new, anchors, anchor_grads, calls


def step(state: NetworkState, config: RunConfig, runtime: _Runtime | None = None,
         seed: int | None = None) -> NetworkState:
    """One full iteration; returns a fresh state, the input is not mutated."""
    if runtime is None:
        runtime = prepare(config)
    if seed is None:
        seed = config.seed
    sched = runtime.schedule
    spec = config.quantizer
    k = state.k
    # one stream per iteration, consumed in fixed phase order: primal, delta, h
    needs_rng = config.option in ("C", "D") or spec.kind != quantizers.IDENTITY
    rng = streams.stream(seed, k) if needs_rng else None

    x_new, anchors, anchor_grads, calls = _primal(state, config, runtime, rng)
    if config.option != "D":
        anchors, anchor_grads = state.anchors, state.anchor_grads

    diff = x_new - state.h
    if config.delta_sharing == PER_NODE:
        delta = quantizers.quantize_columns(spec, diff, rng) + state.h
        delta_dir = None
    else:
        src = runtime.directed_src
        delta_dir = quantizers.quantize_columns(spec, diff[:, src], rng) + state.h[:, src]
        delta = None

    h_new = state.h + sched.alpha * quantizers.quantize_columns(spec, diff, rng)

    if config.z_accumulation == MATRIX:
        if delta is not None:
            z_new = state.z - sched.theta * (delta @ runtime.profile.laplacian)
        else:
            flows = delta_dir[:, 0::2] - delta_dir[:, 1::2]
            z_new = state.z - sched.theta * (flows @ runtime.incidence)
        residual = float(np.max(np.abs(z_new.sum(axis=1))))
    else:
        acc = np.zeros_like(state.z)
        res = np.zeros(state.z.shape[0])
        for e, (i, j, w) in enumerate(runtime.edges):
            if delta is not None:
                d_ij, d_ji = delta[:, i], delta[:, j]
            else:
                d_ij, d_ji = delta_dir[:, 2 * e], delta_dir[:, 2 * e + 1]
            t_ij = w * (d_ij - d_ji)
            t_ji = w * (d_ji - d_ij)
            acc[:, i] += t_ij
            acc[:, j] += t_ji
            res += t_ij
            res += t_ji
        z_new = state.z - sched.theta * acc
        residual = float(np.max(np.abs(res))) if res.size else 0.0

    for arr in (x_new, z_new):
        peak = float(np.max(np.abs(arr))) if arr.size else 0.0
        if not np.isfinite(peak) or peak > _GUARD:
            raise NonFiniteError(f"iterate magnitude {peak} at iteration {k}; stepsizes diverge")

    return NetworkState(
        x=x_new, z=z_new, h=h_new, k=k + 1,
        anchors=anchors, anchor_grads=anchor_grads,
        grad_calls=calls, dual_residual=residual,
    )


def _record(state, config, runtime):
    obj = config.objective
    diff = state.x - runtime.x_star[:, None]
    per_node = np.sum(diff * diff, axis=0)
    avg = state.x.mean(axis=1) - runtime.x_star
    lyap = math.nan
    if config.track_lyapunov:
        lyap = diagnostics.lyapunov(
            config.option, state, runtime.x_star, runtime.z_star,
            runtime.profile, runtime.schedule, obj,
        )
    return (
        state.k,
        float(per_node.max()),
        float(per_node.mean()),
        float(avg @ avg),
        lyap,
        state.k * runtime.bits_per_iter,
        state.grad_calls,
        state.dual_residual,
        float(np.max(np.abs(state.z.sum(axis=1)))),
        float(np.max(np.abs(state.z))) if state.z.size else 0.0,
    )


def run(config: RunConfig) -> "diagnostics.RunTrace":
    """Iterate until every node is within eps of the optimum, or the budget ends.

    Records one trace row per iteration (row 0 is the initial state).  With
    eps=None the full budget is executed; with a target eps the run raises
    BudgetExhaustedError (carrying the partial trace) if the budget ends first.
    """
    runtime = prepare(config)
    state = init_state(config)
    rows = [_record(state, config, runtime)]
    blowup = config.diverge_factor * max(rows[0][1], 1.0)
    converged = config.eps is not None and rows[-1][1] <= config.eps
    while not converged and state.k < config.iters:
        state = step(state, config, runtime=runtime)
        rows.append(_record(state, config, runtime))
        if rows[-1][1] > blowup:
            raise NonFiniteError(
                f"max-node error grew to {rows[-1][1]:.3g} at iteration {state.k}; "
                "stepsizes diverge"
            )
        if config.eps is not None and rows[-1][1] <= config.eps:
            converged = True
    cols = list(zip(*rows))
    trace = diagnostics.RunTrace(
        iters=np.array(cols[0], dtype=int),
        max_err=np.array(cols[1]),
        mean_err=np.array(cols[2]),
        avg_iterate_err=np.array(cols[3]),
        lyapunov=np.array(cols[4]),
        bits_cum=np.array(cols[5], dtype=np.int64),
        grad_calls_cum=np.array(cols[6], dtype=np.int64),
        dual_residual=np.array(cols[7]),
        dual_sum=np.array(cols[8]),
        z_absmax=np.array(cols[9]),
        converged=bool(converged),
        iterations=state.k,
        schedule=runtime.schedule,
        final_state=state,
    )
    if config.eps is not None and not converged:
        raise BudgetExhaustedError(
            f"target {config.eps} not reached within {config.iters} iterations", trace=trace
        )
    return trace

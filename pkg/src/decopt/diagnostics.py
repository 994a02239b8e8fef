"""Lyapunov values, rate predictions, communication accounting, trace CSV.

The Lyapunov function is the composite distance the convergence theory
contracts: the dual distance in the W-pseudo-inverse seminorm, plus (for
the primal options) a scaled primal distance, plus a scaled reference
(h) distance whenever quantization is active, plus (option D) the
Bregman divergences of the anchor points.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import quantizers, topology

CSV_COLUMNS = ("iter", "max_err", "mean_err", "avg_iterate_err",
               "lyapunov", "bits_cum", "grad_calls_cum")


@dataclass
class RunTrace:
    """Per-iteration diagnostics of one run; row 0 is the initial state."""

    iters: np.ndarray
    max_err: np.ndarray
    mean_err: np.ndarray
    avg_iterate_err: np.ndarray
    lyapunov: np.ndarray
    bits_cum: np.ndarray
    grad_calls_cum: np.ndarray
    dual_residual: np.ndarray
    dual_sum: np.ndarray
    z_absmax: np.ndarray
    converged: bool
    iterations: int
    schedule: object
    final_state: object

    def __len__(self):
        return len(self.iters)


def write_trace_csv(trace: RunTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in zip(trace.iters, trace.max_err, trace.mean_err,
                       trace.avg_iterate_err, trace.lyapunov,
                       trace.bits_cum, trace.grad_calls_cum):
            k, me, mne, avg, ly, bits, calls = row
            fh.write(f"{int(k)},{float(me)!r},{float(mne)!r},{float(avg)!r},"
                     f"{float(ly)!r},{int(bits)},{int(calls)}\n")


def lyapunov(option, state, x_star, z_star, profile, schedule, problem) -> float:
    """Composite contraction quantity for the given option at this state."""
    x_star_col = np.asarray(x_star, float)[:, None]
    val = topology.seminorm_sq(state.z - z_star, profile.pseudo_inverse)
    if schedule.omega > 0.0:
        coeff = 8.0 * schedule.theta**2 * schedule.omega * profile.max_edge_weight / schedule.alpha
        hd = state.h - x_star_col
        val += coeff * float(np.sum(hd * hd))
    if option in ("B", "C", "D"):
        xd = state.x - x_star_col
        coeff = (1.0 - schedule.eta * problem.mu / 2.0) * schedule.theta / schedule.eta
        val += coeff * float(np.sum(xd * xd))
    if option == "D":
        breg = sum(
            problem.bregman(i, state.anchors[:, i], x_star)
            for i in range(problem.n_nodes)
        )
        val += 8.0 * problem.m * problem.L * schedule.eta * schedule.theta * breg
    return float(val)


def error_conversion_factor(option, schedule, mu, profile) -> float:
    """Factor c with max-node error <= c * Psi along a run.

    Option A lacks a primal term, so the dual seminorm is converted via
    the 1/mu Lipschitz constant of the conjugate gradient; the bound then
    applies to the iterate one step later (predicted_iterations adds it).
    """
    if option == "A":
        return profile.lambda_max / mu**2
    return schedule.eta / ((1.0 - schedule.eta * mu / 2.0) * schedule.theta)


def predicted_iterations(schedule, psi0, epsilon, option, n=None, error_factor=1.0) -> int:
    """Iterations the contraction bound needs to force the error below epsilon.

    Options A/B/D: smallest T with (1 - rate)^T * error_factor * psi0 <=
    epsilon (option A pays one extra step for the dual-to-primal lag).
    Option C uses the composite bound (1/rate) * log(4 eta psi0 / (n theta
    epsilon)) that matches the epsilon-dependent stepsize choice.
    """
    rate = schedule.predicted_rate
    if rate is None or not (0.0 < rate < 1.0):
        raise ValueError(f"schedule has no usable predicted rate: {rate}")
    if psi0 <= 0.0:
        return 0
    if option == "C":
        if n is None:
            raise ValueError("option C prediction needs the node count")
        arg = 4.0 * schedule.eta * psi0 / (n * schedule.theta * epsilon)
        if arg <= 1.0:
            return 0
        return int(math.ceil(math.log(arg) / rate))
    target = epsilon / (error_factor * psi0)
    if target >= 1.0:
        return 0
    steps = int(math.ceil(math.log(target) / math.log1p(-rate)))
    return steps + 1 if option == "A" else steps


def bits_per_iteration(config) -> int:
    """Transmitted bits per iteration: two quantized vectors per directed edge."""
    per_message = quantizers.encoded_bits(config.quantizer, config.objective.dim)
    directed = 2 * len(config.graph.edges)
    return 2 * directed * per_message

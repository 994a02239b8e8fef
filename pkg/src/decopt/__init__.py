"""Decentralized optimization with compressed communication.

A desk-scale simulator for the linearly convergent quantized primal-dual
iteration: spectral graph machinery, unbiased compression operators,
node-local objectives with four oracle surfaces, the network state
machine with theoretical stepsize schedules, Lyapunov diagnostics, and
an experiment harness with a CLI.
"""

__version__ = "0.1.0"

from .diagnostics import (
    RunTrace,
    bits_per_iteration,
    error_conversion_factor,
    lyapunov,
    predicted_iterations,
    write_trace_csv,
)
from .engine import (
    NetworkState,
    RunConfig,
    StepsizeSchedule,
    compression_for_free_bound,
    init_state,
    run,
    step,
    theoretical_stepsizes,
)
from .objectives import ConsensusQuadratic, LeastSquaresObjective, LogisticObjective
from .quantizers import QuantizerSpec, encoded_bits, omega, parse_quantizer, quantize, quantize_columns
from .topology import (
    Graph,
    SpectralProfile,
    build_laplacian,
    jacobi_eigh,
    make_complete,
    make_k_regular,
    make_ring,
    make_star,
    read_graph_file,
    seminorm_sq,
    spectral_profile,
)

__all__ = [
    "ConsensusQuadratic",
    "Graph",
    "LeastSquaresObjective",
    "LogisticObjective",
    "NetworkState",
    "QuantizerSpec",
    "RunConfig",
    "RunTrace",
    "SpectralProfile",
    "StepsizeSchedule",
    "bits_per_iteration",
    "build_laplacian",
    "compression_for_free_bound",
    "encoded_bits",
    "error_conversion_factor",
    "init_state",
    "jacobi_eigh",
    "lyapunov",
    "make_complete",
    "make_k_regular",
    "make_ring",
    "make_star",
    "omega",
    "parse_quantizer",
    "predicted_iterations",
    "quantize",
    "quantize_columns",
    "read_graph_file",
    "run",
    "seminorm_sq",
    "spectral_profile",
    "step",
    "theoretical_stepsizes",
    "write_trace_csv",
]

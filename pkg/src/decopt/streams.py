"""Counter-based random streams for reproducible simulation.

Every random draw of an iteration comes from a Philox generator whose
key is a hash of (global seed, iteration); the engine consumes it in a
fixed phase order (primal sampling, then the message quantization block,
then the reference-update block), with per-node draws occupying one
column each of a block draw.  Streams for distinct key tuples are
statistically independent, the simulation is reproducible regardless of
the order nodes are processed in, and runs sharing a seed consume
identical draws in the phases they have in common.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix_key(*parts: int) -> int:
    """Collapse a tuple of integers into a well-mixed 64-bit key."""
    h = 0x8BADF00D5EEDC0DE
    for p in parts:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


def stream(seed: int, *key_parts: int) -> np.random.Generator:
    """Independent generator for the given (seed, *key_parts) tuple."""
    return np.random.Generator(np.random.Philox(key=mix_key(seed, *key_parts)))

"""Unbiased randomized compression operators and their cost models.

Every operator Q satisfies E[Q(x)] = x and E||Q(x) - x||^2 <= omega ||x||^2
for the variance parameter returned by ``omega``.  Supported kinds:

- identity: no compression, omega = 0.
- rand_k:   keep k uniformly chosen coordinates, scale them by d/k;
            omega = d/k - 1.
- dither:   random rounding of |x|/||x|| onto s levels;
            omega = min(d/s^2, sqrt(d)/s).

Bits are accounted, not serialized; ``encoded_bits`` is the per-message
cost model (the dithering figure is the trivial d*kappa + b upper bound).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError

IDENTITY = "identity"
RAND_K = "rand_k"
DITHER = "dither"


@dataclass(frozen=True)
class QuantizerSpec:
    kind: str
    k: int | None = None
    s: int | None = None
    float_bits: int = 32

    def __post_init__(self):
        if self.kind not in (IDENTITY, RAND_K, DITHER):
            raise InvalidSpecError(f"unknown quantizer kind {self.kind!r}")
        if self.kind == RAND_K and (self.k is None or self.k < 1):
            raise InvalidSpecError(f"rand_k needs k >= 1, got {self.k}")
        if self.kind == DITHER and (self.s is None or self.s < 1):
            raise InvalidSpecError(f"dither needs s >= 1 levels, got {self.s}")
        if self.float_bits < 1:
            raise InvalidSpecError(f"float_bits must be positive, got {self.float_bits}")

    def label(self) -> str:
        if self.kind == IDENTITY:
            return "identity"
        if self.kind == RAND_K:
            return f"rand:{self.k}"
        return f"dith:{self.s}"


def parse_quantizer(text: str, float_bits: int = 32) -> QuantizerSpec:
    """Parse CLI syntax: "identity", "rand:50", or "dith:3"."""
    text = text.strip()
    if text == "identity":
        return QuantizerSpec(kind=IDENTITY, float_bits=float_bits)
    if ":" in text:
        head, _, tail = text.partition(":")
        try:
            value = int(tail)
        except ValueError as exc:
            raise InvalidSpecError(f"bad quantizer parameter in {text!r}") from exc
        if head == "rand":
            return QuantizerSpec(kind=RAND_K, k=value, float_bits=float_bits)
        if head == "dith":
            return QuantizerSpec(kind=DITHER, s=value, float_bits=float_bits)
    raise InvalidSpecError(f"cannot parse quantizer {text!r}")


def omega(spec: QuantizerSpec, d: int) -> float:
    """Variance parameter of the operator in dimension d."""
    if d < 1:
        raise InvalidSpecError(f"dimension must be >= 1, got {d}")
    if spec.kind == IDENTITY:
        return 0.0
    if spec.kind == RAND_K:
        if spec.k > d:
            raise InvalidSpecError(f"rand_k with k={spec.k} > d={d}")
        return d / spec.k - 1.0
    return min(d / spec.s**2, math.sqrt(d) / spec.s)


def encoded_bits(spec: QuantizerSpec, d: int) -> int:
    """Bits needed to encode one quantized d-vector."""
    if d < 1:
        raise InvalidSpecError(f"dimension must be >= 1, got {d}")
    b = spec.float_bits
    if spec.kind == IDENTITY:
        return d * b
    if spec.kind == RAND_K:
        if spec.k > d:
            raise InvalidSpecError(f"rand_k with k={spec.k} > d={d}")
        return spec.k * b + spec.k * math.ceil(math.log2(d)) if d > 1 else spec.k * b
    # dither levels 0..s plus one sign bit per coordinate, plus the norm scalar
    kappa = math.ceil(math.log2(spec.s + 1)) + 1
    return d * kappa + b


def _rand_k_select(d: int, k: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform k-subsets per column via partial Fisher-Yates, columns in lockstep."""
    idx = np.tile(np.arange(d)[:, None], (1, cols))
    col = np.arange(cols)
    for t in range(k):
        j = rng.integers(t, d, size=cols)
        picked = idx[j, col]
        idx[j, col] = idx[t, col]
        idx[t, col] = picked
    return idx[:k, :]


def quantize_columns(spec: QuantizerSpec, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Apply the operator independently to every column of a d-by-m matrix.

    Column draws come from disjoint portions of ``rng``'s stream, so they
    are independent; the identity kind consumes no randomness.
    """
    X = np.asarray(X, dtype=float)
    d, cols = X.shape
    if spec.kind == IDENTITY:
        return X.copy()
    if spec.kind == RAND_K:
        if spec.k > d:
            raise InvalidSpecError(f"rand_k with k={spec.k} > d={d}")
        out = np.zeros_like(X)
        sel = _rand_k_select(d, spec.k, cols, rng)
        col = np.arange(cols)
        scale = d / spec.k
        for t in range(spec.k):
            out[sel[t], col] = scale * X[sel[t], col]
        return out
    # dithering: sign(x) * ||x|| * floor(s|x|/||x|| + xi) / s, computed in
    # place on the xi buffer to keep large temporaries to a minimum
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    safe = np.where(norms > 0.0, norms, 1.0)
    out = rng.random(X.shape)
    scaled = np.abs(X)
    scaled *= spec.s / safe
    out += scaled
    np.floor(out, out=out)
    out *= safe / spec.s
    np.copysign(out, X, out=out)
    out[:, norms == 0.0] = 0.0
    return out


def quantize(spec: QuantizerSpec, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Apply the operator to a single d-vector."""
    x = np.asarray(x, dtype=float)
    return quantize_columns(spec, x[:, None], rng)[:, 0]

"""Element-wise uniform quantization of complex CSI values.

Real and imaginary parts are clipped to ``[-A, A]`` independently and mapped
to the nearest of ``2**B`` midrise levels ``-A + (m + 1/2) * 2A / 2**B``.
A complex scalar therefore costs ``2B`` bits.

The ``identity`` family is the infinite-resolution limit: it carries the raw
IEEE-754 double of each real dimension as a 64-bit codeword. It is used to
model a noiseless initialization phase and is never the default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

__all__ = [
    "QuantizerSpec",
    "QuantizedValue",
    "quantize",
    "dequantize",
    "fit_range",
    "loading_factor",
    "RANGE_FLOOR",
]

MIN_BITS = 1
MAX_BITS = 24
IDENTITY_BITS = 64
RANGE_FLOOR = 1e-6
MIN_FIT_SAMPLES = 100


@dataclass(frozen=True)
class QuantizerSpec:
    """Bits per real dimension, clip range and family.

    ``range`` may be an array for a batch of independent sessions; it must
    broadcast against the values being quantized.
    """

    bits: int
    range: float | np.ndarray = 1.0
    family: str = "midrise"

    def __post_init__(self):
        if self.family == "identity":
            object.__setattr__(self, "bits", IDENTITY_BITS)
            return
        if self.family != "midrise":
            raise ContractViolation(f"unknown quantizer family {self.family!r}")
        if int(self.bits) != self.bits or not MIN_BITS <= self.bits <= MAX_BITS:
            raise ContractViolation(f"bits must be an integer in [{MIN_BITS}, {MAX_BITS}], got {self.bits}")
        rng = np.asarray(self.range, dtype=float)
        if not np.all(np.isfinite(rng)) or np.any(rng <= 0):
            raise ContractViolation(f"range must be positive and finite, got {self.range}")
        object.__setattr__(self, "bits", int(self.bits))
        object.__setattr__(self, "range", float(rng) if rng.ndim == 0 else rng)

    @classmethod
    def lossless(cls):
        return cls(IDENTITY_BITS, 1.0, "identity")

    @property
    def levels(self):
        return 2**self.bits

    @property
    def step(self):
        """Cell width ``2A / 2**B``."""
        return 2.0 * np.asarray(self.range) / self.levels

    @property
    def bits_per_scalar(self):
        return 2 * self.bits

    def level_values(self):
        """All reconstruction levels of one real dimension (scalar range only)."""
        if self.family != "midrise" or np.ndim(self.range) != 0:
            raise ContractViolation("level_values needs a scalar-range midrise quantizer")
        m = np.arange(self.levels)
        return -self.range + (m + 0.5) * self.step


@dataclass(frozen=True)
class QuantizedValue:
    """Codeword indices of complex values, one (real, imag) pair per scalar."""

    real_index: np.ndarray
    imag_index: np.ndarray
    spec: QuantizerSpec

    @property
    def n_scalars(self):
        return int(np.size(self.real_index))

    @property
    def bit_cost(self):
        return self.spec.bits_per_scalar * self.n_scalars

    def pack(self):
        """Indices as ``B``-bit little-endian fields, real then imaginary per scalar.

        Returns the payload as a Python int together with its bit length.
        """
        b = self.spec.bits
        word, shift = 0, 0
        for re, im in zip(np.ravel(self.real_index), np.ravel(self.imag_index)):
            word |= int(re) << shift
            word |= int(im) << (shift + b)
            shift += 2 * b
        return word, shift


def _index_axis(x, spec):
    a = np.asarray(spec.range, dtype=float)
    d = spec.step
    clipped = np.clip(x, -a, a)
    # ceil(.) - 1 sends a value sitting exactly on a cell boundary to the lower cell.
    m = np.ceil((clipped + a) / d) - 1.0
    return np.clip(m, 0, spec.levels - 1).astype(np.int64)


def quantize(z, spec):
    """Quantize complex value(s) ``z``; returns a :class:`QuantizedValue`."""
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("cannot quantize non-finite values")
    if spec.family == "identity":
        re = np.ascontiguousarray(z.real, dtype=np.float64).view(np.uint64)
        im = np.ascontiguousarray(z.imag, dtype=np.float64).view(np.uint64)
        return QuantizedValue(re.copy(), im.copy(), spec)
    return QuantizedValue(_index_axis(z.real, spec), _index_axis(z.imag, spec), spec)


def dequantize(q, spec=None):
    """Cell-centre reconstruction of a :class:`QuantizedValue`."""
    spec = q.spec if spec is None else spec
    if spec.family == "identity":
        re = np.asarray(q.real_index, dtype=np.uint64).view(np.float64)
        im = np.asarray(q.imag_index, dtype=np.uint64).view(np.float64)
        out = re + 1j * im
        return complex(out) if out.ndim == 0 else out
    ri = np.asarray(q.real_index)
    ii = np.asarray(q.imag_index)
    if np.any(ri < 0) or np.any(ii < 0) or np.any(ri >= spec.levels) or np.any(ii >= spec.levels):
        raise ContractViolation(f"quantizer index out of range [0, {spec.levels - 1}]")
    a = np.asarray(spec.range, dtype=float)
    d = spec.step
    out = (-a + (ri + 0.5) * d) + 1j * (-a + (ii + 0.5) * d)
    return complex(out) if np.ndim(out) == 0 else out


def fit_range(samples, kappa=3.0):
    """Clip range ``kappa * std`` of the pooled real and imaginary parts.

    Needs at least 100 samples. Degenerate (all-zero) input returns the
    floor ``RANGE_FLOOR``.
    """
    z = np.asarray(samples, dtype=complex).reshape(-1)
    if z.size < MIN_FIT_SAMPLES:
        raise ContractViolation(f"fit_range needs at least {MIN_FIT_SAMPLES} samples, got {z.size}")
    if not kappa > 0:
        raise ContractViolation(f"kappa must be positive, got {kappa}")
    if not np.all(np.isfinite(z)):
        raise ValueError("fit_range samples must be finite")
    pooled = np.concatenate([z.real, z.imag])
    return max(kappa * float(np.std(pooled)), RANGE_FLOOR)


def loading_factor(bits, kappa=3.0):
    """Range multiplier used when fitting a ``bits``-bit quantizer.

    ``kappa`` for coarse quantizers. Beyond about 6 bits the clipping
    tail at ``kappa`` standard deviations dominates the granular error, so the
    factor grows as ``sqrt(2 B ln 2)``, which keeps the Gaussian overload
    probability near the inverse of the level count.
    """
    return max(float(kappa), math.sqrt(2.0 * bits * math.log(2.0)))

"""In-place fast Walsh-Hadamard transform and its verification toolkit.

The package supports two scalar kinds: int64 signals are transformed with
exact integer arithmetic (the primary test vehicle -- equality-based
checks need no tolerances), float64 signals serve the noise tooling.
``wht_bruteforce`` evaluates the defining double sum directly and is the
independent oracle every fast path is checked against.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bits import is_power_of_two, sign_array
from .errors import (
    BadArguments,
    InexactDivision,
    OracleTooLarge,
    OverflowBoundError,
)

# Brute force costs O(4**n); anything bigger than this is almost certainly
# a mistake rather than a verification run.
ORACLE_LIMIT_DEFAULT = 14

_INT64_LIMIT = 1 << 63


class Domain(enum.Enum):
    TIME = "time"
    WALSH = "walsh"


@dataclass
class Signal:
    """A 1-D array of 2**n samples tagged with its current domain.

    dtype must be int64 (exact) or float64. A signal keeps one uniform
    scalar kind; mixing is not supported.
    """

    data: np.ndarray
    domain: Domain = Domain.TIME

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 1:
            raise BadArguments("signal data must be one-dimensional")
        if not is_power_of_two(arr.shape[0]):
            raise BadArguments(
                f"signal length {arr.shape[0]} is not a power of two"
            )
        if arr.dtype not in (np.dtype(np.int64), np.dtype(np.float64)):
            raise BadArguments(
                f"unsupported dtype {arr.dtype}; use int64 or float64"
            )
        # The in-place kernel works on reshaped views, which need
        # contiguous storage.
        self.data = np.ascontiguousarray(arr)

    @property
    def log2_dim(self) -> int:
        return int(self.data.shape[0]).bit_length() - 1

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    @property
    def is_exact(self) -> bool:
        return self.data.dtype == np.int64

    def copy(self) -> "Signal":
        return Signal(self.data.copy(), self.domain)


def check_magnitude_bound(data: np.ndarray, log2_dim: int) -> None:
    """Enforce M * 2**n < 2**63 for int64 data (M = max absolute value).

    Checked once at entry: every intermediate of an n-stage transform is
    bounded by M * 2**n, so this single test makes the whole run
    overflow-free without per-addition checks.
    """
    if data.dtype != np.int64 or data.size == 0:
        return
    magnitude = max(int(data.max()), -int(data.min()))
    if magnitude << log2_dim >= _INT64_LIMIT:
        raise OverflowBoundError(
            f"max |x| = {magnitude} with n = {log2_dim} can overflow int64; "
            f"need |x| * 2**n < 2**63"
        )


def fwht_array(buf: np.ndarray) -> int:
    """Transform ``buf`` (length 2**n, contiguous) in place.

    Stage k pairs elements at stride 2**k and replaces (a, b) with
    (a + b, a - b). Returns the number of butterflies executed, which is
    always n * 2**(n-1).
    """
    if not buf.flags.c_contiguous:
        raise BadArguments("in-place transform needs a contiguous buffer")
    n = int(buf.shape[0]).bit_length() - 1
    butterflies = 0
    for k in range(n):
        stride = 1 << k
        pairs = buf.reshape(-1, 2, stride)
        lo = pairs[:, 0, :]
        hi = pairs[:, 1, :]
        diff = lo - hi
        lo += hi
        hi[...] = diff
        butterflies += diff.size
    return butterflies


def fwht_inplace(sig: Signal) -> Signal:
    """Fast in-place WHT; flips the domain tag and returns its argument."""
    check_magnitude_bound(sig.data, sig.log2_dim)
    fwht_array(sig.data)
    sig.domain = Domain.WALSH if sig.domain == Domain.TIME else Domain.TIME
    return sig


def wht_bruteforce(sig: Signal, limit: int = ORACLE_LIMIT_DEFAULT) -> Signal:
    """Reference transform by the defining double sum; input unchanged.

    y_i = sum_j (-1)**<i,j> x_j where <i,j> is the parity of popcount(i & j).
    Costs O(4**n); refuses to run above ``limit``.
    """
    n = sig.log2_dim
    if n > limit:
        raise OracleTooLarge(f"n = {n} exceeds the oracle limit {limit}")
    check_magnitude_bound(sig.data, n)
    x = sig.data
    out = np.empty_like(x)
    indices = np.arange(1 << n, dtype=np.int64)
    for i in range(1 << n):
        signs = sign_array(np.bitwise_and(np.int64(i), indices))
        out[i] = signs @ x
    return Signal(out, Domain.WALSH if sig.domain == Domain.TIME else Domain.TIME)


def inverse_wht_inplace(sig: Signal) -> Signal:
    """Inverse transform in place: forward WHT followed by division by 2**n.

    int64 signals must produce exactly divisible intermediates; otherwise
    the buffer is restored and InexactDivision raised. float64 scaling by
    2**-n is exact (power of two).
    """
    if sig.domain != Domain.WALSH:
        raise BadArguments("inverse transform expects a Walsh-domain signal")
    n = sig.log2_dim
    dim = 1 << n
    check_magnitude_bound(sig.data, n)
    fwht_array(sig.data)
    if sig.is_exact:
        if np.any(sig.data % dim != 0):
            # Undo: the kernel is self-inverse up to 2**n, and that factor
            # divides exactly, so the original buffer is recoverable.
            fwht_array(sig.data)
            sig.data //= dim
            raise InexactDivision(
                f"coefficients are not all divisible by 2**{n}"
            )
        sig.data //= dim
    else:
        sig.data *= 2.0 ** -n
    sig.domain = Domain.TIME
    return sig


def parseval_energy(sig: Signal):
    """Sum of squared components.

    int64 signals accumulate in arbitrary-precision Python ints, so the
    result is exact even when it exceeds 2**63. Returns int for exact
    signals, float otherwise.
    """
    if sig.is_exact:
        return sum(v * v for v in sig.data.tolist())
    return float(np.dot(sig.data, sig.data))

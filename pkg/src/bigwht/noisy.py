"""Noisy sparse test signals, SNR accounting, and threshold extraction.

Signals are constructed in the Walsh domain (planted coefficients at
known indices) and inverse-transformed, so the ground truth for
extraction tests is exact by construction. Additive time-domain noise of
variance sigma**2 turns into approximately i.i.d. Walsh coefficients of
variance 2**n * sigma**2 -- no Gaussian assumption needed, which is why
Uniform and Rademacher kinds are first-class here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import Domain, Signal, check_magnitude_bound, fwht_array, \
    inverse_wht_inplace, parseval_energy
from .dataset import DatasetFile
from .errors import BadArguments, BadSpec


class NoiseKind(enum.Enum):
    NONE = "none"
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


@dataclass(frozen=True)
class NoisySignalSpec:
    """Plan for a sparse signal: planted Walsh coefficients plus noise.

    support maps distinct indices below 2**log2_dim to amplitudes. sigma
    is the per-sample standard deviation of the time-domain noise.
    """

    log2_dim: int
    support: tuple[tuple[int, float], ...]
    noise_kind: NoiseKind = NoiseKind.NONE
    sigma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.log2_dim < 0:
            raise BadSpec(f"log2_dim must be >= 0, got {self.log2_dim}")
        dim = 1 << self.log2_dim
        if len(self.support) > dim:
            raise BadSpec("support larger than the signal dimension")
        indices = [i for i, _ in self.support]
        if len(set(indices)) != len(indices):
            raise BadSpec("support indices must be distinct")
        if any(i < 0 or i >= dim for i in indices):
            raise BadSpec(f"support indices must lie in [0, {dim})")
        for _, amp in self.support:
            if not isinstance(amp, (int, float)) or not math.isfinite(amp):
                raise BadSpec(f"amplitude {amp!r} is not a finite number")
        if self.sigma < 0:
            raise BadSpec(f"sigma must be >= 0, got {self.sigma}")
        if not isinstance(self.noise_kind, NoiseKind):
            raise BadSpec(f"unknown noise kind {self.noise_kind!r}")


@dataclass
class SnrReport:
    snr_linear: float
    snr_db: float
    signal_energy: float
    noise_walsh_variance: float
    significance_threshold_db: float
    significance_threshold_db_base2: float
    infinite: bool = False


def _exact_support(spec: NoisySignalSpec) -> bool:
    dim = 1 << spec.log2_dim
    for _, amp in spec.support:
        if isinstance(amp, float) and not amp.is_integer():
            return False
        if int(amp) % dim:
            return False
    return True


def gen(spec: NoisySignalSpec) -> tuple[Signal, Signal]:
    """Build (clean, noisy) time-domain signals from the spec.

    The clean signal's Walsh coefficients equal the planted amplitudes
    exactly. Amplitudes that are integer multiples of 2**n take the exact
    int64 path; anything else (and Uniform/Gaussian noise) uses float64.
    Deterministic under the spec's seed.
    """
    spec.validate()
    dim = 1 << spec.log2_dim
    exact = _exact_support(spec)
    walsh = np.zeros(dim, dtype=np.int64 if exact else np.float64)
    for idx, amp in spec.support:
        walsh[idx] = int(amp) if exact else float(amp)
    clean = inverse_wht_inplace(Signal(walsh, Domain.WALSH))

    rng = np.random.default_rng(spec.seed)
    kind = spec.noise_kind
    if kind == NoiseKind.NONE or spec.sigma == 0:
        noisy = clean.copy()
        return clean, noisy
    if kind == NoiseKind.RADEMACHER:
        signs = rng.integers(0, 2, dim) * 2 - 1
        if clean.is_exact and float(spec.sigma).is_integer():
            noise = signs * np.int64(int(spec.sigma))
            data = clean.data + noise
            check_magnitude_bound(data, spec.log2_dim)
            return clean, Signal(data, Domain.TIME)
        noise = signs * float(spec.sigma)
    elif kind == NoiseKind.UNIFORM:
        half_width = spec.sigma * math.sqrt(3.0)  # variance sigma**2
        noise = rng.uniform(-half_width, half_width, dim)
    else:
        noise = rng.normal(0.0, spec.sigma, dim)
    return clean, Signal(clean.data.astype(np.float64) + noise, Domain.TIME)


def snr(sig: Signal, sigma: float) -> SnrReport:
    """SNR = |x^|**2 / (2**n * sigma'**2) with sigma'**2 = 2**n * sigma**2.

    Accepts the signal in either domain; the Walsh energy of a time-domain
    signal is 2**n times its time-domain energy (Parseval). sigma = 0 is
    reported as infinite SNR rather than raising.
    """
    if sigma < 0:
        raise BadArguments(f"sigma must be >= 0, got {sigma}")
    n = sig.log2_dim
    dim = 1 << n
    energy = parseval_energy(sig)
    if sig.domain == Domain.TIME:
        energy = energy * dim
    energy = float(energy)
    thr_e = _threshold_db(n, 8.0 * math.log(2.0))
    thr_2 = _threshold_db(n, 8.0)
    noise_var = dim * sigma * sigma
    if sigma == 0:
        return SnrReport(
            snr_linear=math.inf,
            snr_db=math.inf,
            signal_energy=energy,
            noise_walsh_variance=0.0,
            significance_threshold_db=thr_e,
            significance_threshold_db_base2=thr_2,
            infinite=True,
        )
    linear = energy / (dim * noise_var)
    return SnrReport(
        snr_linear=linear,
        snr_db=-math.inf if linear == 0 else 10.0 * math.log10(linear),
        signal_energy=energy,
        noise_walsh_variance=noise_var,
        significance_threshold_db=thr_e,
        significance_threshold_db_base2=thr_2,
    )


def _threshold_db(n: int, numerator: float) -> float:
    return 10.0 * math.log10(numerator / (1 << n))


def significance_threshold_db(n: int, log_base: str = "e") -> float:
    """Cryptographically significant SNR floor: 10*log10(8 log 2 / 2**n).

    The logarithm base in "8 log 2" is read as natural by default (then
    8 log 2 = 5.545...); pass log_base="2" for the reading where it equals
    exactly 8.
    """
    if n < 1:
        raise BadArguments(f"n must be >= 1, got {n}")
    if log_base == "e":
        numerator = 8.0 * math.log(2.0)
    elif log_base == "2":
        numerator = 8.0
    else:
        raise BadArguments(f"log_base must be 'e' or '2', got {log_base!r}")
    return _threshold_db(n, numerator)


def extract_above(sig: Signal, tau) -> list[tuple[int, float]]:
    """All (index, coefficient) with |coefficient| >= tau, largest first.

    Ties in magnitude break by ascending index so output order is
    reproducible. The input must be Walsh-domain.
    """
    if sig.domain != Domain.WALSH:
        raise BadArguments("extraction expects a Walsh-domain signal")
    if tau < 0:
        raise BadArguments(f"tau must be >= 0, got {tau}")
    hits: list[tuple[int, float]] = []
    _extract(sig.data, 0, tau, hits)
    hits.sort(key=lambda item: (-abs(item[1]), item[0]))
    return hits


def extract_above_dataset(
    ds: DatasetFile, tau, io_block_elems: int = 1 << 16
) -> list[tuple[int, float]]:
    """Streaming extraction over a Walsh-domain dataset, block by block."""
    if ds.domain != "walsh":
        raise BadArguments(f"{ds.path} is not Walsh-domain")
    if tau < 0:
        raise BadArguments(f"tau must be >= 0, got {tau}")
    hits: list[tuple[int, float]] = []
    block = min(io_block_elems, ds.dim)
    for start in range(0, ds.dim, block):
        _extract(ds.read_block(start, min(block, ds.dim - start)), start, tau, hits)
    hits.sort(key=lambda item: (-abs(item[1]), item[0]))
    return hits


def _extract(chunk: np.ndarray, base: int, tau, hits: list) -> None:
    picked = np.nonzero(np.abs(chunk) >= tau)[0]
    exact = chunk.dtype.kind == "i"
    for off in picked.tolist():
        value = chunk[off]
        hits.append((base + off, int(value) if exact else float(value)))


def noise_walsh_variance_check(
    n: int,
    sigma: float,
    kind: NoiseKind,
    trials: int,
    seed: int = 0,
) -> float:
    """Monte Carlo estimate of the per-coefficient Walsh variance of pure
    noise; converges to 2**n * sigma**2 for every zero-mean kind."""
    if trials < 1:
        raise BadArguments(f"trials must be >= 1, got {trials}")
    if sigma < 0:
        raise BadArguments(f"sigma must be >= 0, got {sigma}")
    dim = 1 << n
    seeds = np.random.SeedSequence(seed).spawn(trials)
    total = 0.0
    for trial_seed in seeds:
        rng = np.random.default_rng(trial_seed)
        if kind == NoiseKind.UNIFORM:
            half_width = sigma * math.sqrt(3.0)
            noise = rng.uniform(-half_width, half_width, dim)
        elif kind == NoiseKind.RADEMACHER:
            noise = (rng.integers(0, 2, dim) * 2 - 1) * float(sigma)
        elif kind == NoiseKind.GAUSSIAN:
            noise = rng.normal(0.0, sigma, dim)
        elif kind == NoiseKind.NONE:
            noise = np.zeros(dim)
        else:
            raise BadArguments(f"unknown noise kind {kind!r}")
        fwht_array(noise)
        total += float(np.mean(noise * noise))
    return total / trials

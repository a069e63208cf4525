"""Core transform tests: the brute-force definition is the oracle, the
fast path must agree with it exactly."""

import numpy as np
import pytest

from bigwht.core import (
    Domain,
    Signal,
    check_magnitude_bound,
    fwht_array,
    fwht_inplace,
    inverse_wht_inplace,
    parseval_energy,
    wht_bruteforce,
)
from bigwht.errors import (
    BadArguments,
    InexactDivision,
    OracleTooLarge,
    OverflowBoundError,
)


def int_signal(values, domain=Domain.TIME):
    return Signal(np.array(values, dtype=np.int64), domain)


class TestSignal:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(BadArguments):
            Signal(np.zeros(3, dtype=np.int64))

    def test_rejects_bad_dtype(self):
        with pytest.raises(BadArguments):
            Signal(np.zeros(4, dtype=np.int32))

    def test_log2_dim(self):
        assert int_signal([0] * 8).log2_dim == 3
        assert int_signal([5]).log2_dim == 0


class TestBruteforce:
    def test_delta_input(self):
        out = wht_bruteforce(int_signal([1, 0, 0, 0]))
        assert out.data.tolist() == [1, 1, 1, 1]

    def test_constant_input(self):
        out = wht_bruteforce(int_signal([1, 1, 1, 1]))
        assert out.data.tolist() == [4, 0, 0, 0]

    def test_ramp(self):
        # All 16 sign terms evaluated by hand: y = (10, -2, -4, 0).
        out = wht_bruteforce(int_signal([1, 2, 3, 4]))
        assert out.data.tolist() == [10, -2, -4, 0]

    def test_input_unchanged(self):
        sig = int_signal([1, 2, 3, 4])
        wht_bruteforce(sig)
        assert sig.data.tolist() == [1, 2, 3, 4]

    def test_oracle_limit(self):
        with pytest.raises(OracleTooLarge):
            wht_bruteforce(int_signal([0] * 16), limit=3)

    def test_overflow_guard(self):
        big = 1 << 61
        with pytest.raises(OverflowBoundError):
            wht_bruteforce(int_signal([big, 0, 0, 0]))

    def test_float_input(self):
        # y0 = 0.5-0.5+1.5+2.5, y1 = 0.5+0.5+1.5-2.5,
        # y2 = 0.5-0.5-1.5-2.5, y3 = 0.5+0.5-1.5+2.5
        out = wht_bruteforce(Signal(np.array([0.5, -0.5, 1.5, 2.5])))
        np.testing.assert_allclose(out.data, [4.0, 0.0, -4.0, 2.0])


class TestFwht:
    def test_n0_identity(self):
        sig = fwht_inplace(int_signal([7]))
        assert sig.data.tolist() == [7]

    def test_single_butterfly(self):
        assert fwht_inplace(int_signal([3, 1])).data.tolist() == [4, 2]

    def test_matches_bruteforce_example(self):
        assert fwht_inplace(int_signal([1, 2, 3, 4])).data.tolist() == [10, -2, -4, 0]

    def test_domain_toggles(self):
        sig = int_signal([3, 1])
        assert fwht_inplace(sig).domain == Domain.WALSH
        assert fwht_inplace(sig).domain == Domain.TIME

    def test_oracle_equivalence_randomized(self):
        rng = np.random.default_rng(42)
        for n in range(0, 11):
            for _ in range(20):
                x = rng.integers(-(1 << 20), 1 << 20, 1 << n).astype(np.int64)
                fast = fwht_inplace(Signal(x.copy()))
                slow = wht_bruteforce(Signal(x.copy()))
                assert np.array_equal(fast.data, slow.data), f"n={n}"

    def test_butterfly_count(self):
        for n in range(0, 12):
            buf = np.zeros(1 << n, dtype=np.int64)
            assert fwht_array(buf) == n << max(n - 1, 0)

    def test_involution_exact(self):
        rng = np.random.default_rng(7)
        for n in (0, 1, 5, 12, 16):
            x = rng.integers(-1000, 1000, 1 << n).astype(np.int64)
            sig = Signal(x.copy())
            fwht_inplace(sig)
            fwht_inplace(sig)
            assert np.array_equal(sig.data, x * (1 << n))

    def test_linearity_exact(self):
        rng = np.random.default_rng(3)
        n = 9
        for _ in range(10):
            x = rng.integers(-500, 500, 1 << n).astype(np.int64)
            z = rng.integers(-500, 500, 1 << n).astype(np.int64)
            a, b = int(rng.integers(-20, 20)), int(rng.integers(-20, 20))
            combined = fwht_inplace(Signal(a * x + b * z)).data
            wx = fwht_inplace(Signal(x)).data
            wz = fwht_inplace(Signal(z)).data
            assert np.array_equal(combined, a * wx + b * wz)

    def test_overflow_bound_rejects(self):
        n = 4
        bad = np.full(1 << n, 1 << 59, dtype=np.int64)
        with pytest.raises(OverflowBoundError):
            fwht_inplace(Signal(bad))
        # One notch below the bound passes.
        ok = np.full(1 << n, (1 << 59) - 1, dtype=np.int64)
        fwht_inplace(Signal(ok))


class TestInverse:
    def test_constant(self):
        sig = int_signal([4, 0, 0, 0], Domain.WALSH)
        assert inverse_wht_inplace(sig).data.tolist() == [1, 1, 1, 1]
        assert sig.domain == Domain.TIME

    def test_round_trip_example(self):
        sig = int_signal([10, -2, -4, 0], Domain.WALSH)
        assert inverse_wht_inplace(sig).data.tolist() == [1, 2, 3, 4]

    def test_n0(self):
        assert inverse_wht_inplace(int_signal([7], Domain.WALSH)).data.tolist() == [7]

    def test_requires_walsh_domain(self):
        with pytest.raises(BadArguments):
            inverse_wht_inplace(int_signal([1, 2, 3, 4]))

    def test_inexact_division_restores_buffer(self):
        sig = int_signal([1, 0, 0, 0], Domain.WALSH)
        with pytest.raises(InexactDivision):
            inverse_wht_inplace(sig)
        assert sig.data.tolist() == [1, 0, 0, 0]

    def test_float_round_trip(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=1 << 10)
        sig = Signal(x.copy())
        fwht_inplace(sig)
        inverse_wht_inplace(sig)
        np.testing.assert_allclose(sig.data, x, rtol=1e-12, atol=1e-12)

    def test_random_int_round_trips(self):
        rng = np.random.default_rng(13)
        for n in (1, 4, 9):
            x = rng.integers(-9999, 9999, 1 << n).astype(np.int64)
            sig = Signal(x.copy())
            fwht_inplace(sig)
            inverse_wht_inplace(sig)
            assert np.array_equal(sig.data, x)


class TestParseval:
    def test_constant_example(self):
        assert parseval_energy(int_signal([1, 1, 1, 1])) == 4
        assert parseval_energy(int_signal([4, 0, 0, 0])) == 16

    def test_zero(self):
        assert parseval_energy(int_signal([0] * 8)) == 0

    def test_ramp(self):
        assert parseval_energy(int_signal([1, 2, 3, 4])) == 30
        assert parseval_energy(int_signal([10, -2, -4, 0])) == 120

    def test_scaling_law_exact(self):
        rng = np.random.default_rng(5)
        for n in (0, 3, 8, 14):
            x = rng.integers(-(1 << 20), 1 << 20, 1 << n).astype(np.int64)
            sig = Signal(x.copy())
            before = parseval_energy(sig)
            fwht_inplace(sig)
            assert parseval_energy(sig) == before * (1 << n)

    def test_scaling_law_float(self):
        rng = np.random.default_rng(6)
        n = 10
        x = rng.normal(size=1 << n)
        sig = Signal(x.copy())
        before = parseval_energy(sig)
        fwht_inplace(sig)
        assert parseval_energy(sig) == pytest.approx(before * (1 << n), rel=1e-9)

    def test_exact_beyond_int64(self):
        # Energies larger than 2**63 must not wrap.
        sig = int_signal([1 << 40] * 4)
        assert parseval_energy(sig) == 4 * (1 << 80)


def test_magnitude_bound_edge():
    # M * 2**n == 2**63 exactly is rejected; one less passes.
    data = np.array([1 << 53, 0], dtype=np.int64)
    with pytest.raises(OverflowBoundError):
        check_magnitude_bound(data, 10)
    check_magnitude_bound(np.array([(1 << 53) - 1, 0], dtype=np.int64), 10)

"""Series kernel: profiles, spread coefficients, constants, bound evaluators."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasilocal.series import (
    BoundParams,
    DecayProfile,
    Explicit,
    ExponentialTail,
    FiniteRange,
    build_profile,
    evaluate_bound,
    exp_weighted_sum,
    expansional_constants,
    spread_coefficients,
    surface_bound,
    weighted_tail_bound,
)
from quasilocal.chain import (
    PAULI_X,
    PAULI_Z,
    InteractionSpec,
    ising_spec,
    sample_random_interaction,
)

from conftest import exp_target, random_profile


def spread_by_enumeration(entries, x, k):
    """Oracle: exponential-series coefficients by composition enumeration.

    Sums ``x^n / n!`` times the entry products over all compositions of
    ``k`` into ``n`` positive parts.  Exponential cost; test-only.
    """
    if k == 0:
        return 1.0
    total = 0.0
    for n in range(1, k + 1):
        for comp in _compositions(k, n):
            prod = 1.0
            for part in comp:
                prod *= entries[part]
            total += prod * x**n / math.factorial(n)
    return total


def _compositions(k, n):
    if n == 1:
        yield (k,)
        return
    for first in range(1, k - n + 2):
        for rest in _compositions(k - first, n - 1):
            yield (first,) + rest


class TestSpreadCoefficients:
    def test_zeroth_is_one(self, rng):
        prof = random_profile(rng)
        assert spread_coefficients(prof, 1.7, 0)[0] == 1.0

    def test_zero_entries_give_zero(self):
        prof = DecayProfile((1.0, 0.0, 0.0), Explicit())
        coeffs = spread_coefficients(prof, 3.0, 2)
        assert np.allclose(coeffs[1:], 0.0)

    def test_hand_computed_composition_value(self):
        # entries 1 at diameters 1 and 2, x = 1, k = 2:
        # compositions (2) and (1,1) give 1 + 1/2
        prof = DecayProfile((1.0, 1.0, 1.0), Explicit())
        assert spread_coefficients(prof, 1.0, 2)[2] == pytest.approx(1.5)

    def test_recurrence_matches_enumeration(self, rng):
        for trial in range(20):
            prof = random_profile(np.random.default_rng(100 + trial))
            x = float(np.random.default_rng(trial).random() * 3)
            coeffs = spread_coefficients(prof, x, 8)
            for k in range(9):
                oracle = spread_by_enumeration(prof.entries, x, k)
                assert coeffs[k] == pytest.approx(oracle, rel=1e-12, abs=1e-14)

    def test_rejects_negative_x(self, rng):
        with pytest.raises(ValueError):
            spread_coefficients(random_profile(rng), -0.1, 2)

    def test_rejects_kmax_beyond_cutoff(self, rng):
        prof = random_profile(rng, cutoff=4)
        with pytest.raises(ValueError):
            spread_coefficients(prof, 1.0, 5)


class TestProfileValidation:
    def test_rejects_increasing(self):
        with pytest.raises(ValueError):
            DecayProfile((0.1, 0.5), Explicit())

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DecayProfile((0.5, -0.1), Explicit())

    def test_finite_range_needs_zero_tail_entries(self):
        with pytest.raises(ValueError):
            DecayProfile((1.0, 1.0, 0.5), FiniteRange(1))

    def test_entry_uses_envelope_beyond_cutoff(self):
        prof = DecayProfile((1.0, 0.5), ExponentialTail(1.0, 1.0))
        assert prof.entry(1) == 0.5
        assert prof.entry(5) == pytest.approx(math.exp(-5.0))


class TestWeightedSums:
    def test_rate_zero_is_plain_sum(self, rng):
        prof = random_profile(rng)
        assert exp_weighted_sum(prof, 0.0) == pytest.approx(sum(prof.entries))

    def test_finite_range_always_finite(self):
        prof = DecayProfile((1.0, 1.0, 0.0), FiniteRange(1))
        assert math.isfinite(exp_weighted_sum(prof, 25.0))

    def test_geometric_closed_form(self):
        prof = DecayProfile(tuple(np.exp(-np.arange(8.0))),
                            ExponentialTail(1.0, 1.0))
        expect = 1.0 / (1.0 - math.exp(-0.5))
        assert exp_weighted_sum(prof, 0.5) == pytest.approx(expect, rel=1e-12)

    def test_divergence_flagged_as_inf(self):
        prof = DecayProfile((1.0, 0.5), ExponentialTail(1.0, 1.0))
        assert exp_weighted_sum(prof, 1.5) == math.inf

    def test_tail_bound_dominates_true_tail(self, rng):
        # brute force the tail of the weighted series against the bound
        prof = exp_target(0.2, 1.0, 12)
        x = 1.3
        coeffs = spread_coefficients(prof, x, 12)
        w = x * prof.head
        for ell in range(2, 10):
            true_tail = sum(math.exp(w * k) * coeffs[k]
                            for k in range(ell + 1, 13))
            assert weighted_tail_bound(prof, x, ell) >= true_tail * (1 - 1e-12)


class TestExpansionalConstants:
    def test_zero_interaction(self):
        prof = DecayProfile((0.0, 0.0), Explicit())
        cons = expansional_constants(prof, 4)
        assert cons.envelope == 1.0
        assert all(t == 0.0 for t in cons.tail_sums)

    def test_tails_non_increasing(self, rng):
        cons = expansional_constants(random_profile(rng, head=0.3), 8)
        tails = cons.tail_sums
        assert all(a >= b - 1e-15 for a, b in zip(tails, tails[1:]))

    def test_small_profile_value_against_series_oracle(self):
        # one-diameter profile: spread_k(2) = (2 w)^k / k!, so the series
        # sums to exp(0.2 e^{0.2}) - 1 exactly; the oracle sums it to
        # machine tail with an explicit remainder check.
        prof = DecayProfile((0.1, 0.1) + (0.0,) * 40, FiniteRange(1))
        cons = expansional_constants(prof, 6)
        acc, k, term = 0.0, 1, 1.0
        while True:
            term = (0.2 * math.exp(0.2)) ** k / math.factorial(k)
            acc += term
            k += 1
            if term < 1e-18:
                break
        assert cons.envelope == pytest.approx(math.exp(acc), rel=1e-9)

    def test_divergent_profile_flagged(self):
        prof = DecayProfile((2.0, 1.0), ExponentialTail(0.5, 1.0))
        cons = expansional_constants(prof, 3)
        assert not cons.finite

    def test_tail_weighted_sum_summable(self, rng):
        # partial sums of tail constants against exp(rate - 2 head)
        # weights stay bounded, mirroring the summability display; the
        # interaction must decay strictly faster than the weight rate
        prof = exp_target(0.2, 1.4, 10)
        cons = expansional_constants(prof, 30)
        rate = 1.0 - 2 * prof.head
        partial = [cons.tail_sum(l) * math.exp(rate * l) for l in range(1, 31)]
        sums = np.cumsum(partial)
        assert sums[-1] < math.inf
        assert sums[-1] - sums[-6] < 1e-3 * (1 + sums[-1])


class TestBuildProfile:
    def test_nearest_neighbour_enumeration(self):
        spec = InteractionSpec(
            d=2, cells=[((0, 1), 0.7 * np.kron(PAULI_Z, PAULI_Z))],
            tail=FiniteRange(1))
        prof = build_profile(spec, 4)
        assert prof.entries[0] == pytest.approx(1.4)
        assert prof.entries[1] == pytest.approx(1.4)
        assert prof.entries[2:] == (0.0, 0.0, 0.0)

    def test_empty_spec(self):
        spec = InteractionSpec(d=2, tail=Explicit())
        prof = build_profile(spec, 3)
        assert prof.entries == (0.0, 0.0, 0.0, 0.0)

    def test_support_enumeration_oracle(self):
        # cells of diameter n with norm e^{-n}: through any site a
        # diameter-n interval passes n+1 times
        cells = []
        for n in range(0, 5):
            mat = np.zeros((2 ** (n + 1), 2 ** (n + 1)), dtype=complex)
            mat[0, 0] = math.exp(-n)
            cells.append((tuple(range(n + 1)), mat))
        spec = InteractionSpec(d=2, cells=cells, tail=FiniteRange(4))
        prof = build_profile(spec, 6)
        for k in range(7):
            oracle = sum((n + 1) * math.exp(-n) for n in range(5) if n >= k)
            assert prof.entries[k] == pytest.approx(oracle, rel=1e-12)

    def test_rejects_inconsistent_range(self):
        spec = InteractionSpec(
            d=2, cells=[((0, 1, 2), np.eye(8, dtype=complex))],
            tail=FiniteRange(1))
        with pytest.raises(ValueError, match="exceed"):
            build_profile(spec, 4)

    def test_rejects_unbounded_declared_tail(self):
        spec = InteractionSpec(d=2, cells=[((0,), PAULI_Z)],
                               tail=ExponentialTail(-1.0, 1.0))
        with pytest.raises(ValueError, match="unbounded"):
            build_profile(spec, 3)


class TestBoundEvaluators:
    def setup_method(self):
        self.profile = exp_target(0.25, 1.0, 8)

    def params(self, family, s, ell=1, outer=4, **kw):
        return BoundParams(s=s, inner=ell, outer=outer, support_size=2,
                           family=family, **kw)

    def test_series_zero_time(self):
        cert = evaluate_bound(self.params("series", 0.0), self.profile)
        assert cert.theoretical == 0.0

    def test_real_time_zero(self):
        cert = evaluate_bound(self.params("real_time", 0.0), self.profile)
        assert cert.theoretical == 0.0

    def test_exp_decay_printed_value(self):
        # rate 1, head 0.25, |s| = 1, support 2, weighted norm = 2, ell = 0
        # plugs into exp(2*0.25*2) * exp(4*2) * exp(0) = e^9; entries are
        # rigged so the rate-1 weighted sum lands exactly on 2
        a = 0.25
        b = (2.0 - 0.25 - a * math.e) / math.e**2
        prof = DecayProfile((0.25, a, min(b, a)), Explicit())
        norm = exp_weighted_sum(prof, 1.0)
        assert norm == pytest.approx(2.0, rel=1e-12)
        cert = evaluate_bound(
            BoundParams(s=1.0, inner=0, outer=None, support_size=2,
                        family="exp_decay", decay_rate=1.0), prof)
        assert cert.theoretical == pytest.approx(math.exp(9.0), rel=1e-12)

    def test_exp_decay_outside_disk_is_inf(self):
        cert = evaluate_bound(
            self.params("exp_decay", 1.01 / (4 * 0.25), decay_rate=1.0),
            self.profile)
        assert cert.theoretical == math.inf

    def test_strip_outside_strip_is_inf(self):
        s = complex(0.3, 1.01 / (4 * 0.25))
        cert = evaluate_bound(self.params("strip", s, decay_rate=1.0),
                              self.profile)
        assert cert.theoretical == math.inf

    def test_strip_tighter_than_wide_variant(self):
        s = complex(0.4, 0.3)
        tight = evaluate_bound(self.params("strip", s, decay_rate=1.0),
                               self.profile)
        wide = evaluate_bound(self.params("strip_wide", s, decay_rate=1.0),
                              self.profile)
        assert tight.theoretical <= wide.theoretical

    def test_disk_radius_condition(self):
        inside = evaluate_bound(self.params("disk", 1e-3, decay_rate=1.0),
                                self.profile)
        assert math.isfinite(inside.theoretical)
        outside = evaluate_bound(self.params("disk", 10.0, decay_rate=1.0),
                                 self.profile)
        assert outside.theoretical == math.inf

    @pytest.mark.parametrize("family", ["series", "exp_decay", "strip",
                                        "strip_wide", "real_time"])
    def test_monotone_in_s_and_ell(self, family):
        s_values = [0.05, 0.1, 0.2, 0.4]
        prev = -1.0
        for s in s_values:
            cert = evaluate_bound(self.params(family, s, decay_rate=1.0),
                                  self.profile)
            assert cert.theoretical >= prev - 1e-15
            prev = cert.theoretical
        # the strip prefactor scales with ell and only decays across the
        # floor(ell/2) steps, so its monotonicity is in strides of two
        stride = 2 if family.startswith("strip") else 1
        prev = math.inf
        for ell in range(1, 7, stride):
            cert = evaluate_bound(
                self.params(family, 0.2, ell=ell, decay_rate=1.0),
                self.profile)
            assert cert.theoretical <= prev + 1e-15
            prev = cert.theoretical

    def test_exp_decay_dominates_series_inside_disk(self, rng):
        # the closed form majorizes the truncated series on its disk
        for seed in range(6):
            prof = build_profile(random_spec_local(seed), 8)
            for s in (0.1, 0.3, 0.6, 0.9):
                if 4 * s * prof.head > 1.0:
                    continue
                for ell in (0, 1, 2):
                    p_series = BoundParams(s=s, inner=ell, outer=8,
                                           support_size=1, family="series")
                    p_exp = BoundParams(s=s, inner=ell, outer=8,
                                        support_size=1, family="exp_decay",
                                        decay_rate=1.0)
                    v_series = evaluate_bound(p_series, prof).theoretical
                    v_exp = evaluate_bound(p_exp, prof).theoretical
                    assert v_series <= v_exp * (1 + 1e-12)

    def test_finite_range_superexponential_dominates_series(self):
        prof = DecayProfile((0.3, 0.3, 0.2, 0.0, 0.0), FiniteRange(2))
        for x in (0.5, 1.0, 2.0):
            coeffs = spread_coefficients(prof, x, 4)
            w = x * prof.head
            for ell in range(0, 4):
                tail = weighted_tail_bound(prof, x, ell)
                true_partial = sum(math.exp(w * k) * coeffs[k]
                                   for k in range(ell + 1, 5))
                assert tail >= true_partial * (1 - 1e-12)


def random_spec_local(seed):
    return sample_random_interaction(seed, 2, exp_target(0.25, 1.0), 3)


class TestSurfaceBound:
    def test_single_path(self):
        W = np.zeros((2, 2))
        W[0, 1] = 0.7
        val = surface_bound(W, [1, 2], 0.5, 0, 1, head=0.0)
        # W*_1(x) = W(0,1) x with x = 2|s| = 1
        assert val == pytest.approx(0.7)

    def test_two_step_paths(self):
        W = np.zeros((3, 3))
        W[0, 1] = W[1, 2] = W[0, 2] = 1.0
        val = surface_bound(W, [1, 1, 1], 0.5, 1, 2, head=0.0)
        # paths to 2: direct (x) and through 1 (x^2/2) with x = 1
        assert val == pytest.approx(1.5)

    def test_zero_surface_energy_collapses(self):
        W = np.zeros((4, 4))
        val = surface_bound(W, [1] * 4, 1.0, 0, 3, head=0.3)
        assert val == 0.0

    def test_rejects_negative(self):
        W = -np.ones((2, 2))
        with pytest.raises(ValueError):
            surface_bound(W, [1, 1], 0.5, 0, 1, head=0.1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1), min_size=2, max_size=6),
       st.floats(min_value=0, max_value=2))
def test_spread_nonnegative_property(drops, x):
    entries = tuple(np.cumsum(sorted(drops, reverse=True)[::-1])[::-1])
    prof = DecayProfile(entries, Explicit())
    coeffs = spread_coefficients(prof, x, len(entries) - 1)
    assert np.all(coeffs >= 0)

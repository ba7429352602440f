#!/usr/bin/env python3
"""
Tests for builtin spectra, effective ranks and the condition checkers
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from advlab.engines.spectra import (
    check_conditions,
    critical_index,
    cross_effective_rank,
    design_spectrum,
    effective_ranks,
    make_spectrum,
    parse_family,
    rank_profile,
    rank_report,
    tradeoff_index,
    weighted_norms,
)
from advlab.models.errors import InvalidArgumentError, PreconditionError, UndefinedRankError
from advlab.models.spectrum import (
    ConditionKind,
    FamilyDescription,
    ParameterWeights,
    Spectrum,
    SpectrumFamily,
    Verdict,
)


def test_parse_family_text_form():
    desc = parse_family("Example1(n=256,p=4096)")
    assert desc.family == SpectrumFamily.EXAMPLE1
    assert desc.params == {"n": 256, "p": 4096}
    custom = parse_family("Custom(values=1;0.5;0.25)")
    assert custom.get("values") == [1.0, 0.5, 0.25]
    assert parse_family("isotropic(d=10)").family == SpectrumFamily.ISOTROPIC
    assert parse_family(desc.describe()) == desc
    assert parse_family(custom.describe()).get("values") == [1.0, 0.5, 0.25]


@pytest.mark.parametrize("text", ["", "Example1(n)", "Nope(a=1)", "PolyDecay(a=x)"])
def test_parse_family_rejects_malformed(text):
    with pytest.raises(InvalidArgumentError):
        parse_family(text)


def test_text_form_rebuilds_same_spectrum():
    spec, weights, sigma2 = make_spectrum("PolyDecay(a=1.5,p=300)", n=50)
    again, weights2, sigma2_again = make_spectrum(spec.ref, n=50)
    assert_allclose(again.eigenvalues, spec.eigenvalues)
    assert_allclose(weights2.weights_sq, weights.weights_sq)
    assert again.tail_sum == pytest.approx(spec.tail_sum)
    assert sigma2_again == sigma2


def test_example1_closed_form():
    n = 256
    spec, weights, sigma2 = make_spectrum("Example1", n)
    a = 1.0 + 1.0 / math.sqrt(n)
    assert spec.truncation_dim == 64
    assert spec.eigenvalues[0] == 1.0
    assert spec.eigenvalues[1] == pytest.approx(2.0 ** -a)
    assert weights.weights_sq[0] == pytest.approx(1.0 / math.log(2.0) ** 2)
    assert sigma2 == pytest.approx(0.25)
    # Hurwitz zeta tail continues the materialized sum
    longer, _, _ = make_spectrum("Example1", n, p=2000)
    assert spec.trace == pytest.approx(longer.trace, rel=1e-9)


def test_example1_critical_index_scales_like_sqrt_n():
    for n in (256, 1024, 4096):
        spec, _, _ = make_spectrum("Example1", n)
        k_star = critical_index(spec, 2.0, n)
        assert k_star is not None
        assert abs(k_star - (2 * math.sqrt(n) - 1)) <= 3
        assert k_star < spec.truncation_dim


def test_example2_indices():
    n = 4096
    spec, weights, sigma2 = make_spectrum("Example2", n)
    assert sigma2 == pytest.approx(1.0 / math.log(n))
    assert critical_index(spec, 2.0, n) == 16
    assert critical_index(spec, 1.0, n) == 8
    w_star = tradeoff_index(spec, weights, n, 2.0)
    assert w_star is not None and w_star <= 4


def test_example1_tradeoff_index_below_critical_index_at_large_n():
    n = 10 ** 12
    spec, weights, _ = make_spectrum("Example1", n)
    k_star = critical_index(spec, 2.0, n)
    w_star = tradeoff_index(spec, weights, n, 2.0)
    assert k_star is not None and w_star is not None
    assert w_star < k_star


def test_effective_ranks_small_custom():
    spec, _, _ = make_spectrum("Custom(values=1;0.5;0.25)", n=2)
    r0, big_r0 = effective_ranks(spec, 0)
    assert r0 == pytest.approx(1.75)
    assert big_r0 == pytest.approx(1.75 ** 2 / 1.3125)
    with pytest.raises(UndefinedRankError):
        effective_ranks(spec, 3)


def test_isotropic_ranks_and_missing_critical_index():
    spec, _, _ = make_spectrum("Isotropic(d=100)", n=10)
    r, big_r = rank_profile(spec)
    assert_allclose(r, 100 - np.arange(100))
    assert_allclose(big_r, 100 - np.arange(100))
    assert critical_index(spec, 2.0, 100) is None
    with pytest.raises(PreconditionError):
        tradeoff_index(spec, make_spectrum("Isotropic(d=100)", n=10)[1], 100)


def test_rank_invariants_on_poly_decay():
    spec, weights, _ = make_spectrum("PolyDecay(a=1.5,p=500)", n=40)
    r, big_r = rank_profile(spec)
    assert np.all(r >= 1.0)
    assert np.all(big_r <= r ** 2 * (1 + 1e-12))
    report = rank_report(spec, weights, 40, 2.0)
    assert report.k_star == critical_index(spec, 2.0, 40)
    assert report.s_k == pytest.approx(cross_effective_rank(spec, weights, report.k))


def test_weighted_norms_split():
    spec, weights, _ = make_spectrum("Custom(values=4;2;1,weights=1;1;2)", n=2)
    tail, head_inv, total = weighted_norms(spec, weights, 1)
    assert tail == pytest.approx(2.0 + 2.0)
    assert head_inv == pytest.approx(0.25)
    assert total == pytest.approx(4.0 + 2.0 + 2.0)


def test_design_spectrum_preserves_trace_and_signal():
    spec, weights, _ = make_spectrum("Example1", 256)
    keep = critical_index(spec, 2.0, 256) + 1
    folded, fweights = design_spectrum(spec, weights, keep=keep)
    assert_allclose(folded.eigenvalues[:keep], spec.eigenvalues[:keep])
    assert folded.trace == pytest.approx(spec.trace, rel=1e-12)
    _, _, energy = weighted_norms(spec, weights, 0)
    _, _, folded_energy = weighted_norms(folded, fweights, 0)
    assert folded_energy == pytest.approx(energy, rel=1e-12)
    assert np.all(np.diff(folded.eigenvalues) <= 0)
    # the flat block keeps the critical index where it was
    assert critical_index(folded, 2.0, 256) == keep - 1


def test_make_spectrum_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        make_spectrum("Example1", 1)
    with pytest.raises(InvalidArgumentError):
        make_spectrum("PolyDecay(a=0.5)", 10)
    with pytest.raises(InvalidArgumentError):
        make_spectrum("Custom(values=1;2)", 10)


def test_condition1_example1_trends_to_zero():
    report = check_conditions(ConditionKind.BENIGN, "Example1", n_grid=[256, 1024, 4096, 16384])
    assert report.verdict == Verdict.TRENDS_TO_ZERO
    assert set(report.terms) == {"bias_tail", "bias_head", "head_ratio", "tail_ratio"}
    assert "Benign" in report.render()


def test_condition1_isotropic_d_equals_n_violated():
    report = check_conditions(ConditionKind.BENIGN, "Isotropic", n_grid=[64, 128, 256])
    assert report.verdict == Verdict.VIOLATED
    assert any("k*" in note for note in report.notes)


def test_ntk_conditions_on_example3():
    grid = [8, 16, 32]
    benign = check_conditions(ConditionKind.NTK_BENIGN, "NtkExample", n_grid=grid)
    high_dim = check_conditions(ConditionKind.NTK_HIGH_DIM, "NtkExample", n_grid=grid)
    assert benign.verdict == Verdict.TRENDS_TO_ZERO
    assert high_dim.verdict == Verdict.TRENDS_TO_ZERO
    assert benign.terms["head_ratio"] == [0.0, 0.0, 0.0]


def test_example3_trace_values():
    traces = [make_spectrum("NtkExample", n)[0].trace for n in (8, 16, 32)]
    assert_allclose(traces, [27.18, 46.89, 81.0], rtol=2e-3)


def test_check_conditions_needs_increasing_grid():
    with pytest.raises(InvalidArgumentError):
        check_conditions(ConditionKind.BENIGN, "Example1", n_grid=[256, 128, 512])



def test_records_reject_invalid_values():
    custom = FamilyDescription(SpectrumFamily.CUSTOM)
    with pytest.raises(InvalidArgumentError):
        Spectrum(np.array([0.5, 1.0, -2.0]), custom)
    with pytest.raises(InvalidArgumentError):
        Spectrum(np.array([0.5, 1.0]), custom)
    with pytest.raises(InvalidArgumentError):
        Spectrum(np.array([1.0, np.nan]), custom)
    with pytest.raises(InvalidArgumentError):
        Spectrum(np.array([]), custom)
    with pytest.raises(InvalidArgumentError):
        Spectrum(np.array([1.0, 0.5]), custom, tail_sum=-1.0)
    with pytest.raises(InvalidArgumentError):
        Spectrum(np.array([1.0, 0.5]), custom, tail_sum=1.0, tail_sum_sq=2.0)
    with pytest.raises(InvalidArgumentError):
        ParameterWeights(np.array([-1.0, 2.0]))
    with pytest.raises(InvalidArgumentError):
        ParameterWeights(np.array([1.0, 2.0]), tail_norm_sq=-0.5)
    with pytest.raises(InvalidArgumentError):
        ParameterWeights(np.array([1.0, math.inf]))

    spec = Spectrum(np.array([1.0, 1.0, 0.5]), custom, tail_sum=1.0, tail_sum_sq=0.25)
    assert spec.trace == pytest.approx(3.5)
    assert not spec.eigenvalues.flags.writeable
    assert ParameterWeights(np.array([0.0, 2.0]), tail_norm_sq=1.0).norm_sq == pytest.approx(3.0)


def test_critical_index_monotone_in_b_and_n():
    spec, _, _ = make_spectrum("PolyDecay(a=1.2,p=4000)", n=64)

    def index(b, n):
        k = critical_index(spec, b, n)
        return math.inf if k is None else k

    for n in (8, 32, 128):
        found = [index(b, n) for b in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(y >= x for x, y in zip(found[:-1], found[1:]))
    for b in (0.5, 2.0):
        found = [index(b, n) for n in (4, 16, 64, 256, 1024)]
        assert all(y >= x for x, y in zip(found[:-1], found[1:]))
    assert index(0.5, 4) < index(0.5, 256)


def test_cross_effective_rank_small_cases():
    iso = Spectrum(np.ones(4), FamilyDescription(SpectrumFamily.ISOTROPIC, {"d": 4}))
    assert cross_effective_rank(iso, ParameterWeights(np.full(4, 0.25)), 0) == pytest.approx(4.0)
    spiked = ParameterWeights(np.array([1.0, 0.0, 0.0, 0.0]))
    assert cross_effective_rank(iso, spiked, 1) == 0.0
    with pytest.raises(PreconditionError):
        cross_effective_rank(iso, ParameterWeights(np.zeros(4)), 0)


def test_cross_effective_rank_matches_summation():
    spec, weights, _ = make_spectrum("Example1", 256)
    eig = [float(v) for v in spec.eigenvalues]
    w_sq = [float(v) for v in weights.weights_sq]
    for k in (0, 4, 20):
        energy = math.fsum(lam * w for lam, w in zip(eig[k:], w_sq[k:])) + weights.tail_weighted
        mass = math.fsum(eig[k:]) + spec.tail_sum
        norm_sq = math.fsum(w_sq) + weights.tail_norm_sq
        expected = energy * mass / (norm_sq * eig[k] ** 2)
        assert cross_effective_rank(spec, weights, k) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("family, n, rtol", [
    ("Example1", 256, 1e-3),
    ("Example2", 256, 5e-3),
    ("PolyDecay(a=1.5,c=2.5)", 40, 1e-9),
])
def test_tails_continue_a_longer_truncation(family, n, rtol):
    short, short_w, _ = make_spectrum(family, n, p=50)
    longer, long_w, _ = make_spectrum(family, n, p=500)
    eig = longer.eigenvalues[50:]
    w_sq = long_w.weights_sq[50:]
    assert short.tail_sum == pytest.approx(np.sum(eig) + longer.tail_sum, rel=1e-9)
    assert short.tail_sum_sq == pytest.approx(np.sum(eig ** 2) + longer.tail_sum_sq, rel=1e-9)
    assert short_w.tail_norm_sq == pytest.approx(np.sum(w_sq) + long_w.tail_norm_sq, rel=rtol)
    assert short_w.tail_weighted == pytest.approx(np.sum(eig * w_sq) + long_w.tail_weighted, rel=rtol)
    assert short_w.tail_weighted_sq == pytest.approx(np.sum(eig ** 2 * w_sq) + long_w.tail_weighted_sq, rel=rtol)


if __name__ == "__main__":
    pytest.main([__file__])

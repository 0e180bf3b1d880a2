import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qspec.calculus import FuncSpec, constant_function, named_function
from qspec.errors import BracketError, DomainError, StructuralError
from qspec.operators import canonical_gamma, identity, profile, sampled_norm
from qspec.spaces import SampleSpec, norm, pointwise_algebra, sample_set, sup_space
from qspec.spectral import Partition, bracket, decompose, spectral_sum
from qspec.spectral_ops import (
    IntervalUnion,
    SpectralOperatorClass,
    cauchy_correspondence,
    lower_endpoint_blind,
    profile_limit,
    profile_projection,
    sp_apply,
    sp_axiom_check,
    sp_class_combine,
    sp_integral,
    sp_nondegeneracy_check,
    sp_weighted_integral,
)

SP = sup_space(2)


def psi(X):
    return (1 + np.sin(X[:, 0])) / 2


@pytest.fixture(scope="module")
def E():
    return profile_projection(SP, psi, 0.0, 1.0)


@pytest.fixture(scope="module")
def samples():
    return sample_set(SP, SampleSpec(count=1000), seed=0)


iv = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


@given(st.lists(iv, max_size=5), st.lists(iv, max_size=5), st.floats(-3, 3))
def test_interval_union_algebra(a, b, t):
    A, B = IntervalUnion(tuple(a)), IntervalUnion(tuple(b))
    assert IntervalUnion(A.intervals) == A
    assert bool(A.union(B).contains(t)) == bool(A.contains(t) or B.contains(t))
    assert bool(A.intersect(B).contains(t)) == bool(A.contains(t) and B.contains(t))
    for (x0, x1), (y0, y1) in zip(A.intervals, A.intervals[1:]):
        assert x1 < y0


def test_interval_half_open():
    A = IntervalUnion.interval(0.0, 1.0)
    assert not A.contains(0.0) and A.contains(1.0)
    assert IntervalUnion(((0, 1), (1, 2))).intervals == ((0.0, 2.0),)


def test_sp_apply_examples(E, samples):
    X = samples.points
    assert np.array_equal(sp_apply(E, E.full, X), X)
    assert np.all(sp_apply(E, IntervalUnion(), X) == 0)
    x = np.array([math.pi / 2, 0.0])
    assert np.array_equal(sp_apply(E, IntervalUnion.interval(0.9, 1.0), x), x)
    assert np.array_equal(sp_apply(E, E.full, np.zeros(2)), np.zeros(2))
    with pytest.raises(DomainError):
        sp_apply(E, IntervalUnion.interval(0.5, 1.5), x)


def test_projection_constructor_validation():
    with pytest.raises(StructuralError):
        profile_projection(SP, psi, 1.0, 0.0)


def test_axioms_profile_pass(E, samples):
    rep = sp_axiom_check(E, samples, interval_fuzz_seed=3)
    assert rep.passed
    assert set(rep.checks) >= {"empty_is_zero", "full_is_identity", "multiplicative", "commuting", "additive",
                               "idempotent", "projection_shape"}


def test_axioms_broken_fixture_fails(samples):
    Eb = lower_endpoint_blind(SP, psi, 0.0, 1.0)
    rep = sp_axiom_check(Eb, samples, interval_fuzz_seed=3)
    assert not rep.passed
    assert not rep["multiplicative"].passed and rep["multiplicative"].witness["x"] is not None
    assert not rep["additive"].passed


def test_disjoint_additivity_exact(E, samples):
    X = samples.points
    A, B = IntervalUnion.interval(0.1, 0.4), IntervalUnion.interval(0.4, 0.8)
    assert np.array_equal(sp_apply(E, A.union(B), X), sp_apply(E, A, X) + sp_apply(E, B, X))


def test_sp_integral_examples(E, samples):
    P = Partition.uniform(0.0, 1.0, 200)
    X = samples.points
    assert np.array_equal(sp_integral(E, constant_function(1.0), P)(X), X)
    ident = named_function("identity")
    x = np.array([0.0, 7.0])  # psi = 0.5
    got = sp_integral(E, ident, P)(x)
    assert np.all(np.abs(got - 0.5 * x) <= P.mesh * norm(SP, x))
    with pytest.raises(BracketError):
        sp_integral(E, ident, Partition.uniform(0.0, 0.5, 10))


@pytest.mark.parametrize("name", ["exp", "identity", "sin", "abs"])
def test_sp_integral_oracle(E, samples, name):
    f = named_function(name)
    X = samples.points
    nx = norm(SP, X)
    for n in (25, 100, 400):
        P = Partition.uniform(0.0, 1.0, n)
        err = norm(SP, sp_integral(E, f, P)(X) - profile_limit(E, f)(X))
        assert np.all(err <= f.modulus(P.mesh, 0.0, 1.0) * nx * (1 + 1e-12) + 1e-300)


def test_sp_integral_brute_force_bins(E, samples):
    f = named_function("exp")
    P = Partition.uniform(0.0, 1.0, 30)
    X = samples.points[:100]
    got = sp_integral(E, f, P)(X)
    v = psi(X)
    for row, x, pv in zip(got, X, v):
        j = next(k for k in range(1, 31) if P.knots[k - 1] < pv <= P.knots[k])
        assert np.allclose(row, math.exp(P.knots[j]) * x, rtol=1e-15, atol=0)


def test_choice_independence(E, samples):
    f = named_function("exp")
    X = samples.points
    lim = profile_limit(E, f)
    for n in (50, 400):
        P = Partition.uniform(0.0, 1.0, n)
        errs = [sampled_norm(sp_integral(E, f, P, c, 1) - lim, X) for c in ("left", "right", "midpoint", "random")]
        assert max(errs) <= f.modulus(P.mesh, 0.0, 1.0) * (1 + 1e-12)


def test_error_ratio_on_halving(E, samples):
    f = named_function("exp")
    X = samples.points
    lim = profile_limit(E, f)
    errs = [sampled_norm(sp_integral(E, f, Partition.uniform(0.0, 1.0, n)) - lim, X) for n in (100, 200, 400)]
    assert all(b <= 0.6 * a for a, b in zip(errs, errs[1:]))


def test_weighted_integral(E, samples, pctx, psamples, sin_sum):
    P = Partition.uniform(0.0, 1.0, 100)
    X = samples.points
    f = named_function("exp")
    assert np.array_equal(sp_weighted_integral(E, identity(SP), f, P)(X), sp_integral(E, f, P)(X))
    assert np.all(sp_weighted_integral(E, identity(SP), constant_function(0.0), P)(X) == 0)
    # with r = gamma and psi the Rayleigh profile, the weighted integral is the spectral sum
    br = bracket(sin_sum, pctx, psamples)
    Q = Partition.uniform(br.m, br.M, 100)
    Eg = profile_projection(pctx.space, sin_sum.phi, br.m, br.M)
    Y = psamples.points
    lhs = sp_weighted_integral(Eg, canonical_gamma(pctx.space), named_function("identity"), Q)(Y)
    assert np.allclose(lhs, spectral_sum(sin_sum, pctx, Q)(Y), rtol=0, atol=1e-14)
    dec = decompose(sin_sum, pctx, (100,), psamples, br=br)
    assert sampled_norm(sp_weighted_integral(Eg, canonical_gamma(pctx.space), named_function("identity"), Q)
                        - sin_sum, Y) == pytest.approx(dec.errors[100], rel=1e-12)


def test_class_combine(E, samples):
    P = Partition.uniform(0.0, 1.0, 200)
    X = samples.points
    cls = SpectralOperatorClass(E, P)
    f1, f2 = named_function("identity"), named_function("one")
    assert np.array_equal(sp_class_combine(cls, 0.0, f1, f2)(X), sp_integral(E, f2, P)(X))
    assert np.all(sp_class_combine(cls, 1.0, f1, -f1)(X) == 0)
    got = sp_class_combine(cls, 2.0, f1, f2)(X)
    oracle = (2 * psi(X) + 1)[:, None] * X
    assert np.all(norm(SP, got - oracle) <= 2 * P.mesh * norm(SP, X) * (1 + 1e-12))


@given(alpha=st.floats(-5, 5, allow_nan=False))
def test_linearity_exact(E, samples, alpha):
    P = Partition.uniform(0.0, 1.0, 64)
    X = samples.points[:200]
    cls = SpectralOperatorClass(E, P)
    f1, f2 = named_function("sin"), named_function("exp")
    combined = sp_class_combine(cls, alpha, f1, f2)(X)
    assert np.array_equal(combined, sp_integral(E, f1.scaled(alpha) + f2, P)(X))
    separate = alpha * sp_integral(E, f1, P)(X) + sp_integral(E, f2, P)(X)
    assert np.allclose(combined, separate, rtol=1e-14, atol=1e-14)


def test_nondegeneracy(E, samples):
    probes = sample_set(SP, SampleSpec("ball_random", 20000, r_max=4.0), seed=1)
    rep = sp_nondegeneracy_check(E, probes, grid=1000)
    assert rep.passed and rep.evidence_only
    two = profile_projection(SP, lambda X: np.where(X[:, 0] > 0, 0.25, 0.75), 0.0, 1.0)
    rep = sp_nondegeneracy_check(two, samples, grid=10)
    assert not rep.passed and (0.0, 0.1) in [tuple(round(v, 12) for v in c) for c in rep.unwitnessed]
    assert sp_nondegeneracy_check(two, samples, grid=1).passed
    assert sp_nondegeneracy_check(lower_endpoint_blind(SP, psi, 0.0, 1.0), samples, grid=20).passed


def test_cauchy_correspondence(E, samples):
    P = Partition.uniform(0.0, 1.0, 100)
    f = named_function("exp")
    seq = [FuncSpec(lambda t, n=n: np.exp(t) + np.sin(n * t) / n, f"f{n}") for n in (1, 2, 4, 8, 16, 32)]
    rows = cauchy_correspondence(E, seq, f, P, samples)
    for d, c in rows:
        assert d <= c * (1 + 1e-12)
    assert rows[-1][0] < rows[0][0]


def test_pointwise_profile_projection(pctx, psamples, sin_sum):
    sp = pointwise_algebra(16)
    Ep = profile_projection(sp, sin_sum.phi, -1.002, 1.0)
    assert sp_axiom_check(Ep, psamples, 1).passed

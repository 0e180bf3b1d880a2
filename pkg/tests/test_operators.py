import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qspec import quasi_product as qpm
from qspec.errors import NotRepresentableError, PreconditionError, UnsupportedOperationError
from qspec.operators import (
    blackbox,
    canonical_gamma,
    compose_bound_check,
    constant,
    dual_pairing,
    identity,
    linear,
    op_norm,
    pointwise_product,
    profile,
    represent_form,
    sampled_norm,
    scalar_line,
    star_mul,
    star_unit,
    verify_profile,
    zero_operator,
)
from qspec.spaces import (
    SampleSpec,
    euclidean_space,
    norm,
    pointwise_algebra,
    sample_set,
    scalar_algebra,
    sup_space,
    weighted_one_space,
)

S1 = scalar_algebra()
P2 = pointwise_algebra(2)
P4 = pointwise_algebra(4)


def random_operator(space, rng):
    """A bounded operator vanishing at zero: a profile with random smooth phi times a mixed carrier."""
    a, b, c = rng.normal(size=(3, space.dim))
    kind = rng.integers(3)
    if kind == 0:
        return profile(space, lambda X: np.sin(X @ a) + 0.3, name="p_sin")
    if kind == 1:
        return linear(space, rng.normal(size=(space.dim, space.dim)), name="lin")
    return blackbox(space, lambda X: np.tanh(X * b) * np.cos(X @ c)[:, None], name="bb")


def test_norm_examples():
    e = star_unit(P4)
    est = op_norm(e)
    assert est.value == 1.0 and est.kind == "exact"
    assert op_norm(zero_operator(P4)).value == 0.0
    s = sample_set(P4, SampleSpec(count=200), seed=0)
    assert math.isinf(op_norm(constant(P4, [1.0, 0, 0, 0]), s).value)


def test_sampled_norm_is_lower_bound_for_profile():
    F = profile(S1, lambda X: np.sin(X[:, 0]), phi_range=(-1.0, 1.0))
    s = sample_set(S1, SampleSpec(count=500), seed=0)
    assert sampled_norm(F, s.points) <= op_norm(F).value


def test_linear_norms_exact():
    # induced norms: sup -> max row sum, euclidean -> largest singular value
    A = np.array([[1.0, -2.0], [0.5, 0.5]])
    assert op_norm(linear(sup_space(2), A)).value == pytest.approx(3.0)
    assert op_norm(linear(euclidean_space(2), A)).value == pytest.approx(np.linalg.norm(A, 2))
    assert op_norm(linear(weighted_one_space([1.0, 1.0]), A)).value == pytest.approx(2.5)


def test_star_examples():
    F1 = blackbox(S1, lambda X: X.copy())
    F2 = blackbox(S1, lambda X: X**2)
    assert star_mul(F1, F2)(np.array([2.0]))[0] == 4.0
    I = identity(P2)
    assert np.array_equal(star_mul(I, I)(np.array([2.0, 0.0])), [2.0, 0.0])
    with pytest.raises(UnsupportedOperationError):
        star_mul(identity(sup_space(2)), identity(sup_space(2)))


def test_star_at_zero_and_unit():
    e = star_unit(P2)
    F = blackbox(P2, lambda X: np.sin(X) + 0.5)
    z = np.zeros(2)
    assert np.array_equal(star_mul(F, F)(z), F(z) * F(z))
    s = sample_set(P2, SampleSpec(count=300), seed=2).including_zero()
    assert np.array_equal(star_mul(e, F)(s), F(s))
    assert np.array_equal(star_mul(F, e)(s), F(s))


def test_unit_is_unique_among_candidates():
    # any other profile c ||x|| 1 with c != 1 fails the unit law
    s = sample_set(P2, SampleSpec(count=50), seed=0).points
    F = identity(P2)
    for c in (0.5, 2.0):
        u = profile(P2, lambda X, c=c: np.full(len(X), c), at_zero=P2.unit())
        assert not np.allclose(star_mul(u, F)(s), F(s))


@pytest.mark.parametrize("seed", range(5))
def test_star_laws(seed):
    rng = np.random.default_rng(seed)
    s = sample_set(P4, SampleSpec(count=400), seed=seed)
    F1, F2, F3 = (random_operator(P4, rng) for _ in range(3))
    X = s.points
    assert np.array_equal(star_mul(F1, F2)(X), star_mul(F2, F1)(X))
    lhs = star_mul(star_mul(F1, F2), F3)(X)
    rhs = star_mul(F1, star_mul(F2, F3))(X)
    scale = np.maximum(1.0, np.abs(lhs))
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * scale * 10)
    assert sampled_norm(star_mul(F1, F2), X) <= sampled_norm(F1, X) * sampled_norm(F2, X) * (1 + 1e-12)


@given(st.integers(0, 10_000), st.floats(-5, 5, allow_nan=False))
def test_p_norm_axioms_on_matched_samples(seed, alpha):
    rng = np.random.default_rng(seed)
    X = sample_set(P4, SampleSpec(count=200), seed=seed).points
    F1, F2 = random_operator(P4, rng), random_operator(P4, rng)
    p = lambda F: sampled_norm(F, X)  # noqa: E731
    assert p(alpha * F1) == pytest.approx(abs(alpha) * p(F1), rel=1e-12, abs=1e-300)
    assert p(F1 + F2) <= (p(F1) + p(F2)) * (1 + 1e-12)


def test_star_continuity_along_sequence():
    rng = np.random.default_rng(4)
    X = sample_set(P4, SampleSpec(count=300), seed=4).points
    F1, F2, G = (random_operator(P4, rng) for _ in range(3))
    target = star_mul(F1, F2)
    gaps = []
    for n in (1, 10, 100, 1000):
        Fn1, Fn2 = F1 + (1.0 / n) * G, F2 + (1.0 / n) * G
        gaps.append(sampled_norm(star_mul(Fn1, Fn2) - target, X))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-2 * gaps[0]


def test_profile_star_preserves_structure():
    F = profile(P4, lambda X: np.cos(X[:, 0]), phi_range=(-1.0, 1.0))
    s = sample_set(P4, SampleSpec(count=100), seed=0)
    G = star_mul(F, F)
    assert G.structure == "profile"
    assert verify_profile(G, canonical_gamma(P4), s)


def test_compose_bound_examples(sin_abs, ssamples):
    I = identity(S1)
    rep = compose_bound_check(I, I, ssamples)
    assert rep.passed and rep.bound == 1.0 and rep.composed == pytest.approx(1.0)
    half = linear(S1, [[0.5]])
    rep = compose_bound_check(sin_abs, half, ssamples)
    assert rep.passed and rep.bound == 0.5 and rep.composed <= 0.5
    with pytest.raises(PreconditionError):
        compose_bound_check(star_unit(S1), I, ssamples)


def test_duality_examples():
    rep = dual_pairing([3.0, -4.0], [], euclidean_space(2))
    assert rep.witness_value == pytest.approx(5.0) and rep.witness_norm == pytest.approx(1.0) and rep.attained
    rep = dual_pairing([1.0, -2.0], [], sup_space(2))
    assert rep.witness_value == 2.0 and rep.attained
    with pytest.raises(PreconditionError):
        dual_pairing([0.0, 0.0], [], sup_space(2))


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).filter(lambda v: any(v)))
def test_duality_bound_on_probes(x):
    sp = weighted_one_space([0.5, 1.0, 2.0])
    probes = [linear(sp, np.array([[1.0, -1.0, 0.5]]), space_out=scalar_line(),
                     name="a"),
              linear(sp, np.array([[0.0, 2.0, -3.0]]), space_out=scalar_line(),
                     name="b")]
    rep = dual_pairing(x, probes, sp)
    assert rep.passed


def test_represent_form_recovers_radial_vector():
    sp = euclidean_space(3)
    qp = qpm.scaled_inner(sp, 1.0)
    v = np.array([1.0, -2.0, 0.5])
    h = lambda X, Y: qpm.qp_eval(qp, norm(sp, X)[:, None] * v[None, :], Y)  # noqa: E731
    s = sample_set(sp, SampleSpec(count=40), seed=0)
    F = represent_form(h, qp, s)
    X = s.points
    expect = norm(sp, X)[:, None] * v
    assert np.allclose(F(X), expect, rtol=1e-12, atol=1e-12)
    assert np.array_equal(F(np.zeros(3)), np.zeros(3))


def test_represent_form_zero_and_rejections():
    sp = euclidean_space(2)
    qp = qpm.scaled_inner(sp, 1.0)
    s = sample_set(sp, SampleSpec(count=30), seed=0)
    F = represent_form(lambda X, Y: np.zeros(len(X)), qp, s)
    assert np.all(F(s.points) == 0)
    with pytest.raises(NotRepresentableError):
        represent_form(lambda X, Y: norm(sp, Y), qp, s)
    ip = qpm.integral_pair(weighted_one_space([1.0, 1.0]))
    with pytest.raises(PreconditionError):
        represent_form(lambda X, Y: np.zeros(len(X)), ip, s)


def test_pointwise_product_is_not_star():
    F = identity(P2)
    x = np.array([2.0, 1.0])
    assert np.array_equal(pointwise_product(F, F)(x), [4.0, 1.0])
    assert np.array_equal(star_mul(F, F)(x), [2.0, 0.5])

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qspec import quasi_product as qpm
from qspec.errors import DomainError, PreconditionError
from qspec.operators import canonical_gamma, identity
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


def shipped():
    return [
        qpm.scalar_product(),
        qpm.scaled_inner(euclidean_space(3), 1.0),
        qpm.integral_pair(weighted_one_space([1.0, 0.5, 2.0, 1.0])),
        qpm.integral_sup(sup_space(3, [0.5, 1.0, 1.5])),
        qpm.weighted_sum(pointwise_algebra(4)),
    ]


def test_eval_examples():
    ip = qpm.integral_pair(weighted_one_space([1.0] * 4))
    assert ip([1, 0, 0, 0], [0, 1, 0, 0]) == 1.0
    assert ip([1, -1, 0, 0], [1, -1, 0, 0]) == 0.0
    si = qpm.scaled_inner(euclidean_space(2), 1.0)
    # c(e1) = 1/2 + 1
    assert si([1, 0], [1, 0]) == pytest.approx(1.5, abs=1e-15)


def test_integral_sup_domain():
    q = qpm.integral_sup(sup_space(2, [1.0, 1.0]))
    with pytest.raises(DomainError):
        q([-1, 0], [1, 1])
    assert q([0, 0], [2, -1]) == 0.0
    # (1)(max(2,-5)) vs (2-5)(max(1,0)): hand-computed asymmetry
    assert q([1, 0], [2, 5]) == 5.0 and q([2, 5], [1, 0]) == 7.0


@pytest.mark.parametrize("qp", shipped(), ids=lambda q: q.kind)
def test_axioms_on_ten_thousand_pairs(qp):
    s = sample_set(qp.space, SampleSpec(count=2000), seed=3)
    rep = qpm.qp_check_axioms(qp, s, n_pairs=10_000)
    assert rep.passed, [(r.name, r.worst_margin) for r in rep.results if not r.passed]
    assert rep["left_linear"].worst_margin >= -1e-12
    assert rep["zero_left"].worst_margin == 0.0


def test_scalar_product_residual_zero():
    qp = qpm.scalar_product()
    rep = qpm.qp_check_axioms(qp, sample_set(qp.space, SampleSpec(count=500), seed=0), n_pairs=10_000)
    assert rep["symmetric"].worst_margin == 0.0


def test_integral_pair_degeneracy_witness():
    qp = qpm.integral_pair(weighted_one_space([1.0, 0.5, 2.0]))
    rep = qpm.qp_check_axioms(qp, sample_set(qp.space, SampleSpec(count=200), seed=0))
    w = rep.degeneracy_witness
    assert w is not None and norm(qp.space, w) > 0 and abs(qp(w, w)) <= 1e-15


def test_integral_sup_bound_and_asymmetry():
    sp = sup_space(3, [0.5, 1.0, 1.5])
    qp = qpm.integral_sup(sp)
    assert qp.c_bar == pytest.approx(3.0)
    rep = qpm.qp_check_axioms(qp, sample_set(sp, SampleSpec(count=500), seed=1))
    assert rep["bounded"].passed
    assert not qp.flags.symmetric and not qp.flags.quasi_symmetric
    x, y = rep.asymmetry_witness
    assert abs(qp(x, y) - qp(y, x)) > 1e-6


def test_scalar_capabilities(sctx, ssamples):
    rep = qpm.qp_check_capabilities(sctx.qp, sctx.g, ssamples)
    for name in ("left_integral_domain", "preserves_positivity", "square_bounded_below"):
        assert rep[name].status == "consistent"
    assert rep.empirical_k_lower == pytest.approx(1.0, abs=1e-12)
    assert rep.mismatches == []


def test_scalar_identity_g_refutes_positivity():
    sp = scalar_algebra()
    qp = qpm.scalar_product(sp)
    s = sample_set(sp, SampleSpec(count=200), seed=0)
    rep = qpm.qp_check_capabilities(qp, identity(sp), s)
    r = rep["preserves_positivity"]
    assert r.status == "refuted"
    w = r.witness
    gx = w["x"]
    assert qp(w["y1"], gx) >= 0 and qp(w["y2"], gx) >= 0
    assert qp(w["y1"] * w["y2"], gx) < 0


def test_weighted_sum_dim2_counterexamples():
    sp = pointwise_algebra(2)
    qp = qpm.weighted_sum(sp)
    s = sample_set(sp, SampleSpec(count=1000), seed=0)
    g = canonical_gamma(sp)
    rep = qpm.qp_check_capabilities(qp, g, s, max_points=1000)
    assert rep["preserves_positivity"].status == "refuted"
    assert rep["left_integral_domain"].status == "refuted"
    y = rep["left_integral_domain"].witness["y"] if isinstance(rep["left_integral_domain"].witness, dict) \
        else rep["left_integral_domain"].witness
    assert rep.mismatches == []
    # hand-built witness from the definition: y1=(1,-eps), y2=(-eps,1)
    eps = 0.1
    gx = g(np.array([1.0, 0.0]))
    y1, y2 = np.array([1, -eps]), np.array([-eps, 1])
    assert qp(y1, gx) > 0 and qp(y2, gx) > 0 and qp(y1 * y2, gx) < 0
    assert y is not None


def test_declared_flag_refuted_is_mismatch():
    sp = pointwise_algebra(2)
    qp = qpm.with_flags(qpm.weighted_sum(sp), preserves_positivity=True)
    rep = qpm.qp_check_capabilities(qp, canonical_gamma(sp), sample_set(sp, SampleSpec(count=300), seed=0))
    assert [r.name for r in rep.mismatches] == ["preserves_positivity"]


def test_g_vanishing_rejected():
    sp = pointwise_algebra(2)
    qp = qpm.weighted_sum(sp)
    s = sample_set(sp, SampleSpec(count=50), seed=0)
    with pytest.raises(PreconditionError):
        qpm.qp_check_capabilities(qp, lambda X: np.zeros_like(X), s)


KAPPA = 1.0 + 1e-9


@pytest.mark.parametrize("qp", shipped(), ids=lambda q: q.kind)
@given(data=st.data())
def test_joint_continuity_proxy(qp, data):
    d = qp.space.dim
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    x, y = rng.normal(size=d), rng.normal(size=d)
    eps = data.draw(st.floats(1e-8, 1.0))
    dx, dy = eps * rng.normal(size=d), eps * rng.normal(size=d)
    if qp.has_domain_restriction:
        x, y = np.abs(x) + 0.1, np.abs(y) + 0.1
        dx, dy = np.abs(dx), np.abs(dy)
    n = lambda v: norm(qp.space, v)  # noqa: E731
    lhs = abs(qp(x + dx, y + dy) - qp(x, y))
    rhs = qp.c_bar * (n(dx) * (n(y) + n(dy)) + n(x) * n(dy))
    if qp.kind == "scaled_inner":
        # c(y) varies with y; its Lipschitz constant is 1 so one extra |<x, y+dy>| term appears
        rhs += n(x) * n(y + dy) * n(dy)
    assert lhs <= rhs * KAPPA + 1e-12

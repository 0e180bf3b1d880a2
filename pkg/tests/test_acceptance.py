"""The twelve acceptance criteria at their stated tolerances, one PASS/FAIL line each."""

import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from qspec import quasi_product as qpm
from qspec.calculus import FuncSpec, PolySpec, cont_calculus, named_function, poly_bound_check
from qspec.definite import (
    abs_parts,
    alg_sqrt,
    is_g_positive,
    pointwise_context,
    scalar_context,
    star_sqrt,
)
from qspec.errors import NonConvergenceError
from qspec.harness.cli import main
from qspec.harness.report import strip_timing
from qspec.operators import (
    blackbox,
    canonical_gamma,
    op_norm,
    pointwise_product,
    profile,
    sampled_norm,
    star_mul,
    star_unit,
)
from qspec.spaces import (
    SampleSpec,
    euclidean_space,
    norm,
    pointwise_algebra,
    sample_set,
    sup_space,
    weighted_one_space,
)
from qspec.spectral import Partition, bracket, decompose, indicator, null_set, sandwich_check, stieltjes_scalar
from qspec.spectral_ops import (
    SpectralOperatorClass,
    cauchy_correspondence,
    lower_endpoint_blind,
    profile_limit,
    profile_projection,
    sp_axiom_check,
    sp_class_combine,
    sp_integral,
)


def verdict(n: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def scalar():
    ctx = scalar_context()
    s = sample_set(ctx.space, SampleSpec(count=1000), seed=0)
    F = profile(ctx.space, lambda X: np.sin(X[:, 0]), phi_range=(-1.0, 1.0), name="sin_abs")
    return ctx, s, F


@pytest.fixture(scope="module")
def pw16():
    ctx = pointwise_context(16)
    s = sample_set(ctx.space, SampleSpec(count=1000), seed=0)
    F = profile(ctx.space, lambda X: np.sin(X.sum(axis=1)), phi_range=(-1.0, 1.0), name="sin_sum")
    return ctx, s, F


def seeded(space, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, space.dim))
    c = rng.uniform(0.2, 3.0)
    return blackbox(space, lambda X: np.sin(c * X + b) * np.tanh(X @ a)[:, None], name=f"F{seed}")


def test_criterion_01_quasi_product_axioms():
    pairings = [
        qpm.scalar_product(),
        qpm.scaled_inner(euclidean_space(4), 1.0),
        qpm.integral_pair(weighted_one_space([1.0, 0.5, 2.0, 0.25])),
        qpm.integral_sup(sup_space(4, [0.5, 1.0, 1.5, 2.0])),
        qpm.weighted_sum(pointwise_algebra(4)),
    ]
    worst, ok = 0.0, True
    for qp in pairings:
        rep = qpm.qp_check_axioms(qp, sample_set(qp.space, SampleSpec(count=2000), seed=11), tol=1e-9,
                                  n_pairs=10_000)
        ok &= rep.passed
        worst = min(worst, min(r.worst_margin for r in rep.results if r.name != "asymmetry_witnessed"))
        if qp.kind == "integral_pair":
            w = rep.degeneracy_witness
            degenerate = w is not None and norm(qp.space, w) > 0 and qp(w, w) == 0.0
    verdict(1, bool(ok and worst >= -1e-9 and degenerate),
            f"5 pairings x 10^4 pairs, worst margin {worst:.2e}; integral_pair [x,x]=0 witness {degenerate}")


def test_criterion_02_capability_matrix(scalar):
    ctx, s, _ = scalar
    rep = qpm.qp_check_capabilities(ctx.qp, ctx.g, s, max_points=1000)
    names = ("left_integral_domain", "preserves_positivity", "square_bounded_below")
    scalar_ok = all(rep[n].status == "consistent" for n in names) and abs(rep.empirical_k_lower - 1) <= 1e-12
    sp = pointwise_algebra(2)
    wrep = qpm.qp_check_capabilities(qpm.weighted_sum(sp), canonical_gamma(sp),
                                     sample_set(sp, SampleSpec(count=1000), seed=0), max_points=1000)
    refuted = [n for n in ("preserves_positivity", "left_integral_domain") if wrep[n].status == "refuted"]
    verdict(2, bool(scalar_ok and len(refuted) == 2),
            f"SCALAR certifies all three (k={rep.empirical_k_lower!r}); weighted_sum dim 2 refutes {refuted}")


def test_criterion_03_operator_space_laws():
    sp = pointwise_algebra(4)
    e = star_unit(sp)
    pe = op_norm(e)
    X = sample_set(sp, SampleSpec(count=200), seed=5).points
    Xz = np.vstack([np.zeros((1, 4)), X])
    rng = np.random.default_rng(0)
    bad = []
    for i in range(1000):
        F1, F2 = seeded(sp, 2 * i), seeded(sp, 2 * i + 1)
        alpha = rng.uniform(-4, 4)
        p1, p2 = sampled_norm(F1, X), sampled_norm(F2, X)
        if sampled_norm(F1 + F2, X) > (p1 + p2) * (1 + 1e-12):
            bad.append(("triangle", i))
        if abs(sampled_norm(alpha * F1, X) - abs(alpha) * p1) > 1e-12 * abs(alpha) * p1:
            bad.append(("homogeneity", i))
        if sampled_norm(star_mul(F1, F2), X) > p1 * p2 * (1 + 1e-12):
            bad.append(("submultiplicative", i))
        if not np.array_equal(star_mul(e, F1)(Xz), F1(Xz)):
            bad.append(("unit", i))
    verdict(3, pe.value == 1.0 and pe.kind == "exact" and not bad,
            f"p(e)={pe.value} ({pe.kind}); 10^3 pairs, violations {bad[:3]}")


def test_criterion_04_definite_identities(scalar, pw16):
    bad = []
    for i in range(1000):
        ctx, s, _ = scalar if i % 2 else pw16
        X = s.points[:200]
        F = seeded(ctx.space, i)
        A, P, M = abs_parts(F, ctx)
        FX, AX, PX, MX = F(X), A(X), P(X), M(X)
        one = null_set(P).indicator(X)
        checks = {
            "|F|^2=F^2": np.array_equal(AX * AX, FX * FX),
            "F+F-=0": np.all(PX * MX == 0),
            "F+1_S=0": np.all(PX * one == 0),
            "F-1_S=F-": np.array_equal(MX * one, MX),
            "F1_S=-F-": np.array_equal(FX * one, -MX),
            "F(1-1_S)=F+": np.array_equal(FX * (1 - one), PX),
        }
        bad += [(k, i) for k, v in checks.items() if not v]
    verdict(4, not bad, f"10^3 operators on SCALAR/POINTWISE-16, exact identity failures {bad[:3]}")


def test_criterion_05_square_roots(scalar, pw16):
    worst = 0.0
    for ctx, s, _ in (scalar, pw16):
        for seed in range(5):
            a = np.random.default_rng(seed).normal(size=ctx.space.dim)
            sp = ctx.space
            F = blackbox(sp, lambda X, a=a, sp=sp: np.minimum(1.0, norm(sp, X))[:, None] * (1 + np.sin(X + a)) / 2)
            G = alg_sqrt(F, ctx, tol=1e-8, max_iter=200)(s.points)
            worst = max(worst, float(np.max(np.abs(G * G - F(s.points)))))
    ctx, s, _ = scalar
    F = blackbox(ctx.space, lambda X: np.minimum(np.abs(X), 1.0) * (1 + np.cos(3 * X)) / 2)
    agree = float(np.max(np.abs(alg_sqrt(F, ctx, start="zero")(s.points) - alg_sqrt(F, ctx, start="unit")(s.points))))
    e = star_unit(ctx.space)
    Xz = s.including_zero()
    e_err = float(np.max(np.abs(star_sqrt(e, ctx, samples=s)(Xz) - e(Xz))))
    e16 = star_unit(pw16[0].space)
    Yz = pw16[1].including_zero()
    e_err = max(e_err, float(np.max(np.abs(star_sqrt(e16, pw16[0], samples=pw16[1])(Yz) - e16(Yz)))))
    nine = blackbox(ctx.space, lambda X: np.where(X != 0, 9.0, 0.0))
    try:
        alg_sqrt(nine, ctx, max_iter=200)(np.array([1.0]))
        raised = False
    except NonConvergenceError:
        raised = True
    verdict(5, worst <= 1e-8 and agree <= 1e-8 and e_err <= 1e-8 and raised,
            f"residual {worst:.1e}, schedules differ {agree:.1e}, star_sqrt(e) error {e_err:.1e}, "
            f"value-9 raises {raised}")


def test_criterion_06_product_positivity(scalar):
    ctx, s, _ = scalar
    violations, nonpositive_inputs = 0, 0
    for seed in range(1000):
        a, b, c, d = np.random.default_rng(seed).uniform(0.1, 3, size=4)
        F = blackbox(ctx.space, lambda X, a=a, b=b: np.abs(X) * (1.0 + np.sin(a * X + b)))
        H = blackbox(ctx.space, lambda X, c=c, d=d: np.tanh(np.abs(c * X)) * (1.1 + np.cos(d * X)))
        nonpositive_inputs += not (is_g_positive(F, ctx, s) and is_g_positive(H, ctx, s))
        violations += not is_g_positive(pointwise_product(F, H), ctx, s)
    verdict(6, violations == 0 and nonpositive_inputs == 0,
            f"10^3 g-positive pairs on SCALAR, product violations {violations}")


def test_criterion_07_indicators_and_sandwich(scalar, pw16):
    ok, worst = True, math.inf
    for ctx, s, F in (scalar, pw16):
        X = s.points
        br = bracket(F, ctx, s)
        lams = np.linspace(br.m - 0.5, br.M + 0.5, 60)
        ind = np.stack([indicator(F, ctx, lam).indicator(X) for lam in lams])
        ok &= bool(np.all(np.diff(ind, axis=0) >= 0))
        ok &= not indicator(F, ctx, br.m).contains(X).any()
        ok &= bool(indicator(F, ctx, br.M).contains(X).all())
        for via in ("indicator", "compose"):
            rep = sandwich_check(F, ctx, Partition.uniform(br.m, br.M, 50), s, via=via)
            ok &= rep["passed"]
            worst = min(worst, rep["worst_margin"])
    verdict(7, bool(ok), f"monotone, endpoint and sandwich checks on SCALAR/POINTWISE-16, worst margin {worst:.1e}")


def test_criterion_08_scalar_identity(scalar, pw16):
    ident, first_order = 0.0, True
    for ctx, s, F in (scalar, pw16):
        dec = decompose(F, ctx, (25, 50, 100, 200, 400), s)
        ident = max(ident, dec.identity_residual)
        r = [dec.stieltjes_residuals[n] for n in sorted(dec.stieltjes_residuals)]
        first_order &= all(r[k] <= dec.partitions[n].mesh for k, n in enumerate(sorted(dec.partitions)))
        first_order &= all(b <= 1.2 * a / 2 for a, b in zip(r, r[1:]))
    ctx, s, _ = scalar
    bb = blackbox(ctx.space, lambda X: np.tanh(X) * np.abs(X))
    x = s.points[:50]
    dv = np.tanh(x[:, 0]) * x[:, 0] ** 2
    br = bracket(bb, ctx, s)
    errs = [float(np.max(np.abs(stieltjes_scalar(bb, ctx, x, Partition.uniform(br.m, br.M, n)) - dv) / x[:, 0] ** 2))
            for n in (25, 50, 100, 200, 400)]
    first_order &= all(b <= 1.2 * a / 2 for a, b in zip(errs, errs[1:]))
    verdict(8, ident <= 1e-9 and first_order,
            f"identity residual {ident:.1e}; Stieltjes residuals first-order ({errs[0]:.1e} -> {errs[-1]:.1e})")


def test_criterion_09_spectral_convergence(scalar, pw16):
    rows, ok = [], True
    t0 = time.perf_counter()
    for ctx, s, F in (scalar, pw16):
        dec = decompose(F, ctx, (25, 50, 100, 200, 400), s, halving_factor=1.2)
        ok &= dec.converges and dec.halving
        ok &= all(dec.errors[n] <= dec.k2_max * dec.partitions[n].mesh for n in dec.errors)
        rows.append(" ".join(f"{err:.4f}" for _, _, err in dec.table()))
    elapsed = time.perf_counter() - t0
    verdict(9, bool(ok and elapsed < 10), f"errors [{rows[0]}] / [{rows[1]}] in {elapsed:.2f}s")


def test_criterion_10_calculus(scalar):
    ctx, s, F = scalar
    tol = 1e-3
    res = cont_calculus(F, ctx, named_function("exp"), tol=tol, samples=s)
    v = float(res.operator(np.array([math.pi / 2]))[0])
    oracle = (math.pi / 2) * math.exp(math.sin(math.pi / 2))
    kbars = [res.k_bar]
    for coeffs in [(0.0, 1.0), (1.0, -2.0, 0.5), (0.3, 0.0, 0.0, -1.0), (2.0, 0.0, -1.0, 0.0, 0.25)]:
        kbars.append(poly_bound_check(F, ctx, PolySpec(coeffs), s)["k_bar"])
    ok = abs(v - oracle) <= 1e-6 and max(kbars) <= 1 + 1e-9 and res.independence_gap <= 2 * tol and res.cauchy_ok
    verdict(10, bool(ok), f"exp value {v:.9f} vs {oracle:.9f}; max k_bar {max(kbars):.9f}; "
                          f"Bernstein/Chebyshev gap {res.independence_gap:.1e}")


def test_criterion_11_spectral_operators():
    sp = sup_space(2)

    def psi(X):
        return (1 + np.sin(X[:, 0])) / 2

    E = profile_projection(sp, psi, 0.0, 1.0)
    s = sample_set(sp, SampleSpec(count=1000), seed=0)
    X = s.points
    nx = norm(sp, X)
    oracle_ok = True
    for name in ("exp", "sin", "identity", "abs"):
        f = named_function(name)
        for n in (25, 100, 400):
            P = Partition.uniform(0.0, 1.0, n)
            err = norm(sp, sp_integral(E, f, P)(X) - profile_limit(E, f)(X))
            oracle_ok &= bool(np.all(err <= f.modulus(P.mesh, 0.0, 1.0) * nx * (1 + 1e-12)))
    profile_pass = sp_axiom_check(E, s, interval_fuzz_seed=0).passed
    broken = sp_axiom_check(lower_endpoint_blind(sp, psi, 0.0, 1.0), s, interval_fuzz_seed=0)
    broken_fails = not broken.passed and broken["multiplicative"].witness["x"] is not None
    P = Partition.uniform(0.0, 1.0, 100)
    cls = SpectralOperatorClass(E, P)
    f1, f2 = named_function("sin"), named_function("exp")
    linear = all(
        np.array_equal(sp_class_combine(cls, a, f1, f2)(X), sp_integral(E, f1.scaled(a) + f2, P)(X))
        for a in (-2.5, 0.0, 0.5, 3.0)
    )
    seq = [FuncSpec(lambda t, k=k: np.exp(t) + np.cos(k * t) / k, f"f{k}")
           for k in (1, 2, 4, 8, 16, 32, 64)]
    rows = cauchy_correspondence(E, seq, f2, P, s)
    cauchy = all(d <= c * (1 + 1e-12) for d, c in rows)
    verdict(11, bool(oracle_ok and profile_pass and broken_fails and linear and cauchy),
            f"oracle {oracle_ok}, profile axioms {profile_pass}, broken fixture fails {broken_fails}, "
            f"linearity exact {linear}, Cauchy correspondence {cauchy}")


def test_criterion_12_determinism(tmp_path, capsys):
    codes = [main(["verify", "scalar_showcase", "--out", str(tmp_path / k)]) for k in ("a", "b")]
    capsys.readouterr()
    a, b = (strip_timing(json.loads((tmp_path / k / "report.json").read_text())) for k in ("a", "b"))
    same = a == b
    key = [(c["name"], c["status"], c["margin"]) for c in a["checks"]]
    verdict(12, same and codes == [0, 0] and len(key) > 0,
            f"two verify runs, {len(key)} checks, identical statuses and margins {same}")

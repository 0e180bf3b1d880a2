"""Verification suites driven by a :class:`RunConfig`."""

from __future__ import annotations

import itertools
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import __version__
from ..calculus import PolySpec, cont_calculus, func_spectral_integral, named_function, poly_bound_check
from ..definite import abs_parts, definite_value, is_g_positive, pointwise_product, product_counterexample, star_sqrt
from ..errors import NonConvergenceError, QSpecError
from ..operators import op_norm, sampled_norm, star_mul, star_unit
from ..quasi_product import qp_check_axioms, qp_check_capabilities
from ..spaces import norm, sample_set
from ..spectral import (
    Partition,
    bracket,
    decompose,
    indicator,
    null_set,
    rayleigh_bound_check,
    sandwich_check,
    validate_gamma,
)
from ..spectral_ops import (
    IntervalUnion,
    SpectralOperatorClass,
    profile_limit,
    profile_projection,
    sp_axiom_check,
    sp_class_combine,
    sp_integral,
    sp_nondegeneracy_check,
)
from .config import RunConfig, build_context, build_functions, build_operator

STATUSES = ("pass", "fail", "evidence-only")


@dataclass
class SuiteReport:
    meta: dict
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def failed(self) -> list:
        return [c for c in self.checks if c["status"] == "fail"]

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0

    def to_dict(self) -> dict:
        return {"meta": self.meta, "checks": self.checks, "tables": self.tables}


def _jsonable(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(a) for a in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(a) for k, a in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(a) for a in v]
    return repr(v)


class _Recorder:
    def __init__(self, report: SuiteReport):
        self.report = report

    def add(self, name: str, anchor: str, status: str, margin=None, witness=None, timing: float = 0.0):
        assert status in STATUSES
        self.report.checks.append({
            "name": name,
            "anchor": anchor,
            "status": status,
            "margin": _jsonable(margin),
            "witness": _jsonable(witness),
            "timing": round(float(timing), 6),
        })

    @contextmanager
    def timed(self):
        box = {"t0": time.perf_counter()}
        yield box
        box["dt"] = time.perf_counter() - box["t0"]


def _ok(flag: bool) -> str:
    return "pass" if flag else "fail"


def _first_diff(A, B, X) -> Optional[np.ndarray]:
    rows = np.flatnonzero(np.any(A != B, axis=1))
    return None if not len(rows) else X[rows[0]]


# -- suites ---------------------------------------------------------------------------------


def _axioms(rec, env):
    t0 = time.perf_counter()
    rep = qp_check_axioms(env["ctx"].qp, env["samples"], tol=env["cfg"].tol("axioms"))
    dt = time.perf_counter() - t0
    for r in rep.results:
        rec.add(f"axiom:{r.name}", "Definition 1", _ok(r.passed), r.worst_margin, r.witness, dt / len(rep.results))
    if rep.degeneracy_witness is not None:
        rec.add("axiom:degenerate_diagonal", "Definition 1", "evidence-only", 0.0, rep.degeneracy_witness)


def _capabilities(rec, env):
    ctx = env["ctx"]
    t0 = time.perf_counter()
    rep = qp_check_capabilities(ctx.qp, ctx.g, env["samples"], tol=env["cfg"].tol("definite"))
    dt = time.perf_counter() - t0
    for name, r in rep.results.items():
        if r.status == "not_applicable":
            status = "evidence-only"
        elif r.mismatch:
            status = "fail"
        elif r.status == "consistent":
            status = "pass"
        else:
            status = "evidence-only"
        margin = rep.empirical_k_lower if name == "square_bounded_below" else None
        rec.add(f"capability:{name}", "Definition 3", status, margin,
                {"declared": r.declared, "status": r.status, "witness": r.witness}, dt / max(1, len(rep.results)))
    rec.add("capability:uniform_condition", "Definition 8", "evidence-only", float(ctx.uniform_condition))


def _operator_space(rec, env):
    ctx, smp, ops = env["ctx"], env["samples"], env["ops"]
    X = smp.including_zero()
    e = star_unit(ctx.space)
    with rec.timed() as t:
        pe = op_norm(e, smp)
    rec.add("unit_norm", "Theorem 5", _ok(pe.value == 1.0 and pe.kind == "exact"), 1.0 - pe.value, None, t["dt"])
    family = ops + [ctx.gamma]
    for F in ops:
        with rec.timed() as t:
            w = _first_diff(star_mul(e, F)(X), F(X), X)
        rec.add(f"unit_law:{F.name}", "Theorem 5", _ok(w is None), 0.0, w, t["dt"])
    for F, G in itertools.combinations_with_replacement(family, 2):
        with rec.timed() as t:
            w = _first_diff(star_mul(F, G)(X), star_mul(G, F)(X), X)
        rec.add(f"commutative:{F.name}*{G.name}", "Theorem 5", _ok(w is None), 0.0, w, t["dt"])
        with rec.timed() as t:
            nF, nG = op_norm(F, smp), op_norm(G, smp)
            prod = sampled_norm(star_mul(F, G), X)
            bound = nF.value * nG.value
        exact = nF.kind == nG.kind == "exact"
        status = _ok(prod <= bound * (1 + 1e-12)) if exact else "evidence-only"
        rec.add(f"submultiplicative:{F.name}*{G.name}", "Theorem 5", status, bound - prod, None, t["dt"])
    for F in ops:
        with rec.timed() as t:
            nF = sampled_norm(F, X)
            n2 = sampled_norm(F * -2.0, X)
            tri = sampled_norm(F + ctx.gamma, X)
            ng = sampled_norm(ctx.gamma, X)
        rec.add(f"homogeneity:{F.name}", "Theorem 2", _ok(abs(n2 - 2 * nF) <= 1e-12 * max(1.0, nF)),
                abs(n2 - 2 * nF), None, t["dt"])
        rec.add(f"triangle:{F.name}", "Theorem 2", _ok(tri <= (nF + ng) * (1 + 1e-12)), nF + ng - tri, None, t["dt"])


def _definite(rec, env):
    ctx, smp, ops, cfg = env["ctx"], env["samples"], env["ops"], env["cfg"]
    X = smp.points
    tol = cfg.tol("definite")
    positives = [ctx.gamma]
    for F in ops:
        with rec.timed() as t:
            absF, Fp, Fm = abs_parts(F, ctx)
            A, FX, P, M = absF(X), F(X), Fp(X), Fm(X)
            w1 = _first_diff(A * A, FX * FX, X)
            w2 = _first_diff(P * M, np.zeros_like(P), X)
            S = null_set(Fp)
            one = S.indicator(X)
            w3 = _first_diff(P * one, np.zeros_like(P), X)
            w4 = _first_diff(M * one, M, X)
            w5 = _first_diff(FX * one, -M, X)
            w6 = _first_diff(FX * (1.0 - one), P, X)
            v = is_g_positive(absF, ctx, smp, tol)
        rec.add(f"abs_square:{F.name}", "Lemma 2", _ok(w1 is None), 0.0, w1, t["dt"])
        rec.add(f"abs_positive:{F.name}", "Lemma 2", _ok(v.consistent), v.margin, v.witness)
        rec.add(f"parts_disjoint:{F.name}", "Lemma 4", _ok(w2 is None), 0.0, w2)
        w = next((a for a in (w3, w4, w5, w6) if a is not None), None)
        rec.add(f"null_set_identities:{F.name}", "Lemma 4", _ok(w is None), 0.0, w)
        positives += [absF, Fp]
    capable = bool(ctx.qp.flags.preserves_positivity) and (ctx.qp.flags.square_bounded_below or 0) > 0
    worst, witness = np.inf, None
    with rec.timed() as t:
        for F, H in itertools.combinations_with_replacement(positives, 2):
            v = is_g_positive(pointwise_product(F, H), ctx, smp, tol)
            if v.margin < worst:
                worst, witness = v.margin, (None if v.consistent else {"F": F.name, "H": H.name, "x": v.witness})
    status = _ok(worst >= -tol) if capable else "evidence-only"
    rec.add("product_positivity", "Theorem 7", status, worst, witness, t["dt"])
    if not capable:
        ce = product_counterexample(ctx, smp, tol)
        # margin: the (negative) value [FH(x), g(x)] at the witness point
        margin = None if ce is None else definite_value(pointwise_product(ce[0], ce[1]), ctx, ce[2])
        rec.add("product_positivity_sharpness", "Theorem 7", "evidence-only", margin,
                None if ce is None else {"F": ce[0].name, "H": ce[1].name, "x": ce[2]})
    e = star_unit(ctx.space)
    with rec.timed() as t:
        try:
            Xz = smp.including_zero()
            err = float(np.max(np.abs(star_sqrt(e, ctx, cfg.tol("sqrt"))(Xz) - e(Xz))))
        except NonConvergenceError as exc:
            err = exc.residual or np.inf
    rec.add("star_sqrt_unit", "Corollary 4", _ok(err <= cfg.tol("sqrt")), cfg.tol("sqrt") - err, None, t["dt"])
    for F in ops:
        absF = abs_parts(F, ctx)[0]
        with rec.timed() as t:
            try:
                star_sqrt(absF, ctx, cfg.tol("sqrt"), samples=smp)
                ok, margin, wit = True, 0.0, None
            except NonConvergenceError as exc:
                ok, margin, wit = False, -(exc.residual or np.inf), exc.point
        rec.add(f"star_sqrt:|{F.name}|", "Corollary 4", _ok(ok), margin, wit, t["dt"])


def _spectral(rec, env):
    ctx, smp, ops, cfg = env["ctx"], env["samples"], env["ops"], env["cfg"]
    X = smp.points
    with rec.timed() as t:
        gr = validate_gamma(ctx.gamma, ctx, smp)
    rec.add("gamma_valid", "Definition 6", _ok(gr.passed), gr.k1_range[0], {"k1": gr.k1_range, "k2": gr.k2_range},
            t["dt"])
    if not gr.passed:
        return
    for F in ops:
        with rec.timed() as t:
            dec = decompose(F, ctx, cfg.schedule, smp, cfg.choice)
        env.setdefault("brackets", {})[F.name] = dec.bracket
        rec.add(f"scalar_identity:{F.name}", "Theorem 8", _ok(dec.identity_residual <= cfg.tol("identity")),
                cfg.tol("identity") - dec.identity_residual, None, t["dt"])
        ns = sorted(dec.stieltjes_residuals)
        st_ok = all(dec.stieltjes_residuals[n] <= dec.partitions[n].mesh * (1 + 1e-9) for n in ns)
        rec.add(f"stieltjes_first_order:{F.name}", "Theorem 8", _ok(st_ok),
                min(dec.partitions[n].mesh - dec.stieltjes_residuals[n] for n in ns), None)
        guaranteed = dec.structural or ctx.uniform_condition
        status = _ok(dec.converges) if guaranteed else ("pass" if dec.converges else "evidence-only")
        rec.add(f"spectral_convergence:{F.name}", "Theorem 9", status,
                min(dec.bounds[n] - dec.errors[n] for n in ns), {"note": dec.note})
        rec.add(f"error_halving:{F.name}", "Lemma 8", _ok(dec.halving) if guaranteed else "evidence-only",
                max(dec.errors[b] / dec.errors[a] for a, b in zip(ns, ns[1:])) if len(ns) > 1 else None)
        env.setdefault("tables_out", {})[F.name] = [
            {"n": n, "mesh": dec.partitions[n].mesh, "sup_error": dec.errors[n]} for n in ns
        ]
        br = dec.bracket
        P = Partition.uniform(br.m, br.M, ns[0])
        with rec.timed() as t:
            C = np.stack([indicator(F, ctx, s).contains(X) for s in P.knots], axis=1)
            mono = bool(np.all(C[:, 1:] >= C[:, :-1]))
            ends = bool(not C[:, 0].any() and C[:, -1].all())
            sw = sandwich_check(F, ctx, P, smp)
            swc = sandwich_check(F, ctx, P, smp, via="compose")
        rec.add(f"indicator_monotone:{F.name}", "Lemma 7", _ok(mono), 0.0, None, t["dt"])
        rec.add(f"bracket_endpoints:{F.name}", "Lemma 7", _ok(ends), br.delta, {"m": br.m, "M": br.M})
        rec.add(f"sandwich:{F.name}", "Lemma 7", _ok(sw["passed"]), sw["worst_margin"], sw["witness"])
        rec.add(f"sandwich_compose:{F.name}", "Remark 5", _ok(swc["passed"]), swc["worst_margin"], swc["witness"])
        rb = rayleigh_bound_check(F, ctx, smp, gr.k1_range[0])
        rec.add(f"definite_bound:{F.name}", "Lemma 5", _ok(rb["definite_bound_ok"]), 1 - rb["worst_ratio"], None)
        rec.add(f"rayleigh_box:{F.name}", "Lemma 6", _ok(rb["rayleigh_in_box"]), rb["box"], None)
        if br.loose is not None:
            rec.add(f"bracket_in_loose:{F.name}", "Lemma 7", _ok(bool(br.loose_contains)), None, br.loose)


def _calculus_ops(env):
    return [F for F in env["ops"] if F.vanishes_at_zero()]


def _calculus(rec, env):
    ctx, smp, cfg = env["ctx"], env["samples"], env["cfg"]
    tol = cfg.tol("calculus")
    X = smp.points
    nx = norm(ctx.space, X)
    for F in _calculus_ops(env):
        br = env.get("brackets", {}).get(F.name) or bracket(F, ctx, smp)
        pb = poly_bound_check(F, ctx, PolySpec((0.25, -0.5, 1.0)), smp, br)
        canonical = ctx.gamma_is_canonical
        rec.add(f"poly_bound:{F.name}", "Lemma 10",
                _ok(pb["k_bar"] <= 1 + 1e-9) if canonical else "evidence-only", 1 + 1e-9 - pb["k_bar"],
                {"k_bar": pb["k_bar"], "zero_in_bracket": pb["zero_in_bracket"]})
        for f in env["functions"]:
            tag = f"{f.name}({F.name})"
            with rec.timed() as t:
                try:
                    res = cont_calculus(F, ctx, f, tol, smp, br)
                except NonConvergenceError as exc:
                    res, err = None, exc
            if res is None:
                rec.add(f"calculus_converges:{tag}", "Theorem 11", "fail", None, {"gaps": err.trace}, t["dt"])
                continue
            rec.add(f"calculus_converges:{tag}", "Theorem 11", "pass", tol - res.gaps[-1],
                    {"degree": res.degree}, t["dt"])
            rec.add(f"cauchy_gaps:{tag}", "Theorem 11", _ok(res.cauchy_ok), None, None)
            rec.add(f"independence:{tag}", "Corollary 6", _ok(res.independent), 2 * tol - res.independence_gap,
                    {"chebyshev_degree": res.chebyshev_degree})
            rec.add(f"calculus_bound:{tag}", "Lemma 11", _ok(res.k_bar <= 1 + 1e-9) if canonical else "evidence-only",
                    1 + 1e-9 - res.k_bar, {"k_bar": res.k_bar})
            n = max(cfg.schedule)
            P = Partition.uniform(br.m, br.M, n)
            with rec.timed() as t:
                fi = func_spectral_integral(F, ctx, f, P, cfg.choice)(X)
                dist = float((norm(ctx.space, fi - res.operator(X)) / nx).max())
                bound = 1.1 * f.modulus(P.mesh, P.m, P.M) + tol
            rec.add(f"spectral_integral:{tag}", "Theorem 12", _ok(dist <= bound), bound - dist, None, t["dt"])


def _spectral_ops(rec, env):
    ctx, smp, cfg = env["ctx"], env["samples"], env["cfg"]
    profiles = [F for F in env["ops"] if F.structure == "profile" and F.vanishes_at_zero()]
    if not profiles:
        rec.add("spectral_ops:skipped", "Definition 11", "evidence-only", None, "no profile operator")
        return
    F = profiles[0]
    br = env.get("brackets", {}).get(F.name) or bracket(F, ctx, smp)
    E = profile_projection(ctx.space, F.phi, br.m, br.M, f"E[{F.name}]")
    X = smp.points
    nx = norm(ctx.space, X)
    with rec.timed() as t:
        ax = sp_axiom_check(E, smp, cfg.effective_seed())
    for name, c in ax.checks.items():
        rec.add(f"projection_axiom:{name}", "Definition 11", _ok(c.passed), 0.0, c.witness, t["dt"] / len(ax.checks))
    P = Partition.uniform(br.m, br.M, max(cfg.schedule))
    cls = SpectralOperatorClass(E, P, choice=cfg.choice)
    for f in env["functions"]:
        with rec.timed() as t:
            I = sp_integral(E, f, P, cfg.choice)(X)
            L = profile_limit(E, f)(X)
            err = norm(ctx.space, I - L) / nx
            om = f.modulus(P.mesh, P.m, P.M)
        rec.add(f"spectral_operator:{f.name}", "Definition 12", _ok(bool(np.all(err <= om * (1 + 1e-9) + 1e-15))),
                om - float(err.max()), None, t["dt"])
        ident = named_function("identity")
        combo = sp_class_combine(cls, 2.0, f, ident)(X)
        direct = sp_integral(E, f.scaled(2.0) + ident, P, cfg.choice)(X)
        w = _first_diff(combo, direct, X)
        rec.add(f"linearity:{f.name}", "Theorem 13", _ok(w is None), 0.0, w)
    nd = sp_nondegeneracy_check(E, smp, grid=100)
    rec.add("nondegeneracy", "Theorem 13", "evidence-only", float(len(nd.unwitnessed)),
            {"cells": nd.cells, "unwitnessed": nd.unwitnessed[:5]})


SUITE_FUNCS = {
    "axioms": _axioms,
    "capabilities": _capabilities,
    "operator_space": _operator_space,
    "definite": _definite,
    "spectral": _spectral,
    "calculus": _calculus,
    "spectral_ops": _spectral_ops,
}
NEEDS_ALGEBRA = ("operator_space", "definite", "spectral", "calculus", "spectral_ops")


def run_suite(cfg: RunConfig, suites: list | None = None) -> SuiteReport:
    """Run the selected suites (default: the config's list) and collect checks and tables."""
    t0 = time.perf_counter()
    selected = list(cfg.suites if suites is None else suites)
    seed = cfg.effective_seed()
    ctx = build_context(cfg)
    spec = cfg.sample_spec()
    report = SuiteReport({
        "config": cfg.name,
        "seed": seed,
        "version": __version__,
        "suites": selected,
        "space": ctx.space.id,
        "quasi_product": ctx.qp.kind,
        "samples": spec.count,
    })
    rec = _Recorder(report)
    if selected:
        env = {
            "cfg": cfg,
            "ctx": ctx,
            "samples": sample_set(ctx.space, spec, seed),
            "ops": [build_operator(o, ctx.space) for o in cfg.operators] if ctx.space.is_algebra else [],
            "functions": build_functions(cfg),
        }
        for name in selected:
            if name in NEEDS_ALGEBRA and not ctx.space.is_algebra:
                rec.add(f"{name}:skipped", "Definition 2", "evidence-only", None, "space is not an algebra")
                continue
            try:
                SUITE_FUNCS[name](rec, env)
            except QSpecError as exc:
                rec.add(f"{name}:error", "Definition 2", "fail", None, f"{type(exc).__name__}: {exc}")
        report.tables = env.get("tables_out", {})
    report.meta["timing"] = round(time.perf_counter() - t0, 6)
    return report

"""Generalized real definite operators: g-positivity, |F|, F+-, and square roots."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonConvergenceError, PreconditionError, UnsupportedOperationError
from .operators import NlOperator, canonical_gamma, op_norm, pointwise_product, star_values
from .quasi_product import QuasiProduct, qp_check_capabilities, qp_eval, scalar_product, weighted_sum
from .spaces import SampleSet, SpaceDescriptor, norm, pointwise_algebra, scalar_algebra

__all__ = [
    "GContext",
    "scalar_context",
    "pointwise_context",
    "definite_value",
    "is_g_positive",
    "order_geq",
    "abs_parts",
    "pointwise_product",
    "alg_sqrt",
    "sqrt_hypothesis",
    "star_sqrt",
    "product_counterexample",
]


@dataclass(frozen=True, eq=False)
class GContext:
    """A quasi-product together with the maps g and gamma used for every order and spectral query."""

    qp: QuasiProduct
    g: NlOperator
    gamma: NlOperator
    space: SpaceDescriptor
    name: str = ""

    @property
    def uniform_condition(self) -> bool:
        """Square bounded below with positivity preservation, or a left integral domain."""
        f = self.qp.flags
        sbb = f.square_bounded_below is not None and f.square_bounded_below > 0
        return bool((sbb and f.preserves_positivity is True) or f.left_integral_domain is True)

    @property
    def gamma_is_canonical(self) -> bool:
        return self.gamma.structure == "profile" and self.gamma.carrier == "gamma_canonical" and (
            self.gamma.phi_range == (1.0, 1.0)
        )


def scalar_context() -> GContext:
    """R with [a, b] = ab and g(x) = gamma(x) = |x|."""
    space = scalar_algebra()
    gam = canonical_gamma(space)
    return GContext(scalar_product(space), gam, gam, space, "SCALAR")


def pointwise_context(n: int = 16) -> GContext:
    """Sup-norm pointwise algebra of dimension n with the weighted sum pairing, w_i = 1/n."""
    space = pointwise_algebra(n)
    gam = canonical_gamma(space)
    return GContext(weighted_sum(space), gam, gam, space, f"POINTWISE-{n}")


def _require_zero_at_zero(F: NlOperator, what: str):
    if not F.vanishes_at_zero():
        raise PreconditionError(f"{what} needs F(0) = 0, got F(0) = {F.value_at_zero}", point=F.space.zero())


def _values(F: NlOperator, ctx: GContext, X: np.ndarray) -> np.ndarray:
    return np.asarray(qp_eval(ctx.qp, F(X), ctx.g(X)), dtype=float)


def definite_value(F: NlOperator, ctx: GContext, x) -> float | np.ndarray:
    """[F(x), g(x)] for a vector or a batch."""
    _require_zero_at_zero(F, "definite_value")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(_values(F, ctx, x[None, :])[0])
    return _values(F, ctx, x)


@dataclass
class Verdict:
    consistent: bool
    witness: Optional[np.ndarray]
    margin: float

    def __bool__(self):
        return self.consistent


def _positivity(vals, F, ctx, X, tol) -> Verdict:
    scale = np.maximum(1.0, ctx.qp.c_bar * norm(ctx.space, F(X)) * norm(ctx.space, ctx.g(X)))
    rel = vals / scale
    i = int(np.argmin(rel))
    ok = bool(rel[i] >= -tol)
    return Verdict(ok, None if ok else X[i].copy(), float(rel[i]))


def is_g_positive(F: NlOperator, ctx: GContext, samples: SampleSet, tol: float = 1e-12) -> Verdict:
    """Consistent iff [F(x), g(x)] >= -tol * scale at every sample."""
    _require_zero_at_zero(F, "is_g_positive")
    X = samples.points
    return _positivity(_values(F, ctx, X), F, ctx, X, tol)


def order_geq(F1: NlOperator, F2: NlOperator, ctx: GContext, samples: SampleSet, tol: float = 1e-12) -> Verdict:
    """F1 >= F2 in the g-order."""
    return is_g_positive(F1 - F2, ctx, samples, tol)


def abs_parts(F: NlOperator, ctx: GContext) -> tuple[NlOperator, NlOperator, NlOperator]:
    """(|F|, F+, F-), branching on the sign of [F(x), g(x)]."""
    _require_zero_at_zero(F, "abs_parts")

    def branch(X):
        V = F(X)
        return V, np.asarray(qp_eval(ctx.qp, V, ctx.g(X))) >= 0

    def fabs(X):
        V, pos = branch(X)
        return np.where(pos[:, None], V, -V)

    def fplus(X):
        V, pos = branch(X)
        return np.where(pos[:, None], V, 0.0)

    def fminus(X):
        V, pos = branch(X)
        return np.where(pos[:, None], 0.0, -V)

    nm = F.name or "F"
    return (
        NlOperator(fabs, F.space, name=f"|{nm}|"),
        NlOperator(fplus, F.space, name=f"{nm}+"),
        NlOperator(fminus, F.space, name=f"{nm}-"),
    )


# -- square roots -------------------------------------------------------------------


def _pointwise_sqrt(A: np.ndarray, tol: float, max_iter: int, start: str, damping: str):
    """Solve G * G = A coordinatewise; returns (G, converged rows, residuals, trace of worst row)."""
    G = np.zeros_like(A) if start == "zero" else np.ones_like(A)
    trace = []
    done = np.zeros(len(A), dtype=bool)
    worst = 0
    for _ in range(max_iter + 1):
        R = A - G * G
        res = np.max(np.abs(R), axis=1)
        if damping == "unit":
            step = R / 2.0
        else:
            D = np.minimum(1.0, np.maximum(G, A / 2.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(D > 0, R / (2.0 * D), 0.0)
        smax = np.max(np.abs(step), axis=1)
        done = (res <= tol) & (smax <= 0.1 * tol)
        worst = int(np.argmax(np.where(done, -np.inf, res))) if not done.all() else int(np.argmax(res))
        trace.append(float(G[worst, 0]))
        if done.all():
            break
        G = np.where(done[:, None], G, G + step)
    return G, done, res, trace


def alg_sqrt(
    F: NlOperator,
    ctx: GContext,
    tol: float = 1e-8,
    max_iter: int = 200,
    start: str = "zero",
    damping: str = "newton",
    samples: SampleSet | None = None,
) -> NlOperator:
    """G with G(x) G(x) = F(x), computed pointwise.

    The default iteration is a damped Newton step
    ``G <- G + (F - G G) / (2 D)`` with ``D = min(1, max(G, F/2))``: it takes
    unit damping (the classical halving step) while G is large and becomes
    Newton near small values, where the undamped step stalls.
    ``damping="unit"`` keeps ``D = 1`` throughout. Evaluation raises
    :class:`NonConvergenceError` at the first point that fails; passing
    ``samples`` evaluates eagerly.
    """
    if not F.space.is_algebra:
        raise UnsupportedOperationError("square roots need an algebra")
    _require_zero_at_zero(F, "alg_sqrt")
    if start not in ("zero", "unit") or damping not in ("newton", "unit"):
        raise ValueError("start must be 'zero' or 'unit' and damping 'newton' or 'unit'")

    def fn(X):
        A = F(X)
        G, done, res, trace = _pointwise_sqrt(A, tol, max_iter, start, damping)
        if not done.all():
            i = int(np.argmax(np.where(done, -np.inf, res)))
            raise NonConvergenceError(
                f"square-root iteration did not reach {tol:g} in {max_iter} steps at x = {X[i]} "
                f"(residual {res[i]:.3g}); the hypothesis 0 <= F <= 1 likely fails there, "
                "rescale F by k / (p(F) ||x||) first",
                point=X[i].copy(),
                residual=float(res[i]),
                trace=trace,
            )
        return G

    G = NlOperator(fn, F.space, name=f"sqrt({F.name})")
    if samples is not None:
        G(samples.points)
    return G


@dataclass
class SqrtHypothesis:
    g_order: bool
    coordinatewise: bool
    g_order_witness: Optional[np.ndarray]
    coordinatewise_witness: Optional[np.ndarray]

    @property
    def discrepancy(self) -> bool:
        return self.g_order != self.coordinatewise


def sqrt_hypothesis(F: NlOperator, ctx: GContext, samples: SampleSet, tol: float = 1e-12) -> SqrtHypothesis:
    """Report 0 <= F <= 1_X in the g-order and coordinatewise, separately."""
    X = samples.points
    V = F(X)
    G = ctx.g(X)
    lower = np.asarray(qp_eval(ctx.qp, V, G))
    upper = np.asarray(qp_eval(ctx.qp, 1.0 - V, G))
    gbad = np.flatnonzero((lower < -tol) | (upper < -tol))
    cbad = np.flatnonzero(np.any((V < -tol) | (V > 1 + tol), axis=1))
    return SqrtHypothesis(
        len(gbad) == 0,
        len(cbad) == 0,
        X[gbad[0]].copy() if len(gbad) else None,
        X[cbad[0]].copy() if len(cbad) else None,
    )


def star_sqrt(
    F: NlOperator,
    ctx: GContext,
    tol: float = 1e-8,
    norm_value: float | None = None,
    k: float = 1.0,
    samples: SampleSet | None = None,
    max_iter: int = 200,
) -> NlOperator:
    """G with G * G = F, via the square root of the rescaled operand k F / (p(F) ||x||)."""
    space = F.space
    if not space.is_algebra:
        raise UnsupportedOperationError("star square roots need an algebra")
    if norm_value is None:
        norm_value = op_norm(F, samples).value
    if not np.isfinite(norm_value):
        raise PreconditionError("star_sqrt needs F in B(X) with a finite norm")
    if norm_value == 0:
        return NlOperator(lambda X: np.zeros_like(X), space, name=f"ssqrt({F.name})")
    c = np.sqrt(norm_value / k)

    def fn(X):
        A = F(X)
        nx = norm(space, X)
        nz = nx > 0
        Ah = np.empty_like(A)
        Ah[nz] = k * A[nz] / (norm_value * nx[nz][:, None])
        Ah[~nz] = k * A[~nz] / norm_value
        G, done, res, trace = _pointwise_sqrt(Ah, tol, max_iter, "zero", "newton")
        if not done.all():
            i = int(np.argmax(np.where(done, -np.inf, res)))
            raise NonConvergenceError(
                f"rescaled square root (k = {k:g}, p(F) = {norm_value:.6g}) did not converge at x = {X[i]}",
                point=X[i].copy(),
                residual=float(res[i]),
                trace=trace,
            )
        out = c * G
        out[nz] *= nx[nz][:, None]
        return out

    G = NlOperator(fn, space, name=f"ssqrt({F.name})")
    if samples is not None:
        X = samples.including_zero()
        nx = norm(space, X)
        V = F(X)
        GX = G(X)
        resid = np.max(np.abs(star_values(GX, GX, nx) - V), axis=1) / np.maximum(1.0, norm(space, V))
        if resid.max() > tol:
            i = int(np.argmax(resid))
            raise NonConvergenceError(
                f"G * G misses F by {resid[i]:.3g} at x = {X[i]} (k = {k:g})",
                point=X[i].copy(),
                residual=float(resid[i]),
            )
    return G


def product_counterexample(ctx: GContext, samples: SampleSet, tol: float = 1e-12):
    """Two g-positive operators whose pointwise product is not g-positive, or None.

    Built from the positivity-preservation witness (y1, y2): F(x) = ||x|| y1 and
    H(x) = ||x|| y2. With g(x) = ||x|| 1 the sign of [c y, g(x)] does not depend
    on x, so the pair is g-positive everywhere and FH fails wherever the witness does.
    """
    if not ctx.space.is_algebra:
        return None
    rep = qp_check_capabilities(ctx.qp, ctx.g, samples, tol=tol)
    r = rep["preserves_positivity"]
    if r.status != "refuted":
        return None
    space = ctx.space
    y1, y2 = (np.asarray(r.witness[k], float) for k in ("y1", "y2"))
    y1, y2 = y1 / norm(space, y1), y2 / norm(space, y2)
    F = NlOperator(lambda X: norm(space, X)[:, None] * y1[None, :], space, name="r.y1")
    H = NlOperator(lambda X: norm(space, X)[:, None] * y2[None, :], space, name="r.y2")
    vF, vH = is_g_positive(F, ctx, samples, tol), is_g_positive(H, ctx, samples, tol)
    vP = is_g_positive(pointwise_product(F, H), ctx, samples, tol)
    if vF.consistent and vH.consistent and not vP.consistent:
        return F, H, vP.witness
    return None

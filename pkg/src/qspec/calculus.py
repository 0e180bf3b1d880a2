"""Star polynomials, continuous functions of operators, and their spectral integrals.

At a point x != 0 the map A -> A(x) / ||x|| turns star products into
pointwise products and sends e to 1, so for any polynomial
``p(F)(x) = ||x|| p(F(x) / ||x||)`` coordinatewise, and ``p(F)(0) = p(F(0))``.
:func:`star_poly` evaluates literally with star products; the approximation
schedules use the homomorphism form, which stays stable at high degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import polynomial as npoly
from scipy.stats import binom

from .definite import GContext
from .errors import NonConvergenceError, PreconditionError, UnsupportedOperationError
from .operators import NlOperator, star_unit, star_values
from .spaces import SampleSet, norm
from .spectral import Bracket, Partition, bracket, rayleigh

DEFAULT_SCHEDULE = tuple(2**k for k in range(4, 13))


# -- polynomials and functions --------------------------------------------------------------


@dataclass(frozen=True)
class PolySpec:
    """Real coefficients a_0 .. a_d in increasing degree."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(float(a) for a in self.coeffs) or (0.0,)
        if not all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if len(nz) else 0

    def __call__(self, t):
        return npoly.polyval(np.asarray(t, dtype=float), self.coeffs)

    def sup_norm(self, m: float, M: float) -> float:
        """max |p| on [m, M], from endpoints and real critical points."""
        cand = [m, M]
        if self.degree >= 2:
            for r in npoly.polyroots(npoly.polyder(self.coeffs)):
                if abs(r.imag) < 1e-12 and m <= r.real <= M:
                    cand.append(r.real)
        return float(np.max(np.abs(self(np.array(cand)))))


@dataclass(frozen=True)
class FuncSpec:
    """A continuous real function, vectorised, with its Bernstein schedule."""

    eval: Callable[[np.ndarray], np.ndarray]
    name: str = "f"
    approx_schedule: tuple = DEFAULT_SCHEDULE

    def __call__(self, t):
        return np.asarray(self.eval(np.asarray(t, dtype=float)), dtype=float)

    def sup_norm(self, m: float, M: float, grid: int = 20001) -> float:
        return float(np.max(np.abs(self(np.linspace(m, M, grid)))))

    def modulus(self, delta: float, m: float, M: float, per_delta: int = 50, max_grid: int = 200001) -> float:
        """Modulus of continuity on [m, M], computed over a grid whose step divides delta."""
        if delta <= 0:
            return 0.0
        delta = min(delta, M - m)
        k = per_delta
        h = delta / k
        npts = int(np.ceil((M - m) / h)) + 1
        if npts > max_grid:
            h = (M - m) / (max_grid - 1)
            k = max(1, int(delta // h))
            npts = max_grid
        t = np.minimum(m + h * np.arange(npts), M)
        v = self(t)
        w = 0.0
        for s in range(1, k + 1):
            w = max(w, float(np.max(np.abs(v[s:] - v[:-s]))))
        return w

    def scaled(self, alpha: float) -> "FuncSpec":
        return FuncSpec(lambda t: alpha * self(t), f"{alpha:g}{self.name}", self.approx_schedule)

    def __add__(self, other: "FuncSpec") -> "FuncSpec":
        return FuncSpec(lambda t: self(t) + other(t), f"{self.name}+{other.name}", self.approx_schedule)

    def __neg__(self) -> "FuncSpec":
        return self.scaled(-1.0)


def _const(c):
    return lambda t: np.full_like(np.asarray(t, dtype=float), float(c))


NAMED_FUNCTIONS = {
    "exp": np.exp,
    "abs": np.abs,
    "identity": lambda t: np.asarray(t, dtype=float),
    "sin": np.sin,
    "cos": np.cos,
    "square": np.square,
    "one": _const(1.0),
    "zero": _const(0.0),
}


def named_function(name: str) -> FuncSpec:
    try:
        return FuncSpec(NAMED_FUNCTIONS[name], name)
    except KeyError:
        raise ValueError(f"unknown function {name!r}; known: {sorted(NAMED_FUNCTIONS)}") from None


def constant_function(c: float) -> FuncSpec:
    return FuncSpec(_const(c), f"{c:g}")


# -- star polynomials ------------------------------------------------------------------------------


def _unit_values(nx: np.ndarray, dim: int) -> np.ndarray:
    return np.where(nx > 0, nx, 1.0)[:, None] * np.ones((1, dim))


def star_poly(F: NlOperator, p: PolySpec) -> NlOperator:
    """p(F) = sum_i a_i F^{*i} with F^{*0} = e, by Horner's rule in the star algebra."""
    space = F.space
    if not space.is_algebra:
        raise UnsupportedOperationError("star polynomials need an algebra")
    a = p.coeffs[: p.degree + 1]

    def fn(X):
        V = F(X)
        nx = norm(space, X)
        E = _unit_values(nx, space.dim)
        R = a[-1] * E
        for c in a[-2::-1]:
            R = star_values(R, V, nx) + c * E
        return R

    return NlOperator(fn, space, name=f"p({F.name})")


def star_power(F: NlOperator, k: int) -> NlOperator:
    """F^{*k} through repeated star products."""
    if k < 0:
        raise ValueError("star powers need k >= 0")
    space = F.space

    def fn(X):
        V = F(X)
        nx = norm(space, X)
        R = _unit_values(nx, space.dim)
        for _ in range(k):
            R = star_values(R, V, nx)
        return R

    return NlOperator(fn, space, name=f"{F.name}^*{k}")


def apply_scalar_fn(F: NlOperator, fn: Callable[[np.ndarray], np.ndarray], name: str = "f") -> NlOperator:
    """x -> ||x|| fn(F(x) / ||x||) for x != 0 and fn(F(0)) at 0, coordinatewise."""
    space = F.space
    if not space.is_algebra:
        raise UnsupportedOperationError("functions of operators need an algebra")

    def op(X):
        V = F(X)
        nx = norm(space, X)
        nz = nx > 0
        U = V.copy()
        U[nz] = V[nz] / nx[nz][:, None]
        R = np.asarray(fn(U), dtype=float)
        R[nz] *= nx[nz][:, None]
        return R

    return NlOperator(op, space, name=f"{name}({F.name})")


# -- approximants -------------------------------------------------------------------------------------


def _de_casteljau(b: np.ndarray, u: np.ndarray) -> np.ndarray:
    B = np.broadcast_to(b, (len(u), len(b))).copy()
    uu = u[:, None]
    for r in range(1, len(b)):
        B = (1 - uu) * B[:, :-1] + uu * B[:, 1:]
    return B[:, 0]


@dataclass(frozen=True, eq=False)
class Bernstein:
    """Degree-N Bernstein approximant of f on [m, M]."""

    f: FuncSpec
    N: int
    m: float
    M: float
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = self.m + (self.M - self.m) * np.arange(self.N + 1) / self.N
        object.__setattr__(self, "nodes", self.f(t))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat, inv = np.unique(t.ravel(), return_inverse=True)
        u = (flat - self.m) / (self.M - self.m)
        out = np.empty_like(flat)
        inside = (u >= 0) & (u <= 1)
        k = np.arange(self.N + 1)
        for lo in range(0, int(inside.sum()), 2048):
            sel = np.flatnonzero(inside)[lo: lo + 2048]
            out[sel] = binom.pmf(k[None, :], self.N, u[sel][:, None]) @ self.nodes
        if (~inside).any():
            out[~inside] = _de_casteljau(self.nodes, u[~inside])
        return out[inv].reshape(t.shape)

    def sup_bound(self) -> float:
        """Bernstein polynomials never exceed their node values on [m, M]."""
        return float(np.max(np.abs(self.nodes)))


def chebyshev_approximant(f: FuncSpec, deg: int, m: float, M: float) -> Chebyshev:
    return Chebyshev.interpolate(lambda t: f(t), deg, domain=[m, M])


# -- continuous calculus -------------------------------------------------------------------------------


@dataclass
class CalculusResult:
    operator: NlOperator
    degree: int
    degrees: list
    gaps: list
    chebyshev: NlOperator
    chebyshev_degree: int
    independence_gap: float
    k_bar: float
    f_norm: float
    bracket: Bracket
    cauchy_ok: bool
    tol: float

    @property
    def independent(self) -> bool:
        return self.independence_gap <= 2 * self.tol


def _sampled_distance(A: np.ndarray, B: np.ndarray, X: np.ndarray, space) -> float:
    nx = norm(space, X)
    d = norm(space, A - B)
    return float(np.max(np.where(nx > 0, d / np.where(nx > 0, nx, 1.0), d)))


def calculus_interval(F: NlOperator, ctx: GContext, samples: SampleSet) -> Bracket:
    """The spectral bracket of F, shifted by F(0) for constant-shift operators."""
    if F.structure == "constant_shift":
        s = np.unique(F.shift)
        if len(s) != 1:
            raise UnsupportedOperationError("only shifts by a multiple of the unit have a scalar interval")
        b = bracket(F.base, ctx, samples)
        return Bracket(b.m + s[0], b.M + s[0], b.delta, b.exact)
    return bracket(F, ctx, samples)


def cont_calculus(
    F: NlOperator,
    ctx: GContext,
    f: FuncSpec,
    tol: float = 1e-3,
    samples: SampleSet | None = None,
    br: Bracket | None = None,
    max_cheb_degree: int = 256,
) -> CalculusResult:
    """f(F) as the limit of Bernstein approximants p_N(F), checked against Chebyshev interpolants."""
    if samples is None:
        raise PreconditionError("the continuous calculus needs a sample set to measure operator gaps")
    br = br or calculus_interval(F, ctx, samples)
    m, M = br.m, br.M
    X = samples.including_zero()
    space = ctx.space
    degrees, gaps, prev, current = [], [], None, None
    grid = np.linspace(m, M, 4001)
    cauchy_ok = True
    for N in f.approx_schedule:
        p = Bernstein(f, N, m, M)
        vals = apply_scalar_fn(F, p)(X)
        degrees.append(N)
        if prev is not None:
            gap = _sampled_distance(vals, prev[1], X, space)
            gaps.append(gap)
            lam = np.concatenate([grid, F(X[1:]).ravel() / np.repeat(norm(space, X[1:]), space.dim)])
            lam = lam[(lam >= m) & (lam <= M)]
            cnorm = float(np.max(np.abs(p(lam) - prev[0](lam))))
            cauchy_ok &= gap <= cnorm * (1 + 1e-9) + 1e-15
            if gap <= tol:
                current = p
                break
        prev = (p, vals)
    if current is None:
        raise NonConvergenceError(
            f"Bernstein schedule for {f.name} ended at degree {degrees[-1]} with gap {gaps[-1]:.3g} > {tol:g}",
            residual=gaps[-1] if gaps else None,
            trace=gaps,
        )
    op = apply_scalar_fn(F, current, f.name)
    final = op(X)
    # an independent sequence: Chebyshev interpolants of growing degree
    cheb_prev, cheb, cdeg = None, None, 4
    while cdeg <= max_cheb_degree:
        c = chebyshev_approximant(f, cdeg, m, M)
        cv = apply_scalar_fn(F, c)(X)
        if cheb_prev is not None and _sampled_distance(cv, cheb_prev, X, space) <= tol / 10:
            cheb = c
            break
        cheb_prev, cdeg = cv, cdeg * 2
    if cheb is None:
        cheb = chebyshev_approximant(f, max_cheb_degree, m, M)
        cdeg = max_cheb_degree
    cheb_op = apply_scalar_fn(F, cheb, f"cheb_{f.name}")
    indep = _sampled_distance(final, cheb_op(X), X, space)
    f_norm = f.sup_norm(m, M)
    nx = norm(space, X)
    ratio = np.where(nx > 0, norm(space, final) / np.where(nx > 0, nx, 1.0), norm(space, final))
    k_bar = float(ratio.max() / f_norm) if f_norm > 0 else 0.0
    return CalculusResult(op, current.N, degrees, gaps, cheb_op, cdeg, indep, k_bar, f_norm, br, bool(cauchy_ok),
                          tol)


def poly_bound_check(F: NlOperator, ctx: GContext, p: PolySpec, samples: SampleSet, br: Bracket | None = None
                     ) -> dict:
    """Sampled p(p(F)) against max_[m,M] |p|; the point 0 is only covered when 0 lies in [m, M]."""
    br = br or bracket(F, ctx, samples)
    pn = p.sup_norm(br.m, br.M)
    X = samples.points
    vals = star_poly(F, p)(X)
    ratio = float((norm(ctx.space, vals) / norm(ctx.space, X)).max())
    at_zero = float(norm(ctx.space, star_poly(F, p)(ctx.space.zero())))
    if br.m <= 0 <= br.M:
        ratio = max(ratio, at_zero)
    k_bar = ratio / pn if pn > 0 else 0.0
    return {"k_bar": k_bar, "p_norm": pn, "zero_in_bracket": br.m <= 0 <= br.M, "value_at_zero": at_zero}


# -- spectral integrals ----------------------------------------------------------------------------------


def _binned(F: NlOperator, ctx: GContext, partition: Partition, choice: str, seed: int,
            term: Callable[[float, np.ndarray], np.ndarray], name: str) -> NlOperator:
    """x -> term(lambda_{j(x)}, x) on x != 0 with term(lambda_1, 0) at the origin."""
    reps = partition.representatives(choice, seed)

    def fn(X):
        out = np.empty_like(X)
        nz = np.any(X != 0, axis=1)
        if (~nz).any():
            out[~nz] = term(reps[0], X[~nz])
        if nz.any():
            Xn = X[nz]
            j = partition.bins(rayleigh(F, ctx, Xn))
            block = np.empty_like(Xn)
            for jj in np.unique(j):
                rows = j == jj
                block[rows] = term(reps[jj - 1], Xn[rows])
            out[nz] = block
        return out

    return NlOperator(fn, ctx.space, name=name)


def _scaled_gamma(ctx: GContext, lam: float, shift=None) -> NlOperator:
    gam = ctx.gamma
    e = star_unit(ctx.space)
    if shift is None:
        return NlOperator(lambda X: lam * gam(X), ctx.space, name=f"{lam:g}gamma")
    return NlOperator(lambda X: lam * gam(X) + shift * e(X), ctx.space, name=f"{lam:g}gamma+s0e")


def poly_spectral_integral(F: NlOperator, ctx: GContext, p: PolySpec, partition: Partition, choice: str = "right",
                           seed: int = 0) -> NlOperator:
    """sum_j p(lambda_j gamma) 1_{Delta_j}, with each p(lambda_j gamma) evaluated by star Horner."""
    return _binned(F, ctx, partition, choice, seed,
                   lambda lam, Xb: star_poly(_scaled_gamma(ctx, lam), p)(Xb), f"int p({F.name})")


def func_spectral_integral(F: NlOperator, ctx: GContext, f: FuncSpec, partition: Partition, choice: str = "right",
                           seed: int = 0) -> NlOperator:
    """sum_j f(lambda_j gamma) 1_{Delta_j}; for the canonical gamma this is ||x|| f(lambda_j) 1."""
    if ctx.gamma_is_canonical:
        def term(lam, Xb):
            nx = norm(ctx.space, Xb)
            val = np.where(nx > 0, nx * float(f(lam)), float(f(0.0)))
            return val[:, None] * np.ones((1, ctx.space.dim))
    else:
        def term(lam, Xb):
            return apply_scalar_fn(_scaled_gamma(ctx, lam), f)(Xb)
    return _binned(F, ctx, partition, choice, seed, term, f"int {f.name}({F.name})")


def collapse_check(ctx: GContext, f: FuncSpec, lams: Sequence[float], samples: SampleSet, m: float, M: float,
                   degree: int = 24) -> float:
    """Compare ||x|| f(lam) 1 with a literal star-Horner evaluation of an interpolant at lam gamma."""
    cheb = chebyshev_approximant(f, degree, m, M)
    p = PolySpec(tuple(cheb.convert(kind=np.polynomial.Polynomial, domain=[m, M], window=[m, M]).coef))
    X = samples.points
    nx = norm(ctx.space, X)
    worst = 0.0
    for lam in lams:
        lit = star_poly(_scaled_gamma(ctx, float(lam)), p)(X)
        closed = nx[:, None] * float(f(lam)) * np.ones((1, ctx.space.dim))
        worst = max(worst, float(np.max(norm(ctx.space, lit - closed) / nx)))
    return worst


def shifted_calculus(Ftilde: NlOperator, ctx: GContext, fp, partition: Partition, choice: str = "right",
                     seed: int = 0) -> NlOperator:
    """sum_j h(lambda_j gamma + F~(0) e) 1_{Delta_j} for a polynomial or function h."""
    if Ftilde.structure != "constant_shift":
        raise UnsupportedOperationError("shifted calculus needs an operator built with constant_shift")
    F, s0 = Ftilde.base, Ftilde.shift
    if isinstance(fp, PolySpec):
        def term(lam, Xb):
            return star_poly(_scaled_gamma(ctx, lam, s0), fp)(Xb)
    else:
        def term(lam, Xb):
            return apply_scalar_fn(_scaled_gamma(ctx, lam, s0), fp)(Xb)
    return _binned(F, ctx, partition, choice, seed, term, f"shifted({Ftilde.name})")

"""Projections, Rayleigh values, the spectral bracket and Riemann-Stieltjes spectral sums."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .definite import GContext
from .errors import BracketError, PreconditionError
from .operators import NlOperator, op_norm
from .quasi_product import qp_eval
from .spaces import SampleSet, SpaceDescriptor, as_batch, norm

CHOICES = ("left", "right", "midpoint", "random")


# -- gamma -----------------------------------------------------------------------------


@dataclass
class GammaReport:
    k1_range: tuple
    k2_range: tuple
    g_positive: bool
    witness: Optional[np.ndarray]
    threshold: float = 1e-6

    @property
    def passed(self) -> bool:
        bounded = all(np.isfinite(self.k1_range)) and all(np.isfinite(self.k2_range))
        return bool(bounded and self.k1_range[0] > self.threshold and self.k2_range[0] > self.threshold
                    and self.g_positive)


def validate_gamma(gamma: NlOperator, ctx: GContext, samples: SampleSet) -> GammaReport:
    """Empirical ranges of k1 = [gamma(x), g(x)] / (||x|| ||g(x)||) and k2 = ||gamma(x)|| / ||x||."""
    if not gamma.vanishes_at_zero():
        raise PreconditionError("gamma must vanish at zero")
    X = samples.points
    gx, Gx = gamma(X), ctx.g(X)
    nx = norm(ctx.space, X)
    pair = np.asarray(qp_eval(ctx.qp, gx, Gx))
    k1 = pair / (nx * norm(ctx.space, Gx))
    k2 = norm(ctx.space, gx) / nx
    i = int(np.argmin(k1))
    return GammaReport(
        (float(k1.min()), float(k1.max())),
        (float(k2.min()), float(k2.max())),
        bool(pair.min() >= 0),
        None if k1[i] > 1e-6 else X[i].copy(),
    )


# -- Rayleigh values --------------------------------------------------------------------


def _profile_shortcut(F: NlOperator, ctx: GContext) -> bool:
    return F.structure == "profile" and F.carrier == "gamma_canonical" and ctx.gamma_is_canonical


def rayleigh(F: NlOperator, ctx: GContext, x) -> float | np.ndarray:
    """lambda_x = [F(x), g(x)] / [gamma(x), g(x)] for x != 0 (vector or batch)."""
    X, single = as_batch(ctx.space, x)
    if np.any(np.all(X == 0, axis=1)):
        raise PreconditionError("the Rayleigh value is undefined at x = 0", point=ctx.space.zero())
    if _profile_shortcut(F, ctx):
        # left-linearity cancels the profile factor exactly
        lam = np.asarray(F.phi(X), dtype=float)
    else:
        G = ctx.g(X)
        lam = np.asarray(qp_eval(ctx.qp, F(X), G)) / np.asarray(qp_eval(ctx.qp, ctx.gamma(X), G))
    return float(lam[0]) if single else lam


def rayleigh_bound_check(F: NlOperator, ctx: GContext, samples: SampleSet, k1_min: float | None = None) -> dict:
    """|[F(x), g(x)]| <= c_bar p(F) ||x|| ||g(x)|| and the induced box for lambda_x."""
    X = samples.points
    pF = op_norm(F, samples).value
    kbar = ctx.qp.c_bar * pF
    G = ctx.g(X)
    lhs = np.abs(np.asarray(qp_eval(ctx.qp, F(X), G)))
    rhs = kbar * norm(ctx.space, X) * norm(ctx.space, G)
    if k1_min is None:
        k1_min = validate_gamma(ctx.gamma, ctx, samples).k1_range[0]
    lam = rayleigh(F, ctx, X)
    box = kbar / k1_min
    return {
        "k_bar": kbar,
        "worst_ratio": float((lhs / rhs).max()) if kbar > 0 else float(lhs.max()),
        "definite_bound_ok": bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-300)),
        "box": box,
        "rayleigh_in_box": bool(np.all(np.abs(lam) <= box * (1 + 1e-12))),
    }


# -- projections -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """A set S through its membership predicate; 0 belongs to S unless ``include_zero`` is off.

    ``include_zero=False`` only arises for differences of nested sets, whose
    projection is still zero at zero and whose indicator vanishes there.
    """

    predicate: Callable[[np.ndarray], np.ndarray]
    space: SpaceDescriptor
    label: str = ""
    include_zero: bool = True

    def contains(self, x) -> np.ndarray | bool:
        X, single = as_batch(self.space, x)
        zero = np.all(X == 0, axis=1)
        out = np.zeros(len(X), dtype=bool)
        if (~zero).any():
            out[~zero] = np.asarray(self.predicate(X[~zero]), dtype=bool)
        out[zero] = self.include_zero
        return bool(out[0]) if single else out

    def project(self, x) -> np.ndarray:
        """E_S(x) = x on S, else 0."""
        X, single = as_batch(self.space, x)
        out = np.where(self.contains(X)[:, None], X, 0.0)
        return out[0] if single else out

    def indicator(self, x) -> np.ndarray:
        """1_S(x) = 1 on S, else 0."""
        X, single = as_batch(self.space, x)
        out = np.where(self.contains(X)[:, None], 1.0, 0.0) * np.ones((1, self.space.dim))
        return out[0] if single else out

    def difference(self, inner: "ProjectionSet") -> "ProjectionSet":
        """The band S \\ inner, realising E_S - E_inner and 1_S - 1_inner for nested sets."""
        return ProjectionSet(
            lambda X: np.asarray(self.predicate(X), bool) & ~np.asarray(inner.predicate(X), bool),
            self.space,
            f"{self.label}\\{inner.label}",
            self.include_zero and not inner.include_zero,
        )

    def intersect(self, other: "ProjectionSet") -> "ProjectionSet":
        return ProjectionSet(
            lambda X: np.asarray(self.predicate(X), bool) & np.asarray(other.predicate(X), bool),
            self.space,
            f"{self.label}&{other.label}",
            self.include_zero and other.include_zero,
        )

    def as_operator(self) -> NlOperator:
        return NlOperator(self.project, self.space, name=f"E[{self.label}]")

    def indicator_operator(self) -> NlOperator:
        return NlOperator(self.indicator, self.space, name=f"1[{self.label}]")


def whole_space(space: SpaceDescriptor) -> ProjectionSet:
    return ProjectionSet(lambda X: np.ones(len(X), dtype=bool), space, "X")


def null_set(F: NlOperator) -> ProjectionSet:
    """N(F) = {x : F(x) = 0}."""
    return ProjectionSet(lambda X: np.all(F(X) == 0, axis=1), F.space, f"N({F.name})")


def indicator(F: NlOperator, ctx: GContext, lam: float) -> ProjectionSet:
    """The set {x : lambda_x <= lam} together with 0 (closed boundary)."""
    lam = float(lam)
    return ProjectionSet(lambda X: rayleigh(F, ctx, X) <= lam, ctx.space, f"lam<={lam:.6g}")


# -- bracket ------------------------------------------------------------------------------------


@dataclass
class Bracket:
    m: float
    M: float
    delta: float
    exact: bool
    loose: Optional[tuple] = None

    @property
    def span(self) -> float:
        return self.M - self.m

    @property
    def loose_contains(self) -> Optional[bool]:
        if self.loose is None:
            return None
        return self.loose[0] <= self.m + self.delta and self.M <= self.loose[1]

    def contains(self, lam) -> np.ndarray:
        lam = np.asarray(lam)
        return (lam > self.m) & (lam <= self.M)


def _exact_range(F: NlOperator, ctx: GContext) -> Optional[tuple]:
    if _profile_shortcut(F, ctx) and F.phi_range is not None:
        return F.phi_range
    return None


def bracket(F: NlOperator, ctx: GContext, samples: SampleSet, pad: float = 1e-3, floor: float = 1e-9,
            loose: bool = True) -> Bracket:
    """[m, M] with m = inf lambda - delta and M = sup lambda, delta = max(pad * span, floor).

    The range is exact for profile operators over the canonical gamma and
    sampled otherwise.
    """
    if not F.vanishes_at_zero():
        raise PreconditionError("the spectral bracket needs F(0) = 0")
    if samples is None or len(samples) == 0:
        raise PreconditionError("the spectral bracket needs a nonempty sample set")
    rng = _exact_range(F, ctx)
    exact = rng is not None
    if not exact:
        lam = rayleigh(F, ctx, samples.points)
        rng = (float(lam.min()), float(lam.max()))
    lo, hi = rng
    delta = max(pad * (hi - lo), floor)
    lb = None
    if loose:
        k1_min = validate_gamma(ctx.gamma, ctx, samples).k1_range[0]
        if k1_min > 0:
            box = ctx.qp.c_bar * op_norm(F, samples).value / k1_min
            lb = (-box, box)
    return Bracket(lo - delta, hi, delta, exact, lb)


# -- partitions and spectral sums -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition:
    knots: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or len(k) < 2 or np.any(np.diff(k) <= 0):
            raise ValueError("partition knots must be strictly increasing with at least two entries")
        object.__setattr__(self, "knots", k)

    @classmethod
    def uniform(cls, m: float, M: float, n: int) -> "Partition":
        return cls(np.linspace(m, M, int(n) + 1))

    @property
    def n(self) -> int:
        return len(self.knots) - 1

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.knots)))

    @property
    def m(self) -> float:
        return float(self.knots[0])

    @property
    def M(self) -> float:
        return float(self.knots[-1])

    def bins(self, lam) -> np.ndarray:
        """Index j (1-based) with lam in (s_{j-1}, s_j]; raises for values outside (m, M]."""
        lam = np.asarray(lam, dtype=float)
        j = np.searchsorted(self.knots, lam, side="left")
        bad = (j < 1) | (j > self.n)
        if np.any(bad):
            v = lam[bad].flat[0]
            raise BracketError(f"Rayleigh value {v!r} lies outside ({self.m!r}, {self.M!r}]; the bracket is stale")
        return j

    def representatives(self, choice: str = "right", seed: int = 0) -> np.ndarray:
        """One point per bin; entry j-1 belongs to (s_{j-1}, s_j]."""
        lo, hi = self.knots[:-1], self.knots[1:]
        if choice == "left":
            return lo.copy()
        if choice == "right":
            return hi.copy()
        if choice == "midpoint":
            return (lo + hi) / 2
        if choice == "random":
            u = np.random.default_rng(seed).random(self.n)
            return lo + u * (hi - lo)
        raise ValueError(f"unknown representative choice {choice!r}")


def spectral_sum(F: NlOperator, ctx: GContext, partition: Partition, choice: str = "right", seed: int = 0
                 ) -> NlOperator:
    """F_n(x) = lambda_{j(x)} gamma(x) with j(x) the bin holding lambda_x."""
    reps = partition.representatives(choice, seed)

    def fn(X):
        out = np.zeros_like(X)
        nz = np.any(X != 0, axis=1)
        if nz.any():
            Xn = X[nz]
            j = partition.bins(rayleigh(F, ctx, Xn))
            out[nz] = reps[j - 1][:, None] * ctx.gamma(Xn)
        return out

    return NlOperator(fn, ctx.space, name=f"{F.name}_n{partition.n}")


def spectral_sum_terms(F: NlOperator, ctx: GContext, partition: Partition, choice: str = "right", seed: int = 0
                       ) -> NlOperator:
    """The same sum assembled literally as sum_j lambda_j gamma(E_{Delta_j} x)."""
    reps = partition.representatives(choice, seed)
    sets = [indicator(F, ctx, s) for s in partition.knots]

    def fn(X):
        out = np.zeros_like(X)
        for j in range(1, partition.n + 1):
            band = sets[j].difference(sets[j - 1])
            out += reps[j - 1] * ctx.gamma(band.project(X))
        # a value at or below m belongs to no band: surface it like the closed form does
        nz = np.any(X != 0, axis=1)
        if nz.any():
            partition.bins(rayleigh(F, ctx, X[nz]))
        return out

    return NlOperator(fn, ctx.space, name=f"{F.name}_terms{partition.n}")


def resolved(F: NlOperator, ctx: GContext) -> NlOperator:
    """F~(x) = lambda_x gamma(x), the limit of the spectral sums."""

    def fn(X):
        out = np.zeros_like(X)
        nz = np.any(X != 0, axis=1)
        if nz.any():
            out[nz] = rayleigh(F, ctx, X[nz])[:, None] * ctx.gamma(X[nz])
        return out

    return NlOperator(fn, ctx.space, name=f"{F.name}~")


def _knot_weights(F: NlOperator, ctx: GContext, X: np.ndarray, partition: Partition) -> np.ndarray:
    """w_x(s_j) for every row of X and knot s_j, through the indicator sets."""
    G = ctx.g(X)
    W = np.empty((len(X), len(partition.knots)))
    for j, s in enumerate(partition.knots):
        EX = indicator(F, ctx, s).project(X)
        W[:, j] = qp_eval(ctx.qp, ctx.gamma(EX), G)
    return W


def stieltjes_scalar(F: NlOperator, ctx: GContext, x, partition: Partition, choice: str = "right", seed: int = 0
                     ) -> float | np.ndarray:
    """sum_j lambda_j (w_x(s_j) - w_x(s_{j-1})) with w_x(lam) = [gamma(E_lam x), g(x)]."""
    X, single = as_batch(ctx.space, x)
    if np.any(np.all(X == 0, axis=1)):
        raise PreconditionError("the Stieltjes sum is stated for x != 0", point=ctx.space.zero())
    W = _knot_weights(F, ctx, X, partition)
    out = np.diff(W, axis=1) @ partition.representatives(choice, seed)
    return float(out[0]) if single else out


def sandwich_check(F: NlOperator, ctx: GContext, partition: Partition, samples: SampleSet, tol: float = 1e-12,
                   via: str = "indicator") -> dict:
    """lam[gamma(E x), g] <= [F(x) 1_D(x), g] <= mu[gamma(E x), g] on every cell D = (lam, mu].

    ``via="compose"`` replaces F 1_D by F o E_D.
    """
    X = samples.points
    G = ctx.g(X)
    FX = F(X)
    scale = np.maximum(1.0, ctx.qp.c_bar * norm(ctx.space, FX) * norm(ctx.space, G))
    sets = [indicator(F, ctx, s) for s in partition.knots]
    worst, witness = np.inf, None
    for j in range(1, partition.n + 1):
        band = sets[j].difference(sets[j - 1])
        EX = band.project(X)
        mid = F(EX) if via == "compose" else FX * band.indicator(X)
        mid_v = np.asarray(qp_eval(ctx.qp, mid, G))
        gam_v = np.asarray(qp_eval(ctx.qp, ctx.gamma(EX), G))
        lo = mid_v - partition.knots[j - 1] * gam_v
        hi = partition.knots[j] * gam_v - mid_v
        slack = np.minimum(lo, hi) / scale
        i = int(np.argmin(slack))
        if slack[i] < worst:
            worst, witness = float(slack[i]), (X[i].copy(), j)
    return {"passed": worst >= -tol, "worst_margin": worst, "witness": witness}


# -- decomposition ------------------------------------------------------------------------------------


@dataclass
class SpectralDecomposition:
    context: GContext
    bracket: Bracket
    points: np.ndarray
    lam: np.ndarray
    gamma_pair: np.ndarray
    definite: np.ndarray
    identity_residual: float
    partitions: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    errors_resolved: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    stieltjes_residuals: dict = field(default_factory=dict)
    k2_max: float = 1.0
    converges: bool = False
    halving: bool = False
    structural: bool = False
    note: str = ""
    elapsed: float = 0.0

    @property
    def uniform_condition(self) -> bool:
        return self.context.uniform_condition

    def table(self) -> list:
        """Rows (n, mesh, sup_error)."""
        return [(n, self.partitions[n].mesh, self.errors[n]) for n in sorted(self.errors)]


def decompose(
    F: NlOperator,
    ctx: GContext,
    n_schedule: Sequence[int] = (25, 50, 100, 200, 400),
    samples: SampleSet | None = None,
    choice: str = "right",
    seed: int = 0,
    br: Bracket | None = None,
    halving_factor: float = 1.2,
) -> SpectralDecomposition:
    """Tabulate Rayleigh values, check the scalar identity, and measure ||F_n - F|| along a schedule."""
    t0 = time.perf_counter()
    if samples is None:
        raise PreconditionError("decompose needs a sample set")
    if not F.vanishes_at_zero():
        raise PreconditionError("decompose needs F(0) = 0")
    br = br or bracket(F, ctx, samples)
    X = samples.points
    nx = norm(ctx.space, X)
    G = ctx.g(X)
    FX = F(X)
    lam = rayleigh(F, ctx, X)
    gg = np.asarray(qp_eval(ctx.qp, ctx.gamma(X), G))
    dv = np.asarray(qp_eval(ctx.qp, FX, G))
    scale = np.maximum(1.0, ctx.qp.c_bar * norm(ctx.space, FX) * norm(ctx.space, G))
    ident = float(np.max(np.abs(dv - lam * gg) / scale))
    k2_max = float((norm(ctx.space, ctx.gamma(X)) / nx).max())
    tilde = lam[:, None] * ctx.gamma(X)
    structural = F.structure == "profile" and F.carrier == "gamma_canonical" and ctx.gamma_is_canonical
    dec = SpectralDecomposition(ctx, br, X, lam, gg, dv, ident, k2_max=k2_max, structural=structural)
    for n in n_schedule:
        P = Partition.uniform(br.m, br.M, n)
        Fn = spectral_sum(F, ctx, P, choice, seed)(X)
        dec.partitions[n] = P
        dec.errors[n] = float((norm(ctx.space, Fn - FX) / nx).max())
        dec.errors_resolved[n] = float((norm(ctx.space, Fn - tilde) / nx).max())
        dec.bounds[n] = k2_max * P.mesh
        st = stieltjes_scalar(F, ctx, X, P, choice, seed)
        dec.stieltjes_residuals[n] = float((np.abs(st - dv) / np.abs(gg)).max())
    ns = sorted(dec.errors)
    slack = 1 + 1e-9
    dec.converges = all(dec.errors[n] <= dec.bounds[n] * slack for n in ns)
    dec.halving = all(
        dec.errors[b] <= halving_factor * dec.errors[a] * (a / b) for a, b in zip(ns, ns[1:])
    )
    if structural:
        dec.note = "structural: F equals its resolution lambda_x gamma(x) by construction"
    elif ctx.uniform_condition:
        dec.note = "condition: the context satisfies the uniform spectral representation condition"
    else:
        dec.note = "not guaranteed: neither profile structure nor the uniform condition applies"
    dec.elapsed = time.perf_counter() - t0
    return dec

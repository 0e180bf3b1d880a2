"""Possibly nonlinear operators on coordinate spaces and the normed space B(X, Y).

An :class:`NlOperator` wraps a vectorised map ``(n, dim_in) -> (n, dim_out)``
together with optional known structure. Structure never changes what the
operator computes; it only unlocks closed-form norms and brackets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    HypothesisError,
    NotRepresentableError,
    PreconditionError,
    StructuralError,
    UnsupportedOperationError,
)
from .quasi_product import QuasiProduct, qp_eval
from .spaces import SampleSet, SpaceDescriptor, as_batch, norm

STRUCTURES = ("blackbox", "profile", "linear", "constant_shift")
CARRIERS = ("gamma_canonical", "identity")


@dataclass(frozen=True, eq=False)
class NlOperator:
    """A map X -> Y evaluated row-wise on batches.

    Structure fields:

    * ``profile``: F(x) = phi(x) * carrier(x) for x != 0 and F(0) = ``at_zero``,
      where carrier is ``||x|| 1`` (``gamma_canonical``) or ``x`` (``identity``).
      ``phi_range`` is the exact (inf, sup) of phi when known.
    * ``linear``: F(x) = matrix @ x.
    * ``constant_shift``: F(x) = base(x) + shift * e(x) with e the star unit.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    space: SpaceDescriptor
    space_out: Optional[SpaceDescriptor] = None
    structure: str = "blackbox"
    phi: Optional[Callable] = None
    carrier: Optional[str] = None
    phi_range: Optional[tuple] = None
    at_zero: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    base: Optional["NlOperator"] = None
    shift: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.space_out is None:
            object.__setattr__(self, "space_out", self.space)
        if self.structure not in STRUCTURES:
            raise StructuralError(f"unknown structure {self.structure!r}")

    def __repr__(self):
        return f"NlOperator({self.name!r}, {self.structure}, {self.space.id})"

    def __call__(self, x):
        arr, single = as_batch(self.space, x)
        out = np.asarray(self.fn(arr), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape != (len(arr), self.space_out.dim):
            raise StructuralError(f"operator {self.name!r} returned shape {out.shape}")
        return out[0] if single else out

    @property
    def value_at_zero(self) -> np.ndarray:
        return self(self.space.zero())

    def vanishes_at_zero(self) -> bool:
        return bool(np.all(self.value_at_zero == 0))

    # -- vector-space operations (pointwise) --

    def __add__(self, other: "NlOperator") -> "NlOperator":
        _same_spaces(self, other)
        return NlOperator(lambda X: self(X) + other(X), self.space, self.space_out, name=f"({self.name}+{other.name})")

    def __sub__(self, other: "NlOperator") -> "NlOperator":
        _same_spaces(self, other)
        return NlOperator(lambda X: self(X) - other(X), self.space, self.space_out, name=f"({self.name}-{other.name})")

    def __neg__(self) -> "NlOperator":
        return self * -1.0

    def __mul__(self, alpha) -> "NlOperator":
        alpha = float(alpha)
        kw = {}
        if self.structure == "profile":
            phi = self.phi
            rng = None
            if self.phi_range is not None:
                lo, hi = alpha * self.phi_range[0], alpha * self.phi_range[1]
                rng = (min(lo, hi), max(lo, hi))
            kw = dict(
                structure="profile",
                phi=lambda X: alpha * phi(X),
                carrier=self.carrier,
                phi_range=rng,
                at_zero=None if self.at_zero is None else alpha * self.at_zero,
            )
        elif self.structure == "linear":
            kw = dict(structure="linear", matrix=alpha * self.matrix)
        return NlOperator(lambda X: alpha * self(X), self.space, self.space_out, name=f"{alpha:g}*{self.name}", **kw)

    __rmul__ = __mul__

    def compose(self, inner: "NlOperator") -> "NlOperator":
        """``self o inner``."""
        if inner.space_out != self.space:
            raise StructuralError("composition of operators with mismatched spaces")
        return NlOperator(lambda X: self(inner(X)), inner.space, self.space_out, name=f"{self.name}o{inner.name}")

    def renamed(self, name: str) -> "NlOperator":
        return replace(self, name=name)


def _same_spaces(a: NlOperator, b: NlOperator):
    if a.space != b.space or a.space_out != b.space_out:
        raise StructuralError("operators act between different spaces")


# -- constructors ---------------------------------------------------------------


def _carrier_values(space: SpaceDescriptor, carrier: str, X: np.ndarray) -> np.ndarray:
    if carrier == "identity":
        return X
    return norm(space, X)[:, None] * space.unit()[None, :]


def profile(
    space: SpaceDescriptor,
    phi: Callable[[np.ndarray], np.ndarray],
    carrier: str = "gamma_canonical",
    phi_range: Optional[tuple] = None,
    at_zero=None,
    name: str = "",
) -> NlOperator:
    """F(x) = phi(x) * carrier(x), with phi evaluated on nonzero rows only."""
    if carrier not in CARRIERS:
        raise StructuralError(f"unknown carrier {carrier!r}")
    if carrier == "gamma_canonical" and not space.is_algebra:
        raise UnsupportedOperationError("the canonical carrier ||x|| 1 needs an algebra")
    z = space.zero() if at_zero is None else np.asarray(at_zero, dtype=float)

    def fn(X):
        out = np.empty_like(X)
        nz = np.any(X != 0, axis=1)
        out[~nz] = z
        if nz.any():
            Xn = X[nz]
            out[nz] = np.asarray(phi(Xn), dtype=float)[:, None] * _carrier_values(space, carrier, Xn)
        return out

    if phi_range is not None:
        phi_range = (float(phi_range[0]), float(phi_range[1]))
    return NlOperator(fn, space, structure="profile", phi=phi, carrier=carrier, phi_range=phi_range,
                      at_zero=z, name=name)


def canonical_gamma(space: SpaceDescriptor) -> NlOperator:
    """gamma(x) = ||x|| 1 with gamma(0) = 0."""
    return profile(space, lambda X: np.ones(len(X)), "gamma_canonical", (1.0, 1.0), name="gamma")


def star_unit(space: SpaceDescriptor) -> NlOperator:
    """The unit e of the star product: e(x) = ||x|| 1 for x != 0, e(0) = 1."""
    return profile(space, lambda X: np.ones(len(X)), "gamma_canonical", (1.0, 1.0), at_zero=space.unit(), name="e")


def identity(space: SpaceDescriptor) -> NlOperator:
    return NlOperator(lambda X: X.copy(), space, structure="linear", matrix=np.eye(space.dim), name="I")


def zero_operator(space: SpaceDescriptor, space_out: SpaceDescriptor | None = None) -> NlOperator:
    out = space_out or space
    return NlOperator(lambda X: np.zeros((len(X), out.dim)), space, out, structure="linear",
                      matrix=np.zeros((out.dim, space.dim)), name="0")


def constant(space: SpaceDescriptor, c) -> NlOperator:
    c = np.asarray(c, dtype=float)
    return NlOperator(lambda X: np.broadcast_to(c, (len(X), space.dim)).copy(), space, name="const")


def linear(space: SpaceDescriptor, matrix, space_out: SpaceDescriptor | None = None, name="A") -> NlOperator:
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    out = space_out or space
    if A.shape != (out.dim, space.dim):
        raise StructuralError(f"matrix shape {A.shape} does not map {space.dim} -> {out.dim}")
    return NlOperator(lambda X: X @ A.T, space, out, structure="linear", matrix=A, name=name)


def blackbox(space: SpaceDescriptor, fn, name="F", space_out=None) -> NlOperator:
    return NlOperator(fn, space, space_out, name=name)


def constant_shift(base: NlOperator, s0) -> NlOperator:
    """F~ = F + s0 * e, so that F~(0) = F(0) + s0."""
    space = base.space
    if not space.is_algebra:
        raise UnsupportedOperationError("shifts by the star unit need an algebra")
    s0 = np.broadcast_to(np.asarray(s0, dtype=float), (space.dim,)).copy()
    e = star_unit(space)
    return NlOperator(lambda X: base(X) + s0[None, :] * e(X), space, structure="constant_shift",
                      base=base, shift=s0, name=f"{base.name}~")


def verify_profile(F: NlOperator, gamma: NlOperator, samples: SampleSet, tol: float = 1e-12) -> bool:
    """Check F(x) = phi(x) gamma(x) pointwise before any oracle trusts the profile."""
    if F.structure != "profile":
        return False
    X = samples.points
    carrier = gamma(X) if F.carrier == "gamma_canonical" else X
    expect = np.asarray(F.phi(X))[:, None] * carrier
    got = F(X)
    return bool(np.all(np.abs(got - expect) <= tol * np.maximum(1.0, np.abs(expect))))


# -- the norm p -------------------------------------------------------------------


@dataclass
class NormEstimate:
    value: float
    kind: str  # exact | sampled_lower_bound
    witness: Optional[np.ndarray] = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


_SCALAR_LINE = SpaceDescriptor(1, "sup", (1.0,), "none", "K")


def scalar_line() -> SpaceDescriptor:
    """The scalar field K = R as a target space for functionals."""
    return _SCALAR_LINE


def _linear_norm(A: np.ndarray, sin: SpaceDescriptor, sout: SpaceDescriptor):
    """Exact operator norm of a matrix where extreme points are enumerable."""
    if sin.norm_kind == "one":
        cols = norm(sout, A.T)
        j = int(np.argmax(cols / sin.h))
        w = np.zeros(sin.dim)
        w[j] = 1.0 / sin.h[j]
        return float((cols / sin.h)[j]), w
    if sin.norm_kind == "sup":
        if sout.norm_kind == "sup":
            rows = np.abs(A).sum(axis=1)
            i = int(np.argmax(rows))
            return float(rows[i]), np.where(A[i] >= 0, 1.0, -1.0)
        if sin.dim <= 16:
            S = np.array(list(itertools.product((-1.0, 1.0), repeat=sin.dim)))
            vals = norm(sout, S @ A.T)
            i = int(np.argmax(vals))
            return float(vals[i]), S[i]
        return None
    if sout.dim == 1:
        unit = norm(sout, np.ones((1, 1)))[0]
        a = A[0]
        nrm = float(np.linalg.norm(a))
        return nrm * unit, (a / nrm if nrm > 0 else np.eye(sin.dim)[0])
    if sout.norm_kind == "two":
        u, s, vt = np.linalg.svd(A)
        return float(s[0]), vt[0]
    return None


def _diverges(F: NlOperator, directions: np.ndarray) -> bool:
    ts = 10.0 ** -np.arange(13)
    for u in directions:
        probe = ts[:, None] * u[None, :]
        r = norm(F.space_out, F(probe)) / norm(F.space, probe)
        tail = r[-7:]
        if r[-1] > 1e4 * max(r[0], 1e-300) and np.all(tail[1:] >= 1.5 * tail[:-1]):
            return True
    return False


def op_norm(F: NlOperator, samples: SampleSet | None = None) -> NormEstimate:
    """p(F) = max(sup_{x != 0} ||F(x)|| / ||x||, ||F(0)||)."""
    f0 = float(norm(F.space_out, F.value_at_zero))
    zero = F.space.zero()
    if F.structure == "profile" and F.phi_range is not None:
        factor = 1.0 if F.carrier == "identity" else float(norm(F.space, F.space.unit()))
        val = max(abs(F.phi_range[0]), abs(F.phi_range[1])) * factor
        wit = None
        if samples is not None:
            r = norm(F.space_out, F(samples.points)) / norm(F.space, samples.points)
            wit = samples.points[int(np.argmax(r))]
        if f0 > val:
            return NormEstimate(f0, "exact", zero)
        return NormEstimate(val, "exact", wit)
    if F.structure == "linear":
        res = _linear_norm(F.matrix, F.space, F.space_out)
        if res is not None:
            return NormEstimate(res[0], "exact", res[1])
    if samples is None:
        raise PreconditionError("a sample set is needed to estimate the norm of an unstructured operator")
    X = samples.points
    r = norm(F.space_out, F(X)) / norm(F.space, X)
    i = int(np.argmax(r))
    dirs = X[:: max(1, len(X) // 8)][:8]
    if _diverges(F, dirs / norm(F.space, dirs)[:, None]):
        return NormEstimate(math.inf, "sampled_lower_bound", None)
    if f0 >= r[i]:
        return NormEstimate(f0, "sampled_lower_bound", zero)
    return NormEstimate(float(r[i]), "sampled_lower_bound", X[i])


def sampled_norm(F: NlOperator, points: np.ndarray) -> float:
    """max over the given points (zero rows contribute ||F(0)||) of the p-ratio."""
    vals = norm(F.space_out, F(points))
    nx = norm(F.space, points)
    ratio = np.where(nx > 0, vals / np.where(nx > 0, nx, 1.0), vals)
    f0 = float(norm(F.space_out, F.value_at_zero))
    return float(max(ratio.max(initial=0.0), f0))


# -- star multiplication ------------------------------------------------------------


def star_values(a: np.ndarray, b: np.ndarray, nx: np.ndarray) -> np.ndarray:
    """Row values of F1 * F2 given F1(x), F2(x) and ||x|| (0 for the zero row)."""
    out = a * b
    nz = nx > 0
    if nz.any():
        n = nx[nz][:, None]
        an, bn = a[nz], b[nz]
        # normalise whichever factor is nearer the unit: exact unit law, symmetric in (a, b)
        ka, kb = np.abs(an / n - 1.0), np.abs(bn / n - 1.0)
        pick_a = (ka < kb) | ((ka == kb) & (an <= bn))
        first = np.where(pick_a, an, bn)
        second = np.where(pick_a, bn, an)
        out[nz] = (first / n) * second
    return out


def star_mul(F1: NlOperator, F2: NlOperator) -> NlOperator:
    """(F1 * F2)(x) = F1(x) F2(x) / ||x|| for x != 0 and F1(0) F2(0) at 0."""
    space = F1.space
    if not space.is_algebra:
        raise UnsupportedOperationError("star multiplication needs a pointwise algebra")
    _same_spaces(F1, F2)

    def fn(X):
        return star_values(F1(X), F2(X), norm(space, X))

    kw = {}
    if F1.structure == "profile" and F2.structure == "profile" and F1.carrier == F2.carrier == "gamma_canonical":
        rng = None
        for a, b in ((F1, F2), (F2, F1)):
            if a.phi_range is not None and a.phi_range[0] == a.phi_range[1] and b.phi_range is not None:
                c = a.phi_range[0]
                lo, hi = c * b.phi_range[0], c * b.phi_range[1]
                rng = (min(lo, hi), max(lo, hi))
                break
        p1, p2 = F1.phi, F2.phi
        kw = dict(structure="profile", carrier="gamma_canonical", phi=lambda X: p1(X) * p2(X), phi_range=rng,
                  at_zero=F1.value_at_zero * F2.value_at_zero)
    return NlOperator(fn, space, name=f"({F1.name}*{F2.name})", **kw)


def pointwise_product(F: NlOperator, H: NlOperator) -> NlOperator:
    """(FH)(x) = F(x) H(x) in the algebra (not the star product)."""
    if not F.space.is_algebra:
        raise UnsupportedOperationError("pointwise products need an algebra")
    _same_spaces(F, H)
    return NlOperator(lambda X: F(X) * H(X), F.space, name=f"{F.name}.{H.name}")


# -- composition bound ------------------------------------------------------------------


@dataclass
class CompositionReport:
    norm_inner: NormEstimate
    norm_outer: NormEstimate
    composed: float
    bound: float
    pointwise_ok: bool

    @property
    def passed(self) -> bool:
        return self.pointwise_ok and self.composed <= self.bound * (1 + 1e-12) + 1e-300


def compose_bound_check(F1: NlOperator, F2: NlOperator, samples: SampleSet) -> CompositionReport:
    """Check ||F1(x)|| <= p(F1)||x|| and p(F2 o F1) <= p(F1) p(F2) on samples."""
    if not (F1.vanishes_at_zero() and F2.vanishes_at_zero()):
        raise PreconditionError(
            "the composition bound needs F1(0) = F2(0) = 0; with a nonzero value at zero the "
            "composed operator can exceed the product of norms"
        )
    n1, n2 = op_norm(F1, samples), op_norm(F2, samples)
    X = samples.points
    lhs = norm(F1.space_out, F1(X))
    ok = bool(np.all(lhs <= n1.value * norm(F1.space, X) * (1 + 1e-12)))
    comp = sampled_norm(F2.compose(F1), X)
    return CompositionReport(n1, n2, comp, n1.value * n2.value, ok)


# -- duality ------------------------------------------------------------------------------


@dataclass
class DualityReport:
    x_norm: float
    witness: NlOperator
    witness_value: float
    witness_norm: float
    probe_results: list = field(default_factory=list)

    @property
    def attained(self) -> bool:
        return abs(abs(self.witness_value) - self.x_norm) <= 1e-12 * max(1.0, self.x_norm) and abs(
            self.witness_norm - 1.0
        ) <= 1e-12

    @property
    def passed(self) -> bool:
        return self.attained and all(ok for _, ok, _ in self.probe_results)


def norming_functional(space: SpaceDescriptor, x) -> NlOperator:
    """A linear functional of norm one with value ||x|| at x."""
    x = np.asarray(x, dtype=float)
    nx = norm(space, x)
    if nx == 0:
        raise PreconditionError("the norming functional needs x != 0")
    a = np.zeros(space.dim)
    if space.norm_kind == "sup":
        i = int(np.argmax(np.abs(x)))
        a[i] = np.sign(x[i])
    elif space.norm_kind == "one":
        a = np.sign(x) * space.h
    else:
        a = x / nx
    return linear(space, a[None, :], scalar_line(), name="f_x")


def dual_pairing(x, probes: Sequence[NlOperator], space: SpaceDescriptor, samples: SampleSet | None = None
                 ) -> DualityReport:
    """Certify ||x|| = sup |F(x)| / p(F) over functionals F via an attaining witness."""
    x = np.asarray(x, dtype=float)
    nx = norm(space, x)
    if nx == 0:
        raise PreconditionError("duality is stated for x != 0")
    w = norming_functional(space, x)
    wv = float(w(x)[0])
    wn = op_norm(w).value
    results = []
    for F in probes:
        est = op_norm(F, samples)
        val = abs(float(F(x)[0]))
        ok = val <= est.value * nx * (1 + 1e-12) + 1e-300
        results.append((F.name, ok, val / nx if est.value == 0 else val / (est.value * nx)))
    return DualityReport(nx, w, wv, wn, results)


# -- representation of forms ----------------------------------------------------------------


def represent_form(
    h: Callable[[np.ndarray, np.ndarray], np.ndarray],
    qp: QuasiProduct,
    basis_probe: SampleSet,
    tol: float = 1e-9,
    c_bar: float | None = None,
    max_probes: int = 64,
) -> NlOperator:
    """Find F with h(x, y) = [F(x), y] for every x, y.

    ``h`` takes row-aligned batches ``(n, dim)`` and returns ``(n,)``. The
    representer is solved against the basis (z_i = h(x, e_i) / [e_i, e_i]),
    then checked against ``basis_probe`` and re-solved by least squares as a
    uniqueness check.
    """
    if qp.flags.norm_compat is None or qp.kind not in ("scaled_inner", "scalar_product"):
        raise PreconditionError(
            f"{qp.kind}: no closed-form representer; the pairing lacks a witness d with [y, y] = d(y)||y||^2"
        )
    space = qp.space
    E = np.eye(space.dim)
    diag = np.array([qp_eval(qp, e, e) for e in E])

    def solve(X):
        Z = np.empty_like(X)
        for i in range(space.dim):
            Z[:, i] = np.asarray(h(X, np.broadcast_to(E[i], X.shape)), dtype=float) / diag[i]
        return Z

    def fn(X):
        out = np.zeros_like(X)
        nz = np.any(X != 0, axis=1)
        if nz.any():
            out[nz] = solve(X[nz])
        return out

    P = basis_probe.subset(max_probes)
    Xi = np.repeat(np.arange(len(P)), len(P))
    Yi = np.tile(np.arange(len(P)), len(P))
    Xb, Yb = P[Xi], P[Yi]
    hv = np.asarray(h(Xb, Yb), dtype=float)
    nxy = norm(space, Xb) * norm(space, Yb)
    ratio = np.abs(hv) / nxy
    if not np.all(np.isfinite(ratio)) or (c_bar is not None and ratio.max() > c_bar * (1 + tol)):
        raise HypothesisError(f"|h(x, y)| / (||x|| ||y||) reaches {ratio.max():.6g}; the form is not bounded by c_bar")
    Z = fn(P)
    resid = np.abs(hv - qp_eval(qp, Z[Xi], Yb))
    scale = np.maximum(1.0, np.abs(hv))
    worst = float((resid / scale).max())
    if worst > tol:
        raise NotRepresentableError(f"residual {worst:.3g} exceeds {tol:g}: h is not of the form [F(x), y]")
    # uniqueness: least-squares re-solve over the probe directions
    design = qp.scale(P)[:, None] * P
    for k, x in enumerate(P):
        rhs = np.asarray(h(np.broadcast_to(x, P.shape), P), dtype=float)
        z2, *_ = np.linalg.lstsq(design, rhs, rcond=None)
        if np.max(np.abs(z2 - Z[k])) > 1e-6 * max(1.0, np.max(np.abs(Z[k]))):
            raise NotRepresentableError("basis and least-squares representers disagree; representation not unique")
    return NlOperator(fn, space, name="F_h")

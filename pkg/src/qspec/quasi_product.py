"""Quasi-products: nonnegative on the diagonal, bounded, linear in the first slot.

Five pairings ship, each with the capability flags that the spectral
machinery depends on. Flags that are false carry a stored counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PreconditionError, UnsupportedOperationError
from .spaces import SampleSet, SpaceDescriptor, as_batch, norm, scalar_algebra

KINDS = ("scaled_inner", "integral_pair", "integral_sup", "weighted_sum", "scalar_product")

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Capabilities:
    """Declared structural properties of a pairing.

    ``left_integral_domain``, ``preserves_positivity`` are stated relative to
    the canonical g of the pairing (``g(x) = ||x|| 1`` on algebras, the
    identity otherwise). ``None`` means not applicable or not claimed either way.
    ``square_bounded_below`` holds the constant k (or None), ``norm_compat``
    the function d with [y, y] = d(y) ||y||^2 (or None).
    """

    symmetric: bool = False
    quasi_symmetric: bool = False
    left_integral_domain: Optional[bool] = None
    preserves_positivity: Optional[bool] = None
    square_bounded_below: Optional[float] = None
    norm_compat: Optional[Callable] = None


@dataclass(frozen=True, eq=False)
class QuasiProduct:
    """A pairing [x, y] on a coordinate space (or on a cone S of it)."""

    kind: str
    space: SpaceDescriptor
    c_bar: float
    flags: Capabilities
    params: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    # factor in the left-linearity axiom; every shipped pairing is exactly left-linear
    c_factor = 1.0

    @property
    def has_domain_restriction(self) -> bool:
        return self.kind == "integral_sup"

    def in_domain(self, x) -> np.ndarray:
        arr, _ = as_batch(self.space, x)
        if not self.has_domain_restriction:
            return np.ones(len(arr), dtype=bool)
        return (arr @ self.space.h > 0) | np.all(arr == 0, axis=1)

    def scale(self, y) -> np.ndarray:
        """The y-dependent factor c(y) of the scaled inner product (1 elsewhere)."""
        arr, single = as_batch(self.space, y)
        if self.kind == "scaled_inner":
            ny = norm(self.space, arr)
            out = ny / (ny + 1.0) + self.params["k"]
        else:
            out = np.ones(len(arr))
        return out[0] if single else out

    def __call__(self, x, y):
        return qp_eval(self, x, y)


def qp_eval(qp: QuasiProduct, x, y):
    """Evaluate [x, y] for single vectors or row-aligned batches."""
    a, sa = as_batch(qp.space, x)
    b, sb = as_batch(qp.space, y)
    if len(a) != len(b):
        if len(a) == 1:
            a = np.broadcast_to(a, b.shape)
        elif len(b) == 1:
            b = np.broadcast_to(b, a.shape)
        else:
            raise DomainError("batches must have equal length")
    if qp.has_domain_restriction:
        bad = ~(qp.in_domain(a) & qp.in_domain(b))
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(f"{qp.kind}: pair {i} lies outside the positive-integral cone S")
    h = qp.space.h
    kind = qp.kind
    if kind == "scalar_product":
        out = a[:, 0] * b[:, 0]
    elif kind == "scaled_inner":
        out = qp.scale(b) * np.einsum("ij,ij->i", a, b)
    elif kind == "integral_pair":
        out = (a @ h) * (b @ h)
    elif kind == "integral_sup":
        out = (a @ h) * np.max(b, axis=1)
    elif kind == "weighted_sum":
        out = np.einsum("ij,ij,j->i", a, b, h)
    else:  # pragma: no cover - guarded by constructors
        raise UnsupportedOperationError(kind)
    return float(out[0]) if (sa and sb) else out


# -- shipped instances ----------------------------------------------------------


def scalar_product(space: SpaceDescriptor | None = None) -> QuasiProduct:
    """[a, b] = a b on the scalar algebra."""
    space = space or scalar_algebra()
    if space.dim != 1:
        raise PreconditionError("scalar_product needs a one-dimensional space")
    flags = Capabilities(
        symmetric=True,
        quasi_symmetric=True,
        left_integral_domain=True,
        preserves_positivity=True,
        square_bounded_below=1.0,
        norm_compat=lambda y: np.ones(np.atleast_2d(y).shape[0]),
    )
    return QuasiProduct("scalar_product", space, 1.0, flags, {"q_bounds": (1.0, 1.0)})


def scaled_inner(space: SpaceDescriptor, k: float = 1.0) -> QuasiProduct:
    """[x, y] = c(y) <x, y> with c(y) = ||y|| / (||y|| + 1) + k on a Euclidean space."""
    if space.norm_kind != "two":
        raise PreconditionError("scaled_inner needs the two-norm")
    if not k > 0:
        raise PreconditionError("k must be positive")
    d = space.dim
    e1 = np.eye(d)[0]
    witnesses = {"symmetric": (e1, 3.0 * e1)}
    if d >= 2:
        witnesses["left_integral_domain"] = {"x": e1, "y": np.eye(d)[1]}
    qp_box = {}

    def compat(y):
        return qp_box["qp"].scale(y)

    flags = Capabilities(
        symmetric=False,
        quasi_symmetric=True,
        left_integral_domain=(d == 1),
        norm_compat=compat,
    )
    qp = QuasiProduct(
        "scaled_inner",
        space,
        1.0 + k,
        flags,
        {"k": float(k), "q_bounds": (k / (1.0 + k), (1.0 + k) / k)},
        witnesses,
    )
    qp_box["qp"] = qp
    return qp


def integral_pair(space: SpaceDescriptor) -> QuasiProduct:
    """[x, y] = (sum x_i h_i)(sum y_i h_i) on a weighted one-norm space."""
    if space.norm_kind != "one":
        raise PreconditionError("integral_pair needs the weighted one-norm")
    h = space.h
    witnesses = {}
    if space.dim >= 2:
        v = np.zeros(space.dim)
        v[0], v[1] = 1.0 / h[0], -1.0 / h[1]
        witnesses["left_integral_domain"] = {"x": np.eye(space.dim)[0], "y": v}
        witnesses["degenerate_diagonal"] = v
    flags = Capabilities(symmetric=True, quasi_symmetric=True, left_integral_domain=(space.dim == 1))
    return QuasiProduct("integral_pair", space, 1.0, flags, {"q_bounds": (1.0, 1.0)}, witnesses)


def integral_sup(space: SpaceDescriptor) -> QuasiProduct:
    """[x, y] = (sum x_i h_i)(max_i y_i) on the cone {sum x h > 0} of a sup-norm space."""
    if space.norm_kind != "sup":
        raise PreconditionError("integral_sup needs the sup norm")
    h = space.h
    d = space.dim
    witnesses = {}
    if d >= 2:
        e1, e2 = np.eye(d)[0], np.eye(d)[1]
        witnesses["symmetric"] = (e1, 2.0 * e1 - (h[0] / h[1]) * e2)
        eps = 1e-6
        # [x, y] / [y, x] = eps: no ratio bounded away from zero exists
        witnesses["quasi_symmetric"] = (e1 - (1.0 - eps) * (h[0] / h[1]) * e2, e1)
    flags = Capabilities(symmetric=(d == 1), quasi_symmetric=(d == 1))
    return QuasiProduct("integral_sup", space, float(h.sum()), flags, {}, witnesses)


def weighted_sum(space: SpaceDescriptor) -> QuasiProduct:
    """[x, y] = sum w_i x_i y_i on a sup-norm pointwise algebra (w = space weights)."""
    if not space.is_algebra:
        raise PreconditionError("weighted_sum needs a pointwise algebra")
    w = space.h
    d = space.dim
    witnesses = {}
    if d >= 2:
        e1, e2 = np.eye(d)[0], np.eye(d)[1]
        witnesses["left_integral_domain"] = {"x": e1, "y": e1 / w[0] - e2 / w[1]}
        eps = 1e-3
        witnesses["preserves_positivity"] = {"x": e1, "y1": e1 - eps * e2, "y2": e2 - eps * e1}

    def compat(y):
        arr = np.atleast_2d(y)
        return (arr * arr) @ w / norm(space, arr) ** 2

    flags = Capabilities(
        symmetric=True,
        quasi_symmetric=True,
        left_integral_domain=(d == 1),
        preserves_positivity=(d == 1),
        square_bounded_below=float(w.min()),
        norm_compat=compat,
    )
    return QuasiProduct("weighted_sum", space, float(w.sum()), flags, {"q_bounds": (1.0, 1.0)}, witnesses)


def with_flags(qp: QuasiProduct, **overrides) -> QuasiProduct:
    """Copy of ``qp`` with some declared flags replaced (used to test flag auditing)."""
    fl = qp.flags
    new = Capabilities(**{**{f: getattr(fl, f) for f in fl.__dataclass_fields__}, **overrides})
    return QuasiProduct(qp.kind, qp.space, qp.c_bar, new, dict(qp.params), dict(qp.witnesses))


# -- axiom checking ---------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    scale: float = 1.0
    witness: object = None
    detail: str = ""


@dataclass
class AxiomReport:
    kind: str
    results: list
    n_pairs: int
    degeneracy_witness: Optional[np.ndarray] = None
    asymmetry_witness: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def _domain_points(qp: QuasiProduct, pts: np.ndarray) -> np.ndarray:
    if not qp.has_domain_restriction:
        return pts
    s = pts @ qp.space.h
    pts = pts * np.where(s < 0, -1.0, 1.0)[:, None]
    return pts[np.abs(s) > 0]


def _worst(slack: np.ndarray, scale: np.ndarray):
    m = slack / scale
    i = int(np.argmin(m))
    return float(m[i]), float(scale[i]), i


def qp_check_axioms(
    qp: QuasiProduct, samples: SampleSet, tol: float = DEFAULT_TOL, n_pairs: int | None = None, seed: int = 0
) -> AxiomReport:
    """Check nonnegativity, the c-bar bound and left-linearity on seeded pairs.

    Margins are slack divided by ``max(1, magnitudes involved)``; an axiom
    passes when its worst margin is at least ``-tol``.
    """
    rng = np.random.default_rng(seed)
    pts = _domain_points(qp, samples.points)
    n = len(pts) if n_pairs is None else n_pairs
    idx_x = np.arange(n) % len(pts)
    idx_y = rng.permutation(np.resize(np.arange(len(pts)), n))
    X, Y = pts[idx_x], pts[idx_y]
    X2 = pts[rng.permutation(np.resize(np.arange(len(pts)), n))]
    nx, ny = norm(qp.space, X), norm(qp.space, Y)
    results = []

    diag = qp_eval(qp, X, X)
    scale_a = np.maximum(1.0, qp.c_bar * nx * nx)
    m, s, i = _worst(diag, scale_a)
    results.append(CheckResult("nonnegative_diagonal", m >= -tol, m, s, X[i] if m < -tol else None))

    xy = qp_eval(qp, X, Y)
    bound = qp.c_bar * nx * ny
    scale_b = np.maximum(1.0, bound)
    m, s, i = _worst(bound - np.abs(xy), scale_b)
    results.append(CheckResult("bounded", m >= -tol, m, s, (X[i], Y[i]) if m < -tol else None))

    if qp.has_domain_restriction:
        alpha, beta = rng.uniform(0.1, 3.0, n), rng.uniform(0.1, 3.0, n)
    else:
        alpha, beta = rng.uniform(-3.0, 3.0, n), rng.uniform(-3.0, 3.0, n)
    combo = alpha[:, None] * X + beta[:, None] * X2
    lhs = qp_eval(qp, combo, Y)
    t1, t2 = alpha * xy, beta * qp_eval(qp, X2, Y)
    resid = np.abs(lhs - qp.c_factor * (t1 + t2))
    scale_c = np.maximum(1.0, np.abs(lhs) + np.abs(t1) + np.abs(t2))
    m, s, i = _worst(-resid, scale_c)
    results.append(CheckResult("left_linear", m >= -tol, m, s, (X[i], X2[i], Y[i]) if m < -tol else None))

    zero = qp_eval(qp, np.zeros_like(Y), Y)
    m, s, i = _worst(-np.abs(zero), np.maximum(1.0, ny))
    results.append(CheckResult("zero_left", m >= -tol, m, s))

    yx = qp_eval(qp, Y, X)
    asym = np.abs(xy - yx)
    scale_s = np.maximum(1.0, np.abs(xy) + np.abs(yx))
    asym_witness = None
    if asym.max() / 1.0 > 0 and (asym / scale_s).max() > tol:
        j = int(np.argmax(asym / scale_s))
        asym_witness = (X[j], Y[j])
    if qp.flags.symmetric:
        m, s, i = _worst(-asym, scale_s)
        results.append(CheckResult("symmetric", m >= -tol, m, s, asym_witness))
    elif "symmetric" in qp.witnesses:
        w = qp.witnesses["symmetric"]
        gap = abs(qp_eval(qp, w[0], w[1]) - qp_eval(qp, w[1], w[0]))
        results.append(
            CheckResult("asymmetry_witnessed", gap > tol, gap, 1.0, w, "stored witness for symmetric=False")
        )
        asym_witness = asym_witness or w
    if qp.flags.quasi_symmetric and not qp.flags.symmetric:
        lo, hi = qp.params.get("q_bounds", (0.0, np.inf))
        both = (np.abs(yx) > 0) & (np.abs(xy) > 0)
        ratio = np.where(both, xy / np.where(both, yx, 1.0), 1.0)
        one_zero = (np.abs(xy) > tol * scale_s) != (np.abs(yx) > tol * scale_s)
        slack = np.minimum(ratio - lo * (1 - tol), hi * (1 + tol) - ratio)
        slack = np.where(one_zero, -1.0, slack)
        m, s, i = _worst(slack, np.ones_like(slack))
        results.append(CheckResult("quasi_symmetric", m >= 0, m, s, (X[i], Y[i]) if m < 0 else None))

    degenerate = None
    cand = []
    if "degenerate_diagonal" in qp.witnesses:
        cand.append(qp.witnesses["degenerate_diagonal"])
    h = qp.space.h
    for i in range(qp.space.dim):
        for j in range(i + 1, qp.space.dim):
            v = np.zeros(qp.space.dim)
            v[i], v[j] = 1.0 / h[i], -1.0 / h[j]
            cand.append(v)
            break
    for v in cand:
        if qp.in_domain(v)[0] and abs(qp_eval(qp, v, v)) <= tol * max(1.0, qp.c_bar * norm(qp.space, v) ** 2):
            degenerate = v
            break
    return AxiomReport(qp.kind, results, n, degenerate, asym_witness)


# -- capability checking -------------------------------------------------------------


@dataclass
class CapabilityResult:
    name: str
    status: str  # consistent | refuted | not_applicable
    declared: object = None
    witness: object = None
    detail: str = ""

    @property
    def mismatch(self) -> bool:
        """A flag declared true that the samples refute."""
        if self.status != "refuted":
            return False
        return self.declared is True or (isinstance(self.declared, float) and self.declared > 0)


@dataclass
class CapabilityReport:
    kind: str
    results: dict
    empirical_k_lower: Optional[float] = None

    @property
    def mismatches(self) -> list:
        return [r for r in self.results.values() if r.mismatch]

    def __getitem__(self, name) -> CapabilityResult:
        return self.results[name]


def _validate_g(g, space, pts):
    gv = g(pts)
    bad = norm(space, gv) == 0
    if bad.any():
        p = pts[int(np.argmax(bad))]
        raise PreconditionError(f"g vanishes at the nonzero sample {p.tolist()}", point=p)
    return gv


def _functional_coeffs(qp: QuasiProduct, gx: np.ndarray) -> np.ndarray:
    """Coefficients a with [y, g(x)] = a . y (valid by exact left-linearity)."""
    d = qp.space.dim
    E = np.eye(d)
    out = np.empty((len(gx), d))
    for i in range(d):
        out[:, i] = qp_eval(qp, np.broadcast_to(E[i], gx.shape), gx)
    return out


def qp_check_capabilities(
    qp: QuasiProduct, g, samples: SampleSet, tol: float = DEFAULT_TOL, max_points: int = 200
) -> CapabilityReport:
    """Search the samples for counterexamples to each capability flag.

    ``g`` is any callable mapping an ``(n, dim)`` batch to an ``(n, dim)`` batch.
    """
    space = qp.space
    pts = samples.subset(max_points)
    gx = _validate_g(g, space, pts)
    scale_g = np.maximum(1.0, norm(space, gx))
    results = {}
    fl = qp.flags
    coeffs = _functional_coeffs(qp, gx)

    # left integral domain: a nonzero y in the kernel of y -> [y, g(x)]
    wit = None
    for a, x, sg in zip(coeffs, pts, scale_g):
        if space.dim == 1:
            y = np.ones(1) if abs(a[0]) <= tol * sg else None
        else:
            j = int(np.argmax(np.abs(a)))
            i = 0 if j != 0 else 1
            y = np.zeros(space.dim)
            if abs(a[j]) <= tol * sg:
                y[i] = 1.0
            else:
                y[i], y[j] = a[j], -a[i]
                y /= np.max(np.abs(y))
        if y is None or not qp.in_domain(y)[0]:
            continue
        val = qp_eval(qp, y, g(x[None, :])[0])
        if abs(val) <= tol * max(1.0, qp.c_bar * norm(space, y) * norm(space, g(x[None, :])[0])):
            wit = {"x": x, "y": y, "value": val}
            break
    results["left_integral_domain"] = CapabilityResult(
        "left_integral_domain", "refuted" if wit else "consistent", fl.left_integral_domain, wit
    )

    if not space.is_algebra:
        for name, declared in (
            ("preserves_positivity", fl.preserves_positivity),
            ("square_bounded_below", fl.square_bounded_below),
        ):
            results[name] = CapabilityResult(name, "not_applicable", declared, None, "space is not an algebra")
        return CapabilityReport(qp.kind, results)

    # positivity preservation: y1, y2 paired nonnegatively with g(x) but y1 y2 not
    one = space.unit()
    cands = [samples.subset(48), one[None, :], -one[None, :]]
    d = space.dim
    eps = 1e-3
    for i in range(min(d, 4)):
        for j in range(min(d, 4)):
            if i != j:
                v = np.zeros(d)
                v[i], v[j] = 1.0, -eps
                cands.append(v[None, :])
    Ycand = np.vstack(cands)
    if qp.has_domain_restriction:
        Ycand = Ycand[qp.in_domain(Ycand)]
    wit = None
    for a, x, sg in zip(coeffs, pts, scale_g):
        lin = Ycand @ a
        P = Ycand[lin >= 0]
        if len(P) == 0:
            continue
        prod = (P * a) @ P.T
        scale = np.maximum(1.0, np.outer(norm(space, P), norm(space, P)) * sg * qp.c_bar)
        bad = prod < -tol * scale
        if bad.any():
            r, c = np.unravel_index(int(np.argmax(bad)), bad.shape)
            y1, y2 = P[r], P[c]
            gxx = g(x[None, :])[0]
            direct = qp_eval(qp, y1 * y2, gxx)
            if direct < 0 and qp_eval(qp, y1, gxx) >= 0 and qp_eval(qp, y2, gxx) >= 0:
                wit = {"x": x, "y1": y1, "y2": y2, "value": direct}
                break
    results["preserves_positivity"] = CapabilityResult(
        "preserves_positivity", "refuted" if wit else "consistent", fl.preserves_positivity, wit
    )

    # square bounded below: empirical k = min [y^2, g(x)] / (||y||^2 ||g(x)||)
    Ys = np.vstack([samples.subset(max_points), one[None, :]])
    Xi = np.repeat(np.arange(len(pts)), len(Ys))
    Yi = np.tile(np.arange(len(Ys)), len(pts))
    Yb, Gb = Ys[Yi], gx[Xi]
    num = qp_eval(qp, Yb * Yb, Gb)
    den = norm(space, Yb) ** 2 * norm(space, Gb)
    ratio = num / den
    k_emp = float(ratio.min())
    declared = fl.square_bounded_below
    j = int(np.argmin(ratio))
    if k_emp <= 0 or (declared is not None and k_emp < declared * (1 - tol) - tol):
        res = CapabilityResult(
            "square_bounded_below", "refuted", declared, {"x": pts[Xi[j]], "y": Yb[j], "ratio": k_emp}
        )
    else:
        res = CapabilityResult("square_bounded_below", "consistent", declared, None, f"empirical k = {k_emp:.6g}")
    results["square_bounded_below"] = res
    return CapabilityReport(qp.kind, results, k_emp)

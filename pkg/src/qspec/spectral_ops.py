"""Interval-indexed spectral projections and the operators integral f(lambda) dE."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import FuncSpec
from .errors import BracketError, DomainError, PreconditionError, StructuralError
from .operators import NlOperator
from .spaces import SampleSet, SpaceDescriptor, as_batch, norm
from .spectral import Partition, ProjectionSet


@dataclass(frozen=True)
class IntervalUnion:
    """A finite union of half-open intervals (a, b], kept sorted and merged."""

    intervals: tuple = ()

    def __post_init__(self):
        iv = sorted((float(a), float(b)) for a, b in self.intervals if b > a)
        merged = []
        for a, b in iv:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def interval(cls, a: float, b: float) -> "IntervalUnion":
        return cls(((a, b),))

    @property
    def empty(self) -> bool:
        return not self.intervals

    @property
    def sup(self) -> Optional[float]:
        return self.intervals[-1][1] if self.intervals else None

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (t > a) & (t <= b)
        return out

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.intervals + other.intervals)

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if hi > lo:
                    out.append((lo, hi))
        return IntervalUnion(tuple(out))

    def within(self, m: float, M: float) -> bool:
        return all(a >= m and b <= M for a, b in self.intervals)

    def disjoint(self, other: "IntervalUnion") -> bool:
        return self.intersect(other).empty


@dataclass(frozen=True, eq=False)
class SpectralProjection:
    """E on (m, M], either as level sets of a scalar field psi or through an explicit set function."""

    space: SpaceDescriptor
    m: float
    M: float
    psi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    set_function: Optional[Callable[[IntervalUnion], ProjectionSet]] = None
    label: str = "E"

    def __post_init__(self):
        if (self.psi is None) == (self.set_function is None):
            raise StructuralError("give exactly one of psi (profile) or set_function (raw)")
        if not self.M > self.m:
            raise StructuralError("need m < M")

    @property
    def representation(self) -> str:
        return "profile" if self.psi is not None else "raw"

    @property
    def full(self) -> IntervalUnion:
        return IntervalUnion.interval(self.m, self.M)

    def set_for(self, A: IntervalUnion) -> ProjectionSet:
        if self.psi is not None:
            psi = self.psi
            return ProjectionSet(lambda X: A.contains(psi(X)), self.space, str(A.intervals))
        return self.set_function(A)

    def operator(self, A: IntervalUnion) -> NlOperator:
        return NlOperator(lambda X: sp_apply(self, A, X), self.space, name=f"{self.label}{A.intervals}")


def profile_projection(space: SpaceDescriptor, psi, m: float, M: float, label: str = "E") -> SpectralProjection:
    return SpectralProjection(space, float(m), float(M), psi=psi, label=label)


def raw_projection(space: SpaceDescriptor, set_function, m: float, M: float, label: str = "E") -> SpectralProjection:
    return SpectralProjection(space, float(m), float(M), set_function=set_function, label=label)


def sp_apply(E: SpectralProjection, A: IntervalUnion, x) -> np.ndarray:
    """E{A} x: x when psi(x) lies in A, else 0 (0 maps to 0)."""
    if not A.within(E.m, E.M):
        raise DomainError(f"{A.intervals} is not inside the bracket ({E.m}, {E.M}]")
    X, single = as_batch(E.space, x)
    out = E.set_for(A).project(X)
    if E.representation == "raw":
        ok = np.all((out == X) | (out == 0), axis=1)
        if not ok.all():
            raise StructuralError(f"set function returned a non-projection value at {X[~ok][0]}")
    out = np.where(np.all(X == 0, axis=1)[:, None], 0.0, out)
    return out[0] if single else out


# -- axioms -----------------------------------------------------------------------------------------


@dataclass
class AxiomCheck:
    name: str
    passed: bool
    witness: Optional[dict] = None


@dataclass
class SpAxiomReport:
    representation: str
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name) -> AxiomCheck:
        return self.checks[name]


def _random_interval(rng, m, M) -> IntervalUnion:
    a, b = np.sort(rng.uniform(m, M, 2))
    return IntervalUnion.interval(a, b)


def sp_axiom_check(E: SpectralProjection, samples: SampleSet, interval_fuzz_seed: int = 0, n_pairs: int = 60
                   ) -> SpAxiomReport:
    """Fuzz interval pairs and check the spectral projection axioms pointwise on samples."""
    rng = np.random.default_rng(interval_fuzz_seed)
    X = samples.points
    rep = SpAxiomReport(E.representation)

    def record(name, bad, witness):
        if name not in rep.checks:
            rep.checks[name] = AxiomCheck(name, True)
        if bad and rep.checks[name].passed:
            rep.checks[name] = AxiomCheck(name, False, witness)

    def first_bad(A, B):
        rows = np.flatnonzero(np.any(A != B, axis=1))
        return None if not len(rows) else X[rows[0]].copy()

    w = first_bad(sp_apply(E, IntervalUnion(), X), np.zeros_like(X))
    record("empty_is_zero", w is not None, {"x": w})
    w = first_bad(sp_apply(E, E.full, X), X)
    record("full_is_identity", w is not None, {"x": w})
    for _ in range(n_pairs):
        A, B = _random_interval(rng, E.m, E.M), _random_interval(rng, E.m, E.M)
        if rng.random() < 0.5:
            # force a disjoint pair half of the time
            lo, mid, hi = np.sort(rng.uniform(E.m, E.M, 3))
            A, B = IntervalUnion.interval(lo, mid), IntervalUnion.interval(mid, hi)
        EA, EB = sp_apply(E, A, X), sp_apply(E, B, X)
        EAB = sp_apply(E, A.intersect(B), X)
        w = first_bad(EAB, sp_apply(E, A, EB))
        record("multiplicative", w is not None, {"x": w, "A": A.intervals, "B": B.intervals})
        w = first_bad(sp_apply(E, A, EB), sp_apply(E, B, EA))
        record("commuting", w is not None, {"x": w, "A": A.intervals, "B": B.intervals})
        w = first_bad(sp_apply(E, A, EA), EA)
        record("idempotent", w is not None, {"x": w, "A": A.intervals})
        shape = np.all((EA == X) | (EA == 0), axis=1)
        record("projection_shape", not shape.all(), {"x": X[~shape][0] if not shape.all() else None})
        if A.disjoint(B):
            w = first_bad(sp_apply(E, A.union(B), X), EA + EB)
            record("additive", w is not None, {"x": w, "A": A.intervals, "B": B.intervals})
    return rep


def lower_endpoint_blind(space: SpaceDescriptor, psi, m: float, M: float) -> SpectralProjection:
    """A deliberately broken set function: E{A} keeps {psi <= sup A} and ignores lower endpoints."""

    def sets(A: IntervalUnion) -> ProjectionSet:
        top = m if A.empty else A.sup
        return ProjectionSet(lambda X: np.asarray(psi(X)) <= top, space, f"psi<={top:g}")

    return raw_projection(space, sets, m, M, "E_broken")


# -- integrals ----------------------------------------------------------------------------------------


def _check_partition(E: SpectralProjection, partition: Partition):
    if not (np.isclose(partition.m, E.m, rtol=0, atol=1e-12) and np.isclose(partition.M, E.M, rtol=0, atol=1e-12)):
        raise BracketError(f"partition [{partition.m}, {partition.M}] does not span the bracket ({E.m}, {E.M}]")


def _bin_coefficients(E: SpectralProjection, partition: Partition, coef: np.ndarray, X: np.ndarray) -> np.ndarray:
    """c_{j(x)} for each row (profile fast path); rows at 0 get 0."""
    out = np.zeros(len(X))
    nz = np.any(X != 0, axis=1)
    if nz.any():
        j = partition.bins(E.psi(X[nz]))
        out[nz] = coef[j - 1]
    return out


def _integral(E: SpectralProjection, partition: Partition, coef: np.ndarray, carrier: Callable, name: str
              ) -> NlOperator:
    _check_partition(E, partition)

    if E.representation == "profile":
        def fn(X):
            return _bin_coefficients(E, partition, coef, X)[:, None] * carrier(X)
    else:
        def fn(X):
            out = np.zeros_like(X)
            for j in range(partition.n):
                band = IntervalUnion.interval(partition.knots[j], partition.knots[j + 1])
                out += coef[j] * carrier(sp_apply(E, band, X))
            return out

    return NlOperator(fn, E.space, name=name)


def sp_integral(E: SpectralProjection, f: FuncSpec, partition: Partition, choice: str = "right", seed: int = 0
                ) -> NlOperator:
    """sum_j f(lambda_j) E{(s_{j-1}, s_j]}."""
    coef = f(partition.representatives(choice, seed))
    return _integral(E, partition, coef, lambda X: X, f"int {f.name} dE")


def sp_weighted_integral(E: SpectralProjection, r: NlOperator, f: FuncSpec, partition: Partition,
                         choice: str = "right", seed: int = 0) -> NlOperator:
    """sum_j f(lambda_j) r(E{(s_{j-1}, s_j]} x)."""
    if not r.vanishes_at_zero():
        raise PreconditionError("the weight operator r must vanish at zero")
    coef = f(partition.representatives(choice, seed))
    if E.representation == "profile":
        _check_partition(E, partition)

        def fn(X):
            return _bin_coefficients(E, partition, coef, X)[:, None] * r(X)

        return NlOperator(fn, E.space, name=f"int {f.name} d(r E)")
    return _integral(E, partition, coef, r, f"int {f.name} d(r E)")


def profile_limit(E: SpectralProjection, f: FuncSpec, r: NlOperator | None = None) -> NlOperator:
    """The closed-form limit x -> f(psi(x)) r(x) (r = identity by default)."""
    if E.representation != "profile":
        raise StructuralError("closed-form limits need a profile projection")

    def fn(X):
        out = np.zeros_like(X)
        nz = np.any(X != 0, axis=1)
        if nz.any():
            carrier = X[nz] if r is None else r(X[nz])
            out[nz] = f(E.psi(X[nz]))[:, None] * carrier
        return out

    return NlOperator(fn, E.space, name=f"{f.name}(psi)")


# -- the operator class ---------------------------------------------------------------------------------


@dataclass
class SpectralOperatorClass:
    E: SpectralProjection
    partition: Partition
    members: dict = field(default_factory=dict)
    nondegenerate: Optional[bool] = None
    choice: str = "right"

    def member(self, f: FuncSpec) -> NlOperator:
        op = sp_integral(self.E, f, self.partition, self.choice)
        self.members[f.name] = op
        return op


def sp_class_combine(cls: SpectralOperatorClass, alpha: float, f1: FuncSpec, f2: FuncSpec) -> NlOperator:
    """alpha int f1 dE + int f2 dE, assembled per bin as int (alpha f1 + f2) dE."""
    reps = cls.partition.representatives(cls.choice)
    coef = float(alpha) * f1(reps) + f2(reps)
    op = _integral(cls.E, cls.partition, coef, lambda X: X, f"{alpha:g}{f1.name}+{f2.name}")
    cls.members[op.name] = op
    return op


@dataclass
class NondegeneracyReport:
    passed: bool
    cells: int
    unwitnessed: list
    witnesses: dict

    @property
    def evidence_only(self) -> bool:
        return True


def sp_nondegeneracy_check(E: SpectralProjection, probes, grid: int = 1000) -> NondegeneracyReport:
    """Look for a probe in every cell of a uniform grid on (m, M]; sampled evidence only."""
    P = probes.points if isinstance(probes, SampleSet) else np.atleast_2d(np.asarray(probes, dtype=float))
    knots = np.linspace(E.m, E.M, grid + 1)
    witnesses = {}
    if E.representation == "profile":
        vals = np.asarray(E.psi(P), dtype=float)
        j = np.searchsorted(knots, vals, side="left")
        ok = (j >= 1) & (j <= grid)
        for jj, row in zip(j[ok][::-1], np.flatnonzero(ok)[::-1]):
            witnesses[int(jj)] = P[row]
    else:
        for jj in range(1, grid + 1):
            band = IntervalUnion.interval(knots[jj - 1], knots[jj])
            hit = np.flatnonzero(np.any(sp_apply(E, band, P) != 0, axis=1))
            if len(hit):
                witnesses[jj] = P[hit[0]]
    missing = [(float(knots[k - 1]), float(knots[k])) for k in range(1, grid + 1) if k not in witnesses]
    return NondegeneracyReport(not missing, grid, missing, witnesses)


def cauchy_correspondence(E: SpectralProjection, sequence: Sequence[FuncSpec], limit: FuncSpec,
                          partition: Partition, samples: SampleSet, grid: int = 20001) -> list:
    """Per term: (sampled p(int f_n dE - int f dE), ||f_n - f|| on [m, M])."""
    X = samples.points
    nx = norm(E.space, X)
    base = sp_integral(E, limit, partition)(X)
    t = np.concatenate([np.linspace(E.m, E.M, grid), partition.knots])
    rows = []
    for fn in sequence:
        d = float((norm(E.space, sp_integral(E, fn, partition)(X) - base) / nx).max())
        c = float(np.max(np.abs(fn(t) - limit(t))))
        rows.append((d, c))
    return rows

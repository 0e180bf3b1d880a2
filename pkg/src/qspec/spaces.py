"""Finite-dimensional normed spaces and unital pointwise algebras.

Vectors are plain numpy arrays. A single vector has shape ``(dim,)``; most
functions also accept a batch of shape ``(n, dim)`` and then work row-wise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import StructuralError, UnsupportedOperationError

NORM_KINDS = ("sup", "one", "two")
ALGEBRA_KINDS = ("none", "pointwise_unital")
SAMPLE_KINDS = ("sphere_grid", "ball_random", "mixed")


@dataclass(frozen=True)
class SpaceDescriptor:
    """A coordinate space R^dim with one of three norms.

    ``weights`` are measure weights h_i. They enter the one-norm
    (sum |x_i| h_i) and the integral-style pairings; the sup and two norms
    ignore them.
    """

    dim: int
    norm_kind: str = "sup"
    weights: tuple = None
    algebra: str = "none"
    id: str = ""

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise StructuralError(f"dim must be a positive integer, got {self.dim!r}")
        if self.norm_kind not in NORM_KINDS:
            raise StructuralError(f"unknown norm kind {self.norm_kind!r}")
        if self.algebra not in ALGEBRA_KINDS:
            raise StructuralError(f"unknown algebra kind {self.algebra!r}")
        weights = (1.0,) * self.dim if self.weights is None else tuple(float(w) for w in self.weights)
        if len(weights) != self.dim:
            raise StructuralError(f"expected {self.dim} weights, got {len(weights)}")
        if not all(w > 0 and math.isfinite(w) for w in weights):
            raise StructuralError("weights must be finite and strictly positive")
        # submultiplicativity of the pointwise product only holds for the sup norm
        if self.algebra == "pointwise_unital" and self.norm_kind != "sup":
            raise StructuralError("pointwise algebras are only supported with the sup norm")
        object.__setattr__(self, "weights", weights)
        if not self.id:
            object.__setattr__(self, "id", f"{self.norm_kind}{self.dim}" + ("-alg" if self.is_algebra else ""))

    @property
    def is_algebra(self) -> bool:
        return self.algebra == "pointwise_unital"

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def unit(self) -> np.ndarray:
        """The algebra unit (all ones)."""
        if not self.is_algebra:
            raise UnsupportedOperationError(f"space {self.id} has no algebra unit")
        return np.ones(self.dim)

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim)

    def basis(self) -> np.ndarray:
        return np.eye(self.dim)

    def norm(self, x) -> np.ndarray | float:
        return norm(self, x)

    def mul(self, x, y):
        return alg_mul(self, x, y)


def as_batch(space: SpaceDescriptor, x) -> tuple[np.ndarray, bool]:
    """Return ``x`` as an ``(n, dim)`` float array and whether it was a single vector."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != space.dim:
        raise StructuralError(f"expected vectors of dimension {space.dim}, got shape {np.shape(x)}")
    return arr, single


def norm(space: SpaceDescriptor, x):
    """Norm of a vector or of each row of a batch."""
    arr, single = as_batch(space, x)
    if space.norm_kind == "sup":
        out = np.max(np.abs(arr), axis=1)
    elif space.norm_kind == "one":
        out = np.abs(arr) @ space.h
    else:
        out = np.sqrt(np.einsum("ij,ij->i", arr, arr))
    return float(out[0]) if single else out


def alg_mul(space: SpaceDescriptor, x, y):
    """Pointwise algebra product."""
    if not space.is_algebra:
        raise UnsupportedOperationError(f"space {space.id} is not an algebra")
    a, sa = as_batch(space, x)
    b, sb = as_batch(space, y)
    out = a * b
    return out[0] if (sa and sb) else out


def scalar_algebra() -> SpaceDescriptor:
    """R with |.| and ordinary multiplication."""
    return SpaceDescriptor(1, "sup", (1.0,), "pointwise_unital", "scalar")


def pointwise_algebra(dim: int, weights: Sequence[float] | None = None) -> SpaceDescriptor:
    """R^dim with the sup norm and coordinatewise product; weights default to 1/dim."""
    if weights is None:
        weights = (1.0 / dim,) * dim
    return SpaceDescriptor(dim, "sup", tuple(weights), "pointwise_unital", f"pointwise{dim}")


def weighted_one_space(weights: Sequence[float]) -> SpaceDescriptor:
    return SpaceDescriptor(len(weights), "one", tuple(weights), "none", f"one{len(weights)}")


def euclidean_space(dim: int) -> SpaceDescriptor:
    return SpaceDescriptor(dim, "two", None, "none", f"two{dim}")


def sup_space(dim: int, weights: Sequence[float] | None = None) -> SpaceDescriptor:
    return SpaceDescriptor(dim, "sup", None if weights is None else tuple(weights), "none", f"sup{dim}")


# -- samples -----------------------------------------------------------------


@dataclass(frozen=True)
class SampleSpec:
    """How to draw a sample set.

    ``mixed`` draws half of the points on spheres of log-spaced radii and half
    with log-uniform random radii; ``ball_random`` draws radii uniformly in
    (0, r_max].
    """

    kind: str = "mixed"
    count: int = 1000
    r_min: float = 1e-3
    r_max: float = 10.0
    n_radii: int = 7

    def __post_init__(self):
        if self.kind not in SAMPLE_KINDS:
            raise StructuralError(f"unknown sample kind {self.kind!r}")
        if self.count < 1 or self.n_radii < 3:
            raise StructuralError("count must be positive and n_radii at least 3")
        if not 0 < self.r_min < self.r_max:
            raise StructuralError("need 0 < r_min < r_max")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Deterministic nonzero sample points; the zero vector is kept apart."""

    points: np.ndarray
    space: SpaceDescriptor
    seed: int
    spec: SampleSpec
    counts: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @property
    def zero(self) -> np.ndarray:
        return self.space.zero()

    def including_zero(self) -> np.ndarray:
        """Points with the zero vector prepended as row 0."""
        return np.vstack([self.zero[None, :], self.points])

    def subset(self, n: int) -> np.ndarray:
        """First ``n`` points (deterministic)."""
        return self.points[: min(n, len(self.points))]


def _directions(space: SpaceDescriptor, rng: np.random.Generator, n: int) -> np.ndarray:
    if space.dim == 1:
        return rng.choice([-1.0, 1.0], size=(n, 1))
    d = rng.standard_normal((n, space.dim))
    nrm = norm(space, d)
    bad = nrm == 0
    while bad.any():
        d[bad] = rng.standard_normal((int(bad.sum()), space.dim))
        nrm = norm(space, d)
        bad = nrm == 0
    return d / nrm[:, None]


def sample_set(space: SpaceDescriptor, spec: SampleSpec | None = None, seed: int = 0) -> SampleSet:
    """Draw a reproducible set of nonzero points spanning several norm magnitudes."""
    spec = spec or SampleSpec()
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    grid = np.geomspace(spec.r_min, spec.r_max, spec.n_radii)
    counts = {}
    if spec.kind == "sphere_grid":
        radii = grid[np.arange(spec.count) % spec.n_radii]
        counts["sphere_grid"] = spec.count
    elif spec.kind == "ball_random":
        radii = spec.r_max * (1.0 - rng.random(spec.count))
        # pin three distinct magnitudes so the set is never sphere-only
        radii[: min(3, spec.count)] = grid[[0, spec.n_radii // 2, -1]][: min(3, spec.count)]
        counts["ball_random"] = spec.count
    else:
        n_grid = spec.count // 2
        n_rand = spec.count - n_grid
        r_grid = grid[np.arange(n_grid) % spec.n_radii]
        r_rand = np.exp(rng.uniform(np.log(spec.r_min), np.log(spec.r_max), n_rand))
        radii = np.concatenate([r_grid, r_rand])
        counts = {"sphere_grid": n_grid, "ball_random": n_rand}
    points = _directions(space, rng, spec.count) * radii[:, None]
    if spec.count >= 3:
        mags = np.unique(np.round(norm(space, points), 12))
        assert len(mags) >= 3, "sample set must span at least three norm magnitudes"
    assert np.all(norm(space, points) > 0)
    return SampleSet(points, space, int(seed), spec, counts)

"""Run configurations: strict JSON parsing and assembly into library objects."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .. import quasi_product as qpm
from ..calculus import FuncSpec, named_function
from ..definite import GContext
from ..errors import ConfigError
from ..operators import NlOperator, blackbox, canonical_gamma, identity, profile
from ..spaces import (
    SampleSpec,
    SpaceDescriptor,
    euclidean_space,
    norm,
    pointwise_algebra,
    scalar_algebra,
    sup_space,
    weighted_one_space,
)
from .expr import compile_coordinatewise, compile_scalar

SUITES = ("axioms", "capabilities", "operator_space", "definite", "spectral", "calculus", "spectral_ops")
QP_KINDS = ("scalar_product", "scaled_inner", "integral_pair", "integral_sup", "weighted_sum")
FLAG_KEYS = ("left_integral_domain", "preserves_positivity", "square_bounded_below")


def _reject_unknown(d: dict, allowed, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {extra}; allowed {sorted(allowed)}")


@dataclass
class SpaceConfig:
    kind: str = "scalar"
    dim: int = 1
    weights: Optional[list] = None

    def build(self) -> SpaceDescriptor:
        if self.kind == "scalar":
            return scalar_algebra()
        if self.kind == "pointwise":
            return pointwise_algebra(self.dim, self.weights)
        if self.kind == "one":
            return weighted_one_space(self.weights or [1.0] * self.dim)
        if self.kind == "two":
            return euclidean_space(self.dim)
        if self.kind == "sup":
            return sup_space(self.dim, self.weights)
        raise ConfigError(f"space.kind: unknown kind {self.kind!r}")


@dataclass
class QPConfig:
    kind: str = "scalar_product"
    k: float = 1.0
    flags: dict = field(default_factory=dict)


@dataclass
class OperatorConfig:
    name: str
    phi: Optional[str] = None
    map: Optional[str] = None
    range: Optional[list] = None
    carrier: str = "gamma_canonical"


@dataclass
class RunConfig:
    name: str = "run"
    space: SpaceConfig = field(default_factory=SpaceConfig)
    quasi_product: QPConfig = field(default_factory=QPConfig)
    gamma: str = "canonical"
    operators: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)
    seed: int = 0
    schedule: list = field(default_factory=lambda: [25, 50, 100, 200, 400])
    choice: str = "right"
    functions: list = field(default_factory=lambda: ["exp"])
    tolerances: dict = field(default_factory=dict)
    suites: list = field(default_factory=lambda: list(SUITES))

    # -- serialisation --

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _reject_unknown(d, cls.__dataclass_fields__, "config")
        kw = dict(d)
        sp = kw.get("space", {})
        _reject_unknown(sp, SpaceConfig.__dataclass_fields__, "space")
        kw["space"] = SpaceConfig(**sp)
        qp = kw.get("quasi_product", {})
        _reject_unknown(qp, QPConfig.__dataclass_fields__, "quasi_product")
        kw["quasi_product"] = QPConfig(**qp)
        if kw["quasi_product"].kind not in QP_KINDS:
            raise ConfigError(f"quasi_product.kind: unknown kind {kw['quasi_product'].kind!r}")
        _reject_unknown(kw["quasi_product"].flags, FLAG_KEYS, "quasi_product.flags")
        ops = []
        for i, o in enumerate(kw.get("operators", [])):
            _reject_unknown(o, OperatorConfig.__dataclass_fields__, f"operators[{i}]")
            if "name" not in o:
                raise ConfigError(f"operators[{i}]: missing 'name'")
            oc = OperatorConfig(**o)
            if (oc.phi is None) == (oc.map is None):
                raise ConfigError(f"operators[{i}]: give exactly one of 'phi' (profile) or 'map' (black box)")
            ops.append(oc)
        kw["operators"] = ops
        _reject_unknown(kw.get("samples", {}), SampleSpec.__dataclass_fields__, "samples")
        _reject_unknown(kw.get("tolerances", {}), ("axioms", "definite", "sqrt", "calculus", "identity"),
                        "tolerances")
        for s in kw.get("suites", []):
            if s not in SUITES:
                raise ConfigError(f"suites: unknown suite {s!r}; known {list(SUITES)}")
        if kw.get("gamma", "canonical") not in ("canonical", "identity"):
            raise ConfigError("gamma: expected 'canonical' or 'identity'")
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from None

    @classmethod
    def from_json(cls, text: str, source: str = "<string>") -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    # -- assembly --

    def tol(self, key: str) -> float:
        defaults = {"axioms": 1e-9, "definite": 1e-12, "sqrt": 1e-8, "calculus": 1e-3, "identity": 1e-9}
        return float(self.tolerances.get(key, defaults[key]))

    def effective_seed(self) -> int:
        env = os.environ.get("QSPEC_SEED")
        if env is None or env == "":
            return int(self.seed)
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"QSPEC_SEED must be an integer, got {env!r}") from None

    def sample_spec(self) -> SampleSpec:
        try:
            return SampleSpec(**self.samples)
        except Exception as exc:
            raise ConfigError(f"samples: {exc}") from None


def build_quasi_product(cfg: RunConfig, space: SpaceDescriptor) -> qpm.QuasiProduct:
    qc = cfg.quasi_product
    try:
        if qc.kind == "scalar_product":
            qp = qpm.scalar_product(space)
        elif qc.kind == "scaled_inner":
            qp = qpm.scaled_inner(space, qc.k)
        elif qc.kind == "integral_pair":
            qp = qpm.integral_pair(space)
        elif qc.kind == "integral_sup":
            qp = qpm.integral_sup(space)
        else:
            qp = qpm.weighted_sum(space)
    except Exception as exc:
        raise ConfigError(f"quasi_product: {exc}") from None
    if qc.flags:
        qp = qpm.with_flags(qp, **qc.flags)
    return qp


def build_context(cfg: RunConfig) -> GContext:
    space = cfg.space.build()
    qp = build_quasi_product(cfg, space)
    if space.is_algebra:
        g = canonical_gamma(space)
        gam = g if cfg.gamma == "canonical" else identity(space)
    else:
        # non-algebra spaces only run the pairing suites; g is the identity there
        g = gam = identity(space)
    return GContext(qp, g, gam, space, cfg.name)


def build_operator(oc: OperatorConfig, space: SpaceDescriptor) -> NlOperator:
    nf = lambda X: norm(space, X)  # noqa: E731
    if oc.phi is not None:
        phi = compile_scalar(oc.phi, space.dim, nf)
        rng = tuple(oc.range) if oc.range is not None else None
        if rng is not None and (len(rng) != 2 or rng[0] > rng[1]):
            raise ConfigError(f"operators[{oc.name}].range: expected [lo, hi]")
        return profile(space, phi, oc.carrier, rng, name=oc.name)
    fn = compile_coordinatewise(oc.map, space.dim, nf)

    def mapped(X):
        out = fn(X)
        out[np.all(X == 0, axis=1)] = 0.0
        return out

    return blackbox(space, mapped, name=oc.name)


def build_functions(cfg: RunConfig) -> list[FuncSpec]:
    try:
        return [named_function(n) for n in cfg.functions]
    except ValueError as exc:
        raise ConfigError(f"functions: {exc}") from None


def shipped_configs() -> list[str]:
    root = resources.files("qspec") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(name_or_path: str) -> RunConfig:
    """Load a shipped config by name or a JSON file by path."""
    p = Path(name_or_path)
    if p.is_file():
        return RunConfig.from_json(p.read_text(encoding="utf-8"), str(p))
    res = resources.files("qspec") / "configs" / f"{name_or_path}.json"
    if res.is_file():
        return RunConfig.from_json(res.read_text(encoding="utf-8"), f"{name_or_path}.json")
    raise ConfigError(f"no config file or shipped config named {name_or_path!r}; shipped: {shipped_configs()}")

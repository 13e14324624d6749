"""Registry of label-preserving image transforms: surrogate corruptions and corrective actions.

Specs round-trip through a small text grammar, ``name(param=value,...)``, e.g.
``clahe(tiles=2,limit=1)``; a bare ``identity`` is also accepted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import filters
from .imagecore import SampleSet

CORRUPTION = "corruption"
CORRECTION = "correction"
IDENTITY = "identity"
KINDS = (CORRUPTION, CORRECTION, IDENTITY)


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    type: type
    low: float | None = None
    high: float | None = None
    default: float | None = None


@dataclass(frozen=True)
class Entry:
    fn: Callable
    kind: str
    params: dict[str, Param]
    stochastic: bool = False


REGISTRY: dict[str, Entry] = {
    "identity": Entry(lambda x: x, IDENTITY, {}),
    "uniform_noise": Entry(
        filters.uniform_noise, CORRUPTION, {"b": Param(float, 0.0, 1.0)}, stochastic=True
    ),
    "gaussian_noise": Entry(
        filters.gaussian_noise, CORRUPTION, {"sigma": Param(float, 0.0, 1.0)}, stochastic=True
    ),
    "impulse_noise": Entry(
        filters.impulse_noise, CORRUPTION, {"amount": Param(float, 0.0, 1.0)}, stochastic=True
    ),
    "gaussian_blur": Entry(filters.gaussian_blur, CORRUPTION, {"sigma": Param(float, 0.0, 10.0)}),
    "median_blur": Entry(filters.median_blur, CORRUPTION, {"k": Param(int, 1, 31)}),
    "gamma": Entry(filters.gamma, CORRUPTION, {"gamma": Param(float, 0.05, 10.0)}),
    "sigmoid": Entry(
        filters.sigmoid,
        CORRUPTION,
        {"cutoff": Param(float, 0.0, 1.0, 0.5), "gain": Param(float, 0.0, 50.0)},
    ),
    "gaussian_denoise": Entry(
        filters.gaussian_denoise, CORRECTION, {"sigma": Param(float, 0.0, 10.0, 0.6)}
    ),
    "bilateral": Entry(
        filters.bilateral,
        CORRECTION,
        {
            "radius": Param(int, 1, 10, 2),
            "sigma_spatial": Param(float, 1e-3, 100.0, 2.0),
            "sigma_range": Param(float, 1e-3, 10.0, 0.1),
        },
    ),
    "wavelet_bayes": Entry(lambda x: filters.wavelet_denoise(x, "bayes"), CORRECTION, {}),
    "wavelet_visu": Entry(lambda x: filters.wavelet_denoise(x, "visu"), CORRECTION, {}),
    "clahe": Entry(
        filters.clahe,
        CORRECTION,
        {"tiles": Param(int, 1, 64), "limit": Param(float, 1e-3, 256.0)},
    ),
}


@dataclass(frozen=True)
class TransformSpec:
    name: str
    params: dict = field(default_factory=dict, hash=False, compare=True)
    kind: str | None = None
    severity: int | None = None
    family: str | None = None

    def __post_init__(self):
        entry = REGISTRY.get(self.name)
        if entry is None:
            raise TransformError(f"unknown transform {self.name!r}")
        kind = self.kind or entry.kind
        if kind not in KINDS:
            raise TransformError(f"unknown kind {kind!r}")
        if kind == IDENTITY and self.params:
            raise TransformError("identity takes no parameters")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", _validate(self.name, entry, dict(self.params)))
        if self.severity is not None and not 1 <= self.severity <= 5:
            raise TransformError(f"severity must be 1..5, got {self.severity}")

    def __str__(self):
        return format_spec(self)

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items())), self.kind, self.severity))


def _validate(name: str, entry: Entry, params: dict) -> dict:
    unknown = set(params) - set(entry.params)
    if unknown:
        raise TransformError(f"{name}: unknown parameter(s) {sorted(unknown)}")
    out = {}
    for key, schema in entry.params.items():
        if key not in params:
            if schema.default is None:
                raise TransformError(f"{name}: missing parameter {key!r}")
            value = schema.default
        else:
            value = params[key]
        if schema.type is int:
            if float(value) != int(float(value)):
                raise TransformError(f"{name}: {key} must be an integer, got {value!r}")
            value = int(float(value))
        else:
            value = float(value)
        if not np.isfinite(value):
            raise TransformError(f"{name}: {key} must be finite")
        if (schema.low is not None and value < schema.low) or (
            schema.high is not None and value > schema.high
        ):
            raise TransformError(f"{name}: {key}={value} outside [{schema.low}, {schema.high}]")
        out[key] = value
    return out


_SPEC_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def parse_spec(text: str) -> TransformSpec:
    m = _SPEC_RE.match(text)
    if m is None:
        raise TransformError(f"cannot parse transform {text!r}")
    name, body = m.group(1), m.group(2)
    params = {}
    if body and body.strip():
        for item in body.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise TransformError(f"expected key=value in {text!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise TransformError(f"non-numeric value in {text!r}") from None
    return TransformSpec(name, params)


def _fmt(v) -> str:
    text = repr(v) if isinstance(v, int) else repr(float(v))
    return text[:-2] if text.endswith(".0") else text


def format_spec(spec: TransformSpec) -> str:
    if not spec.params:
        return spec.name
    inner = ",".join(f"{k}={_fmt(v)}" for k, v in spec.params.items())
    return f"{spec.name}({inner})"


def apply(spec: TransformSpec, batch: SampleSet, seed: int = 0) -> SampleSet:
    """Apply ``spec`` to every image; labels pass through untouched."""
    if len(batch) == 0:
        raise TransformError("cannot transform an empty batch")
    entry = REGISTRY[spec.name]
    if spec.kind == IDENTITY or spec.name == "identity":
        return batch.with_images(batch.images.copy())
    if entry.stochastic:
        out = entry.fn(batch.images, **spec.params, seed=seed)
    else:
        out = entry.fn(batch.images, **spec.params)
    return batch.with_images(out)


def compose(seq, batch: SampleSet, seed: int = 0, horizon: int | None = None) -> SampleSet:
    """Fold ``apply`` over ``seq`` first to last; every step sees the same seed."""
    seq = list(seq)
    if horizon is not None and len(seq) > horizon:
        raise TransformError(f"sequence of {len(seq)} exceeds horizon {horizon}")
    out = batch
    for spec in seq:
        out = apply(spec, out, seed)
    return out


SURROGATE_FAMILIES = {
    "uniform_noise": ("uniform_noise", "b", (0.14, 0.22, 0.32, 0.40, 0.90), {}),
    "median_blur": ("median_blur", "k", (2, 3, 4, 5, 6), {}),
    "gamma_a": ("gamma", "gamma", (1.4, 1.7, 2.0, 2.5, 3.0), {}),
    "gamma_b": ("gamma", "gamma", (0.9, 0.8, 0.7, 0.6, 0.5), {}),
    "sigmoid_a": ("sigmoid", "gain", (7, 8, 9, 10, 11), {"cutoff": 0.5}),
    "sigmoid_b": ("sigmoid", "gain", (7, 6, 5, 4, 3), {"cutoff": 0.5}),
}
PROFILES = {"paper-imagenet": SURROGATE_FAMILIES}
POLICY_FAMILIES = ("uniform_noise", "gamma_a")


def family_specs(family: str, profile: str = "paper-imagenet") -> list[TransformSpec]:
    if profile not in PROFILES:
        raise TransformError(f"unknown surrogate profile {profile!r}")
    try:
        name, key, values, fixed = PROFILES[profile][family]
    except KeyError:
        raise TransformError(f"unknown surrogate family {family!r}") from None
    return [
        TransformSpec(name, {**fixed, key: v}, CORRUPTION, severity=i + 1, family=family)
        for i, v in enumerate(values)
    ]


def surrogate_suite(profile: str = "paper-imagenet") -> list[TransformSpec]:
    """All surrogate families at severities 1..5."""
    if profile not in PROFILES:
        raise TransformError(f"unknown surrogate profile {profile!r}")
    return [s for fam in PROFILES[profile] for s in family_specs(fam, profile)]


def action_library() -> list[TransformSpec]:
    return [
        TransformSpec("gaussian_denoise", {"sigma": 0.6}),
        TransformSpec("bilateral", {"radius": 2}),
        TransformSpec("wavelet_bayes"),
        TransformSpec("wavelet_visu"),
        TransformSpec("clahe", {"tiles": 2, "limit": 1}),
        TransformSpec("clahe", {"tiles": 2, "limit": 2}),
        TransformSpec("clahe", {"tiles": 6, "limit": 1}),
        TransformSpec("identity"),
    ]

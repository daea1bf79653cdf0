"""Problem instances, the synthetic generation recipe and the instance file format.

Instance files are UTF-8 JSON documents::

    {
      "id": "n5_d2_sym_s0",
      "d": 2,
      "n": 5,
      "lambda_preset": "median",
      "seed": 0,
      "mode": "sym",
      "recipe_version": "v1",
      "demands": [
        {"center": [x1, x2], "weight": w, "kind": "ball", "params": {"R": 0.7}},
        {"center": [...], "weight": w, "kind": "shell", "params": {"r": 0.56, "R": 0.7},
         "skew": {"u": [u1, u2], "kappa": 1.0}},
        ...
      ]
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import distributions as dist
from .exceptions import ConfigurationError, DomainError, InstanceFormatError, OWPError
from .ordered import LAMBDA_PRESETS, lambda_preset
from .rng import GENERATE, make_rng

RECIPE_VERSION = "v1"
MODES = ("sym", "asym", "mixed")
RECIPE_KINDS = ("ball", "shell", "gaussian")
BOX_SIDE = 10.0


@dataclass(frozen=True)
class DemandSpec:
    distribution: dist.DistributionSpec
    weight: float

    @property
    def center(self):
        return np.asarray(self.distribution.center)


@dataclass(frozen=True)
class Instance:
    """A full problem statement: demands, weights and the ordered objective."""

    id: str
    d: int
    demands: tuple
    lambda_preset: str = "median"
    seed: int | None = None
    mode: str = "sym"
    recipe_version: str = RECIPE_VERSION
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        demands = tuple(self.demands)
        if not demands:
            raise DomainError("an instance needs at least one demand")
        for i, dem in enumerate(demands):
            if dem.distribution.dim != self.d:
                raise DomainError(f"demand {i} has dimension {dem.distribution.dim}, expected {self.d}")
            if not (math.isfinite(dem.weight) and dem.weight >= 0):
                raise DomainError(f"demand {i} weight must be finite and >= 0")
        if self.lambda_preset not in LAMBDA_PRESETS:
            raise ConfigurationError(f"unknown lambda preset {self.lambda_preset!r}")
        object.__setattr__(self, "demands", demands)

    @property
    def n(self):
        return len(self.demands)

    @property
    def weights(self):
        return np.array([dem.weight for dem in self.demands], dtype=float)

    @property
    def centers(self):
        return np.array([dem.distribution.center for dem in self.demands], dtype=float)

    @property
    def distributions(self):
        return [dem.distribution for dem in self.demands]

    @property
    def symmetric(self):
        return all(dem.distribution.symmetric for dem in self.demands)

    def lam(self, preset=None):
        return lambda_preset(preset or self.lambda_preset, self.n)

    def with_preset(self, preset):
        return Instance(self.id, self.d, self.demands, preset, self.seed, self.mode,
                        self.recipe_version, dict(self.extra))


def _alpha(centers, weights, d):
    n = centers.shape[0]
    roots = weights ** (1.0 / d)
    alpha = math.inf
    for i in range(n - 1):
        dij = np.linalg.norm(centers[i + 1:] - centers[i], axis=1)
        ratio = dij / (roots[i] + roots[i + 1:])
        alpha = min(alpha, float(np.min(ratio)) ** d)
    return alpha


def generate(n, d, seed, mode="sym", kinds=RECIPE_KINDS, lambda_preset="median", kappa=1.0,
             instance_id=None):
    """Draw a synthetic instance.

    Centers are uniform in ``[0, 10]^d``; weights are uniform draws rescaled
    affinely onto ``[1, 10]``; radii are ``R_i = (w_i * alpha)^(1/d)`` with the
    largest ``alpha`` keeping the balls ``B(c_i, R_i)`` pairwise disjoint.
    Each demand gets a kind from ``kinds``: balls of radius ``R_i``, shells
    ``(4 R_i / 5, R_i)`` or gaussians with ``sigma_i = R_i / 2``. In ``asym``
    mode every demand is skewed toward a random unit vector, in ``mixed``
    mode each one with probability 1/2.
    """
    n, d = int(n), int(d)
    if n < 1:
        raise DomainError("n must be at least 1")
    if d < 2:
        raise DomainError("d must be at least 2")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    kinds = tuple(kinds)
    for k in kinds:
        if k not in dist.KINDS or k == "point":
            raise ConfigurationError(f"unsupported recipe kind {k!r}")
    if instance_id is None:
        instance_id = f"n{n}_d{d}_{mode}_s{seed}"
        if kinds != RECIPE_KINDS:
            instance_id += "_" + "-".join(kinds)
    rng = make_rng(seed, GENERATE, n, d, MODES.index(mode))
    for _ in range(100):
        centers = rng.uniform(0.0, BOX_SIDE, size=(n, d))
        raw = rng.random(n)
        if n == 1 or raw.max() == raw.min():
            weights = np.ones(n)
        else:
            weights = np.clip(1.0 + 9.0 * (raw - raw.min()) / (raw.max() - raw.min()), 1.0, 10.0)
            # pin the extremes so rounding cannot pull them off the endpoints
            weights[np.argmin(raw)], weights[np.argmax(raw)] = 1.0, 10.0
        alpha = 1.0 / weights[0] if n == 1 else _alpha(centers, weights, d)
        if alpha > 0 and math.isfinite(alpha):
            break
    else:
        raise OWPError("could not generate distinct centers in 100 attempts")
    radii = (weights * alpha) ** (1.0 / d)
    kind_idx = rng.integers(0, len(kinds), size=n)
    skew_flags = {"sym": np.zeros(n, bool), "asym": np.ones(n, bool),
                  "mixed": rng.random(n) < 0.5}[mode]
    directions = rng.standard_normal((n, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    demands = []
    for i in range(n):
        kind, R = kinds[kind_idx[i]], float(radii[i])
        params = {"ball": {"R": R}, "sphere": {"R": R}, "shell": {"r": 4 * R / 5, "R": R},
                  "gaussian": {"sigma": R / 2}, "tstudent": {"q": 3.0, "sigma": R / 2}}[kind]
        spec = dist.DistributionSpec(
            kind, tuple(centers[i]), params,
            skew_direction=tuple(directions[i]) if skew_flags[i] else None,
            skew_strength=kappa)
        demands.append(DemandSpec(spec, float(weights[i])))
    return Instance(instance_id, d, tuple(demands), lambda_preset, int(seed), mode, RECIPE_VERSION,
                    {"alpha": alpha, "kinds": list(kinds)})


def recipe_radii(centers, weights):
    """Non-overlap radii ``(w_i * alpha)^(1/d)`` for given centers and weights.

    Returns
    -------
    radii : ndarray
    alpha : float
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    weights = np.asarray(weights, dtype=float)
    n, d = centers.shape
    alpha = 1.0 / weights[0] if n == 1 else _alpha(centers, weights, d)
    return (weights * alpha) ** (1.0 / d), alpha


def radii_of(instance):
    """Outer radius parameter of every demand (``R`` or the scale proxy)."""
    return np.array([dist.scale(s) for s in instance.distributions])


def instance_to_dict(instance):
    out = {
        "id": instance.id,
        "d": instance.d,
        "n": instance.n,
        "lambda_preset": instance.lambda_preset,
        "seed": instance.seed,
        "mode": instance.mode,
        "recipe_version": instance.recipe_version,
    }
    if instance.extra:
        out["extra"] = instance.extra
    demands = []
    for dem in instance.demands:
        rec = {"center": list(dem.distribution.center), "weight": dem.weight}
        rec.update({k: v for k, v in dist.to_dict(dem.distribution).items() if k != "center"})
        demands.append(rec)
    out["demands"] = demands
    return out


def dumps(instance):
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def save_instance(instance, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(instance), encoding="utf-8")


def _require(obj, key, where, types):
    if key not in obj:
        raise InstanceFormatError(f"{where}: missing field '{key}'")
    val = obj[key]
    if not isinstance(val, types) or isinstance(val, bool) and bool not in types:
        raise InstanceFormatError(f"{where}.{key}: expected {types}, got {type(val).__name__}")
    return val


def instance_from_dict(data, source="<instance>"):
    if not isinstance(data, dict):
        raise InstanceFormatError(f"{source}: top level must be an object")
    num = (int, float)
    iid = _require(data, "id", source, (str,))
    d = _require(data, "d", source, (int,))
    n = _require(data, "n", source, (int,))
    preset = _require(data, "lambda_preset", source, (str,))
    if preset not in LAMBDA_PRESETS:
        raise InstanceFormatError(f"{source}.lambda_preset: unknown preset {preset!r}")
    seed = data.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise InstanceFormatError(f"{source}.seed: expected integer or null")
    mode = data.get("mode", "sym")
    version = data.get("recipe_version", RECIPE_VERSION)
    raw = _require(data, "demands", source, (list,))
    if len(raw) != n:
        raise InstanceFormatError(f"{source}.n: declares {n} demands but {len(raw)} are listed")
    demands = []
    for i, rec in enumerate(raw):
        where = f"{source}.demands[{i}]"
        if not isinstance(rec, dict):
            raise InstanceFormatError(f"{where}: expected an object")
        center = _require(rec, "center", where, (list,))
        if len(center) != d or not all(isinstance(c, num) for c in center):
            raise InstanceFormatError(f"{where}.center: expected {d} numbers")
        weight = _require(rec, "weight", where, num)
        if not (math.isfinite(weight) and weight >= 0):
            raise InstanceFormatError(f"{where}.weight: must be finite and >= 0, got {weight}")
        kind = _require(rec, "kind", where, (str,))
        params = rec.get("params", {})
        if not isinstance(params, dict) or not all(isinstance(v, num) for v in params.values()):
            raise InstanceFormatError(f"{where}.params: expected an object of numbers")
        skew = rec.get("skew")
        try:
            spec = dist.from_dict({"kind": kind, "center": center, "params": params,
                                   **({"skew": skew} if skew is not None else {})})
        except (DomainError, KeyError, TypeError) as exc:
            raise InstanceFormatError(f"{where}: {exc}") from exc
        demands.append(DemandSpec(spec, float(weight)))
    try:
        return Instance(iid, d, tuple(demands), preset, seed, mode, version, dict(data.get("extra", {})))
    except OWPError as exc:
        raise InstanceFormatError(f"{source}: {exc}") from exc


def loads(text, source="<instance>"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(data, source)


def load_instance(path):
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), str(path))


def from_distributions(specs, weights=None, lambda_preset="median", instance_id="custom"):
    """Convenience constructor for hand-built instances."""
    specs = list(specs)
    if weights is None:
        weights = np.ones(len(specs))
    demands = tuple(DemandSpec(s, float(w)) for s, w in zip(specs, weights))
    return Instance(instance_id, specs[0].dim, demands, lambda_preset, None, "custom", RECIPE_VERSION)

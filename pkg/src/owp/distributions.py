"""Spherically symmetric demand laws, their skewed variants and closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .exceptions import DomainError, UnsupportedModeError
from .rng import as_generator

KINDS = ("point", "sphere", "ball", "shell", "gaussian", "tstudent")

_PARAM_NAMES = {
    "point": (),
    "sphere": ("R",),
    "ball": ("R",),
    "shell": ("r", "R"),
    "gaussian": ("sigma",),
    "tstudent": ("q", "sigma"),
}


@dataclass(frozen=True)
class DistributionSpec:
    """Law of one uncertain demand location.

    Parameters
    ----------
    kind : {'point', 'sphere', 'ball', 'shell', 'gaussian', 'tstudent'}
    center : tuple of float
        Symmetry center.
    params : dict
        ``R`` for sphere/ball, ``r`` and ``R`` for shell, ``sigma`` for
        gaussian, ``q`` and ``sigma`` for tstudent.
    skew_direction : tuple of float, optional
        Unit vector ``u``; when given, directions are drawn as
        ``normalize(U + skew_strength * u)`` instead of uniformly.
    skew_strength : float
    """

    kind: str
    center: tuple
    params: dict
    skew_direction: tuple | None = None
    skew_strength: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown distribution kind {self.kind!r}")
        center = tuple(float(c) for c in np.asarray(self.center, dtype=float).reshape(-1))
        if not center or not all(math.isfinite(c) for c in center):
            raise DomainError("center must be a nonempty finite vector")
        object.__setattr__(self, "center", center)
        expected = _PARAM_NAMES[self.kind]
        params = dict(self.params or {})
        if set(params) != set(expected):
            raise DomainError(f"{self.kind} expects parameters {expected}, got {tuple(params)}")
        params = {k: float(params[k]) for k in expected}
        if not all(math.isfinite(v) for v in params.values()):
            raise DomainError("distribution parameters must be finite")
        object.__setattr__(self, "params", params)
        if self.kind in ("sphere", "ball") and params["R"] < 0:
            raise DomainError(f"{self.kind} radius R must be >= 0")
        if self.kind == "shell" and not 0 <= params["r"] < params["R"]:
            raise DomainError("shell requires 0 <= r < R")
        if self.kind in ("gaussian", "tstudent") and params["sigma"] <= 0:
            raise DomainError("sigma must be > 0")
        if self.kind == "tstudent" and params["q"] <= 1:
            raise DomainError("tstudent requires q > 1 (finite first moment)")
        if self.skew_direction is not None:
            u = np.asarray(self.skew_direction, dtype=float).reshape(-1)
            if u.size != len(center):
                raise DomainError("skew direction has the wrong dimension")
            nu = float(np.linalg.norm(u))
            if not math.isfinite(nu) or abs(nu - 1.0) > 1e-9:
                raise DomainError("skew direction must be a unit vector")
            object.__setattr__(self, "skew_direction", tuple(float(v) for v in u))
            if not (math.isfinite(self.skew_strength) and self.skew_strength >= 0):
                raise DomainError("skew strength must be >= 0")
        object.__setattr__(self, "skew_strength", float(self.skew_strength))

    @property
    def dim(self):
        return len(self.center)

    @property
    def symmetric(self):
        return self.skew_direction is None

    def __hash__(self):
        return hash((self.kind, self.center, tuple(self.params.items()),
                     self.skew_direction, self.skew_strength))


def point(center):
    return DistributionSpec("point", center, {})


def sphere(center, R):
    return DistributionSpec("sphere", center, {"R": R})


def ball(center, R):
    return DistributionSpec("ball", center, {"R": R})


def shell(center, r, R):
    return DistributionSpec("shell", center, {"r": r, "R": R})


def gaussian(center, sigma):
    return DistributionSpec("gaussian", center, {"sigma": sigma})


def tstudent(center, q, sigma):
    return DistributionSpec("tstudent", center, {"q": q, "sigma": sigma})


def uniform_directions(rng, m, d):
    z = rng.standard_normal((m, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _radii(spec, rng, m):
    d, p = spec.dim, spec.params
    kind = spec.kind
    if kind == "point":
        return np.zeros(m)
    if kind == "sphere":
        return np.full(m, p["R"])
    if kind == "ball":
        return p["R"] * rng.random(m) ** (1.0 / d)
    if kind == "shell":
        lo, hi = p["r"] ** d, p["R"] ** d
        return (lo + rng.random(m) * (hi - lo)) ** (1.0 / d)
    if kind == "gaussian":
        return p["sigma"] * np.sqrt(rng.chisquare(d, m))
    # multivariate t: sigma * ||Z|| / sqrt(W / q)
    w = rng.chisquare(p["q"], m)
    return p["sigma"] * np.sqrt(rng.chisquare(d, m)) / np.sqrt(w / p["q"])


def sample(spec, m, rng):
    """Draw ``m`` i.i.d. points from ``spec``.

    Symmetric laws are ``center + radius * U`` with ``U`` uniform on the unit
    sphere; gaussian and t laws draw the normal vector directly. Skewed specs
    keep the radial law and replace ``U`` by ``normalize(U + kappa * u)``.
    """
    m = int(m)
    if m < 1:
        raise DomainError("sample size must be at least 1")
    rng = as_generator(rng)
    d = spec.dim
    c = np.asarray(spec.center)
    if spec.kind == "point":
        return np.tile(c, (m, 1))
    if spec.symmetric and spec.kind in ("gaussian", "tstudent"):
        z = rng.standard_normal((m, d)) * spec.params["sigma"]
        if spec.kind == "tstudent":
            q = spec.params["q"]
            z /= np.sqrt(rng.chisquare(q, m) / q)[:, None]
        return c + z
    u = uniform_directions(rng, m, d)
    if not spec.symmetric:
        u = u + spec.skew_strength * np.asarray(spec.skew_direction)
        nrm = np.linalg.norm(u, axis=1, keepdims=True)
        # U = -kappa*u has probability zero; guard anyway
        u = np.where(nrm > 0, u / np.where(nrm > 0, nrm, 1.0), np.asarray(spec.skew_direction))
    return c + _radii(spec, rng, m)[:, None] * u


def _gamma_ratio(a, b):
    return math.exp(special.gammaln(a) - special.gammaln(b))


def expected_center_distance(spec):
    """Closed form of ``E||X - center||`` for a spherically symmetric spec."""
    if not spec.symmetric:
        raise UnsupportedModeError("no closed form for skewed distributions")
    d, p = spec.dim, spec.params
    kind = spec.kind
    if kind == "point":
        return 0.0
    if kind == "sphere":
        return p["R"]
    if kind == "ball":
        return d * p["R"] / (d + 1)
    if kind == "shell":
        r, R = p["r"], p["R"]
        return d / (d + 1) * (R ** (d + 1) - r ** (d + 1)) / (R ** d - r ** d)
    chi_mean = math.sqrt(2.0) * _gamma_ratio((d + 1) / 2, d / 2)
    if kind == "gaussian":
        return p["sigma"] * chi_mean
    q = p["q"]
    if q <= 1:
        raise DomainError("tstudent mean distance needs q > 1")
    return (p["sigma"] * math.sqrt(q) * _gamma_ratio((d + 1) / 2, d / 2)
            * _gamma_ratio((q - 1) / 2, q / 2))


def moment_check(spec):
    """Whether ``E||X|| < inf`` for ``spec``."""
    if spec.kind == "tstudent":
        return spec.params["q"] > 1
    return True


def scale(spec):
    """Length scale used for initial SAA sizes and discretization budgets.

    The radius for bounded kinds, ``2 sigma`` for gaussian and
    ``2 sigma sqrt(q / (q - 2))`` for t laws with ``q > 2``.
    """
    p = spec.params
    if spec.kind == "point":
        return 0.0
    if spec.kind in ("sphere", "ball", "shell"):
        return p["R"]
    if spec.kind == "gaussian":
        return 2.0 * p["sigma"]
    q = p["q"]
    if q > 2:
        return 2.0 * p["sigma"] * math.sqrt(q / (q - 2))
    return 2.0 * p["sigma"]


def radial_quantile(spec, prob):
    """``prob``-quantile of ``||X - center||``; skew leaves it unchanged."""
    if not 0 <= prob <= 1:
        raise DomainError("prob must lie in [0, 1]")
    d, p = spec.dim, spec.params
    kind = spec.kind
    if kind == "point":
        return 0.0
    if kind == "sphere":
        return p["R"]
    if kind == "ball":
        return p["R"] * prob ** (1.0 / d)
    if kind == "shell":
        lo, hi = p["r"] ** d, p["R"] ** d
        return (lo + prob * (hi - lo)) ** (1.0 / d)
    if prob == 1:
        return math.inf
    if kind == "gaussian":
        return p["sigma"] * math.sqrt(stats.chi2.ppf(prob, d))
    return p["sigma"] * math.sqrt(d * stats.f.ppf(prob, d, p["q"]))


def to_dict(spec):
    out = {"kind": spec.kind, "center": list(spec.center), "params": dict(spec.params)}
    if spec.skew_direction is not None:
        out["skew"] = {"u": list(spec.skew_direction), "kappa": spec.skew_strength}
    return out


def from_dict(data):
    skew = data.get("skew")
    return DistributionSpec(
        kind=data["kind"],
        center=tuple(data["center"]),
        params=dict(data.get("params", {})),
        skew_direction=None if skew is None else tuple(skew["u"]),
        skew_strength=1.0 if skew is None else float(skew.get("kappa", 1.0)),
    )

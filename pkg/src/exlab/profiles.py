"""Site-density profiles ``alpha(x)`` for product measures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np


class ProfileError(ValueError):
    pass


def _sites(x) -> np.ndarray:
    x = np.asarray(x)
    return x.reshape(1, -1) if x.ndim == 1 else x


class DensityProfile:
    """Base class.  ``density`` takes an ``(n, d)`` site array (or one site)."""

    def density(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        x = np.asarray(x)
        out = self.density(_sites(x))
        return float(out[0]) if x.ndim == 1 else out

    def to_spec(self) -> dict:
        raise NotImplementedError


def _check_density(name, value):
    if not 0.0 <= value <= 1.0:
        raise ProfileError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class Constant(DensityProfile):
    rho: float

    def __post_init__(self):
        _check_density("rho", self.rho)

    def density(self, x):
        return np.full(len(_sites(x)), float(self.rho))

    def to_spec(self):
        return {"type": "constant", "rho": self.rho}


@dataclass(frozen=True)
class ExponentialC(DensityProfile):
    """``alpha_c(x) = c e^{<x,v>} / (1 + c e^{<x,v>})``; odds ``c e^{<x,v>}``."""

    c: float
    v: tuple[float, ...]

    def __post_init__(self):
        if not self.c > 0:
            raise ProfileError("ExponentialC requires c > 0")
        object.__setattr__(self, "v", tuple(float(a) for a in self.v))

    def log_odds(self, x) -> np.ndarray:
        return np.log(self.c) + _sites(x) @ np.asarray(self.v)

    def density(self, x):
        # logistic of the log-odds, computed without overflow
        s = self.log_odds(x)
        return 0.5 * (1.0 + np.tanh(0.5 * s))

    def to_spec(self):
        return {"type": "exponential", "c": self.c, "v": list(self.v)}


@dataclass(frozen=True)
class StepV(DensityProfile):
    """``r`` where ``<x, v> >= threshold``, ``l`` elsewhere."""

    left: float
    right: float
    v: tuple[float, ...]
    threshold: float = 0.0

    def __post_init__(self):
        _check_density("left", self.left)
        _check_density("right", self.right)
        object.__setattr__(self, "v", tuple(float(a) for a in self.v))

    def density(self, x):
        s = _sites(x) @ np.asarray(self.v)
        return np.where(s >= self.threshold, float(self.right), float(self.left))

    def to_spec(self):
        return {"type": "step", "left": self.left, "right": self.right,
                "v": list(self.v), "threshold": self.threshold}


@dataclass(frozen=True)
class Table(DensityProfile):
    values: Mapping[tuple, float]
    default: float | None = None

    def __post_init__(self):
        for k, a in self.values.items():
            _check_density(f"alpha{k}", a)

    def __getitem__(self, x):
        return self.values[x]

    def density(self, x):
        out = np.empty(len(_sites(x)))
        for i, row in enumerate(_sites(x)):
            key = tuple(int(c) for c in row)
            if key in self.values:
                out[i] = self.values[key]
            elif self.default is not None:
                out[i] = self.default
            else:
                raise ProfileError(f"site {key} not in table")
        return out

    def to_spec(self):
        return {"type": "table", "values": [[list(k), a] for k, a in sorted(self.values.items())],
                "default": self.default}


@dataclass(frozen=True)
class IndicatorSet(DensityProfile):
    """``right`` on a set ``A``, ``left`` on its complement.

    When ``halfspaces`` is given, ``A = {x : <n_k, x> >= b_k for all k}`` (a
    convex polyhedron), which :func:`exlab.burgers.reduce_dim` can solve in
    closed form.  Otherwise ``predicate`` must be supplied.
    """

    left: float
    right: float
    halfspaces: tuple[tuple[tuple[float, ...], float], ...] | None = None
    predicate: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    name: str = "custom"

    def __post_init__(self):
        _check_density("left", self.left)
        _check_density("right", self.right)
        if self.halfspaces is None and self.predicate is None:
            raise ProfileError("IndicatorSet needs halfspaces or a predicate")
        if self.halfspaces is not None:
            hs = tuple((tuple(float(a) for a in n), float(b)) for n, b in self.halfspaces)
            object.__setattr__(self, "halfspaces", hs)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        x = x.reshape(1, -1) if x.ndim == 1 else x
        if self.halfspaces is None:
            return np.asarray(self.predicate(x), dtype=bool)
        inside = np.ones(len(x), dtype=bool)
        for n, b in self.halfspaces:
            inside &= x @ np.asarray(n) >= b - 1e-12
        return inside

    def density(self, x):
        return np.where(self.contains(x), float(self.right), float(self.left))

    def reflected(self) -> "IndicatorSet":
        """Profile of ``x -> self(-x)``."""
        if self.halfspaces is None:
            pred = self.predicate
            return IndicatorSet(self.left, self.right, predicate=lambda x: pred(-x),
                                name=self.name + "-reflected")
        return IndicatorSet(self.left, self.right,
                            tuple((tuple(-a for a in n), b) for n, b in self.halfspaces),
                            name=self.name + "-reflected")

    def to_spec(self):
        if self.halfspaces is None:
            raise ProfileError("predicate-based IndicatorSet is not serializable")
        return {"type": "indicator", "left": self.left, "right": self.right,
                "halfspaces": [[list(n), b] for n, b in self.halfspaces], "name": self.name}


@dataclass(frozen=True)
class Scaled(DensityProfile):
    """Microscopic profile ``z -> base(z / n)`` at hydrodynamic scale ``n``."""

    base: DensityProfile
    n: float

    def density(self, x):
        return self.base.density(np.asarray(_sites(x), dtype=np.float64) / self.n)

    def to_spec(self):
        return {"type": "scaled", "n": self.n, "base": self.base.to_spec()}


def half_space(left: float, right: float, c: float) -> IndicatorSet:
    """``A = {z : z1 >= c z2}``."""
    return IndicatorSet(left, right, (((1.0, -c), 0.0),), name="half-space")


def wedge(left: float, right: float, c: float) -> IndicatorSet:
    """``A = {z : z1 >= c z2 and z1 >= -c z2}``."""
    return IndicatorSet(left, right, (((1.0, -c), 0.0), ((1.0, c), 0.0)), name="wedge")


def quadrant(left: float = 0.0, right: float = 1.0) -> IndicatorSet:
    """``A = {z : z1 >= 0, z2 >= 0}``."""
    return IndicatorSet(left, right, (((1.0, 0.0), 0.0), ((0.0, 1.0), 0.0)), name="quadrant")


def pi_of(profile: DensityProfile, x) -> float:
    """Odds ratio ``alpha / (1 - alpha)`` at a site."""
    if isinstance(profile, ExponentialC):
        s = float(profile.log_odds(x)[0])
        return float(np.exp(s))
    a = profile(np.asarray(x))
    if a <= 0.0 or a >= 1.0:
        raise ProfileError(f"density {a} at {tuple(np.ravel(x))} has no finite positive odds")
    return a / (1.0 - a)


def profile_from_spec(spec: Mapping) -> DensityProfile:
    kind = spec["type"]
    if kind == "constant":
        return Constant(float(spec["rho"]))
    if kind == "exponential":
        return ExponentialC(float(spec["c"]), tuple(spec["v"]))
    if kind == "step":
        return StepV(float(spec["left"]), float(spec["right"]), tuple(spec["v"]),
                     float(spec.get("threshold", 0.0)))
    if kind == "table":
        vals = {tuple(int(c) for c in k): float(a) for k, a in spec["values"]}
        return Table(vals, spec.get("default"))
    if kind == "indicator":
        shape = spec.get("shape")
        left, right = float(spec["left"]), float(spec["right"])
        if shape == "half-space":
            return half_space(left, right, float(spec.get("c", 0.0)))
        if shape == "wedge":
            return wedge(left, right, float(spec["c"]))
        if shape == "quadrant":
            return quadrant(left, right)
        return IndicatorSet(left, right, tuple((tuple(n), b) for n, b in spec["halfspaces"]),
                            name=spec.get("name", "custom"))
    if kind == "scaled":
        return Scaled(profile_from_spec(spec["base"]), float(spec["n"]))
    raise ProfileError(f"unknown profile type {kind!r}")


def read_table_csv(path) -> Table:
    """CSV rows ``x1, ..., xd, alpha`` (a header line is skipped if present)."""
    import csv

    vals = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                nums = [float(c) for c in row]
            except ValueError:
                continue
            vals[tuple(int(c) for c in nums[:-1])] = nums[-1]
    return Table(vals)


def write_table_csv(table: Table, path) -> None:
    import csv

    d = len(next(iter(table.values)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(d)] + ["alpha"])
        for k, a in sorted(table.values.items()):
            w.writerow(list(k) + [repr(a)])

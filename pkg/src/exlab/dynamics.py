"""Exact continuous-time simulation of the exclusion process on a finite window."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from . import _engine
from .kernels import LatticeKernel
from .profiles import DensityProfile


# -- windows ---------------------------------------------------------------------

@dataclass(frozen=True)
class Periodic:
    def to_spec(self):
        return {"type": "periodic"}


@dataclass(frozen=True)
class Closed:
    def to_spec(self):
        return {"type": "closed"}


@dataclass(frozen=True, eq=False)
class Reservoir:
    """Exterior sites are occupied with probability ``profile(y)``, drawn
    afresh at every attempt that touches them."""

    profile: DensityProfile

    def to_spec(self):
        return {"type": "reservoir", "profile": self.profile.to_spec()}


Boundary = Periodic | Closed | Reservoir


@dataclass(frozen=True, eq=False)
class Window:
    """Box ``lower <= x <= upper`` (inclusive) with one boundary rule per axis."""

    lower: tuple[int, ...]
    upper: tuple[int, ...]
    boundary: tuple[Boundary, ...]

    def __post_init__(self):
        lo = tuple(int(a) for a in self.lower)
        hi = tuple(int(a) for a in self.upper)
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("corner dimensions differ")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError("empty window")
        b = self.boundary
        if not isinstance(b, tuple):
            b = tuple(b) if isinstance(b, (list,)) else (b,) * len(lo)
        if len(b) == 1 and len(lo) > 1:
            b = b * len(lo)
        if len(b) != len(lo):
            raise ValueError("one boundary treatment per axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "boundary", b)

    @classmethod
    def box(cls, lower, upper, boundary) -> "Window":
        return cls(tuple(lower), tuple(upper), boundary)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lower, self.upper))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def sites(self) -> np.ndarray:
        """All sites, row-major, as an ``(size, dim)`` integer array."""
        axes = [np.arange(l, h + 1) for l, h in zip(self.lower, self.upper)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)

    def flat_index(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.int64)) - np.asarray(self.lower)
        return np.ravel_multi_index(tuple(x.T), self.shape)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x))
        return ((x >= np.asarray(self.lower)) & (x <= np.asarray(self.upper))).all(axis=1)

    def to_spec(self):
        return {"lower": list(self.lower), "upper": list(self.upper),
                "boundary": [b.to_spec() for b in self.boundary]}


# -- geometry tables -------------------------------------------------------------

@dataclass
class Geometry:
    table: np.ndarray
    cumk: np.ndarray
    ext_sites: np.ndarray
    ext_alpha: np.ndarray
    inj_ext: np.ndarray
    inj_tgt: np.ndarray
    inj_cum: np.ndarray

    @property
    def injection_rate(self) -> float:
        return float(self.inj_cum[-1]) if len(self.inj_cum) else 0.0


def _resolve(window: Window, targets: np.ndarray):
    """Map raw target coordinates to (site index | -1 | exterior), plus exterior coords."""
    lo = np.asarray(window.lower)
    shape = np.asarray(window.shape)
    rel = targets - lo
    discard = np.zeros(len(rel), dtype=bool)
    exterior = np.zeros(len(rel), dtype=bool)
    ext_axis = np.full(len(rel), -1)
    for a, b in enumerate(window.boundary):
        out = (rel[:, a] < 0) | (rel[:, a] >= shape[a])
        if isinstance(b, Periodic):
            rel[:, a] %= shape[a]
        elif isinstance(b, Closed):
            discard |= out
        else:
            newly = out & ~exterior
            ext_axis[newly] = a
            exterior |= out
    exterior &= ~discard
    inside = ~discard & ~exterior
    idx = np.full(len(rel), -1, dtype=np.int64)
    if inside.any():
        idx[inside] = np.ravel_multi_index(tuple(rel[inside].T), window.shape)
    return idx, discard, exterior, rel + lo, ext_axis


def compile_geometry(window: Window, kernel: LatticeKernel) -> Geometry:
    if kernel.dim != window.dim:
        raise ValueError("kernel and window dimensions differ")
    disp = kernel.displacements
    prob = kernel.probabilities
    keep = prob > 0
    disp, prob = disp[keep], prob[keep]
    sites = window.sites()
    n, K = len(sites), len(disp)
    table = np.empty((n, K), dtype=np.int64)
    ext_index: dict[tuple, int] = {}
    ext_alpha: list[float] = []

    def ext_id(coords, axes):
        ids = np.empty(len(coords), dtype=np.int64)
        for i, (c, a) in enumerate(zip(map(tuple, coords), axes)):
            j = ext_index.get(c)
            if j is None:
                j = len(ext_alpha)
                ext_index[c] = j
                ext_alpha.append(float(window.boundary[a].profile(np.asarray(c))))
            ids[i] = j
        return ids

    inj_ext, inj_tgt, inj_rate = [], [], []
    all_idx = np.arange(n, dtype=np.int64)
    for k in range(K):
        idx, discard, ext, coords, axes = _resolve(window, sites + disp[k])
        col = idx.copy()
        col[discard] = -1
        if ext.any():
            col[ext] = -2 - ext_id(coords[ext], axes[ext])
        table[:, k] = col
        if any(disp[k]):
            idx, discard, ext, coords, axes = _resolve(window, sites - disp[k])
            if ext.any():
                inj_ext.append(ext_id(coords[ext], axes[ext]))
                inj_tgt.append(all_idx[ext])
                inj_rate.append(np.full(ext.sum(), prob[k]))
    if inj_ext:
        inj_ext_a = np.concatenate(inj_ext)
        inj_tgt_a = np.concatenate(inj_tgt)
        inj_cum = np.cumsum(np.concatenate(inj_rate))
    else:
        inj_ext_a = np.zeros(0, dtype=np.int64)
        inj_tgt_a = np.zeros(0, dtype=np.int64)
        inj_cum = np.zeros(0)
    return Geometry(table, np.cumsum(prob), np.array(sorted(ext_index, key=ext_index.get)).reshape(-1, window.dim),
                    np.asarray(ext_alpha, dtype=np.float64), inj_ext_a, inj_tgt_a, inj_cum)


_GEOMETRY_CACHE: dict = {}


def geometry_for(window: Window, kernel: LatticeKernel) -> Geometry:
    key = (id(window), kernel)
    hit = _GEOMETRY_CACHE.get(key)
    if hit is not None and hit[0] is window:
        return hit[1]
    geo = compile_geometry(window, kernel)
    if len(_GEOMETRY_CACHE) > 32:
        _GEOMETRY_CACHE.clear()
    _GEOMETRY_CACHE[key] = (window, geo)
    return geo


# -- configurations and clocks ---------------------------------------------------

@dataclass
class Configuration:
    window: Window
    occupancy: np.ndarray  # uint8, shaped like the window

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occupancy, dtype=np.uint8).reshape(self.window.shape)
        if ((occ != 0) & (occ != 1)).any():
            raise ValueError("occupancy values must be 0 or 1")
        self.occupancy = occ

    @property
    def particle_count(self) -> int:
        return int(self.occupancy.sum())

    def copy(self) -> "Configuration":
        return Configuration(self.window, self.occupancy.copy())

    def occupied_sites(self) -> np.ndarray:
        return self.window.sites()[self.occupancy.ravel() == 1]

    @classmethod
    def from_sites(cls, window: Window, sites) -> "Configuration":
        occ = np.zeros(window.size, dtype=np.uint8)
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, window.dim)
        if len(sites):
            occ[window.flat_index(sites)] = 1
        return cls(window, occ.reshape(window.shape))


def substream(seed: int, replicate: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, replicate)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))))


@dataclass
class SimClock:
    seed: int = 0
    replicate: int = 0
    time: float = 0.0
    events: int = 0
    nulls: int = 0
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.rng is None:
            self.rng = substream(self.seed, self.replicate)


def sample_product(profile: DensityProfile, window: Window, rng: np.random.Generator) -> Configuration:
    alpha = profile.density(window.sites())
    occ = (rng.random(window.size) < alpha).astype(np.uint8)
    return Configuration(window, occ.reshape(window.shape))


def evolve(cfg: Configuration, kernel: LatticeKernel, until: float, clock: SimClock) -> Configuration:
    """Run the dynamics from ``clock.time`` to absolute time ``until``."""
    if until < clock.time:
        raise ValueError(f"until={until} precedes clock time {clock.time}")
    out = cfg.copy()
    if until == clock.time:
        return out
    geo = geometry_for(cfg.window, kernel)
    occ = out.occupancy.reshape(-1)
    plist = np.zeros(occ.size, dtype=np.int64)
    pidx = np.full(occ.size, -1, dtype=np.int64)
    where = np.flatnonzero(occ)
    plist[:len(where)] = where
    pidx[where] = np.arange(len(where))
    counters = np.zeros(4, dtype=np.int64)
    _engine.run_single(occ, plist, pidx, len(where), geo.table, geo.cumk, geo.ext_alpha,
                       geo.inj_ext, geo.inj_tgt, geo.inj_cum, float(clock.time), float(until),
                       clock.rng, counters)
    clock.time = float(until)
    clock.events += int(counters[_engine.EVENTS] - counters[_engine.NULLS])
    clock.nulls += int(counters[_engine.NULLS])
    return out


def evolve_path(cfg: Configuration, kernel: LatticeKernel, times: Sequence[float],
                clock: SimClock) -> list[Configuration]:
    """Snapshots at increasing absolute ``times`` along one trajectory."""
    out = []
    for t in times:
        cfg = evolve(cfg, kernel, t, clock)
        out.append(cfg)
    return out


# -- replicates ------------------------------------------------------------------

def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("EXLAB_THREADS", "1")))
    except ValueError:
        return 1


def map_replicates(fn: Callable[[int], object], replicates: int, threads: int | None = None) -> list:
    """``[fn(0), ..., fn(replicates - 1)]``, in order, optionally on a thread pool."""
    threads = default_threads() if threads is None else threads
    if threads <= 1 or replicates <= 1:
        return [fn(i) for i in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicates)))


def wilson_interval(successes, n: int, level: float = 0.95):
    z = norm.ppf(0.5 + level / 2)
    p = np.asarray(successes, dtype=np.float64) / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return np.clip(centre - half, 0, 1), np.clip(centre + half, 0, 1)


@dataclass
class DensityField:
    window: Window
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    half_width: np.ndarray
    replicates: int

    def covers(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha).reshape(self.mean.shape)
        return (alpha >= self.lower - 1e-15) & (alpha <= self.upper + 1e-15)

    def to_csv(self, path) -> None:
        write_density_csv(self, path)


def field_from_counts(window: Window, counts: np.ndarray, replicates: int) -> DensityField:
    counts = counts.reshape(window.shape)
    mean = counts / replicates
    if replicates == 1:
        # one draw carries no spread information: report the widest interval
        lo, hi = np.zeros_like(mean), np.ones_like(mean)
        half = np.full_like(mean, 0.5)
    else:
        lo, hi = wilson_interval(counts, replicates)
        half = np.maximum(mean - lo, hi - mean)
    return DensityField(window, mean, lo, hi, half, replicates)


def estimate_marginals(profile: DensityProfile, kernel: LatticeKernel, window: Window, t: float,
                       replicates: int, seed: int = 0, threads: int | None = None) -> DensityField:
    """Per-site occupation probabilities at time ``t`` from independent replicates."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")

    def one(rep):
        clock = SimClock(seed, rep)
        cfg = sample_product(profile, window, clock.rng)
        return evolve(cfg, kernel, t, clock).occupancy.astype(np.int64)

    counts = np.zeros(window.shape, dtype=np.int64)
    for occ in map_replicates(one, replicates, threads):
        counts += occ
    return field_from_counts(window, counts, replicates)


# -- files -----------------------------------------------------------------------

SNAPSHOT_MAGIC = b"EXLAB-SNAPSHOT\n"


def write_snapshot(cfg: Configuration, path, time: float, seed: int) -> None:
    header = {"dim": cfg.window.dim, "lower": list(cfg.window.lower),
              "upper": list(cfg.window.upper), "time": time, "seed": int(seed)}
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.packbits(cfg.occupancy.ravel()).tobytes())


def read_snapshot(path, boundary=None) -> tuple[Configuration, dict]:
    with open(path, "rb") as fh:
        if fh.readline() != SNAPSHOT_MAGIC:
            raise ValueError("not a snapshot file")
        header = json.loads(fh.readline())
        payload = fh.read()
    boundary = boundary or (Closed(),) * header["dim"]
    window = Window(tuple(header["lower"]), tuple(header["upper"]), tuple(boundary))
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[: window.size]
    return Configuration(window, bits.reshape(window.shape)), header


def write_density_csv(fld: DensityField, path) -> None:
    sites = fld.window.sites()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(fld.window.dim)] + ["mean", "ci"])
        for s, m, h in zip(sites, fld.mean.ravel(), fld.half_width.ravel()):
            w.writerow(list(map(int, s)) + [repr(float(m)), repr(float(h))])

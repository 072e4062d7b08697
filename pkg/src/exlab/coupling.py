"""Basic coupling of several copies of the exclusion process."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .dynamics import Configuration, SimClock, Window, geometry_for
from .kernels import LatticeKernel


@dataclass
class DiscrepancySeries:
    """Every change of the discrepancy counts, per layer pair."""

    pairs: list[tuple[int, int]]
    time: np.ndarray
    pair: np.ndarray
    count_10: np.ndarray
    count_01: np.ndarray

    def for_pair(self, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        sel = self.pair == p
        return self.time[sel], self.count_10[sel], self.count_01[sel]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "pair", "count_10", "count_01"])
            for t, p, a, b in zip(self.time, self.pair, self.count_10, self.count_01):
                w.writerow([repr(float(t)), int(p), int(a), int(b)])


@dataclass
class CoupledState:
    window: Window
    layers: np.ndarray  # (L, size) uint8
    monotone: bool = False
    history: DiscrepancySeries | None = field(default=None, repr=False)

    def __post_init__(self):
        layers = np.ascontiguousarray(self.layers, dtype=np.uint8).reshape(-1, self.window.size)
        if ((layers != 0) & (layers != 1)).any():
            raise ValueError("occupancy values must be 0 or 1")
        self.layers = layers
        if self.monotone and not self.is_ordered():
            raise ValueError("layers are not sitewise ordered")

    @classmethod
    def from_configurations(cls, configs, monotone: bool = False) -> "CoupledState":
        configs = list(configs)
        w = configs[0].window
        for c in configs[1:]:
            if c.window is not w and c.window.to_spec() != w.to_spec():
                raise ValueError("coupled layers must share one window")
        return cls(w, np.stack([c.occupancy.ravel() for c in configs]), monotone)

    @property
    def n_layers(self) -> int:
        return self.layers.shape[0]

    def pairs(self) -> list[tuple[int, int]]:
        return list(itertools.combinations(range(self.n_layers), 2))

    def layer(self, i: int) -> Configuration:
        return Configuration(self.window, self.layers[i].reshape(self.window.shape).copy())

    def is_ordered(self) -> bool:
        return bool((np.diff(self.layers.astype(np.int8), axis=0) >= 0).all())

    def discrepancy_sites(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
        """Sites of type (1,0) and of type (0,1) for layers ``(a, b)``."""
        sites = self.window.sites()
        la, lb = self.layers[a], self.layers[b]
        return sites[(la == 1) & (lb == 0)], sites[(la == 0) & (lb == 1)]


def discrepancy_counts(state: CoupledState) -> dict[tuple[int, int], tuple[int, int]]:
    out = {}
    for a, b in state.pairs():
        la, lb = state.layers[a], state.layers[b]
        out[(a, b)] = (int(((la == 1) & (lb == 0)).sum()), int(((la == 0) & (lb == 1)).sum()))
    return out


def evolve_coupled(state: CoupledState, kernel: LatticeKernel, until: float, clock: SimClock,
                   buffer: int = 4096) -> CoupledState:
    """Run the coupled layers to absolute time ``until``; records discrepancy changes."""
    if until < clock.time:
        raise ValueError(f"until={until} precedes clock time {clock.time}")
    geo = geometry_for(state.window, kernel)
    occ = state.layers.copy()
    n = state.window.size
    cnt = occ.sum(axis=0).astype(np.int64)
    ulist = np.zeros(n, dtype=np.int64)
    uidx = np.full(n, -1, dtype=np.int64)
    where = np.flatnonzero(cnt)
    ulist[:len(where)] = where
    uidx[where] = np.arange(len(where))
    pairs = state.pairs()
    parr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    start = discrepancy_counts(state)
    dcount = np.array([start[p] for p in pairs], dtype=np.int64).reshape(-1, 2)
    lastc = dcount.copy()
    counters = np.zeros(4, dtype=np.int64)

    times = [np.full(len(pairs), clock.time)]
    pid = [np.arange(len(pairs))]
    c10 = [dcount[:, 0].copy()]
    c01 = [dcount[:, 1].copy()]
    t = float(clock.time)
    nunion = len(where)
    cap = max(buffer, 2 * len(pairs))
    while True:
        rec_t = np.empty(cap)
        rec_p = np.empty(cap, dtype=np.int64)
        rec_a = np.empty(cap, dtype=np.int64)
        rec_b = np.empty(cap, dtype=np.int64)
        rec_n = np.zeros(1, dtype=np.int64)
        t, nunion, stopped = _engine.run_coupled(
            occ, cnt, ulist, uidx, nunion, geo.table, geo.cumk, geo.ext_alpha,
            geo.inj_ext, geo.inj_tgt, geo.inj_cum, t, float(until), clock.rng, counters,
            parr, dcount, lastc, rec_t, rec_p, rec_a, rec_b, rec_n)
        m = int(rec_n[0])
        times.append(rec_t[:m])
        pid.append(rec_p[:m])
        c10.append(rec_a[:m])
        c01.append(rec_b[:m])
        if not stopped:
            break
    clock.time = float(until)
    clock.events += int(counters[_engine.EVENTS] - counters[_engine.NULLS])
    clock.nulls += int(counters[_engine.NULLS])
    series = DiscrepancySeries(pairs, np.concatenate(times), np.concatenate(pid),
                               np.concatenate(c10), np.concatenate(c01))
    out = CoupledState(state.window, occ, False, series)
    out.monotone = state.monotone
    if state.monotone and not out.is_ordered():
        raise AssertionError("order of a monotone family was broken")
    return out

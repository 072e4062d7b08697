"""Hydrodynamic-scale experiments: particle systems against Burgers' equation.

Microscopic initial data at scale ``n`` is ``u_{z,n} = u0(z / n)`` sampled
pointwise (:class:`exlab.profiles.Scaled`); windows carry Reservoir
boundaries from the same profile.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, stats

from . import burgers
from .dynamics import (Periodic, Reservoir, SimClock, Window, evolve, map_replicates,
                       sample_product)
from .kernels import LatticeKernel, check_condition6, make_lattice_kernel, mean_vector
from .profiles import (Constant, DensityProfile, ExponentialC, IndicatorSet, Scaled, StepV,
                       quadrant)


class HaloError(ValueError):
    """The simulation window does not leave room for the kernel's reach."""

    def __init__(self, required, actual):
        required = [int(a) for a in required]
        actual = [int(a) for a in actual]
        super().__init__(f"halo {actual} too small; need at least {required} sites per axis")
        self.required = required
        self.actual = actual


class DiscontinuityError(ValueError):
    """Local limits are only claimed away from jumps of the solution."""


def _jsonable(obj):
    if is_dataclass(obj):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


class _Report:
    def to_dict(self) -> dict:
        return _jsonable(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(a)) if isinstance(a, (float, np.floating)) else a for a in row])


# -- geometry helpers ------------------------------------------------------------

def required_halo(kernel: LatticeKernel, horizon: float, safety: float = 4.0) -> np.ndarray:
    """Per-axis halo ``ceil(range_i * horizon * safety)``."""
    return np.ceil(kernel.axis_range() * horizon * safety).astype(np.int64)


def open_block_sites(n: float, lower, upper) -> tuple[np.ndarray, np.ndarray]:
    """Integer corners of ``{z : z / n in B}`` for the open box ``B``."""
    lo = np.floor(n * np.asarray(lower, dtype=np.float64)).astype(np.int64) + 1
    hi = np.ceil(n * np.asarray(upper, dtype=np.float64)).astype(np.int64) - 1
    if (hi < lo).any():
        raise ValueError("block contains no lattice sites at this scale")
    return lo, hi


def cone_condition(u0: DensityProfile) -> bool:
    """Whether ``u0`` increases stochastically along some open cone.

    Constant, step and exponential profiles are monotone along ``v``; for a
    polyhedral indicator ``A = {<n_k, x> >= b_k}`` we need a direction with
    ``<n_k, v> > 0`` for all ``k`` (an LP), reversed when ``left > right``.
    """
    if isinstance(u0, (Constant, StepV, ExponentialC)):
        return True
    if isinstance(u0, Scaled):
        return cone_condition(u0.base)
    if isinstance(u0, IndicatorSet):
        if u0.left == u0.right:
            return True
        if u0.halfspaces is None:
            return False
        normals = np.array([n for n, _ in u0.halfspaces])
        res = optimize.linprog(np.zeros(normals.shape[1]), A_ub=-normals,
                               b_ub=-np.ones(len(normals)),
                               bounds=[(None, None)] * normals.shape[1], method="highs")
        return res.status == 0
    return False


def _segment(v1, base, lower, upper) -> tuple[float, float]:
    """``{y : base + y v1 in [lower, upper]}``."""
    ya, yb = -math.inf, math.inf
    for a, b, lo, hi in zip(v1, base, lower, upper):
        if abs(a) <= 1e-14:
            if not lo - 1e-14 <= b <= hi + 1e-14:
                return 0.0, 0.0
            continue
        e1, e2 = (lo - b) / a, (hi - b) / a
        ya, yb = max(ya, min(e1, e2)), min(yb, max(e1, e2))
    return (ya, yb) if ya < yb else (0.0, 0.0)


def block_integral(u0: DensityProfile, m_vec, t: float, lower, upper) -> float:
    """``int_B u(t, x) dx`` over a box by adaptive quadrature.

    The closed-form solution is piecewise linear along drift lines, so each
    line integral is an adaptive ``quad`` split at the known breakpoints; the
    outer integral runs over the orthogonal coordinates.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if isinstance(u0, Constant):
        return float(u0.rho * np.prod(upper - lower))
    if not burgers.has_closed_form(u0):
        raise ValueError("no closed-form solution for this initial profile")
    m_vec = np.asarray(m_vec, dtype=np.float64)
    basis = burgers.drift_basis(m_vec)
    v1, rest = basis[0], basis[1:]
    mnorm = float(np.linalg.norm(m_vec))
    tt = t if mnorm > 0 else 0.0

    def along(*w):
        base = np.asarray(w) @ rest if len(rest) else np.zeros(len(v1))
        ya, yb = _segment(v1, base, lower, upper)
        if yb <= ya:
            return 0.0
        lo, hi = burgers.line_interval(u0, v1, base)
        line = burgers.LineSolution(u0.left, u0.right, lo, hi, mnorm)
        pts = sorted(p for p in burgers.line_breakpoints(line, tt) if ya < p < yb)
        val, _ = integrate.quad(lambda y: line.value(tt, y), ya, yb, points=pts or None,
                                limit=200, epsabs=1e-12, epsrel=1e-12)
        return val

    if len(rest) == 0:
        return float(along())
    corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(len(lower), -1).T
    proj = corners @ rest.T
    ranges = [(float(proj[:, i].min()), float(proj[:, i].max())) for i in range(len(rest))]
    opts = [{"limit": 200, "epsabs": 1e-10, "epsrel": 1e-10}] * len(rest)
    if len(rest) == 1:
        opts[0] = dict(opts[0], points=sorted(set(np.round(proj[:, 0], 14))))
    val, _ = integrate.nquad(along, ranges, opts=opts)
    return float(val)


# -- experiment description ------------------------------------------------------

@dataclass
class HydroExperiment:
    kernel: LatticeKernel
    u0: DensityProfile
    scales: tuple[int, ...] = (20, 50, 100)
    t: float = 1.0
    block: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    replicates: int = 20
    seed: int = 0
    halo: tuple[int, ...] | None = None
    safety: float = 4.0
    threads: int | None = None

    def __post_init__(self):
        if any(int(n) < 1 for n in self.scales):
            raise ValueError("scales must be >= 1")
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        d = self.kernel.dim
        if self.block is None:
            self.block = ((-0.5,) * d, (0.5,) * d)
        lo, hi = (tuple(float(a) for a in c) for c in self.block)
        if len(lo) != d or len(hi) != d or any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("block must be a nonempty box of the kernel's dimension")
        self.block = (lo, hi)
        self.scales = tuple(int(n) for n in self.scales)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def m_vec(self) -> np.ndarray:
        return mean_vector(self.kernel)

    def micro_profile(self, n: int) -> Scaled:
        return Scaled(self.u0, n)

    def halo_for(self, n: int) -> np.ndarray:
        need = required_halo(self.kernel, n * self.t, self.safety)
        if self.halo is None:
            return need
        have = np.asarray(self.halo, dtype=np.int64)
        if len(have) != self.dim:
            raise ValueError("halo needs one entry per axis")
        if (have < need).any():
            raise HaloError(need, have)
        return have

    def window_around(self, n: int, lo, hi) -> Window:
        h = self.halo_for(n)
        return Window(tuple(np.asarray(lo) - h), tuple(np.asarray(hi) + h),
                      Reservoir(self.micro_profile(n)))

    def block_window(self, n: int) -> tuple[Window, np.ndarray, np.ndarray]:
        lo, hi = open_block_sites(n, *self.block)
        return self.window_around(n, lo, hi), lo, hi

    def check(self) -> None:
        """Raise :class:`HaloError` if some scale lacks room."""
        for n in self.scales:
            self.halo_for(n)

    def event_budget(self) -> float:
        """Rough count of attempted jumps over all scales and replicates."""
        total = 0.0
        for n in self.scales:
            w, _, _ = self.block_window(n)
            rho = float(np.mean(self.micro_profile(n).density(w.sites()[:: max(1, w.size // 4096)])))
            total += w.size * max(rho, 1e-3) * n * self.t * self.replicates
        return total

    def describe(self) -> dict:
        return {"kernel": self.kernel.to_literal(), "u0": self.u0.to_spec(),
                "scales": list(self.scales), "t": self.t,
                "block": [list(self.block[0]), list(self.block[1])],
                "replicates": self.replicates, "seed": self.seed, "safety": self.safety}


def _run(e: HydroExperiment, n: int, window: Window, rep: int, stream: int):
    clock = SimClock(e.seed, stream * 1_000_003 + rep)
    cfg = sample_product(e.micro_profile(n), window, clock.rng)
    return evolve(cfg, e.kernel, n * e.t, clock)


# -- block averages --------------------------------------------------------------

@dataclass
class BlockRow:
    n: int
    sites: int
    mean: float
    stderr: float
    target: float
    gap: float
    window_shape: list


@dataclass
class BlockAverageReport(_Report):
    inputs: dict
    target: float
    rows: list[BlockRow]
    decreasing: bool

    def to_csv(self, path) -> None:
        _write_rows(path, ["n", "sites", "mean", "stderr", "target", "gap"],
                    [(r.n, r.sites, r.mean, r.stderr, r.target, r.gap) for r in self.rows])


def block_average_test(e: HydroExperiment) -> BlockAverageReport:
    """``n^{-d} sum_{z in nB} eta_{nt}(z)`` against ``int_B u(t, x) dx`` for each ``n``."""
    e.check()
    target = block_integral(e.u0, e.m_vec, e.t, *e.block)
    rows = []
    for idx, n in enumerate(e.scales):
        window, lo, hi = e.block_window(n)
        inner = tuple(slice(a - w, b - w + 1) for a, b, w in zip(lo, hi, window.lower))

        def one(rep, n=n, window=window, inner=inner):
            cfg = _run(e, n, window, rep, idx)
            return int(cfg.occupancy[inner].sum())

        counts = np.array(map_replicates(one, e.replicates, e.threads), dtype=np.float64)
        vals = counts / float(n) ** e.dim
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
        rows.append(BlockRow(n, int(np.prod(hi - lo + 1)), mean, se, target,
                             abs(mean - target), list(window.shape)))
    gaps = [r.gap for r in rows]
    return BlockAverageReport(e.describe(), target, rows,
                              all(b < a for a, b in zip(gaps, gaps[1:])))


# -- local limits ----------------------------------------------------------------

@dataclass
class LocalLimitReport(_Report):
    inputs: dict
    n: int
    x: list
    center: list
    radius: int
    u: float
    marginal: float
    marginal_stderr: float
    pair: float
    marginal_dev: float
    pair_dev: float
    distance_to_jump: float


def distance_to_jump(u0: IndicatorSet, m_vec, t: float, x, delta: float) -> float:
    """Smallest along-line distance from ``x`` (and from ``x +- delta e_i``) to a jump."""
    x = np.asarray(x, dtype=np.float64)
    probes = [x]
    for i in range(len(x)):
        for s in (-delta, delta):
            p = x.copy()
            p[i] += s
            probes.append(p)
    best = math.inf
    for p in probes:
        line, y = burgers.line_through(u0, m_vec, p)
        for j in line.discontinuities(t):
            best = min(best, abs(j - y))
    return best


def local_limit_test(e: HydroExperiment, x, radius: int = 5, n: int | None = None) -> LocalLimitReport:
    """Single-site marginals and neighbour-pair occupation near ``[n x]`` at time ``n t``."""
    n = max(e.scales) if n is None else int(n)
    x = np.asarray(x, dtype=np.float64)
    if not cone_condition(e.u0):
        raise ValueError("initial profile fails the cone monotonicity condition")
    m_vec = e.m_vec
    if isinstance(e.u0, IndicatorSet) and np.linalg.norm(m_vec) > 0 and e.t > 0:
        dist = distance_to_jump(e.u0, m_vec, e.t, x, 2.0 / n)
    else:
        dist = math.inf
    if dist <= 2.0 / n:
        raise DiscontinuityError(f"x={x.tolist()} lies within 2/n={2.0 / n:g} of a discontinuity")
    u = float(burgers.reduce_dim(e.u0, m_vec, e.t, x))
    center = np.floor(n * x).astype(np.int64)
    lo, hi = center - radius, center + radius
    window = e.window_around(n, lo, hi)
    inner = tuple(slice(a - w, b - w + 1) for a, b, w in zip(lo, hi, window.lower))

    def one(rep):
        occ = _run(e, n, window, rep, 7).occupancy[inner].astype(np.float64)
        pairs = []
        for ax in range(occ.ndim):
            a = np.take(occ, range(occ.shape[ax] - 1), axis=ax)
            b = np.take(occ, range(1, occ.shape[ax]), axis=ax)
            pairs.append((a * b).ravel())
        return occ.mean(), np.concatenate(pairs).mean()

    res = np.array(map_replicates(one, e.replicates, e.threads))
    marg = float(res[:, 0].mean())
    se = float(res[:, 0].std(ddof=1) / math.sqrt(len(res))) if len(res) > 1 else math.inf
    pair = float(res[:, 1].mean())
    return LocalLimitReport(e.describe(), n, x.tolist(), center.tolist(), radius, u, marg, se, pair,
                            abs(marg - u), abs(pair - u * u), dist)


# -- one-dimensional step data ---------------------------------------------------

def asep_limit_prediction(left: float, right: float) -> tuple[str, float]:
    """Limit of the law seen from the origin for rightward drift and step data.

    Returns a label and the limiting density (the mean density for the
    mixture case ``l < r, l + r = 1``).
    """
    if right <= 0.5 and left >= 0.5:
        return "nu_1/2", 0.5
    if right >= 0.5 and left + right > 1:
        return "nu_r", right
    if left <= 0.5 and left + right < 1:
        return "nu_l", left
    return "mixture", 0.5 * (left + right)


@dataclass
class AsepReport(_Report):
    inputs: dict
    times: list
    density: list
    stderr: list
    label: str
    predicted: float
    final_gap: float

    def to_csv(self, path) -> None:
        _write_rows(path, ["t", "density", "stderr"], zip(self.times, self.density, self.stderr))


def asep_limit_experiment(p: float, left: float, right: float, times: Sequence[float],
                          half_width: int = 1000, replicates: int = 100, block: int = 20,
                          seed: int = 0, threads: int | None = None) -> AsepReport:
    """Density in ``[-block, block]`` for nearest-neighbour ASEP with step data."""
    if not 0.5 < p <= 1.0:
        raise ValueError("p must lie in (1/2, 1]")
    entries = {(1,): p}
    if p < 1:
        entries[(-1,)] = 1 - p
    k = make_lattice_kernel(1, entries)
    prof = StepV(left, right, (1.0,), 0.0)
    window = Window((-half_width,), (half_width - 1,), Reservoir(prof))
    sl = slice(half_width - block, half_width + block + 1)
    times = [float(t) for t in times]

    def one(rep):
        clock = SimClock(seed, rep)
        cfg = sample_product(prof, window, clock.rng)
        out = []
        for t in times:
            cfg = evolve(cfg, k, t, clock)
            out.append(cfg.occupancy[sl].mean())
        return out

    res = np.array(map_replicates(one, replicates, threads))
    dens = res.mean(axis=0)
    se = res.std(axis=0, ddof=1) / math.sqrt(replicates) if replicates > 1 else np.full(len(times), math.inf)
    label, pred = asep_limit_prediction(left, right)
    inputs = {"p": p, "left": left, "right": right, "half_width": half_width,
              "replicates": replicates, "block": block, "seed": seed}
    return AsepReport(inputs, times, dens.tolist(), list(se), label, pred, float(abs(dens[-1] - pred)))


# -- the quadrant experiment -----------------------------------------------------

def theorem11_kernel(variant: int, param: float) -> LatticeKernel:
    if variant == 87:
        if not 0.25 < param <= 0.5:
            raise ValueError("p1 must lie in (1/4, 1/2]")
        q = 0.5 - param
        return make_lattice_kernel(2, [((1, 0), param), ((0, 1), param), ((-1, 0), q), ((0, -1), q)])
    if variant == 88:
        if not 0 < param <= 0.5:
            raise ValueError("p2 must lie in (0, 1/2]")
        return make_lattice_kernel(2, [((1, 0), param), ((0, 1), param), ((0, 0), 1 - 2 * param)])
    raise ValueError("variant must be 87 or 88")


@dataclass
class TrendResult:
    j: int
    tau: float
    pvalue: float
    decreasing: bool


@dataclass
class Theorem11Report(_Report):
    inputs: dict
    js: list
    times: list
    band_prob: list          # [j][t]
    band_hits: list          # replicate counts, [j][t]
    trends: list
    constant_in_time: bool
    depths: list
    leak_prob: list          # P(some site deeper than j), averaged over t > 0
    leak_mean: list          # E(number of such sites), averaged over t > 0
    envelope_base: float | None
    envelope_base_cubed: float | None
    envelope_c: float | None
    predicted_base: float | None

    def to_csv(self, path) -> None:
        rows = []
        for j, probs in zip(self.js, self.band_prob):
            for t, pr in zip(self.times, probs):
                rows.append((j, t, pr))
        _write_rows(path, ["j", "t", "probability"], rows)


def mann_kendall_decreasing(times, values, level: float = 0.95) -> tuple[float, float, bool]:
    """Kendall's tau of ``values`` against ``times``; one-sided test for a decrease."""
    values = np.asarray(values, dtype=np.float64)
    if np.ptp(values) == 0:
        return 0.0, 1.0, False
    res = stats.kendalltau(times, values, alternative="less")
    return float(res.statistic), float(res.pvalue), bool(res.pvalue < 1 - level)


def fit_envelope(depths, means) -> tuple[float | None, float | None]:
    """Fit ``mean_j ~ c * base**j`` by weighted least squares on the logs."""
    depths = np.asarray(depths, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    ok = means > 0
    if ok.sum() < 2:
        return None, None
    slope, icpt = np.polyfit(depths[ok], np.log(means[ok]), 1, w=np.sqrt(means[ok]))
    return float(math.exp(slope)), float(math.exp(icpt))


def theorem11_experiment(variant: int, param: float, js: Sequence[int], times: Sequence[float],
                         half: int = 100, replicates: int = 200, seed: int = 0,
                         depths: Sequence[int] = tuple(range(9)), threads: int | None = None,
                         margin: int = 10) -> Theorem11Report:
    """Quadrant initial data; band occupancy ``{z1 + z2 <= j}`` over time.

    Also tracks the leak sets ``{min(z1, z2) < -j}`` whose occupation the
    exponential envelope controls.
    """
    k = theorem11_kernel(variant, param)
    js = [int(j) for j in js]
    depths = [int(j) for j in depths]
    need = 2 * max(js + depths + [0]) + margin
    if half < need:
        raise HaloError([need, need], [half, half])
    prof = quadrant()
    window = Window((-half, -half), (half - 1, half - 1), Reservoir(prof))
    sites = window.sites()
    diag = sites.sum(axis=1)
    low = sites.min(axis=1)
    band_masks = np.stack([diag <= j for j in js])
    leak_masks = np.stack([low < -j for j in depths])
    times = [float(t) for t in times]

    def one(rep):
        clock = SimClock(seed, rep)
        cfg = sample_product(prof, window, clock.rng)
        band = np.zeros((len(js), len(times)), dtype=bool)
        leak = np.zeros((len(depths), len(times)), dtype=np.int64)
        for i, t in enumerate(times):
            cfg = evolve(cfg, k, t, clock)
            occ = cfg.occupancy.ravel().astype(bool)
            band[:, i] = (band_masks & occ).any(axis=1)
            leak[:, i] = (leak_masks & occ).sum(axis=1)
        return band, leak

    out = map_replicates(one, replicates, threads)
    hits = np.sum([b for b, _ in out], axis=0)
    leaks = np.stack([l for _, l in out])
    probs = hits / replicates
    later = np.array(times) > 0
    if not later.any():
        later[:] = True
    leak_prob = (leaks[:, :, later] > 0).mean(axis=(0, 2))
    leak_mean = leaks[:, :, later].mean(axis=(0, 2))
    trends = [TrendResult(j, *mann_kendall_decreasing(times, probs[i])) for i, j in enumerate(js)]
    constant = bool((hits == hits[:, :1]).all())
    base, c = fit_envelope(depths, leak_mean)
    inputs = {"variant": variant, "param": param, "half": half, "replicates": replicates,
              "seed": seed, "kernel": k.to_literal()}
    return Theorem11Report(inputs, js, times, probs.tolist(), hits.tolist(), trends, constant,
                           depths, leak_prob.tolist(), leak_mean.tolist(), base,
                           None if base is None else base ** 3, c,
                           (0.5 - param) / param if variant == 87 else None)


# -- profiles along v ------------------------------------------------------------

def _axis_window(v, half, boundary_profile) -> Window:
    v = np.asarray(v, dtype=np.float64)
    half = np.broadcast_to(np.asarray(half, dtype=np.int64), v.shape)
    bnd = tuple(Periodic() if v[i] == 0 else Reservoir(boundary_profile) for i in range(len(v)))
    return Window(tuple(-half), tuple(half - 1), bnd)


@dataclass
class ProfileConvergenceReport(_Report):
    inputs: dict
    times: list
    log_c: list
    residual: list
    blocking: list
    stabilized: bool

    def to_csv(self, path) -> None:
        _write_rows(path, ["t", "log_c", "residual", "blocking"],
                    zip(self.times, self.log_c, self.residual, self.blocking))


def fit_logistic(values: np.ndarray, s: np.ndarray) -> float:
    """Least-squares ``log c`` for ``values ~ logistic(log c + s)``."""
    def loss(theta):
        return float(((values - 0.5 * (1 + np.tanh(0.5 * (theta + s)))) ** 2).sum())

    lo, hi = -float(s.max()) - 10, -float(s.min()) + 10
    grid = np.linspace(lo, hi, 201)
    best = grid[int(np.argmin([loss(g) for g in grid]))]
    step = grid[1] - grid[0]
    res = optimize.minimize_scalar(loss, bounds=(best - step, best + step), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x)


def profile_convergence_experiment(kernel: LatticeKernel, v, times: Sequence[float],
                                   half=10, replicates: int = 100, seed: int = 0,
                                   initial: DensityProfile | None = None, margin: int = 2,
                                   blocking_gap: float = 3.0, bin_width: float = 1.0,
                                   threads: int | None = None) -> ProfileConvergenceReport:
    """Marginals from a step (or given) initial profile, fitted to the logistic family.

    Axes orthogonal to ``v`` are periodic, the others carry Reservoir data from
    the 0/1 step across ``<x, v> = 0``.  The fit uses sites at least
    ``margin`` away from Reservoir faces; the residual is the sup-norm gap
    between the empirical and fitted profiles along ``v``, both averaged over
    bins of ``<x, v>`` of width ``bin_width``.  The blocking column is
    the mean number of particles with ``<x, v>`` more than ``blocking_gap``
    below the fitted front ``<x, v> = -log c``.
    """
    v = np.asarray(v, dtype=np.float64)
    if not check_condition6(kernel, v):
        raise ValueError("kernel does not satisfy the exponential condition for this v")
    step = StepV(0.0, 1.0, tuple(v), 0.0)
    window = _axis_window(v, half, step)
    initial = step if initial is None else initial
    sites = window.sites()
    s = sites @ v
    inner = np.ones(len(sites), dtype=bool)
    for i, b in enumerate(window.boundary):
        if isinstance(b, Reservoir):
            inner &= (sites[:, i] >= window.lower[i] + margin) & (sites[:, i] <= window.upper[i] - margin)
    times = [float(t) for t in times]

    def one(rep):
        clock = SimClock(seed, rep)
        cfg = sample_product(initial, window, clock.rng)
        snaps = []
        for t in times:
            cfg = evolve(cfg, kernel, t, clock)
            snaps.append(cfg.occupancy.ravel().astype(np.int64))
        return np.stack(snaps)

    occ = np.stack(map_replicates(one, replicates, threads))   # (R, T, sites)
    mean = occ.mean(axis=0)
    bins = np.floor(s[inner] / bin_width).astype(np.int64)
    _, inv = np.unique(bins, return_inverse=True)
    per_bin = np.bincount(inv)
    log_c, resid, block = [], [], []
    for i in range(len(times)):
        theta = fit_logistic(mean[i, inner], s[inner])
        fitted = 0.5 * (1 + np.tanh(0.5 * (theta + s)))
        log_c.append(theta)
        gap = np.bincount(inv, weights=mean[i, inner] - fitted[inner]) / per_bin
        resid.append(float(np.abs(gap).max()))
        below = s < -theta - blocking_gap
        block.append(float(occ[:, i, below].sum(axis=1).mean()))
    inputs = {"kernel": kernel.to_literal(), "v": v.tolist(), "half": np.ravel(half).tolist(),
              "replicates": replicates, "seed": seed, "initial": initial.to_spec()}
    return ProfileConvergenceReport(inputs, times, log_c, resid, block, resid[-1] < 0.05)


@dataclass
class DriftReport(_Report):
    inputs: dict
    times: list
    front: list
    width: list
    front_speed: float
    width_rate: float
    predicted_speed: float
    predicted_width_rate: float
    edge_speed: float

    def to_csv(self, path) -> None:
        _write_rows(path, ["t", "front", "width"], zip(self.times, self.front, self.width))


def _profile_along(mean: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keys = np.round(s).astype(np.int64)
    uniq, inv = np.unique(keys, return_inverse=True)
    sums = np.bincount(inv, weights=mean)
    cnt = np.bincount(inv)
    return uniq.astype(np.float64), sums / cnt


def front_and_width(pos: np.ndarray, prof: np.ndarray, lo: float = 0.2, hi: float = 0.8):
    """Half-density crossing nearest 0 and ``1/|slope|`` of a linear fit on ``[lo, hi]``."""
    d = prof - 0.5
    idx = np.flatnonzero(d[:-1] * d[1:] <= 0)
    if len(idx) == 0:
        raise ValueError("profile does not cross 1/2")
    cands = []
    for i in idx:
        if prof[i + 1] == prof[i]:
            cands.append(pos[i])
        else:
            cands.append(pos[i] + (0.5 - prof[i]) * (pos[i + 1] - pos[i]) / (prof[i + 1] - prof[i]))
    front = float(min(cands, key=abs))
    sel = (prof >= lo) & (prof <= hi)
    if sel.sum() < 2:
        return front, 0.0
    slope = np.polyfit(pos[sel], prof[sel], 1)[0]
    return front, float(1.0 / abs(slope)) if slope != 0 else math.inf


def drift_experiment(kernel: LatticeKernel, v, times: Sequence[float], half_length: int = 200,
                     width: int = 20, replicates: int = 20, seed: int = 0, left: float = 0.0,
                     right: float = 1.0, threads: int | None = None) -> DriftReport:
    """Step data ``right`` on ``<x, v> >= 0`` when ``<m, v> < 0``: front and fan width.

    The entropy solution along ``v`` is a rarefaction centred at 0, so the
    half-density front stays put and the fan widens at ``2 |<m, v>| / |v|``.
    """
    v = np.asarray(v, dtype=np.float64)
    m = mean_vector(kernel)
    mv = float(m @ v / np.linalg.norm(v))
    if mv >= 0:
        raise ValueError("drift experiment needs <m, v> < 0")
    step = StepV(left, right, tuple(v), 0.0)
    half = np.where(v == 0, width // 2, half_length)
    window = _axis_window(v, half, step)
    s = window.sites() @ (v / np.linalg.norm(v))
    times = [float(t) for t in times]

    def one(rep):
        clock = SimClock(seed, rep)
        cfg = sample_product(step, window, clock.rng)
        snaps = []
        for t in times:
            cfg = evolve(cfg, kernel, t, clock)
            snaps.append(cfg.occupancy.ravel().astype(np.float64))
        return np.stack(snaps)

    mean = np.mean(map_replicates(one, replicates, threads), axis=0)
    fronts, widths = [], []
    for i in range(len(times)):
        pos, prof = _profile_along(mean[i], s)
        f, w = front_and_width(pos, prof)
        fronts.append(f)
        widths.append(w * (right - left))
    tt = np.array(times)
    speed = float(np.polyfit(tt, fronts, 1)[0]) if len(tt) > 1 else 0.0
    rate = float(np.polyfit(tt, widths, 1)[0]) if len(tt) > 1 else 0.0
    inputs = {"kernel": kernel.to_literal(), "v": v.tolist(), "half_length": half_length,
              "width": width, "replicates": replicates, "seed": seed, "left": left, "right": right}
    return DriftReport(inputs, times, fronts, widths, speed, rate, mv * (1 - 2 * 0.5),
                       2 * abs(mv) * (right - left), abs(mv))

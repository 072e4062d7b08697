"""The twelve acceptance criteria, each at its stated size and tolerance.

Every test prints one ``criterion N: PASS|FAIL ...`` line; the lines are also
collected into the pytest terminal summary.  Run this file directly to get
the lines without pytest.
"""

import math
import time

import numpy as np
import pytest

from exlab import burgers as B
from exlab import hydro as H
from exlab.coupling import CoupledState, discrepancy_counts, evolve_coupled
from exlab.dynamics import Closed, SimClock, Window, Reservoir, estimate_marginals
from exlab.kernels import check_condition6, enumerate_stationary_exponents, make_lattice_kernel
from exlab.measures import FamilyShape, GraphKernel, alpha_c_family, check_theorem1, \
    jung_extremality, rooted_tree_ratio
from exlab.profiles import half_space

from oracles import is_stationary_ctmc

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

pytestmark = pytest.mark.slow


def record(num: int, ok: bool, detail: str, started: float) -> None:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.time() - started:.1f} s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# 1 -------------------------------------------------------------------------------

def _random_graph_case(rng, mode):
    n = int(rng.integers(2, 5))
    if mode == "reversible":
        pi = rng.uniform(0.2, 3.0, n)
        W = np.triu(rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.7), 1)
        P = (W + W.T) / pi[:, None]
        P *= 0.9 / max(P.sum(axis=1).max(), 1e-12)
        P[np.diag_indices(n)] = 1 - P.sum(axis=1)
        return P, pi / (1 + pi)
    if mode == "doubly":
        # convex mix of permutations: doubly stochastic, so constants are stationary
        w = rng.dirichlet(np.ones(3))
        P = sum(wi * np.eye(n)[rng.permutation(n)] for wi in w)
        return P, np.full(n, rng.uniform(0.1, 0.9))
    P = rng.dirichlet(np.ones(n), size=n) * (rng.random((n, n)) < 0.8)
    P[np.diag_indices(n)] = 0
    P[np.diag_indices(n)] = 1 - P.sum(axis=1)
    if mode == "classes":
        return P, rng.choice([0.2, 0.5, 0.7], size=n)
    return P, rng.uniform(0.1, 0.9, n)


def test_criterion_1_graph_stationarity_matches_ctmc():
    t0 = time.time()
    rng = np.random.default_rng(20240101)
    modes = ["random", "reversible", "classes", "doubly"]
    mismatches, verdicts = 0, []
    for i in range(240):
        P, alpha = _random_graph_case(rng, modes[i % len(modes)])
        k = GraphKernel(tuple(range(len(alpha))), P)
        got = check_theorem1(k, dict(enumerate(alpha)), tol=1e-9).stationary
        want = is_stationary_ctmc(P, alpha, tol=1e-9)
        mismatches += got != want
        verdicts.append(want)
    ok = mismatches == 0 and 0 < sum(verdicts) < len(verdicts) and time.time() - t0 < 60
    record(1, ok, f"240 kernels, {sum(verdicts)} stationary, {mismatches} mismatches", t0)


# 2 -------------------------------------------------------------------------------

def test_criterion_2_four_exponents():
    t0 = time.time()
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(20):
        while True:
            p1, q1, p2, q2 = rng.dirichlet(np.ones(4))
            if min(abs(p1 - q1), abs(p2 - q2)) > 1e-3:
                break
        k = make_lattice_kernel(2, [((1, 0), p1), ((-1, 0), q1), ((0, 1), p2), ((0, -1), q2)])
        want = {(a, b) for a in (0.0, math.log(p1 / q1)) for b in (0.0, math.log(p2 / q2))}
        got = [tuple(v) for v in enumerate_stationary_exponents(k)]
        matched = len(got) == 4 and all(
            sum(max(abs(g[0] - w[0]), abs(g[1] - w[1])) <= 1e-9 for g in got) == 1 for w in want)
        bad += not matched
    record(2, bad == 0, f"20 draws, {bad} with a different exponent set", t0)


# 3 -------------------------------------------------------------------------------

def test_criterion_3_alpha_c_stationary():
    t0 = time.time()
    p1, q1, p2, q2 = 0.27, 0.23, 0.26, 0.24
    k = make_lattice_kernel(2, [((1, 0), p1), ((-1, 0), q1), ((0, 1), p2), ((0, -1), q2)])
    v = (math.log(p1 / q1), math.log(p2 / q2))
    assert check_condition6(k, v)
    # centre the logistic on the window so densities span most of (0, 1)
    alpha = alpha_c_family(math.exp(-19.5 * (v[0] + v[1])), v)
    window = Window((0, 0), (39, 39), Reservoir(alpha))
    fld = estimate_marginals(alpha, k, window, 50.0, 200, seed=3)
    cov = float(fld.covers(alpha.density(window.sites())).mean())
    record(3, cov >= 0.93, f"coverage {cov:.4f} of 1600 sites (need >= 0.93)", t0)


# 4 -------------------------------------------------------------------------------

def test_criterion_4_coupling_never_creates():
    t0 = time.time()
    rng = np.random.default_rng(44)
    failures = 0
    for run in range(100):
        d = int(rng.integers(1, 3))
        disp = [z for z in ([(1,), (-1,), (2,), (-2,)] if d == 1 else
                            [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1)])]
        probs = rng.dirichlet(np.ones(len(disp)))
        k = make_lattice_kernel(d, list(zip(disp, probs)))
        upper = (int(rng.integers(8, 30)),) if d == 1 else tuple(int(a) for a in rng.integers(4, 9, 2))
        window = Window((0,) * d, upper, Closed())
        layers = (rng.random((int(rng.integers(2, 4)), window.size)) < rng.uniform(.2, .8)).astype(np.uint8)
        state = CoupledState(window, layers)
        out = evolve_coupled(state, k, float(rng.uniform(5, 40)), SimClock(44, run), buffer=64)
        end = discrepancy_counts(out)
        for p, pair in enumerate(out.history.pairs):
            _, a, b = out.history.for_pair(p)
            tot = a + b
            steps = np.diff(tot)
            if (steps > 0).any() or not np.all(steps == -2) or len(set((a - b).tolist())) != 1:
                failures += 1
            elif (a[-1], b[-1]) != end[pair]:
                failures += 1
    record(4, failures == 0, f"100 closed runs, {failures} pair series violating -2 steps", t0)


# 5 -------------------------------------------------------------------------------

def test_criterion_5_burgers_closed_forms():
    t0 = time.time()
    errs = []
    for m in (1.0, 0.6, -0.8):
        inc, dec = ((0.2, 0.8), (0.3, 0.9), (0.1, 0.6)), ((0.8, 0.2), (1.0, 0.0), (0.7, 0.4))
        shocks, fans = (inc, dec) if m > 0 else (dec, inc)
        for l, r in shocks:
            p = B.RiemannProblem(l, r, m)
            assert p.is_shock
            errs.append(abs(p.shock_speed - m * (1 - r - l)))
        for l, r in fans:
            lo, hi = B.RiemannProblem(l, r, m).fan_edges(1.0)
            assert not B.RiemannProblem(l, r, m).is_shock
            errs.append(abs(min(lo, hi) - min(m * (1 - 2 * l), m * (1 - 2 * r))))
            errs.append(abs(max(lo, hi) - max(m * (1 - 2 * l), m * (1 - 2 * r))))
            # inside the fan u solves m (1 - 2u) = y / t
            y = 0.5 * (lo + hi)
            errs.append(abs(float(B.riemann_value(l, r, m, 1.0, y)) - 0.5 * (1 - y / m)))
    l, r, c, x1 = 0.8, 0.2, 1.0, 0.3
    t_0 = B.example3_meeting_time(l, r, c, x1)
    b4 = B.example3_front(l, r, c, x1, 4.0)
    u4 = float(B.example3_solution(l, r, c, x1, 4.0, b4))
    errs += [abs(t_0 - 1.0), abs(b4 + 0.3), abs(u4 - 0.5)]
    worst = max(errs)
    record(5, worst <= 1e-12, f"max error {worst:.2e}; t0={t_0}, b(4)={b4}, u={u4}", t0)


# 6 -------------------------------------------------------------------------------

def test_criterion_6_fv_convergence():
    t0 = time.time()
    T, cells = 2.0, (400, 800, 1600)          # dx = 1/100, 1/200, 1/400 on [-2, 2]
    cases = {"shock": (0.2, 0.7), "standing shock": (0.2, 0.8), "fan": (1.0, 0.0)}
    ok, parts = True, []
    for name, (l, r) in cases.items():
        errs, locs = [], []
        for n in cells:
            g = B.fv_solve(lambda y, l=l, r=r: np.where(y >= 0, r, l), 1.0, T, -2.0, 2.0, n)
            errs.append(B.l1_distance(g, lambda y, l=l, r=r: B.riemann_value(l, r, 1.0, T, y)))
            if l < r:
                locs.append(abs(B.jump_location(g, 0.5 * (l + r)) - (1 - l - r) * T) / g.dx)
        if name == "standing shock":
            # exact up to rounding at every resolution
            mono = all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
        else:
            mono = all(b < a for a, b in zip(errs, errs[1:]))
        good = mono and errs[-1] <= 0.02 and all(x <= 2 for x in locs)
        ok &= good
        parts.append(f"{name} L1 " + "/".join(f"{e:.2e}" for e in errs)
                     + (f" loc<={max(locs):.2f}dx" if locs else ""))
    record(6, ok, "; ".join(parts), t0)


# 7 -------------------------------------------------------------------------------

def test_criterion_7_block_average():
    t0 = time.time()
    k = make_lattice_kernel(2, [((1, 0), 1.0)])
    e = H.HydroExperiment(k, half_space(0.2, 0.8, 1.0), (20, 50, 100), 1.0, replicates=100, seed=7)
    rep = H.block_average_test(e)
    gaps = [r.gap for r in rep.rows]
    ok = rep.decreasing and gaps[-1] <= 0.05
    record(7, ok, f"target {rep.target:.4f}, gaps " + ", ".join(f"{g:.4f}" for g in gaps), t0)


# 8 -------------------------------------------------------------------------------

def test_criterion_8_local_limit():
    t0 = time.time()
    k = make_lattice_kernel(2, [((1, 0), 1.0)])
    e = H.HydroExperiment(k, half_space(0.2, 0.8, 1.0), (100,), 1.0, replicates=200, seed=3)
    ok, parts = True, []
    for x in ((1.0, 0.0), (-1.0, 0.0)):
        rep = H.local_limit_test(e, x, radius=5)
        ok &= rep.marginal_dev <= 0.03 and rep.pair_dev <= 0.03
        parts.append(f"x={x}: u={rep.u:.2f} marginal {rep.marginal:.4f} pair {rep.pair:.4f}")
    record(8, ok, "; ".join(parts), t0)


# 9 -------------------------------------------------------------------------------

def test_criterion_9_asep_table():
    t0 = time.time()
    ok, parts = True, []
    for (l, r), want in (((0.3, 0.8), 0.8), ((0.6, 0.4), 0.5), ((0.1, 0.5), 0.1)):
        rep = H.asep_limit_experiment(0.7, l, r, [2000.0], half_width=1000, replicates=200, seed=9)
        ok &= rep.predicted == want and rep.final_gap <= 0.03
        parts.append(f"({l},{r}) {rep.density[-1]:.4f} vs {want}")
    record(9, ok, "; ".join(parts), t0)


# 10 ------------------------------------------------------------------------------

def test_criterion_10_quadrant_decay():
    t0 = time.time()
    times = [50.0 * i for i in range(11)]
    frozen_a = H.theorem11_experiment(88, 0.3, [4], times, half=100, replicates=20, seed=5)
    frozen_b = H.theorem11_experiment(88, 0.3, [4], times, half=100, replicates=20, seed=5)
    frozen = frozen_a.constant_in_time and frozen_a.band_hits == frozen_b.band_hits
    rep = H.theorem11_experiment(87, 0.4, [4], times, half=100, replicates=200, seed=5)
    trend = rep.trends[0]
    base = rep.envelope_base
    ok = frozen and trend.decreasing and base is not None and 0.15 <= base <= 0.4
    record(10, ok, f"frozen variant constant={frozen}; drifting variant j=4 tau={trend.tau:.3f} p={trend.pvalue:.2e}; "
                   f"envelope base {base:.3f}", t0)


# 11 ------------------------------------------------------------------------------

def test_criterion_11_tree_transition():
    t0 = time.time()
    qs = np.round(np.arange(0.01, 0.50, 0.01), 2)
    wrong = [q for q in qs
             if (jung_extremality(FamilyShape("rooted_tree", rooted_tree_ratio(q))) == "extremal")
             != (0.25 <= q <= 0.40)]
    record(11, not wrong, f"{len(qs)} grid points, misclassified {wrong}", t0)


# 12 ------------------------------------------------------------------------------

def test_criterion_12_wrong_direction_drift():
    t0 = time.time()
    k = make_lattice_kernel(2, [((1, 0), .5), ((-1, 0), .2), ((0, 1), .2), ((0, -1), .1)])
    rep = H.drift_experiment(k, (-1.0, 0.0), [50.0, 100.0, 150.0, 200.0], replicates=20, seed=2)
    mv = rep.edge_speed
    speed_ok = abs(rep.front_speed - rep.predicted_speed) <= 0.15 * mv
    width_ok = abs(rep.width_rate - rep.predicted_width_rate) <= 0.15 * rep.predicted_width_rate
    record(12, speed_ok and width_ok,
           f"front speed {rep.front_speed:.4f} (|<m,v>|={mv:.2f}); width rate {rep.width_rate:.4f} "
           f"vs {rep.predicted_width_rate:.2f}", t0)


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted(globals().items(), key=lambda kv: int(kv[0].split("_")[2]) if kv[0].startswith("test_criterion_") else 0):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)

"""Stationary product measures on finite graphs and on the degree-3 tree."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .profiles import ExponentialC, Table

STOCHASTIC_TOL = 1e-12
GROUP_TOL = 1e-9


class GraphKernelError(ValueError):
    pass


@dataclass(frozen=True)
class GraphKernel:
    """Jump probabilities ``p(x, y)`` on a finite vertex list.

    Rows of vertices in ``boundary`` may be sub-stochastic: these are the
    truncation leaves of a tree whose outward edges were cut.
    """

    sites: tuple
    matrix: np.ndarray
    boundary: frozenset = frozenset()
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        n = len(self.sites)
        if m.shape != (n, n):
            raise GraphKernelError(f"matrix shape {m.shape} does not match {n} sites")
        if (m < 0).any():
            raise GraphKernelError("negative transition probability")
        idx = {s: i for i, s in enumerate(self.sites)}
        if len(idx) != n:
            raise GraphKernelError("duplicate sites")
        rows = m.sum(axis=1)
        for s, i in idx.items():
            if s in self.boundary:
                if rows[i] > 1 + STOCHASTIC_TOL:
                    raise GraphKernelError(f"row {s!r} sums to {rows[i]} > 1")
            elif abs(rows[i] - 1) > STOCHASTIC_TOL:
                raise GraphKernelError(f"row {s!r} sums to {rows[i]}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "index", idx)

    @classmethod
    def from_rates(cls, sites: Sequence[Hashable], rates: Mapping[tuple, float],
                   boundary=()) -> "GraphKernel":
        sites = tuple(sites)
        idx = {s: i for i, s in enumerate(sites)}
        m = np.zeros((len(sites), len(sites)))
        for (x, y), p in rates.items():
            m[idx[x], idx[y]] += p
        return cls(sites, m, frozenset(boundary))

    def p(self, x, y) -> float:
        return float(self.matrix[self.index[x], self.index[y]])

    def edges(self):
        """Unordered pairs ``{x, y}``, ``x != y``, with a positive rate either way."""
        n = len(self.sites)
        m = self.matrix
        for i in range(n):
            for j in range(i + 1, n):
                if m[i, j] > 0 or m[j, i] > 0:
                    yield self.sites[i], self.sites[j]


@dataclass
class Theorem1Result:
    stationary: bool
    reversible: bool
    partition: list[list]
    exempt: list
    failures: list[str] = field(default_factory=list)


def _alpha_lookup(alpha) -> Mapping:
    return alpha.values if isinstance(alpha, Table) else alpha


def check_theorem1(k: GraphKernel, alpha, tol: float = 1e-9,
                   exempt: Sequence | None = None) -> Theorem1Result:
    """Decide stationarity and reversibility of the product measure ``nu_alpha``.

    Sites with equal density (within ``GROUP_TOL``) form a class.  Within a
    class, in-flow must equal out-flow at every site; across classes the
    odds-weighted rates must balance pairwise.  Vertices in ``exempt``
    (default: ``k.boundary``) skip the within-class check.
    """
    alpha = _alpha_lookup(alpha)
    a = np.array([float(alpha[s]) for s in k.sites])
    if ((a <= 0) | (a >= 1)).any():
        raise ValueError("densities must lie strictly inside (0, 1)")
    exempt = set(k.boundary if exempt is None else exempt)
    pi = a / (1 - a)
    m = k.matrix

    # group equal densities
    order = np.argsort(a, kind="stable")
    labels = np.empty(len(a), dtype=np.int64)
    classes: list[list[int]] = []
    for i in order:
        if classes and abs(a[i] - a[classes[-1][0]]) <= GROUP_TOL:
            classes[-1].append(i)
        else:
            classes.append([i])
        labels[i] = len(classes) - 1

    failures = []
    for ci, members in enumerate(classes):
        mem = np.array(members)
        for x in members:
            if k.sites[x] in exempt:
                continue
            out_ = m[x, mem].sum()
            in_ = m[mem, x].sum()
            if abs(out_ - in_) > tol * max(1.0, out_, in_):
                failures.append(f"(a) at {k.sites[x]!r}: out {out_:.6g} != in {in_:.6g}")
    n = len(a)
    for x in range(n):
        for y in range(x + 1, n):
            if labels[x] == labels[y]:
                continue
            lhs, rhs = pi[x] * m[x, y], pi[y] * m[y, x]
            if abs(lhs - rhs) > tol * max(lhs, rhs, 1e-300):
                failures.append(f"(b) on {k.sites[x]!r}-{k.sites[y]!r}: {lhs:.6g} != {rhs:.6g}")

    reversible = True
    for x in range(n):
        for y in range(x + 1, n):
            lhs, rhs = pi[x] * m[x, y], pi[y] * m[y, x]
            if abs(lhs - rhs) > tol * max(lhs, rhs, 1e-300):
                reversible = False
                break
        if not reversible:
            break
    partition = [[k.sites[i] for i in sorted(c)] for c in classes]
    return Theorem1Result(not failures, reversible, partition,
                          [s for s in k.sites if s in exempt], failures)


# -- the degree-3 tree ---------------------------------------------------------

@dataclass(frozen=True)
class TreeModel:
    """Depth-truncated tree.

    Vertices are tuples of child choices from the root ``()``.  ``edge_type``
    maps ``(parent, child)`` to its label; ``rates`` holds ``p(x, y)``.
    For case 2, ``line_of`` assigns each vertex its line id and ``line_step``
    records, for every type-1 edge ``(x, y)``, ``+1`` if ``y`` is the
    successor of ``x`` on the line.
    """

    case: int | str
    depth: int
    params: tuple[float, ...]
    vertices: tuple
    edge_type: Mapping[tuple, int]
    rates: Mapping[tuple, float]
    leaves: frozenset
    line_of: Mapping | None = None
    line_step: Mapping | None = None

    def neighbors(self, x):
        out = []
        if x:
            out.append(x[:-1])
        out.extend(c for c in self._children(x))
        return out

    def _children(self, x):
        if len(x) >= self.depth:
            return []
        n = 3 if (len(x) == 0 and self.case != "rooted") else 2
        return [x + (i,) for i in range(n)]

    def incident_types(self, x):
        return sorted(self.edge_type[_edge_key(x, y)] for y in self.neighbors(x))


def _edge_key(x, y):
    return (x, y) if len(x) < len(y) else (y, x)


def _check_qrs(q, r, s):
    if min(q, r, s) <= 0:
        raise ValueError("q, r, s must be positive")
    if abs(q + r + s - 1) > 1e-12:
        raise ValueError("q + r + s must equal 1")
    if len({q, r, s}) < 3 or min(abs(q - r), abs(r - s), abs(s - q)) <= 1e-12:
        raise ValueError("q, r, s must be distinct")


def _vertices(depth, root_children):
    verts = [()]
    frontier = [()]
    for level in range(depth):
        nxt = []
        for x in frontier:
            n = root_children if level == 0 else 2
            nxt.extend(x + (i,) for i in range(n))
        verts.extend(nxt)
        frontier = nxt
    return verts


def build_tree_case(case: int, params, depth: int) -> tuple[TreeModel, GraphKernel]:
    """Label the truncated degree-3 tree per case 1, 2 or 3 and build its kernel."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    q, r, s = (float(a) for a in params)
    _check_qrs(q, r, s)
    verts = _vertices(depth, 3)
    leaves = frozenset(x for x in verts if len(x) == depth)
    etype: dict[tuple, int] = {}
    rates: dict[tuple, float] = {}
    line_of = line_step = None

    if case in (1, 3):
        # The root's edges get types 1, 2, 3; every other vertex passes the two
        # types not used by its parent edge to its children.
        for x in verts:
            if len(x) == depth:
                continue
            if not x:
                types = [1, 2, 3]
            else:
                up = etype[(x[:-1], x)]
                types = [t for t in (1, 2, 3) if t != up]
            for i, t in enumerate(types):
                etype[(x, x + (i,))] = t
        if case == 1:
            # Bipartite orientation: even-depth vertices send q, r, s along
            # types 1, 2, 3; odd-depth vertices send r, s, q.
            even = {1: q, 2: r, 3: s}
            odd = {1: r, 2: s, 3: q}
            for (x, y), t in etype.items():
                px, py = (even, odd) if len(x) % 2 == 0 else (odd, even)
                rates[(x, y)] = px[t]
                rates[(y, x)] = py[t]
        else:
            val = {1: q, 2: r, 3: s}
            for (x, y), t in etype.items():
                rates[(x, y)] = rates[(y, x)] = val[t]
    elif case == 2:
        # Root: children 0 (successor) and 1 (predecessor) on its line, child 2
        # across a type-2 edge.  A child entered by a type-1 edge continues its
        # line through child 0 and leaves by type 2 through child 1; a child
        # entered by type 2 starts a new line with child 0 as successor and
        # child 1 as predecessor.
        line_of = {(): 0}
        line_step = {}
        direction = {}
        next_line = 1
        for x in verts:
            if len(x) == depth:
                continue
            if not x:
                plan = [(1, +1), (1, -1), (2, 0)]
            else:
                up = etype[(x[:-1], x)]
                if up == 1:
                    plan = [(1, direction[x]), (2, 0)]
                else:
                    plan = [(1, +1), (1, -1)]
            for i, (t, step) in enumerate(plan):
                y = x + (i,)
                etype[(x, y)] = t
                if t == 1:
                    line_of[y] = line_of[x]
                    direction[y] = step
                    line_step[(x, y)] = step
                    line_step[(y, x)] = -step
                    # successor receives q from x; predecessor receives r
                    rates[(x, y)] = q if step > 0 else r
                    rates[(y, x)] = r if step > 0 else q
                else:
                    line_of[y] = next_line
                    next_line += 1
                    rates[(x, y)] = rates[(y, x)] = s
    else:
        raise ValueError(f"unknown case {case!r}")

    model = TreeModel(case, depth, (q, r, s), tuple(verts), etype, rates, leaves,
                      line_of, line_step)
    return model, GraphKernel.from_rates(verts, rates, boundary=leaves)


def build_rooted_tree(q: float, depth: int) -> tuple[TreeModel, GraphKernel]:
    """Upward-branching tree above ``x0``: rate ``q`` to each of two children,
    ``1 - 2q`` to the parent; the root cannot step down."""
    if not 0 < q < 0.5:
        raise ValueError("q must lie in (0, 1/2)")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    s = 1 - 2 * q
    verts = _vertices(depth, 2)
    etype, rates = {}, {}
    for x in verts:
        if len(x) == depth:
            continue
        for i in range(2):
            y = x + (i,)
            etype[(x, y)] = 1
            rates[(x, y)] = q
            rates[(y, x)] = s
    leaves = frozenset(x for x in verts if len(x) == depth)
    model = TreeModel("rooted", depth, (q, q, s), tuple(verts), etype, rates, leaves)
    return model, GraphKernel.from_rates(verts, rates, boundary=leaves | {()})


@dataclass
class TreeFamily:
    name: str
    pi: dict  # vertex -> odds, normalized to pi(root) = 1
    choices: tuple | None = None
    homogeneous: bool = False
    reversible: bool = False


def _propagate(model: TreeModel, ratio) -> dict:
    """Odds from the root outward; ``ratio(x, y)`` gives ``pi(y)/pi(x)`` on an edge."""
    pi = {(): 1.0}
    for x in model.vertices:
        for y in model._children(x):
            pi[y] = pi[x] * ratio(x, y)
    return pi


def tree_stationary_families(model: TreeModel) -> list[TreeFamily]:
    """All stationary product odds assignments, up to scale, on the truncation."""
    rates = model.rates
    if model.case == 3:
        return [TreeFamily("homogeneous", _propagate(model, lambda x, y: 1.0),
                           homogeneous=True, reversible=True)]
    if model.case in (1, "rooted"):
        fams = []
        if model.case == 1:
            fams.append(TreeFamily("homogeneous", _propagate(model, lambda x, y: 1.0),
                                   homogeneous=True))
        rev = _propagate(model, lambda x, y: rates[(x, y)] / rates[(y, x)])
        fams.append(TreeFamily("reversible", rev, reversible=True))
        return fams
    if model.case == 2:
        q, r, _ = model.params
        lines = sorted({model.line_of[x] for x, y in model.line_step})
        fams = []
        for bits in itertools.product((False, True), repeat=len(lines)):
            geometric = dict(zip(lines, bits))

            def ratio(x, y, geometric=geometric):
                if (x, y) not in model.line_step:
                    return 1.0
                if not geometric[model.line_of[x]]:
                    return 1.0
                return (q / r) ** model.line_step[(x, y)]

            fams.append(TreeFamily(
                "lines:" + "".join("g" if b else "c" for b in bits),
                _propagate(model, ratio), choices=bits,
                homogeneous=not any(bits), reversible=all(bits)))
        return fams
    raise ValueError(f"unsupported model case {model.case!r}")


def family_alpha(family: TreeFamily, scale: float = 1.0) -> dict:
    return {x: scale * p / (1 + scale * p) for x, p in family.pi.items()}


# -- extremality ---------------------------------------------------------------

@dataclass(frozen=True)
class FamilyShape:
    """Closed-form description of an odds family for the extremality test.

    kind: ``"constant"``; ``"rooted_tree"`` (odds ``ratio**n`` at depth ``n``,
    ``2**n`` vertices per level); ``"lattice_exponential"`` (odds
    ``c e^{<x, v>}`` on Z^dim).
    """

    kind: str
    ratio: float = 1.0
    dim: int = 1
    v: tuple[float, ...] = ()


def jung_extremality(family: FamilyShape, tol: float = 1e-9) -> str:
    """Divergence of ``sum_x pi(x) / (1 + pi(x))**2`` for structured families."""
    if family.kind == "constant":
        return "extremal"
    if family.kind == "rooted_tree":
        lam = family.ratio
        if not lam > 0:
            raise ValueError("ratio must be positive")
        # level n contributes 2^n lam^n / (1 + lam^n)^2 ~ (2 min(lam, 1/lam))^n
        return "extremal" if 0.5 - tol <= lam <= 2.0 + tol else "not_extremal"
    if family.kind == "lattice_exponential":
        v = np.asarray(family.v, dtype=np.float64)
        if np.max(np.abs(v), initial=0.0) <= tol:
            return "extremal"
        # d >= 2: every level set of <x, v> is infinite or the series has
        # infinitely many terms near the front; d = 1: geometric tails converge.
        return "extremal" if family.dim >= 2 else "not_extremal"
    raise ValueError(f"unsupported family shape {family.kind!r}")


def rooted_tree_ratio(q: float) -> float:
    return q / (1 - 2 * q)


def alpha_c_family(c: float, v) -> ExponentialC:
    """Product-measure density ``c e^{<x,v>} / (1 + c e^{<x,v>})`` on ``Z^d``."""
    return ExponentialC(float(c), tuple(v))

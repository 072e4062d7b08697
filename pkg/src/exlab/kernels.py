"""Jump kernels and the exponential-stationarity conditions on Z^d.

A :class:`LatticeKernel` is a finite-support translation-invariant jump law
``p(z)``.  A :class:`GraphKernel` is a jump law ``p(x, y)`` on a finite vertex
set (trees, small test graphs).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-12
REL_TOL = 1e-9
ZERO_TOL = 1e-9
MAX_CHOICE_CLASSES = 20


class KernelError(ValueError):
    """Raised when a kernel literal fails validation."""


class SubgroupError(ValueError):
    """The support of a kernel generates a proper subgroup of Z^d."""

    def __init__(self, message: str, basis: np.ndarray, index: int):
        super().__init__(message)
        self.basis = basis
        self.index = index


def _as_displacement(z, dim: int) -> tuple[int, ...]:
    if isinstance(z, (int, np.integer)):
        z = (int(z),)
    z = tuple(int(c) for c in z)
    if len(z) != dim:
        raise KernelError(f"displacement {z} has arity {len(z)}, expected {dim}")
    return z


@dataclass(frozen=True)
class LatticeKernel:
    dim: int
    entries: Mapping[tuple[int, ...], float]
    _disp: np.ndarray = field(init=False, repr=False, compare=False)
    _prob: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        items = sorted(self.entries.items())
        disp = np.array([z for z, _ in items], dtype=np.int64).reshape(len(items), self.dim)
        prob = np.array([p for _, p in items], dtype=np.float64)
        disp.setflags(write=False)
        prob.setflags(write=False)
        object.__setattr__(self, "_disp", disp)
        object.__setattr__(self, "_prob", prob)

    def __hash__(self):
        return hash((self.dim, tuple(sorted(self.entries.items()))))

    @property
    def displacements(self) -> np.ndarray:
        return self._disp

    @property
    def probabilities(self) -> np.ndarray:
        return self._prob

    def p(self, z) -> float:
        return float(self.entries.get(_as_displacement(z, self.dim), 0.0))

    @property
    def support(self) -> list[tuple[int, ...]]:
        return [z for z, p in sorted(self.entries.items()) if p > 0]

    def axis_range(self) -> np.ndarray:
        """Largest ``|z_i|`` over the support, per axis."""
        supp = np.array(self.support, dtype=np.int64).reshape(-1, self.dim)
        if len(supp) == 0:
            return np.zeros(self.dim, dtype=np.int64)
        return np.abs(supp).max(axis=0)

    def reflected(self) -> "LatticeKernel":
        return LatticeKernel(self.dim, {tuple(-c for c in z): p for z, p in self.entries.items()})

    def to_literal(self) -> list:
        return [[list(z), p] for z, p in sorted(self.entries.items())]


def make_lattice_kernel(dim: int, entries) -> LatticeKernel:
    """Validate and build a kernel.

    ``entries`` is either a mapping ``z -> p`` or an iterable of ``(z, p)``
    pairs, the latter being the config-file literal form.
    """
    if dim < 1:
        raise KernelError("dim must be >= 1")
    pairs = entries.items() if isinstance(entries, Mapping) else entries
    table: dict[tuple[int, ...], float] = {}
    for z, p in pairs:
        z = _as_displacement(z, dim)
        p = float(p)
        if not math.isfinite(p):
            raise KernelError(f"non-finite probability at {z}")
        if p < 0:
            raise KernelError(f"negative probability {p} at {z}")
        if p > 1:
            raise KernelError(f"probability {p} > 1 at {z}")
        table[z] = table.get(z, 0.0) + p
    total = sum(table.values())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise KernelError(f"probabilities sum to {total!r}, not 1")
    return LatticeKernel(dim, table)


def mean_vector(k: LatticeKernel) -> np.ndarray:
    return (k.displacements * k.probabilities[:, None]).sum(axis=0)


def check_condition6(k: LatticeKernel, v, tol: float = REL_TOL, zero_tol: float = ZERO_TOL) -> bool:
    """Whether ``p(z) = exp(<z, v>) p(-z)`` for every ``z`` with ``<z, v> != 0``."""
    v = np.asarray(v, dtype=np.float64)
    candidates = set(k.support) | {tuple(-c for c in z) for z in k.support}
    for z in candidates:
        s = float(np.dot(z, v))
        if abs(s) <= zero_tol:
            continue
        lhs = k.p(z)
        rhs = math.exp(s) * k.p(tuple(-c for c in z))
        if abs(lhs - rhs) > tol * max(lhs, rhs):
            return False
    return True


# -- integer lattice utilities -------------------------------------------------

def _hermite_basis(vectors: Sequence[Sequence[int]], dim: int) -> list[list[int]]:
    """Row-style Hermite reduction: a basis of the integer span of ``vectors``."""
    rows = [list(int(c) for c in v) for v in vectors if any(v)]
    basis = []
    col = 0
    while rows and col < dim:
        nz = [r for r in rows if r[col] != 0]
        if not nz:
            col += 1
            continue
        # Euclid on column ``col`` until a single row keeps a nonzero entry.
        while len(nz) > 1:
            nz.sort(key=lambda r: abs(r[col]))
            pivot = nz[0]
            for r in nz[1:]:
                q = r[col] // pivot[col]
                for i in range(dim):
                    r[i] -= q * pivot[i]
            nz = [r for r in nz if r[col] != 0]
        pivot = nz[0]
        if pivot[col] < 0:
            pivot[:] = [-c for c in pivot]
        basis.append(pivot)
        rows = [r for r in rows if r is not pivot and any(r)]
        col += 1
    return basis


def lattice_index(vectors: Iterable[Sequence[int]], dim: int) -> int:
    """Index of the subgroup generated by ``vectors`` in Z^d; 0 if rank < d."""
    basis = _hermite_basis(list(vectors), dim)
    if len(basis) < dim:
        return 0
    index = 1
    for i, row in enumerate(basis):
        index *= abs(row[i])
    return index


def subgroup_check(k: LatticeKernel) -> bool:
    """True iff the support generates all of Z^d as a group."""
    return lattice_index(k.support, k.dim) == 1


def is_irreducible(k: LatticeKernel) -> bool:
    """Random-walk irreducibility: the support generates Z^d as a semigroup.

    Equivalent to group generation plus the convex cone of the support being
    all of R^d.
    """
    if not subgroup_check(k):
        return False
    from scipy.optimize import linprog

    supp = np.array([z for z in k.support if any(z)], dtype=np.float64)
    if len(supp) == 0:
        return False
    for i in range(k.dim):
        for sign in (1.0, -1.0):
            target = np.zeros(k.dim)
            target[i] = sign
            res = linprog(np.zeros(len(supp)), A_eq=supp.T, b_eq=target,
                          bounds=[(0, None)] * len(supp), method="highs")
            if res.status != 0:
                return False
    return True


# -- exponent enumeration ------------------------------------------------------

@dataclass(frozen=True)
class _DirectionClass:
    rep: tuple[int, ...]
    log_ratio: float | None  # None: forced <rep, v> = 0


def _direction_classes(k: LatticeKernel) -> list[_DirectionClass]:
    seen = set()
    out = []
    for z in k.support:
        if not any(z):
            continue
        mz = tuple(-c for c in z)
        if z in seen or mz in seen:
            continue
        seen.add(z)
        rep = max(z, mz)
        pz, pm = k.p(rep), k.p(tuple(-c for c in rep))
        if pz > 0 and pm > 0:
            lr = math.log(pz / pm)
            out.append(_DirectionClass(rep, None if abs(lr) <= ZERO_TOL else lr))
        else:
            out.append(_DirectionClass(rep, None))
    return out


def enumerate_stationary_exponents(k: LatticeKernel) -> list[np.ndarray]:
    """All ``v`` for which the product measure with odds ``exp(<x, v>)`` is stationary.

    Each direction class ``{u, -u}`` of the support pins ``<u, v>`` to either 0
    or ``log(p(u)/p(-u))``.  We pick a basis among the class representatives
    (forced classes first), enumerate the two choices on the free basis
    classes, and keep the solutions passing :func:`check_condition6`.
    """
    if not subgroup_check(k):
        basis = np.array(_hermite_basis(k.support, k.dim), dtype=np.int64)
        raise SubgroupError(
            "kernel support generates a proper subgroup of Z^d",
            basis, lattice_index(k.support, k.dim))
    classes = sorted(_direction_classes(k), key=lambda c: c.log_ratio is not None)
    chosen: list[_DirectionClass] = []
    rank = 0
    for c in classes:
        trial = np.array([x.rep for x in chosen] + [c.rep], dtype=np.float64)
        if np.linalg.matrix_rank(trial) > rank:
            chosen.append(c)
            rank += 1
        if rank == k.dim:
            break
    free = [i for i, c in enumerate(chosen) if c.log_ratio is not None]
    if len(free) > MAX_CHOICE_CLASSES:
        raise ValueError(f"{len(free)} independent choice classes exceeds cap {MAX_CHOICE_CLASSES}")
    A = np.array([c.rep for c in chosen], dtype=np.float64)
    found: list[np.ndarray] = []
    for bits in itertools.product((0, 1), repeat=len(free)):
        rhs = np.zeros(k.dim)
        for b, i in zip(bits, free):
            if b:
                rhs[i] = chosen[i].log_ratio
        v = np.linalg.solve(A, rhs)
        if not check_condition6(k, v):
            continue
        if any(np.max(np.abs(v - w)) <= 1e-9 for w in found):
            continue
        found.append(v)
    found.sort(key=lambda w: tuple(np.round(w, 12)))
    return found

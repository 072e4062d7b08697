"""Independent reference computations used by the test suite.

Nothing here imports the package under test except for plain data types.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.linalg import expm


# -- exclusion generators on small graphs ------------------------------------------

def exclusion_generator(P: np.ndarray) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Generator of the exclusion process with jump matrix ``P`` on ``n`` sites.

    States are all ``2**n`` occupancy tuples; ``eta -> eta^{xy}`` at rate
    ``eta(x) (1 - eta(y)) P[x, y]``.
    """
    n = P.shape[0]
    states = list(itertools.product((0, 1), repeat=n))
    index = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for s in states:
        i = index[s]
        for x in range(n):
            for y in range(n):
                if x == y or not s[x] or s[y] or P[x, y] == 0:
                    continue
                t = list(s)
                t[x], t[y] = 0, 1
                Q[i, index[tuple(t)]] += P[x, y]
        Q[i, i] = -Q[i].sum()
    return Q, states


def product_law(alpha, states) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    return np.array([np.prod(np.where(np.array(s) == 1, alpha, 1 - alpha)) for s in states])


def is_stationary_ctmc(P: np.ndarray, alpha, tol: float = 1e-9) -> bool:
    """``nu_alpha Q = 0`` componentwise."""
    Q, states = exclusion_generator(P)
    nu = product_law(alpha, states)
    return bool(np.abs(nu @ Q).max() <= tol)


def coupled_generator(P: np.ndarray) -> tuple[np.ndarray, list]:
    """Generator of the basic coupling of two exclusion processes.

    For each ordered pair ``(x, y)`` at rate ``P[x, y]`` every layer with a
    particle at ``x`` and a hole at ``y`` moves it.
    """
    n = P.shape[0]
    single = list(itertools.product((0, 1), repeat=n))
    states = list(itertools.product(single, single))
    index = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for s in states:
        i = index[s]
        for x in range(n):
            for y in range(n):
                if x == y or P[x, y] == 0:
                    continue
                new = []
                for layer in s:
                    t = list(layer)
                    if t[x] and not t[y]:
                        t[x], t[y] = 0, 1
                    new.append(tuple(t))
                new = tuple(new)
                if new != s:
                    Q[i, index[new]] += P[x, y]
        Q[i, i] = -Q[i].sum()
    return Q, states


def transient_law(Q: np.ndarray, start: int, t: float) -> np.ndarray:
    p0 = np.zeros(Q.shape[0])
    p0[start] = 1.0
    return p0 @ expm(Q * t)


def stationary_vector(Q: np.ndarray) -> np.ndarray:
    """Left null vector of an irreducible generator, normalized to sum 1."""
    n = Q.shape[0]
    A = np.vstack([Q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def torus_walk_law(kernel: dict, shape: tuple[int, ...], start: tuple[int, ...], t: float) -> np.ndarray:
    """Law at time ``t`` of a rate-1 continuous-time random walk on a torus."""
    sites = list(itertools.product(*(range(L) for L in shape)))
    index = {s: i for i, s in enumerate(sites)}
    G = np.zeros((len(sites), len(sites)))
    for s in sites:
        for z, p in kernel.items():
            y = tuple((a + b) % L for a, b, L in zip(s, z, shape))
            G[index[s], index[y]] += p
    G -= np.eye(len(sites))
    p0 = np.zeros(len(sites))
    p0[index[start]] = 1.0
    return (p0 @ expm(G * t)).reshape(shape)


# -- Burgers via the Hopf-Lax formula ----------------------------------------------

def hopf_lax(u0, m: float, t: float, ys, z_lo: float = -20.0, z_hi: float = 20.0,
             nz: int = 400001) -> np.ndarray:
    """Entropy solution of ``u_t + m [u (1 - u)]_y = 0`` for ``m > 0``.

    Reflecting ``y -> -y`` turns the concave flux into the convex
    ``g(w) = m (w^2 - w)``, whose Legendre transform is ``(q + m)^2 / (4m)``.
    The potential ``W(t, y) = min_z W0(z) + t g*((y - z)/t)`` has derivative
    ``w = (g')^{-1}((y - z*)/t)`` at the minimizer ``z*``.
    """
    if m <= 0:
        raise ValueError("oracle covers m > 0")
    z = np.linspace(z_lo, z_hi, nz)
    w0 = np.asarray(u0(-z), dtype=np.float64)
    dz = z[1] - z[0]
    W0 = np.concatenate(([0.0], np.cumsum(0.5 * (w0[1:] + w0[:-1]) * dz)))
    out = []
    for y in np.atleast_1d(ys):
        yy = -float(y)
        cost = W0 + t * ((yy - z) / t + m) ** 2 / (4 * m)
        zs = z[np.argmin(cost)]
        w = 0.5 * ((yy - zs) / (t * m) + 1.0)
        out.append(min(1.0, max(0.0, w)))
    return np.array(out)

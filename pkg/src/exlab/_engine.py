"""JIT-compiled event loops for the exclusion process and its basic coupling.

Sites are flat indices into a window.  ``table[x, k]`` resolves displacement
``k`` from ``x``: a site index, ``-1`` when the attempt is discarded (closed
wall), or ``-2 - e`` for exterior reservoir site ``e``.  Injections from the
exterior are listed as ``(inj_ext[j], inj_tgt[j])`` with cumulative rates
``inj_cum``.
"""

import numpy as np
from numba import njit

# counters layout
EVENTS, NULLS, INJECTIONS, EXITS = 0, 1, 2, 3


@njit(cache=True)
def _pick(cum, u):
    # first index with cum[i] > u
    lo, hi = 0, len(cum) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True)
def run_single(occ, plist, pidx, npart, table, cumk, ext_alpha,
               inj_ext, inj_tgt, inj_cum, t, until, rng, counters):
    """Advance one configuration from time ``t`` to ``until``.

    Aggregate Gillespie: ``npart`` attempt clocks of rate 1 plus the injection
    clocks of total rate ``inj_cum[-1]``.  Returns the particle count.
    """
    inj_total = inj_cum[-1] if len(inj_cum) > 0 else 0.0
    K = table.shape[1]
    while True:
        total = npart + inj_total
        if total <= 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t > until:
            break
        counters[EVENTS] += 1
        u = rng.random() * total
        if u < npart:
            i = int(u)
            if i >= npart:
                i = npart - 1
            x = plist[i]
            k = _pick(cumk, rng.random() * cumk[K - 1])
            y = table[x, k]
            if y >= 0:
                if occ[y] == 0:
                    occ[x] = 0
                    occ[y] = 1
                    plist[i] = y
                    pidx[y] = i
                    pidx[x] = -1
                else:
                    counters[NULLS] += 1
            elif y == -1:
                counters[NULLS] += 1
            else:
                e = -2 - y
                if rng.random() < ext_alpha[e]:
                    counters[NULLS] += 1
                else:
                    # particle leaves through the reservoir
                    occ[x] = 0
                    pidx[x] = -1
                    last = plist[npart - 1]
                    plist[i] = last
                    if last != x:
                        pidx[last] = i
                    npart -= 1
                    counters[EXITS] += 1
        else:
            j = _pick(inj_cum, u - npart)
            y = inj_tgt[j]
            if rng.random() < ext_alpha[inj_ext[j]] and occ[y] == 0:
                occ[y] = 1
                plist[npart] = y
                pidx[y] = npart
                npart += 1
                counters[INJECTIONS] += 1
            else:
                counters[NULLS] += 1
    return npart


@njit(cache=True)
def _pair_contrib(occ, a, b, x):
    # (+1, 0) for a type-(1,0) discrepancy of the ordered pair (a, b) at x
    da = occ[a, x]
    db = occ[b, x]
    if da == 1 and db == 0:
        return 1, 0
    if da == 0 and db == 1:
        return 0, 1
    return 0, 0


@njit(cache=True)
def _union_add(ulist, uidx, nunion, x):
    ulist[nunion] = x
    uidx[x] = nunion
    return nunion + 1


@njit(cache=True)
def _union_remove(ulist, uidx, nunion, x):
    i = uidx[x]
    last = ulist[nunion - 1]
    ulist[i] = last
    uidx[last] = i
    uidx[x] = -1
    return nunion - 1


@njit(cache=True)
def _refresh_site(occ, cnt, ulist, uidx, nunion, x):
    L = occ.shape[0]
    c = 0
    for l in range(L):
        c += occ[l, x]
    if cnt[x] == 0 and c > 0:
        nunion = _union_add(ulist, uidx, nunion, x)
    elif cnt[x] > 0 and c == 0:
        nunion = _union_remove(ulist, uidx, nunion, x)
    cnt[x] = c
    return nunion


@njit(cache=True, nogil=True)
def run_coupled(occ, cnt, ulist, uidx, nunion, table, cumk, ext_alpha,
                inj_ext, inj_tgt, inj_cum, t, until, rng, counters,
                pairs, dcount, lastc, rec_t, rec_pair, rec_c10, rec_c01, rec_n):
    """Basic coupling of ``occ.shape[0]`` layers on shared site clocks.

    Every site occupied in some layer carries one rate-1 attempt clock and
    one displacement draw shared by all layers; each layer applies the move
    on its own.  Two opposite discrepancies at ``x`` and ``y`` are thereby
    driven by the independent clocks at ``x`` and at ``y``.  Reservoir
    draws use one uniform for all layers.

    ``dcount[p]`` holds the (1,0) and (0,1) discrepancy counts of layer pair
    ``pairs[p]``; every event that moves them away from ``lastc[p]`` is
    appended to the ``rec_*`` buffers.  When the buffer fills the loop
    returns early, after a complete event, with ``stopped = True``.
    """
    L = occ.shape[0]
    K = table.shape[1]
    P = pairs.shape[0]
    inj_total = inj_cum[-1] if len(inj_cum) > 0 else 0.0
    cap = len(rec_t)
    stopped = False
    while True:
        if rec_n[0] + P > cap:
            stopped = True
            break
        total = nunion + inj_total
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt > until:
            break
        t += dt
        counters[EVENTS] += 1
        u = rng.random() * total
        x = -1
        y = -1
        if u < nunion:
            i = int(u)
            if i >= nunion:
                i = nunion - 1
            x = ulist[i]
            k = _pick(cumk, rng.random() * cumk[K - 1])
            y = table[x, k]
            if y == -1:
                counters[NULLS] += 1
                continue
        else:
            j = _pick(inj_cum, u - nunion)
            y = inj_tgt[j]
            x = -2 - inj_ext[j]

        # discrepancy contributions of the touched interior sites before
        for p in range(P):
            a = pairs[p, 0]
            b = pairs[p, 1]
            if x >= 0:
                c1, c2 = _pair_contrib(occ, a, b, x)
                dcount[p, 0] -= c1
                dcount[p, 1] -= c2
            if y >= 0:
                c1, c2 = _pair_contrib(occ, a, b, y)
                dcount[p, 0] -= c1
                dcount[p, 1] -= c2

        changed = False
        if x >= 0 and y >= 0:
            for l in range(L):
                if occ[l, x] == 1 and occ[l, y] == 0:
                    occ[l, x] = 0
                    occ[l, y] = 1
                    changed = True
        elif x >= 0:
            # attempt into an exterior site
            full = rng.random() < ext_alpha[-2 - y]
            if not full:
                for l in range(L):
                    if occ[l, x] == 1:
                        occ[l, x] = 0
                        changed = True
        else:
            # injection from exterior site -2 - x into y
            full = rng.random() < ext_alpha[-2 - x]
            if full:
                for l in range(L):
                    if occ[l, y] == 0:
                        occ[l, y] = 1
                        changed = True

        for p in range(P):
            a = pairs[p, 0]
            b = pairs[p, 1]
            if x >= 0:
                c1, c2 = _pair_contrib(occ, a, b, x)
                dcount[p, 0] += c1
                dcount[p, 1] += c2
            if y >= 0:
                c1, c2 = _pair_contrib(occ, a, b, y)
                dcount[p, 0] += c1
                dcount[p, 1] += c2

        if not changed:
            counters[NULLS] += 1
            continue
        if x >= 0:
            nunion = _refresh_site(occ, cnt, ulist, uidx, nunion, x)
        if y >= 0:
            nunion = _refresh_site(occ, cnt, ulist, uidx, nunion, y)

        for p in range(P):
            if lastc[p, 0] != dcount[p, 0] or lastc[p, 1] != dcount[p, 1]:
                n = rec_n[0]
                rec_t[n] = t
                rec_pair[n] = p
                rec_c10[n] = dcount[p, 0]
                rec_c01[n] = dcount[p, 1]
                rec_n[0] = n + 1
                lastc[p, 0] = dcount[p, 0]
                lastc[p, 1] = dcount[p, 1]
    return t, nunion, stopped

"""Numba kernel for greedy packing under d_{n,p}.

Sequences are bucketed by a sign key: bit k is set when coordinate k is at
or above a per-coordinate threshold.  A stored center within d_{n,p} radius
``r`` of a query can only differ in key bits whose coordinates sit close
enough to their threshold; the admissible flip sets are enumerated by a
depth-first search over coordinates sorted by flip cost (for p < inf the
costs ``dist**p`` accumulate against the budget ``n r**p``; for p = inf every
coordinate within ``r`` of its threshold flips independently).  Queries that
would need more than ``max_variants`` buckets fall back to a linear scan.
"""
import numpy as np
from numba import njit, types
from numba.typed import Dict

KEY_BITS = 62


@njit(cache=True)
def _within(U, i, j, r, p, budget):
    n = U.shape[1]
    if p == np.inf:
        for k in range(n):
            if abs(U[i, k] - U[j, k]) > r:
                return False
        return True
    s = 0.0
    for k in range(n):
        s += abs(U[i, k] - U[j, k]) ** p
        if s > budget:
            return False
    return True


@njit(cache=True)
def _key_and_costs(U, i, thr, m, p, cost):
    key = 0
    for k in range(m):
        t = thr[k]
        v = U[i, k]
        if v >= t:
            key |= 1 << k
        if np.isinf(t):
            cost[k] = np.inf
        else:
            d = abs(v - t)
            cost[k] = d if p == np.inf else d ** p
    return key


@njit(cache=True)
def _scan_buckets(U, i, key, cost, order, na, p, r, budget, heads, nxt,
                  stack_idx, stack_cost, stack_key, max_variants, first_only, hits):
    """Visit every bucket reachable by an admissible flip set.

    Returns (number of hits written, overflow flag).  With ``first_only`` the
    search stops at the first center within radius.
    """
    nh = 0
    if key in heads:
        c = heads[key]
        while c >= 0:
            if _within(U, i, c, r, p, budget):
                hits[nh] = c
                nh += 1
                if first_only:
                    return nh, False
            c = nxt[c]
    top = 0
    stack_idx[0] = 0
    stack_cost[0] = 0.0
    stack_key[0] = key
    visited = 1
    while top >= 0:
        j = stack_idx[top]
        if j >= na:
            top -= 1
            continue
        stack_idx[top] = j + 1
        add = cost[order[j]] if p != np.inf else 0.0
        total = stack_cost[top] + add
        if total > budget:
            top -= 1
            continue
        nk = stack_key[top] ^ (1 << order[j])
        visited += 1
        if visited > max_variants:
            return nh, True
        if nk in heads:
            c = heads[nk]
            while c >= 0:
                if _within(U, i, c, r, p, budget):
                    hits[nh] = c
                    nh += 1
                    if first_only:
                        return nh, False
                c = nxt[c]
        top += 1
        stack_idx[top] = j + 1
        stack_cost[top] = total
        stack_key[top] = nk
    return nh, False


@njit(cache=True)
def _flip_order(cost, m, budget, order):
    srt = np.argsort(cost[:m])
    na = 0
    for t in range(m):
        if cost[srt[t]] <= budget:
            order[na] = srt[t]
            na += 1
        else:
            break
    return na


@njit(cache=True)
def greedy_centers(U, r, p, thr, max_variants):
    """Single greedy pass in row order; returns (center indices, fallback count)."""
    G, n = U.shape
    m = min(n, KEY_BITS)
    budget = r if p == np.inf else n * r ** p
    heads = Dict.empty(key_type=types.int64, value_type=types.int64)
    nxt = np.full(G, -1, np.int64)
    centers = np.empty(G, np.int64)
    nc = 0
    cost = np.empty(m)
    order = np.empty(m, np.int64)
    stack_idx = np.empty(m + 2, np.int64)
    stack_cost = np.empty(m + 2)
    stack_key = np.empty(m + 2, np.int64)
    hits = np.empty(1, np.int64)
    nfall = 0
    for i in range(G):
        key = _key_and_costs(U, i, thr, m, p, cost)
        na = _flip_order(cost, m, budget, order)
        nh, overflow = _scan_buckets(U, i, key, cost, order, na, p, r, budget, heads, nxt,
                                     stack_idx, stack_cost, stack_key, max_variants, True, hits)
        covered = nh > 0
        if overflow and not covered:
            nfall += 1
            for t in range(nc):
                if _within(U, i, centers[t], r, p, budget):
                    covered = True
                    break
        if not covered:
            centers[nc] = i
            nc += 1
            if key in heads:
                nxt[i] = heads[key]
            heads[key] = i
    return centers[:nc].copy(), nfall

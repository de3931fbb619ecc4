"""Hot loops for infection-pressure sums (numba).

Parallel over query individuals; each thread accumulates only into its own
slot, so results are independent of the thread count.
"""

import math

import numba
import numpy as np


@numba.njit(inline="always")
def _ipow(base, n):
    out = 1.0
    b = base
    k = n
    while k > 0:
        if k & 1:
            out *= b
        b *= b
        k >>= 1
    return out


@numba.njit(cache=True, parallel=True, nogil=True, fastmath=True)
def _pressure_sums(query, inf_pos_sorted, beta_sorted, starts, lo, edge,
                   ncells, strides, r0, support, a_half, a, b):
    n, d = query.shape
    out = np.zeros(n)
    r0sq = r0 * r0
    rsq = support * support
    inv_rsq = 1.0 / rsq
    w = support - r0
    inv_w = 1.0 / w if w > 0 else 0.0
    ncomb = 3 ** d
    # branchless fast path for the default centered bump (1 - (r/R)^6)^5
    special = (r0 == 0.0) and (a_half == 3) and (b == 5)
    for i in numba.prange(n):
        acc = 0.0
        for t in range(ncomb):
            cid = 0
            ok = True
            tt = t
            for axis in range(d):
                off = tt % 3 - 1
                tt //= 3
                ca = int(math.floor((query[i, axis] - lo[axis]) / edge)) + off
                if ca < 0 or ca >= ncells[axis]:
                    ok = False
                    break
                cid += ca * strides[axis]
            if not ok:
                continue
            s0, s1 = starts[cid], starts[cid + 1]
            if special:
                for kptr in range(s0, s1):
                    q = 0.0
                    for axis in range(d):
                        dx = query[i, axis] - inf_pos_sorted[kptr, axis]
                        q += dx * dx
                    u = min(q * inv_rsq, 1.0)
                    v = 1.0 - u * u * u
                    v2 = v * v
                    acc += beta_sorted[kptr] * (v * v2 * v2)
            else:
                for kptr in range(s0, s1):
                    q = 0.0
                    for axis in range(d):
                        dx = query[i, axis] - inf_pos_sorted[kptr, axis]
                        q += dx * dx
                    if q >= rsq:
                        continue
                    if q <= r0sq:
                        acc += beta_sorted[kptr]
                    else:
                        if r0 == 0.0:
                            s_a = _ipow(q * inv_rsq, a_half)
                        else:
                            s = (math.sqrt(q) - r0) * inv_w
                            s_a = _ipow(s, a)
                        acc += beta_sorted[kptr] * _ipow(1.0 - s_a, b)
        out[i] = acc
    return out


def pressure_sums(query, inf_pos_sorted, beta_sorted, grid_lo, edge, ncells,
                  strides, starts, kernel):
    """Sum over infected of beta_j * shape(|x_i - x_j|) for every query i.

    Infected positions and beta values must be pre-sorted in cell order
    (CSR layout described by starts)."""
    return _pressure_sums(
        np.ascontiguousarray(query), np.ascontiguousarray(inf_pos_sorted),
        np.ascontiguousarray(beta_sorted), starts,
        np.ascontiguousarray(grid_lo), float(edge),
        np.ascontiguousarray(ncells), np.ascontiguousarray(strides),
        float(kernel.plateau_radius), float(kernel.support_radius),
        kernel.inner_exponent // 2, kernel.inner_exponent, kernel.outer_exponent)

"""Vectorised kernels for piecewise-linear functions on a sorted grid.

Everything here works on plain ``(grid, values)`` arrays. Window queries take
arrays of window endpoints ``lo <= hi`` and answer all of them at once.
"""
import numpy as np


def interp(x, g, v):
    """Linear interpolation that tolerates infinite values on flat segments."""
    x = np.asarray(x, dtype=float)
    if len(g) == 1:
        return np.full(x.shape, v[0]) if x.ndim else float(v[0])
    xc = np.clip(x, g[0], g[-1])
    k = np.clip(np.searchsorted(g, xc, side="right") - 1, 0, len(g) - 2)
    v0, v1 = v[k], v[k + 1]
    w = (xc - g[k]) / (g[k + 1] - g[k])
    with np.errstate(invalid="ignore"):
        out = np.where(v0 == v1, v0, v0 + w * (v1 - v0))
    return out if x.ndim else float(out)


def dedupe(points, tol):
    """Sorted unique points with near-duplicates (gap <= tol) collapsed onto the first."""
    p = np.unique(np.asarray(points, dtype=float))
    if len(p) < 2:
        return p
    keep = np.ones(len(p), dtype=bool)
    # a point farther than tol from its predecessor is always kept; only
    # members of near-duplicate runs need the walk back to the last kept point
    for i in np.flatnonzero(np.diff(p) <= tol) + 1:
        j = i - 1
        while not keep[j]:
            j -= 1
        if p[i] - p[j] <= tol:
            keep[i] = False
    return p[keep]


class RangeExtrema:
    """Sparse table answering min/max over index ranges ``[i, j)`` in O(1)."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        n = len(values)
        self.n = n
        levels_min, levels_max = [values], [values]
        width = 1
        while 2 * width <= n:
            lm, lx = levels_min[-1], levels_max[-1]
            levels_min.append(np.minimum(lm[:-width], lm[width:]))
            levels_max.append(np.maximum(lx[:-width], lx[width:]))
            width *= 2
        self._min = np.full((len(levels_min), n), np.inf)
        self._max = np.full((len(levels_max), n), -np.inf)
        for k, (lm, lx) in enumerate(zip(levels_min, levels_max)):
            self._min[k, : len(lm)] = lm
            self._max[k, : len(lx)] = lx

    def query(self, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        length = j - i
        empty = length <= 0
        safe_len = np.where(empty, 1, length)
        k = np.floor(np.log2(safe_len)).astype(int)
        ii = np.where(empty, 0, i)
        jj = np.where(empty, 1, j) - (1 << k)
        mn = np.minimum(self._min[k, ii], self._min[k, jj])
        mx = np.maximum(self._max[k, ii], self._max[k, jj])
        return np.where(empty, np.inf, mn), np.where(empty, -np.inf, mx)


def inner_range(g, lo, hi):
    """Index range ``[ilo, ihi)`` of grid points strictly inside ``(lo, hi)``."""
    return np.searchsorted(g, lo, side="right"), np.searchsorted(g, hi, side="left")


def window_extrema(g, v, lo, hi, table=None):
    """Exact min and max of the piecewise-linear function over each ``[lo, hi]``."""
    table = table or RangeExtrema(v)
    vlo, vhi = interp(lo, g, v), interp(hi, g, v)
    ilo, ihi = inner_range(g, lo, hi)
    imin, imax = table.query(ilo, ihi)
    return np.minimum(np.minimum(vlo, vhi), imin), np.maximum(np.maximum(vlo, vhi), imax)


def positive_part_integral(va, vb, length):
    """Exact integral of ``max(l, 0)`` for the linear ``l`` from ``va`` to ``vb`` over ``length``."""
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)
    both = (va >= 0) & (vb >= 0)
    down = (va > 0) & (vb < 0)
    up = (va < 0) & (vb > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        full = 0.5 * length * (va + vb)
        tri_down = 0.5 * length * va * va / (va - vb)
        tri_up = 0.5 * length * vb * vb / (vb - va)
    out = np.where(both, full, 0.0)
    out = np.where(down, tri_down, out)
    return np.where(up, tri_up, out)


def _safe_log(x):
    return np.log(np.where(x > 0, x, 1.0))


def log_trapezoid(va, vb, length):
    """Trapezoid rule for ``ln(1 + l)``; arguments at or below -1 contribute zero."""
    return 0.5 * length * (_safe_log(1.0 + np.asarray(va)) + _safe_log(1.0 + np.asarray(vb)))


def window_integrals(g, v, lo, hi, segment):
    """Integral over each ``[lo, hi]`` of the function whose segment integral is ``segment``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    vlo, vhi = interp(lo, g, v), interp(hi, g, v)
    direct = segment(vlo, vhi, hi - lo)
    if len(g) == 1:
        return direct
    cum = np.concatenate(([0.0], np.cumsum(segment(v[:-1], v[1:], np.diff(g)))))
    ilo, ihi = inner_range(g, lo, hi)
    has_inner = ilo < ihi
    i0 = np.clip(ilo, 0, len(g) - 1)
    i1 = np.clip(ihi - 1, 0, len(g) - 1)
    split = (segment(vlo, v[i0], g[i0] - lo) + (cum[i1] - cum[i0])
             + segment(v[i1], vhi, hi - g[i1]))
    return np.where(has_inner, split, direct)

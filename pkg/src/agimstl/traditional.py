"""Traditional (min/max) robustness over continuous time.

Predicates on a piecewise-linear trace are piecewise linear, and so are their
pointwise min/max and their sliding-window min/max once the right breakpoints
are inserted. Every intermediate signal below is therefore exact: no sampling
step enters the result.
"""
import numpy as np

from . import _pwl
from .errors import UnsupportedOperator
from .formula import And, Eventually, Globally, Not, Or, Predicate, TrueF, Until, horizon
from .trace import ScoreSignal, Trace, predicate_value

_TOL = 1e-12


def _window_grid(tr, t1, t2):
    if t1 == t2:
        return np.array([t1])
    st = tr.times
    inner = st[(st > t1 + _TOL) & (st < t2 - _TOL)]
    return np.concatenate(([t1], inner, [t2]))


def _crossings(g0, g1, d0, d1):
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.isfinite(d0) & np.isfinite(d1) & (np.sign(d0) * np.sign(d1) < 0)
        r = d0[k] / (d0[k] - d1[k])
    return g0[k] + r * (g1[k] - g0[k])


def _combine(sigs, op):
    g, v = sigs[0]
    for g2, v2 in sigs[1:]:
        grid = _pwl.dedupe(np.concatenate((g, g2)), _TOL)
        a = _pwl.interp(grid, g, v)
        b = _pwl.interp(grid, g2, v2)
        if len(grid) > 1:
            with np.errstate(invalid="ignore"):
                d = a - b
            x = _crossings(grid[:-1], grid[1:], d[:-1], d[1:])
            if len(x):
                grid = _pwl.dedupe(np.concatenate((grid, x)), _TOL)
                a = _pwl.interp(grid, g, v)
                b = _pwl.interp(grid, g2, v2)
        g, v = grid, op(a, b)
    return g, v


def _sliding(g, v, a, b, t1, t2, use_min):
    """Exact ``tau -> min/max over [tau+a, tau+b]`` of a piecewise-linear function."""
    table = _pwl.RangeExtrema(v)

    def extreme(taus):
        mn, mx = _pwl.window_extrema(g, v, taus + a, taus + b, table)
        return mn if use_min else mx

    if t1 == t2:
        return np.array([t1]), extreme(np.array([t1]))
    # Between consecutive candidates both window ends stay on one segment and the
    # set of grid points inside the window is fixed; the envelope of the three
    # resulting linear pieces only bends where two of them meet.
    shifted = np.concatenate((g - a, g - b))
    shifted = shifted[(shifted > t1) & (shifted < t2)]
    c = _pwl.dedupe(np.concatenate(([t1, t2], shifted)), _TOL)
    c0, c1 = c[:-1], c[1:]
    la0, la1 = _pwl.interp(c0 + a, g, v), _pwl.interp(c1 + a, g, v)
    lb0, lb1 = _pwl.interp(c0 + b, g, v), _pwl.interp(c1 + b, g, v)
    mid = 0.5 * (c0 + c1)
    ilo, ihi = _pwl.inner_range(g, mid + a, mid + b)
    imin, imax = table.query(ilo, ihi)
    m = imin if use_min else imax
    with np.errstate(invalid="ignore"):
        roots = [
            _crossings(c0, c1, la0 - lb0, la1 - lb1),
            _crossings(c0, c1, la0 - m, la1 - m),
            _crossings(c0, c1, lb0 - m, lb1 - m),
        ]
    pts = _pwl.dedupe(np.concatenate([c, *roots]), _TOL)
    return pts, extreme(pts)


def _signal(f, tr, t1, t2):
    if isinstance(f, TrueF):
        g = _window_grid(tr, t1, t2)[[0, -1]] if t1 < t2 else np.array([t1])
        return g, np.full(len(g), np.inf)
    if isinstance(f, Predicate):
        g = _window_grid(tr, t1, t2)
        return g, predicate_value(f, tr, g)
    if isinstance(f, Not):
        g, v = _signal(f.child, tr, t1, t2)
        return g, -v
    if isinstance(f, And):
        return _combine([_signal(c, tr, t1, t2) for c in f.children], np.minimum)
    if isinstance(f, Or):
        return _combine([_signal(c, tr, t1, t2) for c in f.children], np.maximum)
    if isinstance(f, (Globally, Eventually)):
        g, v = _signal(f.child, tr, t1 + f.a, t2 + f.b)
        return _sliding(g, v, f.a, f.b, t1, t2, use_min=isinstance(f, Globally))
    if isinstance(f, Until):
        raise UnsupportedOperator("Until has no quantitative semantics here; rewrite it with F/G")
    raise TypeError(f"not a formula: {f!r}")


def rho_exact(f, tr: Trace, window) -> ScoreSignal:
    """Exact piecewise-linear robustness signal ``tau -> rho(f, tr, tau)`` on ``window``."""
    t1, t2 = map(float, window)
    tr.check_covers(t1, t2 + horizon(f))
    g, v = _signal(f, tr, t1, t2)
    return ScoreSignal(g, v)


def rho(f, tr: Trace, t: float = 0.0) -> float:
    """Traditional robustness of ``f`` on ``tr`` at time ``t``; ``+inf`` for ``true``."""
    t = float(t)
    tr.check_covers(t, t + horizon(f))
    _, v = _signal(f, tr, t, t)
    return float(v[0])


def rho_signal(f, tr: Trace, grid) -> ScoreSignal:
    grid = np.asarray(grid, dtype=float)
    exact = rho_exact(f, tr, (grid[0], grid[-1]))
    return ScoreSignal(grid, exact.at(grid))

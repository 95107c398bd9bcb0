"""Shared generators and reference evaluators for the test suite."""
import numpy as np

from agimstl.formula import And, Eventually, Globally, Not, Or, Predicate, TrueF
from agimstl.trace import Trace


def const_trace(value, names=("s",), t_end=10.0, n=11):
    times = np.linspace(0.0, t_end, n)
    return Trace(tuple(names), times, np.full((n, len(names)), float(value)), normalized=True)


def fn_trace(fn, t_end=1.0, n=11, name="s", t_start=0.0, normalized=True):
    times = np.linspace(t_start, t_end, n)
    return Trace((name,), times, np.asarray(fn(times), dtype=float)[:, None], normalized=normalized)


def random_trace(rng, names=("x", "y"), t_end=12.0, spacing=(0.5, 1.0)):
    """Piecewise-linear normalized trace with irregular stamps."""
    times = [0.0]
    while times[-1] < t_end:
        times.append(times[-1] + rng.uniform(*spacing))
    times = np.array(times)
    samples = rng.uniform(-1.0, 1.0, (len(times), len(names)))
    return Trace(tuple(names), times, samples, normalized=True)


def random_formula(rng, names=("x", "y"), depth=3, max_horizon=10.0, ops=None):
    """Random formula over ``names`` with nesting depth at most ``depth`` and a
    horizon at most ``max_horizon``."""
    ops = ops or ("not", "and", "or", "F", "G")
    if depth == 0 or max_horizon < 0.5 or rng.random() < 0.2:
        return Predicate(str(rng.choice(names)), str(rng.choice([">=", "<="])),
                         float(np.round(rng.uniform(-0.8, 0.8), 3)))
    op = rng.choice(ops)
    if op == "not":
        return Not(random_formula(rng, names, depth - 1, max_horizon, ops))
    if op in ("and", "or"):
        k = int(rng.integers(2, 4))
        kids = tuple(random_formula(rng, names, depth - 1, max_horizon / 1.0, ops) for _ in range(k))
        return And(kids) if op == "and" else Or(kids)
    b = float(np.round(rng.uniform(0.2, max_horizon / 2), 2))
    a = float(np.round(rng.uniform(0.0, b - 0.1), 2))
    child = random_formula(rng, names, depth - 1, max_horizon - b, ops)
    return Eventually(a, b, child) if op == "F" else Globally(a, b, child)


# ----------------------------------------------------------------- reference

def brute_rho(f, tr, t, n=2001):
    """Traditional robustness by dense sampling of every window (lower accuracy
    than the exact evaluator, independent of it)."""
    if isinstance(f, TrueF):
        return np.inf
    if isinstance(f, Predicate):
        x = np.interp(t, tr.times, tr.column(f.var))
        return x - f.threshold if f.op == ">=" else f.threshold - x
    if isinstance(f, Not):
        return -brute_rho(f.child, tr, t, n)
    if isinstance(f, And):
        return min(brute_rho(c, tr, t, n) for c in f.children)
    if isinstance(f, Or):
        return max(brute_rho(c, tr, t, n) for c in f.children)
    taus = np.linspace(t + f.a, t + f.b, n)
    vals = [brute_rho(f.child, tr, tau, max(n // 20, 21)) for tau in taus]
    return min(vals) if isinstance(f, Globally) else max(vals)


def naive_eta(f, tr, ts, k=401):
    """AGIM robustness on an array of instants by direct uniform quadrature of
    the definition; each temporal level samples its window at ``k`` points."""
    ts = np.asarray(ts, dtype=float)
    if isinstance(f, TrueF):
        return np.ones_like(ts)
    if isinstance(f, Predicate):
        x = np.interp(ts, tr.times, tr.column(f.var))
        return 0.5 * (x - f.threshold) if f.op == ">=" else 0.5 * (f.threshold - x)
    if isinstance(f, Not):
        return -naive_eta(f.child, tr, ts, k)
    if isinstance(f, (And, Or)):
        u = np.stack([naive_eta(c, tr, ts, k) for c in f.children])
        if isinstance(f, Or):
            u = -u
        good = np.all(u > 0, axis=0)
        geo = np.exp(np.mean(np.log1p(np.maximum(u, -0.999999)), axis=0)) - 1.0
        out = np.where(good, geo, np.mean(np.minimum(u, 0.0), axis=0))
        return out if isinstance(f, And) else -out
    taus = ts[..., None] + np.linspace(f.a, f.b, k)
    u = naive_eta(f.child, tr, taus, k)
    if isinstance(f, Eventually):
        u = -u
    good = np.all(u > 0, axis=-1)
    w = np.full(k, 1.0 / (k - 1))
    w[[0, -1]] *= 0.5
    geo = np.exp(np.log1p(np.maximum(u, -0.999999)) @ w) - 1.0
    neg = np.minimum(u, 0.0) @ w
    out = np.where(good, geo, neg)
    return out if isinstance(f, Globally) else -out

"""Arithmetic-geometric integral mean (AGIM) robustness.

Scores live in ``[-1, 1]``. A conjunction or ``G`` whose operands are strictly
positive everywhere takes the geometric (product-integral) mean of ``1 + score``;
otherwise it takes the arithmetic mean of the negative parts. Disjunction and
``F`` are the mirror images. Intermediate signals are sampled on a refined grid
and read back by linear interpolation; sign decisions over a window use the
exact extrema of that piecewise-linear representation.

``F`` and ``Or`` are computed as the negation of ``G`` and ``And`` applied to
negated operands, guards included, so ``G`` equals ``!F!`` and ``Or`` equals
``!(!a & !b)`` bit for bit. An operand that touches zero without crossing it
therefore scores 0 under either operator.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import _pwl
from .errors import BranchViolation, IntervalError, NotNormalized, UnsupportedOperator
from .formula import And, Eventually, Globally, Not, Or, Predicate, TrueF, Until, horizon
from .trace import ScoreSignal, Trace, predicate_value


class Verdict(str, Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    INCONCLUSIVE = "Inconclusive"


def verdict_of(score: float) -> Verdict:
    if score > 0:
        return Verdict.SATISFIED
    if score < 0:
        return Verdict.VIOLATED
    return Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class Eta:
    value: float

    @property
    def verdict(self) -> Verdict:
        return verdict_of(self.value)

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class QuadratureConfig:
    """Grid used to sample intermediate scores.

    ``step`` fixes the refinement step; when ``None`` it is the trace's median
    sample spacing divided by ``refine_factor``.
    """

    step: Optional[float] = None
    refine_factor: float = 4.0
    floor: float = 1e-12

    def resolve(self, tr: Trace) -> float:
        h = self.step if self.step is not None else tr.median_spacing() / self.refine_factor
        if not h > 0:
            raise ValueError(f"grid step must be positive, got {h}")
        return float(h)


# ----------------------------------------------------------------- window kernels

def _dual_core(u, good):
    """Operator value for operand values ``u`` (columns = operands, rows = instants).

    ``good`` selects the geometric branch. This is the conjunction rule; the
    disjunction is ``-_dual_core(-u, ...)``.
    """
    m = u.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        geo = np.exp(np.mean(np.log(1.0 + np.where(good, u, 0.0)), axis=0)) - 1.0
    neg = np.sum(np.minimum(u, 0.0), axis=0) / m
    out = np.where(good, geo, neg)
    same = np.all(u == u[0], axis=0)
    return np.clip(np.where(same, u[0], out), -1.0, 1.0)


def _conjunction(vals):
    return _dual_core(vals, np.all(vals > 0, axis=0))


def _disjunction(vals):
    # the conjunction rule on negated operands, strict guard included, so that
    # Or equals !(!a & !b) even when an operand touches zero
    return -_conjunction(-vals)


def _window_core(g, v, lo, hi, width, good, wmin, wmax):
    """``G``-rule over windows ``[lo, hi]`` of the piecewise-linear ``(g, v)``."""
    logint = _pwl.window_integrals(g, v, lo, hi, _pwl.log_trapezoid)
    geo = np.exp(logint / width) - 1.0
    negint = -_pwl.window_integrals(g, -v, lo, hi, _pwl.positive_part_integral)
    out = np.where(good, geo, negint / width)
    return np.clip(np.where(wmin == wmax, wmin, out), -1.0, 1.0)


def _globally(g, v, lo, hi, width):
    wmin, wmax = _pwl.window_extrema(g, v, lo, hi)
    # guard: any instant with score <= 0 selects the violation branch.
    return _window_core(g, v, lo, hi, width, wmin > 0, wmin, wmax)


def _eventually(g, v, lo, hi, width):
    # G on the negated operand: a child that only touches zero from below scores 0
    return -_globally(g, -v, lo, hi, width)


# ----------------------------------------------------------------- public kernels

def _transformed(s, window, transform):
    g, v = s.restrict(*window)
    if transform == "1+x":
        return g, v
    if transform == "1-x":
        return g, -v
    raise ValueError(f"transform must be '1+x' or '1-x', got {transform!r}")


def geometric_integral_mean(s: ScoreSignal, window, transform="1+x", floor=1e-12) -> float:
    """``exp(mean of ln(transform(s)))`` over ``window`` by the log-domain trapezoid rule."""
    t1, t2 = map(float, window)
    if not t2 > t1:
        raise IntervalError("geometric mean needs a window of positive length")
    g, u = _transformed(s, (t1, t2), transform)
    if np.any(1.0 + u < 1.0 - floor):
        raise BranchViolation(f"{transform} drops below 1 on [{t1:g}, {t2:g}] "
                              f"(min {1.0 + u.min():.3g}); geometric branch selected wrongly")
    total = _pwl.window_integrals(g, u, np.array([t1]), np.array([t2]), _pwl.log_trapezoid)[0]
    return float(np.exp(total / (t2 - t1)))


def clipped_mean_integral(s: ScoreSignal, window, sign="+") -> float:
    """Mean of ``[s]+`` or ``[s]-`` over ``window``, integrated exactly per segment."""
    t1, t2 = map(float, window)
    if not t2 > t1:
        raise IntervalError("clipped mean needs a window of positive length")
    g, v = s.restrict(t1, t2)
    if sign == "+":
        total = _pwl.window_integrals(g, v, [t1], [t2], _pwl.positive_part_integral)[0]
    elif sign == "-":
        total = -_pwl.window_integrals(g, -v, [t1], [t2], _pwl.positive_part_integral)[0]
    else:
        raise ValueError("sign must be '+' or '-'")
    return float(total / (t2 - t1))


def any_(s: ScoreSignal, window, predicate: str) -> bool:
    """Whether the piecewise-linear ``s`` is ``<= 0`` (or ``> 0``) anywhere on ``window``."""
    t1, t2 = map(float, window)
    g, v = s.restrict(t1, t2)
    if predicate == "<=0":
        return bool(v.min() <= 0)
    if predicate == ">0":
        return bool(v.max() > 0)
    raise ValueError("predicate must be '<=0' or '>0'")


# ----------------------------------------------------------------- evaluator

class _Evaluator:
    def __init__(self, tr: Trace, q: QuadratureConfig, record: Optional[Callable] = None):
        if not tr.normalized:
            raise NotNormalized("AGIM robustness needs a trace normalized to [-1, 1]; use normalize()")
        self.tr = tr
        self.h = q.resolve(tr)
        self.tol = 1e-6 * self.h
        self.record = record

    def lattice(self, t1, t2):
        if t1 == t2:
            return np.array([t1])
        h = self.h
        k = np.arange(np.ceil(t1 / h), np.floor(t2 / h) + 1)
        st = self.tr.times
        pts = np.concatenate((k * h, st[(st >= t1) & (st <= t2)]))
        inner = _pwl.dedupe(pts[(pts > t1 + self.tol) & (pts < t2 - self.tol)], self.tol)
        return np.concatenate(([t1], inner, [t2]))

    def signal(self, f, t1, t2):
        g, v = self._signal(f, t1, t2)
        if self.record is not None:
            self.record(f, ScoreSignal(g, v))
        return g, v

    def _signal(self, f, t1, t2):
        if isinstance(f, TrueF):
            g = self.lattice(t1, t2)
            return g, np.ones(len(g))
        if isinstance(f, Predicate):
            return self.predicate(f, t1, t2)
        if isinstance(f, Not):
            g, v = self.signal(f.child, t1, t2)
            return g, -v
        if isinstance(f, (And, Or)):
            parts = [self.signal(c, t1, t2) for c in f.children]
            grid = _pwl.dedupe(np.concatenate([p[0] for p in parts]), self.tol) if t1 < t2 else np.array([t1])
            vals = np.array([_pwl.interp(grid, pg, pv) for pg, pv in parts])
            return grid, (_conjunction(vals) if isinstance(f, And) else _disjunction(vals))
        if isinstance(f, (Globally, Eventually)):
            if not f.b > f.a:
                raise IntervalError(f"AGIM needs a < b, got [{f.a:g},{f.b:g}] in {f}")
            cg, cv = self.signal(f.child, t1 + f.a, t2 + f.b)
            taus = self.lattice(t1, t2)
            lo = np.clip(taus + f.a, cg[0], cg[-1])
            hi = np.clip(taus + f.b, cg[0], cg[-1])
            op = _globally if isinstance(f, Globally) else _eventually
            return taus, op(cg, cv, lo, hi, f.b - f.a)
        if isinstance(f, Until):
            raise UnsupportedOperator("Until has no AGIM semantics here; rewrite it with F/G")
        raise TypeError(f"not a formula: {f!r}")

    def predicate(self, p, t1, t2):
        if abs(p.threshold) > 1:
            raise NotNormalized(f"threshold of {p} lies outside [-1, 1]")
        g = self.lattice(t1, t2)
        v = 0.5 * predicate_value(p, self.tr, g)
        if t1 < t2:
            st = self.tr.times
            knots = np.concatenate(([t1], st[(st > t1) & (st < t2)], [t2]))
            kv = 0.5 * predicate_value(p, self.tr, knots)
            cross = np.sign(kv[:-1]) * np.sign(kv[1:]) < 0
            r = kv[:-1][cross] / (kv[:-1][cross] - kv[1:][cross])
            x = knots[:-1][cross] + r * (knots[1:][cross] - knots[:-1][cross])
            # keep a crossing only when no grid point already sits on it
            pos = np.searchsorted(g, x)
            near = np.minimum(np.abs(g[np.clip(pos, 0, len(g) - 1)] - x),
                              np.abs(g[np.clip(pos - 1, 0, len(g) - 1)] - x))
            x = x[near > self.tol]
            if len(x):
                g = np.concatenate((g, x))
                v = np.concatenate((v, np.zeros(len(x))))
                order = np.argsort(g, kind="stable")
                g, v = g[order], v[order]
        return g, v


def eta_signal(f, tr: Trace, window, q: Optional[QuadratureConfig] = None) -> ScoreSignal:
    """``tau -> eta(f, tr, tau)`` sampled on the refined grid over ``window``."""
    t1, t2 = map(float, window)
    if t2 < t1:
        raise IntervalError(f"window [{t1:g}, {t2:g}] is reversed")
    ev = _Evaluator(tr, q or QuadratureConfig())
    tr.check_covers(t1, t2 + horizon(f))
    g, v = ev.signal(f, t1, t2)
    return ScoreSignal(g, v)


def eta(f, tr: Trace, t: float = 0.0, q: Optional[QuadratureConfig] = None) -> Eta:
    """AGIM robustness of ``f`` on the normalized trace ``tr`` at time ``t``."""
    t = float(t)
    return Eta(float(eta_signal(f, tr, (t, t), q).values[0]))


def subformula_signals(f, tr: Trace, window, q: Optional[QuadratureConfig] = None) -> list:
    """``(subformula, signal)`` for every node evaluated while scoring ``f`` on ``window``.

    Nodes appear in evaluation order (children before parents); each carries the
    signal over the window its parent needed.
    """
    t1, t2 = map(float, window)
    out = []
    ev = _Evaluator(tr, q or QuadratureConfig(), record=lambda node, s: out.append((node, s)))
    tr.check_covers(t1, t2 + horizon(f))
    ev.signal(f, t1, t2)
    return out

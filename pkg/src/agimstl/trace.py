"""Continuous-time signals reconstructed by linear interpolation."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._pwl import interp
from .errors import ConfigError, OutOfBounds, OutOfDomain, TraceFormatError
from .formula import GE, Predicate, map_predicates

# Slack allowed when a requested time sits a rounding error outside the trace.
TIME_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Trace:
    """Vector signal sampled at strictly increasing times, linear in between."""

    names: tuple
    times: np.ndarray
    samples: np.ndarray  # shape (len(times), len(names))
    normalized: bool = False

    def __post_init__(self):
        names = tuple(self.names)
        times = np.array(self.times, dtype=float)
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if len(set(names)) != len(names):
            raise ValueError("component names must be unique")
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("a trace needs at least two timestamps")
        if samples.shape != (len(times), len(names)):
            raise ValueError(f"samples shape {samples.shape} does not match "
                             f"{len(times)} times x {len(names)} components")
        if not np.all(np.diff(times) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(samples))):
            raise ValueError("trace contains non-finite values")
        if self.normalized and np.any(np.abs(samples) > 1.0):
            raise OutOfBounds("trace flagged normalized has values outside [-1, 1]")
        times.flags.writeable = False
        samples.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)

    @property
    def start(self):
        return float(self.times[0])

    @property
    def end(self):
        return float(self.times[-1])

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"trace has no component {name!r}; available: {list(self.names)}") from None

    def column(self, name):
        return self.samples[:, self.index(name)]

    def check_covers(self, t1, t2):
        if t1 < self.start - TIME_TOL or t2 > self.end + TIME_TOL:
            raise OutOfDomain(f"evaluation needs the trace on [{t1:g}, {t2:g}] "
                              f"but it only spans [{self.start:g}, {self.end:g}]")

    def sample(self, t):
        """Linearly interpolated vector at time ``t``."""
        self.check_covers(t, t)
        return np.array([np.interp(t, self.times, self.samples[:, i]) for i in range(len(self.names))])

    def component_at(self, name, ts):
        return np.interp(ts, self.times, self.column(name))

    def select(self, names):
        """Trace restricted to the given components, in the given order."""
        idx = [self.index(n) for n in names]
        return Trace(tuple(names), self.times, self.samples[:, idx], self.normalized)

    def median_spacing(self):
        return float(np.median(np.diff(self.times)))


def sample(tr: Trace, t: float) -> np.ndarray:
    return tr.sample(t)


def _bounds_for(tr, bounds):
    out = []
    for name in tr.names:
        if name not in bounds:
            raise ConfigError(f"no normalization bounds for component {name!r}")
        lo, hi = map(float, bounds[name])
        if not lo < hi:
            raise ValueError(f"bounds for {name!r} must satisfy lo < hi, got [{lo}, {hi}]")
        out.append((lo, hi))
    return np.array(out, dtype=float).reshape(-1, 2)


def normalize(tr: Trace, bounds: dict, saturate: bool = False) -> Trace:
    """Map each component affinely from ``[lo, hi]`` onto ``[-1, 1]``.

    Values outside the bounds raise ``OutOfBounds`` unless ``saturate`` is set, in
    which case they are clipped first. Clipping keeps the sign of ``x - c`` for
    any threshold ``c`` strictly inside the bounds.
    """
    b = _bounds_for(tr, bounds)
    lo, hi = b[:, 0], b[:, 1]
    raw = tr.samples
    if saturate:
        raw = np.clip(raw, lo, hi)
    else:
        bad = np.argwhere((raw < lo) | (raw > hi))
        if len(bad):
            k, i = bad[0]
            raise OutOfBounds(f"component {tr.names[i]!r} = {raw[k, i]:g} at t = {tr.times[k]:g} "
                              f"lies outside [{lo[i]:g}, {hi[i]:g}]")
    scaled = np.clip(2.0 * (raw - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    return Trace(tr.names, tr.times, scaled, normalized=True)


def denormalize(tr: Trace, bounds: dict) -> Trace:
    b = _bounds_for(tr, bounds)
    lo, hi = b[:, 0], b[:, 1]
    return Trace(tr.names, tr.times, (tr.samples + 1.0) * (hi - lo) / 2.0 + lo)


def normalize_value(x, lo, hi):
    return 2.0 * (x - lo) / (hi - lo) - 1.0


def normalize_formula(f, bounds: dict):
    """Express predicate thresholds in the same normalized units as ``normalize``."""
    def rescale(p: Predicate):
        if p.var not in bounds:
            raise ConfigError(f"no normalization bounds for predicate variable {p.var!r}")
        lo, hi = map(float, bounds[p.var])
        return Predicate(p.var, p.op, normalize_value(p.threshold, lo, hi))
    return map_predicates(f, rescale)


@dataclass(frozen=True, eq=False)
class ScoreSignal:
    """Scalar score over time, linear between grid points."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1 or len(grid) == 0:
            raise ValueError("grid and values must be equal-length 1-d arrays")
        if len(grid) > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.isnan(values)):
            raise ValueError("score signal contains NaN")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def at(self, t):
        return interp(t, self.grid, self.values)

    def restrict(self, t1, t2):
        """Grid and values on ``[t1, t2]`` with interpolated endpoints."""
        if t1 < self.grid[0] - TIME_TOL or t2 > self.grid[-1] + TIME_TOL:
            raise OutOfDomain(f"window [{t1:g}, {t2:g}] outside signal span "
                              f"[{self.grid[0]:g}, {self.grid[-1]:g}]")
        inner = (self.grid > t1) & (self.grid < t2)
        g = np.concatenate(([t1], self.grid[inner], [t2]))
        v = np.concatenate(([self.at(t1)], self.values[inner], [self.at(t2)]))
        if t1 == t2:
            return g[:1], v[:1]
        return g, v


def zero_crossings(s: ScoreSignal, window) -> list:
    """Times in ``window`` where the piecewise-linear score equals zero.

    Sign changes inside a segment are solved exactly; grid points holding an
    exact zero are reported once.
    """
    g, v = s.restrict(*window)
    out = list(g[v == 0.0])
    if len(g) > 1:
        v0, v1 = v[:-1], v[1:]
        k = np.nonzero(np.sign(v0) * np.sign(v1) < 0)[0]
        out.extend(g[k] + v0[k] / (v0[k] - v1[k]) * (g[k + 1] - g[k]))
    return sorted(float(x) for x in out)


def read_csv(path) -> Trace:
    """Strict CSV reader: header ``time,name1,...``, one numeric row per timestamp."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "time":
        raise TraceFormatError(f"{path}: header must be 'time,name1,...', got {rows[0]}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise TraceFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
    if len(data) < 2:
        raise TraceFormatError(f"{path}: need at least two rows of samples")
    arr = np.array(data)
    try:
        return Trace(tuple(header[1:]), arr[:, 0], arr[:, 1:])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from None


def write_csv(tr: Trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", *tr.names])
        for t, row in zip(tr.times, tr.samples):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])


def predicate_value(p: Predicate, tr: Trace, ts):
    """``s_i(t) - c`` for ``s_i >= c`` and ``c - s_i(t)`` for ``s_i <= c``."""
    x = tr.component_at(p.var, ts)
    return x - p.threshold if p.op == GE else p.threshold - x

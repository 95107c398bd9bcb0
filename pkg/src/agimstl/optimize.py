"""Falsification and synthesis by multi-start Nelder-Mead over held input values."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import Bounds, minimize

from .agim import QuadratureConfig, Verdict, eta, verdict_of
from .dynamics import ControlSequence, Model, simulate
from .errors import NonFinite
from .formula import variables
from .trace import Trace, normalize, normalize_formula
from .traditional import rho

log = logging.getLogger(__name__)

SEMANTICS = ("agim", "traditional")
STOP_MODES = ("first-sign", "exhaust-budget")


@dataclass(frozen=True)
class OptConfig:
    """Search settings plus the simulation grid the search runs on.

    ``bounds`` maps every formula variable to its raw ``[lo, hi]`` range used for
    normalization. ``budget`` counts objective evaluations over all restarts.
    """

    Ts: float
    T: float
    bounds: dict
    h: float = 0.01
    semantics: str = "agim"
    budget: int = 200
    restarts: int = 4
    seed: int = 0
    stop: str = "exhaust-budget"
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    saturate: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.semantics not in SEMANTICS:
            raise ValueError(f"semantics must be one of {SEMANTICS}")
        if self.stop not in STOP_MODES:
            raise ValueError(f"stop must be one of {STOP_MODES}")
        if self.budget < 1 or self.restarts < 1:
            raise ValueError("budget and restarts must be at least 1")
        n = self.T / self.Ts
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"T = {self.T:g} is not a multiple of Ts = {self.Ts:g}")

    @property
    def n_holds(self):
        return int(round(self.T / self.Ts))


@dataclass
class OptResult:
    mode: str
    semantics: str
    best_values: np.ndarray
    best_score: float
    verdict: Verdict
    status: str
    n_evals: int
    n_iters: int
    first_sign_eval: Optional[int]
    first_sign_iter: Optional[int]
    seed: int
    wall_time: float
    rho_check: Optional[float] = None
    log: list = field(default_factory=list)

    def summary(self, timing=True) -> dict:
        out = {
            "mode": self.mode,
            "semantics": self.semantics,
            "best_score": self.best_score,
            "verdict": self.verdict.value,
            "status": self.status,
            "evaluations": self.n_evals,
            "iterations": self.n_iters,
            "first_sign_evaluation": self.first_sign_eval,
            "first_sign_iteration": self.first_sign_iter,
            "rho_check": self.rho_check,
            "seed": self.seed,
            "best_control": self.best_values.tolist(),
        }
        if timing:
            out["wall_time_s"] = self.wall_time
            out["mean_eval_ms"] = (float(np.mean([e["wall_ms"] for e in self.log])) if self.log else None)
        return out


def _score_normalized(formula, trn, cfg):
    if cfg.semantics == "agim":
        return eta(formula, trn, 0.0, cfg.quadrature).value
    return rho(formula, trn, 0.0)


def trajectory(model: Model, cs: ControlSequence, cfg: OptConfig) -> Trace:
    return simulate(model, cs, cfg.T, cfg.h)


def normalized_problem(formula, tr: Trace, cfg: OptConfig):
    names = sorted(variables(formula))
    trn = normalize(tr.select(names), cfg.bounds, saturate=cfg.saturate)
    return normalize_formula(formula, cfg.bounds), trn


def objective(model: Model, formula, cs: ControlSequence, cfg: OptConfig, worst: float = -1.0) -> float:
    """Simulate, normalize and score ``formula`` at ``t = 0``.

    A simulation that blows up scores ``worst`` (scaled to the semantics).
    """
    try:
        tr = trajectory(model, cs, cfg)
    except NonFinite as exc:
        log.warning("non-finite simulation scored as worst case: %s", exc)
        return worst if cfg.semantics == "agim" else worst * 1e9
    fn, trn = normalized_problem(formula, tr, cfg)
    return _score_normalized(fn, trn, cfg)


class _Stop(Exception):
    pass


def _initial_simplex(x0, lo, hi, rng):
    n = len(x0)
    span = 0.25 * (hi - lo)
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        step = span[i] if x0[i] + span[i] <= hi[i] else -span[i]
        simplex[i + 1, i] += step
    return simplex


def _run_restart(args):
    """One restart slot: Nelder-Mead from random starts until its budget is used."""
    model, formula, cfg, mode, r, budget, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    m = model.input_dim
    lo = np.tile(model.input_bounds[:, 0], cfg.n_holds)
    hi = np.tile(model.input_bounds[:, 1], cfg.n_holds)
    sign = 1.0 if mode == "falsify" else -1.0
    worst = 1.0 if mode == "falsify" else -1.0
    entries = []
    iters = 0

    def f(x):
        if len(entries) >= budget:
            raise _Stop
        xc = np.clip(x, lo, hi)
        cs = ControlSequence(cfg.Ts, xc.reshape(cfg.n_holds, m), model.input_bounds)
        t0 = time.perf_counter()
        score = float(objective(model, formula, cs, cfg, worst))
        entries.append({"restart": r, "local_index": len(entries), "score": score,
                        "wall_ms": 1e3 * (time.perf_counter() - t0), "iter": iters, "x": xc})
        if cfg.stop == "first-sign" and sign * score < 0:
            raise _Stop
        return sign * score

    def count(*_):
        nonlocal iters
        iters += 1

    try:
        first = True
        while len(entries) < budget:
            # the first slot opens from the box centre, later starts are uniform draws
            x0 = 0.5 * (lo + hi) if (first and r == 0) else rng.uniform(lo, hi)
            first = False
            minimize(f, x0, method="Nelder-Mead", bounds=Bounds(lo, hi), callback=count,
                     options={"maxfev": budget - len(entries), "xatol": 1e-6, "fatol": 1e-10,
                              "adaptive": len(x0) > 8,
                              "initial_simplex": _initial_simplex(x0, lo, hi, rng)})
    except _Stop:
        pass
    return entries


def _search(model: Model, formula, cfg: OptConfig, mode: str) -> OptResult:
    start = time.perf_counter()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    share, extra = divmod(cfg.budget, cfg.restarts)
    jobs = [(model, formula, cfg, mode, r, share + (1 if r < extra else 0), seeds[r])
            for r in range(cfg.restarts)]
    jobs = [j for j in jobs if j[5] > 0]
    sign = 1.0 if mode == "falsify" else -1.0

    def goal(score):
        return sign * score < 0

    merged = []
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for entries in pool.map(_run_restart, jobs):
                merged.extend(entries)
    else:
        for job in jobs:
            entries = _run_restart(job)
            merged.extend(entries)
            if cfg.stop == "first-sign" and any(goal(e["score"]) for e in entries):
                break
    if cfg.stop == "first-sign":
        hit = next((i for i, e in enumerate(merged) if goal(e["score"])), None)
        if hit is not None:
            merged = merged[: hit + 1]

    best_i, first, first_iter = 0, None, None
    iters_done = {}
    for i, e in enumerate(merged):
        e["eval_index"] = i
        iters_done[e["restart"]] = e["iter"]
        if sign * e["score"] < sign * merged[best_i]["score"]:
            best_i = i
        if first is None and goal(e["score"]):
            first = i + 1
            first_iter = sum(iters_done.values())
    best = merged[best_i]
    best_values = best["x"].reshape(cfg.n_holds, model.input_dim)
    result = OptResult(
        mode=mode, semantics=cfg.semantics, best_values=best_values, best_score=best["score"],
        verdict=verdict_of(best["score"]), status="success" if goal(best["score"]) else "budget_exhausted",
        n_evals=len(merged), n_iters=sum(iters_done.values()), first_sign_eval=first,
        first_sign_iter=first_iter, seed=cfg.seed, wall_time=time.perf_counter() - start,
        log=merged,
    )
    result.rho_check = cross_check(model, formula, best_values, cfg)
    return result


def cross_check(model: Model, formula, values, cfg: OptConfig) -> Optional[float]:
    """Traditional robustness of the trajectory produced by ``values``."""
    try:
        tr = trajectory(model, ControlSequence(cfg.Ts, values, model.input_bounds), cfg)
    except NonFinite:
        return None
    fn, trn = normalized_problem(formula, tr, cfg)
    return rho(fn, trn, 0.0)


def falsify(model: Model, formula, cfg: OptConfig) -> OptResult:
    """Minimize robustness over inputs; success means a violating trajectory."""
    return _search(model, formula, cfg, "falsify")


def synthesize(model: Model, formula, cfg: OptConfig) -> OptResult:
    """Maximize robustness over inputs; success means a satisfying trajectory."""
    return _search(model, formula, cfg, "synthesize")


def best_trajectory(model: Model, result: OptResult, cfg: OptConfig) -> Trace:
    return trajectory(model, ControlSequence(cfg.Ts, result.best_values, model.input_bounds), cfg)


def write_log(result: OptResult, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["eval_index", "restart", "score", "wall_ms"])
        for e in result.log:
            w.writerow([e["eval_index"], e["restart"], repr(e["score"]), f"{e['wall_ms']:.3f}"])


def with_semantics(cfg: OptConfig, semantics: str) -> OptConfig:
    return replace(cfg, semantics=semantics)

"""Command-line entry points: monitor, falsify, synth, export.

Exit codes: 0 Satisfied, 1 Violated, 2 Inconclusive, 3 for any error
(bad flags, unreadable files, parse or domain errors).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .agim import QuadratureConfig, Verdict, eta, eta_signal, verdict_of
from .dynamics import model_from_config
from .errors import ConfigError, NotNormalized, STLError
from .formula import And, Or, children, horizon, load, parse, subformulae, variables
from .optimize import OptConfig, best_trajectory, falsify, synthesize, write_log
from .trace import Trace, normalize, normalize_formula, read_csv, write_csv
from .traditional import rho, rho_exact

log = logging.getLogger(__name__)

EXIT_CODES = {Verdict.SATISFIED: 0, Verdict.VIOLATED: 1, Verdict.INCONCLUSIVE: 2}
EXIT_ERROR = 3
TIMING_KEYS = ("timing_s", "wall_time_s", "mean_eval_ms")
BUILTIN = "builtin:"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as Inconclusive
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    subcommand: str
    formula: Optional[str] = None
    trace: Optional[str] = None
    model_config: Optional[str] = None
    semantics: str = "agim"
    bounds: dict = field(default_factory=dict)
    grid_step: Optional[float] = None
    refine_factor: float = 4.0
    time: float = 0.0
    budget: Optional[int] = None
    restarts: Optional[int] = None
    seed: Optional[int] = None
    jobs: int = 1
    stop: Optional[str] = None
    out: Optional[str] = None
    out_dir: str = "."
    subformulae: list = field(default_factory=list)
    window: Optional[tuple] = None

    def __post_init__(self):
        if self.subcommand in ("monitor", "export"):
            if self.model_config is not None:
                raise ConfigError(f"{self.subcommand} reads a trace; --model-config is not accepted")
            if self.trace is None or self.formula is None:
                raise ConfigError(f"{self.subcommand} needs --formula and --trace")
        elif self.subcommand in ("falsify", "synth"):
            if self.trace is not None:
                raise ConfigError(f"{self.subcommand} simulates a model; --trace is not accepted")
            if self.model_config is None:
                raise ConfigError(f"{self.subcommand} needs --model-config")

    @property
    def quadrature(self):
        return QuadratureConfig(step=self.grid_step, refine_factor=self.refine_factor)


def parse_bounds(items) -> dict:
    """``["speed=0:160", "x1=-5:15"]`` -> ``{"speed": (0.0, 160.0), ...}``."""
    out = {}
    for item in items or ():
        name, sep, rng = item.partition("=")
        lo, sep2, hi = rng.partition(":")
        try:
            if not (sep and sep2 and name) or not float(lo) < float(hi):
                raise ValueError
            out[name.strip()] = (float(lo), float(hi))
        except ValueError:
            raise ConfigError(f"bad bounds {item!r}; expected name=lo:hi with lo < hi") from None
    return out


def _read_text(path):
    if path.startswith(BUILTIN):
        return resources.files("agimstl.data").joinpath(path[len(BUILTIN):]).read_text(encoding="utf-8")
    return Path(path).read_text(encoding="utf-8")


def load_model_config(path) -> dict:
    """Read a model config; ``builtin:NAME`` picks a bundled config such as
    ``builtin:falsify_transmission.json``. The ``formula`` key is resolved
    relative to the config's own location."""
    try:
        cfg = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    ref = cfg.get("formula")
    if isinstance(ref, str) and not ref.startswith(BUILTIN) and not Path(ref).is_absolute():
        if path.startswith(BUILTIN):
            cfg["formula"] = BUILTIN + cfg["formula"]
        else:
            cfg["formula"] = str(Path(path).parent / cfg["formula"])
    return cfg


def load_formula(path):
    if path.startswith(BUILTIN):
        return parse(_read_text(path))
    return load(path)


def _prepare(formula, tr: Trace, bounds: dict):
    """Normalize trace and thresholds when bounds are given; otherwise the trace
    must already lie in [-1, 1]."""
    if bounds:
        names = sorted(variables(formula))
        missing = [n for n in names if n not in bounds]
        if missing:
            raise ConfigError(f"no --bounds for {', '.join(missing)}")
        return normalize_formula(formula, bounds), normalize(tr.select(names), bounds)
    if np.all(np.abs(tr.samples) <= 1.0):
        return formula, Trace(tr.names, tr.times, tr.samples, normalized=True)
    return formula, tr


def _score(f, tr, cfg: RunConfig):
    if cfg.semantics == "agim":
        if not tr.normalized:
            raise NotNormalized("trace values exceed [-1, 1]; pass --bounds name=lo:hi to normalize")
        return eta(f, tr, cfg.time, cfg.quadrature).value
    return rho(f, tr, cfg.time)


def _finite(x):
    return x if np.isfinite(x) else (None if np.isnan(x) else ("inf" if x > 0 else "-inf"))


def cmd_monitor(cfg: RunConfig):
    f = load_formula(cfg.formula)
    tr = read_csv(cfg.trace)
    t0 = time.perf_counter()
    fn, trn = _prepare(f, tr, cfg.bounds)
    score = _score(fn, trn, cfg)
    subs = []
    seen = set()
    for node, raw in zip(subformulae(fn), subformulae(f)):
        key = str(node)
        if key in seen:
            continue
        seen.add(key)
        subs.append({"formula": str(raw), "score": _finite(_score(node, trn, cfg))})
    report = {
        "semantics": cfg.semantics,
        "formula": str(f),
        "time": cfg.time,
        "score": _finite(score),
        "verdict": verdict_of(score).value,
        "subformulae": subs,
        "timing_s": time.perf_counter() - t0,
    }
    text = json.dumps(report, indent=2)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_CODES[verdict_of(score)]


def opt_config(model_cfg: dict, cfg: RunConfig) -> OptConfig:
    opt = model_cfg.get("optimizer", {})
    for key in ("Ts", "T", "bounds"):
        if key not in model_cfg:
            raise ConfigError(f"model config is missing required key {key!r}")
    bounds = {k: tuple(v) for k, v in model_cfg["bounds"].items()}
    bounds.update(cfg.bounds)

    def pick(flag, key, default):
        return flag if flag is not None else opt.get(key, default)

    return OptConfig(
        Ts=float(model_cfg["Ts"]), T=float(model_cfg["T"]), bounds=bounds,
        h=float(model_cfg.get("h", 0.01)), semantics=cfg.semantics,
        budget=int(pick(cfg.budget, "budget", 200)), restarts=int(pick(cfg.restarts, "restarts", 4)),
        seed=int(pick(cfg.seed, "seed", 0)), stop=pick(cfg.stop, "stop", "exhaust-budget"),
        quadrature=cfg.quadrature, jobs=cfg.jobs,
    )


def _run_search(cfg: RunConfig, mode: str):
    model_cfg = load_model_config(cfg.model_config)
    formula_path = cfg.formula or model_cfg.get("formula")
    if formula_path is None:
        raise ConfigError("no formula: pass --formula or set 'formula' in the model config")
    f = load_formula(formula_path)
    model = model_from_config(model_cfg)
    oc = opt_config(model_cfg, cfg)
    result = (falsify if mode == "falsify" else synthesize)(model, f, oc)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(best_trajectory(model, result, oc), out / "trajectory.csv")
    with open(out / "control.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_start"] + [f"u{i + 1}" for i in range(model.input_dim)])
        for k, row in enumerate(result.best_values):
            w.writerow([repr(k * oc.Ts)] + [repr(float(x)) for x in row])
    write_log(result, out / "evaluations.csv")
    summary = {"formula": str(f), "model": model.name, "Ts": oc.Ts, "T": oc.T,
               "budget": oc.budget, "restarts": oc.restarts}
    summary.update(result.summary(timing=True))
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({k: summary[k] for k in ("mode", "semantics", "best_score", "verdict",
                                               "status", "evaluations")}))
    return EXIT_CODES[result.verdict]


def cmd_falsify(cfg: RunConfig):
    return _run_search(cfg, "falsify")


def cmd_synth(cfg: RunConfig):
    return _run_search(cfg, "synthesize")


def _default_columns(f):
    return list(children(f)) if isinstance(f, (And, Or)) else [f]


def cmd_export(cfg: RunConfig):
    f = load_formula(cfg.formula)
    tr = read_csv(cfg.trace)
    raw = [parse(s) for s in cfg.subformulae] or _default_columns(f)
    cols = [_prepare(g, tr, cfg.bounds)[0] for g in raw]
    _, trn = _prepare(And(tuple(raw)) if len(raw) > 1 else raw[0], tr, cfg.bounds)
    if cfg.window is not None:
        t1, t2 = cfg.window
    else:
        t1, t2 = tr.start, tr.end - max(horizon(g) for g in cols)
    if t2 < t1:
        raise ConfigError(f"trace too short: the formulas need {max(horizon(g) for g in cols):g} s")
    if cfg.grid_step:
        grid = t1 + cfg.grid_step * np.arange(int(np.floor((t2 - t1) / cfg.grid_step + 1e-9)) + 1)
    else:
        grid = tr.times[(tr.times >= t1) & (tr.times <= t2)]
    grid = np.unique(np.concatenate(([t1], grid, [t2])))
    values = []
    for g in cols:
        if cfg.semantics == "agim":
            if not trn.normalized:
                raise NotNormalized("trace values exceed [-1, 1]; pass --bounds name=lo:hi to normalize")
            values.append(eta_signal(g, trn, (t1, t2), cfg.quadrature).at(grid))
        else:
            values.append(rho_exact(g, trn, (t1, t2)).at(grid))
    out = Path(cfg.out) if cfg.out else Path(cfg.out_dir) / "scores.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [str(g) for g in raw])
        for i, t in enumerate(grid):
            w.writerow([repr(float(t))] + [repr(float(v[i])) for v in values])
    print(str(out))
    return 0


COMMANDS = {"monitor": cmd_monitor, "falsify": cmd_falsify, "synth": cmd_synth, "export": cmd_export}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="agimstl", description="STL robustness monitoring, falsification and synthesis.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--formula", help="formula file (or builtin:NAME)")
        sp.add_argument("--semantics", choices=("agim", "traditional"), default="agim")
        sp.add_argument("--bounds", nargs="+", default=[], metavar="NAME=LO:HI",
                        help="normalization range per signal")
        sp.add_argument("--grid-step", type=float, help="refined-grid step for AGIM quadrature")
        sp.add_argument("--refine-factor", type=float, default=4.0,
                        help="grid step = median trace spacing / factor when --grid-step is unset")

    m = sub.add_parser("monitor", help="score a trace")
    common(m)
    m.add_argument("--trace", help="trace CSV with a leading time column")
    m.add_argument("--model-config", help=argparse.SUPPRESS)
    m.add_argument("--time", type=float, default=0.0, help="evaluation instant")
    m.add_argument("--out", help="also write the JSON report here")

    for name, help_ in (("falsify", "search for a violating input"),
                        ("synth", "search for a satisfying input")):
        s = sub.add_parser(name, help=help_)
        common(s)
        s.add_argument("--model-config", help="JSON model config (or builtin:NAME)")
        s.add_argument("--trace", help=argparse.SUPPRESS)
        s.add_argument("--budget", type=int)
        s.add_argument("--restarts", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--stop", choices=("first-sign", "exhaust-budget"))
        s.add_argument("--out-dir", default=".")

    e = sub.add_parser("export", help="write score curves of subformulae as CSV")
    common(e)
    e.add_argument("--trace")
    e.add_argument("--model-config", help=argparse.SUPPRESS)
    e.add_argument("--subformula", action="append", default=[], dest="subformulae",
                   help="formula text for one column; repeatable (default: top-level operands)")
    e.add_argument("--window", help="T1:T2 evaluation window")
    e.add_argument("--out", help="output CSV (default OUT_DIR/scores.csv)")
    e.add_argument("--out-dir", default=".")
    return p


def run_config(args) -> RunConfig:
    kw = {k: v for k, v in vars(args).items() if k not in ("verbose", "bounds", "window")}
    window = getattr(args, "window", None)
    if window is not None:
        lo, _, hi = window.partition(":")
        try:
            window = (float(lo), float(hi))
        except ValueError:
            raise ConfigError(f"bad window {args.window!r}; expected T1:T2") from None
    return RunConfig(bounds=parse_bounds(args.bounds), window=window, **kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = run_config(args)
        return COMMANDS[cfg.subcommand](cfg)
    except (STLError, OSError, ValueError) as exc:
        print(f"agimstl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

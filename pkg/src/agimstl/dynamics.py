"""ODE models driven by piecewise-constant inputs, integrated with fixed-step RK4."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, Misaligned, NonFinite, OutOfBounds, OutOfDomain
from .trace import Trace

log = logging.getLogger(__name__)

_ALIGN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ControlSequence:
    """Input held at ``values[k]`` on ``[k*Ts, (k+1)*Ts)``; the last value also at ``t = T``."""

    Ts: float
    values: np.ndarray  # shape (K, m)
    bounds: Optional[np.ndarray] = None  # shape (m, 2)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if not self.Ts > 0:
            raise ValueError("sample period Ts must be positive")
        if len(values) == 0:
            raise ValueError("control sequence is empty")
        object.__setattr__(self, "values", values)
        if self.bounds is not None:
            b = np.array(self.bounds, dtype=float).reshape(-1, 2)
            if b.shape[0] != values.shape[1]:
                raise ValueError("bounds must give one [lo, hi] per input dimension")
            if np.any(values < b[:, 0] - 1e-12) or np.any(values > b[:, 1] + 1e-12):
                raise OutOfBounds("control values outside the input bounds")
            object.__setattr__(self, "bounds", b)

    @property
    def T(self):
        return self.Ts * len(self.values)

    def hold(self, t):
        if t < -_ALIGN_TOL or t > self.T + _ALIGN_TOL:
            raise OutOfDomain(f"t = {t:g} outside the input horizon [0, {self.T:g}]")
        k = int(np.floor(t / self.Ts + _ALIGN_TOL))
        return self.values[min(max(k, 0), len(self.values) - 1)]


def hold(cs: ControlSequence, t: float) -> np.ndarray:
    return cs.hold(t)


@dataclass(frozen=True, eq=False)
class Model:
    name: str
    state_names: tuple
    input_dim: int
    rhs: Callable  # (q, u, t) -> dq/dt
    q0: np.ndarray
    input_bounds: np.ndarray  # (m, 2)
    state_bounds: Optional[np.ndarray] = None  # (n, 2)
    outputs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "q0", np.array(self.q0, dtype=float))
        object.__setattr__(self, "input_bounds", np.array(self.input_bounds, dtype=float).reshape(-1, 2))
        if not self.outputs:
            object.__setattr__(self, "outputs", tuple(self.state_names))
        if len(set(self.outputs)) != len(self.outputs):
            raise ValueError("output names must be unique")
        if len(self.q0) != len(self.state_names):
            raise ValueError("q0 length does not match the state dimension")
        if self.input_bounds.shape[0] != self.input_dim:
            raise ValueError("input_bounds must have one row per input")


def simulate(model: Model, cs: ControlSequence, T: Optional[float] = None, h: float = 0.01) -> Trace:
    """Integrate ``model`` from ``q0`` under ``cs`` with RK4 steps of size ``h``.

    ``h`` must divide ``cs.Ts`` so every input switch falls on a step boundary.
    Returns the named outputs sampled every ``h`` in raw units.
    """
    T = cs.T if T is None else float(T)
    per_hold = cs.Ts / h
    if abs(per_hold - round(per_hold)) > 1e-6 * per_hold:
        raise Misaligned(f"step h = {h:g} does not divide Ts = {cs.Ts:g}")
    per_hold = int(round(per_hold))
    n = int(round(T / h))
    if abs(n * h - T) > 1e-6 * max(T, h) or T > cs.T + _ALIGN_TOL:
        raise Misaligned(f"horizon T = {T:g} must be a multiple of h and at most {cs.T:g}")
    if cs.values.shape[1] != model.input_dim:
        raise ValueError(f"{model.name} takes {model.input_dim} inputs, got {cs.values.shape[1]}")
    f = model.rhs
    q = model.q0.copy()
    out = np.empty((n + 1, len(q)))
    out[0] = q
    if hasattr(f, "linear"):
        _rk4_affine(f.linear(), cs, h, per_hold, out)
        if not np.all(np.isfinite(out)):
            raise NonFinite(f"{model.name}: state blew up")
        n = 0
    for k in range(n):
        u = cs.values[min(k // per_hold, len(cs.values) - 1)]
        t = k * h
        k1 = f(q, u, t)
        k2 = f(q + 0.5 * h * k1, u, t + 0.5 * h)
        k3 = f(q + 0.5 * h * k2, u, t + 0.5 * h)
        k4 = f(q + h * k3, u, t + h)
        q = q + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(q)):
            raise NonFinite(f"{model.name}: state blew up at t = {t + h:g}")
        out[k + 1] = q
    idx = [model.state_names.index(name) for name in model.outputs]
    return Trace(model.outputs, np.arange(len(out)) * h, out[:, idx])


def _rk4_affine(system, cs, h, per_hold, out):
    """RK4 for ``dq/dt = A q + B u + c`` collapsed into one matrix step.

    For a time-invariant affine field the four stages reduce algebraically to
    ``q+ = P q + Q (B u + c)``; the result matches the staged loop up to rounding.
    """
    A, B, c = system
    n = A.shape[0]
    hA = h * A
    P, Q, term = np.eye(n), h * np.eye(n), np.eye(n)
    for j in range(1, 5):
        term = term @ hA / j
        P = P + term
        if j < 4:
            Q = Q + h * term / (j + 1)
    drive = (cs.values @ B.T + c) @ Q.T
    for k in range(len(out) - 1):
        out[k + 1] = P @ out[k] + drive[min(k // per_hold, len(drive) - 1)]


# --------------------------------------------------------------------- multi-agent

@dataclass(frozen=True, eq=False)
class ConsensusParams:
    gamma_p: float = 1.0
    gamma_v: float = 1.0
    gamma_d: float = 0.5
    adjacency: np.ndarray = field(default_factory=lambda: np.array([[0.0, 1.0], [1.0, 0.0]]))
    offsets: Optional[np.ndarray] = None  # d_ij as vectors, shape (N, N, 2)

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a, a.T) or np.any(np.diag(a) != 0):
            raise ValueError("adjacency must be symmetric with zero diagonal")
        object.__setattr__(self, "adjacency", a)
        if self.offsets is not None:
            d = np.array(self.offsets, dtype=float)
            if d.shape != (a.shape[0], a.shape[0], 2):
                raise ValueError("offsets must have shape (N, N, 2)")
            object.__setattr__(self, "offsets", d)
        object.__setattr__(self, "_laplacian", np.diag(a.sum(axis=1)) - a)
        if min(self.gamma_p, self.gamma_v, self.gamma_d) < 0:
            raise ValueError("gains must be non-negative")

    @property
    def laplacian(self):
        return self._laplacian


def offsets_from_shape(points) -> np.ndarray:
    """Pairwise offsets ``d_ij = c_i - c_j`` for a formation with vertex positions ``c``."""
    c = np.asarray(points, dtype=float)
    return c[:, None, :] - c[None, :, :]


def consensus_input(p, v, params: ConsensusParams) -> np.ndarray:
    """``-gp sum a_ij (p_i - p_j) - gv sum a_ij (v_i - v_j) - gd v_i`` for every agent."""
    lap = params.laplacian
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    return -params.gamma_p * (lap @ p) - params.gamma_v * (lap @ v) - params.gamma_d * v


def formation_input(p, params: ConsensusParams) -> np.ndarray:
    """``-gp sum a_ij (p_i - p_j - d_ij)`` for every agent."""
    p = np.asarray(p, dtype=float)
    u = params.laplacian @ p
    if params.offsets is not None:
        u = u - np.einsum("ij,ijk->ik", params.adjacency, params.offsets)
    return -params.gamma_p * u


@dataclass(frozen=True)
class DoubleIntegratorConsensus:
    """State per agent ``[x, y, vx, vy]``; acceleration is consensus input plus ``u_i``."""

    params: ConsensusParams

    def linear(self):
        lap = self.params.laplacian
        n = lap.shape[0]
        # state ordering per agent: x, y, vx, vy
        A = np.zeros((4 * n, 4 * n))
        B = np.zeros((4 * n, 2 * n))
        for i in range(n):
            for d in range(2):
                A[4 * i + d, 4 * i + 2 + d] = 1.0
                B[4 * i + 2 + d, 2 * i + d] = 1.0
                for j in range(n):
                    A[4 * i + 2 + d, 4 * j + d] = -self.params.gamma_p * lap[i, j]
                    A[4 * i + 2 + d, 4 * j + 2 + d] = -self.params.gamma_v * lap[i, j]
                A[4 * i + 2 + d, 4 * i + 2 + d] -= self.params.gamma_d
        return A, B, np.zeros(4 * n)

    def __call__(self, q, u, t):
        s = q.reshape(-1, 4)
        p, v = s[:, :2], s[:, 2:]
        acc = consensus_input(p, v, self.params) + np.asarray(u).reshape(-1, 2)
        return np.hstack((v, acc)).ravel()


@dataclass(frozen=True)
class SingleIntegratorFormation:
    """State per agent ``[x, y]``; velocity is formation input plus ``u_i``."""

    params: ConsensusParams

    def linear(self):
        n = self.params.laplacian.shape[0]
        A = -self.params.gamma_p * np.kron(self.params.laplacian, np.eye(2))
        return A, np.eye(2 * n), formation_input(np.zeros((n, 2)), self.params).ravel()

    def __call__(self, q, u, t):
        p = q.reshape(-1, 2)
        return (formation_input(p, self.params) + np.asarray(u).reshape(-1, 2)).ravel()


def consensus_model(positions, params: ConsensusParams, input_bounds=(-2.0, 2.0), velocities=None):
    p0 = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(p0)
    v0 = np.zeros_like(p0) if velocities is None else np.asarray(velocities, dtype=float).reshape(-1, 2)
    q0 = np.hstack((p0, v0)).ravel()
    names = tuple(f"{c}{i + 1}" for i in range(n) for c in ("x", "y", "vx", "vy"))
    return Model("consensus", names, 2 * n, DoubleIntegratorConsensus(params), q0,
                 np.tile(np.asarray(input_bounds, dtype=float).reshape(-1, 2), (2 * n, 1))[: 2 * n])


def formation_model(positions, params: ConsensusParams, input_bounds=(-3.0, 3.0)):
    p0 = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(p0)
    names = tuple(f"{c}{i + 1}" for i in range(n) for c in ("x", "y"))
    return Model("formation", names, 2 * n, SingleIntegratorFormation(params), p0.ravel(),
                 np.tile(np.asarray(input_bounds, dtype=float).reshape(-1, 2), (2 * n, 1))[: 2 * n])


def triangle_offsets(side=2.0):
    """Offsets for an equilateral triangle with the given side length."""
    c = side * np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    return offsets_from_shape(c)


def example1_model(params: Optional[ConsensusParams] = None) -> Model:
    """Two double-integrator agents starting at [0, 4] and [5, 2], inputs in [-2, 2]^2."""
    return consensus_model([[0.0, 4.0], [5.0, 2.0]], params or ConsensusParams(), (-2.0, 2.0))


def example2_model(params: Optional[ConsensusParams] = None) -> Model:
    """Three single-integrator agents forming a side-2 triangle, inputs in [-3, 3]^2."""
    if params is None:
        params = ConsensusParams(gamma_p=1.0, adjacency=np.ones((3, 3)) - np.eye(3),
                                 offsets=triangle_offsets(2.0))
    return formation_model([[4.0, 0.0], [2.0, 2.0], [1.0, 0.0]], params, (-3.0, 3.0))


# --------------------------------------------------------------------- transmission

@dataclass(frozen=True)
class TransmissionSurrogate:
    """Two-state vehicle: speed (mph) and engine speed (rpm) under a throttle in [0, 80].

    A four-speed gearbox is selected from the current speed (no hysteresis).
    Engine speed relaxes towards the wheel-locked speed plus a throttle-dependent
    converter slip; road speed follows traction minus rolling and aero drag.
    """

    shift_speeds: tuple = (25.0, 50.0, 75.0)
    rpm_per_mph: tuple = (110.0, 70.0, 48.0, 36.0)
    torque_gain: tuple = (2.0, 1.5, 1.1, 0.85)
    traction: float = 0.0827
    rolling: float = 0.02
    aero: float = 0.0002
    idle_rpm: float = 700.0
    slip_rpm: float = 12.0
    max_rpm: float = 7000.0
    engine_tau: float = 0.5

    def gear(self, speed):
        g = 0
        for s in self.shift_speeds:
            if speed >= s:
                g += 1
        return g

    def __call__(self, q, u, t):
        speed, rpm = float(q[0]), float(q[1])
        throttle = float(u[0])
        g = self.gear(speed)
        dv = self.traction * throttle * self.torque_gain[g] - self.rolling * speed - self.aero * speed * abs(speed)
        if speed <= 0.0 and dv < 0.0:
            dv = 0.0
        target = min(self.idle_rpm + self.rpm_per_mph[g] * max(speed, 0.0) + self.slip_rpm * throttle,
                     self.max_rpm)
        return np.array([dv, (target - rpm) / self.engine_tau])


TRANSMISSION_BOUNDS = {"speed": (0.0, 160.0), "rpm": (0.0, 8000.0)}


def transmission_surrogate() -> Model:
    return Model("transmission", ("speed", "rpm"), 1, TransmissionSurrogate(),
                 np.array([0.0, 700.0]), np.array([[0.0, 80.0]]),
                 state_bounds=np.array([TRANSMISSION_BOUNDS["speed"], TRANSMISSION_BOUNDS["rpm"]]))


# --------------------------------------------------------------------- config

def _req(cfg, key):
    if key not in cfg:
        raise ConfigError(f"model config is missing required key {key!r}")
    return cfg[key]


def params_from_config(cfg) -> ConsensusParams:
    raw = cfg.get("params", {})
    kwargs = {k: raw[k] for k in ("gamma_p", "gamma_v", "gamma_d") if k in raw}
    if "adjacency" in raw:
        kwargs["adjacency"] = raw["adjacency"]
    if "offsets" in raw:
        kwargs["offsets"] = raw["offsets"]
    elif "formation_shape" in raw:
        kwargs["offsets"] = offsets_from_shape(raw["formation_shape"])
    try:
        return ConsensusParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad consensus parameters: {exc}") from None


def model_from_config(cfg: dict) -> Model:
    """Build a model from the ``model`` section keys of a JSON config."""
    kind = _req(cfg, "model")
    if kind == "transmission":
        return transmission_surrogate()
    if kind == "consensus":
        return consensus_model(_req(cfg, "initial_positions"), params_from_config(cfg),
                               cfg.get("input_bounds", [-2.0, 2.0]))
    if kind == "formation":
        return formation_model(_req(cfg, "initial_positions"), params_from_config(cfg),
                               cfg.get("input_bounds", [-3.0, 3.0]))
    raise ConfigError(f"unknown model {kind!r}; expected transmission, consensus or formation")

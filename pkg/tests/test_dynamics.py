import numpy as np
import pytest
from dataclasses import replace

from agimstl.dynamics import (ConsensusParams, ControlSequence, Model, TRANSMISSION_BOUNDS,
                              consensus_input, example1_model, example2_model, formation_input,
                              hold, model_from_config, offsets_from_shape, simulate,
                              transmission_surrogate, triangle_offsets)
from agimstl.errors import ConfigError, Misaligned, NonFinite, OutOfBounds, OutOfDomain
from agimstl.formula import parse
from agimstl.trace import normalize, normalize_formula
from agimstl.traditional import rho

PHI_FALSIFY = parse("G[0,30] (rpm <= 4000) & G[0,30] (speed <= 100)")


class Staged:
    """Wraps an rhs so ``simulate`` takes the generic staged RK4 path."""

    def __init__(self, f):
        self.f = f

    def __call__(self, q, u, t):
        return self.f(q, u, t)


def integrator(n=1, bounds=(-10.0, 10.0)):
    return Model("integrator", tuple(f"p{i}" for i in range(n)), n, lambda q, u, t: np.asarray(u, float),
                 np.zeros(n), [bounds] * n)


def test_hold_examples():
    cs = ControlSequence(5.0, np.arange(1.0, 7.0))
    assert hold(cs, 7.0)[0] == 2.0
    assert hold(cs, 0.0)[0] == 1.0
    assert hold(cs, 30.0)[0] == 6.0
    assert hold(cs, 5.0)[0] == 2.0  # right-continuous at switches
    assert hold(cs, 4.999)[0] == 1.0
    with pytest.raises(OutOfDomain):
        hold(cs, 31.0)


def test_control_sequence_bounds():
    with pytest.raises(OutOfBounds):
        ControlSequence(1.0, [[0.5], [2.0]], bounds=[[0.0, 1.0]])
    with pytest.raises(ValueError):
        ControlSequence(0.0, [[0.5]])


def test_zero_input_equilibrium():
    m = replace(example1_model(), q0=np.zeros(8))
    tr = simulate(m, ControlSequence(1.0, np.zeros((3, 4))), h=0.1)
    assert np.all(tr.samples == 0.0)


def test_single_integrator_exact():
    tr = simulate(integrator(), ControlSequence(1.0, [[1.0]]), h=0.01)
    assert tr.sample(1.0)[0] == pytest.approx(1.0, abs=1e-10)
    assert tr.end == pytest.approx(1.0)


def test_input_switch_lands_on_step():
    tr = simulate(integrator(), ControlSequence(0.5, [[1.0], [-1.0]]), h=0.1)
    assert tr.sample(0.5)[0] == pytest.approx(0.5, abs=1e-12)
    assert tr.sample(1.0)[0] == pytest.approx(0.0, abs=1e-12)


def test_misaligned_and_horizon():
    with pytest.raises(Misaligned):
        simulate(integrator(), ControlSequence(0.5, [[1.0]]), h=0.3)
    with pytest.raises(Misaligned):
        simulate(integrator(), ControlSequence(0.5, [[1.0]]), T=1.0, h=0.1)


def test_non_finite_detected():
    m = Model("blowup", ("x",), 1, lambda q, u, t: np.full(1, np.inf), [1.0], [[0.0, 1.0]])
    with pytest.raises(NonFinite):
        simulate(m, ControlSequence(1.0, [[0.0]]), h=0.1)


def test_rk4_fourth_order():
    rng = np.random.default_rng(0)
    m = example1_model()
    cs = ControlSequence(2.0, rng.uniform(-2, 2, (5, 4)))
    ref = simulate(m, cs, h=0.0025).samples
    e1 = np.abs(simulate(m, cs, h=0.02).samples[::1] - ref[::8]).max()
    e2 = np.abs(simulate(m, cs, h=0.01).samples - ref[::4]).max()
    assert e1 / e2 >= 12


def test_affine_step_matches_staged_rk4():
    rng = np.random.default_rng(1)
    for m in (example1_model(), example2_model()):
        cs = ControlSequence(1.0, rng.uniform(-2, 2, (4, m.input_dim)))
        fast = simulate(m, cs, h=0.05).samples
        staged = simulate(replace(m, rhs=Staged(m.rhs)), cs, h=0.05).samples
        assert np.allclose(fast, staged, atol=1e-11, rtol=0)


def test_consensus_input_examples():
    p = np.array([[0.0, 4.0], [5.0, 2.0]])
    u = consensus_input(p, np.zeros((2, 2)), ConsensusParams(gamma_p=1.0))
    assert np.allclose(u[0], [5.0, -2.0])
    assert np.allclose(consensus_input(np.ones((2, 2)), np.zeros((2, 2)), ConsensusParams()), 0.0)
    zero = ConsensusParams(gamma_p=0, gamma_v=0, gamma_d=0)
    assert np.allclose(consensus_input(p, np.ones((2, 2)), zero), 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ConsensusParams(adjacency=[[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        ConsensusParams(adjacency=[[1, 1], [1, 0]])
    with pytest.raises(ValueError):
        ConsensusParams(gamma_p=-1.0)


def test_consensus_disagreement_non_increasing():
    m = example1_model()
    tr = simulate(m, ControlSequence(0.1, np.zeros((200, 4))), h=0.01)
    d = np.hypot(tr.column("x1") - tr.column("x2"), tr.column("y1") - tr.column("y2"))
    # the default gains leave the relative motion slightly underdamped (damping
    # ratio about 0.88): monotone up to the first pass through agreement, then a
    # rebound below 1% of the initial disagreement
    first = int(np.argmax(np.diff(d) > 0))
    assert first > 0 and np.all(np.diff(d[: first + 1]) <= 0)
    assert d[first:].max() <= 1e-2 * d[0]


def test_formation_input_examples():
    shape = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, np.sqrt(3)]])
    params = ConsensusParams(adjacency=np.ones((3, 3)) - np.eye(3), offsets=offsets_from_shape(shape))
    assert np.allclose(formation_input(shape + [3.0, 1.0], params), 0.0)
    single = ConsensusParams(adjacency=[[0.0]])
    assert np.allclose(formation_input([[1.0, 2.0]], single), 0.0)


def test_triangle_formation_reached():
    m = example2_model()
    tr = simulate(m, ControlSequence(0.1, np.zeros((450, 6))), h=0.01)
    p = tr.samples[-1].reshape(3, 2)
    dists = [np.linalg.norm(p[i] - p[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    assert np.allclose(dists, 2.0, rtol=0.02)
    assert np.allclose(np.linalg.norm(triangle_offsets(2.0)[0, 1]), 2.0)


def test_transmission_falsifiable_and_satisfiable():
    m = transmission_surrogate()

    def score(level):
        tr = simulate(m, ControlSequence(5.0, np.full((6, 1), level)), h=0.05)
        b = TRANSMISSION_BOUNDS
        return rho(normalize_formula(PHI_FALSIFY, b), normalize(tr, b))

    assert score(80.0) < 0
    assert score(0.0) > 0
    idle = simulate(m, ControlSequence(5.0, np.zeros((6, 1))), h=0.05)
    assert idle.column("rpm")[-1] == pytest.approx(700.0) and idle.column("speed")[-1] == 0.0


def test_transmission_finite_on_random_inputs():
    m = transmission_surrogate()
    rng = np.random.default_rng(4)
    for _ in range(20):
        tr = simulate(m, ControlSequence(5.0, rng.uniform(0, 80, (6, 1))), h=0.05)
        assert np.all(np.isfinite(tr.samples))
        assert tr.samples[:, 0].min() >= 0.0


def test_gear_schedule():
    rhs = transmission_surrogate().rhs
    assert [rhs.gear(v) for v in (0.0, 24.9, 25.0, 60.0, 90.0)] == [0, 0, 1, 2, 3]


def test_model_from_config():
    m = model_from_config({"model": "consensus", "initial_positions": [[0, 4], [5, 2]],
                           "params": {"gamma_p": 0.5}})
    assert m.state_names[:4] == ("x1", "y1", "vx1", "vy1") and m.rhs.params.gamma_p == 0.5
    f = model_from_config({"model": "formation", "initial_positions": [[0, 0], [1, 0], [0, 1]],
                           "params": {"adjacency": [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
                                      "formation_shape": [[0, 0], [2, 0], [1, 1.7]]}})
    assert f.input_dim == 6
    assert model_from_config({"model": "transmission"}).outputs == ("speed", "rpm")
    with pytest.raises(ConfigError):
        model_from_config({"model": "consensus"})
    with pytest.raises(ConfigError):
        model_from_config({"initial_positions": []})
    with pytest.raises(ConfigError):
        model_from_config({"model": "boat"})

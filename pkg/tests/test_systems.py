import numpy as np
import pytest

from kernelctrl.sampling import SeededRng
from kernelctrl.systems import (
    NoiseSpec,
    Trajectory,
    integrate_zoh,
    make_system,
    simulate,
    step,
    tora_default_policy,
)


def test_make_integrator2_matrices():
    sys2 = make_system("integrator(2)", ts=0.25)
    np.testing.assert_allclose(sys2.A, [[1.0, 0.25], [0.0, 1.0]])
    np.testing.assert_allclose(sys2.B, [[0.03125], [0.25]])


def test_make_integrator_name_variants():
    assert make_system("integrator(5)").state_dim == 5
    assert make_system("integrator(5)").action_dim == 1
    assert make_system("integrator", n=3).state_dim == 3


def test_make_cwh_defaults():
    sys4 = make_system("cwh")
    assert sys4.state_dim == 4 and sys4.action_dim == 2
    np.testing.assert_allclose(sys4.action_lower, [-0.1, -0.1])
    np.testing.assert_allclose(sys4.action_upper, [0.1, 0.1])
    np.testing.assert_allclose(
        np.diag(sys4.noise.covariance), [1e-4, 1e-4, 5e-8, 5e-8]
    )
    # discretization of a stable-ish orbital system stays well scaled
    assert np.isfinite(sys4.A).all() and np.isfinite(sys4.B).all()


def test_make_unknown_name_lists_valid():
    with pytest.raises(ValueError, match="integrator"):
        make_system("pendulum")


def test_make_invalid_param():
    with pytest.raises(ValueError, match="invalid parameter"):
        make_system("tora", omega=3.0)


def test_step_equilibrium():
    sys2 = make_system("integrator(2)", noise=0.0)
    rng = SeededRng(0)
    np.testing.assert_array_equal(step(sys2, [0.0, 0.0], [0.0], rng), [0.0, 0.0])


def test_step_matches_matrix_arithmetic():
    sys2 = make_system("integrator(2)", ts=0.25, noise=0.0)
    rng = SeededRng(0)
    np.testing.assert_array_equal(step(sys2, [1.0, 1.0], [0.0], rng), [1.25, 1.0])


def test_step_nonholonomic_straight_line():
    nh = make_system("nonholonomic", ts=0.1, noise=0.0)
    rng = SeededRng(0)
    y = step(nh, [0.0, 0.0, 0.0], [1.0, 0.0], rng)
    np.testing.assert_allclose(y, [0.1, 0.0, 0.0], atol=1e-10)


def test_step_rejects_nonfinite():
    sys2 = make_system("integrator(2)")
    rng = SeededRng(0)
    with pytest.raises(ValueError):
        step(sys2, [np.nan, 0.0], [0.0], rng)
    with pytest.raises(ValueError):
        step(sys2, [0.0, 0.0], [np.inf], rng)


def test_rk4_fourth_order_on_circular_arc():
    # constant turn rate: exact solution is a circular arc, so successive
    # substep halvings should shrink the change by ~2^4
    nh = make_system("nonholonomic")
    x = np.array([0.0, 0.0, 0.0])
    u = np.array([1.0, 2.0])
    r4 = integrate_zoh(nh.vector_field, x, u, 1.0, substeps=4)
    r8 = integrate_zoh(nh.vector_field, x, u, 1.0, substeps=8)
    r16 = integrate_zoh(nh.vector_field, x, u, 1.0, substeps=16)
    d1 = np.linalg.norm(r4 - r8)
    d2 = np.linalg.norm(r8 - r16)
    assert d1 >= 6.0 * d2


def test_rk4_matches_exact_arc():
    nh = make_system("nonholonomic")
    v, w, T = 1.0, 2.0, 1.0
    exact = np.array([np.sin(w * T) / w * v, (1 - np.cos(w * T)) / w * v, w * T])
    got = integrate_zoh(nh.vector_field, np.zeros(3), np.array([v, w]), T, substeps=16)
    np.testing.assert_allclose(got, exact, atol=1e-6)


def test_simulate_shapes():
    sys2 = make_system("integrator(2)")
    traj = simulate(sys2, [0.0, 0.0], lambda t, x: np.zeros(1), 1, SeededRng(0))
    assert traj.states.shape == (2, 2)
    assert traj.actions.shape == (1, 1)


def test_simulate_zero_noise_equilibrium():
    sys2 = make_system("integrator(2)", noise=0.0)
    traj = simulate(sys2, [0.0, 0.0], lambda t, x: np.zeros(1), 5, SeededRng(0))
    np.testing.assert_array_equal(traj.states, np.zeros((6, 2)))


def test_simulate_deterministic_given_seed():
    sys2 = make_system("integrator(2)")
    policy = lambda t, x: np.array([0.1])
    a = simulate(sys2, [0.1, 0.2], policy, 10, SeededRng(42))
    b = simulate(sys2, [0.1, 0.2], policy, 10, SeededRng(42))
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.actions, b.actions)


def test_simulate_rejects_zero_horizon():
    sys2 = make_system("integrator(2)")
    with pytest.raises(ValueError):
        simulate(sys2, [0.0, 0.0], lambda t, x: np.zeros(1), 0, SeededRng(0))


def test_noise_spec_psd_fallback_on_singular_cov():
    spec = NoiseSpec(np.zeros((2, 2)))
    rng = SeededRng(0)
    np.testing.assert_array_equal(spec.draw(3, rng), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        NoiseSpec(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_trajectory_shape_validation():
    with pytest.raises(ValueError):
        Trajectory(states=np.zeros((3, 2)), actions=np.zeros((3, 1)))


def test_tora_default_policy_saturates():
    assert tora_default_policy(0, np.array([0, 0, 9.0, 9.0]))[0] == -1.0
    assert tora_default_policy(0, np.array([0, 0, -9.0, -9.0]))[0] == 1.0


def test_tora_field_shape():
    tora = make_system("tora", noise=0.0)
    y = step(tora, [0.6, -0.6, -0.3, 0.5], [0.0], SeededRng(0))
    assert y.shape == (4,) and np.isfinite(y).all()

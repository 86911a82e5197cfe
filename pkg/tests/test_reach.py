import numpy as np
import pytest

from kernelctrl.embedding import TransitionSample, fit
from kernelctrl.kernels import ABEL, GAUSSIAN, KernelSpec, gram
from kernelctrl.reach import (
    FHT,
    THT,
    Tube,
    classify,
    constant_tube,
    fit_sr,
    fit_support,
    greedy_policy,
    indicator,
    indicator_values,
    predict_safety,
)
from kernelctrl.sampling import Box, SeededRng, draw_transitions, grid_actions
from kernelctrl.systems import make_system


def test_indicator_closed_box():
    box = Box([-1.0, -1.0], [1.0, 1.0])
    assert indicator(box, [0.0, 0.0]) == 1
    assert indicator(box, [1.0, 1.0]) == 1  # boundary counts
    assert indicator(box, [1.0001, 0.0]) == 0
    assert indicator(box, [0.0, -2.0]) == 0


def test_indicator_values_vectorized():
    box = Box([0.0], [1.0])
    np.testing.assert_array_equal(
        indicator_values(box, [[0.5], [1.0], [1.5]]), [1.0, 1.0, 0.0]
    )


def test_tube_validation():
    with pytest.raises(ValueError):
        Tube(sets=())
    with pytest.raises(ValueError):
        Tube(sets=(Box([0.0], [1.0]), Box([0.0, 0.0], [1.0, 1.0])))
    tube = constant_tube(Box([0.0], [1.0]), 3)
    assert len(tube) == 4


@pytest.fixture(scope="module")
def sr_setup():
    rng = SeededRng(3)
    sys2 = make_system("integrator(2)")
    sample = draw_transitions(
        sys2, Box([-1.1, -1.1], [1.1, 1.1]), Box([-1.0], [1.0]), 400, rng
    )
    emb = fit(
        sample,
        KernelSpec(GAUSSIAN, 0.2),
        KernelSpec(GAUSSIAN, 1.0),
        lam=0.1 / 400,
    )
    grid = grid_actions(Box([-1.0], [1.0]), 11)
    return sys2, emb, grid


def test_fit_sr_terminal_table_is_target_indicator(sr_setup):
    _, emb, grid = sr_setup
    N = 4
    safe = constant_tube(Box([-1, -1], [1, 1]), N)
    target = constant_tube(Box([-0.5, -0.5], [0.5, 0.5]), N)
    m = fit_sr(emb, grid, safe, target, N, THT)
    np.testing.assert_array_equal(
        m.value_tables[N], indicator_values(target[N], emb.sample.Y)
    )


def test_fit_sr_tables_within_unit_interval(sr_setup):
    _, emb, grid = sr_setup
    N = 4
    safe = constant_tube(Box([-1, -1], [1, 1]), N)
    target = constant_tube(Box([-0.5, -0.5], [0.5, 0.5]), N)
    for problem in (THT, FHT):
        m = fit_sr(emb, grid, safe, target, N, problem)
        for t in range(N + 1):
            V = m.value_tables[t]
            assert V.min() >= 0.0 and V.max() <= 1.0


def test_fit_sr_fht_absorbing_when_target_equals_safe(sr_setup):
    _, emb, grid = sr_setup
    N = 3
    box = Box([-1, -1], [1, 1])
    m = fit_sr(emb, grid, constant_tube(box, N), constant_tube(box, N), N, FHT)
    ind = indicator_values(box, emb.sample.Y)
    for t in range(N + 1):
        np.testing.assert_array_equal(m.value_tables[t], ind)


def test_predict_zero_outside_safe_set(sr_setup):
    _, emb, grid = sr_setup
    N = 4
    safe = constant_tube(Box([-1, -1], [1, 1]), N)
    target = constant_tube(Box([-0.5, -0.5], [0.5, 0.5]), N)
    m = fit_sr(emb, grid, safe, target, N, THT)
    probs = predict_safety(m, [[1.5, 0.0], [0.0, -3.0]])
    np.testing.assert_array_equal(probs, [0.0, 0.0])


def test_predict_one_inside_target_for_fht(sr_setup):
    _, emb, grid = sr_setup
    N = 4
    safe = constant_tube(Box([-1, -1], [1, 1]), N)
    target = constant_tube(Box([-0.5, -0.5], [0.5, 0.5]), N)
    m = fit_sr(emb, grid, safe, target, N, FHT)
    probs = predict_safety(m, [[0.0, 0.0], [0.4, -0.4]])
    np.testing.assert_array_equal(probs, [1.0, 1.0])


def test_predict_bounds_and_fht_dominance(sr_setup):
    _, emb, grid = sr_setup
    N = 6
    safe = constant_tube(Box([-1, -1], [1, 1]), N)
    target = constant_tube(Box([-0.5, -0.5], [0.5, 0.5]), N)
    tht = fit_sr(emb, grid, safe, target, N, THT)
    fht = fit_sr(emb, grid, safe, target, N, FHT)
    pts = np.array(
        [[a, b] for a in np.linspace(-1, 1, 9) for b in np.linspace(-1, 1, 9)]
    )
    p_tht = predict_safety(tht, pts)
    p_fht = predict_safety(fht, pts)
    assert p_tht.min() >= 0.0 and p_tht.max() <= 1.0
    assert np.all(p_fht >= p_tht - 1e-9)


def test_monotone_in_target_size(sr_setup):
    _, emb, grid = sr_setup
    N = 4
    safe = constant_tube(Box([-1, -1], [1, 1]), N)
    small = constant_tube(Box([-0.4, -0.4], [0.4, 0.4]), N)
    large = constant_tube(Box([-0.7, -0.7], [0.7, 0.7]), N)
    m_small = fit_sr(emb, grid, safe, small, N, THT)
    m_large = fit_sr(emb, grid, safe, large, N, THT)
    for t in range(N + 1):
        assert np.all(m_large.value_tables[t] >= m_small.value_tables[t] - 1e-9)


def test_fit_sr_requires_long_enough_tubes(sr_setup):
    _, emb, grid = sr_setup
    safe = constant_tube(Box([-1, -1], [1, 1]), 2)
    target = constant_tube(Box([-0.5, -0.5], [0.5, 0.5]), 2)
    with pytest.raises(ValueError):
        fit_sr(emb, grid, safe, target, 5, THT)


def test_greedy_policy_returns_grid_actions(sr_setup):
    _, emb, grid = sr_setup
    N = 4
    safe = constant_tube(Box([-1, -1], [1, 1]), N)
    target = constant_tube(Box([-0.5, -0.5], [0.5, 0.5]), N)
    m = fit_sr(emb, grid, safe, target, N, THT)
    pol = greedy_policy(m)
    u = pol(0, [0.2, 0.1])
    assert any(np.array_equal(u, a) for a in grid.actions)
    batch = pol.batch(0, np.array([[0.2, 0.1], [0.0, 0.0]]))
    np.testing.assert_array_equal(batch[0], u)


# ---------------------------------------------------------------------------
# support classifier


def test_fit_support_single_point_hand_values():
    cls = fit_support(np.array([[0.7]]), sigma=1.0, lam=1.0)
    np.testing.assert_allclose(cls.alpha, [0.5], atol=1e-12)
    score, inside = classify(cls, [0.7])
    assert score == pytest.approx(0.5, abs=1e-12)
    assert cls.tau == pytest.approx(0.5, abs=1e-12)
    assert inside


def test_fit_support_training_points_always_inside():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(40, 3))
    cls = fit_support(pts, sigma=0.5, lam=1.0 / 40)
    assert all(classify(cls, p)[1] for p in pts)


def test_classify_far_point_outside():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(20, 2))
    cls = fit_support(pts, sigma=0.3, lam=1.0 / 20)
    score, inside = classify(cls, [100.0, 100.0])
    assert score < 1e-6 and not inside


def test_support_scores_match_dense_inverse():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(30, 2))
    lam = 0.05
    cls = fit_support(pts, sigma=0.4, lam=lam)
    K = gram(KernelSpec(ABEL, 0.4), pts, pts)
    alpha = np.linalg.inv(K + lam * 30 * np.eye(30)) @ np.ones(30)
    for x in rng.uniform(-1, 1, size=(10, 2)):
        krow = gram(KernelSpec(ABEL, 0.4), pts, x[None])[:, 0]
        assert classify(cls, x)[0] == pytest.approx(krow @ alpha, abs=1e-8)


def test_support_kernel_is_abel():
    cls = fit_support(np.zeros((1, 1)), sigma=0.2, lam=1.0)
    assert cls.kernel.family == ABEL


def test_support_rejects_bad_lambda():
    with pytest.raises(ValueError):
        fit_support(np.zeros((2, 1)), sigma=0.2, lam=0.0)

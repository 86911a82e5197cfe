import numpy as np
import pytest

from kernelctrl.kernels import ABEL, GAUSSIAN, KernelSpec, eval_kernel, gram

EXP_M1 = 0.36787944117144233  # exp(-1)


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("poly", 1.0)
    with pytest.raises(ValueError):
        KernelSpec(GAUSSIAN, 0.0)
    with pytest.raises(ValueError):
        KernelSpec(ABEL, -1.0)


def test_eval_self_similarity_is_one():
    spec = KernelSpec(GAUSSIAN, 1.0)
    assert eval_kernel(spec, [0.3, -0.7], [0.3, -0.7]) == 1.0


def test_eval_gaussian_hand_value():
    spec = KernelSpec(GAUSSIAN, 1.0)
    # squared distance 2, so exp(-2 / 2) = exp(-1)
    assert eval_kernel(spec, [0.0, 0.0], [1.0, 1.0]) == pytest.approx(EXP_M1, abs=1e-12)


def test_eval_abel_hand_value():
    spec = KernelSpec(ABEL, 0.1)
    assert eval_kernel(spec, [0.0], [0.1]) == pytest.approx(EXP_M1, abs=1e-12)


def test_eval_symmetric():
    spec = KernelSpec(ABEL, 0.7)
    x, y = np.array([0.2, -1.0, 3.0]), np.array([1.1, 0.0, -0.5])
    assert eval_kernel(spec, x, y) == eval_kernel(spec, y, x)


def test_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_kernel(KernelSpec(GAUSSIAN, 1.0), [0.0, 1.0], [0.0])


def test_gram_single_point():
    for family in (GAUSSIAN, ABEL):
        G = gram(KernelSpec(family, 0.5), [[1.7]], [[1.7]])
        assert G.shape == (1, 1) and G[0, 0] == 1.0


def test_gram_hand_row():
    G = gram(KernelSpec(GAUSSIAN, 1.0), [[0.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(G, [[1.0, EXP_M1]], atol=1e-12)


def test_gram_errors():
    spec = KernelSpec(GAUSSIAN, 1.0)
    with pytest.raises(ValueError):
        gram(spec, np.empty((0, 2)), [[0.0, 0.0]])
    with pytest.raises(ValueError):
        gram(spec, [[0.0, 0.0]], [[0.0, 0.0, 0.0]])


@pytest.mark.parametrize("family", [GAUSSIAN, ABEL])
def test_gram_symmetry_and_psd(family):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((50, 3))
    G = gram(KernelSpec(family, 1.0), A, A)
    np.testing.assert_array_equal(G, G.T)
    eigs = np.linalg.eigvalsh(G)
    assert eigs.min() >= -1e-10


@pytest.mark.parametrize("family", [GAUSSIAN, ABEL])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_gram_psd_up_to_100_points(family, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-2, 2, size=(100, 4))
    G = gram(KernelSpec(family, 0.5), A, A)
    assert np.linalg.eigvalsh(G).min() >= -1e-8


@pytest.mark.parametrize("family", [GAUSSIAN, ABEL])
def test_gram_entries_bounded(family):
    rng = np.random.default_rng(7)
    A = rng.standard_normal((30, 2))
    B = rng.standard_normal((40, 2))
    G = gram(KernelSpec(family, 0.3), A, B)
    assert np.all(G > 0.0) and np.all(G <= 1.0)


def test_eval_matches_gram_exactly():
    rng = np.random.default_rng(5)
    for family in (GAUSSIAN, ABEL):
        spec = KernelSpec(family, 0.17)
        for _ in range(20):
            x, y = rng.standard_normal(3), rng.standard_normal(3)
            assert eval_kernel(spec, x, y) == gram(spec, x[None], y[None])[0, 0]


def test_gram_blocking_invariance(monkeypatch):
    # Tiny block size must not change results: rows are independent.
    import kernelctrl.kernels as km

    rng = np.random.default_rng(11)
    A = rng.standard_normal((23, 5))
    B = rng.standard_normal((17, 5))
    spec = KernelSpec(GAUSSIAN, 0.9)
    full = gram(spec, A, B)
    monkeypatch.setattr(km, "_BLOCK_DOUBLES", 10)
    blocked = gram(spec, A, B)
    np.testing.assert_array_equal(full, blocked)

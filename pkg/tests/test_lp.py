import itertools

import numpy as np
import pytest

from kernelctrl.lp import FEAS_TOL, SimplexLP, solve_lp


def brute_force_simplex_lp(c, D, tol=1e-9):
    """Enumerate candidate vertices of {Dg<=0, sum g=1, g>=0} and minimize.

    Vertices are basic solutions: pick which constraints are active.  With
    P variables, a vertex activates P-1 constraints beyond the simplex row,
    chosen among {g_j = 0} and rows of D.  Small P only.
    """
    P = len(c)
    rows = [("g", j) for j in range(P)] + [("d", i) for i in range(D.shape[0])]
    best = None
    for active in itertools.combinations(rows, P - 1):
        A = [np.ones(P)]
        b = [1.0]
        for kind, idx in active:
            if kind == "g":
                e = np.zeros(P)
                e[idx] = 1.0
                A.append(e)
            else:
                A.append(D[idx])
            b.append(0.0)
        A = np.array(A)
        if np.linalg.matrix_rank(A) < P:
            continue
        try:
            g = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            continue
        if g.min() < -tol:
            continue
        if D.shape[0] and (D @ g).max() > tol:
            continue
        val = float(c @ g)
        if best is None or val < best:
            best = val
    return best


def test_unconstrained_puts_mass_on_min_cost():
    res = solve_lp(SimplexLP(c=[3.0, 1.0, 2.0], D=np.zeros((0, 3))))
    assert res.feasible
    np.testing.assert_allclose(res.gamma, [0.0, 1.0, 0.0], atol=1e-12)
    assert res.objective == pytest.approx(1.0, abs=1e-12)


def test_tie_resolved_to_lowest_index():
    res = solve_lp(SimplexLP(c=[2.0, 1.0, 1.0], D=np.zeros((0, 3))))
    np.testing.assert_allclose(res.gamma, [0.0, 1.0, 0.0], atol=1e-12)


def test_single_blocking_inequality():
    # minimizing g2 wants all mass on g1, but g1 <= g2 forces a split
    res = solve_lp(SimplexLP(c=[0.0, 1.0], D=[[1.0, -1.0]]))
    assert res.feasible
    np.testing.assert_allclose(res.gamma, [0.5, 0.5], atol=1e-9)
    assert res.objective == pytest.approx(0.5, abs=1e-9)


def test_all_positive_row_is_infeasible():
    res = solve_lp(SimplexLP(c=[5.0, -1.0], D=[[1.0, 1.0]]))
    assert not res.feasible
    assert res.gamma is None


def test_output_feasibility_contract():
    rng = np.random.default_rng(0)
    for _ in range(50):
        P = rng.integers(2, 7)
        p = rng.integers(0, 4)
        c = rng.normal(size=P)
        D = rng.normal(size=(p, P))
        res = solve_lp(SimplexLP(c=c, D=D))
        if not res.feasible:
            continue
        g = res.gamma
        assert abs(g.sum() - 1.0) <= 1e-9
        assert g.min() >= -1e-12
        if p:
            assert (D @ g).max() <= 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    for _ in range(25):
        P = int(rng.integers(1, 7))
        p = int(rng.integers(0, 4))
        c = rng.normal(size=P)
        D = rng.normal(size=(p, P))
        res = solve_lp(SimplexLP(c=c, D=D))
        oracle = brute_force_simplex_lp(c, D)
        if oracle is None:
            # oracle found no feasible vertex; allow boundary-tolerance
            # disagreement only when the solver's point is marginal
            if res.feasible:
                assert (D @ res.gamma).max() >= -1e-7
            continue
        assert res.feasible
        assert res.objective == pytest.approx(oracle, abs=1e-7)


def test_positive_scaling_leaves_gamma_unchanged():
    rng = np.random.default_rng(3)
    for _ in range(20):
        P = int(rng.integers(2, 7))
        c = rng.normal(size=P)
        D = rng.normal(size=(2, P))
        r1 = solve_lp(SimplexLP(c=c, D=D))
        r2 = solve_lp(SimplexLP(c=2.5 * c, D=D))
        assert r1.feasible == r2.feasible
        if r1.feasible:
            np.testing.assert_array_equal(r1.gamma, r2.gamma)


def test_rejects_nonfinite_data():
    with pytest.raises(ValueError):
        SimplexLP(c=[np.nan, 1.0], D=np.zeros((0, 2)))


def test_degenerate_duplicate_rows_terminate():
    # many identical redundant rows: heavy degeneracy, Bland must terminate
    D = np.tile([[1.0, -1.0]], (5, 1))
    res = solve_lp(SimplexLP(c=[0.0, 1.0], D=D))
    assert res.feasible
    np.testing.assert_allclose(res.gamma, [0.5, 0.5], atol=1e-9)

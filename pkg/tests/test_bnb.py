import numpy as np
import pytest

from doptbb.bnb import (VERSIONS, Infeasible, Node, SolverConfig, branch, is_integral,
                        root_incumbent, solve)
from doptbb.detengine import ldet_direct
from doptbb.instance import Instance, generate_random
from doptbb.relaxation import recover_dual, solve_relaxation

from conftest import brute_force, small_instance


def _node(l, u):
    return Node(0.0, 0, np.asarray(l), np.asarray(u))


def test_versions_table():
    assert VERSIONS[1] == (False, False, False, False)
    assert VERSIONS[6] == (True, False, True, False)
    cfg = SolverConfig.from_version(7)
    assert (cfg.vbt, cfg.lsi, cfg.lsc, cfg.hs) == (True, False, True, True)
    assert cfg.integrality_tol == 1e-5 and cfg.gap_tol == 1e-6


def test_is_integral():
    assert is_integral([1.0, 2.000001], 1e-5)
    assert not is_integral([1.0, 2.1], 1e-5)


def test_branch_example():
    lo, hi = branch(_node([0, 0, 0], [3, 3, 3]), [1.0, 2.5, 0.5])
    # ties on fractionality go to the lowest index
    np.testing.assert_array_equal(lo.u, [3, 2, 3])
    np.testing.assert_array_equal(hi.l, [0, 3, 0])


def test_branch_most_fractional():
    lo, hi = branch(_node([0, 0], [3, 3]), [1.1, 1.4])
    np.testing.assert_array_equal(lo.u, [3, 1])
    np.testing.assert_array_equal(hi.l, [0, 2])


def test_branch_partitions_integer_points():
    node = _node([0, 0, 0], [2, 2, 2])
    lo, hi = branch(node, [0.3, 1.5, 0.2])
    pts = [np.array(p) for p in np.ndindex(3, 3, 3)]
    for p in pts:
        in_lo = np.all(lo.l <= p) and np.all(p <= lo.u)
        in_hi = np.all(hi.l <= p) and np.all(p <= hi.u)
        assert in_lo != in_hi


def test_branch_integral_point_splits_free_coordinate():
    lo, hi = branch(_node([1, 0], [1, 2]), [1.0, 2.0])
    assert lo.u[1] + 1 == hi.l[1]


@pytest.mark.parametrize("version", sorted(VERSIONS))
@pytest.mark.parametrize("seed", range(8))
def test_exact_on_enumerable(version, seed):
    inst = small_instance(seed)
    best, _, _ = brute_force(inst)
    res = solve(inst, SolverConfig.from_version(version))
    assert res.status == "optimal"
    assert res.best_z == pytest.approx(best, abs=1e-6)
    assert inst.is_feasible(res.best_x)
    assert ldet_direct(inst, res.best_x) == pytest.approx(res.best_z, abs=1e-9)


@pytest.mark.parametrize("version", [1, 6])
def test_exact_without_root_heuristic(version):
    inst = small_instance(3)
    best, _, _ = brute_force(inst)
    res = solve(inst, SolverConfig.from_version(version, root_ls=False))
    assert res.best_z == pytest.approx(best, abs=1e-6)


def test_exact_with_lower_bounds():
    rng = np.random.default_rng(5)
    inst = Instance(A=rng.random((7, 2)), l=[1, 0, 0, 1, 0, 0, 0], u=[2, 2, 1, 2, 2, 1, 2], s=5)
    best, _, _ = brute_force(inst, l=inst.l)
    res = solve(inst, SolverConfig.from_version(6))
    assert res.best_z == pytest.approx(best, abs=1e-6)
    assert np.all(res.best_x >= inst.l) and inst.is_feasible(res.best_x)


def test_single_feasible_point():
    inst = generate_random(10, seed=2)
    tight = Instance(A=inst.A, l=inst.l, u=inst.u, s=int(inst.u.sum()))
    res = solve(tight, SolverConfig(root_ls=False))
    np.testing.assert_array_equal(res.best_x, tight.u)
    assert res.node_count == 1


def test_versions_agree_and_report():
    inst = generate_random(20, seed=3)
    r1 = solve(inst, SolverConfig.from_version(1))
    r6 = solve(inst, SolverConfig.from_version(6))
    assert r6.best_z == pytest.approx(r1.best_z, abs=1e-6)
    assert r1.vbt_effective == 0 and r1.vars_fixed == 0
    assert r1.root_relax_value <= r1.root_ub


def test_incumbent_monotone():
    res = solve(generate_random(20, seed=4), SolverConfig.from_version(1, root_ls=False))
    hist = res.lb_history
    assert hist and all(b > a for a, b in zip(hist, hist[1:]))
    assert hist[-1] == res.best_z


def test_limits():
    inst = generate_random(40, seed=0)
    res = solve(inst, SolverConfig.from_version(1, node_limit=3))
    assert res.status == "node_limit" and res.node_count == 3
    res = solve(inst, SolverConfig.from_version(1, time_limit=0.0))
    assert res.status == "time_limit"
    assert np.isfinite(res.best_z)


def test_threads_same_optimum():
    inst = generate_random(20, seed=5)
    r1 = solve(inst, SolverConfig.from_version(6))
    r2 = solve(inst, SolverConfig.from_version(6, threads=3))
    assert r2.best_z == pytest.approx(r1.best_z, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_root_incumbent_below_dual_bound(seed):
    inst = small_instance(seed)
    x, z = root_incumbent(inst)
    dual = recover_dual(inst, solve_relaxation(inst).xC)
    assert inst.is_feasible(x)
    assert z <= dual.zeta_hat + 1e-12


def test_no_incumbent_raises():
    # valid instances always admit a nonsingular design, so the error only
    # surfaces when the search stops before finding one
    inst = generate_random(20, seed=1)
    with pytest.raises(Infeasible):
        solve(inst, SolverConfig(root_ls=False, node_limit=0))

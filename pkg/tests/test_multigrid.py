import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from nlmg.assembly import Nonlinearity, assemble_linearized_term, assemble_mass, assemble_stiffness
from nlmg.exceptions import NoConvergence, NonSPDError
from nlmg.mesh import build_hierarchy
from nlmg.multigrid import mg_tolerance, setup_mg, solve, vcycle


@pytest.fixture(scope="module")
def hier2d():
    return build_hierarchy("square01", 0.5, 7)


@pytest.fixture(scope="module")
def hier1d():
    return build_hierarchy("interval01", 0.125, 7)


def a_norm(A, e):
    return np.sqrt(e @ (A @ e))


def contraction(mg, rng, cycles=8):
    """Asymptotic energy-norm contraction of the error over one V-cycle (rhs = 0)."""
    A = mg.A
    e = rng.standard_normal(A.shape[0])
    ratio = 0.0
    for _ in range(cycles):
        e_new = vcycle(mg, np.zeros_like(e), e)
        ratio = a_norm(A, e_new) / a_norm(A, e)
        if a_norm(A, e_new) < 1e-250:
            return 0.0
        e = e_new / a_norm(A, e_new)
    return ratio


def test_galerkin_operators_match_assembly():
    hier = build_hierarchy("square01", 0.25, 3)
    mg = setup_mg(hier, assemble_stiffness(hier[3]), 3)
    for k in range(4):
        Ak = assemble_stiffness(hier[k]).toarray()
        assert np.max(np.abs(mg.matrices[k].toarray() - Ak)) <= 1e-12 * np.max(np.abs(Ak))


def test_stiffness_plus_mass_galerkin():
    hier = build_hierarchy("square01", 0.25, 2)
    # consistent mass on nested P1 spaces is reproduced exactly by P^T M P
    mg = setup_mg(hier, assemble_stiffness(hier[2]), 2, extra_term=assemble_mass(hier[2]))
    re = (assemble_stiffness(hier[0]) + assemble_mass(hier[0])).toarray()
    assert np.max(np.abs(mg.matrices[0].toarray() - re)) <= 1e-12 * np.max(np.abs(re))
    # a variable-coefficient mass term is not: Galerkin differs from re-assembly, but stays SPD
    f = Nonlinearity.potential(v_harmonic=200.0)
    extra = assemble_linearized_term(hier[2], np.zeros(hier[2].n_dofs), f)
    mg = setup_mg(hier, assemble_stiffness(hier[2]), 2, extra_term=extra)
    re = (assemble_stiffness(hier[0]) + assemble_linearized_term(hier[0], np.zeros(hier[0].n_dofs), f)).toarray()
    G = mg.matrices[0].toarray()
    assert np.max(np.abs(G - re)) > 1e-8
    assert np.linalg.eigvalsh(G).min() > 0


def test_single_level_is_direct():
    hier = build_hierarchy("square01", 0.25, 1)
    A = assemble_stiffness(hier[0])
    mg = setup_mg(hier, A, 0)
    b = np.arange(1.0, A.shape[0] + 1)
    x, stats = solve(mg, b, 1e-12)
    assert stats.v_cycles == 1
    assert np.allclose(A @ x, b, rtol=1e-13)


def test_zero_rhs_fixed_point(hier1d):
    mg = setup_mg(hier1d, assemble_stiffness(hier1d[3]), 3)
    n = mg.A.shape[0]
    assert not np.any(vcycle(mg, np.zeros(n), np.zeros(n)))
    x, stats = solve(mg, np.zeros(n), 1e-10)
    assert not np.any(x) and stats.v_cycles == 0


@pytest.mark.parametrize("name", ["hier1d", "hier2d"])
def test_recovers_known_solution(name, request):
    hier = request.getfixturevalue(name)
    A = assemble_stiffness(hier[4])
    mg = setup_mg(hier, A, 4)
    rng = np.random.default_rng(0)
    xs = rng.standard_normal(A.shape[0])
    b = A @ xs
    x, stats = solve(mg, b, 1e-10)
    assert stats.final_relative_residual <= 1e-10
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)
    assert np.linalg.norm(x - xs) / np.linalg.norm(xs) < 1e-6


@pytest.mark.parametrize("name", ["hier1d", "hier2d"])
def test_contraction_level_independent(name, request):
    hier = request.getfixturevalue(name)
    rng = np.random.default_rng(1)
    rhos = [contraction(setup_mg(hier, assemble_stiffness(hier[k]), k), rng) for k in (4, 5, 6)]
    assert max(rhos) <= 0.2, rhos
    assert max(rhos) - min(rhos) < 0.05, rhos


def test_newton_operator_contraction(hier2d):
    rng = np.random.default_rng(2)
    f = Nonlinearity.gpe(50.0, v_harmonic=100.0)
    rhos = []
    for k in (4, 5):
        m = hier2d[k]
        u = m.interpolate(lambda x: 2 * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]))
        mg = setup_mg(hier2d, assemble_stiffness(m), k, extra_term=assemble_linearized_term(m, u, f))
        rhos.append(contraction(mg, rng))
    assert max(rhos) <= 0.2


def test_cycle_is_a_symmetric(hier2d):
    k = 4
    A = assemble_stiffness(hier2d[k])
    mg = setup_mg(hier2d, A, k)
    rng = np.random.default_rng(3)
    n = A.shape[0]
    for _ in range(5):
        e1, e2 = rng.standard_normal(n), rng.standard_normal(n)
        E1 = vcycle(mg, np.zeros(n), e1)
        E2 = vcycle(mg, np.zeros(n), e2)
        lhs, rhs = E1 @ (A @ e2), e1 @ (A @ E2)
        assert abs(lhs - rhs) <= 1e-10 * a_norm(A, e1) * a_norm(A, e2)


def test_energy_error_monotone(hier2d):
    k = 5
    A = assemble_stiffness(hier2d[k])
    mg = setup_mg(hier2d, A, k)
    rng = np.random.default_rng(4)
    b = rng.standard_normal(A.shape[0])
    xs = spsolve(A.tocsc(), b)
    x = np.zeros_like(b)
    errs = [a_norm(A, x - xs)]
    for _ in range(8):
        x = vcycle(mg, b, x)
        errs.append(a_norm(A, x - xs))
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))


@pytest.mark.parametrize("name", ["hier1d", "hier2d"])
def test_cycle_counts_and_linear_work(name, request):
    hier = request.getfixturevalue(name)
    rng = np.random.default_rng(5)
    cycles, work, N = [], [], []
    for k in (4, 5, 6, 7):
        A = assemble_stiffness(hier[k])
        mg = setup_mg(hier, A, k)
        _, stats = solve(mg, rng.standard_normal(A.shape[0]), 1e-10)
        cycles.append(stats.v_cycles)
        work.append(stats.matvec_count)
        N.append(A.shape[0])
    assert max(cycles) - min(cycles) <= 2, cycles
    slope = np.polyfit(np.log(N), np.log(work), 1)[0]
    assert abs(slope - 1.0) <= 0.15, slope


def test_no_convergence_carries_history(hier2d):
    A = assemble_stiffness(hier2d[4])
    mg = setup_mg(hier2d, A, 4)
    with pytest.raises(NoConvergence) as info:
        solve(mg, np.ones(A.shape[0]), 1e-14, max_cycles=2)
    assert len(info.value.history) == 3
    with pytest.raises(ValueError):
        solve(mg, np.ones(A.shape[0]), 0.0)


def test_rejects_non_spd():
    hier = build_hierarchy("interval01", 0.25, 2)
    A = assemble_stiffness(hier[2])
    with pytest.raises(NonSPDError):
        setup_mg(hier, -A, 2)
    with pytest.raises(NonSPDError):
        setup_mg(hier, A, 2, extra_term=-1e4 * sp.identity(A.shape[0]))
    with pytest.raises(ValueError):
        setup_mg(hier, A, 1)


def test_tolerance_rule():
    assert mg_tolerance(0.5) == 1e-10
    assert mg_tolerance(1e-5) == pytest.approx(1e-12)

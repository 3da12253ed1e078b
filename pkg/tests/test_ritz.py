import logging

import numpy as np
import pytest

from floqavg import ToleranceConfig, build_eigenspace, build_extended
from floqavg.core import shift_overlap
from floqavg.ritz import (
    RitzNotConverged, SubspaceBasis, davidson_preconditioner, expand, initial_vector,
    max_subspace_size, project_and_solve, residual, ritz_solve,
)
from floqavg.twolevel import TwoLevelParams, analytic_triplets

from conftest import SQRT2, perturbed


def _matrix(p, xi=1e-2, K=8):
    return build_extended(p.hamiltonian(), ToleranceConfig(xi=xi, fourier_cutoff=K))


def test_full_basis_reproduces_pipeline(v1_params):
    cfg = ToleranceConfig()
    m = _matrix(v1_params)
    out = project_and_solve(m, SubspaceBasis(np.eye(m.size, dtype=complex)), cfg)
    es = build_eigenspace(v1_params.hamiltonian(), cfg)
    assert len(out) == 2
    np.testing.assert_allclose([t.avg_energy for t in out], es.avg_energies, atol=1e-12)
    np.testing.assert_allclose([t.quasi_energy for t in out], es.quasi_energies, atol=1e-12)


def test_single_vector_projection(resonant):
    m = _matrix(resonant)
    basis = SubspaceBasis(initial_vector([0, 1], m)[:, None])
    (cand,) = project_and_solve(m, basis, ToleranceConfig())
    assert cand.quasi_energy == pytest.approx(-0.5)
    assert cand.avg_energy == pytest.approx(-0.5)


def test_initial_guess_residual():
    v = 1e-3
    p = perturbed(v)
    m = _matrix(p)
    x = initial_vector([0, 1], m)
    basis = SubspaceBasis(x[:, None])
    (cand,) = project_and_solve(m, basis, ToleranceConfig())
    r = residual(m, cand, basis)
    assert r.norm == pytest.approx(np.sqrt(v ** 2 + p.v_drive ** 2 / 4), rel=1e-12)
    # e^{-i w t} carries harmonic k = +1 in this package's convention
    assert r.vector[m.index(0, 0)] == pytest.approx(v)
    assert r.vector[m.index(1, 0)] == pytest.approx(p.v_drive / 2)
    assert abs(np.vdot(x, r.vector)) < 1e-10


def test_exact_eigenvector_residual(resonant_es, resonant):
    m = _matrix(resonant)
    assert residual(m, resonant_es[0]).norm < 1e-10


def test_expand_keeps_orthonormality(resonant):
    m = _matrix(resonant)
    rng = np.random.default_rng(1)
    basis = SubspaceBasis(initial_vector([1, 0], m)[:, None])
    pre = davidson_preconditioner(m)
    for _ in range(m.size - 1):
        r = rng.normal(size=m.size) + 1j * rng.normal(size=m.size)
        basis, _ = expand(basis, r, pre, 0.1, rng)
    assert basis.size == m.size
    assert basis.orthonormality_error() < 1e-10


def test_expand_breakdown_flags_random_restart(resonant, caplog):
    m = _matrix(resonant)
    basis = SubspaceBasis(initial_vector([1, 0], m)[:, None])
    with caplog.at_level(logging.WARNING):
        new, flagged = expand(basis, basis.vectors[:, 0], None, 0.0, np.random.default_rng(0))
    assert flagged and new.size == 2
    assert new.orthonormality_error() < 1e-10
    assert "breakdown" in caplog.text


def test_expansion_spans_resonant_pair():
    p = perturbed(1e-3)
    m = _matrix(p)
    basis = SubspaceBasis(initial_vector([0, 1], m)[:, None])
    (cand,) = project_and_solve(m, basis, ToleranceConfig())
    r = residual(m, cand, basis)
    basis, _ = expand(basis, r.vector, davidson_preconditioner(m), r.rayleigh)
    added = basis.vectors[:, 1]
    support = {(k, lvl) for k in range(-8, 9) for lvl in range(2)
               if abs(added[m.index(k, lvl)]) > 1e-12}
    assert support == {(0, 0), (1, 0)}
    out = project_and_solve(m, basis, ToleranceConfig(xi=1e-2))
    plus = analytic_triplets(p.unperturbed())[0]
    assert shift_overlap(out[0].function, plus.function) > 1 - 10 * p.v_static


def test_two_step_convergence():
    res = ritz_solve(perturbed(1e-3).hamiltonian(), ToleranceConfig(xi=1e-2), [0, 1])
    assert res.converged and res.iterations <= 2
    plus = analytic_triplets(TwoLevelParams.first_resonance())[0]
    assert shift_overlap(res.triplet.function, plus.function) >= 1 - 1e-2


def test_exact_guess_converges_immediately(resonant_es, resonant):
    res = ritz_solve(resonant.hamiltonian(), ToleranceConfig(xi=1e-6), resonant_es[0].function)
    assert res.iterations == 0 and res.converged


def test_tight_tolerance_finds_perturbed_ground_state():
    p = perturbed(1e-3)
    res = ritz_solve(p.hamiltonian(), ToleranceConfig(xi=1e-8), [0, 1])
    exact = build_eigenspace(p.hamiltonian(), ToleranceConfig(xi=1e-9)).ground
    assert shift_overlap(res.triplet.function, exact.function) > 1 - 1e-6
    assert res.triplet.avg_energy == pytest.approx(exact.avg_energy, abs=1e-8)


def test_history_records_flip_flop():
    res = ritz_solve(perturbed(1e-3).hamiltonian(), ToleranceConfig(xi=1e-8), [0, 1])
    assert any(it.flip_flop for it in res.history)
    assert all(it.coupling_norm >= 0 for it in res.history)


@pytest.mark.parametrize("V", [0.5, 1.0, SQRT2, 2.0])
@pytest.mark.parametrize("v", [0.0, 1e-5])
def test_ritz_bound(V, v):
    p = TwoLevelParams(1.0, 1.5, V, v)
    cfg = ToleranceConfig(xi=1e-2)
    res = ritz_solve(p.hamiltonian(), cfg)
    full = build_eigenspace(p.hamiltonian(), cfg)
    assert res.triplet.avg_energy >= full.ground.avg_energy - cfg.xi


def test_non_convergence_carries_history(resonant):
    with pytest.raises(RitzNotConverged) as err:
        ritz_solve(perturbed(1e-3).hamiltonian(), ToleranceConfig(xi=1e-12), [1, 1],
                   max_iterations=2)
    assert len(err.value.history) == 3


def test_thick_restart_keeps_orthonormal_basis():
    p = perturbed(1e-5)
    res = ritz_solve(p.hamiltonian(), ToleranceConfig(xi=1e-8), [0, 1], max_basis=6)
    assert any(it.thick_restart for it in res.history)
    assert res.converged


def test_subspace_limit_formula():
    assert max_subspace_size(2, 8) == 33


def test_bad_guess():
    m = _matrix(TwoLevelParams())
    with pytest.raises(ValueError):
        initial_vector([0, 0], m)
    with pytest.raises(ValueError):
        initial_vector([1, 0, 0], m)

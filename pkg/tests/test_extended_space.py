import numpy as np
import pytest

from floqavg import (
    CutoffError, DrivingSpec, FloquetFunction, FourierHamiltonian, RawEigenpair, ToleranceConfig,
    build_extended, deduplicate_harmonics, diagonalize_extended, fold_to_zone,
)
from floqavg.extended_space import mod_zone
from floqavg.twolevel import TwoLevelParams

from conftest import SQRT2


def test_block_layout_two_level_k1(resonant):
    h = resonant.hamiltonian()
    m = build_extended(h, 1)
    assert m.matrix.shape == (6, 6)
    h0 = h.component(0)
    # top-left block carries H^(0) + omega
    np.testing.assert_allclose(m.matrix[:2, :2], h0 + 1.5 * np.eye(2))
    np.testing.assert_allclose(m.block(0, 0), h0)
    np.testing.assert_allclose(m.block(1, 1), h0 - 1.5 * np.eye(2))
    np.testing.assert_allclose(m.block(1, 0), h.component(1))
    np.testing.assert_allclose(m.block(-1, 0), h.component(-1))
    assert np.abs(m.matrix - m.matrix.conj().T).max() < 1e-12


def test_drive_coupling_entry(resonant):
    m = build_extended(resonant.hamiltonian(), 1)
    # level 0 at harmonic +1 couples to level 1 at harmonic 0 through V/2
    assert m.matrix[m.index(1, 0), m.index(0, 1)] == pytest.approx(SQRT2 / 2)
    assert m.matrix[m.index(0, 1), m.index(1, 0)] == pytest.approx(SQRT2 / 2)


def test_static_k0_matrix():
    h = FourierHamiltonian({0: np.diag([0.3, -0.2])}, 1.5)
    np.testing.assert_allclose(build_extended(h, 0).matrix, np.diag([0.3, -0.2]))


def test_cutoff_below_harmonic_names_it():
    h = FourierHamiltonian.from_nonnegative({0: np.eye(2), 2: 0.1 * np.ones((2, 2))}, 1.0)
    with pytest.raises(CutoffError, match="k=2"):
        build_extended(h, ToleranceConfig(fourier_cutoff=1))


def test_resonant_quasi_energies_vanish(resonant):
    cfg = ToleranceConfig(fourier_cutoff=8)
    folded = fold_to_zone(diagonalize_extended(build_extended(resonant.hamiltonian(), cfg)), 1.5)
    survivors = deduplicate_harmonics(folded, cfg, 2)
    assert len(survivors) == 2
    for p in survivors:
        assert abs(p.quasi_energy) < 1e-6


def test_v1_quasi_energy_pair(v1_params):
    cfg = ToleranceConfig()
    pairs = diagonalize_extended(build_extended(v1_params.hamiltonian(), cfg))
    surv = deduplicate_harmonics(fold_to_zone(pairs, 1.5), cfg, 2)
    np.testing.assert_allclose(sorted(p.quasi_energy for p in surv), [-0.1909830, 0.1909830],
                               atol=1e-6)


def test_static_spectrum_k2():
    a, b = 0.3, -0.2
    h = FourierHamiltonian({0: np.diag([a, b])}, 1.5)
    evals = sorted(p.quasi_energy for p in diagonalize_extended(build_extended(h, 2)))
    expect = sorted(x - k * 1.5 for x in (a, b) for k in range(-2, 3))
    np.testing.assert_allclose(evals, expect, atol=1e-14)
    surv = deduplicate_harmonics(fold_to_zone(diagonalize_extended(build_extended(h, 2)), 1.5),
                                 ToleranceConfig(fourier_cutoff=2), 2)
    assert sorted(p.quasi_energy for p in surv) == pytest.approx(sorted([a, b]))


def test_eigenpairs_residual_and_orthonormality(resonant):
    m = build_extended(resonant.hamiltonian(), 8)
    pairs = diagonalize_extended(m)
    assert len(pairs) == m.size
    X = np.column_stack([p.function.to_extended(8) for p in pairs])
    assert np.abs(X.conj().T @ X - np.eye(m.size)).max() < 1e-10
    eps = np.array([p.quasi_energy for p in pairs])
    assert np.all(np.diff(eps) >= 0)
    assert np.linalg.norm(m.matrix @ X - X * eps, axis=0).max() < 1e-8 * np.linalg.norm(m.matrix, 2)


@pytest.mark.parametrize("x,expect", [(0.75, -0.75), (-0.75, -0.75), (0.0, 0.0), (1.6, 0.1)])
def test_mod_zone_half_open(x, expect):
    assert mod_zone(x, 1.5) == pytest.approx(expect)


def test_fold_boundary_convention():
    u = FloquetFunction(np.array([[1.0, 0.0]]), 0, DrivingSpec(1.5))
    (p,) = fold_to_zone([RawEigenpair(0.75, u)], 1.5)
    assert p.quasi_energy == pytest.approx(-0.75) and p.shift == 1
    (q,) = fold_to_zone([RawEigenpair(0.0, u)], 1.5)
    assert q.quasi_energy == 0.0 and q.shift == 0


def test_fold_by_three_keeps_physical_state():
    rng = np.random.default_rng(7)
    c = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    u = FloquetFunction(c / np.linalg.norm(c), -1, DrivingSpec(1.5))
    eps0 = 0.2
    (p,) = fold_to_zone([RawEigenpair(eps0 + 3 * 1.5, u)], 1.5)
    assert p.quasi_energy == pytest.approx(eps0) and p.shift == 3
    for t in np.linspace(0, 7, 10):
        before = np.exp(-1j * (eps0 + 4.5) * t) * u.at(t)
        after = np.exp(-1j * p.quasi_energy * t) * p.function.at(t)
        np.testing.assert_allclose(after, before, atol=1e-12)
    np.testing.assert_allclose(p.raw_function().coefficients, u.coefficients)


def test_explicit_duplicate_removed(resonant):
    cfg = ToleranceConfig()
    m = build_extended(resonant.hamiltonian(), cfg)
    surv = deduplicate_harmonics(fold_to_zone(diagonalize_extended(m), 1.5), cfg, 2)
    p = surv[0]
    copy = RawEigenpair(p.quasi_energy + 1.5, p.function.shift(1))
    again = deduplicate_harmonics(fold_to_zone([p, copy], 1.5), cfg, 2, strict=False)
    assert len(again) == 1


def test_too_small_cutoff_reported():
    # strongly driven two-level system: K=1 cannot hold two clean physical states
    h = TwoLevelParams(1.0, 0.2, 6.0).hamiltonian()
    cfg = ToleranceConfig(fourier_cutoff=1)
    with pytest.raises(CutoffError, match="cutoff too small"):
        deduplicate_harmonics(fold_to_zone(diagonalize_extended(build_extended(h, cfg)), 0.2),
                              cfg, 2)


@pytest.mark.parametrize("V", [0.3, 1.0, SQRT2, 2.0])
def test_cutoff_convergence(V):
    h = TwoLevelParams(1.0, 1.5, V).hamiltonian()
    out = []
    for K in (8, 10):
        cfg = ToleranceConfig(fourier_cutoff=K)
        surv = deduplicate_harmonics(fold_to_zone(diagonalize_extended(build_extended(h, cfg)),
                                                  1.5), cfg, 2)
        out.append(sorted(p.quasi_energy for p in surv))
    np.testing.assert_allclose(out[0], out[1], atol=1e-8)


def test_survivor_shift_consistency(v1_params):
    cfg = ToleranceConfig()
    surv = deduplicate_harmonics(
        fold_to_zone(diagonalize_extended(build_extended(v1_params.hamiltonian(), cfg)), 1.5),
        cfg, 2)
    for p in surv:
        for l in (-1, 1):
            (q,) = fold_to_zone([RawEigenpair(p.quasi_energy + l * 1.5, p.function.shift(l))], 1.5)
            a, b = p.function.initial(), q.function.initial()
            assert abs(np.vdot(a, b)) > 1 - 1e-10

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floqavg import (
    DrivingSpec, FloquetFunction, FourierHamiltonian, HamiltonianError, StateVector,
    ToleranceConfig, hamiltonian_at, validate,
)
from floqavg.core import combine, extended_inner, phase_fixed, shift_overlap
from floqavg.twolevel import TwoLevelParams


def test_driving_period_roundtrip():
    d = DrivingSpec(1.5)
    assert d.period * d.omega == pytest.approx(2 * np.pi, rel=1e-12)
    assert DrivingSpec.from_period(d.period).omega == pytest.approx(1.5, rel=1e-12)


@pytest.mark.parametrize("omega", [0.0, -1.0, np.inf, np.nan])
def test_driving_rejects_bad_omega(omega):
    with pytest.raises(ValueError):
        DrivingSpec(omega)


@pytest.mark.parametrize("kw", [dict(xi=0), dict(fourier_cutoff=0), dict(dedup_overlap=0.5),
                                dict(dedup_overlap=1.1), dict(degeneracy_tol=-1)])
def test_tolerance_invariants(kw):
    with pytest.raises(ValueError):
        ToleranceConfig(**kw)


def test_tolerance_replace():
    cfg = ToleranceConfig().replace(xi=1e-5)
    assert cfg.xi == 1e-5 and cfg.fourier_cutoff == 8


def test_hamiltonian_at_two_level_t0():
    h = TwoLevelParams(1.0, 1.5, 1.0).hamiltonian()
    np.testing.assert_allclose(hamiltonian_at(h, 0.0), [[0.5, 0.5], [0.5, -0.5]], atol=1e-15)


def test_hamiltonian_at_half_period():
    h = TwoLevelParams(1.0, 1.5, 1.0).hamiltonian()
    np.testing.assert_allclose(hamiltonian_at(h, h.period / 2), [[0.5, -0.5], [-0.5, -0.5]],
                               atol=1e-15)


def test_static_hamiltonian_is_constant():
    h0 = np.array([[1.0, 0.2j], [-0.2j, -0.3]])
    h = FourierHamiltonian({0: h0}, 2.0)
    for t in (0.0, 0.7, 123.4):
        np.testing.assert_array_equal(hamiltonian_at(h, t), h0)


def test_hamiltonian_at_vectorized():
    h = TwoLevelParams().hamiltonian()
    ts = np.linspace(0, 3, 7)
    stack = hamiltonian_at(h, ts)
    assert stack.shape == (7, 2, 2)
    np.testing.assert_allclose(stack[3], hamiltonian_at(h, ts[3]))


@given(st.floats(-50, 50), st.integers(0, 1000))
def test_hamiltonian_hermitian_and_periodic(t, n):
    h = TwoLevelParams(1.0, 1.5, 1.3, 0.2).hamiltonian()
    m = hamiltonian_at(h, t)
    assert np.abs(m - m.conj().T).max() < 1e-12
    # phases are evaluated at large arguments, so allow rounding of t + nT
    assert np.abs(hamiltonian_at(h, t + n * h.period) - m).max() < 1e-12 * max(1, abs(t) + n * 5)


def test_validate_valid_two_level():
    assert validate(TwoLevelParams().hamiltonian()) == []


def test_validate_missing_partner():
    probs = validate({0: np.eye(2), 1: np.ones((2, 2))})
    assert [k for k, _ in probs] == [1]
    assert "partner" in probs[0][1]


def test_validate_non_hermitian_static():
    probs = validate({0: [[0, 1], [0, 0]]})
    assert [k for k, _ in probs] == [0]


def test_validate_reports_every_problem():
    probs = validate({0: [[0, 1], [0, 0]], 1: np.eye(3), 2: np.eye(2), -2: 2 * np.eye(2)})
    ks = sorted(k for k, _ in probs)
    assert ks == [0, 1, 2]


def test_constructor_raises_with_problems():
    with pytest.raises(HamiltonianError) as err:
        FourierHamiltonian({0: np.eye(2), 1: np.ones((2, 2))}, 1.0)
    assert err.value.problems[0][0] == 1


def test_add_hamiltonians():
    p = TwoLevelParams(v_static=0.1)
    total = p.unperturbed().hamiltonian() + p.perturbation()
    for k in (-1, 0, 1):
        np.testing.assert_allclose(total.component(k), p.hamiltonian().component(k))


def test_state_vector_normalization():
    with pytest.raises(ValueError):
        StateVector([1.0, 1.0])
    s = StateVector.normalize([3, 4j])
    assert np.linalg.norm(s.amplitudes) == pytest.approx(1)
    assert StateVector([1.0, 1.0], normalized=False).dim == 2


def _func(seed=0, n=5, d=2, k_min=-2):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d))
    return FloquetFunction(c / np.linalg.norm(c), k_min, DrivingSpec(1.5))


def test_function_evaluation_matches_fourier_sum():
    u = _func()
    t = 0.37
    manual = sum(u.coefficient(k) * np.exp(-1j * k * 1.5 * t) for k in u.ks)
    np.testing.assert_allclose(u.at(t), manual)
    np.testing.assert_allclose(u.at(0.0), u.initial())


@given(st.integers(-6, 6), st.floats(-10, 10))
def test_shift_preserves_physical_state(l, t):
    u = _func()
    eps = 0.2
    w = u.shift(l)
    # Psi(t) = e^{-i eps t} u(t) is unchanged when eps -> eps + l*omega
    lhs = np.exp(-1j * eps * t) * u.at(t)
    rhs = np.exp(-1j * (eps + l * 1.5) * t) * w.at(t)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    np.testing.assert_array_equal(w.coefficient(0), u.coefficient(l))


def test_extended_window_roundtrip():
    u = _func(k_min=-2)
    back = FloquetFunction.from_extended(u.to_extended(3), 3, 2, u.driving)
    np.testing.assert_array_equal(back.trimmed().coefficients, u.coefficients)
    assert back.trimmed().k_min == -2


def test_combine_and_inner():
    u, w = _func(1), _func(2, k_min=0)
    c = combine([u, w], [0.5, 2j])
    assert extended_inner(u, c) == pytest.approx(0.5 + 2j * extended_inner(u, w))


def test_shift_overlap_detects_copies():
    u = _func(3)
    assert shift_overlap(u, u.shift(2)) == pytest.approx(1.0)


def test_phase_fixed_largest_coefficient_real_positive():
    u = phase_fixed(_func(4).scaled(np.exp(0.7j)))
    flat = u.coefficients.reshape(-1)
    i = np.argmax(np.abs(flat))
    assert flat[i].imag == pytest.approx(0, abs=1e-15) and flat[i].real > 0

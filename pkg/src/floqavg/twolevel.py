"""Circularly driven two-level system: closed-form Floquet solutions.

    H(t) = [[w0/2,              v + V/2 e^{-i w t}],
            [v + V/2 e^{+i w t}, -w0/2            ]]

With v = 0 the model is exactly solvable for any drive.  With a weak static
coupling v the leading-order solution is only available at the first
resonance, where the Rabi frequency equals the drive frequency.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .average_energy import EigenTriplet, effective_average_energy, spectral_moment
from .core import DrivingSpec, FloquetFunction, FourierHamiltonian, StateVector, combine
from .extended_space import zone_shift

RESONANCE_TOL = 1e-6


@dataclass(frozen=True)
class TwoLevelParams:
    omega0: float = 1.0
    omega: float = 1.5
    v_drive: float = np.sqrt(2.0)
    v_static: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @property
    def delta(self) -> float:
        return self.omega - self.omega0

    @property
    def rabi(self) -> float:
        return float(np.hypot(self.v_drive, self.delta))

    @property
    def driving(self) -> DrivingSpec:
        return DrivingSpec(self.omega)

    @property
    def at_first_resonance(self) -> bool:
        return abs(self.rabi - self.omega) <= RESONANCE_TOL

    @property
    def coupling(self) -> float:
        """Projected static coupling v(2w - w0)/(2w) between the resonant states."""
        return self.v_static * (2 * self.omega - self.omega0) / (2 * self.omega)

    def unperturbed(self) -> "TwoLevelParams":
        return TwoLevelParams(self.omega0, self.omega, self.v_drive, 0.0)

    def hamiltonian(self) -> FourierHamiltonian:
        h0 = [[self.omega0 / 2, self.v_static], [self.v_static, -self.omega0 / 2]]
        h1 = [[0, self.v_drive / 2], [0, 0]]
        return FourierHamiltonian.from_nonnegative({0: h0, 1: h1}, self.omega)

    def perturbation(self) -> FourierHamiltonian:
        return FourierHamiltonian({0: [[0, self.v_static], [self.v_static, 0]]}, self.omega)

    @classmethod
    def first_resonance(cls, omega0=1.0, omega=1.5, v_static=0.0) -> "TwoLevelParams":
        """Drive strength V1 = sqrt(w^2 - delta^2) at which the Rabi frequency equals w."""
        delta = omega - omega0
        return cls(omega0, omega, float(np.sqrt(omega ** 2 - delta ** 2)), v_static)


def _amplitudes(p: TwoLevelParams) -> tuple[float, float]:
    omega_r = p.rabi
    if omega_r == 0:
        raise ValueError("undriven resonant two-level system has no unique Floquet basis")
    return (np.sqrt((omega_r + p.delta) / (2 * omega_r)),
            np.sqrt((omega_r - p.delta) / (2 * omega_r)))


def _unperturbed_functions(p: TwoLevelParams) -> tuple[FloquetFunction, FloquetFunction]:
    a, b = _amplitudes(p)
    plus = FloquetFunction.from_mapping({-1: [0, -b], 0: [a, 0]}, p.driving)
    minus = FloquetFunction.from_mapping({0: [0, a], 1: [b, 0]}, p.driving)
    return plus, minus


def _triplet(u: FloquetFunction, eps: float) -> EigenTriplet:
    l = zone_shift(eps, u.omega)
    u, eps = u.shift(-l), eps - l * u.omega
    return EigenTriplet(eps, effective_average_energy(u, eps), u, None,
                        spectral_moment(u, eps, 2))


def analytic_triplets(p: TwoLevelParams) -> tuple[EigenTriplet, EigenTriplet]:
    """Exact (plus, minus) triplets of the unperturbed model, folded into the zone.

    eps_pm = -/+ (Rabi - w)/2 and avg_pm = -/+ (Rabi - delta*w/Rabi)/2.
    """
    if p.v_static != 0:
        raise ValueError("analytic_triplets requires v_static = 0; use perturbed_triplets")
    plus, minus = _unperturbed_functions(p)
    half = (p.rabi - p.omega) / 2
    return _triplet(plus, -half), _triplet(minus, half)


def analytic_avg_energies(p: TwoLevelParams) -> tuple[float, float]:
    r = p.rabi
    x = 0.5 * (r - p.delta * p.omega / r)
    return -x, x


def perturbed_triplets(p: TwoLevelParams) -> tuple[EigenTriplet, EigenTriplet]:
    """Leading-order (plus, minus) triplets at the first resonance with static coupling v.

    The functions are the symmetric and antisymmetric mixes of the unperturbed
    resonant pair, with quasi-energies +/- v(2w - w0)/(2w).
    """
    if not p.at_first_resonance:
        raise ValueError(
            f"perturbed_triplets needs the first resonance (Rabi={p.rabi!r}, omega={p.omega!r})")
    plus0, minus0 = _unperturbed_functions(p)
    s = p.coupling
    r2 = 1 / np.sqrt(2)
    return (_triplet(combine([plus0, minus0], [r2, r2]), s),
            _triplet(combine([plus0, minus0], [r2, -r2]), -s))


def _frame(p: TwoLevelParams, t) -> np.ndarray:
    """Columns u_+(t), u_-(t) of the unperturbed Floquet functions."""
    plus, minus = _unperturbed_functions(p)
    return np.stack([plus.at(t), minus.at(t)], axis=-1)


def analytic_propagator(p: TwoLevelParams, t: float) -> np.ndarray:
    """U(t, 0) of the model.

    Exact for v = 0.  For v != 0 (first resonance only) the resonant pair
    evolves under the projected coupling s*sigma_x, giving
    U(t) = F(t) exp(-i s t sigma_x) F(0)^dagger.
    """
    f_t, f_0 = _frame(p, t), _frame(p, 0.0)
    if p.v_static == 0:
        half = (p.rabi - p.omega) / 2
        phases = np.exp(-1j * np.array([-half, half]) * t)
        return (f_t * phases) @ f_0.conj().T
    if not p.at_first_resonance:
        raise ValueError("perturbed propagator is only available at the first resonance")
    st = p.coupling * t
    rot = np.array([[np.cos(st), -1j * np.sin(st)], [-1j * np.sin(st), np.cos(st)]])
    return f_t @ rot @ f_0.conj().T


def theta_state(p: TwoLevelParams, theta: float) -> StateVector:
    """cos(theta) Psi_+(0) + sin(theta) Psi_-(0) in the bare basis.

    theta = 0 gives the plus state (a, -b), theta = pi/2 the minus state (b, a).
    """
    a, b = _amplitudes(p)
    c, s = np.cos(theta), np.sin(theta)
    return StateVector(np.array([c * a + s * b, -c * b + s * a], dtype=complex))


def theta_unperturbed_average(p: TwoLevelParams, theta):
    """Infinite-time average energy of the theta state for v = 0.

    At the first resonance this is -(w0/2) cos(2 theta).
    """
    avg_plus, avg_minus = analytic_avg_energies(p)
    return np.cos(theta) ** 2 * avg_plus + np.sin(theta) ** 2 * avg_minus


def theta_quasi_energy(p: TwoLevelParams, theta):
    """Quasi-energy functional of the mixed resonant function, s*sin(2 theta)."""
    return p.coupling * np.sin(2 * np.asarray(theta))


def theta_effective_average(p: TwoLevelParams, theta):
    """Effective average energy of the mixed resonant function at the first resonance."""
    th = np.asarray(theta)
    c, s = np.cos(th), np.sin(th)
    return -p.omega0 / 2 * (c ** 2 - s ** 2) + 2 * p.coupling * c * s

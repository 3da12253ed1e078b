"""Time evolution in the Floquet eigenbasis, energy spectra, and averaging windows.

Evolution uses the exact Floquet states stored on the eigenspace, so it is
exact in time; only the time average of <H(t)> is discretized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .average_energy import EigenTriplet, Eigenspace, require_normalized
from .core import (
    NORM_TOL,
    FloquetError,
    FloquetFunction,
    FourierHamiltonian,
    StateVector,
    hamiltonian_at,
    stack_functions,
)
from .extended_space import mod_zone

STEPS_PER_PERIOD = 64


class IncompleteEigenspaceError(FloquetError, ValueError):
    pass


@dataclass(frozen=True)
class SpectrumLine:
    energy: float
    weight: float


@dataclass(frozen=True)
class SpectrumGrid:
    energies: np.ndarray
    values: np.ndarray
    averaging_time: float

    def peaks(self) -> np.ndarray:
        """Energies of local maxima, highest first."""
        v = self.values
        idx = [i for i in range(1, len(v) - 1) if v[i] >= v[i - 1] and v[i] > v[i + 1]]
        idx.sort(key=lambda i: -v[i])
        return self.energies[idx]


@dataclass(frozen=True)
class DivergenceSeries:
    times: np.ndarray
    deviations: np.ndarray

    @property
    def max(self) -> float:
        return float(self.deviations.max(initial=0.0))


@dataclass(frozen=True)
class Boundary:
    """A boundary time with its unclamped value and the limiting index tuple."""

    value: float
    raw: float
    indices: tuple | None


@dataclass(frozen=True)
class BoundaryReport:
    t_min: float
    t_max: float
    min_indices: tuple | None
    max_pair: tuple | None
    t_min_raw: float

    @property
    def crossed(self) -> bool:
        return self.t_max < self.t_min


def _states(es: Eigenspace) -> tuple[np.ndarray, np.ndarray, int]:
    """(quasi-energies, stacked coefficients (n, n_k, d), k_min) used for evolution."""
    if es.floquet_states:
        eps = np.array([p.quasi_energy for p in es.floquet_states])
        funcs = [p.function for p in es.floquet_states]
    else:
        eps = es.quasi_energies
        funcs = [t.function for t in es.triplets]
    if len(funcs) != es.dim:
        raise IncompleteEigenspaceError(
            f"eigenspace has {len(funcs)} states, need {es.dim} for a propagator")
    arr, lo = stack_functions(funcs)
    return eps, arr, lo


def _columns(eps, arr, lo, omega, t) -> np.ndarray:
    """Psi_n(t) as columns: shape (len(t), d, n)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ks = lo + np.arange(arr.shape[1])
    phase = np.exp(-1j * (np.multiply.outer(t, ks) * omega)[:, None, :]
                   - 1j * np.multiply.outer(t, eps)[:, :, None])
    return np.einsum("tnk,nkd->tdn", phase, arr)


def _as_state(psi0) -> np.ndarray:
    if isinstance(psi0, StateVector):
        amp = psi0.amplitudes
    else:
        amp = np.asarray(psi0, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(amp) - 1) > NORM_TOL:
        raise ValueError(f"initial state must be normalized, norm is {np.linalg.norm(amp)}")
    return amp


def propagator_at(es: Eigenspace, t) -> np.ndarray:
    """U(t, 0) = sum_n exp(-i eps_n t) |u_n(t)><u_n(0)|.

    Scalar ``t`` gives a (d, d) matrix; an array of times gives (len(t), d, d).
    """
    eps, arr, lo = _states(es)
    cols = _columns(eps, arr, lo, es.driving.omega, t)
    init = arr.sum(axis=1)  # (n, d): Psi_n(0)
    U = cols @ init.conj()
    return U[0] if np.ndim(t) == 0 else U


def expansion_coefficients(es: Eigenspace, psi0) -> np.ndarray:
    """C_n = <Psi_n(0)|psi0> over the exact Floquet states."""
    _, arr, _ = _states(es)
    return arr.sum(axis=1).conj() @ _as_state(psi0)


def evolve(es: Eigenspace, psi0, t):
    """Psi(t) = sum_n C_n exp(-i eps_n t) u_n(t).

    Returns a :class:`StateVector` for scalar ``t`` and an array of shape
    (len(t), d) for an array of times.
    """
    eps, arr, lo = _states(es)
    c = arr.sum(axis=1).conj() @ _as_state(psi0)
    psi = _columns(eps, arr, lo, es.driving.omega, t) @ c
    if np.ndim(t) == 0:
        return StateVector(psi[0], normalized=False)
    return psi


def infinite_spectrum(triplet: EigenTriplet | FloquetFunction, quasi_energy: float | None = None,
                      min_weight: float = 0.0) -> list[SpectrumLine]:
    """Delta lines eps + k*omega with weights ||u^(k)||^2, ascending in energy."""
    if isinstance(triplet, EigenTriplet):
        u, eps = triplet.function, triplet.quasi_energy
    else:
        if quasi_energy is None:
            raise ValueError("quasi_energy is required when passing a bare FloquetFunction")
        u, eps = triplet, quasi_energy
    require_normalized(u)
    w = u.weights()
    return [SpectrumLine(float(eps + k * u.omega), float(wk))
            for k, wk in zip(u.ks, w) if wk > min_weight]


def finite_spectrum(es: Eigenspace, psi0, script_t: float, grid,
                    step: float | None = None) -> SpectrumGrid:
    """|(1/2pi) int_{-T}^{T} exp(iEt) Psi(t) dt|^2 on an energy grid (trapezoidal rule)."""
    if not script_t > 0:
        raise ValueError("averaging time must be positive")
    energies = np.asarray(grid, dtype=float).reshape(-1)
    if energies.size == 0:
        raise ValueError("energy grid is empty")
    h_max = step or es.driving.period / STEPS_PER_PERIOD
    n = max(int(np.ceil(2 * script_t / h_max)), 2)
    times = np.linspace(-script_t, script_t, n + 1)
    h = times[1] - times[0]
    wts = np.full(times.size, h)
    wts[[0, -1]] *= 0.5
    psi = evolve(es, psi0, times) * wts[:, None]
    values = np.empty(energies.size)
    chunk = max(1, 2 ** 22 // times.size)
    for s in range(0, energies.size, chunk):
        e = energies[s:s + chunk]
        amp = np.exp(1j * np.multiply.outer(e, times)) @ psi / (2 * np.pi)
        values[s:s + chunk] = np.sum(np.abs(amp) ** 2, axis=1)
    return SpectrumGrid(energies, values, float(script_t))


def _energy_expectation(h: FourierHamiltonian, psi: np.ndarray, times: np.ndarray):
    """<H(t)> and its time derivative <dH/dt> (Ehrenfest) along a trajectory."""
    H = hamiltonian_at(h, times)
    dH = np.zeros_like(H)
    for k, m in h.components.items():
        dH += (-1j * k * h.omega * np.exp(-1j * k * h.omega * times))[:, None, None] * m
    f = np.einsum("td,tde,te->t", psi.conj(), H, psi).real
    df = np.einsum("td,tde,te->t", psi.conj(), dH, psi).real
    return f, df


def observed_average_energy(es: Eigenspace, psi0, script_t: float,
                            step: float | None = None) -> float:
    """(1/T) int_0^T <Psi(t)|H(t)|Psi(t)> dt by the end-corrected trapezoidal rule.

    The step is at most ``step`` (default period/64).  Over full periods the
    integrand is C_m* C_n exp(i(eps_m - eps_n)t) G_mn(t) with G periodic, so
    the trapezoidal sum over all of them is one period of samples times a
    geometric series.  The remaining partial period is summed directly.  Each
    segment gets the Euler-Maclaurin end correction h^2/12 (f'(a) - f'(b)),
    with f' = <dH/dt> evaluated exactly.
    """
    if not script_t > 0:
        raise ValueError("averaging time must be positive")
    amp = _as_state(psi0)
    h = es.hamiltonian
    period = es.driving.period
    n_per = max(int(np.ceil(period / (step or period / STEPS_PER_PERIOD))), 4)
    dt = period / n_per
    n_full = int(np.floor(script_t / period * (1 + 1e-14)))
    eps, arr, lo = _states(es)
    omega = es.driving.omega
    c = arr.sum(axis=1).conj() @ amp

    def ends(a, b):
        f, df = _energy_expectation(h, _columns(eps, arr, lo, omega, [a, b]) @ c,
                                    np.array([a, b]))
        return f, df

    total = 0.0
    if n_full > 0:
        tj = np.arange(n_per) * dt
        cols = _columns(eps, arr, lo, omega, tj) * c  # (t, d, n), C_n folded in
        G = np.einsum("tdm,tde,ten->mn", cols.conj(), hamiltonian_at(h, tj), cols)
        z = np.exp(1j * np.subtract.outer(eps, eps) * period)
        near = np.abs(1 - z) < 1e-13
        geo = np.where(near, n_full, (1 - z ** n_full) / np.where(near, 1, 1 - z))
        f, df = ends(0.0, n_full * period)
        total = dt * float(np.sum(G * geo).real) + 0.5 * dt * (f[1] - f[0])
        total += dt ** 2 / 12 * (df[0] - df[1])
    t0 = n_full * period
    rest = script_t - t0
    if rest > 1e-14 * script_t:
        m = max(int(np.ceil(rest / dt)), 2)
        ts = np.linspace(t0, script_t, m + 1)
        f, df = _energy_expectation(h, _columns(eps, arr, lo, omega, ts) @ c, ts)
        hr = ts[1] - ts[0]
        total += float(np.trapezoid(f, ts)) + hr ** 2 / 12 * (df[0] - df[-1])
    return total / script_t


def _fourier_blocks(h: FourierHamiltonian, arr: np.ndarray) -> dict[int, np.ndarray]:
    """B(p)_mn = sum_{k,k'} u_m^(k)^dagger H^(p+k-k') u_n^(k'), the harmonic-p part of <u_m|H|u_n>."""
    n_k = arr.shape[1]
    out: dict[int, np.ndarray] = {}
    for q, comp in h.components.items():
        hu = np.einsum("ij,nkj->nki", comp, arr)
        for s in range(-(n_k - 1), n_k):
            # pairs with k - k' = s
            a = arr[:, max(s, 0):n_k + min(s, 0)]
            b = hu[:, max(-s, 0):n_k - max(s, 0)]
            term = np.einsum("mkd,nkd->mn", a.conj(), b)
            p = q - s
            out[p] = out.get(p, 0) + term
    return out


def decomposed_average_energy(es: Eigenspace, psi0, script_t: float) -> float:
    """Average energy from the eigenbasis expansion with exact time integrals.

    Each term C_m* C_n B(p)_mn exp(i Omega t), Omega = eps_m - eps_n - p*omega,
    integrates to (exp(i Omega T) - 1)/(i Omega T); diagonal p=0 terms give
    |C_n|^2 times the effective average energy.
    """
    if not script_t > 0:
        raise ValueError("averaging time must be positive")
    eps, arr, _ = _states(es)
    c = arr.sum(axis=1).conj() @ _as_state(psi0)
    omega = es.driving.omega
    weights = np.outer(c.conj(), c)
    total = 0j
    for p, B in _fourier_blocks(es.hamiltonian, arr).items():
        x = (np.subtract.outer(eps, eps) - p * omega) * script_t
        factor = np.exp(0.5j * x) * np.sinc(x / (2 * np.pi))
        total += np.sum(weights * B * factor)
    return float(total.real)


def interaction_divergence(es_model: Eigenspace, es_ref: Eigenspace, t_samples) -> DivergenceSeries:
    """max-abs entry of U_ref(t)^dagger U_model(t) - 1 at each sample time."""
    if es_model.dim != es_ref.dim:
        raise ValueError(f"dimension mismatch: {es_model.dim} vs {es_ref.dim}")
    if not np.isclose(es_model.driving.omega, es_ref.driving.omega, rtol=1e-12):
        raise ValueError("eigenspaces have different driving frequencies")
    t = np.atleast_1d(np.asarray(t_samples, dtype=float))
    U = propagator_at(es_model, t)
    U0 = propagator_at(es_ref, t)
    dev = np.abs(np.conj(np.swapaxes(U0, 1, 2)) @ U - np.eye(es_model.dim)).max(axis=(1, 2))
    return DivergenceSeries(t, dev)


def _xi(es: Eigenspace, xi):
    return es.config.xi if xi is None else float(xi)


def boundary_t_min(es_ref: Eigenspace, xi: float | None = None) -> Boundary:
    """Shortest averaging time after which non-resonant cross terms are below xi.

    max over m != n and shifts l with |omega_mnl| >= xi of
    |2 sum_k k*omega <u_m^(k)|u_n^(k+l)> / (xi * omega_mnl)|,
    omega_mnl = eps_n - eps_m + l*omega; floored at one period.
    """
    xi = _xi(es_ref, xi)
    funcs = [t.function for t in es_ref.triplets]
    eps = es_ref.quasi_energies
    omega = es_ref.driving.omega
    arr, lo = stack_functions(funcs)
    n_k = arr.shape[1]
    kw = (lo + np.arange(n_k)) * omega
    best, arg = 0.0, None
    for l in range(-(n_k - 1), n_k):
        # <u_m^(k)|u_n^(k+l)> weighted by k*omega
        a = arr[:, max(-l, 0):n_k - max(l, 0)] * kw[max(-l, 0):n_k - max(l, 0), None]
        b = arr[:, max(l, 0):n_k + min(l, 0)]
        num = 2 * np.einsum("mkd,nkd->mn", a.conj(), b)
        w = eps[None, :] - eps[:, None] + l * omega
        for m in range(len(eps)):
            for n in range(len(eps)):
                if m == n or abs(w[m, n]) < xi:
                    continue
                val = abs(num[m, n] / (xi * w[m, n]))
                if val > best:
                    best, arg = float(val), (m, n, l)
    return Boundary(max(best, es_ref.driving.period), best, arg)


def static_coupling(u_a: FloquetFunction, u_b: FloquetFunction,
                    perturbation: FourierHamiltonian) -> complex:
    """Extended-space matrix element sum_{k,k'} u_a^(k)^dagger v^(k-k') u_b^(k')."""
    arr, _ = stack_functions([u_a, u_b])
    B = _fourier_blocks(perturbation, arr)
    return complex(B.get(0, np.zeros((2, 2)))[0, 1])


def boundary_t_max(es_ref: Eigenspace, perturbation: FourierHamiltonian,
                   xi: float | None = None) -> Boundary:
    """Longest averaging time before the perturbation resolves a resonant pair.

    min over xi-resonant pairs a != b of |xi / ((avg_a - avg_b) v_ab)|, where
    v_ab is the static extended-space coupling in a common harmonic
    representation.  Infinite without resonant pairs or coupling.
    """
    xi = _xi(es_ref, xi)
    omega = es_ref.driving.omega
    ts = es_ref.triplets
    best, arg = np.inf, None
    for a in range(len(ts)):
        for b in range(a + 1, len(ts)):
            gap = ts[b].quasi_energy - ts[a].quasi_energy
            if abs(mod_zone(gap, omega)) >= xi:
                continue
            l = int(round((gap - mod_zone(gap, omega)) / omega))
            v_ab = static_coupling(ts[a].function, ts[b].function.shift(-l), perturbation)
            denom = abs((ts[a].avg_energy - ts[b].avg_energy) * v_ab)
            if denom == 0:
                continue
            val = xi / denom
            if val < best:
                best, arg = float(val), (a, b)
    return Boundary(best, best, arg)


def boundary_report(es_ref: Eigenspace, perturbation: FourierHamiltonian,
                    xi: float | None = None) -> BoundaryReport:
    lo = boundary_t_min(es_ref, xi)
    hi = boundary_t_max(es_ref, perturbation, xi)
    return BoundaryReport(lo.value, hi.value, lo.indices, hi.indices, lo.raw)

"""Shared domain types: driving, periodic Hamiltonians, tolerances, Floquet functions.

Fourier convention used everywhere in the package::

    H(t) = sum_k H^(k) exp(-i k omega t)
    u(t) = sum_k u^(k) exp(-i k omega t)

with hbar = 1, so energies and angular frequencies share units.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10


class FloquetError(Exception):
    """Base class for errors raised by this package."""


class HamiltonianError(FloquetError, ValueError):
    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        msg = "; ".join(f"k={k}: {why}" for k, why in problems)
        super().__init__(f"invalid Fourier Hamiltonian ({msg})")


class CutoffError(FloquetError, ValueError):
    pass


class SolverError(FloquetError, RuntimeError):
    pass


@dataclass(frozen=True)
class DrivingSpec:
    omega: float

    def __post_init__(self):
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError(f"omega must be positive and finite, got {self.omega}")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @classmethod
    def from_period(cls, period: float) -> "DrivingSpec":
        return cls(2 * np.pi / period)


@dataclass(frozen=True)
class ToleranceConfig:
    """Accuracy knobs for the eigenbasis pipeline.

    ``xi`` is the acceptable energy resolution: quasi-energies closer than
    ``xi`` (modulo omega) are treated as resonant.  ``fourier_cutoff`` K keeps
    harmonics -K..K.
    """

    xi: float = 1e-2
    fourier_cutoff: int = 8
    dedup_overlap: float = 0.9
    degeneracy_tol: float = 1e-9

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if int(self.fourier_cutoff) != self.fourier_cutoff or self.fourier_cutoff < 1:
            raise ValueError("fourier_cutoff must be an integer >= 1")
        if not 0.5 < self.dedup_overlap <= 1:
            raise ValueError("dedup_overlap must lie in (0.5, 1]")
        if self.degeneracy_tol < 0:
            raise ValueError("degeneracy_tol must be nonnegative")

    def replace(self, **changes) -> "ToleranceConfig":
        vals = dict(xi=self.xi, fourier_cutoff=self.fourier_cutoff,
                    dedup_overlap=self.dedup_overlap, degeneracy_tol=self.degeneracy_tol)
        vals.update(changes)
        return ToleranceConfig(**vals)


def _as_matrix(m) -> np.ndarray:
    return np.array(m, dtype=complex, copy=True)


def validate(h, dim: int | None = None) -> list[tuple[int, str]]:
    """Return every violated invariant of a Fourier Hamiltonian as ``(k, reason)``.

    Accepts a :class:`FourierHamiltonian` or a raw ``{k: matrix}`` mapping.
    An empty list means the components are valid.
    """
    comps = h.components if isinstance(h, FourierHamiltonian) else h
    problems: list[tuple[int, str]] = []
    if not comps:
        return [(0, "no components")]
    mats = {int(k): np.asarray(m, dtype=complex) for k, m in comps.items()}
    if dim is None:
        first = next(iter(mats.values()))
        dim = first.shape[0] if first.ndim == 2 else 0
    if dim < 1:
        problems.append((next(iter(mats)), "dimension must be >= 1"))
        return problems
    for k in sorted(mats):
        m = mats[k]
        if m.shape != (dim, dim):
            problems.append((k, f"shape {m.shape} does not match dim {dim}"))
            continue
        if not np.all(np.isfinite(m)):
            problems.append((k, "non-finite entries"))
    bad_shape = {k for k, _ in problems}
    for k in sorted(mats):
        if k in bad_shape:
            continue
        if k == 0:
            if np.max(np.abs(mats[0] - mats[0].conj().T), initial=0.0) > HERMITIAN_TOL:
                problems.append((0, "H^(0) is not Hermitian"))
        elif -k not in mats:
            problems.append((k, f"missing conjugate partner H^({-k})"))
        elif k > 0 and -k not in bad_shape:
            if np.max(np.abs(mats[-k] - mats[k].conj().T), initial=0.0) > HERMITIAN_TOL:
                problems.append((k, f"H^({-k}) is not the conjugate transpose of H^({k})"))
    return problems


class FourierHamiltonian:
    """Time-periodic Hamiltonian stored as its nonzero Fourier components."""

    def __init__(self, components: Mapping[int, object], omega: float | DrivingSpec):
        mats = {int(k): _as_matrix(m) for k, m in components.items()}
        problems = validate(mats)
        if problems:
            raise HamiltonianError(problems)
        for m in mats.values():
            m.setflags(write=False)
        self._components = dict(sorted(mats.items()))
        self.driving = omega if isinstance(omega, DrivingSpec) else DrivingSpec(float(omega))
        self.dim = next(iter(mats.values())).shape[0]

    @classmethod
    def from_nonnegative(cls, components: Mapping[int, object], omega) -> "FourierHamiltonian":
        """Build from k >= 0 components, filling k < 0 by Hermiticity."""
        full = {}
        for k, m in components.items():
            k = int(k)
            if k < 0:
                raise ValueError("from_nonnegative expects only k >= 0")
            full[k] = _as_matrix(m)
            if k > 0:
                full[-k] = full[k].conj().T
        return cls(full, omega)

    @property
    def components(self) -> dict[int, np.ndarray]:
        return dict(self._components)

    @property
    def omega(self) -> float:
        return self.driving.omega

    @property
    def period(self) -> float:
        return self.driving.period

    @property
    def max_harmonic(self) -> int:
        return max(abs(k) for k in self._components)

    def component(self, k: int) -> np.ndarray:
        m = self._components.get(k)
        return np.zeros((self.dim, self.dim), complex) if m is None else m

    def __add__(self, other: "FourierHamiltonian") -> "FourierHamiltonian":
        if other.dim != self.dim or not np.isclose(other.omega, self.omega, rtol=1e-12):
            raise ValueError("can only add Hamiltonians with equal dim and omega")
        comps = {k: m.copy() for k, m in self._components.items()}
        for k, m in other.components.items():
            comps[k] = comps[k] + m if k in comps else m.copy()
        return FourierHamiltonian(comps, self.driving)

    def __repr__(self):
        return (f"FourierHamiltonian(dim={self.dim}, omega={self.omega!r}, "
                f"harmonics={list(self._components)})")


def hamiltonian_at(h: FourierHamiltonian, t) -> np.ndarray:
    """Assemble H(t); a 1-d array of times returns a stack of shape (len(t), d, d)."""
    t_arr = np.asarray(t, dtype=float)
    out = np.zeros(t_arr.shape + (h.dim, h.dim), dtype=complex)
    for k, m in h.components.items():
        phase = np.exp(-1j * k * h.omega * t_arr)
        out += phase[..., None, None] * m
    return out


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amp)
        if self.normalized and abs(np.linalg.norm(amp) - 1) > NORM_TOL:
            raise ValueError(f"state flagged normalized has norm {np.linalg.norm(amp)}")

    @classmethod
    def normalize(cls, amplitudes) -> "StateVector":
        amp = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = np.linalg.norm(amp)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amp / n)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)


@dataclass(frozen=True)
class FloquetFunction:
    """Fourier coefficients u^(k) of a periodic function, k = k_min .. k_min+n-1.

    ``coefficients`` has shape ``(n_harmonics, d)``.  Storing the offset
    ``k_min`` makes harmonic shifts lossless.
    """

    coefficients: np.ndarray
    k_min: int
    driving: DrivingSpec = field(compare=False)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 2:
            raise ValueError("coefficients must have shape (n_harmonics, d)")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "k_min", int(self.k_min))

    @classmethod
    def from_extended(cls, vec, cutoff: int, dim: int, driving: DrivingSpec) -> "FloquetFunction":
        return cls(np.asarray(vec).reshape(2 * cutoff + 1, dim), -cutoff, driving)

    @classmethod
    def from_mapping(cls, coeffs: Mapping[int, Iterable[complex]], driving: DrivingSpec):
        ks = sorted(coeffs)
        first = np.asarray(coeffs[ks[0]], dtype=complex)
        out = np.zeros((ks[-1] - ks[0] + 1, first.size), complex)
        for k in ks:
            out[k - ks[0]] = np.asarray(coeffs[k], dtype=complex)
        return cls(out, ks[0], driving)

    @property
    def dim(self) -> int:
        return self.coefficients.shape[1]

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_min + self.coefficients.shape[0])

    @property
    def k_max(self) -> int:
        return self.k_min + self.coefficients.shape[0] - 1

    @property
    def omega(self) -> float:
        return self.driving.omega

    def coefficient(self, k: int) -> np.ndarray:
        i = k - self.k_min
        if 0 <= i < self.coefficients.shape[0]:
            return self.coefficients[i]
        return np.zeros(self.dim, complex)

    def weights(self) -> np.ndarray:
        """Per-harmonic weights ||u^(k)||^2, aligned with :attr:`ks`."""
        return np.sum(np.abs(self.coefficients) ** 2, axis=1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights())))

    def at(self, t) -> np.ndarray:
        """u(t); vectorized over a 1-d array of times (returns shape (len(t), d))."""
        t_arr = np.asarray(t, dtype=float)
        phases = np.exp(-1j * np.multiply.outer(t_arr, self.ks) * self.omega)
        return phases @ self.coefficients

    def initial(self) -> np.ndarray:
        """Physical state at t=0: sum_k u^(k)."""
        return self.coefficients.sum(axis=0)

    def shift(self, l: int) -> "FloquetFunction":
        """Harmonic shift pairing with quasi-energy eps + l*omega: new u^(k) = old u^(k+l)."""
        return FloquetFunction(self.coefficients, self.k_min - int(l), self.driving)

    def on_window(self, k_lo: int, k_hi: int) -> np.ndarray:
        """Coefficients on k_lo..k_hi, zero padded and truncated outside."""
        out = np.zeros((k_hi - k_lo + 1, self.dim), complex)
        lo, hi = max(k_lo, self.k_min), min(k_hi, self.k_max)
        if lo <= hi:
            out[lo - k_lo:hi - k_lo + 1] = self.coefficients[lo - self.k_min:hi - self.k_min + 1]
        return out

    def to_extended(self, cutoff: int) -> np.ndarray:
        return self.on_window(-cutoff, cutoff).reshape(-1)

    def scaled(self, factor: complex) -> "FloquetFunction":
        return FloquetFunction(self.coefficients * factor, self.k_min, self.driving)

    def trimmed(self, tol: float = 0.0) -> "FloquetFunction":
        """Drop leading/trailing harmonics whose weight is <= tol."""
        w = self.weights()
        keep = np.nonzero(w > tol)[0]
        if keep.size == 0:
            return self
        return FloquetFunction(self.coefficients[keep[0]:keep[-1] + 1],
                               self.k_min + keep[0], self.driving)


def common_window(functions: Iterable[FloquetFunction]) -> tuple[int, int]:
    fs = list(functions)
    return min(f.k_min for f in fs), max(f.k_max for f in fs)


def stack_functions(functions: Iterable[FloquetFunction]) -> tuple[np.ndarray, int]:
    """Stack functions on a common harmonic window -> (array (n, n_k, d), k_min)."""
    fs = list(functions)
    lo, hi = common_window(fs)
    return np.stack([f.on_window(lo, hi) for f in fs]), lo


def combine(functions: list[FloquetFunction], coeffs) -> FloquetFunction:
    """sum_a coeffs[a] * functions[a] on their common window."""
    arr, lo = stack_functions(functions)
    c = np.einsum("a,akd->kd", np.asarray(coeffs, dtype=complex), arr)
    return FloquetFunction(c, lo, functions[0].driving)


def extended_inner(u: FloquetFunction, w: FloquetFunction) -> complex:
    """Extended-space inner product <<u|w>> = sum_k <u^(k)|w^(k)>."""
    lo, hi = max(u.k_min, w.k_min), min(u.k_max, w.k_max)
    if lo > hi:
        return 0j
    a = u.coefficients[lo - u.k_min:hi - u.k_min + 1]
    b = w.coefficients[lo - w.k_min:hi - w.k_min + 1]
    return complex(np.vdot(a, b))


def shift_overlap(u: FloquetFunction, w: FloquetFunction) -> float:
    """Largest |<<u|shift_l w>>| over harmonic shifts l (harmonic-copy detector)."""
    best = 0.0
    for l in range(w.k_min - u.k_max, w.k_max - u.k_min + 1):
        best = max(best, abs(extended_inner(u, w.shift(l))))
    return best


def phase_fixed(u: FloquetFunction) -> FloquetFunction:
    """Rotate the global phase so the largest-magnitude coefficient is real positive."""
    flat = u.coefficients.reshape(-1)
    mags = np.abs(flat)
    # first index within rounding of the max keeps ties deterministic
    i = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
    if mags[i] == 0:
        return u
    return u.scaled(np.conj(flat[i]) / mags[i])

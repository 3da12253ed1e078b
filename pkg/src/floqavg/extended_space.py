"""Truncated extended-space (Sambe) Floquet Hamiltonian and its eigenpairs.

Layout: harmonics k = -K..K occupy consecutive blocks of size d, so block
position j holds u^(j-K).  With H(t) = sum_k H^(k) e^{-ik omega t} the
Floquet equation reads

    sum_k' H^(k-k') u^(k') - k omega u^(k) = eps u^(k),

so the diagonal block of harmonic k is H^(0) - k*omega.  Read with block index
b = -k (the e^{+ib omega t} row) that is H^(0) + b*omega, and the top-left block
is H^(0) + K*omega.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CutoffError,
    DrivingSpec,
    FloquetFunction,
    FourierHamiltonian,
    SolverError,
    ToleranceConfig,
    validate,
    HamiltonianError,
)

EDGE_WEIGHT_LIMIT = 0.2


@dataclass(frozen=True)
class ExtendedMatrix:
    matrix: np.ndarray
    dim: int
    cutoff: int
    driving: DrivingSpec

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def omega(self) -> float:
        return self.driving.omega

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-self.cutoff, self.cutoff + 1)

    def block_slice(self, k: int) -> slice:
        j = k + self.cutoff
        if not 0 <= j <= 2 * self.cutoff:
            raise IndexError(f"harmonic {k} outside cutoff {self.cutoff}")
        return slice(j * self.dim, (j + 1) * self.dim)

    def block(self, k: int, kp: int) -> np.ndarray:
        """Block coupling u^(kp) into the row of harmonic k."""
        return self.matrix[self.block_slice(k), self.block_slice(kp)]

    def index(self, k: int, level: int) -> int:
        return (k + self.cutoff) * self.dim + level

    def function(self, vec) -> FloquetFunction:
        return FloquetFunction.from_extended(vec, self.cutoff, self.dim, self.driving)


@dataclass(frozen=True)
class RawEigenpair:
    """Quasi-energy and Floquet function; ``shift`` records the fold applied.

    The unfolded eigenvector of the extended matrix is ``function.shift(shift)``
    with eigenvalue ``quasi_energy + shift * omega``.
    """

    quasi_energy: float
    function: FloquetFunction
    shift: int = 0

    @property
    def raw_quasi_energy(self) -> float:
        return self.quasi_energy + self.shift * self.function.omega

    def raw_function(self) -> FloquetFunction:
        return self.function.shift(self.shift)


def build_extended(h: FourierHamiltonian, cfg: ToleranceConfig | int) -> ExtendedMatrix:
    cutoff = cfg if isinstance(cfg, int) else cfg.fourier_cutoff
    problems = validate(h)
    if problems:
        raise HamiltonianError(problems)
    if cutoff < 0:
        raise CutoffError("cutoff must be nonnegative")
    if cutoff < h.max_harmonic:
        raise CutoffError(
            f"cutoff K={cutoff} is smaller than stored harmonic k={h.max_harmonic}")
    d, omega = h.dim, h.omega
    n = 2 * cutoff + 1
    mat = np.zeros((n * d, n * d), dtype=complex)
    ks = np.arange(-cutoff, cutoff + 1)
    for k, comp in h.components.items():
        # rows of harmonic kr couple to column harmonic kr - k
        for j, kr in enumerate(ks):
            jc = j - k
            if 0 <= jc < n:
                mat[j * d:(j + 1) * d, jc * d:(jc + 1) * d] += comp
    mat[np.diag_indices_from(mat)] -= np.repeat(ks * omega, d)
    mat.setflags(write=False)
    return ExtendedMatrix(mat, d, cutoff, h.driving)


def diagonalize_extended(m: ExtendedMatrix) -> list[RawEigenpair]:
    mat = m.matrix
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > 1e-12 * max(1.0, np.abs(mat).max()):
        raise SolverError("extended matrix is not Hermitian")
    try:
        evals, evecs = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"extended-space eigensolve failed: {exc}") from exc
    scale = max(np.linalg.norm(mat, 2), 1e-300)
    resid = np.linalg.norm(mat @ evecs - evecs * evals, axis=0)
    if resid.max() > 1e-8 * scale:
        raise SolverError(f"eigenpair residual {resid.max():.3e} exceeds bound")
    return [RawEigenpair(float(e), m.function(evecs[:, i])) for i, e in enumerate(evals)]


def mod_zone(x, omega: float):
    """Map energies into the half-open zone [-omega/2, omega/2)."""
    y = np.asarray(x, dtype=float) - omega * np.floor(np.asarray(x, dtype=float) / omega + 0.5)
    y = np.where(y >= omega / 2, y - omega, y)
    y = np.where(y < -omega / 2, y + omega, y)
    return float(y) if np.ndim(y) == 0 else y


def zone_shift(eps: float, omega: float) -> int:
    """Integer l with eps - l*omega inside the zone."""
    return int(round((eps - mod_zone(eps, omega)) / omega))


def fold_to_zone(pairs: list[RawEigenpair], omega: float) -> list[RawEigenpair]:
    out = []
    for p in pairs:
        l = zone_shift(p.quasi_energy, omega)
        out.append(RawEigenpair(p.quasi_energy - l * omega, p.function.shift(-l), p.shift + l))
    return out


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.argsort(values, kind="stable")
    groups, current = [], [order[0]]
    for i in order[1:]:
        if values[i] - values[current[-1]] <= tol:
            current.append(i)
        else:
            groups.append(np.array(current))
            current = [i]
    groups.append(np.array(current))
    return groups


def deduplicate_harmonics(pairs: list[RawEigenpair], cfg: ToleranceConfig,
                          dim: int | None = None, strict: bool = True) -> list[RawEigenpair]:
    """Keep one folded representative per physical Floquet state.

    Eigenvectors sharing an (unfolded) eigenvalue are handled as a subspace, so
    exactly degenerate states returned in arbitrary mixtures are separated
    cleanly.  Copies are ranked by weight in the central harmonics |k| <= K/2
    (ties: smallest unfolded |eps|) and accepted greedily while their physical
    state at t=0 is not already spanned.  With ``strict=False`` fewer than d
    survivors are returned instead of raising (used on Ritz subspaces).
    """
    if not pairs:
        if not strict:
            return []
        raise CutoffError("no eigenpairs to deduplicate")
    K = cfg.fourier_cutoff
    d = dim if dim is not None else pairs[0].function.dim
    driving = pairs[0].function.driving
    omega = driving.omega
    raw_eps = np.array([p.raw_quasi_energy for p in pairs])
    tol = 1e-10 * max(1.0, np.abs(raw_eps).max())
    ks = np.arange(-K, K + 1)
    outer_rows = np.repeat(np.abs(ks) == K, d)
    central_rows = np.repeat(2 * np.abs(ks) <= K, d)

    candidates = []
    for idx in _clusters(raw_eps, tol):
        U = np.stack([pairs[i].raw_function().to_extended(K) for i in idx], axis=1)
        w_out, rot = np.linalg.eigh(U[outer_rows].conj().T @ U[outer_rows])
        U = U @ rot
        keep = w_out <= EDGE_WEIGHT_LIMIT
        if not keep.any():
            continue
        U = U[:, keep]
        central = np.sum(np.abs(U[central_rows]) ** 2, axis=0)
        eps_raw = float(raw_eps[idx].mean())
        candidates.append((-round(float(central.mean()), 9), abs(eps_raw), eps_raw, U))
    candidates.sort(key=lambda c: (c[0], c[1]))

    accepted_phys = np.zeros((d, 0), complex)
    survivors: list[RawEigenpair] = []
    for _, _, eps_raw, U in candidates:
        if len(survivors) == d:
            break
        phys = U.reshape(2 * K + 1, d, -1).sum(axis=0)
        overlap = accepted_phys.conj().T @ phys
        sig2, Y = np.linalg.eigh(overlap.conj().T @ overlap)
        sig = np.sqrt(np.clip(sig2, 0, None))
        new = np.nonzero(sig < cfg.dedup_overlap)[0][: d - len(survivors)]
        if new.size == 0:
            continue
        l = zone_shift(eps_raw, omega)
        for j in new:
            vec = U @ Y[:, j]
            f = FloquetFunction.from_extended(vec, K, d, driving).shift(-l)
            survivors.append(RawEigenpair(eps_raw - l * omega, f, l))
            p = phys @ Y[:, j]
            p = p - accepted_phys @ (accepted_phys.conj().T @ p)
            accepted_phys = np.column_stack([accepted_phys, p / np.linalg.norm(p)])
    if strict and len(survivors) < d:
        raise CutoffError(
            f"cutoff too small: found {len(survivors)} distinct physical states, need {d}")
    return survivors

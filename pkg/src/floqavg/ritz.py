"""Floquet-Ritz ground-state search on growing extended-space subspaces.

Each iteration projects the truncated Floquet Hamiltonian onto the current
basis, labels the Ritz vectors by average energy (with xi-tolerant resonance
resolution), picks the candidate with the lowest average energy among those
that are already accurate to xi, and expands the basis with the
Davidson-preconditioned residual of that candidate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .average_energy import EigenTriplet, label_pairs
from .core import FloquetFunction, FourierHamiltonian, SolverError, StateVector, ToleranceConfig
from .extended_space import (
    ExtendedMatrix,
    RawEigenpair,
    build_extended,
    deduplicate_harmonics,
    fold_to_zone,
)

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-10
BREAKDOWN_TOL = 1e-10
PRECOND_FLOOR = 1e-8
FLIP_FLOP_OVERLAP = 0.5
# fallback selection: candidates whose residual is within this factor of the best
RESIDUAL_BAND = 10.0


@dataclass(frozen=True)
class SubspaceBasis:
    vectors: np.ndarray  # (D, m), orthonormal columns
    iteration: int = 0

    @property
    def size(self) -> int:
        return self.vectors.shape[1]

    def orthonormality_error(self) -> float:
        V = self.vectors
        return float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max(initial=0.0))

    @classmethod
    def from_vectors(cls, vectors, iteration: int = 0) -> "SubspaceBasis":
        V = np.atleast_2d(np.asarray(vectors, dtype=complex))
        if V.shape[0] < V.shape[1]:
            V = V.T
        q, r = np.linalg.qr(V)
        if np.min(np.abs(np.diag(r)), initial=np.inf) < BREAKDOWN_TOL:
            raise ValueError("basis vectors are linearly dependent")
        return cls(q, iteration)


@dataclass(frozen=True)
class Residual:
    vector: np.ndarray
    norm: float
    rayleigh: float
    shift: int  # harmonic shift aligning the candidate with the basis coordinates


@dataclass(frozen=True)
class RitzCandidate:
    triplet: EigenTriplet
    residual: Residual

    @property
    def avg_energy(self) -> float:
        return self.triplet.avg_energy


@dataclass(frozen=True)
class RitzIterate:
    iteration: int
    candidate: EigenTriplet
    residual_norm: float
    avg_change: float
    converged: bool
    basis_size: int
    coupling_norm: float
    flip_flop: bool = False
    random_restart: bool = False
    thick_restart: bool = False


@dataclass(frozen=True)
class RitzResult:
    triplet: EigenTriplet
    history: tuple[RitzIterate, ...]

    @property
    def iterations(self) -> int:
        return self.history[-1].iteration

    @property
    def converged(self) -> bool:
        return self.history[-1].converged

    @property
    def residual_norm(self) -> float:
        return self.history[-1].residual_norm


class RitzNotConverged(SolverError):
    def __init__(self, msg: str, history: tuple[RitzIterate, ...]):
        super().__init__(msg)
        self.history = history


def max_subspace_size(dim: int, cutoff: int) -> int:
    return math.ceil(4 * dim * math.sqrt(2 * cutoff + 1))


def _aligned_vector(m: ExtendedMatrix, u: FloquetFunction, basis: SubspaceBasis | None):
    """Candidate as a D-vector in the harmonic representation closest to the basis.

    Without a basis the representation centred on the window is used.
    """
    K = m.cutoff
    if basis is None:
        w = u.weights()
        shifts = [int(round(np.dot(u.ks, w) / w.sum()))]
    else:
        shifts = range(u.k_min - K, u.k_max + K + 1)
    best = None
    for l in shifts:
        x = u.shift(l).to_extended(K)
        if basis is None:
            score = np.linalg.norm(x)
        else:
            score = np.linalg.norm(basis.vectors.conj().T @ x)
        if best is None or score > best[0] + 1e-12:
            best = (score, l, x)
    _, l, x = best
    n = np.linalg.norm(x)
    if n == 0:
        raise SolverError("candidate has no weight inside the harmonic window")
    return l, x / n


def residual(m: ExtendedMatrix, candidate: EigenTriplet | FloquetFunction,
             basis: SubspaceBasis | None = None) -> Residual:
    """r = (H^F - eps) u in the truncated space, eps the Rayleigh quotient of u."""
    u = candidate.function if isinstance(candidate, EigenTriplet) else candidate
    l, x = _aligned_vector(m, u, basis)
    hx = m.matrix @ x
    eps = float(np.vdot(x, hx).real)
    r = hx - eps * x
    return Residual(r, float(np.linalg.norm(r)), eps, l)


def project_and_solve(m: ExtendedMatrix, basis: SubspaceBasis,
                      cfg: ToleranceConfig) -> list[EigenTriplet]:
    """Rayleigh-Ritz on the basis, then fold, drop harmonic copies, resolve resonances.

    Returned triplets are ordered by average energy.
    """
    V = basis.vectors
    Hs = V.conj().T @ m.matrix @ V
    theta, Y = np.linalg.eigh(0.5 * (Hs + Hs.conj().T))
    X = V @ Y
    pairs = [RawEigenpair(float(t), m.function(X[:, j])) for j, t in enumerate(theta)]
    folded = fold_to_zone(pairs, m.omega)
    kept = deduplicate_harmonics(folded, cfg, m.dim, strict=False)
    return label_pairs(kept, cfg)


def davidson_preconditioner(m: ExtendedMatrix):
    diag = np.real(np.diag(m.matrix)).copy()

    def apply(r: np.ndarray, eps: float) -> np.ndarray:
        den = diag - eps
        small = np.abs(den) < PRECOND_FLOOR
        den[small] = np.where(den[small] < 0, -PRECOND_FLOOR, PRECOND_FLOOR)
        return r / den

    return apply


def _orthogonalize(V: np.ndarray, t: np.ndarray) -> np.ndarray:
    for _ in range(2):
        for j in range(V.shape[1]):
            t = t - V[:, j] * np.vdot(V[:, j], t)
    return t


def expand(basis: SubspaceBasis, residual_vector: np.ndarray, preconditioner=None,
           shift: float = 0.0, rng: np.random.Generator | None = None):
    """Append the preconditioned residual, orthonormalized by two MGS passes.

    Returns ``(basis, random_restart)``.  If the direction is already spanned
    a seeded random orthogonal vector is appended instead and the flag is set.
    """
    t = np.asarray(residual_vector, dtype=complex)
    if preconditioner is not None:
        t = preconditioner(t, shift)
    V = basis.vectors
    scale = np.linalg.norm(t)
    t = _orthogonalize(V, t)
    random_restart = not scale > 0 or np.linalg.norm(t) < BREAKDOWN_TOL * max(scale, 1.0)
    if random_restart:
        if V.shape[1] >= V.shape[0]:
            raise SolverError("subspace already spans the full extended space")
        rng = rng or np.random.default_rng(0)
        log.warning("expansion breakdown at basis size %d; restarting with a random vector",
                    V.shape[1])
        for _ in range(10):
            t = rng.standard_normal(V.shape[0]) + 1j * rng.standard_normal(V.shape[0])
            t = _orthogonalize(V, t)
            if np.linalg.norm(t) > 1e-3:
                break
    t = t / np.linalg.norm(t)
    return SubspaceBasis(np.column_stack([V, t]), basis.iteration + 1), random_restart


def initial_vector(guess, m: ExtendedMatrix) -> np.ndarray:
    """Extended D-vector from a d-state (placed at k=0), a D-vector or a FloquetFunction."""
    if isinstance(guess, FloquetFunction):
        x = guess.to_extended(m.cutoff)
    else:
        g = np.asarray(guess.amplitudes if isinstance(guess, StateVector) else guess,
                       dtype=complex).reshape(-1)
        if g.size == m.dim:
            x = np.zeros(m.size, complex)
            x[m.block_slice(0)] = g
        elif g.size == m.size:
            x = g.copy()
        else:
            raise ValueError(f"guess has length {g.size}; expected {m.dim} or {m.size}")
    n = np.linalg.norm(x)
    if not n > 0:
        raise ValueError("initial guess must be nonzero")
    return x / n


def _candidates(m, basis, cfg) -> list[RitzCandidate]:
    return [RitzCandidate(t, residual(m, t, basis)) for t in project_and_solve(m, basis, cfg)]


def select_candidate(cands: list[RitzCandidate], xi: float) -> RitzCandidate:
    """Lowest average energy among candidates with residual < xi.

    When none qualifies, the lowest average energy among candidates whose
    residual is within RESIDUAL_BAND of the smallest one.
    """
    if not cands:
        raise SolverError("projected problem produced no candidates")
    ok = [c for c in cands if c.residual.norm < xi]
    if not ok:
        best = min(c.residual.norm for c in cands)
        ok = [c for c in cands if c.residual.norm <= RESIDUAL_BAND * best]
    return min(ok, key=lambda c: c.avg_energy)


def _coupling_norm(m: ExtendedMatrix, V: np.ndarray) -> float:
    HV = m.matrix @ V
    return float(np.linalg.norm(HV - V @ (V.conj().T @ HV)))


def ritz_solve(h: FourierHamiltonian, cfg: ToleranceConfig | None = None, initial_guess=None,
               max_iterations: int = 200, seed: int = 0,
               max_basis: int | None = None) -> RitzResult:
    """Iterate until residual < xi and the average energy moved by < xi.

    The default guess is the lowest eigenvector of H^(0).  Raises
    :class:`RitzNotConverged` (carrying the history) after ``max_iterations``.
    """
    cfg = cfg or ToleranceConfig()
    m = build_extended(h, cfg)
    if initial_guess is None:
        initial_guess = np.linalg.eigh(h.component(0))[1][:, 0]
    basis = SubspaceBasis(initial_vector(initial_guess, m)[:, None])
    precond = davidson_preconditioner(m)
    rng = np.random.default_rng(seed)
    limit = min(max_basis or max_subspace_size(m.dim, m.cutoff), m.size)
    limit = max(limit, 3)

    history: list[RitzIterate] = []
    prev: RitzCandidate | None = None
    random_restart = thick = False
    for it in range(max_iterations + 1):
        cands = _candidates(m, basis, cfg)
        chosen = select_candidate(cands, cfg.xi)
        res = chosen.residual
        change = np.inf if prev is None else abs(chosen.avg_energy - prev.avg_energy)
        converged = res.norm < cfg.xi and (prev is None or change < cfg.xi)
        flip = False
        if prev is not None:
            ov = abs(np.vdot(prev.vector, _aligned_vector(m, chosen.triplet.function,
                                                                     basis)[1]))
            flip = ov < FLIP_FLOP_OVERLAP
            if flip:
                log.info("iteration %d: selected candidate changed (overlap %.3f)", it, ov)
        coupling = _coupling_norm(m, basis.vectors)
        log.debug("iteration %d: basis %d, residual %.3e, avg %.12g, coupling %.3e",
                  it, basis.size, res.norm, chosen.avg_energy, coupling)
        history.append(RitzIterate(it, chosen.triplet, res.norm,
                                   0.0 if prev is None else float(change), converged,
                                   basis.size, coupling, flip, random_restart, thick))
        if converged:
            return RitzResult(chosen.triplet, tuple(history))
        if basis.size >= m.size and res.norm >= cfg.xi:
            break
        prev = _Remembered(chosen, _aligned_vector(m, chosen.triplet.function, basis)[1])

        thick = basis.size >= limit
        if thick:
            keep = [chosen] + [c for c in sorted(cands, key=lambda c: c.residual.norm)
                               if c is not chosen][:1]
            vecs = [_aligned_vector(m, c.triplet.function, basis)[1] for c in keep]
            basis = SubspaceBasis.from_vectors(np.column_stack(vecs), basis.iteration)
        basis, random_restart = expand(basis, res.vector, precond, res.rayleigh, rng)
    raise RitzNotConverged(
        f"Floquet-Ritz did not converge in {len(history) - 1} iterations "
        f"(last residual {history[-1].residual_norm:.3e}, xi {cfg.xi:g})", tuple(history))


@dataclass(frozen=True)
class _Remembered:
    candidate: RitzCandidate
    vector: np.ndarray = field(repr=False)

    @property
    def avg_energy(self) -> float:
        return self.candidate.avg_energy

"""Average-energy labelling of Floquet states.

The pipeline in :func:`build_eigenspace` is: extended matrix -> eigenpairs ->
fold to the zone -> drop harmonic copies -> group xi-resonant states ->
diagonalize the average-energy matrix inside each group -> sort by average
energy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    NORM_TOL,
    DrivingSpec,
    FloquetError,
    FloquetFunction,
    FourierHamiltonian,
    ToleranceConfig,
    combine,
    phase_fixed,
    stack_functions,
)
from .extended_space import (
    RawEigenpair,
    build_extended,
    deduplicate_harmonics,
    diagonalize_extended,
    fold_to_zone,
    mod_zone,
    zone_shift,
)


class NotNormalizedError(FloquetError, ValueError):
    pass


@dataclass(frozen=True)
class EigenTriplet:
    quasi_energy: float
    avg_energy: float
    function: FloquetFunction
    resonance_group: int | None = None
    variance: float = 0.0
    degenerate: bool = False

    @property
    def omega(self) -> float:
        return self.function.omega


@dataclass(frozen=True)
class ResonantGroup:
    members: tuple[int, ...]
    quasi_energy: float
    quasi_energies: np.ndarray
    functions: tuple[FloquetFunction, ...]
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Eigenspace:
    """Well-ordered Floquet eigenbasis.

    ``triplets`` are sorted by average energy; ``floquet_states`` are the exact
    (deduplicated) eigenpairs of the truncated Floquet Hamiltonian and drive
    the time evolution, which stays exact even where ``triplets`` mix
    near-resonant states.
    """

    triplets: tuple[EigenTriplet, ...]
    config: ToleranceConfig
    hamiltonian: FourierHamiltonian
    floquet_states: tuple[RawEigenpair, ...] = field(repr=False, default=())

    @property
    def driving(self) -> DrivingSpec:
        return self.hamiltonian.driving

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def ground(self) -> EigenTriplet:
        return self.triplets[0]

    @property
    def avg_energies(self) -> np.ndarray:
        return np.array([t.avg_energy for t in self.triplets])

    @property
    def quasi_energies(self) -> np.ndarray:
        return np.array([t.quasi_energy for t in self.triplets])

    def __len__(self):
        return len(self.triplets)

    def __getitem__(self, i) -> EigenTriplet:
        return self.triplets[i]

    def initial_states(self) -> np.ndarray:
        """Columns Psi_n(0) = sum_k u_n^(k)."""
        return np.column_stack([t.function.initial() for t in self.triplets])

    def physical_overlaps(self) -> np.ndarray:
        P = self.initial_states()
        return P.conj().T @ P


def require_normalized(u: FloquetFunction):
    n2 = float(np.sum(u.weights()))
    if abs(n2 - 1) > NORM_TOL:
        raise NotNormalizedError(f"Floquet function has extended norm^2 {n2:.12g}, expected 1")


def effective_average_energy(u: FloquetFunction, epsilon: float) -> float:
    """One-period average of <H>: eps + sum_k k*omega*||u^(k)||^2."""
    require_normalized(u)
    return float(epsilon + u.omega * np.dot(u.ks, u.weights()))


def spectral_moment(u: FloquetFunction, epsilon: float, order: int = 1) -> float:
    """First moment (average energy) or variance of the line spectrum eps + k*omega."""
    if order == 1:
        return effective_average_energy(u, epsilon)
    if order != 2:
        raise ValueError(f"unsupported moment order {order}; use 1 or 2")
    require_normalized(u)
    w = u.weights()
    lines = epsilon + u.ks * u.omega
    mean = float(np.dot(lines, w))
    return max(float(np.dot(lines ** 2, w)) - mean ** 2, 0.0)


def resonance_matrix(functions) -> np.ndarray:
    """M_ab = sum_k k*omega <u_a^(k)|u_b^(k)> for functions in a common representation."""
    functions = list(functions)
    arr, k_lo = stack_functions(functions)
    ks = k_lo + np.arange(arr.shape[1])
    omega = functions[0].omega
    M = np.einsum("akd,k,bkd->ab", arr.conj(), ks * omega, arr)
    return 0.5 * (M + M.conj().T)


def resonance_groups(pairs: list[RawEigenpair], cfg: ToleranceConfig):
    """Group states whose quasi-energies agree mod omega within xi (transitive closure).

    Returns ``(groups, singles)`` where ``singles`` lists indices of
    non-resonant states.  Group members are re-expressed by harmonic shifts
    in the representation of the lowest-index member.
    """
    n = len(pairs)
    if n == 0:
        return [], []
    omega = pairs[0].function.omega
    eps = np.array([p.quasi_energy for p in pairs])
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    diff = np.abs(mod_zone(eps[:, None] - eps[None, :], omega))
    for i in range(n):
        for j in range(i + 1, n):
            if diff[i, j] < cfg.xi:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    buckets: dict[int, list[int]] = {}
    for i in range(n):
        buckets.setdefault(find(i), []).append(i)
    groups, singles = [], []
    for members in sorted(buckets.values(), key=lambda m: m[0]):
        if len(members) == 1:
            singles.append(members[0])
            continue
        ref = eps[members[0]]
        funcs, qe = [], []
        for i in members:
            l = int(round((eps[i] - ref) / omega))
            funcs.append(pairs[i].function.shift(-l))
            qe.append(eps[i] - l * omega)
        qe = np.array(qe)
        groups.append(ResonantGroup(tuple(members), float(qe.mean()), qe,
                                    tuple(funcs), resonance_matrix(funcs)))
    return groups, singles


def _degenerate_runs(values, tol):
    runs, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            runs.append(list(range(start, i)))
            start = i
    return runs


def resolve_resonance(group: ResonantGroup, cfg: ToleranceConfig | None = None,
                      group_id: int | None = None) -> list[EigenTriplet]:
    """Diagonalize eps + M inside a resonant group.

    Eigenvalues are the average energies; eigenvectors give the resolved
    functions.  Average-energy-degenerate eigenvectors are rotated to
    diagonalize the second spectral moment and ordered by variance.
    """
    cfg = cfg or ToleranceConfig()
    funcs = list(group.functions)
    omega = funcs[0].omega
    A = np.diag(group.quasi_energies).astype(complex) + group.matrix
    vals, vecs = np.linalg.eigh(0.5 * (A + A.conj().T))
    runs = _degenerate_runs(vals, cfg.degeneracy_tol)
    arr, k_lo = stack_functions(funcs)
    lines = group.quasi_energy + (k_lo + np.arange(arr.shape[1])) * omega
    S = np.einsum("akd,k,bkd->ab", arr.conj(), lines ** 2, arr)
    for run in runs:
        if len(run) > 1:
            X = vecs[:, run]
            _, R = np.linalg.eigh(X.conj().T @ S @ X)
            vecs[:, run] = X @ R
    out = []
    for run in runs:
        block = []
        for j in run:
            c = vecs[:, j]
            u = combine(funcs, c)
            u = u.scaled(1 / u.norm())
            eps = float(np.dot(np.abs(c) ** 2, group.quasi_energies))
            l = zone_shift(eps, omega)
            u = phase_fixed(u.shift(-l))
            eps -= l * omega
            block.append(EigenTriplet(eps, effective_average_energy(u, eps), u, group_id,
                                      spectral_moment(u, eps, 2), len(run) > 1))
        block.sort(key=lambda t: t.variance)
        out.extend(block)
    return out


def _tiebreak(t: EigenTriplet):
    psi0 = np.abs(t.function.initial())
    return int(np.argmax(psi0 >= psi0.max() * (1 - 1e-9)))


def order_triplets(triplets, degeneracy_tol: float) -> list[EigenTriplet]:
    """Sort by (average energy, variance) with average energies equal within tol."""
    ts = sorted(triplets, key=lambda t: t.avg_energy)
    out = []
    for run in _degenerate_runs([t.avg_energy for t in ts], degeneracy_tol):
        block = [ts[i] for i in run]
        if len(block) > 1:
            block = [EigenTriplet(t.quasi_energy, t.avg_energy, t.function, t.resonance_group,
                                  t.variance, True) for t in block]
            block.sort(key=lambda t: (t.variance, _tiebreak(t)))
        out.extend(block)
    return out


def label_pairs(pairs: list[RawEigenpair], cfg: ToleranceConfig) -> list[EigenTriplet]:
    """Group, resolve and order folded, deduplicated eigenpairs into triplets."""
    groups, singles = resonance_groups(pairs, cfg)
    triplets = []
    for i in singles:
        u = phase_fixed(pairs[i].function)
        eps = pairs[i].quasi_energy
        triplets.append(EigenTriplet(eps, effective_average_energy(u, eps), u, None,
                                     spectral_moment(u, eps, 2)))
    for gid, g in enumerate(groups):
        triplets.extend(resolve_resonance(g, cfg, gid))
    return order_triplets(triplets, cfg.degeneracy_tol)


def eigenspace_from_pairs(pairs: list[RawEigenpair], h: FourierHamiltonian,
                          cfg: ToleranceConfig) -> Eigenspace:
    return Eigenspace(tuple(label_pairs(pairs, cfg)), cfg, h, tuple(pairs))


def build_eigenspace(h: FourierHamiltonian, cfg: ToleranceConfig | None = None) -> Eigenspace:
    cfg = cfg or ToleranceConfig()
    m = build_extended(h, cfg)
    folded = fold_to_zone(diagonalize_extended(m), h.omega)
    survivors = deduplicate_harmonics(folded, cfg, h.dim)
    return eigenspace_from_pairs(survivors, h, cfg)

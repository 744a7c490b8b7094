"""Exact reference solvers for the LMG model.

Two routes independent of the bootstrap: diagonalizing each (2l+1)-dimensional
block H^(l), and brute-force diagonalization in the 2^L spin basis with
states labelled by their J^2 eigenvalue.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from . import measures
from .bootstrap import cluster_energies
from .su2_rep import admissible_two_l, as_two_l, multiplicity, spin_matrices

ED_CAP = 12


class TooLarge(ValueError):
    """Requested system exceeds the exact-diagonalization cap."""


def sector_hamiltonian(L: int, params, l) -> np.ndarray:
    """H^(l) = -(1/L)[(1+g)/2 Jx^2 + (1-g)/2 Jy^2] + I/4 - hx Jx - hz Jz."""
    gamma, hx, hz = params
    jx, jy, jz = spin_matrices(l)
    H = -((1 + gamma) / 2 * jx @ jx + (1 - gamma) / 2 * jy @ jy) / L
    H = H + 0.25 * np.eye(len(jx)) - hx * jx - hz * jz
    return (H + H.conj().T) / 2


@dataclass
class SectorSpectrum:
    L: int
    two_l: int
    energies: np.ndarray
    eigenvectors: np.ndarray
    multiplicity: int

    @property
    def l(self) -> float:
        return self.two_l / 2

    def clusters(self, rel_tol: float = 1e-8) -> list[list[int]]:
        return cluster_energies(self.energies, rel_tol)

    def state_moments(self, i: int) -> measures.MomentSet:
        ops = spin_matrices(Fraction(self.two_l, 2))
        return measures.moments_from_state(self.eigenvectors[:, i], ops, self.L, self.two_l)

    def moments(self, rel_tol: float = 1e-8) -> list[measures.MomentSet]:
        """Per-state moments; degenerate levels get the eigenspace average,
        which does not depend on the arbitrary eigenvectors."""
        out = []
        for members in self.clusters(rel_tol):
            ms = [self.state_moments(i) for i in members]
            avg = measures.average_moments(ms) if len(ms) > 1 else ms[0]
            out.extend([avg] * len(members))
        return out

    def cluster_sizes(self, rel_tol: float = 1e-8) -> list[int]:
        out = []
        for members in self.clusters(rel_tol):
            out.extend([len(members)] * len(members))
        return out


def angular_momentum_solve(L: int, params, l) -> SectorSpectrum:
    two_l = as_two_l(l)
    H = sector_hamiltonian(L, params, Fraction(two_l, 2))
    w, U = np.linalg.eigh(H)
    return SectorSpectrum(L, two_l, w, U, multiplicity(L, Fraction(two_l, 2)))


def angular_momentum_all(L: int, params) -> dict[int, SectorSpectrum]:
    return {t: angular_momentum_solve(L, params, Fraction(t, 2)) for t in admissible_two_l(L)}


# Brute-force 2^L route ------------------------------------------------------

@lru_cache(maxsize=8)
def collective_operators(L: int) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Sparse J_x, J_y, J_z on L qubits; site 1 is the leftmost tensor factor."""
    ops = []
    for p in measures.PAULI[1:]:
        total = sp.csr_matrix((2**L, 2**L), dtype=complex)
        for j in range(L):
            term = sp.kron(sp.identity(2**j), sp.kron(sp.csr_matrix(p), sp.identity(2 ** (L - j - 1))))
            total = total + term
        ops.append((0.5 * total).tocsr())
    return tuple(ops)


def site_operator(L: int, j: int, p: np.ndarray) -> sp.csr_matrix:
    return sp.kron(sp.identity(2**j), sp.kron(sp.csr_matrix(p), sp.identity(2 ** (L - j - 1)))).tocsr()


def pairwise_hamiltonian(L: int, params) -> sp.csr_matrix:
    """The LMG Hamiltonian written as explicit pair couplings and site fields."""
    gamma, hx, hz = params
    sx = [site_operator(L, j, measures.PAULI[1]) for j in range(L)]
    sy = [site_operator(L, j, measures.PAULI[2]) for j in range(L)]
    sz = [site_operator(L, j, measures.PAULI[3]) for j in range(L)]
    H = sp.csr_matrix((2**L, 2**L), dtype=complex)
    for j1, j2 in combinations(range(L), 2):
        H = H - ((1 + gamma) / 4 * (sx[j1] @ sx[j2]) + (1 - gamma) / 4 * (sy[j1] @ sy[j2])) / L
    for j in range(L):
        H = H - 0.5 * (hx * sx[j] + hz * sz[j])
    return H.tocsr()


@dataclass
class EdState:
    energy: float
    amplitudes: np.ndarray
    two_l: int
    casimir: float
    degenerate: bool = False

    @property
    def casimir_l(self) -> float:
        return self.two_l / 2


def casimir_eigenspaces(L: int) -> dict[int, np.ndarray]:
    """Orthonormal bases of the J^2 eigenspaces, keyed by 2l.

    J^2 commutes with J_z, so it is diagonalized one magnetization block at a
    time.
    """
    jx, jy, jz = collective_operators(L)
    J2 = (jx @ jx + jy @ jy + jz @ jz).real.tocsr()
    up = np.array([bin(s).count("1") for s in range(2**L)])
    cols: dict[int, list[np.ndarray]] = {}
    for k in range(L + 1):
        idx = np.flatnonzero(up == k)
        block = J2[idx][:, idx].toarray()
        w, U = np.linalg.eigh(block)
        # l(l+1) = w  ->  2l = sqrt(4w + 1) - 1
        two_ls = np.rint(np.sqrt(4 * np.clip(w, 0, None) + 1) - 1).astype(int)
        for t in np.unique(two_ls):
            sel = U[:, two_ls == t]
            full = np.zeros((2**L, sel.shape[1]))
            full[idx] = sel
            cols.setdefault(int(t), []).append(full)
    return {t: np.hstack(c) for t, c in sorted(cols.items())}


def dense_ed(L: int, params, cap: int = ED_CAP, rel_tol: float = 1e-8) -> list[EdState]:
    """All 2^L eigenstates, sorted by (l, E), each labelled by its J^2 sector."""
    if L > cap:
        raise TooLarge(f"L={L} exceeds the exact-diagonalization cap {cap}")
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    H = pairwise_hamiltonian(L, params)
    jx, jy, jz = collective_operators(L)
    J2 = jx @ jx + jy @ jy + jz @ jz
    states = []
    for two_l, Q in casimir_eigenspaces(L).items():
        Hl = Q.T @ (H @ Q)
        w, U = np.linalg.eigh((Hl + Hl.conj().T) / 2)
        d = multiplicity(L, Fraction(two_l, 2))
        sizes = {}
        for members in cluster_energies(w, rel_tol):
            for i in members:
                sizes[i] = len(members)
        for i in range(len(w)):
            psi = Q @ U[:, i]
            c = float(np.vdot(psi, J2 @ psi).real)
            states.append(EdState(float(w[i]), psi, two_l, c, degenerate=sizes[i] > d))
    return states


def ed_moments(state: EdState, L: int) -> measures.MomentSet:
    return measures.moments_from_state(state.amplitudes, collective_operators(L), L, state.two_l)


def two_site_rdm(psi: np.ndarray, L: int, j1: int, j2: int) -> np.ndarray:
    """Exact reduced state of sites j1, j2 (0-based) of a pure state."""
    t = psi.reshape((2,) * L)
    rest = [k for k in range(L) if k not in (j1, j2)]
    t = np.transpose(t, [j1, j2] + rest).reshape(4, -1)
    return t @ t.conj().T


def one_site_rdm(psi: np.ndarray, L: int, j: int) -> np.ndarray:
    t = np.moveaxis(psi.reshape((2,) * L), j, 0).reshape(2, -1)
    return t @ t.conj().T


def default_pairs(L: int) -> list[tuple[int, int]]:
    """(1,2), (1, 1+L//4), (1, 1+L//2) in 1-based site labels, deduplicated."""
    out = []
    for p in ((1, 2), (1, 1 + L // 4), (1, 1 + L // 2)):
        if p[0] != p[1] and p[1] <= L and p not in out:
            out.append(p)
    return out


def site_resolved_concurrences(state, pairs=None, L: int | None = None) -> np.ndarray:
    """Concurrence C_{j1 j2} of exact two-site reduced states (1-based pairs)."""
    psi = state.amplitudes if isinstance(state, EdState) else np.asarray(state)
    L = L or int(round(np.log2(psi.size)))
    pairs = default_pairs(L) if pairs is None else pairs
    return np.array([measures.concurrence(two_site_rdm(psi, L, a - 1, b - 1)) for a, b in pairs])


def dicke_state(L: int, m) -> np.ndarray:
    """|L/2, m> as the normalized sum of basis states with L/2 + m up spins.

    Bit value 0 encodes spin up (sigma_z = +1) in the Kronecker ordering.
    """
    n_up = int(Fraction(L, 2) + Fraction(m))
    if not 0 <= n_up <= L:
        raise ValueError(f"m={m} out of range for L={L}")
    up = np.array([L - bin(s).count("1") for s in range(2**L)])
    psi = (up == n_up).astype(complex)
    return psi / np.sqrt(comb(L, n_up))


def toy_exact(L: int) -> list[tuple[int | Fraction, np.ndarray]]:
    """Spectrum of H = J_z: E = m and <J_z^k> = m^k, k = 0..L."""
    ms = [Fraction(L, 2) - k for k in range(L + 1)][::-1]
    return [(m, np.array([float(m) ** k for k in range(L + 1)])) for m in ms]

"""Entanglement measures built from collective first and second moments.

Everything here consumes a :class:`MomentSet`, i.e. <J_i> and <J_i J_j>, and
assumes a permutation-symmetric pure state of L qubits.  For states outside
the l = L/2 sector that symmetry is an assumption and results are flagged.
Entropies use the natural logarithm.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

AXES = "xyz"
FIRST_KEYS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
# <J_i J_j> for i <= j, in operator order i then j
SECOND_KEYS = {
    (0, 0): (2, 0, 0),
    (1, 1): (0, 2, 0),
    (2, 2): (0, 0, 2),
    (0, 1): (1, 1, 0),
    (0, 2): (1, 0, 1),
    (1, 2): (0, 1, 1),
}

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
SIGMA_YY = np.kron(PAULI[2], PAULI[2])


class HermiticityViolated(ValueError):
    """Moments are inconsistent with a Hermitian expectation functional."""


class NonPhysicalDensity(UserWarning):
    """A reconstructed density matrix has a clearly negative eigenvalue."""


class CkwViolated(UserWarning):
    """Residual tangle came out negative."""


@dataclass
class MomentSet:
    first: np.ndarray
    second: np.ndarray
    L: int
    two_l: int | None = None
    hermiticity_residual: float = 0.0

    @property
    def sector_l(self) -> float | None:
        return None if self.two_l is None else self.two_l / 2

    @property
    def covariance(self) -> np.ndarray:
        """Real symmetric matrix Re<J_i J_j> - <J_i><J_j>."""
        G = self.second.real - np.outer(self.first, self.first)
        return (G + G.T) / 2

    @property
    def symmetric_sector(self) -> bool:
        return self.two_l is None or self.two_l == self.L


def moments_from_expectations(values, L: int, two_l: int | None = None, check: float = 1e-4) -> MomentSet:
    """Build a MomentSet from a mapping triple -> expectation value.

    ``values`` may be a BootstrapSolution or any object indexable by triples.
    """
    first_c = np.array([complex(values[t]) for t in FIRST_KEYS])
    second = np.zeros((3, 3), dtype=complex)
    for (i, j), t in SECOND_KEYS.items():
        second[i, j] = values[t]
        if i != j:
            second[j, i] = np.conj(values[t])
    # [J_i, J_j] = i eps_ijk J_k fixes the imaginary parts of the off-diagonal moments
    comm_err = max(
        abs(second[0, 1].imag - first_c[2].real / 2),
        abs(second[1, 2].imag - first_c[0].real / 2),
        abs(second[0, 2].imag + first_c[1].real / 2),
    )
    residual = max(
        float(np.max(np.abs(first_c.imag))),
        float(np.max(np.abs(np.diag(second).imag))),
        float(comm_err),
    )
    if two_l is not None:
        residual = max(residual, abs(np.trace(second).real - two_l * (two_l + 2) / 4))
    if residual > check:
        raise HermiticityViolated(f"moment hermiticity residual {residual:.3e} exceeds {check:g}")
    second[np.diag_indices(3)] = np.diag(second).real
    return MomentSet(first_c.real.copy(), second, L, two_l, float(residual))


def moments_from_solution(s) -> MomentSet:
    return moments_from_expectations(s, s.basis.L, s.two_l)


def moments_from_state(psi: np.ndarray, ops, L: int, two_l: int | None = None) -> MomentSet:
    """Moments of a state vector given collective operators ``ops = (Jx, Jy, Jz)``."""
    J = [op @ psi for op in ops]
    first = np.array([np.vdot(psi, j).real for j in J])
    # <J_i J_j> = <J_i psi | J_j psi> since J_i is Hermitian
    second = np.array([[np.vdot(J[i], J[j]) for j in range(3)] for i in range(3)])
    return MomentSet(first, second, L, two_l)


def average_moments(ms: list[MomentSet]) -> MomentSet:
    m0 = ms[0]
    return MomentSet(
        np.mean([m.first for m in ms], axis=0),
        np.mean([m.second for m in ms], axis=0),
        m0.L,
        m0.two_l,
        max(m.hermiticity_residual for m in ms),
    )


@dataclass
class TwoQubitDensity:
    f: np.ndarray
    rho: np.ndarray
    min_eigenvalue: float
    assumed_symmetric: bool = False

    @property
    def non_physical(self) -> bool:
        return self.min_eigenvalue < -1e-8


def two_qubit_rdm(m: MomentSet) -> TwoQubitDensity:
    """Reduced state of any two qubits in a permutation-symmetric state."""
    L = m.L
    if L < 2:
        raise ValueError("two-qubit reduced state needs L >= 2")
    jx, jy, jz = m.first
    s = m.second
    f = np.zeros((4, 4), dtype=complex)
    f[0, 0] = 0.25
    f[0, 1:] = m.first / (2 * L)
    for i in range(3):
        f[i + 1, i + 1] = (s[i, i].real / L - 0.25) / (L - 1)
    norm = L * (L - 1)
    f[1, 2] = (s[0, 1] - 0.5j * jz) / norm
    f[1, 3] = (s[0, 2] + 0.5j * jy) / norm
    f[2, 3] = (s[1, 2] - 0.5j * jx) / norm
    iu = np.triu_indices(4, 1)
    f[(iu[1], iu[0])] = f[iu]
    rho = np.zeros((4, 4), dtype=complex)
    for a in range(4):
        for b in range(4):
            rho += f[a, b] * np.kron(PAULI[a], PAULI[b])
    rho = (rho + rho.conj().T) / 2
    lam_min = float(np.linalg.eigvalsh(rho)[0])
    return TwoQubitDensity(f, rho, lam_min, assumed_symmetric=not m.symmetric_sector)


def one_qubit_rdm(m: MomentSet) -> np.ndarray:
    f = m.first / m.L
    return 0.5 * PAULI[0] + sum(fi * p for fi, p in zip(f, PAULI[1:]))


def _as_matrix(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, TwoQubitDensity) else np.asarray(rho, dtype=complex)


def concurrence(rho, noise_floor: float = 1e-11) -> float:
    """Wootters concurrence max(l1 - l2 - l3 - l4, 0), l1 the largest.

    The l_i are the square roots of the eigenvalues of rho (sy⊗sy) rho* (sy⊗sy),
    conjugation taken in the sigma_z product basis.  They are obtained as the
    singular values of W^† (sy⊗sy) W^* with rho = W W^†, which avoids the square
    root amplifying roundoff when rho is rank deficient.  Eigenvalues of rho
    below ``noise_floor`` are treated as exact zeros.
    """
    r = _as_matrix(rho)
    w, U = np.linalg.eigh((r + r.conj().T) / 2)
    if w[0] < -1e-6:
        warnings.warn(NonPhysicalDensity(f"density matrix eigenvalue {w[0]:.3e}"), stacklevel=2)
    keep = w > noise_floor
    W = U[:, keep] * np.sqrt(w[keep])
    lam = np.zeros(4)
    lam[: keep.sum()] = np.linalg.svd(W.conj().T @ SIGMA_YY @ W.conj(), compute_uv=False)
    return float(max(lam[0] - lam[1] - lam[2] - lam[3], 0.0))


def spin_flip_eigenvalues(rho) -> np.ndarray:
    """sqrt of the eigenvalues of rho rho~ from the non-Hermitian product, largest first."""
    r = _as_matrix(rho)
    ev = np.linalg.eigvals(r @ SIGMA_YY @ r.conj() @ SIGMA_YY).real
    return np.sort(np.sqrt(np.clip(ev, 0.0, None)))[::-1]


def r_operator_eigenvalues(rho) -> np.ndarray:
    """Eigenvalues of sqrt(sqrt(rho) rho~ sqrt(rho)), largest first."""
    r = _as_matrix(rho)
    w, U = np.linalg.eigh((r + r.conj().T) / 2)
    sq = (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T
    inner = sq @ SIGMA_YY @ r.conj() @ SIGMA_YY @ sq
    R = sla.sqrtm((inner + inner.conj().T) / 2)
    return np.sort(np.linalg.eigvalsh((R + R.conj().T) / 2))[::-1]


def concurrence_r_operator(rho) -> float:
    lam = r_operator_eigenvalues(rho)
    return float(max(lam[0] - lam[1] - lam[2] - lam[3], 0.0))


def tangle(m: MomentSet) -> float:
    """One-qubit versus rest tangle, 1 - 4|<J>|^2 / L^2, clamped to [0, 1]."""
    t = 1.0 - 4.0 / m.L**2 * float(np.dot(m.first, m.first))
    return float(min(max(t, 0.0), 1.0))


def entropy_from_tangle(tau: float) -> float:
    if tau < -1e-9 or tau > 1 + 1e-9:
        raise ValueError(f"tangle must lie in [0, 1], got {tau}")
    tau = min(max(tau, 0.0), 1.0)
    r = np.sqrt(1.0 - tau)
    p = np.array([(1 + r) / 2, (1 - r) / 2])
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)) + 0.0)


def residual_tangle(tau: float, C: float, L: int) -> float:
    """tau - (L-1) C^2, the part of the one-vs-rest tangle not held in pairs."""
    d = tau - (L - 1) * C**2
    if d < -1e-6:
        warnings.warn(CkwViolated(f"residual tangle {d:.3e} < 0"), stacklevel=2)
    return float(d)


def producibility_bounds(L: int, k: int) -> tuple[int, int]:
    """Upper bounds (F_max^k, F_sum^k) on QFI for k-producible states."""
    if not 1 <= k <= L:
        raise ValueError(f"k must lie in [1, {L}], got {k}")
    n = L // k
    r = L - n * k
    fmax = n * k * k + r * r
    if k == 1:
        fsum = 2 * L
    elif r == 1:
        fsum = n * k * (k + 2) + 2
    else:
        fsum = n * k * (k + 2) + r * (r + 2)
    return fmax, fsum


@dataclass
class QfiReport:
    F_x: float
    F_y: float
    F_z: float
    F_sum: float
    F_max: float
    direction: np.ndarray
    depth: int

    @property
    def theta_phi(self) -> tuple[float, float]:
        n = self.direction
        return float(np.arccos(np.clip(n[2], -1, 1))), float(np.arctan2(n[1], n[0]))


def entanglement_depth(F_max: float, F_sum: float, L: int, slack: float = 1e-9) -> int:
    depth = 1
    for k in range(1, L):
        bmax, bsum = producibility_bounds(L, k)
        if F_max > bmax + slack or F_sum > bsum + slack:
            depth = k + 1
    return depth


def qfi(m: MomentSet) -> QfiReport:
    """Pure-state QFI for collective rotations, with the optimal axis."""
    G = m.covariance
    F = 4 * np.diag(G)
    w, U = np.linalg.eigh(G)
    n = U[:, -1]
    n = n if n[np.argmax(np.abs(n))] > 0 else -n
    F_max = float(4 * w[-1])
    F_sum = float(F.sum())
    return QfiReport(*map(float, F), F_sum, F_max, n, entanglement_depth(F_max, F_sum, m.L))


@dataclass
class MeasureReport:
    concurrence: float | None
    tangle: float
    residual_tangle: float
    entropy: float
    qfi: QfiReport
    warnings: list[str] = field(default_factory=list)


def measure_report(m: MomentSet, degenerate: bool = False) -> MeasureReport:
    """All measures for one state, collecting diagnostics instead of raising."""
    notes = []
    if degenerate:
        notes.append("degenerate_cluster")
    tau = tangle(m)
    C = None
    if m.L >= 2:
        rdm = two_qubit_rdm(m)
        if rdm.assumed_symmetric:
            notes.append("assumed_symmetric")
        if rdm.non_physical:
            notes.append("non_physical_rdm")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonPhysicalDensity)
            C = concurrence(rdm)
    dtau = tau - (m.L - 1) * (C or 0.0) ** 2
    if dtau < -1e-6:
        notes.append("ckw_violated")
    return MeasureReport(C, tau, float(dtau), entropy_from_tangle(tau), qfi(m), notes)

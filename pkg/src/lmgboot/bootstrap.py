"""Bootstrap solver for the LMG model.

Eigenstate expectation values ``v_a = <O_a>`` of the monomials O_a are found
from linear consistency conditions alone:

* ``<[H, O_a]> = 0`` and ``<[J^2, O_a]> = 0``,
* ``<J^2 O_a> = l(l+1) <O_a>``,
* ``<H O_a> = E <O_a>``.

The products ``O_b O_a`` are re-expanded in the basis through structure
constants obtained from traces, ``g = C B^{-1}``.  The first two groups of
rows do not depend on E; their common nullspace is computed once per sector
and the eigenvalue condition becomes a small dense eigenproblem on it.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla

from .su2_rep import (
    MonomialBasis,
    Representation,
    Triple,
    as_two_l,
    enumerate_basis,
    format_spin,
    jz_power_basis,
)

log = logging.getLogger(__name__)

IDENTITY: Triple = (0, 0, 0)


class SingularGram(np.linalg.LinAlgError):
    """The trace Gram matrix of the chosen operator set is rank deficient."""


class IdentityComponentVanishes(ArithmeticError):
    """An accepted solution has (numerically) zero identity component."""


class WrongStateCount(UserWarning):
    """A sector produced a number of accepted states different from 2l+1."""

    def __init__(self, two_l: int, found: int, table: list[dict] | None = None):
        self.two_l = two_l
        self.found = found
        self.table = table or []
        super().__init__(
            f"sector l={format_spin(two_l)}: accepted {found} states, expected {two_l + 1}"
        )


@dataclass(frozen=True)
class Tolerances:
    null: float = 1e-9  # relative singular-value cut for the nullspace of K
    residual: float = 1e-7  # max accepted relative residual
    degeneracy: float = 1e-8  # energy clustering, relative to spectral width
    gram_rank: float = 1e-10
    identity: float = 1e-10

    def __post_init__(self):
        for name in ("null", "residual", "degeneracy", "gram_rank", "identity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")


class OperatorExpansion(dict):
    """Coefficients of an operator in the monomial basis, keyed by triple."""

    def indexed(self, basis: MonomialBasis) -> dict[int, complex]:
        out = {}
        for t, c in self.items():
            if c == 0:
                continue
            if t not in basis:
                raise KeyError(f"monomial {t} not in basis")
            out[basis.index[t]] = complex(c)
        return out


def lmg_hamiltonian(L: int, gamma: float, hx: float, hz: float) -> OperatorExpansion:
    """H = -(1/L)[(1+g)/2 Jx^2 + (1-g)/2 Jy^2] + 1/4 - hx Jx - hz Jz."""
    return OperatorExpansion(
        {
            IDENTITY: 0.25,
            (1, 0, 0): -hx,
            (0, 0, 1): -hz,
            (2, 0, 0): -(1 + gamma) / (2 * L),
            (0, 2, 0): -(1 - gamma) / (2 * L),
        }
    )


def casimir() -> OperatorExpansion:
    return OperatorExpansion({(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0})


@dataclass
class GramMatrix:
    matrix: np.ndarray
    factorization: tuple
    condition_estimate: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.factorization, rhs)


@dataclass
class MultiplicationSlice:
    """Row ``a`` holds the expansion of ``O_b O_a`` (left) or ``O_a O_b`` (right)."""

    side: str
    fixed_index: int
    matrix: np.ndarray


@dataclass
class BootstrapSolution:
    energy: float
    two_l: int | None
    expectations: np.ndarray
    basis: MonomialBasis = field(repr=False)
    residual_commutator: float = 0.0
    residual_eigen: float = 0.0
    residual_symmetry: float = 0.0
    cluster: int = 0
    cluster_size: int = 1
    reducer: Callable[[Triple], np.ndarray] | None = field(default=None, repr=False, compare=False)

    @property
    def sector_l(self) -> float | None:
        return None if self.two_l is None else self.two_l / 2

    @property
    def degenerate(self) -> bool:
        return self.cluster_size > 1

    def __getitem__(self, triple) -> complex:
        """<J_x^a J_y^b J_z^c>, also for monomials outside the basis."""
        t = tuple(triple)
        if t in self.basis:
            return self.expectations[self.basis.index[t]]
        if self.reducer is None:
            raise KeyError(t)
        return complex(self.reducer(t) @ self.expectations)


class BootstrapEngine:
    """Trace data and structure-constant slices for one operator basis.

    Everything here depends on the basis only, not on the Hamiltonian, so one
    engine serves any number of parameter points.

    Parameters
    ----------
    basis : MonomialBasis
    rescale : bool
        Work with monomials divided by their Hilbert-Schmidt norm.  Raw high
        powers of J make the Gram matrix numerically singular from L ~ 8 on.
    tol : Tolerances
    """

    def __init__(self, basis: MonomialBasis, rescale: bool = True, tol: Tolerances | None = None):
        self.basis = basis
        self.tol = tol or Tolerances()
        self.rep = Representation(basis.L, max_power=max(basis.max_power, 1))
        n = len(basis)
        self._stacks = {s.two_l: self.rep.stack(basis, s.two_l) for s in self.rep.sectors}
        if rescale:
            norm2 = np.zeros(n)
            for sec in self.rep.sectors:
                S = self._stacks[sec.two_l]
                norm2 += sec.multiplicity * np.einsum("aij,aij->a", S.conj(), S).real
            self.scale = np.sqrt(norm2)
            for k in self._stacks:
                self._stacks[k] = self._stacks[k] / self.scale[:, None, None]
        else:
            self.scale = np.ones(n)
        self._gram: GramMatrix | None = None
        self._slices: dict[tuple[int, str], MultiplicationSlice] = {}

    def _trace_matrix(self, left: list[np.ndarray] | None = None) -> np.ndarray:
        """Entries sum_l d_l tr(P_a O_d) where P_a is O_a or left[two_l][a]."""
        n = len(self.basis)
        out = np.zeros((n, n), dtype=complex)
        for sec in self.rep.sectors:
            S = self._stacks[sec.two_l]
            P = S if left is None else left[sec.two_l]
            d2 = sec.dim * sec.dim
            # tr(P O) = sum_ij P_ij O_ji
            out += sec.multiplicity * (P.reshape(n, d2) @ S.transpose(0, 2, 1).reshape(n, d2).T)
        return out

    @property
    def gram(self) -> GramMatrix:
        if self._gram is None:
            B = self._trace_matrix()
            sv = np.linalg.svd(B, compute_uv=False)
            rank = int(np.sum(sv > self.tol.gram_rank * sv[0]))
            if rank < len(self.basis):
                raise SingularGram(
                    f"Gram matrix has numerical rank {rank} < {len(self.basis)} "
                    f"(sigma_min/sigma_max = {sv[-1] / sv[0]:.2e})"
                )
            self._gram = GramMatrix(B, sla.lu_factor(B), float(sv[0] / sv[-1]))
        return self._gram

    def slice(self, beta: int, side: str) -> MultiplicationSlice:
        """Expansion coefficients of products with the fixed monomial ``beta``.

        Coefficients refer to the working (possibly rescaled) monomials.
        """
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        key = (beta, side)
        if key not in self._slices:
            prods = {}
            for two_l, S in self._stacks.items():
                Ob = S[beta]
                prods[two_l] = Ob @ S if side == "left" else S @ Ob
            c = self._trace_matrix(prods)
            # g B = c and B is symmetric
            g = self.gram.solve(c.T).T
            self._slices[key] = MultiplicationSlice(side, beta, g)
        return self._slices[key]

    def reduce(self, triple: Triple) -> np.ndarray:
        """Coefficients y with O_t = sum_g y_g O_g for any monomial t.

        Exact by trace projection, because the basis spans the algebra.
        """
        t = tuple(triple)
        y = np.zeros(len(self.basis), dtype=complex)
        if t in self.basis:
            y[self.basis.index[t]] = 1.0
            return y
        rhs = np.zeros(len(self.basis), dtype=complex)
        for sec in self.rep.sectors:
            Ot = self.rep.monomial(t, sec.two_l)
            rhs += sec.multiplicity * np.einsum("ij,aji->a", Ot, self._stacks[sec.two_l])
        x = self.gram.solve(rhs)
        x[np.abs(x) < 1e-13 * np.abs(x).max()] = 0
        return x / self.scale

    def _working_coeffs(self, op: Mapping) -> dict[int, complex]:
        """Coefficients of ``op`` on the working (rescaled) monomials."""
        out: dict[int, complex] = {}
        for t, c in op.items():
            if c == 0:
                continue
            y = self.reduce(t) * self.scale
            for i in np.flatnonzero(y):
                out[int(i)] = out.get(int(i), 0) + complex(c) * y[i]
        return out

    def operator_rows(self, op: Mapping) -> tuple[np.ndarray, np.ndarray]:
        """(commutator rows, left-multiplication matrix) for an expanded operator.

        Row a of the second matrix gives <op O_a> as a combination of v.
        """
        n = len(self.basis)
        comm = np.zeros((n, n), dtype=complex)
        mult = np.zeros((n, n), dtype=complex)
        for beta, coef in self._working_coeffs(op).items():
            left = self.slice(beta, "left").matrix
            right = self.slice(beta, "right").matrix
            comm += coef * (left - right)
            mult += coef * left
        return comm, mult

    def assemble(self, h: Mapping, p: Mapping | None = None, P: float | None = None):
        """Stack the E-independent constraint rows.

        Returns ``(K, A, groups)`` where ``A v = E v`` is the eigenvalue
        condition and ``groups`` maps a row-group name to its slice of K.
        """
        comm_h, A = self.operator_rows(h)
        blocks = [comm_h]
        groups = {"commutator": slice(0, len(self.basis))}
        if p:
            comm_p, mult_p = self.operator_rows(p)
            n = len(self.basis)
            blocks.append(comm_p)
            rows = [comm_p]
            if P is not None:
                rows.append(mult_p - P * np.eye(n))
                blocks.append(rows[-1])
            groups["symmetry"] = slice(n, n * len(blocks))
        return np.vstack(blocks), A, groups

    def tracial_functional(self, K: np.ndarray) -> np.ndarray:
        """The normalized sector trace, as the unique functional with K v = 0
        that also commutes with J_x and J_z."""
        rows = [K]
        for t in ((1, 0, 0), (0, 0, 1)):
            if t not in self.basis:
                continue
            comm, _ = self.operator_rows({t: 1.0})
            rows.append(comm)
        V = nullspace(np.vstack(rows), self.tol.null, ref=1.0)
        if V.shape[1] != 1:
            raise ArithmeticError(f"tracial functional not unique (dim {V.shape[1]})")
        v = V[:, 0]
        return v / v[0]

    def to_physical(self, v: np.ndarray) -> np.ndarray:
        return v * self.scale

    def _refine(self, V, K, A, groups, v, E, res, steps: int = 3):
        """Newton polish of a simple eigenpair.

        Residuals are formed from the physical expectation values, which
        restores the relative accuracy of small entries; the correction stays
        inside the admissible subspace spanned by V.  A step is kept only if
        it lowers the residual.
        """
        k = V.shape[1]
        best, score = (v, E, res), max(res.values())
        for _ in range(steps):
            w = v / self.scale
            r = np.concatenate([A @ w - E * w, [0.0]])
            J = np.zeros((len(v) + 1, k + 1), dtype=complex)
            J[:-1, :k] = A @ V - E * V
            J[:-1, k] = -w
            J[-1, :k] = V[0] * self.scale[0]
            step = np.linalg.lstsq(J, -r, rcond=None)[0]
            v = v + self.scale * (V @ step[:k])
            E = E + step[k].real
            v = v / v[0]
            v[0] = 1.0
            new = _residuals(K, A, groups, v / self.scale, E)
            if max(new.values()) <= score:
                best, score = (v, E, new), max(new.values())
        return best

    def solve(
        self,
        h: Mapping,
        p: Mapping | None = None,
        two_l: int | None = None,
        expected: int | None = None,
    ) -> list[BootstrapSolution]:
        """Solve one sector (or the whole algebra if ``p`` is None)."""
        P = None if two_l is None else two_l * (two_l + 2) / 4
        K, A, groups = self.assemble(h, p, P)
        tol = self.tol
        V = nullspace(K, tol.null, ref=max(np.linalg.norm(A, 2), 1.0))
        if V.shape[1] == 0:
            _warn_count(two_l, 0, expected, [])
            return []
        M = V.conj().T @ A @ V
        evals, W = np.linalg.eig(M)
        order = np.argsort(evals.real, kind="stable")
        evals, W = evals[order], W[:, order]
        clusters = cluster_energies(evals.real, tol.degeneracy)

        out: list[BootstrapSolution] = []
        table: list[dict] = []
        tracial = None
        for cid, members in enumerate(clusters):
            E_c = evals[members]
            E = float(np.mean(E_c.real))
            imag = float(np.max(np.abs(E_c.imag)))
            n = len(members)
            k = math.isqrt(n)
            if n == 1:
                v = V @ W[:, members[0]]
            else:
                if tracial is None:
                    tracial = self.tracial_functional(K)
                v = V @ _spectral_component(M, np.mean(E_c), n, V.conj().T @ tracial)
            res = _residuals(K, A, groups, v, E)
            row = dict(E=E, imag=imag, cluster_dim=n, **res)
            table.append(row)
            ok = (
                imag <= 1e-8 * (1 + abs(E))
                and res["eigen"] <= tol.residual
                and res["commutator"] <= tol.residual
                and res["symmetry"] <= tol.residual
                and k * k == n
            )
            if not ok:
                log.debug("rejected candidate %s", row)
                continue
            if abs(v[0]) < tol.identity * np.linalg.norm(v):
                raise IdentityComponentVanishes(f"candidate at E={E:.6g} has no identity component")
            v = self.to_physical(v)
            v = v / v[0]
            v[0] = 1.0
            if n == 1:
                v, E, res = self._refine(V, K, A, groups, v, E, res)
            for _ in range(k):
                out.append(
                    BootstrapSolution(
                        energy=E,
                        two_l=two_l,
                        expectations=v,
                        basis=self.basis,
                        residual_commutator=res["commutator"],
                        residual_eigen=res["eigen"],
                        residual_symmetry=res["symmetry"],
                        cluster=cid,
                        cluster_size=k,
                        reducer=self.reduce,
                    )
                )
        _warn_count(two_l, len(out), expected, table)
        return out


def nullspace(K: np.ndarray, rel_tol: float, ref: float = 0.0) -> np.ndarray:
    """Orthonormal columns spanning the numerical nullspace of K.

    Singular values below ``rel_tol * max(sigma_max, ref)`` count as zero;
    ``ref`` keeps an all-roundoff K from looking full rank.
    """
    _, s, Vh = np.linalg.svd(K)
    cut = rel_tol * max(s[0] if s.size else 0.0, ref)
    if cut == 0:
        return np.eye(K.shape[1], dtype=complex)
    rank = int(np.sum(s > cut))
    return Vh[rank:].conj().T


def cluster_energies(energies: np.ndarray, rel_tol: float) -> list[list[int]]:
    """Group sorted energies whose neighbours lie within rel_tol * width.

    The width is floored at max(|E|, 1) so a sector with a single level still
    gets a usable scale.
    """
    if len(energies) == 0:
        return []
    width = max(float(energies[-1] - energies[0]), float(np.max(np.abs(energies))), 1.0)
    groups = [[0]]
    for i in range(1, len(energies)):
        if energies[i] - energies[i - 1] <= rel_tol * width:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _spectral_component(M: np.ndarray, E: complex, n: int, c: np.ndarray) -> np.ndarray:
    """Oblique projection of ``c`` onto the n-dimensional invariant subspace
    of M at eigenvalue E, along the remaining invariant subspaces."""
    U, _, Vh = np.linalg.svd(M - E * np.eye(M.shape[0]))
    Q = Vh[-n:].conj().T
    Y = U[:, -n:]
    return Q @ np.linalg.solve(Y.conj().T @ Q, Y.conj().T @ c)


def _residuals(K, A, groups, v, E) -> dict:
    nv = np.linalg.norm(v)
    out = {"eigen": float(np.linalg.norm(A @ v - E * v) / nv)}
    out["commutator"] = float(np.linalg.norm(K[groups["commutator"]] @ v) / nv)
    sym = groups.get("symmetry")
    out["symmetry"] = float(np.linalg.norm(K[sym] @ v) / nv) if sym else 0.0
    return out


def _warn_count(two_l, found, expected, table):
    if expected is None and two_l is not None:
        expected = two_l + 1
    if expected is not None and found != expected:
        warnings.warn(WrongStateCount(two_l if two_l is not None else expected - 1, found, table), stacklevel=3)


# Module-level entry points -------------------------------------------------

_ENGINES: dict[tuple, BootstrapEngine] = {}


def engine_for(L: int, tol: Tolerances | None = None, rescale: bool = True) -> BootstrapEngine:
    """Shared engine for the full monomial basis of L sites."""
    key = (L, tol or Tolerances(), rescale)
    if key not in _ENGINES:
        _ENGINES[key] = BootstrapEngine(enumerate_basis(L), rescale=rescale, tol=key[1])
    return _ENGINES[key]


def gram_matrix(basis: MonomialBasis, rescale: bool = False) -> GramMatrix:
    """Gram matrix tr(O_a O_b); unscaled by default."""
    return BootstrapEngine(basis, rescale=rescale).gram


def multiplication_slice(basis: MonomialBasis, beta, side: str) -> MultiplicationSlice:
    """Unscaled slice for the monomial ``beta`` (triple or index)."""
    idx = basis.index[tuple(beta)] if not isinstance(beta, (int, np.integer)) else int(beta)
    return BootstrapEngine(basis, rescale=False).slice(idx, side)


def assemble_sector_constraints(
    L: int, h: Mapping, p: Mapping | None = None, P: float | None = None, rescale: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    K, A, _ = engine_for(L, rescale=rescale).assemble(h, p, P)
    return K, A


def solve_sector(
    L: int,
    params: tuple[float, float, float],
    l,
    tol: Tolerances | None = None,
) -> list[BootstrapSolution]:
    """All eigenstates of the LMG model in sector l, sorted by energy.

    ``params`` is (gamma, hx, hz).  Degenerate levels inside the sector come
    back as ``cluster_size`` identical records carrying the average over the
    degenerate eigenspace.
    """
    two_l = as_two_l(l)
    if two_l > L or (L - two_l) % 2:
        raise ValueError(f"l={format_spin(two_l)} is not a sector of L={L}")
    engine = engine_for(L, tol)
    return engine.solve(lmg_hamiltonian(L, *params), casimir(), two_l)


def solve_all(L: int, params, tol: Tolerances | None = None, two_ls=None) -> dict[int, list[BootstrapSolution]]:
    from .su2_rep import admissible_two_l

    two_ls = admissible_two_l(L) if two_ls is None else two_ls
    return {t: solve_sector(L, params, Fraction(t, 2), tol) for t in two_ls}


def solve_toy_model(L: int, tol: Tolerances | None = None) -> list[BootstrapSolution]:
    """Bootstrap H = J_z over the basis {J_z^k, k = 0..L}."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    engine = BootstrapEngine(jz_power_basis(L), rescale=True, tol=tol)
    return engine.solve({(0, 0, 1): 1.0}, expected=L + 1)

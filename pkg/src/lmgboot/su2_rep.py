"""Spin-l representations of su(2) and traces over the collective spin algebra.

The collective operators J_x, J_y, J_z of L spin-1/2 sites act on the
2^L-dimensional Hilbert space, which decomposes into spin-l irreducible blocks
with multiplicities d_l.  Every trace in this package is evaluated block by
block as ``sum_l d_l tr(block_l)``; the 2^L space is never built here.

Spin labels are carried internally as the integer ``two_l = 2l``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Iterable, Sequence

import numpy as np

Triple = tuple[int, int, int]


def as_two_l(l) -> int:
    """Convert a spin label (int, float, Fraction or 'a/b' string) to 2l."""
    if isinstance(l, str):
        l = Fraction(l)
    two_l = 2 * Fraction(l)
    if two_l.denominator != 1 or two_l < 0:
        raise ValueError(f"spin label must be a non-negative half-integer, got {l!r}")
    return int(two_l)


def format_spin(two_l: int) -> str:
    return str(two_l // 2) if two_l % 2 == 0 else f"{two_l}/2"


@dataclass(frozen=True, order=True)
class SpinSector:
    """One spin-l block of the collective representation."""

    two_l: int
    multiplicity: int = 1

    @property
    def l(self) -> float:
        return self.two_l / 2

    @property
    def dim(self) -> int:
        return self.two_l + 1

    @property
    def casimir(self) -> float:
        """Eigenvalue l(l+1) of J^2 on this block."""
        return self.two_l * (self.two_l + 2) / 4


def spin_matrices(l) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (J_x, J_y, J_z) for spin ``l`` in the J_z eigenbasis.

    Rows are ordered by m = l, l-1, ..., -l.
    """
    two_l = as_two_l(l)
    dim = two_l + 1
    m = (two_l - 2 * np.arange(dim)) / 2
    s = two_l / 2
    # <m+1|J_+|m> = sqrt(l(l+1) - m(m+1))
    up = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    jp = np.diag(up, k=1).astype(complex)
    jm = jp.conj().T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    jz = np.diag(m).astype(complex)
    return jx, jy, jz


def admissible_two_l(L: int) -> list[int]:
    """All 2l values for L sites, ascending (l_min is 0 or 1/2)."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    return list(range(L % 2, L + 1, 2))


def multiplicity(L: int, l) -> int:
    """Number of copies d_l of the spin-l block in (spin-1/2)^{⊗L}.

    d_l = (2l+1)/(L+1) * binom(L+1, L/2+l+1), evaluated in exact integers.
    """
    two_l = as_two_l(l)
    if two_l > L or (two_l - L) % 2:
        raise ValueError(f"l={format_spin(two_l)} is not a sector of L={L}")
    num = (two_l + 1) * comb(L + 1, (L + two_l) // 2 + 1)
    d, rem = divmod(num, L + 1)
    assert rem == 0
    return d


def sectors(L: int) -> list[SpinSector]:
    return [SpinSector(t, multiplicity(L, Fraction(t, 2))) for t in admissible_two_l(L)]


def basis_size(L: int) -> int:
    return (L + 1) * (L + 2) * (L + 3) // 6


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered operator basis J_x^a J_y^b J_z^c.

    ``entries[0]`` is always the identity.  ``index`` maps a triple back to
    its flat position.
    """

    L: int
    entries: tuple[Triple, ...]
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.entries)})
        if len(self.index) != len(self.entries):
            raise ValueError("duplicate monomials in basis")
        if not self.entries or self.entries[0] != (0, 0, 0):
            raise ValueError("basis must start with the identity (0, 0, 0)")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> Triple:
        return self.entries[i]

    def __contains__(self, t) -> bool:
        return tuple(t) in self.index

    @property
    def max_power(self) -> int:
        return max(max(t) for t in self.entries)


def enumerate_basis(L: int) -> MonomialBasis:
    """All triples with a+b+c <= L, graded lexicographic in (a+b+c, a, b).

    Within one total degree the order runs from larger ``a`` to smaller, then
    larger ``b`` to smaller, so degree 1 reads J_x, J_y, J_z.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    entries = []
    for n in range(L + 1):
        for a in range(n, -1, -1):
            for b in range(n - a, -1, -1):
                entries.append((a, b, n - a - b))
    basis = MonomialBasis(L, tuple(entries))
    assert len(basis) == basis_size(L)
    return basis


def jz_power_basis(L: int) -> MonomialBasis:
    """The basis {J_z^k, k = 0..L} used for the single-field toy model."""
    return MonomialBasis(L, tuple((0, 0, c) for c in range(L + 1)))


class Representation:
    """Spin blocks for all sectors of L sites, with cached generator powers.

    Parameters
    ----------
    L : int
        Number of spin-1/2 sites.
    max_power : int, optional
        Highest power of each generator that will be requested.  Defaults to L.
    """

    def __init__(self, L: int, max_power: int | None = None):
        self.L = L
        self.sectors = sectors(L)
        self.max_power = L if max_power is None else max_power
        self._powers: dict[int, list[list[np.ndarray]]] = {}

    def generators(self, two_l: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return spin_matrices(Fraction(two_l, 2))

    def powers(self, two_l: int) -> list[list[np.ndarray]]:
        """``powers(two_l)[axis][k]`` is (J_axis)^k in the spin block."""
        if two_l not in self._powers:
            gens = self.generators(two_l)
            table = []
            for g in gens:
                row = [np.eye(two_l + 1, dtype=complex)]
                for _ in range(self.max_power):
                    row.append(row[-1] @ g)
                table.append(row)
            self._powers[two_l] = table
        return self._powers[two_l]

    def monomial(self, triple: Sequence[int], two_l: int) -> np.ndarray:
        """(J_x)^a (J_y)^b (J_z)^c in one block, multiplied left to right."""
        a, b, c = triple
        tables = self.powers(two_l)
        mats = []
        for k, table in zip((a, b, c), tables):
            if k < len(table):
                mats.append(table[k])
            else:
                mats.append(np.linalg.matrix_power(table[1], k))
        return mats[0] @ mats[1] @ mats[2]

    def stack(self, basis: MonomialBasis, two_l: int) -> np.ndarray:
        """All basis monomials in one block, shape (len(basis), dim, dim)."""
        return np.stack([self.monomial(t, two_l) for t in basis.entries])

    def weighted_trace(self, ops: Iterable[Sequence[int]]) -> complex:
        """Full 2^L trace of a product of monomials, via the block sum."""
        ops = [tuple(o) for o in ops]
        total = 0j
        for sec in self.sectors:
            prod = np.eye(sec.dim, dtype=complex)
            for t in ops:
                prod = prod @ self.monomial(t, sec.two_l)
            total += sec.multiplicity * np.trace(prod)
        return total

    @cached_property
    def hilbert_dim(self) -> int:
        return 2**self.L


def monomial_block(triple: Sequence[int], l) -> np.ndarray:
    """Single-use evaluation of one monomial in the spin-l block."""
    two_l = as_two_l(l)
    rep = Representation(max(two_l, 1), max_power=max(max(triple), 1))
    return rep.monomial(triple, two_l)


def weighted_trace(ops: Sequence[Sequence[int]], L: int) -> complex:
    return Representation(L, max_power=max([L] + [max(o) for o in ops])).weighted_trace(ops)

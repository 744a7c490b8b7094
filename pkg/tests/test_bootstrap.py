import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmgboot import bootstrap as bs
from lmgboot import oracles
from lmgboot.su2_rep import admissible_two_l, enumerate_basis, jz_power_basis

PRINTED_L2 = {
    # E ordered ascending; v values as printed (four decimals)
    "E": [-1.563, -0.007569, 1.321],
    (2, 0, 0): [0.8386, 0.5444, 0.6170],
    (0, 2, 0): [0.4693, 0.9698, 0.5610],
    (0, 0, 2): [0.6922, 0.4858, 0.8220],
    (1, 1, 0): [0.2927j, 0.1173j, -0.4101j],
    (1, 0, 1): [0.2229, -0.4840, 0.2611],
    (0, 1, 1): [0.4042j, -0.1247j, -0.2795j],
    (1, 0, 0): [0.8084, -0.2493, -0.5590],
    (0, 1, 0): [0, 0, 0],
    (0, 0, 1): [0.5854, 0.2347, -0.8201],
}

# H^(2) eigenvalues for L=4, gamma=0.5, hx=0, hz=0.3; frozen after agreement
# between the block oracle and the 2^L exact diagonalization
GOLDEN_L4 = [-0.728774292452122, -0.717410580534976, -0.403856110284773, -0.021225707547877, 0.621266690819749]

params = st.tuples(*[st.sampled_from([0.0, 0.25, 0.5, 1.0, -0.7])] * 3).filter(lambda p: any(p))


def test_gram_l1():
    B = bs.gram_matrix(enumerate_basis(1)).matrix
    np.testing.assert_allclose(B, np.diag([2, 0.5, 0.5, 0.5]), atol=1e-14)


def test_gram_l2_entries():
    basis = enumerate_basis(2)
    B = bs.gram_matrix(basis).matrix
    assert B[0, 0] == pytest.approx(4)
    i = basis.index[(0, 0, 2)]
    # brute force: J_z = diag(1, 0, 0, -1) on two qubits
    assert B[i, i] == pytest.approx(np.sum(np.array([1, 0, 0, -1.0]) ** 4))
    np.testing.assert_allclose(B, B.T, atol=1e-12)


def test_gram_singular_for_redundant_basis():
    from lmgboot.su2_rep import MonomialBasis

    # J_z^3 = J_z/4 for a single spin-1/2, so this set is linearly dependent
    basis = MonomialBasis(1, ((0, 0, 0), (0, 0, 1), (0, 0, 3)))
    with pytest.raises(bs.SingularGram):
        bs.gram_matrix(basis)


def test_rescaling_improves_conditioning():
    raw = bs.gram_matrix(enumerate_basis(6)).condition_estimate
    scaled = bs.engine_for(6).gram.condition_estimate
    assert scaled < raw


@pytest.mark.parametrize("side", ["left", "right"])
def test_identity_slice(side):
    basis = enumerate_basis(2)
    g = bs.multiplication_slice(basis, (0, 0, 0), side).matrix
    np.testing.assert_allclose(g, np.eye(len(basis)), atol=1e-12)


def test_slice_examples():
    basis = enumerate_basis(2)
    g = bs.multiplication_slice(basis, (0, 0, 1), "left").matrix
    row = np.zeros(len(basis))
    row[basis.index[(0, 0, 2)]] = 1
    np.testing.assert_allclose(g[basis.index[(0, 0, 1)]], row, atol=1e-12)

    g = bs.multiplication_slice(basis, (1, 0, 0), "left").matrix
    row = np.zeros(len(basis))
    row[basis.index[(1, 1, 0)]] = 1
    np.testing.assert_allclose(g[basis.index[(0, 1, 0)]], row, atol=1e-12)


@pytest.mark.parametrize("side", ["left", "right"])
def test_slice_reconstructs_products(side):
    L = 3
    eng = bs.BootstrapEngine(enumerate_basis(L), rescale=False)
    rep = eng.rep
    beta = eng.basis.index[(1, 0, 1)]
    g = eng.slice(beta, side).matrix
    for two_l in admissible_two_l(L):
        S = rep.stack(eng.basis, two_l)
        prods = S[beta] @ S if side == "left" else S @ S[beta]
        recon = np.einsum("ag,gij->aij", g, S)
        np.testing.assert_allclose(recon, prods, atol=1e-10)


def test_sector_constraint_rank():
    K, A = bs.assemble_sector_constraints(2, bs.lmg_hamiltonian(2, 1, 1, 1), bs.casimir(), 2.0)
    s = np.linalg.svd(K, compute_uv=False)
    assert int(np.sum(s > 1e-9 * s[0])) == 10 - 3
    assert A.shape == (10, 10)


def test_commutator_rows_only_without_symmetry():
    eng = bs.engine_for(2)
    K, _, groups = eng.assemble(bs.lmg_hamiltonian(2, 1, 1, 1))
    assert K.shape[0] == len(eng.basis)
    assert list(groups) == ["commutator"]


def test_l2_singlet_sector():
    (s,) = bs.solve_sector(2, (1, 1, 1), 0)
    assert s.energy == pytest.approx(0.25, abs=1e-12)
    np.testing.assert_allclose(s.expectations[1:], 0, atol=1e-10)


def test_l2_triplet_sector_reproduces_printed_values():
    sols = bs.solve_sector(2, (1, 1, 1), 1)
    E = [s.energy for s in sols]
    roots = np.sort(np.roots([64, 16, -132, -1]).real)
    np.testing.assert_allclose(E, roots, atol=1e-10)
    np.testing.assert_allclose(E, PRINTED_L2["E"], atol=1e-3)
    for key, printed in PRINTED_L2.items():
        if key == "E":
            continue
        got = [s[key] for s in sols]
        np.testing.assert_allclose(got, printed, atol=1e-3)


def test_l2_closed_forms():
    # the printed rational functions of E, evaluated at full precision
    for s in bs.solve_sector(2, (1, 1, 1), 1):
        E = s.energy
        assert s[(2, 0, 0)] == pytest.approx((48 * E**2 - 32 * E + 309) / 568, abs=1e-9)
        assert s[(1, 1, 0)] == pytest.approx(-1j * (112 * E**2 + 304 * E - 131) / 1136, abs=1e-9)
        assert s[(0, 0, 1)] == pytest.approx(-(112 * E**2 + 304 * E - 131) / 568, abs=1e-9)


def test_golden_l4():
    sols = bs.solve_sector(4, (0.5, 0, 0.3), 2)
    np.testing.assert_allclose([s.energy for s in sols], GOLDEN_L4, atol=1e-10)


def test_l4_matches_block_oracle():
    sols = bs.solve_sector(4, (1, 0.5, 1), 2)
    ref = oracles.angular_momentum_solve(4, (1, 0.5, 1), 2).energies
    np.testing.assert_allclose([s.energy for s in sols], ref, atol=1e-8)


def test_bad_sector_rejected():
    with pytest.raises(ValueError):
        bs.solve_sector(4, (1, 1, 1), Fraction(1, 2))


def test_toy_model_l2():
    sols = bs.solve_toy_model(2)
    np.testing.assert_allclose([s.energy for s in sols], [-1, 0, 1], atol=1e-12)
    for s in sols:
        np.testing.assert_allclose(s.expectations, [s.energy**k for k in range(3)], atol=1e-12)
        assert s.two_l is None


def test_toy_model_reduction_identity():
    # J_z^5 = 5 J_z^3 - 4 J_z at L=4, read from the J_z slice applied to J_z^4
    basis = jz_power_basis(4)
    g = bs.multiplication_slice(basis, (0, 0, 1), "left").matrix
    np.testing.assert_allclose(g[basis.index[(0, 0, 4)]], [0, -4, 0, 5, 0], atol=1e-10)


def test_toy_commutator_rows_give_recursion():
    # with H = J_z every commutator vanishes, so A carries v_{a+1} = E v_a
    eng = bs.BootstrapEngine(jz_power_basis(4), rescale=False)
    _, A, _ = eng.assemble({(0, 0, 1): 1.0})
    for a in range(4):
        row = np.zeros(5)
        row[a + 1] = 1
        np.testing.assert_allclose(A[a], row, atol=1e-10)


def test_out_of_basis_monomial():
    # J_x^2 is not in the L=1 basis but equals I/4 on spin-1/2 sites
    s = bs.solve_sector(1, (1, 0.3, 0.7), Fraction(1, 2))[0]
    assert s[(2, 0, 0)] == pytest.approx(0.25, abs=1e-12)


def test_single_site_sector():
    sols = bs.solve_sector(1, (1, 0.3, 0.4), Fraction(1, 2))
    ref = oracles.angular_momentum_solve(1, (1, 0.3, 0.4), Fraction(1, 2)).energies
    np.testing.assert_allclose([s.energy for s in sols], ref, atol=1e-10)


def test_degenerate_level_reported_as_cluster():
    # hx = hz = 0, gamma = 1 at odd L: Kramers-like doubling in every sector
    sols = bs.solve_sector(5, (1, 0, 0), Fraction(5, 2))
    assert len(sols) == 6
    assert all(s.cluster_size == 2 and s.degenerate for s in sols)
    ref = oracles.angular_momentum_solve(5, (1, 0, 0), Fraction(5, 2))
    mo = ref.moments()
    from lmgboot.measures import moments_from_solution

    for s, m in zip(sols, mo):
        mb = moments_from_solution(s)
        np.testing.assert_allclose(mb.second, m.second, atol=1e-8)


def test_wrong_state_count_is_a_warning():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        bs._warn_count(2, 2, 3, [])
    assert any(issubclass(x.category, bs.WrongStateCount) for x in w)


def test_tolerances_validated():
    with pytest.raises(ValueError):
        bs.Tolerances(null=-1)


@settings(max_examples=25, deadline=None)
@given(L=st.integers(2, 6), p=params, data=st.data())
def test_sector_invariants(L, p, data):
    two_l = data.draw(st.sampled_from(admissible_two_l(L)))
    sols = bs.solve_sector(L, p, Fraction(two_l, 2))
    H = oracles.sector_hamiltonian(L, p, Fraction(two_l, 2))
    assert len(sols) == two_l + 1
    # energy-sum rule
    assert sum(s.energy for s in sols) == pytest.approx(np.trace(H).real, abs=1e-8)
    c = two_l * (two_l + 2) / 4
    for s in sols:
        assert s.expectations[0] == 1
        assert (s[(2, 0, 0)] + s[(0, 2, 0)] + s[(0, 0, 2)]).real == pytest.approx(c, abs=1e-8)
        # <Jx Jy> - <Jy Jx> = i <Jz>, <Jy Jx> = conj <Jx Jy>
        assert 2j * s[(1, 1, 0)].imag == pytest.approx(1j * s[(0, 0, 1)], abs=1e-8)
        assert max(s.residual_commutator, s.residual_eigen, s.residual_symmetry) < 1e-7

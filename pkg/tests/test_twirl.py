import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from qaccred import qalg as q
from qaccred import twirl as tw

H_XY = np.kron(q.X, q.X) + np.kron(q.Y, q.Y)
seeds = st.integers(0, 2**31 - 1)


# ---------------------------------------------------------------------------
# Clifford helpers
# ---------------------------------------------------------------------------


def test_push_through_cnot_examples():
    assert tw.push_pauli_through_clifford(q.PauliString("XI"), q.CNOT) == q.PauliString("XX")
    assert tw.push_pauli_through_clifford(q.PauliString("IX"), q.CNOT) == q.PauliString("IX")
    for m in (q.CNOT, q.CZ, q.SWAP):
        assert tw.push_pauli_through_clifford(q.PauliString("II"), m) == q.PauliString("II")


def test_push_rejects_non_clifford(dec_t):
    with pytest.raises(ValueError, match="not Clifford"):
        tw.push_pauli_through_clifford(q.PauliString("XI"), dec_t.gate)


@pytest.mark.parametrize("letters", q.all_pauli_letters(2))
def test_push_matches_conjugation(letters):
    p = q.PauliString(letters)
    image = tw.push_pauli_through_clifford(p, q.CNOT)
    assert np.allclose(q.CNOT.conj().T @ p.matrix @ q.CNOT, image.matrix)


def test_is_clifford_examples(dec_t):
    assert tw.is_clifford(q.CNOT)
    assert not tw.is_clifford(dec_t.gate)
    assert tw.is_clifford(q.xy_gate(0.0))


def test_clifford_group_order():
    assert len(tw.two_qubit_cliffords()) == 11520
    adm = tw.admissible_cliffords()
    assert adm and all(tw.fixes_state(m, tw.ZERO_ZERO) and tw.fixes_state(m, tw.PLUS_PLUS) for m in adm)


# ---------------------------------------------------------------------------
# tau decompositions and vesicle sets
# ---------------------------------------------------------------------------


def test_decomposition_rejects_bad_clifford():
    with pytest.raises(ValueError, match="fix"):
        tw.TauDecomposition(q.I2, q.I2, q.CZ)  # CZ moves |++>
    with pytest.raises(ValueError, match="Clifford"):
        tw.TauDecomposition(q.I2, q.I2, q.xy_gate(0.3))
    with pytest.raises(ValueError):
        tw.TauDecomposition(q.H * 2, q.I2, q.CNOT)


def test_decomposition_gate(dec_t):
    tt = np.kron(q.T, q.T)
    assert np.allclose(dec_t.gate, tt.conj().T @ q.CNOT @ tt)
    assert dec_t.matches(np.exp(0.4j) * dec_t.gate)


@given(seeds)
def test_vesicle_set_properties(seed):
    v = tw.VesicleSet(q.random_unitary(2, seed))
    for i, a in enumerate(v.elements):
        assert np.allclose(a, a.conj().T)
        for j, b in enumerate(v.elements):
            assert np.isclose(np.trace(a @ b), 2 * (i == j))


def _pushing_ok(dec):
    g = dec.gate
    for (j, k), (pp, qq) in dec.pushed_table.items():
        v1, v2 = dec.vesicles
        lhs = np.kron(v1.element(j), v2.element(k)) @ g
        rhs = g @ np.kron(pp, qq)
        if not q.equal_up_to_phase(lhs, rhs):
            return False
    return True


def test_pushing_identity_fixed_decompositions(dec_t, dec_random):
    assert _pushing_ok(dec_t)
    assert _pushing_ok(dec_random)


@given(seeds)
def test_pushing_identity_random_taus(seed):
    rng = np.random.default_rng(seed)
    adm = tw.admissible_cliffords()
    dec = tw.TauDecomposition(q.random_unitary(2, rng), q.random_unitary(2, rng), adm[rng.integers(len(adm))])
    assert _pushing_ok(dec)


def test_pushed_pair_examples(dec_t):
    ii = tw.pushed_pair(("I", "I"), dec_t)
    assert np.allclose(ii[0], q.I2) and np.allclose(ii[1], q.I2)
    # X (x) I through CNOT spreads to X (x) X, seen in the T frames
    pp, qq = tw.pushed_pair(("X", "I"), dec_t)
    tx = q.T.conj().T @ q.X @ q.T
    assert q.equal_up_to_phase(np.kron(pp, qq), np.kron(tx, tx))


def test_pushed_pairs_reproduce_cnot_propagation():
    dec = tw.TauDecomposition(q.I2, q.I2, q.CNOT)
    for j, k in itertools.product("IXYZ", repeat=2):
        pp, qq = tw.pushed_pair((j, k), dec)
        # brute force: CNOT^dag (P_j x P_k) CNOT
        brute = q.CNOT.conj().T @ q.PauliString(j + k).matrix @ q.CNOT
        assert q.equal_up_to_phase(np.kron(pp, qq), brute)


# ---------------------------------------------------------------------------
# generalized twirl and mixtures
# ---------------------------------------------------------------------------


def test_twirl_of_identity_is_identity(dec_t):
    out = tw.generalized_twirl(q.Channel.identity(2), dec_t.gamma)
    assert out.is_identity()


@given(seeds)
def test_pauli_twirl_weights_from_kraus_traces(seed):
    e = q.random_channel(4, 3, seed)
    paulis = [p.matrix for p in q.all_pauli_strings(2)]
    twirled = tw.generalized_twirl(e, paulis)
    expected = q.Channel.mixture(list(tw.kraus_trace_weights(e, paulis)), paulis)
    assert np.allclose(twirled.superop, expected.superop, atol=1e-12)


@given(seeds)
def test_gamma_twirl_is_convex_mixture(seed):
    dec = tw.TauDecomposition(q.T, q.T, q.CNOT)
    e = q.random_channel(4, 2, seed)
    fit = tw.extract_mixture(tw.generalized_twirl(e, dec.gamma), dec.gamma)
    assert fit.ok and fit.residual < 1e-8
    assert fit.weights.min() >= -1e-9 and abs(fit.weights.sum() - 1) < 1e-9


def test_twirl_argument_validation():
    with pytest.raises(ValueError, match="self-adjoint"):
        tw.generalized_twirl(q.Channel.identity(1), [q.S])
    with pytest.raises(ValueError, match="dimension"):
        tw.generalized_twirl(q.Channel.identity(2), [q.X])
    with pytest.raises(ValueError):
        tw.generalized_twirl(q.Channel.identity(1), [])


def test_extract_mixture_flags_coherent_channel():
    paulis = [p.matrix for p in q.all_pauli_strings(1)]
    rot = q.Channel.unitary(expm(-0.3j * q.X))
    assert not tw.extract_mixture(rot, paulis).ok
    assert tw.extract_mixture(q.depolarizing(0.2), paulis).ok


# ---------------------------------------------------------------------------
# Lambda summation and unflippable sets
# ---------------------------------------------------------------------------


def test_lambda_summation_examples():
    all2 = q.all_pauli_letters(2)
    assert tw.check_lambda_summation(all2, all2)
    assert tw.check_lambda_summation(["II", "XI", "YI", "ZI"], tw.XY_TWIRL_SET)
    assert not tw.check_lambda_summation(["II", "XY", "YX"], tw.XY_TWIRL_SET)


def test_lambda_summation_fails_on_identity_bearing_pairs():
    # ZY * IX = ZZ commutes with every element of the weak twirl set
    assert not tw.check_lambda_summation(["ZY", "IX"], tw.XY_TWIRL_SET)
    assert tw.is_unflippable(["ZY", "IX"])


def test_unflippable_examples():
    assert tw.is_unflippable(["II", "XI", "YI", "ZI"])
    assert tw.is_unflippable(["II", "XY", "ZY", "ZX", "IX"])
    assert tw.is_unflippable(["ZY", "ZX", "IX", "YI"])
    assert not tw.is_unflippable(["II", "XY", "YX"])
    assert not tw.is_unflippable(["XX"])
    with pytest.raises(ValueError):
        tw.UnflippableSet(frozenset({"XY", "YX"}))
    with pytest.raises(ValueError):
        tw.is_unflippable(["XYZ"])


def test_unflippable_products():
    s = tw.UnflippableSet(frozenset({"II", "XI", "YI"}))
    assert s.products() == {"XI", "YI", "ZI"}


def test_sign_table_columns_cancel_and_diagonal_sums():
    table = tw.sign_table()
    assert table.shape == (4, 12)
    assert np.all(table.sum(axis=0) == 0)
    assert np.all(table[0] == 1)


# ---------------------------------------------------------------------------
# twirl instructions
# ---------------------------------------------------------------------------


def test_xy_instruction_draws():
    g = q.xy_gate(0.4)
    ident = tw.xy_twirl_instruction(letter="I")
    assert np.allclose(ident.dressed(g), g)
    zz = np.kron(q.Z, q.Z)
    assert np.allclose(zz @ g @ zz, g)
    for ins in tw.twirl_instructions("xy"):
        assert q.equal_up_to_phase(ins.dressed(g), g)


def test_xy_instruction_seeded():
    a = tw.xy_twirl_instruction(seed=3)
    b = tw.xy_twirl_instruction(seed=3)
    assert a.label == b.label and a.label in {"II", "XX", "YY", "ZZ"}


def test_weak_twirl_makes_single_qubit_supported_noise_stochastic():
    e = q.random_channel(2, 3, 5).tensor(q.Channel.identity(1))
    g = q.xy_gate(0.8)
    acc = sum(
        q.superoperator([np.kron(*i.left)]) @ e.superop @ q.superoperator([g @ np.kron(*i.right)])
        for i in tw.twirl_instructions("xy")
    ) / 4
    # strip the gate: acc = twirled(e) . G
    resid = q.Channel.from_superoperator(acc @ q.superoperator([g.conj().T]))
    assert tw.extract_mixture(resid, tw.mixture_basis("xy")).ok


@pytest.mark.parametrize("letters", q.all_pauli_letters(2))
def test_xi_identity(letters):
    t = 0.37
    p = q.PauliString(letters)
    s_xx, s_yy = tw.xi_signs(p)
    lhs = q.xy_gate(t, s_xx, s_yy)
    assert np.allclose(lhs, p.matrix @ expm(-1j * t * H_XY) @ p.matrix, atol=1e-12)
    ins = tw.strong_xy_twirl_instruction(p, t, n3=True)
    assert q.equal_up_to_phase(ins.dressed(None), q.xy_gate(t))


def test_strong_instruction_examples():
    t = 0.5
    ii = tw.strong_xy_twirl_instruction(q.PauliString("II"), t, n3=True)
    assert np.allclose(ii.replaced_gate, q.xy_gate(t))
    zi = tw.strong_xy_twirl_instruction(q.PauliString("ZI"), t, n3=True)
    assert np.allclose(zi.replaced_gate, expm(1j * t * H_XY))
    with pytest.raises(ValueError, match="n3"):
        tw.strong_xy_twirl_instruction(q.PauliString("XI"), t, n3=False)


def test_tau_instructions_preserve_gate(dec_t):
    for ins in tw.twirl_instructions("tau", dec_t):
        assert q.equal_up_to_phase(ins.dressed(dec_t.gate), dec_t.gate)
    ins = tw.tau_twirl_instruction(dec_t, seed=9)
    assert ins.label == tw.tau_twirl_instruction(dec_t, seed=9).label


def test_group_and_basis_lookup(dec_t):
    assert len(tw.twirl_group("tau", dec_t)) == 16
    assert len(tw.twirl_group("xy")) == 4
    assert len(tw.twirl_group("xy-strong")) == 16
    assert len(tw.mixture_basis("xy")) == 16
    with pytest.raises(ValueError):
        tw.twirl_group("tau")
    with pytest.raises(ValueError):
        tw.twirl_group("zz")


# ---------------------------------------------------------------------------
# SPAM twirl
# ---------------------------------------------------------------------------


def test_spam_layers_with_identity_tau():
    seen = set()
    for s in range(20):
        for layer in tw.spam_twirl_layers(q.I2, s):
            assert np.allclose(layer, q.I2) or np.allclose(layer, q.Z)
            seen.add(bool(np.allclose(layer, q.Z)))
    assert seen == {True, False}
    a = tw.spam_twirl_layers(q.H, 4)
    b = tw.spam_twirl_layers(q.H, 4)
    assert all(np.allclose(x, y) for x, y in zip(a, b))


@given(seeds)
def test_spam_twirled_prep_is_diagonal_in_frame(seed):
    tau = q.random_unitary(2, seed)
    err = q.random_channel(2, 3, seed + 1)
    z = tau.conj().T @ q.Z @ tau
    psi = tau.conj().T @ np.array([1, 0])
    rho = err.apply(np.outer(psi, psi.conj()))
    avg = (rho + z @ rho @ z) / 2
    in_frame = tau @ avg @ tau.conj().T
    assert abs(in_frame[0, 1]) < 1e-10


@given(seeds)
def test_spam_twirled_measurement_is_diagonal_in_frame(seed):
    tau = q.random_unitary(2, seed)
    err = q.random_channel(2, 3, seed + 1)
    z = tau.conj().T @ q.Z @ tau
    for b in range(2):
        ket = tau.conj().T @ np.eye(2)[b]
        proj = np.outer(ket, ket.conj())
        povm = err.apply_adjoint(proj)
        avg = (povm + z @ povm @ z) / 2
        assert abs((tau @ avg @ tau.conj().T)[0, 1]) < 1e-10


# ---------------------------------------------------------------------------
# decomposition search
# ---------------------------------------------------------------------------


def test_search_finds_cnot():
    res = tw.search_tau_decomposition(q.CNOT)
    assert res.decomposition is not None and res.residual < 1e-10
    assert res.decomposition.matches(q.CNOT)


def test_search_finds_t_conjugated_cnot(dec_t):
    res = tw.search_tau_decomposition(dec_t.gate)
    assert res.decomposition is not None and res.residual < 1e-6
    assert res.decomposition.matches(dec_t.gate)


def test_search_rejects_non_unitary():
    with pytest.raises(ValueError):
        tw.search_tau_decomposition(np.ones((4, 4)))
    with pytest.raises(ValueError):
        tw.search_tau_decomposition(q.H)

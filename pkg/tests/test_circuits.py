import json

import numpy as np
import pytest
from conftest import bell, random_tau_circuit, random_xy_circuit
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from qaccred import circuits as cc
from qaccred import qalg as q
from qaccred import twirl as tw

H_XY = np.kron(q.X, q.X) + np.kron(q.Y, q.Y)
seeds = st.integers(0, 2**31 - 1)


def probs(c):
    return cc.statevector_probabilities(c)


# ---------------------------------------------------------------------------
# IR and file format
# ---------------------------------------------------------------------------


def test_bell_distribution():
    p = probs(bell())
    assert np.allclose(p, [0.5, 0, 0, 0.5])


def test_gate_validation():
    with pytest.raises(cc.CircuitError, match="repeated qubit"):
        cc.gate("CNOT", 1, 1)
    with pytest.raises(cc.CircuitError, match="not unitary"):
        cc.unitary_gate(np.ones((2, 2)), 0)
    with pytest.raises(cc.CircuitError, match="index out of range"):
        cc.Circuit(2, [cc.gate("H", 2)])
    with pytest.raises(cc.CircuitError, match="provenance"):
        cc.unitary_gate(q.H, 0, tag="mystery")
    with pytest.raises(cc.CircuitError, match="preps"):
        cc.Circuit(2, [], preps=("0",))


def _same_circuit(a, b):
    assert a.n_qubits == b.n_qubits
    assert len(a.ops) == len(b.ops)
    for x, y in zip(a.ops, b.ops):
        assert (x.name, x.qubits, x.tag, x.params, x.twirl) == (y.name, y.qubits, y.tag, y.params, y.twirl)
        assert np.array_equal(x.matrix, y.matrix)
    for pa, pb in zip(a.preps + a.measurements, b.preps + b.measurements):
        if isinstance(pa, str):
            assert pa == pb
        else:
            assert np.array_equal(pa, pb)


@given(seeds)
def test_round_trip_is_lossless(seed):
    dec = tw.TauDecomposition(q.random_unitary(2, seed), q.T, q.CNOT)
    c = random_tau_circuit(dec, 3, 6, seed)
    c2 = cc.loads(cc.dumps(c))
    _same_circuit(c, c2)
    assert np.array_equal(c2.meta["decomposition"].tau1, dec.tau1)
    assert cc.dumps(c2) == cc.dumps(c)


def test_round_trip_generated_circuits(dec_t):
    c = random_xy_circuit(3, 6, 2)
    for gen in (cc.build_xy_target(c, 1, True), cc.build_xy_trap(c, 1)[0],
                cc.build_tau_trap(random_tau_circuit(dec_t, 3, 5, 4), dec_t, 0)[0]):
        _same_circuit(gen, cc.loads(cc.dumps(gen)))


def test_round_trip_unitary_labels(tmp_path):
    u = q.random_unitary(2, 5)
    c = cc.Circuit(1, [cc.gate("H", 0)], preps=(u,), measurements=("Y",))
    path = tmp_path / "c.json"
    cc.save_circuit(c, path)
    _same_circuit(c, cc.load_circuit(path))


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"ops": []}, "qubits"),
        ({"qubits": 0, "ops": []}, "qubits"),
        ({"qubits": 2}, "ops"),
        ({"qubits": 2, "ops": [{"qubits": [0]}]}, r"ops\[0\]\.kind"),
        ({"qubits": 2, "ops": [{"kind": "H"}]}, r"ops\[0\]\.qubits"),
        ({"qubits": 2, "ops": [{"kind": "H", "qubits": [0]}, {"kind": "Q", "qubits": [1]}]}, r"ops\[1\]\.kind"),
        ({"qubits": 2, "ops": [{"kind": "XY", "qubits": [0, 1]}]}, r"ops\[0\]\.params\.t"),
        ({"qubits": 2, "ops": [{"kind": "U", "qubits": [0], "matrix": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]}]}, r"ops\[0\]"),
        ({"qubits": 2, "ops": [{"kind": "H", "qubits": [3]}]}, r"ops\[0\]\.qubits"),
        ({"qubits": 1, "ops": [], "preps": ["7"]}, r"preps\[0\]"),
        ({"qubits": 1, "ops": [], "measurements": ["W"]}, r"measurements\[0\]"),
    ],
)
def test_malformed_documents_name_the_field(doc, field):
    with pytest.raises(cc.CircuitError, match=field):
        cc.circuit_from_dict(doc)


def test_bad_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n "qubits": 1,\n "ops": [,]\n}\n')
    with pytest.raises(cc.CircuitError, match="line 3"):
        cc.load_circuit(path)


def test_sample_files_load():
    c = cc.load_circuit("samples/tau_circuit.json")
    assert c.n_qubits == 4 and "decomposition" in c.meta
    assert cc.load_circuit("samples/xy_circuit.json").two_qubit_ops


def test_skeleton_and_moments():
    c = cc.Circuit(3, [cc.gate("H", 0), cc.gate("CNOT", 0, 1), cc.gate("T", 2), cc.gate("X", 1)])
    twos, slots = c.skeleton()
    assert twos == ((0, (0, 1), "CNOT", None),)
    assert slots == {(0, 0), (2, 0), (1, 1)}
    assert [len(m) for m in c.moments()] == [2, 1, 1]


# ---------------------------------------------------------------------------
# standard form
# ---------------------------------------------------------------------------


def test_standard_form_examples():
    c = cc.Circuit(1, [cc.gate("T", 0)])
    assert cc.standard_form(c) is c
    plus = cc.standard_form(cc.Circuit(1, [], preps=("+",)))
    assert plus.preps == ("0",) and np.allclose(plus.ops[0].matrix, q.H)


@given(seeds)
def test_standard_form_preserves_distribution(seed):
    c = random_xy_circuit(3, 5, seed)
    sf = cc.standard_form(c)
    assert all(p == "0" for p in sf.preps) and all(m == "Z" for m in sf.measurements)
    assert np.max(np.abs(probs(sf) - probs(c))) < 1e-12


# ---------------------------------------------------------------------------
# tau protocol generators
# ---------------------------------------------------------------------------


def test_tau_target_without_two_qubit_gates():
    dec = tw.TauDecomposition(q.I2, q.I2, q.CNOT)
    c = cc.Circuit(2, [cc.gate("H", 0), cc.gate("S", 1)], preps=("+", "1"))
    for s in range(4):
        t = cc.build_tau_target(c, dec, s)
        assert not [op for op in t.ops if op.tag == "twirl"]
        assert np.max(np.abs(probs(t) - probs(c))) < 1e-12


def test_tau_target_single_gate(dec_t):
    c = cc.Circuit(2, [cc.gate("H", 0), cc.unitary_gate(dec_t.gate, 0, 1, name="G")])
    for s in range(16):
        assert np.max(np.abs(probs(cc.build_tau_target(c, dec_t, s)) - probs(c))) < 1e-12


def test_tau_target_seed_sweep(dec_t):
    c = random_tau_circuit(dec_t, 4, 8, 17)
    ideal = probs(c)
    for s in range(100):
        assert np.max(np.abs(probs(cc.build_tau_target(c, dec_t, s)) - ideal)) < 1e-12


def test_tau_target_is_deterministic_per_seed(dec_t):
    c = random_tau_circuit(dec_t, 3, 6, 3)
    assert cc.dumps(cc.build_tau_target(c, dec_t, 5)) == cc.dumps(cc.build_tau_target(c, dec_t, 5))


def test_tau_generators_reject_foreign_gate(dec_t):
    c = cc.Circuit(2, [cc.gate("CNOT", 0, 1)])
    with pytest.raises(cc.CircuitError, match=r"ops\[0\]"):
        cc.build_tau_target(c, dec_t, 0)
    with pytest.raises(cc.CircuitError):
        cc.build_tau_trap(c, dec_t, 0)


def test_tau_trap_single_gate_without_h_layer(dec_t):
    c = cc.Circuit(2, [cc.unitary_gate(dec_t.gate, 0, 1, name="G")])
    found = False
    for s in range(20):
        trap, m = cc.build_tau_trap(c, dec_t, s)
        if not trap.meta["h_layer"]:
            found = True
            assert m == "00"
        assert probs(trap)[int(m, 2)] > 1 - 1e-12
    assert found


def test_tau_trap_swapped_roles_needs_one_delta(dec_random):
    # the shared middle wire leaves the first gate in the tau2 frame and
    # enters the second in the tau1 frame
    g = dec_random.gate
    c = cc.Circuit(3, [cc.unitary_gate(g, 0, 1, name="G"), cc.unitary_gate(g, 1, 2, name="G")],
                   meta={"decomposition": dec_random})
    for s in range(10):
        trap, m = cc.build_tau_trap(c, dec_random, s)
        gi = [i for i, op in enumerate(trap.ops) if op.name == "G"]
        between = trap.ops[gi[0] + 1:gi[1]]
        on_middle = [op for op in between if op.tag == "delta" and op.qubits == (1,)]
        assert [op.name for op in on_middle] == ["Delta"]
        assert probs(trap)[int(m, 2)] > 1 - 1e-12


@pytest.mark.parametrize("dec_name", ["dec_t", "dec_random"])
def test_tau_traps_are_deterministic(dec_name, request):
    dec = request.getfixturevalue(dec_name)
    rng = np.random.default_rng(7)
    for s in range(200):
        c = random_tau_circuit(dec, int(rng.integers(1, 5)), int(rng.integers(1, 8)), s)
        trap, m = cc.build_tau_trap(c, dec, s)
        assert abs(probs(trap)[int(m, 2)] - 1) < 1e-12
        assert trap.n_qubits == c.n_qubits


def test_tau_trap_and_target_share_skeleton(dec_t):
    for s in range(30):
        c = random_tau_circuit(dec_t, 4, 8, s)
        trap, _ = cc.build_tau_trap(c, dec_t, s)
        target = cc.build_tau_target(c, dec_t, s)
        assert trap.skeleton() == target.skeleton()


def test_tau_gate_counts_within_bound(dec_t):
    for s in range(50):
        c = random_tau_circuit(dec_t, 5, 8, s)
        assert len(cc.build_tau_target(c, dec_t, s).ops) <= cc.gate_count_bound("tau-target", c)
        assert len(cc.build_tau_trap(c, dec_t, s)[0].ops) <= cc.gate_count_bound("tau-trap", c)


# ---------------------------------------------------------------------------
# vanishing blocks and the XY protocol
# ---------------------------------------------------------------------------


def test_vanishing_block_examples():
    for t in (0.3, -1.2, 2.0):
        assert q.equal_up_to_phase(cc.build_vanishing_block(1, t, 4).unitary(), np.eye(4))
    assert q.equal_up_to_phase(cc.build_vanishing_block(0, 0.0, 4).unitary(), np.eye(4))
    for s in range(50):
        u = cc.build_vanishing_block(0, 0.7, s).unitary()
        assert q.equal_up_to_phase(u, expm(-0.7j * H_XY))


def test_vanishing_block_reversed_qubits():
    for strong in (False, True):
        b = cc.build_vanishing_block(0, 0.4, 3, strong, qubits=(1, 0))
        assert q.equal_up_to_phase(b.unitary(), expm(-0.4j * H_XY))


def test_vanishing_block_rejects_bad_j():
    with pytest.raises(ValueError):
        cc.build_vanishing_block(2, 0.1)


def test_xy_target_examples():
    c = cc.Circuit(2, [cc.gate("H", 0)], preps=("+", "1"))
    t = cc.build_xy_target(c, 0)
    assert not t.two_qubit_ops
    assert np.max(np.abs(probs(t) - probs(c))) < 1e-12
    c = cc.Circuit(2, [cc.xy(np.pi / 5, 0, 1)], preps=("+", "0"))
    for s in range(10):
        assert np.max(np.abs(probs(cc.build_xy_target(c, s)) - probs(c))) < 1e-12


@pytest.mark.parametrize("strong", [False, True])
def test_xy_target_seed_sweep(strong):
    for s in range(50):
        c = random_xy_circuit(4, 6, s)
        assert np.max(np.abs(probs(cc.build_xy_target(c, s, strong)) - probs(c))) < 1e-12


@pytest.mark.parametrize("strong", [False, True])
def test_xy_traps_return_all_zeros(strong):
    for s in range(100):
        c = random_xy_circuit(4, 6, s)
        trap, m = cc.build_xy_trap(c, s, strong)
        assert m == "0000"
        assert abs(probs(trap)[0] - 1) < 1e-12


def test_xy_trap_merges_added_gates():
    c = cc.Circuit(1, [cc.gate("T", 0)])
    names = set()
    for s in range(40):
        trap, _ = cc.build_xy_trap(c, s)
        head = [op.name for op in trap.ops if op.tag == "trap-layer"]
        names.update(head)
        # at most one merged gate next to preparation and one next to readout
        assert len(head) <= 2
    assert "ZH" in names and "HZ" in names


def test_xy_generators_reject_foreign_gate():
    c = cc.Circuit(2, [cc.gate("CNOT", 0, 1)])
    with pytest.raises(cc.CircuitError, match="not an XY"):
        cc.build_xy_target(c, 0)
    with pytest.raises(cc.CircuitError):
        cc.build_xy_trap(cc.Circuit(2, [cc.xy(0.2, 0, 1, s_xx=-1)]), 0)


@pytest.mark.parametrize("strong", [False, True])
def test_xy_trap_and_target_share_skeleton(strong):
    for s in range(30):
        c = random_xy_circuit(4, 8, s)
        trap, _ = cc.build_xy_trap(c, s, strong)
        target = cc.build_xy_target(c, s, strong)
        assert trap.skeleton()[1] == target.skeleton()[1]
        # sign variants may differ between draws; locations and angles may not
        strip = lambda sk: [(i, qs, t) for i, qs, _, t in sk[0]]
        assert strip(trap.skeleton()) == strip(target.skeleton())


def test_xy_gate_counts_within_bound():
    for s in range(50):
        c = random_xy_circuit(5, 8, s)
        assert len(cc.build_xy_target(c, s).ops) <= cc.gate_count_bound("xy-target", c)
        assert len(cc.build_xy_trap(c, s)[0].ops) <= cc.gate_count_bound("xy-trap", c)


def test_protocol_metadata_is_json_safe(dec_t):
    trap, _ = cc.build_xy_trap(random_xy_circuit(2, 3, 1), 1)
    json.dumps(cc.circuit_to_dict(trap))

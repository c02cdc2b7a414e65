"""Circuit representation, file format and the trap/target generators.

A :class:`Circuit` holds per-qubit preparations, a flat ordered list of
:class:`PlacedGate` and per-qubit measurements. Preparations are unitaries ``U``
standing for the state ``U|0>``; measurements are unitaries ``B`` meaning
"apply ``B`` then read out in the computational basis".

Generators for the tau protocol work in the frame where every qubit is
prepared in ``tau1^dag |0>`` and read out in the basis ``tau1^dag |b>``. In that
frame the tau factors of consecutive gates cancel, leaving only the Clifford
parts, which is what makes trap outcomes classically predictable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

from .qalg import (
    H,
    I2,
    SINGLE_QUBIT_GATES,
    TWO_QUBIT_GATES,
    PauliString,
    X,
    Z,
    all_pauli_strings,
    as_rng,
    dagger,
    equal_up_to_phase,
    is_unitary,
    xy_gate,
)
from .twirl import (
    PAULI_ORDER,
    TauDecomposition,
    strong_xy_twirl_instruction,
    tau_twirl_instruction,
    xi_signs,
)

TAGS = ("input", "twirl", "delta", "vanishing", "spam-twirl", "trap-layer")

PREP_LABELS: dict[str, np.ndarray] = {
    "0": I2,
    "1": X,
    "+": H,
    "-": H @ X,
}
MEASUREMENT_LABELS: dict[str, np.ndarray] = {
    "Z": I2,
    "X": H,
    "Y": H @ SINGLE_QUBIT_GATES["Sdg"],
}

# (C, C') per generator: output gate count <= C * input gate count + C' * qubits
GATE_COUNT_CONSTANTS: dict[str, tuple[int, int]] = {
    "tau-target": (5, 4),
    "tau-trap": (7, 8),
    "xy-target": (8, 4),
    "xy-trap": (8, 6),
}


class CircuitError(ValueError):
    """Invalid circuit content or file; the message names the offending field."""


# ---------------------------------------------------------------------------
# Gates and circuits
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlacedGate:
    name: str
    qubits: tuple[int, ...]
    matrix: np.ndarray
    tag: str = "input"
    params: dict = field(default_factory=dict)
    twirl: str | None = None  # twirl family of a dressed two-qubit gate

    def __post_init__(self):
        qs = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qs)
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if len(qs) not in (1, 2):
            raise CircuitError(f"gate {self.name}: expected 1 or 2 qubits, got {len(qs)}")
        if len(set(qs)) != len(qs):
            raise CircuitError(f"gate {self.name}: repeated qubit in {qs}")
        if m.shape != (2 ** len(qs),) * 2:
            raise CircuitError(f"gate {self.name}: matrix shape {m.shape} does not fit {len(qs)} qubit(s)")
        if not is_unitary(m):
            raise CircuitError(f"gate {self.name}: matrix is not unitary")
        if self.tag not in TAGS:
            raise CircuitError(f"gate {self.name}: unknown provenance tag {self.tag!r}")

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def with_tag(self, tag: str) -> "PlacedGate":
        return replace(self, tag=tag)


def gate(name: str, *qubits: int, tag: str = "input") -> PlacedGate:
    """Named standard gate, e.g. ``gate("H", 0)`` or ``gate("CNOT", 0, 1)``."""
    table = SINGLE_QUBIT_GATES if len(qubits) == 1 else TWO_QUBIT_GATES
    if name not in table:
        raise CircuitError(f"unknown {len(qubits)}-qubit gate {name!r}")
    return PlacedGate(name, qubits, table[name], tag)


def unitary_gate(matrix: np.ndarray, *qubits: int, name: str = "U", tag: str = "input", **kw) -> PlacedGate:
    return PlacedGate(name, qubits, matrix, tag, **kw)


def xy(t: float, a: int, b: int, tag: str = "input", s_xx: int = 1, s_yy: int = 1, twirl: str | None = None) -> PlacedGate:
    """``exp(-i t (s_xx XX + s_yy YY))`` on qubits ``(a, b)``."""
    params = {"t": float(t)}
    if (s_xx, s_yy) != (1, 1):
        params.update(s_xx=int(s_xx), s_yy=int(s_yy))
    return PlacedGate("XY", (a, b), xy_gate(t, s_xx, s_yy), tag, params, twirl)


def _resolve(label, table: dict, what: str) -> np.ndarray:
    if isinstance(label, str):
        if label not in table:
            raise CircuitError(f"unknown {what} label {label!r}")
        return table[label]
    m = np.asarray(label, dtype=complex)
    if m.shape != (2, 2) or not is_unitary(m):
        raise CircuitError(f"{what} must be a label or a 2x2 unitary")
    return m


def prep_unitary(label) -> np.ndarray:
    return _resolve(label, PREP_LABELS, "preparation")


def measurement_unitary(label) -> np.ndarray:
    return _resolve(label, MEASUREMENT_LABELS, "measurement")


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    ops: tuple[PlacedGate, ...] = ()
    preps: tuple = ()
    measurements: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_qubits
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise CircuitError("qubits: must be a positive integer")
        preps = tuple(self.preps) or ("0",) * n
        meas = tuple(self.measurements) or ("Z",) * n
        if len(preps) != n:
            raise CircuitError(f"preps: expected {n} entries, got {len(preps)}")
        if len(meas) != n:
            raise CircuitError(f"measurements: expected {n} entries, got {len(meas)}")
        for i, p in enumerate(preps):
            try:
                prep_unitary(p)
            except CircuitError as exc:
                raise CircuitError(f"preps[{i}]: {exc}") from None
        for i, m in enumerate(meas):
            try:
                measurement_unitary(m)
            except CircuitError as exc:
                raise CircuitError(f"measurements[{i}]: {exc}") from None
        for i, op in enumerate(self.ops):
            if any(q >= n or q < 0 for q in op.qubits):
                raise CircuitError(f"ops[{i}].qubits: index out of range for {n} qubits")
        object.__setattr__(self, "preps", preps)
        object.__setattr__(self, "measurements", meas)
        object.__setattr__(self, "ops", tuple(self.ops))

    def __len__(self) -> int:
        return len(self.ops)

    @property
    def two_qubit_ops(self) -> list[PlacedGate]:
        return [op for op in self.ops if op.is_two_qubit]

    def prep_unitaries(self) -> list[np.ndarray]:
        return [prep_unitary(p) for p in self.preps]

    def measurement_unitaries(self) -> list[np.ndarray]:
        return [measurement_unitary(m) for m in self.measurements]

    def with_ops(self, ops: Iterable[PlacedGate], **changes) -> "Circuit":
        return replace(self, ops=tuple(ops), **changes)

    def segments(self) -> list[tuple[int, ...]]:
        """Per op, the segment index of each of its qubits.

        Segment ``s`` of a wire is the stretch after its ``s``-th two-qubit gate
        (segment 0 starts at preparation). A two-qubit gate is reported with
        the segment it closes.
        """
        seg = [0] * self.n_qubits
        out = []
        for op in self.ops:
            out.append(tuple(seg[q] for q in op.qubits))
            if op.is_two_qubit:
                for q in op.qubits:
                    seg[q] += 1
        return out

    def skeleton(self) -> tuple[tuple, frozenset]:
        """Two-qubit gate sequence (ordinal, qubits, kind, t) and the set of
        ``(qubit, segment)`` slots holding at least one single-qubit gate."""
        twos = []
        slots = set()
        for op, segs in zip(self.ops, self.segments()):
            if op.is_two_qubit:
                twos.append((len(twos), op.qubits, op.name, op.params.get("t")))
            else:
                slots.add((op.qubits[0], segs[0]))
        return tuple(twos), frozenset(slots)

    def moments(self) -> list[list[PlacedGate]]:
        """Greedy left-aligned layering of the ops."""
        depth = [0] * self.n_qubits
        layers: list[list[PlacedGate]] = []
        for op in self.ops:
            d = max(depth[q] for q in op.qubits)
            if d == len(layers):
                layers.append([])
            layers[d].append(op)
            for q in op.qubits:
                depth[q] = d + 1
        return layers


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------


def _encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(data, where: str) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise CircuitError(f"{where}: matrix entries must be [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[-1] != 2 or arr.shape[0] != arr.shape[1]:
        raise CircuitError(f"{where}: expected a square matrix of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _encode_label(x):
    return x if isinstance(x, str) else _encode_matrix(x)


def _decode_label(x, where: str):
    return x if isinstance(x, str) else _decode_matrix(x, where)


def encode_decomposition(dec: TauDecomposition) -> dict:
    return {"tau1": _encode_matrix(dec.tau1), "tau2": _encode_matrix(dec.tau2), "m": _encode_matrix(dec.m)}


def decode_decomposition(data: dict, where: str = "tau_decomposition") -> TauDecomposition:
    try:
        return TauDecomposition(
            _decode_matrix(data["tau1"], f"{where}.tau1"),
            _decode_matrix(data["tau2"], f"{where}.tau2"),
            _decode_matrix(data["m"], f"{where}.m"),
        )
    except KeyError as exc:
        raise CircuitError(f"{where}: missing field {exc}") from None
    except CircuitError:
        raise
    except ValueError as exc:
        raise CircuitError(f"{where}: {exc}") from None


def _is_standard(op: PlacedGate) -> bool:
    table = SINGLE_QUBIT_GATES if len(op.qubits) == 1 else TWO_QUBIT_GATES
    return op.name in table and np.array_equal(op.matrix, table[op.name])


def circuit_to_dict(c: Circuit) -> dict:
    ops = []
    for op in c.ops:
        rec: dict[str, Any] = {"kind": op.name, "qubits": list(op.qubits)}
        if op.params:
            rec["params"] = dict(op.params)
        if op.name != "XY" and not _is_standard(op):
            rec["matrix"] = _encode_matrix(op.matrix)
        if op.tag != "input":
            rec["tag"] = op.tag
        if op.twirl:
            rec["twirl"] = op.twirl
        ops.append(rec)
    out: dict[str, Any] = {
        "qubits": c.n_qubits,
        "preps": [_encode_label(p) for p in c.preps],
        "ops": ops,
        "measurements": [_encode_label(m) for m in c.measurements],
    }
    meta = dict(c.meta)
    dec = meta.pop("decomposition", None)
    if dec is not None:
        out["tau_decomposition"] = encode_decomposition(dec)
    if meta:
        out["meta"] = meta
    return out


def circuit_from_dict(data: dict) -> Circuit:
    if not isinstance(data, dict):
        raise CircuitError("top level: expected an object")
    for key in ("qubits", "ops"):
        if key not in data:
            raise CircuitError(f"{key}: missing required field")
    n = data["qubits"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise CircuitError("qubits: must be a positive integer")
    preps = tuple(_decode_label(p, f"preps[{i}]") for i, p in enumerate(data.get("preps", [])))
    meas = tuple(
        _decode_label(m, f"measurements[{i}]") for i, m in enumerate(data.get("measurements", []))
    )
    ops = []
    if not isinstance(data["ops"], list):
        raise CircuitError("ops: expected a list")
    for i, rec in enumerate(data["ops"]):
        where = f"ops[{i}]"
        if not isinstance(rec, dict):
            raise CircuitError(f"{where}: expected an object")
        if "kind" not in rec:
            raise CircuitError(f"{where}.kind: missing required field")
        if "qubits" not in rec or not isinstance(rec["qubits"], list):
            raise CircuitError(f"{where}.qubits: expected a list of qubit indices")
        kind = rec["kind"]
        qubits = rec["qubits"]
        if not all(isinstance(q, int) and not isinstance(q, bool) for q in qubits):
            raise CircuitError(f"{where}.qubits: indices must be integers")
        params = dict(rec.get("params", {}))
        tag = rec.get("tag", "input")
        twirl = rec.get("twirl")
        try:
            if kind == "XY":
                if "t" not in params:
                    raise CircuitError(f"{where}.params.t: XY gates need an angle")
                if len(qubits) != 2:
                    raise CircuitError(f"{where}.qubits: XY acts on two qubits")
                op = PlacedGate(
                    "XY", qubits,
                    xy_gate(params["t"], params.get("s_xx", 1), params.get("s_yy", 1)),
                    tag, params, twirl,
                )
            elif "matrix" in rec:
                op = PlacedGate(kind, qubits, _decode_matrix(rec["matrix"], f"{where}.matrix"), tag, params, twirl)
            else:
                table = SINGLE_QUBIT_GATES if len(qubits) == 1 else TWO_QUBIT_GATES
                if kind not in table:
                    raise CircuitError(f"{where}.kind: unknown gate {kind!r} (give a matrix)")
                op = PlacedGate(kind, qubits, table[kind], tag, params, twirl)
        except CircuitError as exc:
            msg = str(exc)
            raise CircuitError(msg if msg.startswith(where) else f"{where}: {msg}") from None
        ops.append(op)
    meta = dict(data.get("meta", {}))
    if "tau_decomposition" in data:
        meta["decomposition"] = decode_decomposition(data["tau_decomposition"])
    return Circuit(n, tuple(ops), preps, meas, meta)


def dumps(c: Circuit) -> str:
    return json.dumps(circuit_to_dict(c), indent=1) + "\n"


def loads(text: str) -> Circuit:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitError(f"line {exc.lineno}: {exc.msg}") from None
    return circuit_from_dict(data)


def load_circuit(path) -> Circuit:
    with open(path) as fh:
        text = fh.read()
    try:
        return loads(text)
    except CircuitError as exc:
        raise CircuitError(f"{path}: {exc}") from None


def save_circuit(c: Circuit, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(c))


# ---------------------------------------------------------------------------
# Noiseless statevector simulation
# ---------------------------------------------------------------------------


def _apply(psi: np.ndarray, u: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    k = len(qubits)
    t = np.tensordot(u.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(t, list(range(k)), list(qubits))


def statevector_probabilities(c: Circuit) -> np.ndarray:
    """Outcome probabilities indexed by the integer whose bits (qubit 0 most
    significant) give the outcome."""
    n = c.n_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1
    for q, u in enumerate(c.prep_unitaries()):
        psi = _apply(psi, u, [q])
    pending: dict[int, np.ndarray] = {}
    for op in c.ops:
        if op.is_two_qubit:
            for q in op.qubits:
                if q in pending:
                    psi = _apply(psi, pending.pop(q), [q])
            psi = _apply(psi, op.matrix, op.qubits)
        else:
            q = op.qubits[0]
            pending[q] = op.matrix @ pending[q] if q in pending else op.matrix
    for q, b in enumerate(c.measurement_unitaries()):
        psi = _apply(psi, b @ pending.pop(q) if q in pending else b, [q])
    return np.abs(psi.reshape(-1)) ** 2


def probabilities_to_table(probs: np.ndarray, n: int, cutoff: float = 0.0) -> dict[str, float]:
    return {format(i, f"0{n}b"): float(p) for i, p in enumerate(probs) if p > cutoff}


def _deterministic_outcome(c: Circuit) -> str:
    probs = statevector_probabilities(c)
    best = int(np.argmax(probs))
    if abs(probs[best] - 1) > 1e-9:
        raise RuntimeError(f"trap is not deterministic (max probability {probs[best]:.12f})")
    return format(best, f"0{c.n_qubits}b")


# ---------------------------------------------------------------------------
# Standard form
# ---------------------------------------------------------------------------


def _label_name(label) -> str:
    return f"prep_{label}" if isinstance(label, str) else "U"


def standard_form(c: Circuit) -> Circuit:
    """Move non-trivial preparations and measurement bases into explicit gates."""
    head = []
    tail = []
    for q, p in enumerate(c.preps):
        if not (isinstance(p, str) and p == "0"):
            head.append(unitary_gate(prep_unitary(p), q, name="U"))
    for q, m in enumerate(c.measurements):
        if not (isinstance(m, str) and m == "Z"):
            tail.append(unitary_gate(measurement_unitary(m), q, name="U"))
    if not head and not tail:
        return c
    n = c.n_qubits
    return Circuit(n, tuple(head) + c.ops + tuple(tail), ("0",) * n, ("Z",) * n, dict(c.meta))


def _spam_gates(c: Circuit) -> tuple[list[np.ndarray], list[np.ndarray]]:
    return c.prep_unitaries(), c.measurement_unitaries()


# ---------------------------------------------------------------------------
# Tau protocol
# ---------------------------------------------------------------------------


def _check_tau_gates(c: Circuit, dec: TauDecomposition) -> None:
    for i, op in enumerate(c.ops):
        if op.is_two_qubit and not equal_up_to_phase(op.matrix, dec.gate):
            raise CircuitError(
                f"ops[{i}]: two-qubit gate {op.name} is not the decomposed gate of this protocol"
            )


def _tau_gate_op(op: PlacedGate, dec: TauDecomposition, tag: str) -> PlacedGate:
    return PlacedGate("G", op.qubits, dec.gate, tag, dict(op.params), "tau")


def _dressed_tau(op: PlacedGate, dec: TauDecomposition, rng, tag: str = "input") -> list[PlacedGate]:
    instr = tau_twirl_instruction(dec, rng)
    a, b = op.qubits
    return [
        unitary_gate(instr.right[0], a, name="twirl", tag="twirl"),
        unitary_gate(instr.right[1], b, name="twirl", tag="twirl"),
        _tau_gate_op(op, dec, tag),
        unitary_gate(instr.left[0], a, name="twirl", tag="twirl"),
        unitary_gate(instr.left[1], b, name="twirl", tag="twirl"),
    ]


def build_tau_target(c: Circuit, dec: TauDecomposition, seed=None) -> Circuit:
    """Target circuit: same ideal statistics as ``c``, every gate twirled.

    Each qubit is prepared in ``tau1^dag|0>`` and followed by a gate mapping
    that state to the input preparation; readout is in the ``tau1^dag|b>``
    basis preceded by a gate mapping the input basis onto it. One coin decides
    whether ``tau1^dag Z tau1`` layers sit next to preparation and readout.
    """
    _check_tau_gates(c, dec)
    rng = as_rng(seed)
    n = c.n_qubits
    preps, meas = _spam_gates(c)
    body: list[PlacedGate] = []
    for op in c.ops:
        body.extend(_dressed_tau(op, dec, rng) if op.is_two_qubit else [op])
    coin = bool(rng.random() < 0.5)
    t1 = dec.tau1
    z_layer = dagger(t1) @ Z @ t1
    head, tail = [], []
    for q in range(n):
        if coin:
            head.append(unitary_gate(z_layer, q, name="spam-Z", tag="spam-twirl"))
        head.append(unitary_gate(preps[q] @ t1, q, name="prep-map"))
    for q in range(n):
        tail.append(unitary_gate(dagger(t1) @ meas[q], q, name="meas-map"))
        if coin:
            tail.append(unitary_gate(z_layer, q, name="spam-Z", tag="spam-twirl"))
    meta = {"protocol": "tau", "role": "target", "spam_coin": coin, "decomposition": dec}
    return Circuit(n, tuple(head + body + tail), (dagger(t1),) * n, (t1,) * n, meta)


def build_tau_trap(c: Circuit, dec: TauDecomposition, seed=None) -> tuple[Circuit, str]:
    """Trap circuit with deterministic error-free outcome.

    Input single-qubit gates (and the preparation/readout maps a target would
    carry) become identity markers, so every tau factor cancels against its
    neighbour once ``Delta = tau1^dag tau2`` or its inverse is inserted wherever
    a wire passes from one tau frame to the other. An optional
    ``tau1^dag H tau1`` layer switches the trap between the ``|0>`` and ``|+>``
    frame, both fixed by ``M``.
    """
    _check_tau_gates(c, dec)
    rng = as_rng(seed)
    n = c.n_qubits
    delta = dec.delta
    delta_dag = dagger(delta)

    dressed = [(_dressed_tau(op, dec, rng) if op.is_two_qubit else None) for op in c.ops]
    z_coin = bool(rng.random() < 0.5)
    h_coin = bool(rng.random() < 0.5)
    t1 = dec.tau1
    z_layer = dagger(t1) @ Z @ t1
    h_layer = dagger(t1) @ H @ t1

    ops: list[PlacedGate] = []
    for q in range(n):
        ops.append(unitary_gate(I2, q, name="I"))
        if z_coin:
            ops.append(unitary_gate(z_layer, q, name="spam-Z", tag="spam-twirl"))
        if h_coin:
            ops.append(unitary_gate(h_layer, q, name="H-layer", tag="trap-layer"))

    # tau frame each wire presents: 1 after preparation, then the role of the
    # last gate touching it (first qubit of a gate carries tau1, second tau2).
    # The preparation seam is handled by the same rule.
    current = [1] * n
    for op, block in zip(c.ops, dressed):
        if block is None:
            ops.append(unitary_gate(I2, op.qubits[0], name="I"))
            continue
        for q, r in zip(op.qubits, (1, 2)):
            if current[q] != r:
                # Delta^dag moves a wire from the tau1 frame to tau2, Delta back
                ops.append(
                    unitary_gate(delta_dag if r == 2 else delta, q,
                                 name="Delta_dag" if r == 2 else "Delta", tag="delta")
                )
                current[q] = r
        ops.extend(block)

    for q in range(n):
        if current[q] == 2:
            ops.append(unitary_gate(delta, q, name="Delta", tag="delta"))
        if h_coin:
            ops.append(unitary_gate(h_layer, q, name="H-layer", tag="trap-layer"))
        if z_coin:
            ops.append(unitary_gate(z_layer, q, name="spam-Z", tag="spam-twirl"))
        ops.append(unitary_gate(I2, q, name="I"))

    meta = {
        "protocol": "tau", "role": "trap", "spam_coin": z_coin, "h_layer": h_coin,
        "decomposition": dec,
    }
    trap = Circuit(n, tuple(ops), (dagger(t1),) * n, (t1,) * n, meta)
    return trap, _deterministic_outcome(trap)


# ---------------------------------------------------------------------------
# XY protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VanishingBlock:
    """Two half-angle XY gates with Pauli dressings; ``j=0`` acts as
    ``exp(-i t H)`` and ``j=1`` as the identity."""

    j: int
    t: float
    p1: PauliString
    p2: PauliString
    qubits: tuple[int, int] = (0, 1)
    strong: bool = False

    def ops(self, gate_tag: str = "vanishing") -> list[PlacedGate]:
        a, b = self.qubits
        zj = Z if self.j else I2
        p1a, p1b = self.p1.factors()
        p2a, p2b = self.p2.factors()
        family = "xy-strong" if self.strong else "xy"

        def half(p: PauliString) -> PlacedGate:
            s_xx, s_yy = xi_signs(p) if self.strong else (1, 1)
            return xy(self.t / 2, a, b, tag=gate_tag, s_xx=s_xx, s_yy=s_yy, twirl=family)

        def slot(m: np.ndarray, q: int) -> PlacedGate:
            return unitary_gate(m, q, name="U", tag="vanishing")

        return [
            slot(p1a @ zj, a),
            slot(p1b, b),
            half(self.p1),
            slot(p2a @ zj @ p1a, a),
            slot(p2b @ p1b, b),
            half(self.p2),
            slot(p2a, a),
            slot(p2b, b),
        ]

    def unitary(self) -> np.ndarray:
        u = np.eye(4, dtype=complex)
        a, b = self.qubits
        order = (0, 1) if a < b else (1, 0)
        for op in self.ops():
            if op.is_two_qubit:
                m = op.matrix if order == (0, 1) else _swap_roles(op.matrix)
            else:
                pos = order[(a, b).index(op.qubits[0])]
                m = np.kron(op.matrix, I2) if pos == 0 else np.kron(I2, op.matrix)
            u = m @ u
        return u


def _swap_roles(m: np.ndarray) -> np.ndarray:
    from .qalg import SWAP

    return SWAP @ m @ SWAP


def build_vanishing_block(j: int, t: float, seed=None, strong: bool = False, qubits=(0, 1)) -> VanishingBlock:
    if j not in (0, 1):
        raise ValueError("j must be 0 or 1")
    rng = as_rng(seed)
    if strong:
        paulis = all_pauli_strings(2)
        p1 = paulis[rng.integers(16)]
        p2 = paulis[rng.integers(16)]
    else:
        p1 = PauliString(PAULI_ORDER[rng.integers(4)] * 2)
        p2 = PauliString(PAULI_ORDER[rng.integers(4)] * 2)
    return VanishingBlock(j, float(t), p1, p2, tuple(qubits), strong)


def _check_xy_gates(c: Circuit) -> None:
    for i, op in enumerate(c.ops):
        if op.is_two_qubit and (op.name != "XY" or op.params.get("s_xx", 1) != 1 or op.params.get("s_yy", 1) != 1):
            raise CircuitError(f"ops[{i}]: two-qubit gate {op.name} is not an XY(t) gate")


def _slot_first_last(c: Circuit) -> tuple[set[int], set[int]]:
    """Qubits whose first (resp. last) segment already holds a single-qubit op."""
    first, last = set(), set()
    seen_two = set()
    for op in c.ops:
        if op.is_two_qubit:
            seen_two.update(op.qubits)
        elif op.qubits[0] not in seen_two:
            first.add(op.qubits[0])
    seen_two = set()
    for op in reversed(c.ops):
        if op.is_two_qubit:
            seen_two.update(op.qubits)
        elif op.qubits[0] not in seen_two:
            last.add(op.qubits[0])
    return first, last


def build_xy_target(c: Circuit, seed=None, strong: bool = False) -> Circuit:
    """Standard form, then every XY(t) becomes a 0-vanishing block.

    Identity markers pad the preparation and readout slots so targets and
    traps share the same single-qubit slot pattern.
    """
    _check_xy_gates(c)
    rng = as_rng(seed)
    sf = standard_form(c)
    n = c.n_qubits
    ops: list[PlacedGate] = [unitary_gate(I2, q, name="I") for q in range(n)]
    for op in sf.ops:
        if op.is_two_qubit:
            block = build_vanishing_block(0, op.params["t"], rng, strong, op.qubits)
            ops.extend(block.ops())
        else:
            ops.append(op)
    ops.extend(unitary_gate(I2, q, name="I") for q in range(n))
    meta = {"protocol": "xy-strong" if strong else "xy", "role": "target"}
    return Circuit(n, tuple(ops), ("0",) * n, ("Z",) * n, meta)


def _merge_spam(names_mats: list[tuple[str, np.ndarray]], q: int) -> PlacedGate | None:
    if not names_mats:
        return None
    m = I2
    for _, u in names_mats:
        m = u @ m
    return unitary_gate(m, q, name="".join(nm for nm, _ in names_mats), tag="trap-layer")


def build_xy_trap(c: Circuit, seed=None, strong: bool = False) -> tuple[Circuit, str]:
    """Trap: 1-vanishing blocks, random Hadamard layer and random Z gates.

    The error-free output is all zeros.
    """
    _check_xy_gates(c)
    rng = as_rng(seed)
    sf = standard_form(c)
    n = c.n_qubits
    body: list[PlacedGate] = []
    for op in sf.ops:
        if op.is_two_qubit:
            body.extend(build_vanishing_block(1, op.params["t"], rng, strong, op.qubits).ops())
        else:
            body.append(unitary_gate(I2, op.qubits[0], name="I"))
    h_coin = bool(rng.random() < 0.5)
    z_meas = [bool(rng.random() < 0.5) for _ in range(n)]
    z_prep = [bool(rng.random() < 0.5) for _ in range(n)]

    head, tail = [], []
    for q in range(n):
        head.append(unitary_gate(I2, q, name="I"))
        seq = ([("Z", Z)] if z_prep[q] else []) + ([("H", H)] if h_coin else [])
        merged = _merge_spam(seq, q)
        if merged is not None:
            head.append(merged)
    for q in range(n):
        seq = ([("H", H)] if h_coin else []) + ([("Z", Z)] if z_meas[q] else [])
        merged = _merge_spam(seq, q)
        if merged is not None:
            tail.append(merged)
        tail.append(unitary_gate(I2, q, name="I"))
    meta = {
        "protocol": "xy-strong" if strong else "xy", "role": "trap", "h_layer": h_coin,
        "z_prep": z_prep, "z_meas": z_meas,
    }
    trap = Circuit(n, tuple(head + body + tail), ("0",) * n, ("Z",) * n, meta)
    return trap, "0" * n


def gate_count_bound(kind: str, c: Circuit) -> int:
    a, b = GATE_COUNT_CONSTANTS[kind]
    return a * len(c.ops) + b * c.n_qubits

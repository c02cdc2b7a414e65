"""Exact density-matrix execution with location-keyed CPTP noise.

Noise sites
-----------
``prep``              after the preparation of qubit q (index 0)
``two_qubit_gate``    after the k-th two-qubit gate of the circuit (index k)
``single_qubit_slot`` at the start of segment s of wire q, i.e. right after the
                      preparation noise (s = 0) or after the noise of the wire's
                      s-th two-qubit gate
``measurement``       immediately before the readout of qubit q (index 0)

Sites are addressed by position only. Which single-qubit gates fill a slot
never enters the lookup, so noise cannot depend on them.

Placing slot noise at the start of a segment keeps it adjacent to the preceding
gate's noise. Twirl averaging can then fold both into one channel and replace it
with its twirl, which makes the averaged distribution exact.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .circuits import Circuit, PlacedGate, unitary_gate
from .qalg import (
    Channel,
    PauliString,
    all_pauli_letters,
    amplitude_damping,
    as_rng,
    dephasing,
    depolarizing,
    pauli_channel,
    superoperator,
)
from .twirl import (
    TauDecomposition,
    TwirlAssumptionError,
    extract_mixture,
    mixture_basis,
    twirl_group,
    twirl_instructions,
)

SITE_KINDS = ("prep", "two_qubit_gate", "single_qubit_slot", "measurement")


class NoiseModelError(ValueError):
    """Invalid noise specification; the message names the offending site."""


@dataclass(frozen=True)
class NoiseSite:
    kind: str
    index: int
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in SITE_KINDS:
            raise NoiseModelError(f"unknown site kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 2 if self.kind == "two_qubit_gate" else 1
        if len(self.qubits) != arity:
            raise NoiseModelError(f"{self}: expected {arity} qubit(s)")

    def __str__(self) -> str:
        return f"{self.kind}[{self.index}]@{self.qubits}"


def circuit_sites(c: Circuit) -> list[NoiseSite]:
    """All noise sites of ``c`` in execution order."""
    n = c.n_qubits
    out = [NoiseSite("prep", 0, (q,)) for q in range(n)]
    out += [NoiseSite("single_qubit_slot", 0, (q,)) for q in range(n)]
    seg = [0] * n
    k = 0
    for op in c.ops:
        if op.is_two_qubit:
            out.append(NoiseSite("two_qubit_gate", k, op.qubits))
            k += 1
            for q in op.qubits:
                seg[q] += 1
                out.append(NoiseSite("single_qubit_slot", seg[q], (q,)))
    out += [NoiseSite("measurement", 0, (q,)) for q in range(n)]
    return out


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Channel registry keyed by :class:`NoiseSite`.

    ``defaults`` gives a channel per site kind for sites without an explicit
    entry. ``variant_channels`` lets an XY sign variant at a site see its own
    channel; it is rejected when ``n3`` declares that all variants share the
    site's channel. ``n3_groups`` lists sites that must hold one shared
    channel object.
    """

    sites: Mapping[NoiseSite, Channel] = field(default_factory=dict)
    defaults: Mapping[str, Channel] = field(default_factory=dict)
    n3: bool = False
    variant_channels: Mapping[tuple[NoiseSite, tuple[int, int]], Channel] = field(default_factory=dict)
    n3_groups: tuple[tuple[NoiseSite, ...], ...] = ()

    def __post_init__(self):
        for kind, ch in self.defaults.items():
            if kind not in SITE_KINDS:
                raise NoiseModelError(f"defaults.{kind}: unknown site kind")
            arity = 2 if kind == "two_qubit_gate" else 1
            if ch.dim_in != 2**arity:
                raise NoiseModelError(f"defaults.{kind}: channel acts on {ch.n_qubits} qubit(s), site on {arity}")
        for site, ch in self.sites.items():
            if ch.dim_in != 2 ** len(site.qubits) or ch.dim_out != ch.dim_in:
                raise NoiseModelError(f"{site}: channel dimension {ch.dim_in} does not match the site")
        if self.n3 and self.variant_channels:
            raise NoiseModelError("variant-specific channels contradict the shared-variant (n3) declaration")
        for (site, _), ch in self.variant_channels.items():
            if site.kind != "two_qubit_gate" or ch.dim_in != 4:
                raise NoiseModelError(f"{site}: variant channels must be two-qubit gate channels")
        for i, group in enumerate(self.n3_groups):
            chans = [self.channel(s) for s in group]
            if any(ch is not chans[0] for ch in chans):
                raise NoiseModelError(f"n3_groups[{i}]: sites do not share one channel")

    def channel(self, site: NoiseSite, variant: tuple[int, int] = (1, 1)) -> Channel | None:
        """Channel at ``site`` (None means noiseless)."""
        if variant != (1, 1) and (site, variant) in self.variant_channels:
            return self.variant_channels[(site, variant)]
        if site in self.sites:
            return self.sites[site]
        return self.defaults.get(site.kind)

    def slot_extra(self, site: NoiseSite, ops: Sequence[PlacedGate]) -> Channel | None:
        """Hook for gate-dependent slot noise; the base model has none."""
        return None

    def validate_for(self, c: Circuit) -> None:
        present = set(circuit_sites(c))
        for site in list(self.sites) + [s for s, _ in self.variant_channels]:
            if site not in present:
                raise NoiseModelError(f"{site}: no such site in the circuit (skeleton mismatch)")

    def is_noiseless(self) -> bool:
        chans = list(self.sites.values()) + list(self.defaults.values()) + list(self.variant_channels.values())
        return all(ch.is_identity() for ch in chans)

    def with_sites(self, updates: Mapping[NoiseSite, Channel]) -> "NoiseModel":
        merged = dict(self.sites)
        merged.update(updates)
        return replace(self, sites=merged)


@dataclass(frozen=True, eq=False)
class GateDependentNoiseModel(NoiseModel):
    """Deliberately breaks slot independence: each single-qubit gate name in a
    slot adds its own channel. Used only to study how much such dependence
    moves the output."""

    dependence: Mapping[str, Channel] = field(default_factory=dict)

    def slot_extra(self, site: NoiseSite, ops: Sequence[PlacedGate]) -> Channel | None:
        out = None
        for op in ops:
            ch = self.dependence.get(op.name)
            if ch is not None:
                out = ch if out is None else out.compose(ch)
        return out


NOISELESS = NoiseModel()


# ---------------------------------------------------------------------------
# Density-matrix engine
# ---------------------------------------------------------------------------


def _unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, np.conj(u))


class _Density:
    def __init__(self, n: int, strict: bool = False):
        self.n = n
        self.strict = strict
        rho = np.zeros((2,) * (2 * n), dtype=complex)
        rho[(0,) * (2 * n)] = 1
        self.rho = rho

    def apply(self, sop: np.ndarray, qubits: Sequence[int]) -> None:
        k = len(qubits)
        axes = list(qubits) + [self.n + q for q in qubits]
        t = np.tensordot(sop.reshape((2,) * (4 * k)), self.rho, axes=(list(range(2 * k, 4 * k)), axes))
        self.rho = np.moveaxis(t, list(range(2 * k)), axes)
        if self.strict:
            self.check_state()

    def check_state(self) -> None:
        d = 2**self.n
        m = self.rho.reshape(d, d)
        tr = np.trace(m)
        if abs(tr - 1) > 1e-9:
            raise RuntimeError(f"trace drifted to {tr}")
        low = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
        if low < -1e-8:
            raise RuntimeError(f"density matrix lost positivity (eigenvalue {low:.3e})")

    def unitary(self, u: np.ndarray, qubits: Sequence[int]) -> None:
        k = len(qubits)
        ut = u.reshape((2,) * (2 * k))
        for m, offset in ((ut, 0), (np.conj(ut), self.n)):
            axes = [offset + q for q in qubits]
            t = np.tensordot(m, self.rho, axes=(list(range(k, 2 * k)), axes))
            self.rho = np.moveaxis(t, list(range(k)), axes)
        if self.strict:
            self.check_state()

    def probabilities(self) -> np.ndarray:
        d = 2**self.n
        return np.real(np.diagonal(self.rho.reshape(d, d))).copy()

    def trace(self) -> complex:
        d = 2**self.n
        return np.trace(self.rho.reshape(d, d))


def _twirled_superop(sop: np.ndarray, group: Sequence[np.ndarray]) -> np.ndarray:
    acc = np.zeros_like(sop)
    for g in group:
        s = _unitary_superop(g)
        acc += s @ sop @ s.conj().T
    return acc / len(group)


def _variant(op: PlacedGate) -> tuple[int, int]:
    return int(op.params.get("s_xx", 1)), int(op.params.get("s_yy", 1))


@dataclass(frozen=True)
class ExecutionResult:
    distribution: dict[str, float]
    samples: list[str] | None = None
    transcript: tuple = ()


def _group_for(op: PlacedGate, c: Circuit) -> tuple[np.ndarray, ...]:
    dec = c.meta.get("decomposition") if op.twirl == "tau" else None
    return twirl_group(op.twirl, dec)


def _run(
    c: Circuit, nm: NoiseModel, twirl_average: bool, check: bool, strict: bool = False
) -> tuple[np.ndarray, list]:
    n = c.n_qubits
    sim = _Density(n, strict)
    transcript: list[tuple[str, str]] = []

    def noise(site: NoiseSite, variant=(1, 1)) -> np.ndarray | None:
        ch = nm.channel(site, variant)
        if ch is None or ch.is_identity():
            return None
        transcript.append((str(site), ch.label))
        return ch.superop

    for q, u in enumerate(c.prep_unitaries()):
        sim.unitary(u, [q])
        for site in (NoiseSite("prep", 0, (q,)), NoiseSite("single_qubit_slot", 0, (q,))):
            s = noise(site)
            if s is not None:
                sim.apply(s, [q])

    pending = [None] * n
    slot_ops: list[list[PlacedGate]] = [[] for _ in range(n)]
    seg = [0] * n

    def flush(q: int) -> np.ndarray | None:
        """Superoperator of the wire's pending slot content, or None."""
        sop = None if pending[q] is None else _unitary_superop(pending[q])
        pending[q] = None
        extra = nm.slot_extra(NoiseSite("single_qubit_slot", seg[q], (q,)), slot_ops[q])
        if extra is not None:
            transcript.append((f"single_qubit_slot[{seg[q]}]@({q},)", "gate-dependent"))
            sop = extra.superop if sop is None else extra.superop @ sop
        slot_ops[q] = []
        return sop

    def flush_alone(q: int) -> None:
        sop = flush(q)
        if sop is not None:
            sim.apply(sop, [q])

    eye4 = np.eye(4, dtype=complex)
    k = 0
    for op in c.ops:
        if not op.is_two_qubit:
            q = op.qubits[0]
            pending[q] = op.matrix if pending[q] is None else op.matrix @ pending[q]
            slot_ops[q].append(op)
            continue
        a, b = op.qubits
        # one fused superoperator per two-qubit gate: slot content, gate, noise
        fa, fb = flush(a), flush(b)
        total = _unitary_superop(op.matrix)
        if fa is not None or fb is not None:
            total = total @ _local_pair(eye4 if fa is None else fa, eye4 if fb is None else fb)
        gate_site = NoiseSite("two_qubit_gate", k, (a, b))
        slot_a = NoiseSite("single_qubit_slot", seg[a] + 1, (a,))
        slot_b = NoiseSite("single_qubit_slot", seg[b] + 1, (b,))
        g = noise(gate_site, _variant(op))
        sa, sb = noise(slot_a), noise(slot_b)
        after = g
        if sa is not None or sb is not None:
            pair = _local_pair(eye4 if sa is None else sa, eye4 if sb is None else sb)
            after = pair if after is None else pair @ after
        if twirl_average and op.twirl and after is not None:
            after = _twirled_superop(after, _group_for(op, c))
        if after is not None:
            total = after @ total
        sim.apply(total, [a, b])
        seg[a] += 1
        seg[b] += 1
        k += 1

    for q in range(n):
        flush_alone(q)
    for q, bm in enumerate(c.measurement_unitaries()):
        s = noise(NoiseSite("measurement", 0, (q,)))
        if s is not None:
            sim.apply(s, [q])
        sim.unitary(bm, [q])
    if check:
        tr = sim.trace()
        if abs(tr - 1) > 1e-9:
            raise RuntimeError(f"trace drifted to {tr}")
    probs = sim.probabilities()
    return np.clip(probs, 0.0, None), transcript


def _local_pair(sa: np.ndarray, sb: np.ndarray) -> np.ndarray:
    """Superoperator of ``A (x) B`` from single-qubit superoperators."""
    # sop[(ra rb ca cb), (ra' rb' ca' cb')] = sa[(ra ca),(ra' ca')] sb[(rb cb),(rb' cb')]
    t = np.einsum("ikjl,mnop->imknjolp", sa.reshape(2, 2, 2, 2), sb.reshape(2, 2, 2, 2))
    return t.reshape(16, 16)


def _to_table(probs: np.ndarray, n: int) -> dict[str, float]:
    total = probs.sum()
    probs = probs / total
    return {format(i, f"0{n}b"): float(p) for i, p in enumerate(probs) if p > 1e-15}


def execute_exact(
    c: Circuit, nm: NoiseModel = NOISELESS, *, validate: bool = True, check: bool = True, strict: bool = False
) -> ExecutionResult:
    """Exact output distribution of ``c`` under ``nm``.

    ``strict`` re-checks trace and positivity after every step (slow).
    """
    if validate:
        nm.validate_for(c)
    probs, transcript = _run(c, nm, False, check, strict)
    return ExecutionResult(_to_table(probs, c.n_qubits), None, tuple(transcript))


def toggle_spam_layer(c: Circuit) -> Circuit:
    """Flip the coin of a tau circuit's ``tau1^dag Z tau1`` preparation/readout
    layers: remove them if present, add them otherwise."""
    dec = c.meta["decomposition"]
    present = any(op.tag == "spam-twirl" for op in c.ops)
    if present:
        ops = [op for op in c.ops if op.tag != "spam-twirl"]
    else:
        z = np.conj(dec.tau1).T @ np.diag([1, -1]) @ dec.tau1
        layer = [unitary_gate(z, q, name="spam-Z", tag="spam-twirl") for q in range(c.n_qubits)]
        ops = layer + list(c.ops) + layer
    meta = dict(c.meta)
    meta["spam_coin"] = not present
    return c.with_ops(ops, meta=meta)


def execute_twirl_averaged(c: Circuit, nm: NoiseModel = NOISELESS, *, validate: bool = True) -> dict[str, float]:
    """Output distribution averaged over every random choice of the generator
    that affects noisy behaviour: gate twirls (exactly, by twirling each site's
    channel) and, for tau circuits, the coin of the SPAM Z layers."""
    if validate:
        nm.validate_for(c)
    probs, _ = _run(c, nm, True, True)
    if c.meta.get("protocol") == "tau" and "spam_coin" in c.meta:
        other, _ = _run(toggle_spam_layer(c), nm, True, True)
        probs = 0.5 * (probs + other)
    return _to_table(probs, c.n_qubits)


def sample(c: Circuit, nm: NoiseModel, shots: int, seed=None, *, validate: bool = True) -> list[str]:
    """``shots`` i.i.d. outcomes from the exact distribution."""
    res = execute_exact(c, nm, validate=validate)
    keys = sorted(res.distribution)
    p = np.array([res.distribution[k] for k in keys])
    idx = as_rng(seed).choice(len(keys), size=shots, p=p / p.sum())
    return [keys[i] for i in idx]


def execute_and_sample(c: Circuit, nm: NoiseModel, shots: int, seed=None) -> ExecutionResult:
    res = execute_exact(c, nm)
    keys = sorted(res.distribution)
    p = np.array([res.distribution[k] for k in keys])
    idx = as_rng(seed).choice(len(keys), size=shots, p=p / p.sum())
    return replace(res, samples=[keys[i] for i in idx])


# ---------------------------------------------------------------------------
# Stochastic equivalence of twirled execution
# ---------------------------------------------------------------------------


@dataclass
class StochasticEquivalence:
    distribution: dict[str, float]          # twirl-averaged execution
    model: NoiseModel                       # extracted stochastic model
    model_distribution: dict[str, float]    # execution under the extracted model
    deviation: float                        # max |difference| over outcomes
    exhaustive: bool
    standard_error: float = 0.0
    weights: dict = field(default_factory=dict)


def _dress(op: PlacedGate, instr) -> list[PlacedGate]:
    a, b = op.qubits
    core = op.matrix if instr.replaced_gate is None else instr.replaced_gate
    return [
        unitary_gate(instr.right[0], a, name="twirl", tag="twirl"),
        unitary_gate(instr.right[1], b, name="twirl", tag="twirl"),
        replace(op, matrix=core),
        unitary_gate(instr.left[0], a, name="twirl", tag="twirl"),
        unitary_gate(instr.left[1], b, name="twirl", tag="twirl"),
    ]


def _composite_channel(nm: NoiseModel, site: NoiseSite, slot_a: NoiseSite, slot_b: NoiseSite) -> Channel:
    g = nm.channel(site) or Channel.identity(2)
    ca = nm.channel(slot_a) or Channel.identity(1)
    cb = nm.channel(slot_b) or Channel.identity(1)
    return g.compose(ca.tensor(cb))


def stochastic_pauli_equivalent(
    c: Circuit,
    nm: NoiseModel,
    family: str,
    dec: TauDecomposition | None = None,
    seed=0,
    max_exhaustive: int = 4096,
    samples: int = 2000,
) -> StochasticEquivalence:
    """Average ``c``'s execution over all twirl dressings of its two-qubit gates
    and compare with the stochastic noise model obtained by twirling each
    gate's channel and reading off mixture weights.

    Raises :class:`TwirlAssumptionError` when a twirled channel is not a
    mixture of the family's conjugations.
    """
    if family == "xy-strong" and not nm.n3:
        raise NoiseModelError("the strong XY twirl needs a noise model declaring n3")
    nm.validate_for(c)
    if dec is None:
        dec = c.meta.get("decomposition")
    two = [i for i, op in enumerate(c.ops) if op.is_two_qubit]
    options = [
        twirl_instructions(family, dec, c.ops[i].params.get("t", 0.0)) for i in two
    ]
    group = twirl_group(family, dec)
    basis = mixture_basis(family, dec)

    # extracted stochastic model
    updates: dict[NoiseSite, Channel] = {}
    weights = {}
    seg = [0] * c.n_qubits
    for k, i in enumerate(two):
        op = c.ops[i]
        a, b = op.qubits
        site = NoiseSite("two_qubit_gate", k, (a, b))
        sa = NoiseSite("single_qubit_slot", seg[a] + 1, (a,))
        sb = NoiseSite("single_qubit_slot", seg[b] + 1, (b,))
        comp = _composite_channel(nm, site, sa, sb)
        twirled = Channel((np.eye(4),)) if comp.is_identity() else None
        fit = extract_mixture(
            Channel(tuple(np.sqrt(1 / len(group)) * (g @ kk @ g.conj().T) for g in group for kk in comp.kraus)),
            basis,
        )
        if not fit.ok:
            raise TwirlAssumptionError(
                f"{site}: twirled channel is not a mixture of {family} conjugations "
                f"(residual {fit.residual:.3e}, min weight {fit.weights.min():.3e})"
            )
        weights[site] = fit.weights
        updates[site] = twirled or fit.channel(basis)
        updates[sa] = Channel.identity(1)
        updates[sb] = Channel.identity(1)
        seg[a] += 1
        seg[b] += 1
    model = nm.with_sites(updates)
    model_dist = execute_exact(c, model).distribution

    total = int(np.prod([len(o) for o in options])) if options else 1
    exhaustive = total <= max_exhaustive
    n = c.n_qubits
    acc = np.zeros(2**n)
    sq = np.zeros(2**n)

    def run(choice) -> np.ndarray:
        ops: list[PlacedGate] = []
        it = iter(choice)
        for op in c.ops:
            ops.extend(_dress(op, next(it)) if op.is_two_qubit else [op])
        probs, _ = _run(c.with_ops(ops), nm, False, True)
        return probs

    if exhaustive:
        for choice in itertools.product(*options):
            p = run(choice)
            acc += p
        acc /= total
        stderr = 0.0
    else:
        rng = as_rng(seed)
        for _ in range(samples):
            choice = [o[rng.integers(len(o))] for o in options]
            p = run(choice)
            acc += p
            sq += p**2
        acc /= samples
        var = np.maximum(sq / samples - acc**2, 0)
        stderr = float(np.max(np.sqrt(var / samples)))
    dist = _to_table(acc, n)
    keys = set(dist) | set(model_dist)
    deviation = max(abs(dist.get(x, 0) - model_dist.get(x, 0)) for x in keys)
    return StochasticEquivalence(dist, model, model_dist, deviation, exhaustive, stderr, weights)


# ---------------------------------------------------------------------------
# Noise specification files
# ---------------------------------------------------------------------------


def _matrix(data, where: str) -> np.ndarray:
    arr = np.array(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise NoiseModelError(f"{where}: matrices are lists of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def channel_from_spec(spec: Mapping[str, Any], n_qubits: int, where: str) -> Channel:
    """Build a channel from a preset description for a site on ``n_qubits``."""
    if not isinstance(spec, Mapping) or "type" not in spec:
        raise NoiseModelError(f"{where}: channel needs a 'type'")
    kind = spec["type"]
    try:
        if kind == "identity":
            return Channel.identity(n_qubits)
        if kind == "depolarizing":
            return depolarizing(float(spec["p"]), n_qubits)
        if kind == "dephasing":
            return dephasing(float(spec["p"]), n_qubits)
        if kind == "amplitude-damping":
            return amplitude_damping(float(spec["gamma"]), n_qubits)
        if kind == "pauli":
            probs = spec["probs"]
            if isinstance(probs, Mapping):
                width = len(next(iter(probs)))
                ch = pauli_channel(probs)
            else:
                width = 1 if len(probs) == 4 else 2
                ch = pauli_channel(probs, width)
            if width == n_qubits:
                return ch
            if width == 1 and n_qubits == 2:
                return ch.tensor(ch)
            raise NoiseModelError(f"{where}: Pauli channel on {width} qubit(s) for a {n_qubits}-qubit site")
        if kind == "kraus":
            ops = [_matrix(k, f"{where}.operators[{i}]") for i, k in enumerate(spec["operators"])]
            anc = int(spec.get("ancillas", 0))
            ch = Channel(tuple(ops), "kraus")
            if anc:
                ch = reduce_ancillas(ch, anc)
            if ch.dim_in != 2**n_qubits:
                raise NoiseModelError(f"{where}: Kraus operators act on {ch.n_qubits} qubit(s), site has {n_qubits}")
            return ch
    except NoiseModelError:
        raise
    except KeyError as exc:
        raise NoiseModelError(f"{where}: missing parameter {exc}") from None
    except (TypeError, ValueError) as exc:
        raise NoiseModelError(f"{where}: {exc}") from None
    raise NoiseModelError(f"{where}: unknown channel type {kind!r}")


def reduce_ancillas(ch: Channel, ancillas: int) -> Channel:
    """System channel of a map acting on system (x) ``ancillas`` fresh ``|0>``
    qubits, the ancillas being discarded at the end of the circuit. Nothing
    touches them afterwards, so tracing them out at once gives the same
    statistics."""
    da = 2**ancillas
    ds = ch.dim_in // da
    if ds * da != ch.dim_in:
        raise NoiseModelError("ancilla count does not divide the channel dimension")
    ks = []
    for k in ch.kraus:
        k4 = k.reshape(ds, da, ds, da)
        for j in range(da):
            ks.append(k4[:, j, :, 0])
    return Channel(tuple(ks), ch.label + "+ancilla")


def noise_model_from_dict(data: Mapping[str, Any]) -> NoiseModel:
    if not isinstance(data, Mapping):
        raise NoiseModelError("top level: expected an object")
    defaults = {}
    for kind, spec in dict(data.get("defaults", {})).items():
        if kind not in SITE_KINDS:
            raise NoiseModelError(f"defaults.{kind}: unknown site kind")
        defaults[kind] = channel_from_spec(spec, 2 if kind == "two_qubit_gate" else 1, f"defaults.{kind}")
    sites = {}
    for i, rec in enumerate(data.get("sites", [])):
        where = f"sites[{i}]"
        try:
            site = NoiseSite(rec["kind"], int(rec.get("index", 0)), tuple(rec["qubits"]))
        except KeyError as exc:
            raise NoiseModelError(f"{where}: missing field {exc}") from None
        except NoiseModelError as exc:
            raise NoiseModelError(f"{where}: {exc}") from None
        if site in sites:
            raise NoiseModelError(f"{where} ({site}): duplicate site")
        sites[site] = channel_from_spec(rec.get("channel"), len(site.qubits), f"{where} ({site})")
    variants = {}
    for i, rec in enumerate(data.get("variants", [])):
        where = f"variants[{i}]"
        site = NoiseSite("two_qubit_gate", int(rec["index"]), tuple(rec["qubits"]))
        signs = tuple(int(s) for s in rec["signs"])
        variants[(site, signs)] = channel_from_spec(rec.get("channel"), 2, f"{where} ({site})")
    return NoiseModel(sites, defaults, bool(data.get("n3", False)), variants)


def load_noise_model(path) -> NoiseModel:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NoiseModelError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    try:
        return noise_model_from_dict(data)
    except NoiseModelError as exc:
        raise NoiseModelError(f"{path}: {exc}") from None

"""Ground truth: ideal distributions, ideal-actual distance, soundness and
robustness harnesses, and single-fault injection into traps."""

from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .accredit import AccreditationConfig, AccreditationReport, run_accreditation, _generators
from .circuits import Circuit, _apply, probabilities_to_table, statevector_probabilities
from .noisesim import (
    NoiseModel,
    NoiseSite,
    circuit_sites,
    execute_exact,
    execute_twirl_averaged,
)
from .qalg import Channel, PAULI_MATRICES, dagger, diamond_distance_estimate, kron, tvd
from .twirl import PAULI_ORDER, TauDecomposition

ORACLE_MAX_QUBITS = 10
VIOLATION_SLACK = 1e-9


class OracleSizeError(ValueError):
    pass


def _check_size(c: Circuit) -> None:
    if c.n_qubits > ORACLE_MAX_QUBITS:
        raise OracleSizeError(f"{c.n_qubits} qubits exceeds the exact-oracle limit of {ORACLE_MAX_QUBITS}")


def ideal_distribution(c: Circuit) -> dict[str, float]:
    """Noiseless output distribution by statevector simulation."""
    _check_size(c)
    return probabilities_to_table(statevector_probabilities(c), c.n_qubits, cutoff=1e-15)


def ideal_actual_vd(c: Circuit, nm: NoiseModel, twirl_averaged: bool = False) -> float:
    _check_size(c)
    noisy = execute_twirl_averaged(c, nm) if twirl_averaged else execute_exact(c, nm).distribution
    return tvd(ideal_distribution(c), noisy)


# ---------------------------------------------------------------------------
# Soundness harness
# ---------------------------------------------------------------------------


@dataclass
class SoundnessVerdict:
    runs: int
    violations: int
    true_nu: float
    mean_bound: float
    confidence_target: float
    records: list[dict[str, float]] = field(default_factory=list)

    @property
    def violation_rate(self) -> float:
        return self.violations / self.runs

    def allowed_violations(self) -> float:
        """``(1 - alpha) * runs`` plus three binomial standard deviations."""
        p = 1 - self.confidence_target
        return p * self.runs + 3 * np.sqrt(self.runs * p * (1 - p))

    @property
    def sound(self) -> bool:
        return self.violations <= self.allowed_violations()

    def to_dict(self) -> dict[str, Any]:
        return {
            "runs": self.runs,
            "violations": self.violations,
            "true_nu": self.true_nu,
            "mean_bound": self.mean_bound,
            "confidence_target": self.confidence_target,
            "allowed_violations": self.allowed_violations(),
            "sound": bool(self.sound),
        }


def _run_seeds(seed: int, runs: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(runs)]


def _one_run(args) -> dict[str, float]:
    c, nm, cfg, dec, ideal = args
    rep = run_accreditation(c, nm, cfg, dec)
    per_draw = tvd(ideal, execute_exact(rep.target, nm, validate=False).distribution)
    return {"seed": cfg.seed, "bound": rep.bound, "trap_failures": rep.trap_failures, "per_draw_nu": per_draw}


def true_nu(c: Circuit, nm: NoiseModel, cfg: AccreditationConfig, dec: TauDecomposition | None = None) -> float:
    """Ideal-actual distance of the target averaged over all generator draws."""
    _, make_target = _generators(c, cfg.protocol, nm, dec)
    target = make_target(cfg.seed)
    return tvd(ideal_distribution(c), execute_twirl_averaged(target, nm))


def verify_soundness(
    c: Circuit,
    nm: NoiseModel,
    cfg: AccreditationConfig,
    runs: int,
    seed: int = 0,
    dec: TauDecomposition | None = None,
    jobs: int = 1,
) -> SoundnessVerdict:
    """Repeat the protocol ``runs`` times and count runs whose bound falls
    below the exact ideal-actual distance of the averaged target."""
    _check_size(c)
    if runs < 1:
        raise ValueError("runs: must be positive")
    nu = true_nu(c, nm, cfg, dec)
    ideal = ideal_distribution(c)
    tasks = [
        (c, nm, AccreditationConfig(cfg.theta, cfg.alpha, cfg.k, cfg.protocol, s), dec, ideal)
        for s in _run_seeds(seed, runs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_one_run, tasks))
    else:
        records = [_one_run(t) for t in tasks]
    for r in records:
        r["true_nu"] = nu
    violations = sum(r["bound"] < nu - VIOLATION_SLACK for r in records)
    mean_bound = float(np.mean([r["bound"] for r in records]))
    return SoundnessVerdict(runs, violations, nu, mean_bound, cfg.alpha, records)


def write_runs_csv(verdict: SoundnessVerdict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "seed", "bound", "true_nu", "per_draw_nu", "trap_failures"])
        for i, r in enumerate(verdict.records):
            w.writerow([i, r["seed"], repr(r["bound"]), repr(r["true_nu"]), repr(r["per_draw_nu"]), r["trap_failures"]])


# ---------------------------------------------------------------------------
# Robustness
# ---------------------------------------------------------------------------


@dataclass
class RobustnessResult:
    lhs: float
    rhs: float
    ok: bool
    m: int
    site_distances: dict[str, float]

    @property
    def verdict(self) -> str:
        # the diamond estimate is a lower bound, so a miss is inconclusive
        return "holds" if self.ok else "inconclusive"

    def to_dict(self) -> dict[str, Any]:
        return {"lhs": self.lhs, "rhs": self.rhs, "ok": bool(self.ok), "verdict": self.verdict,
                "m": self.m, "site_distances": self.site_distances}


def _slot_contents(c: Circuit) -> dict[NoiseSite, list]:
    seg = [0] * c.n_qubits
    out: dict[NoiseSite, list] = {}
    for op in c.ops:
        if op.is_two_qubit:
            for q in op.qubits:
                seg[q] += 1
        else:
            q = op.qubits[0]
            out.setdefault(NoiseSite("single_qubit_slot", seg[q], (q,)), []).append(op)
    return out


def _effective_channels(c: Circuit, nm: NoiseModel) -> dict[NoiseSite, Channel]:
    """Per-site channel including any gate-dependent slot part."""
    contents = _slot_contents(c)
    variants = {}
    k = 0
    for op in c.ops:
        if op.is_two_qubit:
            variants[k] = (int(op.params.get("s_xx", 1)), int(op.params.get("s_yy", 1)))
            k += 1
    out = {}
    for site in circuit_sites(c):
        arity = len(site.qubits)
        var = variants.get(site.index, (1, 1)) if site.kind == "two_qubit_gate" else (1, 1)
        ch = nm.channel(site, var) or Channel.identity(arity)
        if site.kind == "single_qubit_slot":
            # the simulator applies the gate-dependent part after the slot's gates
            # while the base part sits at segment start; for the distance bound
            # only the per-site channel difference matters
            extra = nm.slot_extra(site, contents.get(site, []))
            if extra is not None:
                ch = ch.compose(extra)
        out[site] = ch
    return out


def verify_robustness(
    c: Circuit, nm_a: NoiseModel, nm_b: NoiseModel, restarts: int = 8, seed: int = 0
) -> RobustnessResult:
    """Check that the output distance of two noise models on ``c`` stays below
    (number of differing sites) x (largest per-site diamond distance)."""
    _check_size(c)
    nm_a.validate_for(c)
    nm_b.validate_for(c)
    ea, eb = _effective_channels(c, nm_a), _effective_channels(c, nm_b)
    dists: dict[str, float] = {}
    for site in ea:
        a, b = ea[site], eb[site]
        if a is b or np.allclose(a.superop, b.superop, atol=1e-12):
            continue
        dists[str(site)] = diamond_distance_estimate(a, b, restarts=restarts, seed=seed)
    m = len(dists)
    rhs = m * max(dists.values(), default=0.0)
    lhs = tvd(execute_exact(c, nm_a).distribution, execute_exact(c, nm_b).distribution)
    return RobustnessResult(lhs, rhs, lhs <= rhs + 1e-9, m, dists)


@dataclass
class PairedCheck:
    """Exact expected trap-failure rate and target distance under two models."""

    trap_rate_a: float
    trap_rate_b: float
    nu_a: float
    nu_b: float
    allowance: float
    bounds_a: list[float]
    bounds_b: list[float]

    @property
    def ok(self) -> bool:
        return (
            abs(self.trap_rate_a - self.trap_rate_b) <= self.allowance + 1e-9
            and abs(self.nu_a - self.nu_b) <= self.allowance + 1e-9
        )


def paired_accreditation_check(
    c: Circuit,
    nm_a: NoiseModel,
    nm_b: NoiseModel,
    cfg: AccreditationConfig,
    runs: int = 3,
    seed: int = 0,
    dec: TauDecomposition | None = None,
) -> PairedCheck:
    """Run the protocol under two noise models with shared randomness.

    For every generated circuit the exact output distance is at most m x eps,
    so the expected trap-failure rates and the target distances must agree
    within the largest such allowance over the circuits seen.
    """
    make_trap, make_target = _generators(c, cfg.protocol, nm_a, dec)
    ideal = ideal_distribution(c)
    fails_a, fails_b, allowance = [], [], 0.0
    bounds_a, bounds_b = [], []
    nu_a = nu_b = 0.0
    for s in _run_seeds(seed, runs):
        run_cfg = AccreditationConfig(cfg.theta, cfg.alpha, cfg.k, cfg.protocol, s)
        ra = run_accreditation(c, nm_a, run_cfg, dec)
        rb = run_accreditation(c, nm_b, run_cfg, dec)
        bounds_a.append(ra.bound)
        bounds_b.append(rb.bound)
        for i in range(min(ra.n_traps, 10)):
            trap, m = make_trap(int(np.random.SeedSequence([s, i]).generate_state(1)[0]))
            da = execute_exact(trap, nm_a).distribution
            db = execute_exact(trap, nm_b).distribution
            fails_a.append(1 - da.get(m, 0.0))
            fails_b.append(1 - db.get(m, 0.0))
            allowance = max(allowance, verify_robustness(trap, nm_a, nm_b, restarts=2).rhs)
        target = ra.target
        nu_a = tvd(ideal, execute_exact(target, nm_a).distribution)
        nu_b = tvd(ideal, execute_exact(target, nm_b).distribution)
        allowance = max(allowance, verify_robustness(target, nm_a, nm_b, restarts=2).rhs)
    return PairedCheck(float(np.mean(fails_a)), float(np.mean(fails_b)), nu_a, nu_b, allowance, bounds_a, bounds_b)


# ---------------------------------------------------------------------------
# Single-fault injection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fault:
    """A unitary error placed before ``ops[position]`` (``len(ops)`` means
    right before readout)."""

    position: int
    qubits: tuple[int, ...]
    matrix: np.ndarray
    label: str = ""


def _initial_state(c: Circuit) -> np.ndarray:
    psi = np.zeros((2,) * c.n_qubits, dtype=complex)
    psi[(0,) * c.n_qubits] = 1
    for q, u in enumerate(c.prep_unitaries()):
        psi = _apply(psi, u, [q])
    return psi


def states_before(c: Circuit, positions: Sequence[int]) -> dict[int, np.ndarray]:
    """Noiseless state immediately before ``ops[p]`` for each requested ``p``."""
    want = set(positions)
    psi = _initial_state(c)
    out = {}
    for i, op in enumerate(c.ops):
        if i in want:
            out[i] = psi
        psi = _apply(psi, op.matrix, op.qubits)
    if len(c.ops) in want:
        out[len(c.ops)] = psi
    return out


def covectors_before(c: Circuit, outcome: str, positions: Sequence[int]) -> dict[int, np.ndarray]:
    """``phi_p`` with ``<phi_p|psi>`` the amplitude of ``outcome`` when ``psi``
    is the state right before ``ops[p]`` and the rest runs noiselessly."""
    want = set(positions)
    n = c.n_qubits
    phi = np.zeros((2,) * n, dtype=complex)
    phi[tuple(int(b) for b in outcome)] = 1
    for q, b in enumerate(c.measurement_unitaries()):
        phi = _apply(phi, dagger(b), [q])
    out = {}
    if len(c.ops) in want:
        out[len(c.ops)] = phi
    for i in range(len(c.ops) - 1, -1, -1):
        op = c.ops[i]
        phi = _apply(phi, dagger(op.matrix), op.qubits)
        if i in want:
            out[i] = phi
    return out


def detection_probabilities(trap: Circuit, m: str, faults: Sequence[Fault]) -> np.ndarray:
    """Probability that each single fault makes the trap return something other than ``m``."""
    positions = sorted({f.position for f in faults})
    psis = states_before(trap, positions)
    phis = covectors_before(trap, m, positions)
    out = np.empty(len(faults))
    for i, f in enumerate(faults):
        amp = np.vdot(phis[f.position], _apply(psis[f.position], f.matrix, list(f.qubits)))
        out[i] = 1 - abs(amp) ** 2
    return out


def with_fault(c: Circuit, fault: Fault) -> Circuit:
    from .circuits import unitary_gate

    ops = list(c.ops)
    ops.insert(fault.position, unitary_gate(fault.matrix, *fault.qubits, name="fault"))
    return c.with_ops(ops)


def _frame_letters(frame: np.ndarray) -> list[tuple[str, np.ndarray]]:
    return [(p, dagger(frame) @ PAULI_MATRICES[p] @ frame) for p in PAULI_ORDER]


def two_qubit_fault_set(frames: tuple[np.ndarray, np.ndarray]) -> list[tuple[str, np.ndarray]]:
    """The 15 non-identity products ``(f1^dag P f1) (x) (f2^dag Q f2)``."""
    a, b = _frame_letters(frames[0]), _frame_letters(frames[1])
    return [(pa + pb, kron(ma, mb)) for (pa, ma), (pb, mb) in itertools.product(a, b) if pa + pb != "II"]


def trap_fault_sites(trap: Circuit, protocol: str, dec: TauDecomposition | None = None) -> list[Fault]:
    """Every single-site fault used by the detection check.

    Two-qubit faults: after each ``G`` (tau) or before and after each
    vanishing block (XY), over the 15 non-identity elements of the local error
    group. One-qubit faults right after preparation and right before readout
    use only elements that do not commute with the trap's reference frame
    (``Z``-type errors there act trivially on the frame state and can never
    be detected).
    """
    faults: list[Fault] = []
    two = [i for i, op in enumerate(trap.ops) if op.is_two_qubit]
    n = trap.n_qubits
    if protocol == "tau":
        frames = (dec.tau1, dec.tau2)
        for i in two:
            for label, mat in two_qubit_fault_set(frames):
                faults.append(Fault(i + 1, trap.ops[i].qubits, mat, label))
        single = [(p, dagger(dec.tau1) @ PAULI_MATRICES[p] @ dec.tau1) for p in "XY"]
    else:
        eye = np.eye(2)
        blocks = two[0::2]
        for i in blocks:
            a, b = trap.ops[i].qubits
            for pos in (i - 2, i + 6):
                for label, mat in two_qubit_fault_set((eye, eye)):
                    faults.append(Fault(pos, (a, b), mat, label))
        single = [(p, PAULI_MATRICES[p]) for p in "XY"]
    for q in range(n):
        for label, mat in single:
            faults.append(Fault(0, (q,), mat, f"prep:{label}"))
            faults.append(Fault(len(trap.ops), (q,), mat, f"meas:{label}"))
    return faults


def detection_frequencies(
    c: Circuit, protocol: str, trials: int, seed: int = 0, dec: TauDecomposition | None = None
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Empirical detection frequency per fault over ``trials`` fresh traps.

    Each trial draws a new trap, computes every fault's exact detection
    probability, then samples one detection outcome per fault. Returns
    (empirical frequency, mean exact probability, fault descriptions).
    """
    from .noisesim import NOISELESS

    make_trap, _ = _generators(c, protocol, NOISELESS if protocol != "xy-strong" else NoiseModel(n3=True), dec)
    if protocol == "tau":
        from .accredit import resolve_decomposition

        dec = resolve_decomposition(c, dec)
    rng = np.random.default_rng(seed)
    seeds = _run_seeds(seed, trials)
    hits = None
    exact = None
    names: list[str] = []
    for s in seeds:
        trap, m = make_trap(s)
        faults = trap_fault_sites(trap, protocol, dec)
        p = np.clip(detection_probabilities(trap, m, faults), 0, 1)
        if hits is None:
            hits = np.zeros(len(faults))
            exact = np.zeros(len(faults))
            names = [f"pos{f.position}@{f.qubits}:{f.label}" for f in faults]
        hits += rng.random(len(p)) < p
        exact += p
    return hits / trials, exact / trials, names


def relocate_fault(trap: Circuit, fault: Fault, frame: np.ndarray | None = None, atol: float = 1e-9) -> str | None:
    """Find an end-of-circuit product fault (one frame-conjugated Pauli per
    qubit, just before readout) giving the same output distribution as
    ``fault``. Returns its letters, or None if no such fault exists."""
    if trap.n_qubits > 4:
        raise OracleSizeError("relocation search is limited to 4 qubits")
    target = statevector_probabilities(with_fault(trap, fault))
    frame = np.eye(2) if frame is None else frame
    letters = _frame_letters(frame)
    n = trap.n_qubits
    end = len(trap.ops)
    psi = states_before(trap, [end])[end]
    for combo in itertools.product(range(4), repeat=n):
        phi = psi
        for q, j in enumerate(combo):
            if j:
                phi = _apply(phi, letters[j][1], [q])
        for q, b in enumerate(trap.measurement_unitaries()):
            phi = _apply(phi, b, [q])
        probs = np.abs(phi.reshape(-1)) ** 2
        if np.max(np.abs(probs - target)) < atol:
            return "".join(letters[j][0] for j in combo)
    return None


def verdict_json(obj: dict[str, Any]) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"

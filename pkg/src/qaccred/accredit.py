"""Standard accreditation loop: traps, one target, random interleaving, bound."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .circuits import (
    Circuit,
    CircuitError,
    build_tau_target,
    build_tau_trap,
    build_xy_target,
    build_xy_trap,
)
from .noisesim import NoiseModel, NoiseModelError, execute_exact
from .twirl import TauDecomposition, search_tau_decomposition

PROTOCOLS = ("tau", "xy", "xy-strong")


class AccreditationError(ValueError):
    pass


@dataclass(frozen=True)
class AccreditationConfig:
    theta: float
    alpha: float
    k: float = 0.5
    protocol: str = "tau"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise AccreditationError(f"theta: must lie in (0, 1], got {self.theta}")
        if not 0 < self.alpha < 1:
            raise AccreditationError(f"alpha: must lie in (0, 1), got {self.alpha}")
        if not 0 < self.k <= 1:
            raise AccreditationError(f"k: must lie in (0, 1], got {self.k}")
        if self.protocol not in PROTOCOLS:
            raise AccreditationError(f"protocol: expected one of {PROTOCOLS}, got {self.protocol!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise AccreditationError("seed: must be a non-negative integer")

    def to_dict(self) -> dict[str, Any]:
        return {"theta": self.theta, "alpha": self.alpha, "k": self.k, "protocol": self.protocol, "seed": int(self.seed)}


def trap_count(theta: float, alpha: float) -> int:
    """Number of traps for looseness ``theta`` at confidence ``alpha`` (Hoeffding)."""
    if not 0 < theta <= 1:
        raise AccreditationError(f"theta: must lie in (0, 1], got {theta}")
    if not 0 < alpha < 1:
        raise AccreditationError(f"alpha: must lie in (0, 1), got {alpha}")
    return math.ceil((2 / theta**2) * math.log(2 / (1 - alpha))) + 1


@dataclass
class AccreditationReport:
    target_sample: str
    bound: float
    n_traps: int
    trap_failures: int
    transcript: list[dict[str, Any]]
    config: AccreditationConfig
    target: Circuit | None = field(default=None, repr=False)

    @property
    def trap_result(self) -> float:
        return self.trap_failures / self.n_traps

    def to_dict(self) -> dict[str, Any]:
        return {
            "target_sample": self.target_sample,
            "bound": self.bound,
            "n_traps": self.n_traps,
            "trap_failures": self.trap_failures,
            "trap_result": self.trap_result,
            "config": self.config.to_dict(),
            "transcript": self.transcript,
        }


def resolve_decomposition(c: Circuit, dec: TauDecomposition | None = None) -> TauDecomposition:
    """Decomposition to use for a tau-protocol run: explicit, from the circuit
    file, or found by numerical search on the circuit's two-qubit gate."""
    if dec is not None:
        return dec
    if "decomposition" in c.meta:
        return c.meta["decomposition"]
    twos = c.two_qubit_ops
    if not twos:
        raise AccreditationError("tau protocol: circuit has no two-qubit gate and no decomposition")
    found = search_tau_decomposition(twos[0].matrix).decomposition
    if found is None:
        raise AccreditationError(f"tau protocol: no decomposition found for gate {twos[0].name}")
    return found


def _generators(c: Circuit, protocol: str, nm: NoiseModel, dec: TauDecomposition | None):
    if protocol == "tau":
        d = resolve_decomposition(c, dec)
        return (lambda s: build_tau_trap(c, d, s)), (lambda s: build_tau_target(c, d, s))
    strong = protocol == "xy-strong"
    if strong and not nm.n3:
        raise AccreditationError(
            "xy-strong: the noise model must declare that sign variants share their noise (n3)"
        )
    return (lambda s: build_xy_trap(c, s, strong)), (lambda s: build_xy_target(c, s, strong))


def _child_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run_accreditation(
    c: Circuit, nm: NoiseModel, cfg: AccreditationConfig, dec: TauDecomposition | None = None
) -> AccreditationReport:
    n_traps = trap_count(cfg.theta, cfg.alpha)
    seeds = _child_seeds(cfg.seed, n_traps + 3)
    gen_seeds, shot_seeds = seeds[: n_traps + 1], seeds[n_traps + 1]
    order_rng = np.random.default_rng(seeds[n_traps + 2])
    try:
        make_trap, make_target = _generators(c, cfg.protocol, nm, dec)
        traps = [make_trap(s) for s in gen_seeds[:n_traps]]
        target = make_target(gen_seeds[n_traps])
    except CircuitError as exc:
        raise AccreditationError(str(exc)) from None
    try:
        nm.validate_for(target)
    except NoiseModelError as exc:
        raise AccreditationError(str(exc)) from None

    jobs = [("trap", i, tr, m) for i, (tr, m) in enumerate(traps)] + [("target", 0, target, None)]
    order = order_rng.permutation(len(jobs))
    shot_rng = np.random.default_rng(shot_seeds)
    transcript: list[dict[str, Any]] = []
    failures = 0
    target_sample = ""
    for pos, j in enumerate(order):
        kind, idx, circ, m = jobs[j]
        dist = execute_exact(circ, nm, validate=False).distribution
        keys = sorted(dist)
        p = np.array([dist[x] for x in keys])
        outcome = keys[shot_rng.choice(len(keys), p=p / p.sum())]
        rec: dict[str, Any] = {"position": pos, "kind": kind, "index": idx, "outcome": outcome}
        if kind == "trap":
            rec["expected"] = m
            rec["passed"] = outcome == m
            failures += outcome != m
        else:
            target_sample = outcome
        transcript.append(rec)
    bound = (failures / n_traps + cfg.theta) / cfg.k
    return AccreditationReport(target_sample, bound, n_traps, failures, transcript, cfg, target)


def report_json(report: AccreditationReport) -> str:
    return json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"


def write_report(report: AccreditationReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(report_json(report))


def write_trap_csv(report: AccreditationReport, path) -> None:
    """One row per trap: index, order position, outcome, pass/fail."""
    rows = sorted((r for r in report.transcript if r["kind"] == "trap"), key=lambda r: r["index"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "position", "outcome", "expected", "result"])
        for r in rows:
            w.writerow([r["index"], r["position"], r["outcome"], r["expected"], "pass" if r["passed"] else "fail"])

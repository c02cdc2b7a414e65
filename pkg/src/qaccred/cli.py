"""Command-line interface.

Subcommands: ``accredit``, ``verify`` and ``search-decomposition``. Every
setting can come from a JSON manifest (``--manifest``); flags override it.

Exit codes: 0 success, 1 validation error, 2 inconclusive robustness check,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .accredit import (
    PROTOCOLS,
    AccreditationConfig,
    AccreditationError,
    run_accreditation,
    write_report,
    write_trap_csv,
)
from .circuits import CircuitError, load_circuit
from .noisesim import NoiseModel, NoiseModelError, load_noise_model
from .oracle import OracleSizeError, verdict_json, verify_robustness, verify_soundness, write_runs_csv
from .qalg import CNOT, T, check_unitary, kron
from .twirl import search_tau_decomposition, sqrt_iswap

EXIT_OK, EXIT_INVALID, EXIT_INCONCLUSIVE, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULTS = {"theta": 0.2, "alpha": 0.95, "k": 0.5, "protocol": "tau", "seed": 0, "runs": 200, "out": "out"}


class ManifestError(ValueError):
    pass


def _named_gates() -> dict[str, np.ndarray]:
    tt = kron(T, T)
    return {
        "cnot": CNOT,
        "t-cnot": tt.conj().T @ CNOT @ tt,
        "sqrt-iswap": sqrt_iswap(),
    }


def load_manifest(path: str) -> dict[str, Any]:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise ManifestError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ManifestError(f"{path}: expected an object")
    flat = dict(data)
    flat.update(flat.pop("config", {}) or {})
    for key in ("circuit", "noise", "noise_b", "out"):
        if key in flat and flat[key] is not None:
            flat[key] = str((p.parent / flat[key]).resolve()) if not Path(flat[key]).is_absolute() else flat[key]
    unknown = set(flat) - set(DEFAULTS) - {"circuit", "noise", "noise_b", "jobs"}
    if unknown:
        raise ManifestError(f"{path}: unknown field(s) {sorted(unknown)}")
    return flat


def resolve_settings(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then manifest, then explicit flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "manifest", None):
        settings.update(load_manifest(args.manifest))
    for key in ("circuit", "noise", "noise_b", "theta", "alpha", "k", "protocol", "seed", "out", "runs", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def _config(s: dict[str, Any]) -> AccreditationConfig:
    try:
        return AccreditationConfig(float(s["theta"]), float(s["alpha"]), float(s["k"]), s["protocol"], int(s["seed"]))
    except (TypeError, ValueError) as exc:
        raise AccreditationError(str(exc)) from None


def _inputs(s: dict[str, Any]):
    if not s.get("circuit"):
        raise ManifestError("circuit: no circuit file given")
    c = load_circuit(s["circuit"])
    nm = load_noise_model(s["noise"]) if s.get("noise") else NoiseModel()
    return c, nm


def cmd_accredit(args: argparse.Namespace) -> int:
    s = resolve_settings(args)
    cfg = _config(s)
    c, nm = _inputs(s)
    report = run_accreditation(c, nm, cfg)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.json")
    write_trap_csv(report, out / "traps.csv")
    print(
        f"target sample {report.target_sample}  bound {report.bound:.6g}  "
        f"trap failures {report.trap_failures}/{report.n_traps}  -> {out}"
    )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    s = resolve_settings(args)
    cfg = _config(s)
    c, nm = _inputs(s)
    runs = int(s["runs"])
    if runs < 1:
        raise ManifestError("runs: must be positive")
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    verdict = verify_soundness(c, nm, cfg, runs, seed=cfg.seed, jobs=int(s.get("jobs") or 1))
    (out / "verdict.json").write_text(verdict_json(verdict.to_dict()))
    write_runs_csv(verdict, out / "runs.csv")
    print(
        f"runs {verdict.runs}  violations {verdict.violations}  true nu {verdict.true_nu:.6g}  "
        f"mean bound {verdict.mean_bound:.6g}  sound {verdict.sound}"
    )
    code = EXIT_OK
    if s.get("noise_b"):
        nm_b = load_noise_model(s["noise_b"])
        rob = verify_robustness(c, nm, nm_b)
        (out / "robustness.json").write_text(verdict_json(rob.to_dict()))
        print(f"robustness lhs {rob.lhs:.6g}  rhs {rob.rhs:.6g}  {rob.verdict}")
        if not rob.ok:
            code = EXIT_INCONCLUSIVE
    return code


def _parse_gate(spec: str) -> np.ndarray:
    named = _named_gates()
    if spec.lower() in named:
        return named[spec.lower()]
    path = Path(spec)
    if not path.exists():
        raise ManifestError(f"gate: {spec!r} is neither a known name ({', '.join(named)}) nor a file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{spec}: line {exc.lineno}: {exc.msg}") from None
    mat = data.get("matrix") if isinstance(data, dict) else data
    try:
        arr = np.array(mat, dtype=float)
        u = arr[..., 0] + 1j * arr[..., 1]
        if u.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix of [re, im] pairs, got shape {u.shape}")
        return check_unitary(u)
    except (TypeError, ValueError, IndexError) as exc:
        raise ManifestError(f"{spec}: matrix: {exc}") from None


def _enc(m: np.ndarray) -> list:
    return np.stack([m.real, m.imag], axis=-1).round(15).tolist()


def cmd_search(args: argparse.Namespace) -> int:
    u = _parse_gate(args.gate)
    res = search_tau_decomposition(u, tolerance=args.tolerance, seed=args.seed)
    if res.decomposition is None:
        doc = {"found": False, "best_residual": res.best_residual, "candidates_tried": res.candidates_tried}
        print(f"none (best residual {res.best_residual:.3e})")
    else:
        d = res.decomposition
        doc = {
            "found": True,
            "residual": res.residual,
            "tau1": _enc(d.tau1),
            "tau2": _enc(d.tau2),
            "m": _enc(d.m),
        }
        print(f"found (residual {res.residual:.3e})")
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        # usage errors are validation errors; exit code 2 is reserved
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qaccred", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--manifest", help="JSON file with circuit, noise, config and out")
        p.add_argument("--circuit", help="circuit file (JSON)")
        p.add_argument("--noise", help="noise specification file (JSON); noiseless if omitted")
        p.add_argument("--theta", type=float, help="minimum looseness (default 0.2)")
        p.add_argument("--alpha", type=float, help="confidence (default 0.95)")
        p.add_argument("--k", type=float, help="detection constant (default 0.5)")
        p.add_argument("--protocol", choices=PROTOCOLS, help="protocol family (default tau)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", help="output directory (default ./out)")

    p = sub.add_parser("accredit", help="run the accreditation protocol once")
    common(p)
    p.set_defaults(func=cmd_accredit)

    p = sub.add_parser("verify", help="repeat the protocol and check its bound against exact values")
    common(p)
    p.add_argument("--runs", type=int, help="protocol repetitions (default 200)")
    p.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")
    p.add_argument("--noise-b", dest="noise_b", help="second noise model for the robustness check")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search-decomposition", help="look for a tau decomposition of a two-qubit gate")
    p.add_argument("gate", help="cnot, t-cnot, sqrt-iswap, or a JSON file holding a 4x4 matrix")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    p.set_defaults(func=cmd_search)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CircuitError, NoiseModelError, AccreditationError, ManifestError, OracleSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:  # pragma: no cover - reported, not raised
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""Twirling for non-Clifford two-qubit gates.

Two gate families are handled:

* tau-decomposable gates ``G = (tau1 (x) tau2)^dag M (tau1 (x) tau2)`` with ``M``
  a Clifford fixing ``|00>`` and ``|++>``; their noise is twirled by the
  conjugated Pauli sets ``{tau^dag P tau}``;
* XY-interaction gates ``exp(-i t (XX + YY))``, twirled either by the four
  symmetric pairs ``P (x) P`` (valid for noise supported on an unflippable set)
  or, when all sign variants of the gate share one noise channel, by the full
  two-qubit Pauli group.

The module also contains the Clifford enumeration and the numerical search
for tau decompositions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from .qalg import (
    CNOT,
    PAULI_MATRICES,
    PHASE_ATOL,
    Channel,
    H,
    I2,
    PauliString,
    S,
    Z,
    all_pauli_letters,
    all_pauli_strings,
    as_rng,
    check_unitary,
    dagger,
    equal_up_to_phase,
    kron,
    pauli_commutator,
    phase_distance,
    xy_gate,
)

PAULI_ORDER = "IXYZ"
MIXTURE_TOL = 1e-8


class TwirlAssumptionError(ValueError):
    """Raised when a twirled channel is not a mixture of the expected unitaries."""


# ---------------------------------------------------------------------------
# Clifford tests and Pauli pushing
# ---------------------------------------------------------------------------


def is_clifford(u: np.ndarray, atol: float = PHASE_ATOL) -> bool:
    u = np.asarray(u, dtype=complex)
    n = u.shape[0].bit_length() - 1
    for p in all_pauli_strings(n):
        if PauliString.from_matrix(dagger(u) @ p.matrix @ u, atol) is None:
            return False
    return True


def push_pauli_through_clifford(p: PauliString, m: np.ndarray) -> PauliString:
    """Return the phased Pauli string equal to ``m^dag p m``."""
    m = np.asarray(m, dtype=complex)
    if m.shape != (2**p.n_qubits,) * 2:
        raise ValueError("Clifford dimension does not match the Pauli string")
    image = PauliString.from_matrix(dagger(m) @ p.matrix @ m)
    if image is None:
        raise ValueError(f"{p} is not mapped to a Pauli string; the gate is not Clifford")
    return image


# ---------------------------------------------------------------------------
# Vesicle sets and tau decompositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VesicleSet:
    """The four operators ``tau^dag P tau`` for P in I, X, Y, Z."""

    tau: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau", check_unitary(self.tau))
        if self.tau.shape != (2, 2):
            raise ValueError("tau must be a single-qubit unitary")

    @cached_property
    def elements(self) -> tuple[np.ndarray, ...]:
        return tuple(dagger(self.tau) @ PAULI_MATRICES[ch] @ self.tau for ch in PAULI_ORDER)

    def element(self, letter: str) -> np.ndarray:
        return self.elements[PAULI_ORDER.index(letter)]


def fixes_state(m: np.ndarray, state: np.ndarray, atol: float = PHASE_ATOL) -> bool:
    image = m @ state
    return abs(abs(np.vdot(state, image)) - 1) < atol


ZERO_ZERO = np.array([1, 0, 0, 0], dtype=complex)
PLUS_PLUS = np.full(4, 0.5, dtype=complex)


@dataclass(frozen=True, eq=False)
class TauDecomposition:
    """Gate ``(tau1 (x) tau2)^dag m (tau1 (x) tau2)``; qubit 0 carries tau1."""

    tau1: np.ndarray
    tau2: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        t1 = check_unitary(self.tau1)
        t2 = check_unitary(self.tau2)
        m = check_unitary(self.m)
        if t1.shape != (2, 2) or t2.shape != (2, 2) or m.shape != (4, 4):
            raise ValueError("expected 2x2 taus and a 4x4 Clifford")
        if not is_clifford(m):
            raise ValueError("M is not a Clifford gate")
        if not fixes_state(m, ZERO_ZERO) or not fixes_state(m, PLUS_PLUS):
            raise ValueError("M must fix |00> and |++> up to phase")
        object.__setattr__(self, "tau1", t1)
        object.__setattr__(self, "tau2", t2)
        object.__setattr__(self, "m", m)

    @cached_property
    def gate(self) -> np.ndarray:
        t = np.kron(self.tau1, self.tau2)
        return dagger(t) @ self.m @ t

    @cached_property
    def delta(self) -> np.ndarray:
        """``tau1^dag tau2``: converts a tau2 frame into a tau1 frame."""
        return dagger(self.tau1) @ self.tau2

    @cached_property
    def vesicles(self) -> tuple[VesicleSet, VesicleSet]:
        return VesicleSet(self.tau1), VesicleSet(self.tau2)

    @cached_property
    def gamma(self) -> tuple[np.ndarray, ...]:
        """The 16 two-qubit twirl elements, ordered by (j, k) over I, X, Y, Z."""
        v1, v2 = self.vesicles
        return tuple(np.kron(a, b) for a in v1.elements for b in v2.elements)

    def matches(self, g: np.ndarray, atol: float = PHASE_ATOL) -> bool:
        return equal_up_to_phase(self.gate, g, atol)

    @cached_property
    def pushed_table(self) -> dict[tuple[str, str], tuple[np.ndarray, np.ndarray]]:
        return {
            (j, k): pushed_pair((j, k), self) for j in PAULI_ORDER for k in PAULI_ORDER
        }


def pushed_pair(jk: tuple[str, str], dec: TauDecomposition) -> tuple[np.ndarray, np.ndarray]:
    """Single-qubit pair ``(P', Q')`` with
    ``(tau1^dag P_j tau1 (x) tau2^dag P_k tau2) G = G (P' (x) Q')`` up to phase.

    ``M^dag (P_j (x) I) M`` and ``M^dag (I (x) P_k) M`` are Pauli strings; their
    product splits into one factor per qubit, which is then moved into the
    tau frames.
    """
    j, k = jk
    first = push_pauli_through_clifford(PauliString(j + "I"), dec.m)
    second = push_pauli_through_clifford(PauliString("I" + k), dec.m)
    prod = first * second
    a, b = prod.letters
    p_prime = dagger(dec.tau1) @ PAULI_MATRICES[a] @ dec.tau1
    q_prime = dagger(dec.tau2) @ PAULI_MATRICES[b] @ dec.tau2
    return p_prime, q_prime


# ---------------------------------------------------------------------------
# Generalised twirl and mixture extraction
# ---------------------------------------------------------------------------


def _check_self_adjoint(ops: Sequence[np.ndarray], dim: int) -> None:
    for op in ops:
        op = np.asarray(op)
        if op.shape != (dim, dim):
            raise ValueError("twirl element dimension does not match the channel")
        if not np.allclose(op, dagger(op), atol=1e-10):
            raise ValueError("twirl elements must be self-adjoint")


def generalized_twirl(e: Channel, lam: Sequence[np.ndarray]) -> Channel:
    """Average of ``lambda o e o lambda^dag`` over the elements of ``lam``."""
    lam = [np.asarray(x, dtype=complex) for x in lam]
    if not lam:
        raise ValueError("empty twirl set")
    _check_self_adjoint(lam, e.dim_in)
    scale = 1 / np.sqrt(len(lam))
    return Channel(
        tuple(scale * (x @ k @ dagger(x)) for x in lam for k in e.kraus), "twirled"
    )


@dataclass(frozen=True)
class MixtureResult:
    weights: np.ndarray
    residual: float
    ok: bool

    def channel(self, unitaries: Sequence[np.ndarray]) -> Channel:
        w = np.clip(self.weights.real, 0, None)
        w = w / w.sum()
        return Channel.mixture(list(w), list(unitaries), "stochastic")


def extract_mixture(e: Channel, unitaries: Sequence[np.ndarray], tol: float = MIXTURE_TOL) -> MixtureResult:
    """Least-squares fit of ``e`` by a combination of conjugations ``u . u^dag``.

    ``ok`` requires a superoperator residual below ``tol``, weights no lower than
    ``-tol`` and a unit total.
    """
    basis = np.stack([np.kron(u, np.conj(u)).reshape(-1) for u in unitaries], axis=1)
    target = e.superop.reshape(-1)
    coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
    residual = float(np.linalg.norm(basis @ coeffs - target))
    weights = coeffs.real
    ok = (
        residual < tol
        and float(np.max(np.abs(coeffs.imag))) < tol
        and float(weights.min()) >= -tol
        and abs(weights.sum() - 1) < tol
    )
    return MixtureResult(weights, residual, bool(ok))


def kraus_trace_weights(e: Channel, unitaries: Sequence[np.ndarray]) -> np.ndarray:
    """``sum_K |Tr[u K]|^2 / d^2`` for each ``u``: the mixture a group twirl produces."""
    d = e.dim_in
    return np.array(
        [sum(abs(np.trace(dagger(u) @ k)) ** 2 for k in e.kraus) / d**2 for u in unitaries]
    )


# ---------------------------------------------------------------------------
# Lambda summation and unflippable sets
# ---------------------------------------------------------------------------


def _as_pauli(p) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString(p)


def check_lambda_summation(q: Iterable, lam: Iterable) -> bool:
    """True iff ``sum_lambda xi(g1 g2, lambda) = |Lambda| [g1 == g2]`` on all pairs of ``q``."""
    q = [_as_pauli(x).unsigned() for x in q]
    lam = [_as_pauli(x).unsigned() for x in lam]
    for g1 in q:
        for g2 in q:
            prod = (g1 * g2).unsigned()
            total = sum(pauli_commutator(prod, x) for x in lam)
            if total != (len(lam) if g1 == g2 else 0):
                return False
    return True


def is_unflippable(s: Iterable) -> bool:
    members = {_as_pauli(x).letters for x in s}
    if any(len(m) != 2 for m in members):
        raise ValueError("unflippable sets hold two-qubit Pauli strings")
    for m in members:
        if m != "II" and m[::-1] != m and m[::-1] in members:
            return False
        # P (x) P with P != I is its own flip
        if m != "II" and m[0] == m[1]:
            return False
    return True


@dataclass(frozen=True)
class UnflippableSet:
    members: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(_as_pauli(x).letters for x in self.members))
        if not is_unflippable(self.members):
            raise ValueError(f"{sorted(self.members)} contains a flipped pair")

    def products(self) -> set[str]:
        return {
            (PauliString(a) * PauliString(b)).letters
            for a in self.members
            for b in self.members
            if a != b
        }


XY_TWIRL_SET = ("II", "XX", "YY", "ZZ")
# all two-qubit strings whose flip is a different string of the same product class
PRODUCT_SET = tuple(
    s for s in ("XY", "XZ", "YX", "YZ", "ZX", "ZY", "IX", "IY", "IZ", "XI", "YI", "ZI")
)


def sign_table(rows: Sequence[str] = XY_TWIRL_SET, cols: Sequence[str] = PRODUCT_SET) -> np.ndarray:
    return np.array(
        [[pauli_commutator(PauliString(c), PauliString(r)) for c in cols] for r in rows]
    )


# ---------------------------------------------------------------------------
# Twirl instructions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TwirlInstruction:
    """Single-qubit pairs placed after (``left``) and before (``right``) a gate."""

    left: tuple[np.ndarray, np.ndarray]
    right: tuple[np.ndarray, np.ndarray]
    replaced_gate: np.ndarray | None = None
    label: str = ""

    def dressed(self, gate: np.ndarray) -> np.ndarray:
        core = gate if self.replaced_gate is None else self.replaced_gate
        return np.kron(*self.left) @ core @ np.kron(*self.right)


def tau_twirl_instruction(dec: TauDecomposition, seed=None, jk: tuple[str, str] | None = None) -> TwirlInstruction:
    if jk is None:
        rng = as_rng(seed)
        jk = (PAULI_ORDER[rng.integers(4)], PAULI_ORDER[rng.integers(4)])
    v1, v2 = dec.vesicles
    left = (v1.element(jk[0]), v2.element(jk[1]))
    right = dec.pushed_table[jk]
    return TwirlInstruction(left, right, None, "".join(jk))


def xy_twirl_instruction(seed=None, letter: str | None = None) -> TwirlInstruction:
    if letter is None:
        letter = PAULI_ORDER[as_rng(seed).integers(4)]
    p = PAULI_MATRICES[letter]
    return TwirlInstruction((p, p), (p, p), None, letter * 2)


def xi_signs(p: PauliString) -> tuple[int, int]:
    """Signs ``(s_xx, s_yy)`` with ``p (XX + YY) p = s_xx XX + s_yy YY``."""
    if p.n_qubits != 2:
        raise ValueError("expected a two-qubit Pauli string")
    return pauli_commutator(PauliString("XX"), p), pauli_commutator(PauliString("YY"), p)


def strong_xy_twirl_instruction(p: PauliString, t: float, *, n3: bool) -> TwirlInstruction:
    """Dress ``exp(-i t H)`` as ``p exp(-i t Xi(p)) p``.

    Only meaningful when every sign variant of the gate suffers the same noise;
    callers state that with ``n3=True``.
    """
    if not n3:
        raise ValueError(
            "the strong XY twirl swaps in sign-variant gates and needs noise that "
            "does not depend on the variant (declare n3 in the noise model)"
        )
    p = _as_pauli(p).unsigned()
    s_xx, s_yy = xi_signs(p)
    a, b = p.factors()
    return TwirlInstruction((a, b), (a, b), xy_gate(t, s_xx, s_yy), p.letters)


def spam_twirl_layers(tau: np.ndarray, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Independent coins for the prep-side and measurement-side ``tau^dag Z tau`` layer."""
    rng = as_rng(seed)
    flip = dagger(tau) @ Z @ tau
    prep = flip if rng.random() < 0.5 else I2.copy()
    meas = flip if rng.random() < 0.5 else I2.copy()
    return prep, meas


def twirl_group(family: str, dec: TauDecomposition | None = None) -> tuple[np.ndarray, ...]:
    """Elements whose conjugation average equals the family's twirl."""
    if family == "tau":
        if dec is None:
            raise ValueError("the tau twirl needs a decomposition")
        return dec.gamma
    if family == "xy":
        return tuple(PauliString(s).matrix for s in XY_TWIRL_SET)
    if family == "xy-strong":
        return tuple(p.matrix for p in all_pauli_strings(2))
    raise ValueError(f"unknown twirl family {family!r}")


def mixture_basis(family: str, dec: TauDecomposition | None = None) -> tuple[np.ndarray, ...]:
    """Unitaries a successfully twirled channel is a convex mixture of.

    For the tau family this is the twirl set itself. The XY twirls leave a
    Pauli channel whose support need not lie in the four-element weak twirl
    set, so the basis is every two-qubit Pauli string.
    """
    if family == "tau":
        return twirl_group(family, dec)
    if family in ("xy", "xy-strong"):
        return tuple(p.matrix for p in all_pauli_strings(2))
    raise ValueError(f"unknown twirl family {family!r}")


def twirl_instructions(family: str, dec: TauDecomposition | None = None, t: float = 0.0) -> list[TwirlInstruction]:
    """Every draw of a family, in a fixed order."""
    if family == "tau":
        return [tau_twirl_instruction(dec, jk=(j, k)) for j in PAULI_ORDER for k in PAULI_ORDER]
    if family == "xy":
        return [xy_twirl_instruction(letter=c) for c in PAULI_ORDER]
    if family == "xy-strong":
        return [strong_xy_twirl_instruction(p, t, n3=True) for p in all_pauli_strings(2)]
    raise ValueError(f"unknown twirl family {family!r}")


# ---------------------------------------------------------------------------
# Clifford enumeration and decomposition search
# ---------------------------------------------------------------------------


def _phase_key(u: np.ndarray) -> bytes:
    flat = u.reshape(-1)
    idx = int(np.argmax(np.abs(flat) > 1e-6))
    v = flat * (abs(flat[idx]) / flat[idx])
    v = np.round(v, 6) + 0.0  # fold -0.0 into 0.0
    return v.tobytes()


@lru_cache(maxsize=1)
def two_qubit_cliffords() -> tuple[np.ndarray, ...]:
    """All 11520 two-qubit Cliffords modulo phase, by breadth-first closure."""
    gens = [
        np.kron(H, I2),
        np.kron(I2, H),
        np.kron(S, I2),
        np.kron(I2, S),
        CNOT,
    ]
    start = np.eye(4, dtype=complex)
    seen = {_phase_key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                v = g @ u
                key = _phase_key(v)
                if key not in seen:
                    seen[key] = v
                    nxt.append(v)
        frontier = nxt
    return tuple(seen.values())


@lru_cache(maxsize=1)
def admissible_cliffords() -> tuple[np.ndarray, ...]:
    """Cliffords fixing ``|00>`` and ``|++>`` up to phase."""
    return tuple(
        m
        for m in two_qubit_cliffords()
        if fixes_state(m, ZERO_ZERO) and fixes_state(m, PLUS_PLUS)
    )


def su2(a: float, b: float, c: float) -> np.ndarray:
    """``Rz(a) Ry(b) Rz(c)``."""
    rz = lambda x: np.diag([np.exp(-0.5j * x), np.exp(0.5j * x)])
    ry = np.array(
        [[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]], dtype=complex
    )
    return rz(a) @ ry @ rz(c)


def _spectrum_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Distance between the eigenphase multisets of ``a`` and ``b``, minimised over a
    global phase; conjugation preserves spectra so a large gap rules a candidate out."""
    ea = np.linalg.eigvals(a)
    eb = np.linalg.eigvals(b)
    best = np.inf
    for shift in eb:
        rot = ea[0] / shift
        cand = eb * rot
        used = np.zeros(len(cand), bool)
        worst = 0.0
        for x in ea:
            dist = np.abs(cand - x)
            dist[used] = np.inf
            i = int(np.argmin(dist))
            used[i] = True
            worst = max(worst, dist[i])
        best = min(best, worst)
    return float(best)


@dataclass
class SearchResult:
    decomposition: TauDecomposition | None
    residual: float
    best_residual: float
    candidates_tried: int
    alternatives: list[TauDecomposition] = field(default_factory=list)


def search_tau_decomposition(
    g: np.ndarray,
    tolerance: float = 1e-6,
    seed=0,
    restarts: int = 6,
    collect_alternatives: bool = False,
) -> SearchResult:
    """Look for ``(tau1, tau2, M)`` reproducing ``g`` up to phase.

    Every admissible Clifford is tried (ordered by how well its spectrum
    matches ``g``), with Nelder-Mead restarts over Euler angles of
    ``SU(2) x SU(2)``. The first hit below ``tolerance`` is returned; with
    ``collect_alternatives`` the remaining candidates are also scanned.
    """
    g = check_unitary(g)
    if g.shape != (4, 4):
        raise ValueError("expected a two-qubit unitary")
    rng = as_rng(seed)
    candidates = sorted(admissible_cliffords(), key=lambda m: _spectrum_gap(m, g))

    def build(x: np.ndarray, m: np.ndarray) -> np.ndarray:
        t = np.kron(su2(*x[:3]), su2(*x[3:]))
        return dagger(t) @ m @ t

    def loss(x: np.ndarray, m: np.ndarray) -> float:
        return 1.0 - abs(np.vdot(build(x, m), g)) / 4

    def residual_vector(x: np.ndarray, m: np.ndarray) -> np.ndarray:
        a = build(x, m)
        diff = a * np.conj(np.exp(1j * np.angle(np.vdot(g, a)))) - g
        return np.concatenate([diff.real.ravel(), diff.imag.ravel()])

    found: TauDecomposition | None = None
    found_residual = np.inf
    best = np.inf
    alternatives: list[TauDecomposition] = []
    tried = 0
    for m in candidates:
        tried += 1
        starts = [np.zeros(6)] + [rng.uniform(-np.pi, np.pi, 6) for _ in range(restarts)]
        local_best = np.inf
        local_x = None
        for x0 in starts:
            r0 = phase_distance(build(x0, m), g)
            if r0 < tolerance:
                local_best, local_x = r0, x0
                break
            res = minimize(
                loss, x0, args=(m,), method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 4000, "maxfev": 8000},
            )
            x = res.x
            if loss(x, m) < 1e-6:
                # the overlap loss is quadratic at the optimum; a residual-vector
                # polish recovers full float precision
                x = least_squares(residual_vector, x, args=(m,), xtol=1e-15, ftol=1e-15, gtol=1e-15).x
            r = phase_distance(build(x, m), g)
            if r < local_best:
                local_best, local_x = r, x
            if r < tolerance:
                break
        best = min(best, local_best)
        if local_best < tolerance:
            dec = TauDecomposition(su2(*local_x[:3]), su2(*local_x[3:]), m)
            if found is None:
                found, found_residual = dec, local_best
                if not collect_alternatives:
                    break
            else:
                alternatives.append(dec)
    return SearchResult(found, found_residual, best, tried, alternatives)


def sqrt_iswap() -> np.ndarray:
    """``exp(-i pi/8 (XX + YY))``, the square root of iSWAP (up to phase)."""
    return xy_gate(np.pi / 8)

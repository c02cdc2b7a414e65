"""Dense linear algebra for small quantum systems.

Pauli strings, standard gates, Kraus channels and their superoperators, and the
distance measures (total variation, diamond-norm lower bound) used elsewhere.

Conventions:
  * qubit 0 is the most significant tensor factor (leftmost in ``np.kron``);
  * superoperators act on row-major vectorised matrices, so
    ``vec(K rho K^dag) = (K kron conj(K)) vec(rho)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

ATOL = 1e-10
PHASE_ATOL = 1e-9

# ---------------------------------------------------------------------------
# Standard gates
# ---------------------------------------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j]).astype(complex)
T = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

PAULI_MATRICES: dict[str, np.ndarray] = {"I": I2, "X": X, "Y": Y, "Z": Z}

SINGLE_QUBIT_GATES: dict[str, np.ndarray] = {
    "I": I2,
    "X": X,
    "Y": Y,
    "Z": Z,
    "H": H,
    "S": S,
    "Sdg": S.conj().T,
    "T": T,
    "Tdg": T.conj().T,
}

TWO_QUBIT_GATES: dict[str, np.ndarray] = {"CNOT": CNOT, "CZ": CZ, "SWAP": SWAP}


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(u).T


def xy_hamiltonian(s_xx: int = 1, s_yy: int = 1) -> np.ndarray:
    """``s_xx * XX + s_yy * YY``; the default signs give the XY interaction."""
    return s_xx * np.kron(X, X) + s_yy * np.kron(Y, Y)


def xy_gate(t: float, s_xx: int = 1, s_yy: int = 1) -> np.ndarray:
    """``exp(-i t (s_xx XX + s_yy YY))``."""
    return expm(-1j * t * xy_hamiltonian(s_xx, s_yy))


def is_unitary(u: np.ndarray, atol: float = ATOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    dev = dagger(u) @ u
    dev[np.diag_indices(u.shape[0])] -= 1
    return float(np.abs(dev).max()) <= atol


def check_unitary(u: np.ndarray, atol: float = ATOL) -> np.ndarray:
    """Validate a square, power-of-two sized unitary and return it as complex."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    d = u.shape[0]
    if d < 2 or d & (d - 1):
        raise ValueError(f"dimension {d} is not a power of two")
    if not is_unitary(u, atol):
        raise ValueError("matrix is not unitary")
    return u


def optimal_phase(a: np.ndarray, b: np.ndarray) -> complex:
    """Unit phase ``c`` minimising ``||a - c b||_F``."""
    overlap = np.vdot(b, a)
    if abs(overlap) < 1e-300:
        return 1.0 + 0j
    return overlap / abs(overlap)


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-entry distance between ``a`` and ``b`` minimised over a global phase.

    The Frobenius-optimal phase is refined with a bounded scalar search on the
    max-entry objective, which is the metric used for "equal up to phase".
    """
    from scipy.optimize import minimize_scalar

    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    phi0 = np.angle(optimal_phase(a, b))

    def objective(phi: float) -> float:
        return float(np.max(np.abs(a - np.exp(1j * phi) * b)))

    best = objective(phi0)
    if best > 1e-14:
        res = minimize_scalar(
            objective, bounds=(phi0 - 0.5, phi0 + 0.5), method="bounded",
            options={"xatol": 1e-12},
        )
        best = min(best, float(res.fun))
    return best


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = PHASE_ATOL) -> bool:
    return phase_distance(a, b) < atol


def random_unitary(dim: int, seed=None) -> np.ndarray:
    return np.asarray(unitary_group.rvs(dim, random_state=as_rng(seed)), dtype=complex)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------

# product table for single letters: (a, b) -> (phase, letter) with a.b = phase * letter
_LETTER_PRODUCT: dict[tuple[str, str], tuple[complex, str]] = {}
for _a in "IXYZ":
    _LETTER_PRODUCT[("I", _a)] = (1, _a)
    _LETTER_PRODUCT[(_a, "I")] = (1, _a)
    _LETTER_PRODUCT[(_a, _a)] = (1, "I")
for _a, _b, _c in (("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")):
    _LETTER_PRODUCT[(_a, _b)] = (1j, _c)
    _LETTER_PRODUCT[(_b, _a)] = (-1j, _c)

_PHASES = (1, -1, 1j, -1j)


def _normalise_phase(phase: complex) -> complex:
    for p in _PHASES:
        if abs(phase - p) < 1e-9:
            return complex(p)
    raise ValueError(f"phase {phase} is not one of +1, -1, +i, -i")


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-qubit Paulis with a phase in {+1, -1, +i, -i}."""

    letters: str
    phase: complex = 1

    def __post_init__(self):
        if not self.letters or any(ch not in "IXYZ" for ch in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "phase", _normalise_phase(complex(self.phase)))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        prefix = {1: "", -1: "-", 1j: "i", -1j: "-i"}[self.phase]
        return prefix + self.letters

    def __mul__(self, other: "PauliString") -> "PauliString":
        if not isinstance(other, PauliString):
            return NotImplemented
        if self.n_qubits != other.n_qubits:
            raise ValueError("Pauli strings act on different qubit counts")
        phase = self.phase * other.phase
        letters = []
        for a, b in zip(self.letters, other.letters):
            ph, c = _LETTER_PRODUCT[(a, b)]
            phase *= ph
            letters.append(c)
        return PauliString("".join(letters), phase)

    def unsigned(self) -> "PauliString":
        return PauliString(self.letters)

    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def factors(self) -> list[np.ndarray]:
        return [PAULI_MATRICES[ch] for ch in self.letters]

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.phase * kron(*self.factors())

    @classmethod
    def from_matrix(cls, m: np.ndarray, atol: float = PHASE_ATOL) -> "PauliString | None":
        """Identify ``m`` as a phased Pauli string, or return None."""
        m = np.asarray(m, dtype=complex)
        d = m.shape[0]
        n = d.bit_length() - 1
        for letters in all_pauli_letters(n):
            p = kron(*(PAULI_MATRICES[ch] for ch in letters))
            coeff = np.trace(p @ m) / d
            if abs(abs(coeff) - 1) < atol:
                if np.allclose(m, coeff * p, atol=atol):
                    try:
                        return cls(letters, coeff)
                    except ValueError:
                        return None
                return None
        return None


def all_pauli_letters(n: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n)]


def all_pauli_strings(n: int) -> list[PauliString]:
    return [PauliString(s) for s in all_pauli_letters(n)]


def pauli_commutator(a: PauliString, b: PauliString) -> int:
    """Sign ``s`` with ``a b = s b a``."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("Pauli strings act on different qubit counts")
    clashes = sum(
        1 for p, q in zip(a.letters, b.letters) if p != "I" and q != "I" and p != q
    )
    return -1 if clashes % 2 else 1


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


def superoperator(kraus: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k, np.conj(k)) for k in kraus)


def apply_superoperator(sop: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d_out = int(round(np.sqrt(sop.shape[0])))
    return (sop @ rho.reshape(-1)).reshape(d_out, d_out)


@dataclass(frozen=True, eq=False)
class Channel:
    """CPTP map in Kraus form."""

    kraus: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ks[0].shape
        if any(k.shape != shape or k.ndim != 2 for k in ks):
            raise ValueError("Kraus operators must share one 2-D shape")
        tp = sum(dagger(k) @ k for k in ks)
        if not np.allclose(tp, np.eye(shape[1]), atol=ATOL):
            err = float(np.max(np.abs(tp - np.eye(shape[1]))))
            raise ValueError(f"channel is not trace preserving (error {err:.2e})")
        object.__setattr__(self, "kraus", ks)

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim_in.bit_length() - 1

    @cached_property
    def superop(self) -> np.ndarray:
        return superoperator(self.kraus)

    def choi(self) -> np.ndarray:
        """Unnormalised Choi matrix ``sum_ij |i><j| (x) E(|i><j|)``."""
        d = self.dim_in
        out = np.zeros((d * self.dim_out, d * self.dim_out), dtype=complex)
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1
                out += np.kron(e, self.apply(e))
        return out

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ dagger(k) for k in self.kraus)

    def apply_adjoint(self, op: np.ndarray) -> np.ndarray:
        return sum(dagger(k) @ op @ k for k in self.kraus)

    def compose(self, after: "Channel") -> "Channel":
        """Channel that applies ``self`` first and ``after`` second."""
        if after.dim_in != self.dim_out:
            raise ValueError("dimension mismatch in composition")
        return Channel(tuple(b @ a for b in after.kraus for a in self.kraus))

    def tensor(self, other: "Channel") -> "Channel":
        return Channel(tuple(np.kron(a, b) for a in self.kraus for b in other.kraus))

    def is_identity(self, atol: float = ATOL) -> bool:
        if atol == ATOL:
            return self._is_identity
        return self.dim_in == self.dim_out and np.allclose(self.superop, np.eye(self.dim_in**2), atol=atol)

    @cached_property
    def _is_identity(self) -> bool:
        return self.dim_in == self.dim_out and np.allclose(self.superop, np.eye(self.dim_in**2), atol=ATOL)

    @classmethod
    def identity(cls, n_qubits: int = 1) -> "Channel":
        return cls((np.eye(2**n_qubits, dtype=complex),), "identity")

    @classmethod
    def unitary(cls, u: np.ndarray, label: str = "unitary") -> "Channel":
        return cls((np.asarray(u, dtype=complex),), label)

    @classmethod
    def from_superoperator(cls, sop: np.ndarray, label: str = "superop", atol: float = 1e-9) -> "Channel":
        """Kraus form of a square superoperator, via the eigenvectors of its
        reshuffled (Choi) matrix."""
        sop = np.asarray(sop, dtype=complex)
        d = math.isqrt(sop.shape[0])
        if sop.shape != (d * d, d * d):
            raise ValueError("superoperator must be d^2 x d^2")
        choi = sop.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
        vals, vecs = np.linalg.eigh((choi + dagger(choi)) / 2)
        if vals.min() < -atol:
            raise ValueError(f"map is not completely positive (eigenvalue {vals.min():.2e})")
        ks = tuple(np.sqrt(v) * vecs[:, i].reshape(d, d) for i, v in enumerate(vals) if v > atol)
        return cls(ks, label)

    @classmethod
    def mixture(
        cls, weights: Sequence[float], unitaries: Sequence[np.ndarray], label: str = "mixture"
    ) -> "Channel":
        """Probabilistic unitary channel; zero-weight terms are dropped."""
        ks = tuple(
            np.sqrt(w) * np.asarray(u, dtype=complex)
            for w, u in zip(weights, unitaries)
            if w > 0
        )
        return cls(ks, label)


def _lift_single(channel: Channel, n_qubits: int) -> Channel:
    if n_qubits == 1:
        return channel
    out = channel
    for _ in range(n_qubits - 1):
        out = out.tensor(channel)
    return out


def depolarizing(p: float, n_qubits: int = 1) -> Channel:
    """``rho -> (1-p) rho + p I/d``."""
    if not 0 <= p <= 1:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    paulis = all_pauli_strings(n_qubits)
    d2 = 4**n_qubits
    weights = [1 - p + p / d2] + [p / d2] * (d2 - 1)
    return Channel.mixture(weights, [q.matrix for q in paulis], f"depolarizing({p})")


def pauli_channel(probs: Mapping[str, float] | Sequence[float], n_qubits: int | None = None) -> Channel:
    """Pauli channel from a ``{letters: prob}`` map or a probability vector
    ordered like ``all_pauli_letters``."""
    if isinstance(probs, Mapping):
        items = dict(probs)
        n = n_qubits or len(next(iter(items)))
    else:
        vec = list(probs)
        n = n_qubits or (len(vec).bit_length() - 1) // 2
        items = dict(zip(all_pauli_letters(n), vec))
    if any(w < -1e-12 for w in items.values()):
        raise ValueError("Pauli probabilities must be non-negative")
    total = sum(items.values())
    if abs(total - 1) > 1e-9:
        raise ValueError(f"Pauli probabilities sum to {total}, not 1")
    letters = list(items)
    return Channel.mixture(
        [max(items[s], 0.0) for s in letters],
        [PauliString(s).matrix for s in letters],
        "pauli",
    )


def dephasing(p: float, n_qubits: int = 1) -> Channel:
    """Independent ``rho -> (1-p) rho + p Z rho Z`` on each qubit."""
    if not 0 <= p <= 1:
        raise ValueError("dephasing probability must lie in [0, 1]")
    one = Channel.mixture([1 - p, p], [I2, Z], f"dephasing({p})")
    return _lift_single(one, n_qubits)


def amplitude_damping(gamma: float, n_qubits: int = 1) -> Channel:
    if not 0 <= gamma <= 1:
        raise ValueError("damping rate must lie in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return _lift_single(Channel((k0, k1), f"amplitude-damping({gamma})"), n_qubits)


def random_channel(dim: int, n_kraus: int, seed=None) -> Channel:
    """Random CPTP map from a Haar isometry ``C^dim -> C^(dim * n_kraus)``."""
    big = random_unitary(dim * n_kraus, seed)[:, :dim]
    return Channel(tuple(big[i * dim:(i + 1) * dim] for i in range(n_kraus)), "random")


def conjugate_channel(e: Channel, u: np.ndarray) -> Channel:
    """Kraus operators ``u K u^dag``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (e.dim_in, e.dim_in) or e.dim_in != e.dim_out:
        raise ValueError("unitary dimension does not match the channel")
    return Channel(tuple(u @ k @ dagger(u) for k in e.kraus), e.label)


def mix_channels(weights: Sequence[float], channels: Sequence[Channel]) -> Channel:
    """Convex combination of channels (Kraus operators scaled by sqrt(weight))."""
    if len(weights) != len(channels) or not channels:
        raise ValueError("need one weight per channel")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    if abs(sum(weights) - 1) > 1e-9:
        raise ValueError("weights must sum to 1")
    dims = {(c.dim_in, c.dim_out) for c in channels}
    if len(dims) != 1:
        raise ValueError("channels have different dimensions")
    ks = tuple(np.sqrt(w) * k for w, c in zip(weights, channels) if w > 0 for k in c.kraus)
    return Channel(ks, "mixture")


# ---------------------------------------------------------------------------
# States and distributions
# ---------------------------------------------------------------------------


def is_density_matrix(rho: np.ndarray, atol: float = ATOL) -> bool:
    rho = np.asarray(rho)
    if not np.allclose(rho, dagger(rho), atol=atol):
        return False
    if abs(np.trace(rho) - 1) > atol:
        return False
    return bool(np.min(np.linalg.eigvalsh((rho + dagger(rho)) / 2)) > -1e-9)


def validate_distribution(p: Mapping[str, float], n_bits: int | None = None) -> None:
    total = sum(p.values())
    if abs(total - 1) > 1e-9:
        raise ValueError(f"probabilities sum to {total}")
    if n_bits is not None and any(len(k) != n_bits for k in p):
        raise ValueError("outcome length does not match qubit count")


def tvd(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Total variation distance; absent outcomes count as probability 0."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def trace_norm(a: np.ndarray) -> float:
    a = np.asarray(a)
    if np.allclose(a, dagger(a), atol=1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh((a + dagger(a)) / 2))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


# ---------------------------------------------------------------------------
# Diamond distance lower bound
# ---------------------------------------------------------------------------


def _extended_output(kraus: Sequence[np.ndarray], psi: np.ndarray, d: int) -> np.ndarray:
    # psi is a d x d matrix: |psi> = sum_ij psi[i, j] |i>_sys |j>_anc
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        v = (k @ psi).reshape(-1)
        out += np.outer(v, np.conj(v))
    return out


def _extended_adjoint(kraus: Sequence[np.ndarray], w: np.ndarray, d: int) -> np.ndarray:
    w4 = w.reshape(d, d, d, d)
    out = np.zeros((d, d, d, d), dtype=complex)
    for k in kraus:
        # (K^dag (x) I) W (K (x) I)
        out += np.einsum("ai,ajbk,bl->ijlk", np.conj(k), w4, k)
    return out.reshape(d * d, d * d)


def diamond_distance_estimate(
    a: Channel, b: Channel, restarts: int = 8, seed=0, iterations: int = 200
) -> float:
    """Lower bound on ``|| a - b ||_diamond`` by ascent over pure inputs on d (x) d.

    Returns the largest trace norm ``|| ((a - b) (x) id)(psi) ||_1`` found. Restart
    0 starts from the maximally entangled state; restart ``r > 0`` starts from
    a Haar-random state drawn from an independent stream derived from
    ``(seed, r)``, so the value never decreases when restarts are added.

    Each ascent step alternates between the Helstrom projector difference ``W``
    of the current output difference and the top eigenvector of the adjoint
    map applied to ``W``; the objective is nondecreasing along the iteration.
    """
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise ValueError("channels have different dimensions")
    d = a.dim_in
    if a.dim_out != d:
        raise ValueError("only square channels are supported")

    def value(psi: np.ndarray) -> tuple[float, np.ndarray]:
        diff = _extended_output(a.kraus, psi, d) - _extended_output(b.kraus, psi, d)
        evals, evecs = np.linalg.eigh((diff + dagger(diff)) / 2)
        w = (evecs * np.sign(evals)) @ dagger(evecs)
        return float(np.sum(np.abs(evals))), w

    best = 0.0
    base_seed = int(seed) if isinstance(seed, (int, np.integer)) else 0
    for r in range(max(restarts, 1)):
        if r == 0:
            psi = np.eye(d, dtype=complex) / np.sqrt(d)
        else:
            rng = np.random.default_rng(np.random.SeedSequence([base_seed, r]))
            v = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
            psi = (v / np.linalg.norm(v)).reshape(d, d)
        current, w = value(psi)
        for _ in range(iterations):
            m = _extended_adjoint(a.kraus, w, d) - _extended_adjoint(b.kraus, w, d)
            evals, evecs = np.linalg.eigh((m + dagger(m)) / 2)
            cand = evecs[:, -1].reshape(d, d)
            new, w_new = value(cand)
            if new <= current + 1e-13:
                break
            current, w, psi = new, w_new, cand
        best = max(best, current)
    return best

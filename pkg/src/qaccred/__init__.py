"""Accreditation of noisy quantum circuits with non-Clifford two-qubit gates."""

from .accredit import AccreditationConfig, AccreditationReport, run_accreditation, trap_count
from .circuits import Circuit, PlacedGate, load_circuit, save_circuit
from .noisesim import NoiseModel, NoiseSite, execute_exact, load_noise_model, sample
from .qalg import Channel, PauliString
from .twirl import TauDecomposition, search_tau_decomposition

__version__ = "0.1.0"

__all__ = [
    "AccreditationConfig",
    "AccreditationReport",
    "Channel",
    "Circuit",
    "NoiseModel",
    "NoiseSite",
    "PauliString",
    "PlacedGate",
    "TauDecomposition",
    "execute_exact",
    "load_circuit",
    "load_noise_model",
    "run_accreditation",
    "sample",
    "save_circuit",
    "search_tau_decomposition",
    "trap_count",
]

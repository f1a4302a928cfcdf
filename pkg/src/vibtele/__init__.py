"""Trapped-ion motional-state teleportation simulator."""
from .dynamics import PulseKind, PulseSpec, RamanGateSpec, RamanPhysicalParams, effective_rabi
from .noise import NoiseModel
from .protocol import (
    BobStrategy,
    ClassicalMessage,
    CorrectionPrescription,
    FidelityReport,
    ProtocolConfig,
    correction_prescription,
    outcome_statistics,
    run_teleportation,
)
from .statevec import Layout, StateVector, SubsystemDescriptor

__version__ = "0.1.0"

__all__ = [
    "BobStrategy", "ClassicalMessage", "CorrectionPrescription", "FidelityReport", "Layout",
    "NoiseModel", "ProtocolConfig", "PulseKind", "PulseSpec", "RamanGateSpec", "RamanPhysicalParams",
    "StateVector", "SubsystemDescriptor", "correction_prescription", "effective_rabi",
    "outcome_statistics", "run_teleportation",
]

"""Classical simulation of qubits encoded in coupled pendulums.

An n-qubit register is 2**n pendulums sharing a carrier frequency; the
complex envelope of each pendulum is one amplitude of the state vector.
"""

__version__ = "0.1.0"

from .circuit import Circuit, GateOp, parse_circuit, format_circuit
from .compiler import ControlSchedule, ControlSegment, PhysicalParams, compile_circuit, compile_gate
from .qstate import EnvelopeState, init_ground

__all__ = [
    "Circuit",
    "ControlSchedule",
    "ControlSegment",
    "EnvelopeState",
    "GateOp",
    "PhysicalParams",
    "compile_circuit",
    "compile_gate",
    "format_circuit",
    "init_ground",
    "parse_circuit",
]

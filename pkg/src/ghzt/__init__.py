"""Simulator for configurable controlled teleportation over multipartite GHZ states."""

from .errors import (
    LayoutError,
    MissingClassicalBit,
    NonPermutation,
    SizeCapExceeded,
    ZeroProbabilityBranch,
)
from .protocol import ProtocolConfig, Transcript, correction_ops, route_bits, run_protocol
from .qstate import DensityMatrix, StateVector, fidelity, pure_fidelity, reduced_density
from .resource import MessageState, Mode, build_layout, make_ghz, make_resource, random_message
from .verify import (
    enumerate_outcomes,
    extract_signed_permutation,
    fidelity_audit,
    regen_table,
    verify_corrections,
)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "LayoutError",
    "MessageState",
    "MissingClassicalBit",
    "Mode",
    "NonPermutation",
    "ProtocolConfig",
    "SizeCapExceeded",
    "StateVector",
    "Transcript",
    "ZeroProbabilityBranch",
    "build_layout",
    "correction_ops",
    "enumerate_outcomes",
    "extract_signed_permutation",
    "fidelity",
    "fidelity_audit",
    "make_ghz",
    "make_resource",
    "pure_fidelity",
    "random_message",
    "reduced_density",
    "regen_table",
    "route_bits",
    "run_protocol",
    "verify_corrections",
]

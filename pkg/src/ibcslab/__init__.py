"""Succinct interactive arguments from IOPs and vector commitments,
with a classical rewinding-extraction laboratory."""

__version__ = "0.1.0"

from .errors import (
    DecodeError,
    IbcsError,
    InfeasibleError,
    InstanceError,
    MessageError,
    ParameterError,
    ProtocolViolation,
    QueryError,
    TransportError,
)

__all__ = [
    "__version__",
    "DecodeError",
    "IbcsError",
    "InfeasibleError",
    "InstanceError",
    "MessageError",
    "ParameterError",
    "ProtocolViolation",
    "QueryError",
    "TransportError",
]

"""Continuous performance-engineering toolkit for microservice architectures.

The pipeline: ingest distributed-tracing spans into a log model, link the
log to an architecture model, annotate the architecture with measured
performance indices, detect Blob / Pipe-and-Filter antipatterns with fuzzy
occurrence probabilities, predict refactoring effects with exact MVA on a
closed queueing network, and apply chosen refactorings to both the model
and a simulated running system.
"""

from perfloop.errors import ParseError, PerfloopError, TargetNotFoundError, ValidationError

__all__ = [
    "ParseError",
    "PerfloopError",
    "TargetNotFoundError",
    "ValidationError",
]

__version__ = "0.1.0"

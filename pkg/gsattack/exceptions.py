"""
Исключения gsattack. У каждого класса стабильный машинный код (code);
CLI печатает его в JSON ошибки.
"""
from typing import Any, Dict, Optional


class GsAttackError(Exception):
    """Базовое исключение библиотеки."""

    code = "gsattack_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, "details": self.details}


class ConfigError(GsAttackError):
    code = "config_error"


# --- graph-core ---

class InvalidGraph(GsAttackError):
    code = "invalid_graph"


class EmptyEdgeSet(GsAttackError):
    code = "empty_edge_set"


class InvalidProbability(GsAttackError):
    code = "invalid_probability"


# --- diff-engine ---

class ShapeMismatch(GsAttackError):
    code = "shape_mismatch"


class NonFiniteValue(GsAttackError):
    code = "non_finite_value"


class NotScalarRoot(GsAttackError):
    code = "not_scalar_root"


# --- surrogate / attacker ---

class NonFiniteLoss(GsAttackError):
    code = "non_finite_loss"


class NoAdmissiblePair(GsAttackError):
    code = "no_admissible_pair"


class ExhaustedCandidates(GsAttackError):
    code = "exhausted_candidates"


# --- diagnostics ---

class DisconnectedGraph(GsAttackError):
    code = "disconnected_graph"


class BipartiteGraph(GsAttackError):
    code = "bipartite_graph"


# --- data-io ---

class SchemaError(GsAttackError):
    code = "schema_error"

    def __init__(self, message: str, file: Optional[str] = None, line: Optional[int] = None, **details: Any):
        super().__init__(message, file=file, line=line, **details)
        self.file = file
        self.line = line


class DuplicateEdge(SchemaError):
    code = "duplicate_edge"


class SelfLoopInInput(SchemaError):
    code = "self_loop_in_input"


class IndexOutOfRange(SchemaError):
    code = "index_out_of_range"


class ReplayMismatch(GsAttackError):
    code = "replay_mismatch"

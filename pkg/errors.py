"""
Exception hierarchy for the workbench.

Every error carries the module it came from so the harness can report
provenance, and the exit code the command-line harness maps it to.
"""

from typing import Dict, Optional

from constants import EXIT_CONFIG_ERROR, EXIT_PROTOCOL_ERROR, EXIT_SAFETY_REFUSAL


class FedBenchError(Exception):
    """Base class for all workbench errors."""

    exit_code = EXIT_PROTOCOL_ERROR

    def __init__(self, module: str, message: str):
        super().__init__(f"{module}: {message}")
        self.module = module
        self.message = message

    def to_dict(self) -> Dict[str, str]:
        return {"error": str(self)}


class InvalidParameterError(FedBenchError):
    pass


class EncodingOverflowError(FedBenchError):
    pass


class WrongKeyError(FedBenchError):
    pass


class InvalidDatasetError(FedBenchError):
    pass


class ProtocolError(FedBenchError):
    pass


class RoutingError(FedBenchError):
    pass


class DecodeError(FedBenchError):
    """Malformed bytes; `offset` is where decoding stopped."""

    def __init__(self, module: str, message: str, offset: int):
        super().__init__(module, f"{message} at byte offset {offset}")
        self.offset = offset


class DeadlockError(FedBenchError):
    def __init__(self, module: str, message: str, phases: Dict[str, str]):
        listing = ", ".join(f"{party}={phase}" for party, phase in phases.items())
        super().__init__(module, f"{message} [{listing}]")
        self.phases = phases


class SafetyGuardError(FedBenchError):
    exit_code = EXIT_SAFETY_REFUSAL

    def __init__(self, module: str, condition: str, party: Optional[str] = None):
        prefix = f"party {party} refused: " if party else "refused: "
        super().__init__(module, prefix + condition)
        self.condition = condition
        self.party = party


class MissingEntityError(FedBenchError):
    def __init__(self, module: str, party: str, entity_id: str):
        super().__init__(module, f"party {party} holds no features for id {entity_id!r}")
        self.party = party
        self.entity_id = entity_id


class DivergenceAlarm(FedBenchError):
    pass


class ConfigError(FedBenchError):
    exit_code = EXIT_CONFIG_ERROR


class SchemaError(FedBenchError):
    exit_code = EXIT_CONFIG_ERROR


class SingularMatrixError(FedBenchError):
    pass

"""Multi-modal data lake query engine."""

from .discovery import DiscoveryConfig, Registry, discover, evaluate_discovery
from .dsl import ProgramIR, parse_program, print_program, validate_program
from .errors import LakeError
from .executor import compile_physical, execute, plan_program, run_program
from .lake import DataLake, load_manifest
from .model import Modality, Record, RecordSet, canonical_hash
from .verifier import VerifierConfig, verify

__version__ = "0.1.0"

__all__ = [
    "DataLake", "DiscoveryConfig", "LakeError", "Modality", "ProgramIR", "Record", "RecordSet",
    "Registry", "VerifierConfig", "canonical_hash", "compile_physical", "discover",
    "evaluate_discovery", "execute", "load_manifest", "parse_program", "plan_program",
    "print_program", "run_program", "validate_program", "verify",
]

"""Structured extraction of study-plan-card PDFs: deterministic table parsing with LLM fallback."""

from .core import ExtractionOutcome, KrsRecord, Metadata, ValidationPolicy, serialize_record, validate_record
from .textnorm import comparison_key, levenshtein, similarity

__all__ = [
    "ExtractionOutcome",
    "KrsRecord",
    "Metadata",
    "ValidationPolicy",
    "comparison_key",
    "levenshtein",
    "serialize_record",
    "similarity",
    "validate_record",
]

__version__ = "0.1.0"

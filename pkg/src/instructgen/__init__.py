"""instructgen: a semi-automatic visual instruction dataset engine.

Pipeline stages: ingest images per domain, caption them through a
vision-language backend, generate typed instruction-answer pairs from
captions and seed questions, expand with multi-round VQA and converted
external datasets, run multi-round human correction, track costs exactly,
and export a fine-tuning-ready dialogue dataset.
"""

from .costing import CostLedger, Money, PriceTable, estimate
from .domains import ConvType, Domain, QuestionType
from .records import (
    CaptionRecord,
    GenerationConfig,
    ImageRecord,
    ImageState,
    InstructionRecord,
    Provenance,
    QATurn,
    ReviewState,
    SeedQuestion,
)
from .store import RecordStore
from .validation import ValidationReport, validate_record

__version__ = "0.1.0"

__all__ = [
    "CaptionRecord",
    "ConvType",
    "CostLedger",
    "Domain",
    "GenerationConfig",
    "ImageRecord",
    "ImageState",
    "InstructionRecord",
    "Money",
    "PriceTable",
    "Provenance",
    "QATurn",
    "QuestionType",
    "RecordStore",
    "ReviewState",
    "SeedQuestion",
    "ValidationReport",
    "estimate",
    "validate_record",
    "__version__",
]

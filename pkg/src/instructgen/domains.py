"""Domain taxonomy and question-type vocabulary.

The engine partitions work into 24 task domains: 15 single-turn perception
domains, 8 single-turn reasoning domains, and one multi-round long VQA
domain. Every record in the store is tagged with one of these domains, and
several stages (prompt assembly, seed banks, acceptance checklists) key
their behaviour off the domain.
"""
from __future__ import annotations

from enum import Enum


class ConvType(str, Enum):
    """Conversation shape a domain produces."""

    SINGLE_TURN_PERCEPTION = "single_turn_perception"
    SINGLE_TURN_REASONING = "single_turn_reasoning"
    MULTI_ROUND = "multi_round"


class Domain(str, Enum):
    # Single-turn, perception
    IMAGE_STYLE = "image_style"
    IMAGE_SCENE = "image_scene"
    IMAGE_QUALITY = "image_quality"
    IMAGE_COMPARISON = "image_comparison"
    OBJECT_LOCALIZATION = "object_localization"
    OBJECT_RELATION = "object_relation"
    ATTRIBUTE_RECOGNITION = "attribute_recognition"
    IMAGE_DESCRIPTION = "image_description"
    OCR = "ocr"
    POSTERS = "posters"
    ARTWORK = "artwork"
    LANDMARK = "landmark"
    SPATIAL_RELATIONSHIP = "spatial_relationship"
    BRAND_RECOGNITION = "brand_recognition"
    SPECIES_RECOGNITION = "species_recognition"
    # Single-turn, reasoning
    NUMERICAL_CALCULATION = "numerical_calculation"
    IMAGE_EMOTION = "image_emotion"
    COMMONSENSE_REASONING = "commonsense_reasoning"
    COMPLEX_REASONING = "complex_reasoning"
    SOCIAL_RELATION = "social_relation"
    FUTURE_PREDICTION = "future_prediction"
    MEME_COMPREHENSION = "meme_comprehension"
    WRITING = "writing"
    # Multi-round
    MULTI_ROUND_LONG_VQA = "multi_round_long_vqa"

    @property
    def conv_type(self) -> ConvType:
        return _CONV_TYPE[self]

    @property
    def display_name(self) -> str:
        if self is Domain.OCR:
            return "OCR"
        return self.value.replace("_", " ")

    @classmethod
    def parse(cls, text: str) -> "Domain":
        """Accept either the canonical value or a spaced display form."""
        slug = text.strip().lower().replace("-", "_").replace(" ", "_")
        try:
            return cls(slug)
        except ValueError:
            raise ValueError(f"unknown domain: {text!r}") from None


_PERCEPTION = (
    Domain.IMAGE_STYLE,
    Domain.IMAGE_SCENE,
    Domain.IMAGE_QUALITY,
    Domain.IMAGE_COMPARISON,
    Domain.OBJECT_LOCALIZATION,
    Domain.OBJECT_RELATION,
    Domain.ATTRIBUTE_RECOGNITION,
    Domain.IMAGE_DESCRIPTION,
    Domain.OCR,
    Domain.POSTERS,
    Domain.ARTWORK,
    Domain.LANDMARK,
    Domain.SPATIAL_RELATIONSHIP,
    Domain.BRAND_RECOGNITION,
    Domain.SPECIES_RECOGNITION,
)

_REASONING = (
    Domain.NUMERICAL_CALCULATION,
    Domain.IMAGE_EMOTION,
    Domain.COMMONSENSE_REASONING,
    Domain.COMPLEX_REASONING,
    Domain.SOCIAL_RELATION,
    Domain.FUTURE_PREDICTION,
    Domain.MEME_COMPREHENSION,
    Domain.WRITING,
)

_CONV_TYPE: dict[Domain, ConvType] = {
    **{d: ConvType.SINGLE_TURN_PERCEPTION for d in _PERCEPTION},
    **{d: ConvType.SINGLE_TURN_REASONING for d in _REASONING},
    Domain.MULTI_ROUND_LONG_VQA: ConvType.MULTI_ROUND,
}


class QuestionType(str, Enum):
    JUDGMENT = "judgment"
    MULTIPLE_CHOICE = "multiple_choice"
    LONG_VQA = "long_vqa"
    SHORT_VQA = "short_vqa"
    MULTI_ROUND = "multi_round"

    @property
    def abbrev(self) -> str:
        return _QTYPE_ABBREV[self]

    @property
    def is_single_turn(self) -> bool:
        return self is not QuestionType.MULTI_ROUND

    @classmethod
    def parse(cls, text: str) -> "QuestionType":
        slug = text.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"tf": "judgment", "mc": "multiple_choice", "lvqa": "long_vqa", "svqa": "short_vqa"}
        slug = aliases.get(slug, slug)
        try:
            return cls(slug)
        except ValueError:
            raise ValueError(f"unknown question type: {text!r}") from None


_QTYPE_ABBREV = {
    QuestionType.JUDGMENT: "TF",
    QuestionType.MULTIPLE_CHOICE: "MC",
    QuestionType.LONG_VQA: "LVQA",
    QuestionType.SHORT_VQA: "SVQA",
    QuestionType.MULTI_ROUND: "Multi-Round",
}

# Domains whose generation prompt carries no seed-question section: the ways
# of questioning there are too diverse for a universal template.
NO_SEED_DOMAINS = frozenset({Domain.COMPLEX_REASONING, Domain.COMMONSENSE_REASONING})


def question_types_for(domain: Domain) -> tuple[QuestionType, ...]:
    """Question types that may be generated for a domain."""
    if domain.conv_type is ConvType.MULTI_ROUND:
        return (QuestionType.MULTI_ROUND,)
    return (
        QuestionType.JUDGMENT,
        QuestionType.MULTIPLE_CHOICE,
        QuestionType.LONG_VQA,
        QuestionType.SHORT_VQA,
    )

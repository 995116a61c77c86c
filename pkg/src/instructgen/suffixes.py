"""Indicator suffixes appended to generated questions.

Each single-turn question carries a trailing utterance that tells the
answering model what response shape is expected. The multiple-choice
suffix is fixed; the judgment/VQA suffixes are configuration of this
engine and can be overridden per deployment.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .domains import QuestionType

MC_SUFFIX = "Please choose the most appropriate option"

DEFAULT_SUFFIXES: dict[QuestionType, str] = {
    QuestionType.JUDGMENT: "Please answer yes or no",
    QuestionType.MULTIPLE_CHOICE: MC_SUFFIX,
    QuestionType.LONG_VQA: "Please answer in detail",
    QuestionType.SHORT_VQA: "Please answer briefly",
}


@dataclass(frozen=True)
class IndicatorSuffixTable:
    """Map from question type to its indicator suffix."""

    suffixes: dict[QuestionType, str] = field(default_factory=lambda: dict(DEFAULT_SUFFIXES))

    def __post_init__(self) -> None:
        for qt in QuestionType:
            if qt.is_single_turn and not self.suffixes.get(qt):
                raise ValueError(f"missing indicator suffix for {qt.value}")
        if self.suffixes.get(QuestionType.MULTIPLE_CHOICE) != MC_SUFFIX:
            raise ValueError("multiple-choice suffix is fixed")

    def suffix_for(self, qtype: QuestionType) -> str | None:
        return self.suffixes.get(qtype)

    def append(self, question: str, qtype: QuestionType) -> str:
        """Append the suffix for ``qtype``; idempotent, exactly one copy."""
        suffix = self.suffix_for(qtype)
        if not suffix:
            return question
        q = question.rstrip()
        if q.endswith(suffix):
            return q
        return f"{q} {suffix}"


DEFAULT_SUFFIX_TABLE = IndicatorSuffixTable()

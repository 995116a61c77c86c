"""Structural validation of instruction records.

Violations are data, not exceptions: callers get a deterministic report
and decide what to do with it. The pipeline refuses to persist any record
whose report is non-empty.
"""
from __future__ import annotations

from dataclasses import dataclass

from .domains import ConvType, QuestionType
from .records import InstructionRecord, Provenance
from .suffixes import DEFAULT_SUFFIX_TABLE, IndicatorSuffixTable

MC_OPTION_COUNT = 4
MULTI_ROUND_TURNS = 5
JUDGMENT_ANSWERS = ("yes", "no")


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    record_id: str
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> tuple[str, ...]:
        return tuple(v.code for v in self.violations)


def validate_record(
    record: InstructionRecord,
    suffix_table: IndicatorSuffixTable = DEFAULT_SUFFIX_TABLE,
) -> ValidationReport:
    """Check every structural invariant of an instruction record.

    The checks run in a fixed order, so identical records always produce
    identical reports.
    """
    v: list[Violation] = []

    def flag(code: str, message: str) -> None:
        v.append(Violation(code, message))

    if not record.question.strip():
        flag("question-empty", "question text is empty")

    mc = record.qtype is QuestionType.MULTIPLE_CHOICE
    multi = record.qtype is QuestionType.MULTI_ROUND

    if multi != (record.domain.conv_type is ConvType.MULTI_ROUND):
        flag(
            "qtype-domain-mismatch",
            f"qtype {record.qtype.value} is not valid for domain {record.domain.value}",
        )

    if mc:
        if len(record.options) != MC_OPTION_COUNT:
            flag("option-count", f"expected {MC_OPTION_COUNT} options, got {len(record.options)}")
        if record.correct_option is None:
            flag("correct-option-missing", "multiple-choice record lacks correct_option")
        elif not 0 <= record.correct_option < MC_OPTION_COUNT:
            flag("correct-option-range", f"correct_option {record.correct_option} outside 0..3")
        if len(set(record.options)) != len(record.options):
            flag("options-duplicate", "options are not pairwise distinct")
        elif (
            record.correct_option is not None
            and 0 <= record.correct_option < len(record.options)
            and record.answer is not None
            and record.answer != record.options[record.correct_option]
        ):
            flag("answer-option-mismatch", "answer text differs from the marked correct option")
    else:
        if record.options:
            flag("options-not-allowed", f"{record.qtype.value} record carries options")
        if record.correct_option is not None:
            flag("correct-option-not-allowed", f"{record.qtype.value} record carries correct_option")

    if multi:
        if len(record.turns) != MULTI_ROUND_TURNS:
            flag("turn-count", f"expected {MULTI_ROUND_TURNS} turns, got {len(record.turns)}")
        if record.answer is not None:
            flag("answer-not-allowed", "multi-round record carries a top-level answer")
        for i, turn in enumerate(record.turns):
            if not turn.question.strip() or not turn.answer.strip():
                flag("turn-empty", f"turn {i} has an empty question or answer")
    else:
        if record.turns:
            flag("turns-not-allowed", "single-turn record carries turns")
        if not (record.answer or "").strip():
            flag("answer-missing", "single-turn record lacks an answer")

    if record.qtype is QuestionType.JUDGMENT and record.answer is not None:
        if record.answer not in JUDGMENT_ANSWERS:
            flag("judgment-answer", f"judgment answer {record.answer!r} is not normalized yes/no")

    if record.qtype.is_single_turn and record.question.strip():
        suffix = suffix_table.suffix_for(record.qtype)
        if suffix and not record.question.rstrip().endswith(suffix):
            flag("suffix-missing", f"question does not end with the {record.qtype.value} suffix")

    if record.provenance is Provenance.CORRECTED and not record.ancestor_id:
        flag("ancestor-missing", "corrected record lacks a link to its pre-correction ancestor")

    if record.provenance is Provenance.CONVERTED and (
        not record.source_name or not record.source_item_id
    ):
        flag("attribution-missing", "converted record lacks (source_name, source_item_id)")

    if record.provenance is Provenance.GENERATED:
        if not record.image_id:
            flag("image-ref-missing", "generated record lacks image_id")
    elif not record.image_id and not record.source_path:
        # converted records (and corrections of them) may ship their own image file
        flag("image-ref-missing", "record has neither image_id nor source_path")

    return ValidationReport(record_id=record.id, violations=tuple(v))

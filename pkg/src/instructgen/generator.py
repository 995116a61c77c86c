"""Instruction generation stage.

Builds the mode-specific generation prompt (with-seed, no-seed, or
multi-round), sends it to the text backend, parses the numbered-block
response, appends the indicator suffix for the question type, validates,
and persists the records. Questions and answers are always produced in
one call; a response that does not match the output format is retried
once with a format reminder and otherwise archived for audit.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .backends import LLMBackend
from .costing import CostLedger
from .domains import NO_SEED_DOMAINS, ConvType, Domain, QuestionType
from .errors import (
    AnswerNotInOptions,
    BackendTimeout,
    CountMismatch,
    MalformedOptions,
    MissingTemplate,
    ModeMismatch,
    ParseFailure,
    UnresolvedSlot,
)
from .identity import prompt_fingerprint
from .ratelimit import RetryPolicy, TokenBucket, call_with_retry
from .records import CaptionRecord, GenerationConfig, ImageRecord, InstructionRecord, Provenance, QATurn
from .sectionfile import parse_sections
from .seedbank import SeedQuestion
from .store import RecordStore
from .suffixes import DEFAULT_SUFFIX_TABLE, IndicatorSuffixTable
from .validation import validate_record

log = logging.getLogger(__name__)

DEFAULT_TEMPLATE_PATH = Path(__file__).parent / "templates" / "generation_prompts.txt"

QTYPE_LABEL = {
    QuestionType.JUDGMENT: "Judgment",
    QuestionType.MULTIPLE_CHOICE: "Multiple-Choice",
    QuestionType.LONG_VQA: "Long VQA",
    QuestionType.SHORT_VQA: "Short VQA",
}

MODE_WITH_SEED = "with_seed"
MODE_NO_SEED = "no_seed"
MODE_MULTI_ROUND = "multi_round"

_SLOT_RE = re.compile(r"\{[a-z_]+\}")


@dataclass(frozen=True)
class GenPromptTemplate:
    mode: str
    body: str
    output_format_spec: str


class GenPromptLibrary:
    """All generation prompt bodies, loaded from one section file."""

    def __init__(self, sections: dict[str, str]):
        for required in (MODE_WITH_SEED, MODE_NO_SEED, MODE_MULTI_ROUND, "output_format", "output_format_mc"):
            if required not in sections:
                raise MissingTemplate(f"generation template lacks [{required}]")
        if "Question template:" not in sections[MODE_WITH_SEED]:
            raise MissingTemplate("with-seed body lacks the 'Question template:' section")
        if "Question template:" in sections[MODE_NO_SEED]:
            raise MissingTemplate("no-seed body must not carry a seed section")
        if "Create 5 Questions" not in sections[MODE_MULTI_ROUND]:
            raise MissingTemplate("multi-round body lacks 'Create 5 Questions'")
        self.sections = sections

    @classmethod
    def load(cls, path: str | Path = DEFAULT_TEMPLATE_PATH) -> "GenPromptLibrary":
        path = Path(path)
        if not path.exists():
            raise MissingTemplate(f"no generation template at {path}")
        return cls(parse_sections(path.read_text(encoding="utf-8")))

    def template_for(self, mode: str, qtype: QuestionType) -> GenPromptTemplate:
        fmt = "output_format_mc" if qtype is QuestionType.MULTIPLE_CHOICE else "output_format"
        return GenPromptTemplate(mode=mode, body=self.sections[mode], output_format_spec=self.sections[fmt])


def mode_for(domain: Domain, qtype: QuestionType) -> str:
    if qtype is QuestionType.MULTI_ROUND or domain.conv_type is ConvType.MULTI_ROUND:
        if qtype is not QuestionType.MULTI_ROUND or domain.conv_type is not ConvType.MULTI_ROUND:
            raise ModeMismatch(
                f"multi-round generation pairs the multi-round domain with the multi-round "
                f"question type, got ({domain.value}, {qtype.value})"
            )
        return MODE_MULTI_ROUND
    return MODE_NO_SEED if domain in NO_SEED_DOMAINS else MODE_WITH_SEED


def build_generation_prompt(
    caption: CaptionRecord,
    image: ImageRecord,
    qtype: QuestionType,
    seeds: list[SeedQuestion],
    template: GenPromptTemplate,
    library: GenPromptLibrary,
    config: GenerationConfig | None = None,
) -> str:
    """Resolve every slot of the mode body into the final prompt text."""
    config = config or GenerationConfig()
    mode = mode_for(image.domain, qtype)
    if mode != template.mode:
        raise ModeMismatch(f"template mode {template.mode} does not fit ({image.domain.value}, {qtype.value})")
    if mode == MODE_WITH_SEED and len(seeds) != config.n_seed_refs:
        raise ModeMismatch(f"with-seed prompt needs {config.n_seed_refs} seeds, got {len(seeds)}")
    if mode != MODE_WITH_SEED and seeds:
        raise ModeMismatch(f"{mode} prompt takes no seeds")

    values = {
        "question_count": str(config.questions_per_call),
        "question_type": QTYPE_LABEL.get(qtype, ""),
        "domain": image.domain.display_name,
        "image_caption": caption.text,
        "seed_questions": "\n".join(f"{i}. {s.template}" for i, s in enumerate(seeds, start=1)),
        "question_requests": library.sections.get("question_requests", ""),
        "answer_requests": library.sections.get("answer_requests", ""),
        "example_qa": library.sections.get("example_qa", ""),
        "output_format": template.output_format_spec,
    }

    lines = []
    for line in template.body.splitlines():
        if "{ocr_result}" in line:
            if image.ocr_text:
                lines.append(line.replace("{ocr_result}", image.ocr_text))
            continue
        for slot, value in values.items():
            line = line.replace("{" + slot + "}", value)
        lines.append(line)
    prompt = "\n".join(lines)

    leftover = sorted(set(_SLOT_RE.findall(prompt)))
    if leftover:
        raise UnresolvedSlot(f"unresolved slots in generation prompt: {leftover}")
    return prompt


# --------------------------------------------------------------------- parse

@dataclass(frozen=True)
class ParsedItem:
    question: str
    answer: str
    options: tuple[str, ...] = ()
    correct_option: int | None = None


_BLOCK_RE = re.compile(r"^\s*(Question|Options|Answer)\s*(\d+)\s*[:.]\s*(.*)$", re.IGNORECASE)
_OPTION_RE = re.compile(r"^\s*([A-D])\s*[\.\)\:]\s*(.+?)\s*$")
_LETTER_ANSWER_RE = re.compile(r"^\s*([A-D])\s*(?:[\.\)\:]\s*(.*))?$")

_JUDGMENT_NORMALIZE = {"yes": "yes", "no": "no", "true": "yes", "false": "no"}


def normalize_judgment_answer(text: str) -> str | None:
    return _JUDGMENT_NORMALIZE.get(text.strip().rstrip(".!").strip().lower())


def _resolve_mc_answer(answer_text: str, options: list[str]) -> int:
    m = _LETTER_ANSWER_RE.match(answer_text)
    if m:
        return ord(m.group(1).upper()) - ord("A")
    wanted = answer_text.strip().lower()
    hits = [i for i, opt in enumerate(options) if opt.strip().lower() == wanted]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise AnswerNotInOptions(f"answer {answer_text!r} matches no option", raw=answer_text)
    raise AnswerNotInOptions(f"answer {answer_text!r} is ambiguous: matches options {hits}", raw=answer_text)


def parse_generation_response(raw: str, qtype: QuestionType, expected_count: int) -> list[ParsedItem]:
    """Parse a numbered-block response; whitespace-tolerant, count-strict."""
    if not raw.strip():
        raise ParseFailure("empty response", raw=raw)

    questions: dict[int, list[str]] = {}
    options: dict[int, list[str]] = {}
    answers: dict[int, list[str]] = {}
    target: list[str] | None = None
    for line in raw.splitlines():
        m = _BLOCK_RE.match(line)
        if m:
            label, idx_s, rest = m.group(1).lower(), m.group(2), m.group(3)
            idx = int(idx_s)
            bucket = {"question": questions, "options": options, "answer": answers}[label]
            target = bucket.setdefault(idx, [])
            if rest.strip():
                target.append(rest.strip())
            continue
        if target is not None and line.strip():
            target.append(line.strip())

    indices = sorted(questions)
    if indices != list(range(1, expected_count + 1)):
        raise CountMismatch(
            f"expected questions 1..{expected_count}, found {indices}", raw=raw
        )
    missing_answers = [i for i in indices if not answers.get(i)]
    if missing_answers:
        raise CountMismatch(f"missing answers for questions {missing_answers}", raw=raw)

    items: list[ParsedItem] = []
    for i in indices:
        question = " ".join(questions[i]).strip()
        answer_text = " ".join(answers[i]).strip()
        if qtype is QuestionType.MULTIPLE_CHOICE:
            raw_lines = options.get(i, [])
            parsed_opts: list[str] = []
            letters: list[str] = []
            for line in raw_lines:
                om = _OPTION_RE.match(line)
                if not om:
                    raise MalformedOptions(f"question {i}: unparseable option line {line!r}", raw=raw)
                letters.append(om.group(1).upper())
                parsed_opts.append(om.group(2))
            if len(parsed_opts) != 4 or letters != ["A", "B", "C", "D"]:
                raise MalformedOptions(
                    f"question {i}: expected options A..D, got {letters}", raw=raw
                )
            idx = _resolve_mc_answer(answer_text, parsed_opts)
            items.append(
                ParsedItem(
                    question=question,
                    answer=parsed_opts[idx],
                    options=tuple(parsed_opts),
                    correct_option=idx,
                )
            )
        else:
            if options.get(i):
                raise MalformedOptions(f"question {i}: options present for {qtype.value}", raw=raw)
            if qtype is QuestionType.JUDGMENT:
                normalized = normalize_judgment_answer(answer_text)
                if normalized is None:
                    raise ParseFailure(
                        f"question {i}: judgment answer {answer_text!r} is not yes/no", raw=raw
                    )
                answer_text = normalized
            items.append(ParsedItem(question=question, answer=answer_text))
    return items


def append_indicator(
    question: str, qtype: QuestionType, table: IndicatorSuffixTable = DEFAULT_SUFFIX_TABLE
) -> str:
    return table.append(question, qtype)


# ------------------------------------------------------------------ generate

FORMAT_REMINDER = (
    "Reminder: your previous reply did not follow the required format. "
    "Output only the numbered items in exactly the format specified above."
)


class Generator:
    def __init__(
        self,
        store: RecordStore,
        backend: LLMBackend,
        ledger: CostLedger,
        library: GenPromptLibrary | None = None,
        suffix_table: IndicatorSuffixTable = DEFAULT_SUFFIX_TABLE,
        retry: RetryPolicy | None = None,
        bucket: TokenBucket | None = None,
    ):
        self.store = store
        self.backend = backend
        self.ledger = ledger
        self.library = library or GenPromptLibrary.load()
        self.suffix_table = suffix_table
        self.retry = retry or RetryPolicy()
        self.bucket = bucket

    def _complete(self, prompt: str) -> str:
        if self.bucket:
            self.bucket.acquire()
        return call_with_retry(
            lambda: self.backend.complete(prompt), self.retry, retry_on=(BackendTimeout,)
        )

    def _records_from_items(
        self,
        items: list[ParsedItem],
        image: ImageRecord,
        qtype: QuestionType,
    ) -> list[InstructionRecord]:
        records = []
        if qtype is QuestionType.MULTI_ROUND:
            turns = tuple(QATurn(item.question, item.answer) for item in items)
            records.append(
                InstructionRecord(
                    id=InstructionRecord.make_id(
                        image.domain, qtype, turns[0].question, image_id=image.id, turns=turns
                    ),
                    image_id=image.id,
                    domain=image.domain,
                    qtype=qtype,
                    question=turns[0].question,
                    turns=turns,
                    provenance=Provenance.GENERATED,
                )
            )
            return records
        for item in items:
            question = append_indicator(item.question, qtype, self.suffix_table)
            records.append(
                InstructionRecord(
                    id=InstructionRecord.make_id(
                        image.domain,
                        qtype,
                        question,
                        image_id=image.id,
                        answer=item.answer,
                        options=item.options,
                    ),
                    image_id=image.id,
                    domain=image.domain,
                    qtype=qtype,
                    question=question,
                    options=item.options,
                    correct_option=item.correct_option,
                    answer=item.answer,
                    provenance=Provenance.GENERATED,
                )
            )
        return records

    def generate_instructions(
        self,
        caption: CaptionRecord,
        image: ImageRecord,
        qtype: QuestionType,
        config: GenerationConfig | None = None,
        seeds: list[SeedQuestion] | None = None,
    ) -> list[InstructionRecord]:
        """One generation call; returns the persisted records.

        Single-turn calls yield exactly ``questions_per_call`` records;
        multi-round calls yield one record holding five turns.
        """
        config = config or GenerationConfig()
        mode = mode_for(image.domain, qtype)
        template = self.library.template_for(mode, qtype)
        expected = config.multi_round_turns if mode == MODE_MULTI_ROUND else config.questions_per_call
        prompt = build_generation_prompt(
            caption, image, qtype, seeds or [], template, self.library, config
        )

        raw = self._complete(prompt)
        try:
            items = parse_generation_response(raw, qtype, expected)
        except ParseFailure as first:
            log.warning("parse failure for image %s (%s), retrying with reminder: %s",
                        image.id, qtype.value, first)
            retry_prompt = f"{prompt}\n{FORMAT_REMINDER}"
            raw = self._complete(retry_prompt)
            try:
                items = parse_generation_response(raw, qtype, expected)
            except ParseFailure as second:
                path = self.store.archive_text(
                    f"gen_failures/{prompt_fingerprint(retry_prompt)}.txt", raw
                )
                self.store.audit(
                    "generate.parse-failure",
                    image.id,
                    qtype=qtype.value,
                    archive=str(path),
                    error=str(second),
                )
                second.archive_path = str(path)
                raise second

        records = self._records_from_items(items, image, qtype)
        for record in records:
            report = validate_record(record, self.suffix_table)
            if not report.ok:
                # Refuse to persist anything from a call that produced an
                # invalid record; the whole response is suspect.
                path = self.store.archive_text(
                    f"gen_failures/{prompt_fingerprint(prompt)}.txt", raw
                )
                raise ParseFailure(
                    f"generated record violates invariants: {', '.join(report.codes())}",
                    raw=raw,
                    archive_path=str(path),
                )
        fresh = 0
        for record in records:
            if self.store.put_instruction(record):
                fresh += 1
        if fresh:
            self.ledger.add_instructions(fresh)
        return records

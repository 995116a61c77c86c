"""Import external QA datasets as dialogue-format instruction records.

Adapters are declarative field mappings (plus an optional row hook) over
JSONL manifests. Only tiny fixture subsets of external datasets ship
in-tree; the adapters exist so locally downloaded copies can be folded
into the corpus with full source attribution.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .domains import Domain, QuestionType
from .errors import SourceSchemaMismatch, UnknownAdapter
from .records import InstructionRecord, Provenance
from .store import RecordStore
from .suffixes import DEFAULT_SUFFIX_TABLE, IndicatorSuffixTable
from .validation import validate_record


@dataclass(frozen=True)
class Adapter:
    """Field mapping from one external dataset family to our schema."""

    name: str
    family: str
    domain: Domain
    id_field: str = "item_id"
    question_field: str = "question"
    answer_field: str = "answer"
    choices_field: str = "choices"
    image_field: str = "image"
    transform: Callable[[dict], dict] | None = None


BUILTIN_ADAPTERS: dict[str, Adapter] = {
    a.name: a
    for a in (
        Adapter(name="geometry_qa", family="math", domain=Domain.NUMERICAL_CALCULATION),
        Adapter(name="chart_qa", family="charts_plots", domain=Domain.NUMERICAL_CALCULATION),
        Adapter(name="science_figure", family="scientific_figure", domain=Domain.COMPLEX_REASONING),
        Adapter(name="map_chart", family="map_chart", domain=Domain.SPATIAL_RELATIONSHIP),
    )
}


def convert_row(
    row: dict,
    adapter: Adapter,
    source_name: str,
    suffix_table: IndicatorSuffixTable = DEFAULT_SUFFIX_TABLE,
    domain: Domain | None = None,
) -> InstructionRecord:
    if adapter.transform:
        row = adapter.transform(dict(row))
    item_id = row.get(adapter.id_field)
    question = (row.get(adapter.question_field) or "").strip()
    answer = row.get(adapter.answer_field)
    if item_id is None or not question or answer is None or not str(answer).strip():
        raise SourceSchemaMismatch(
            f"{source_name}: row {item_id!r} lacks id, question, or answer"
        )
    answer = str(answer).strip()
    choices = row.get(adapter.choices_field) or []
    image = row.get(adapter.image_field)
    domain = domain or adapter.domain

    if choices:
        if len(choices) != 4:
            raise SourceSchemaMismatch(
                f"{source_name}: row {item_id!r} has {len(choices)} choices, need exactly 4"
            )
        matches = [i for i, c in enumerate(choices) if str(c).strip() == answer]
        if len(matches) != 1:
            raise SourceSchemaMismatch(
                f"{source_name}: row {item_id!r} answer matches {len(matches)} choices"
            )
        qtype = QuestionType.MULTIPLE_CHOICE
        options = tuple(str(c).strip() for c in choices)
        correct = matches[0]
    else:
        qtype = QuestionType.SHORT_VQA
        options = ()
        correct = None

    question = suffix_table.append(question, qtype)
    return InstructionRecord(
        id=InstructionRecord.make_id(
            domain,
            qtype,
            question,
            answer=answer,
            options=options,
            source=(source_name, str(item_id)),
        ),
        domain=domain,
        qtype=qtype,
        question=question,
        options=options,
        correct_option=correct,
        answer=answer,
        provenance=Provenance.CONVERTED,
        source_name=source_name,
        source_item_id=str(item_id),
        source_path=str(image) if image else None,
    )


@dataclass
class ConvertReport:
    read: int = 0
    converted: int = 0
    skipped_existing: int = 0


def convert_source(
    manifest: str | Path,
    adapter_name: str,
    store: RecordStore,
    source_name: str | None = None,
    domain: Domain | None = None,
    adapters: dict[str, Adapter] | None = None,
) -> ConvertReport:
    """Convert one manifest through a registered adapter.

    Ids are derived from (source_name, item_id) and content, so re-running
    the same manifest adds nothing. Converted records do not touch the
    cost ledger: they are neither generated nor manually corrected here.
    """
    registry = adapters or BUILTIN_ADAPTERS
    if adapter_name not in registry:
        raise UnknownAdapter(f"unknown adapter {adapter_name!r}; known: {sorted(registry)}")
    adapter = registry[adapter_name]
    manifest = Path(manifest)
    source = source_name or manifest.stem
    report = ConvertReport()
    with manifest.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            report.read += 1
            record = convert_row(json.loads(line), adapter, source, domain=domain)
            check = validate_record(record)
            if not check.ok:
                raise SourceSchemaMismatch(
                    f"{source}: converted record {record.source_item_id} invalid: "
                    f"{', '.join(check.codes())}"
                )
            if store.put_instruction(record):
                report.converted += 1
            else:
                report.skipped_existing += 1
    return report

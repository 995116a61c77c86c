"""Dataset export and statistics.

The default "conversations" profile renders each record as alternating
human/assistant turns with an ``<image>`` token on the first human turn,
which drops straight into the prevalent instruction-tuning JSON layout.
Only accepted records (and converted imports, which arrive pre-reviewed
from their source datasets) are exportable. Output order is fixed by
record id, so identical stores export byte-identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .domains import Domain, QuestionType
from .errors import EmptySelection, UnresolvedImageRef
from .records import InstructionRecord, Provenance, ReviewState
from .store import RecordStore
from .suffixes import DEFAULT_SUFFIX_TABLE, IndicatorSuffixTable

IMAGE_TOKEN = "<image>"
OPTION_LETTERS = "ABCD"


def exportable(record: InstructionRecord) -> bool:
    if record.review_state is ReviewState.ACCEPTED:
        return True
    return (
        record.provenance is Provenance.CONVERTED
        and record.review_state is ReviewState.UNREVIEWED
    )


def _mc_human_turn(record: InstructionRecord, suffixes: IndicatorSuffixTable) -> str:
    suffix = suffixes.suffix_for(QuestionType.MULTIPLE_CHOICE) or ""
    body = record.question.rstrip()
    if suffix and body.endswith(suffix):
        body = body[: -len(suffix)].rstrip()
    lines = [body]
    lines += [f"{OPTION_LETTERS[i]}. {opt}" for i, opt in enumerate(record.options)]
    if suffix:
        lines.append(suffix)
    return "\n".join(lines)


def _conversations(record: InstructionRecord, suffixes: IndicatorSuffixTable) -> list[dict[str, str]]:
    turns: list[dict[str, str]] = []
    if record.qtype is QuestionType.MULTI_ROUND:
        for i, turn in enumerate(record.turns):
            human = turn.question if i else f"{IMAGE_TOKEN}\n{turn.question}"
            turns.append({"from": "human", "value": human})
            turns.append({"from": "gpt", "value": turn.answer})
        return turns
    if record.qtype is QuestionType.MULTIPLE_CHOICE:
        human = _mc_human_turn(record, suffixes)
        letter = OPTION_LETTERS[record.correct_option or 0]
        answer = f"{letter}. {record.options[record.correct_option or 0]}"
    else:
        human = record.question
        answer = record.answer or ""
    turns.append({"from": "human", "value": f"{IMAGE_TOKEN}\n{human}"})
    turns.append({"from": "gpt", "value": answer})
    return turns


def render_record(
    record: InstructionRecord,
    store: RecordStore,
    suffixes: IndicatorSuffixTable = DEFAULT_SUFFIX_TABLE,
) -> dict:
    if record.image_id:
        image = store.get_image(record.image_id)  # raises UnknownRecord upstream
        image_ref = f"blobs/{image.dedup_key}"
    elif record.source_path:
        image_ref = record.source_path
    else:
        raise UnresolvedImageRef(f"record {record.id} has no image reference")
    return {
        "id": record.id,
        "image": image_ref,
        "domain": record.domain.value,
        "question_type": record.qtype.abbrev,
        "conversations": _conversations(record, suffixes),
    }


@dataclass(frozen=True)
class ExportResult:
    path: Path
    count: int


def export_dataset(
    store: RecordStore,
    out_path: str | Path,
    profile: str = "conversations",
    as_array: bool = False,
    domains: set[Domain] | None = None,
    suffixes: IndicatorSuffixTable = DEFAULT_SUFFIX_TABLE,
) -> ExportResult:
    if profile != "conversations":
        raise ValueError(f"unknown export profile {profile!r}")
    selected = [
        r
        for r in store.instructions()
        if exportable(r) and (domains is None or r.domain in domains)
    ]
    if not selected:
        raise EmptySelection("no accepted or converted records match the export filter")
    selected.sort(key=lambda r: r.id)
    rows = []
    for record in selected:
        try:
            rows.append(render_record(record, store, suffixes))
        except Exception as exc:
            raise UnresolvedImageRef(f"record {record.id}: {exc}") from exc

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        if as_array:
            json.dump(rows, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        else:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return ExportResult(path=out_path, count=len(rows))


@dataclass(frozen=True)
class StatsReport:
    total: int
    by_domain: dict[str, int]
    by_qtype: dict[str, int]
    image_count: int
    caption_count: int

    @property
    def instructions_per_image(self) -> float:
        return self.total / self.image_count if self.image_count else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "by_domain": self.by_domain,
            "by_qtype": self.by_qtype,
            "image_count": self.image_count,
            "caption_count": self.caption_count,
            "instructions_per_image": round(self.instructions_per_image, 3),
        }

    def table(self) -> str:
        lines = [f"{'total instances':<28}{self.total:>8}"]
        for name, count in sorted(self.by_domain.items()):
            lines.append(f"  domain {name:<21}{count:>8}")
        for name, count in sorted(self.by_qtype.items()):
            lines.append(f"  type   {name:<21}{count:>8}")
        lines.append(f"{'images':<28}{self.image_count:>8}")
        lines.append(f"{'captions':<28}{self.caption_count:>8}")
        lines.append(f"{'instructions per image':<28}{self.instructions_per_image:>8.2f}")
        return "\n".join(lines)


def dataset_stats(records: list[InstructionRecord], store: RecordStore) -> StatsReport:
    by_domain: dict[str, int] = {}
    by_qtype: dict[str, int] = {}
    image_ids = set()
    for r in records:
        by_domain[r.domain.value] = by_domain.get(r.domain.value, 0) + 1
        by_qtype[r.qtype.abbrev] = by_qtype.get(r.qtype.abbrev, 0) + 1
        if r.image_id:
            image_ids.add(r.image_id)
    caption_count = sum(1 for c in store.captions() if c.image_id in image_ids)
    return StatsReport(
        total=len(records),
        by_domain=by_domain,
        by_qtype=by_qtype,
        image_count=len(image_ids),
        caption_count=caption_count,
    )

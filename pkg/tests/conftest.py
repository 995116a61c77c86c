from __future__ import annotations

import itertools

import pytest

from instructgen.costing import CostLedger
from instructgen.domains import Domain, QuestionType
from instructgen.identity import dedup_key
from instructgen.mock_backends import tiny_png
from instructgen.records import (
    CaptionRecord,
    ImageRecord,
    ImageState,
    InstructionRecord,
    Provenance,
    QATurn,
    SourceChannel,
)
from instructgen.store import RecordStore
from instructgen.suffixes import DEFAULT_SUFFIX_TABLE

_seed_counter = itertools.count(10_000)


class LogicalClock:
    """Deterministic injectable clock for lease/audit tests."""

    def __init__(self, start: float = 1_000.0):
        self.now = start

    def __call__(self) -> float:
        self.now += 0.001
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


@pytest.fixture
def clock() -> LogicalClock:
    return LogicalClock()

@pytest.fixture
def store(tmp_path, clock) -> RecordStore:
    return RecordStore(tmp_path / "store", clock=clock)


@pytest.fixture
def ledger(store) -> CostLedger:
    return CostLedger(store.root / "ledger.json")


def add_image(
    store: RecordStore,
    domain: Domain = Domain.LANDMARK,
    state: ImageState = ImageState.SCREENED,
    tags: tuple[str, ...] = ("sample",),
    ocr_text: str | None = None,
    png_seed: int | None = None,
) -> ImageRecord:
    data = tiny_png(png_seed if png_seed is not None else next(_seed_counter))
    digest = store.put_blob(data)
    record = ImageRecord(
        id=ImageRecord.make_id(digest, domain, SourceChannel.WEB_CRAWL),
        uri=f"test://{digest[:8]}",
        source_channel=SourceChannel.WEB_CRAWL,
        domain=domain,
        dedup_key=digest,
        tags=tags,
        ocr_text=ocr_text,
    )
    store.put_image(record)
    if state in (ImageState.SCREENED, ImageState.CAPTIONED):
        record = store.transition_image(record.id, ImageState.SCREENED)
    if state is ImageState.CAPTIONED:
        record = store.transition_image(record.id, ImageState.CAPTIONED)
    return record


def add_caption(store: RecordStore, image: ImageRecord, text: str | None = None) -> CaptionRecord:
    fingerprint = "f" * 64
    record = CaptionRecord(
        id=CaptionRecord.make_id(image.id, fingerprint),
        image_id=image.id,
        text=text or f"A detailed description of the scene in image {image.id[:8]}.",
        backend_id="test-vlm",
        prompt_fingerprint=fingerprint,
    )
    store.put_caption(record)
    return record


def make_mc_record(
    store: RecordStore,
    image: ImageRecord,
    stem: str = "Which option matches the image?",
    options: tuple[str, ...] = ("red", "green", "blue", "gray"),
    correct: int = 1,
) -> InstructionRecord:
    question = DEFAULT_SUFFIX_TABLE.append(stem, QuestionType.MULTIPLE_CHOICE)
    record = InstructionRecord(
        id=InstructionRecord.make_id(
            image.domain, QuestionType.MULTIPLE_CHOICE, question,
            image_id=image.id, answer=options[correct], options=options,
        ),
        image_id=image.id,
        domain=image.domain,
        qtype=QuestionType.MULTIPLE_CHOICE,
        question=question,
        options=options,
        correct_option=correct,
        answer=options[correct],
        provenance=Provenance.GENERATED,
    )
    store.put_instruction(record)
    return record


def make_svqa_record(
    store: RecordStore,
    image: ImageRecord,
    stem: str,
    answer: str = "a tiled roof",
) -> InstructionRecord:
    question = DEFAULT_SUFFIX_TABLE.append(stem, QuestionType.SHORT_VQA)
    record = InstructionRecord(
        id=InstructionRecord.make_id(
            image.domain, QuestionType.SHORT_VQA, question, image_id=image.id, answer=answer
        ),
        image_id=image.id,
        domain=image.domain,
        qtype=QuestionType.SHORT_VQA,
        question=question,
        answer=answer,
        provenance=Provenance.GENERATED,
    )
    store.put_instruction(record)
    return record


def make_multi_round_record(store: RecordStore, image: ImageRecord) -> InstructionRecord:
    turns = tuple(
        QATurn(f"Linked question {i} about image {image.id[:6]}?", f"Linked answer {i}.")
        for i in range(1, 6)
    )
    record = InstructionRecord(
        id=InstructionRecord.make_id(
            image.domain, QuestionType.MULTI_ROUND, turns[0].question,
            image_id=image.id, turns=turns,
        ),
        image_id=image.id,
        domain=image.domain,
        qtype=QuestionType.MULTI_ROUND,
        question=turns[0].question,
        turns=turns,
        provenance=Provenance.GENERATED,
    )
    store.put_instruction(record)
    return record


def byte_digest_pairwise_distinct(blobs: list[bytes]) -> bool:
    """Dedup oracle: exhaustive pairwise byte-digest comparison."""
    digests = [dedup_key(b) for b in blobs]
    for i in range(len(digests)):
        for j in range(i + 1, len(digests)):
            if digests[i] == digests[j]:
                return False
    return True

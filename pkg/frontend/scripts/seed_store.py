#!/usr/bin/env python3
"""Seed a mock store for the frontend end-to-end test.

Creates one captioned image and five unreviewed short-VQA records, then
prints their ids as JSON: {"record_ids": [...], "image": "<blob id>"}.
"""
import json
import sys

from instructgen.domains import Domain, QuestionType
from instructgen.identity import dedup_key
from instructgen.mock_backends import synthetic_caption, tiny_png
from instructgen.records import (
    CaptionRecord,
    ImageRecord,
    ImageState,
    InstructionRecord,
    SourceChannel,
)
from instructgen.store import RecordStore
from instructgen.suffixes import DEFAULT_SUFFIX_TABLE


def main(store_dir: str) -> None:
    store = RecordStore(store_dir)
    data = tiny_png(4242, size=8)
    digest = store.put_blob(data)
    image = ImageRecord(
        id=ImageRecord.make_id(digest, Domain.LANDMARK, SourceChannel.WEB_CRAWL),
        uri="fixture://frontend/landmark",
        source_channel=SourceChannel.WEB_CRAWL,
        domain=Domain.LANDMARK,
        dedup_key=digest,
        tags=("landmark", "frontend-fixture"),
    )
    store.put_image(image)
    store.transition_image(image.id, ImageState.SCREENED)
    store.transition_image(image.id, ImageState.CAPTIONED)
    caption = CaptionRecord(
        id=CaptionRecord.make_id(image.id, "0" * 64),
        image_id=image.id,
        text=synthetic_caption(image.id, Domain.LANDMARK),
        backend_id="fixture-vlm",
        prompt_fingerprint="0" * 64,
    )
    store.put_caption(caption)

    record_ids = []
    for i in range(5):
        question = DEFAULT_SUFFIX_TABLE.append(
            f"Frontend review question {i}: what stands at position {i}?",
            QuestionType.SHORT_VQA,
        )
        record = InstructionRecord(
            id=InstructionRecord.make_id(
                Domain.LANDMARK, QuestionType.SHORT_VQA, question,
                image_id=image.id, answer=f"fixture answer {i}",
            ),
            image_id=image.id,
            domain=Domain.LANDMARK,
            qtype=QuestionType.SHORT_VQA,
            question=question,
            answer=f"fixture answer {i}",
        )
        store.put_instruction(record)
        record_ids.append(record.id)

    print(json.dumps({"record_ids": record_ids, "image": digest}))


if __name__ == "__main__":
    main(sys.argv[1])

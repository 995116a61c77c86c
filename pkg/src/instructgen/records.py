"""Canonical record types shared by every pipeline stage.

Records are immutable values. Each type serializes to a flat JSON object
(one per JSONL line) whose field names match the attribute names; unknown
fields found when parsing are kept in ``extras`` and written back verbatim
on rewrite, so foreign annotations survive a round trip through this code.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .domains import Domain, QuestionType
from .identity import record_id


class SourceChannel(str, Enum):
    WEB_CRAWL = "web_crawl"
    SIMILARITY_EXPANSION = "similarity_expansion"
    OPEN_SOURCE = "open_source"


class ImageState(str, Enum):
    COLLECTED = "collected"
    SCREENED = "screened"
    CAPTIONED = "captioned"
    REJECTED = "rejected"


# Forward transitions; rejection is reachable from anywhere.
_IMAGE_FLOW = {
    ImageState.COLLECTED: {ImageState.SCREENED, ImageState.REJECTED},
    ImageState.SCREENED: {ImageState.CAPTIONED, ImageState.REJECTED},
    ImageState.CAPTIONED: {ImageState.REJECTED},
    ImageState.REJECTED: set(),
}


def image_transition_allowed(src: ImageState, dst: ImageState) -> bool:
    return dst in _IMAGE_FLOW[src]


class Provenance(str, Enum):
    GENERATED = "generated"
    CONVERTED = "converted"
    CORRECTED = "corrected"


class ReviewState(str, Enum):
    UNREVIEWED = "unreviewed"
    IN_REVIEW = "in_review"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class SeedKind(str, Enum):
    GENERAL = "general"
    WILDCARD = "wildcard"


def _enum_value(v: Any) -> Any:
    return v.value if isinstance(v, Enum) else v


def _clean(d: dict[str, Any]) -> dict[str, Any]:
    """Drop absent optionals and empty collections so logs stay terse."""
    out = {}
    for k, v in d.items():
        if v is None:
            continue
        if isinstance(v, (list, tuple, dict)) and not v:
            continue
        out[k] = v
    return out


@dataclass(frozen=True)
class ImageRecord:
    id: str
    uri: str
    source_channel: SourceChannel
    domain: Domain
    dedup_key: str
    state: ImageState = ImageState.COLLECTED
    key_phrase: str | None = None
    tags: tuple[str, ...] = ()
    ocr_text: str | None = None
    category: str | None = None
    screen_flag: str | None = None  # set by the dedup gate on near-duplicates
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    @staticmethod
    def make_id(dedup_key: str, domain: Domain, source_channel: SourceChannel) -> str:
        return record_id(
            "image", dedup_key=dedup_key, domain=domain.value, source_channel=source_channel.value
        )

    def with_state(self, state: ImageState) -> "ImageRecord":
        return dataclasses.replace(self, state=state)

    def to_dict(self) -> dict[str, Any]:
        d = _clean(
            {
                "id": self.id,
                "uri": self.uri,
                "source_channel": self.source_channel.value,
                "domain": self.domain.value,
                "key_phrase": self.key_phrase,
                "tags": list(self.tags),
                "ocr_text": self.ocr_text,
                "dedup_key": self.dedup_key,
                "state": self.state.value,
                "category": self.category,
                "screen_flag": self.screen_flag,
            }
        )
        d.update(self.extras)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ImageRecord":
        known = {
            "id", "uri", "source_channel", "domain", "key_phrase", "tags",
            "ocr_text", "dedup_key", "state", "category", "screen_flag",
        }
        return cls(
            id=d["id"],
            uri=d["uri"],
            source_channel=SourceChannel(d["source_channel"]),
            domain=Domain(d["domain"]),
            dedup_key=d["dedup_key"],
            state=ImageState(d.get("state", "collected")),
            key_phrase=d.get("key_phrase"),
            tags=tuple(d.get("tags", ())),
            ocr_text=d.get("ocr_text"),
            category=d.get("category"),
            screen_flag=d.get("screen_flag"),
            extras={k: v for k, v in d.items() if k not in known},
        )


@dataclass(frozen=True)
class CaptionRecord:
    id: str
    image_id: str
    text: str
    backend_id: str
    prompt_fingerprint: str
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    @staticmethod
    def make_id(image_id: str, prompt_fingerprint: str) -> str:
        return record_id("caption", image_id=image_id, prompt_fingerprint=prompt_fingerprint)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "id": self.id,
            "image_id": self.image_id,
            "text": self.text,
            "backend_id": self.backend_id,
            "prompt_fingerprint": self.prompt_fingerprint,
        }
        d.update(self.extras)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CaptionRecord":
        known = {"id", "image_id", "text", "backend_id", "prompt_fingerprint"}
        return cls(
            id=d["id"],
            image_id=d["image_id"],
            text=d["text"],
            backend_id=d["backend_id"],
            prompt_fingerprint=d["prompt_fingerprint"],
            extras={k: v for k, v in d.items() if k not in known},
        )


@dataclass(frozen=True)
class QATurn:
    question: str
    answer: str

    def to_list(self) -> list[str]:
        return [self.question, self.answer]


@dataclass(frozen=True)
class InstructionRecord:
    id: str
    domain: Domain
    qtype: QuestionType
    question: str
    image_id: str | None = None
    options: tuple[str, ...] = ()
    correct_option: int | None = None
    answer: str | None = None
    turns: tuple[QATurn, ...] = ()
    provenance: Provenance = Provenance.GENERATED
    review_state: ReviewState = ReviewState.UNREVIEWED
    ancestor_id: str | None = None  # present iff provenance == corrected
    source_name: str | None = None  # converted records: originating dataset
    source_item_id: str | None = None
    source_path: str | None = None  # converted records that ship their own image file
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    @staticmethod
    def make_id(
        domain: Domain,
        qtype: QuestionType,
        question: str,
        image_id: str | None = None,
        answer: str | None = None,
        options: tuple[str, ...] = (),
        turns: tuple[QATurn, ...] = (),
        source: tuple[str, str] | None = None,
    ) -> str:
        return record_id(
            "instruction",
            domain=domain.value,
            qtype=qtype.value,
            question=question,
            image_id=image_id,
            answer=answer,
            options=list(options),
            turns=[t.to_list() for t in turns],
            source=list(source) if source else None,
        )

    def with_review_state(self, state: ReviewState) -> "InstructionRecord":
        return dataclasses.replace(self, review_state=state)

    def to_dict(self) -> dict[str, Any]:
        d = _clean(
            {
                "id": self.id,
                "image_id": self.image_id,
                "domain": self.domain.value,
                "qtype": self.qtype.value,
                "question": self.question,
                "options": list(self.options),
                "correct_option": self.correct_option,
                "answer": self.answer,
                "turns": [t.to_list() for t in self.turns],
                "provenance": self.provenance.value,
                "review_state": self.review_state.value,
                "ancestor_id": self.ancestor_id,
                "source_name": self.source_name,
                "source_item_id": self.source_item_id,
                "source_path": self.source_path,
            }
        )
        d.update(self.extras)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "InstructionRecord":
        known = {
            "id", "image_id", "domain", "qtype", "question", "options",
            "correct_option", "answer", "turns", "provenance", "review_state",
            "ancestor_id", "source_name", "source_item_id", "source_path",
        }
        return cls(
            id=d["id"],
            image_id=d.get("image_id"),
            domain=Domain(d["domain"]),
            qtype=QuestionType(d["qtype"]),
            question=d["question"],
            options=tuple(d.get("options", ())),
            correct_option=d.get("correct_option"),
            answer=d.get("answer"),
            turns=tuple(QATurn(q, a) for q, a in d.get("turns", ())),
            provenance=Provenance(d.get("provenance", "generated")),
            review_state=ReviewState(d.get("review_state", "unreviewed")),
            ancestor_id=d.get("ancestor_id"),
            source_name=d.get("source_name"),
            source_item_id=d.get("source_item_id"),
            source_path=d.get("source_path"),
            extras={k: v for k, v in d.items() if k not in known},
        )


@dataclass(frozen=True)
class SeedQuestion:
    id: str
    domain: Domain
    kind: SeedKind
    template: str
    category: str | None = None
    validated: bool = False
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    @staticmethod
    def make_id(domain: Domain, template: str) -> str:
        return record_id("seed", domain=domain.value, template=template)

    def to_dict(self) -> dict[str, Any]:
        d = _clean(
            {
                "id": self.id,
                "domain": self.domain.value,
                "kind": self.kind.value,
                "template": self.template,
                "category": self.category,
            }
        )
        d["validated"] = self.validated
        d.update(self.extras)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SeedQuestion":
        known = {"id", "domain", "kind", "template", "category", "validated"}
        return cls(
            id=d["id"],
            domain=Domain(d["domain"]),
            kind=SeedKind(d["kind"]),
            template=d["template"],
            category=d.get("category"),
            validated=bool(d.get("validated", False)),
            extras={k: v for k, v in d.items() if k not in known},
        )


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for one generation run."""

    n_seed_refs: int = 3
    questions_per_call: int = 3        # single-turn; multi-round calls yield 5 turns
    multi_round_turns: int = 5
    rng_seed: int = 0
    backend_profile: str = "default"

    def __post_init__(self) -> None:
        if self.n_seed_refs < 1:
            raise ValueError("n_seed_refs must be positive")
        if self.questions_per_call < 1:
            raise ValueError("questions_per_call must be positive")

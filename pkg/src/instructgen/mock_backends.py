"""Deterministic in-tree stand-ins for every external service.

Fixture-table mocks raise ``FixtureMissing`` on unknown keys, which makes
prompt-assembly drift show up as loud test failures. The synthetic text
backend instead derives a well-formed response purely from the prompt
text, so whole-corpus runs need no hand-written fixture per call; it is
still a pure function of its input.
"""
from __future__ import annotations

import hashlib
import json
import random
import re
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .backends import FetchedImage
from .domains import Domain
from .errors import BackendTimeout, FixtureMissing
from .identity import dedup_key, prompt_fingerprint
from .records import ImageRecord, SourceChannel

# ------------------------------------------------------------------ fixtures


def tiny_png(seed: int, size: int = 4) -> bytes:
    """A valid, deterministic little PNG; distinct seeds give distinct bytes."""
    rng = random.Random(seed)
    raw = b"".join(
        b"\x00" + bytes(rng.randrange(256) for _ in range(size * 3)) for _ in range(size)
    )

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    header = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", header)
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )


_NOUNS = (
    "lighthouse", "orchard", "tram", "waterfall", "observatory", "market stall",
    "suspension bridge", "glacier", "windmill", "amphitheater", "canal boat",
    "cathedral", "vineyard", "escalator", "fountain", "greenhouse", "harbor",
    "mosaic", "pagoda", "quarry", "reservoir", "sculpture", "terrace", "viaduct",
)
_ADJECTIVES = (
    "weathered", "gleaming", "crowded", "quiet", "angular", "ornate", "sunlit",
    "foggy", "restored", "abandoned", "colorful", "narrow", "towering", "tilted",
    "symmetrical", "shadowed",
)
_SETTINGS = (
    "at dusk", "under a clear sky", "during a festival", "after a rainstorm",
    "in early morning light", "seen from above", "framed by trees",
    "reflected in water",
)


def _rng_for(text: str) -> random.Random:
    return random.Random(int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big"))


def synthetic_caption(image_id: str, domain: Domain | None = None, tags: tuple[str, ...] = ()) -> str:
    """Deterministic multi-sentence caption, comfortably above the length floor."""
    rng = _rng_for(f"caption:{image_id}")
    nouns = rng.sample(_NOUNS, 4)
    adjs = rng.sample(_ADJECTIVES, 4)
    setting = rng.choice(_SETTINGS)
    tag_note = f" Context tags mention {', '.join(tags)}." if tags else ""
    domain_note = f" The scene fits the {domain.display_name} task." if domain else ""
    return (
        f"The image shows a {adjs[0]} {nouns[0]} {setting}. "
        f"In the foreground, a {adjs[1]} {nouns[1]} partially blocks the view, while a "
        f"{adjs[2]} {nouns[2]} occupies the middle distance and a {adjs[3]} {nouns[3]} "
        f"closes the background. Fine surface details are visible on the {nouns[0]}, "
        f"including texture, color gradients, and small irregularities that suggest age and use. "
        f"The overall composition balances the {nouns[1]} against the {nouns[3]}, and the light "
        f"direction makes the {nouns[2]} cast a long, soft shadow across the scene."
        f"{domain_note}{tag_note}"
    )


class MockVLM:
    """Caption backend keyed by image id; optional synthesizer fallback."""

    def __init__(
        self,
        table: dict[str, str] | None = None,
        fallback: Callable[[str], str] | None = None,
        backend_id: str = "mock-vlm",
    ):
        self.table = dict(table or {})
        self.fallback = fallback
        self.backend_id = backend_id

    def describe_image(self, image_id: str, image_data: bytes, prompt: str) -> str:
        if image_id in self.table:
            return self.table[image_id]
        if self.fallback:
            return self.fallback(image_id)
        raise FixtureMissing(f"no caption fixture for image {image_id}")


class FixtureLLM:
    """Text backend keyed by the exact prompt fingerprint (intentionally brittle)."""

    def __init__(self, table: dict[str, str], backend_id: str = "mock-llm"):
        self.table = dict(table)
        self.backend_id = backend_id

    def complete(self, prompt: str) -> str:
        key = prompt_fingerprint(prompt)
        if key not in self.table:
            raise FixtureMissing(f"no response fixture for prompt fingerprint {key[:16]}…")
        return self.table[key]


class SyntheticLLM:
    """Pure deterministic generation backend.

    Reads the request shape (single-turn count and question type, or the
    multi-round task) out of the prompt itself and emits a response in the
    required output format. Identical prompts always produce identical
    responses.
    """

    backend_id = "mock-llm-synthetic"

    _REQUEST = re.compile(
        r"(?:design|ask) (\d+) (Judgment|Multiple-Choice|Long VQA|Short VQA) questions"
    )

    def complete(self, prompt: str) -> str:
        rng = _rng_for(f"llm:{prompt}")
        if "Create 5 Questions" in prompt:
            return self._multi_round(rng)
        m = self._REQUEST.search(prompt)
        if not m:
            raise FixtureMissing("prompt does not state a recognizable generation request")
        count, label = int(m.group(1)), m.group(2)
        emit = {
            "Judgment": self._judgment,
            "Multiple-Choice": self._multiple_choice,
            "Long VQA": self._long_vqa,
            "Short VQA": self._short_vqa,
        }[label]
        blocks = [emit(i, topic, rng) for i, topic in enumerate(rng.sample(_NOUNS, count), start=1)]
        return "\n\n".join(blocks)

    @staticmethod
    def _judgment(i: int, topic: str, rng: random.Random) -> str:
        adj = rng.choice(_ADJECTIVES)
        verdict = rng.choice(("Yes", "No"))
        return f"Question {i}: Does the image mainly show a {adj} {topic}?\nAnswer {i}: {verdict}"

    @staticmethod
    def _multiple_choice(i: int, topic: str, rng: random.Random) -> str:
        adjs = rng.sample(_ADJECTIVES, 4)
        correct = rng.randrange(4)
        letters = "ABCD"
        options = "\n".join(f"{letters[j]}. The {adjs[j]} {topic}" for j in range(4))
        return (
            f"Question {i}: Which option best describes the {topic} in the image?\n"
            f"Options {i}:\n{options}\nAnswer {i}: {letters[correct]}"
        )

    @staticmethod
    def _short_vqa(i: int, topic: str, rng: random.Random) -> str:
        adj = rng.choice(_ADJECTIVES)
        return (
            f"Question {i}: What condition is the {topic} in the image in?\n"
            f"Answer {i}: It looks {adj}."
        )

    @staticmethod
    def _long_vqa(i: int, topic: str, rng: random.Random) -> str:
        adj, setting = rng.choice(_ADJECTIVES), rng.choice(_SETTINGS)
        return (
            f"Question {i}: Explain the role of the {topic} in the overall scene.\n"
            f"Answer {i}: The {topic} anchors the composition {setting}. Its {adj} surface "
            f"draws the eye first, and the surrounding elements are arranged to lead back "
            f"toward it, which gives the image a clear focal hierarchy."
        )

    def _multi_round(self, rng: random.Random) -> str:
        subject, prop = rng.sample(_NOUNS, 2)
        adj, setting = rng.choice(_ADJECTIVES), rng.choice(_SETTINGS)
        qa = [
            ("What is the main subject of the image?",
             f"The main subject is a {adj} {subject} {setting}."),
            (f"What stands near the {subject}?",
             f"A {prop} stands close by, slightly behind the {subject}."),
            (f"How does the {prop} relate to the {subject}?",
             f"The {prop} frames the {subject} and gives the scene its sense of scale."),
            ("What does the lighting reveal about the time of day?",
             f"The long shadows around the {subject} suggest the photo was taken {setting}."),
            ("Putting it together, what story does the image tell?",
             f"It shows the {subject} and the {prop} as one composed scene, "
             f"captured deliberately {setting}."),
        ]
        return "\n\n".join(
            f"Question {i}: {q}\nAnswer {i}: {a}" for i, (q, a) in enumerate(qa, start=1)
        )


class MockOCR:
    def __init__(self, table: dict[str, str] | None = None):
        self.table = dict(table or {})

    def recognize(self, image_id: str, image_data: bytes) -> str:
        return self.table.get(image_id, "")


class MockSimilarityIndex:
    def __init__(self, table: dict[str, list[FetchedImage]] | None = None, index_name: str = "mock-index"):
        self.table = dict(table or {})
        self.index_name = index_name

    def neighbors(self, anchor_id: str, k: int) -> list[FetchedImage]:
        if anchor_id not in self.table:
            raise FixtureMissing(f"no neighbor fixture for anchor {anchor_id}")
        return self.table[anchor_id][:k]


class MockFetcher:
    def __init__(self, table: dict[str, list[FetchedImage]] | None = None):
        self.table = dict(table or {})

    def fetch(self, phrase: str) -> list[FetchedImage]:
        return self.table.get(phrase, [])


class FaultInjector:
    """Wrap a backend with call-count fault profiles.

    fail_first=n      raise BackendTimeout on the first n calls
    timeout_after=n   raise BackendTimeout on every call after the n-th
    malformed_at=m    return garbage text on exactly the m-th call
    """

    def __init__(
        self,
        inner,
        fail_first: int = 0,
        timeout_after: int | None = None,
        malformed_at: int | None = None,
    ):
        self.inner = inner
        self.backend_id = getattr(inner, "backend_id", "mock")
        self.fail_first = fail_first
        self.timeout_after = timeout_after
        self.malformed_at = malformed_at
        self.calls = 0

    def _tick(self) -> int:
        self.calls += 1
        if self.calls <= self.fail_first:
            raise BackendTimeout(f"injected timeout on call {self.calls}")
        if self.timeout_after is not None and self.calls > self.timeout_after:
            raise BackendTimeout(f"injected timeout on call {self.calls}")
        return self.calls

    def complete(self, prompt: str) -> str:
        n = self._tick()
        if n == self.malformed_at:
            return "this reply ignores the requested format entirely"
        return self.inner.complete(prompt)

    def describe_image(self, image_id: str, image_data: bytes, prompt: str) -> str:
        n = self._tick()
        if n == self.malformed_at:
            return ""
        return self.inner.describe_image(image_id, image_data, prompt)


# -------------------------------------------------------------- demo corpus

DEMO_OCR_TEXTS = (
    "STOP AHEAD",
    "FRESH MARKET OPEN DAILY",
    "PLATFORM 4 — TRAINS TO HARBOR",
    "NO PARKING 8AM-6PM",
)

DEMO_DOMAIN_PLAN: tuple[tuple[Domain, int], ...] = (
    (Domain.LANDMARK, 4),
    (Domain.SPECIES_RECOGNITION, 4),
    (Domain.OCR, 4),
    (Domain.NUMERICAL_CALCULATION, 3),
    (Domain.COMPLEX_REASONING, 3),
    (Domain.MULTI_ROUND_LONG_VQA, 2),
)

DEMO_KEY_PHRASES: dict[Domain, list[str]] = {
    Domain.LANDMARK: ["famous tower", "historic bridge"],
    Domain.SPECIES_RECOGNITION: ["mammals", "marine life", "insect"],
    Domain.OCR: ["street sign", "shop front"],
    Domain.NUMERICAL_CALCULATION: ["geometry worksheet", "math formula"],
    Domain.COMPLEX_REASONING: ["busy intersection", "workshop scene"],
    Domain.MULTI_ROUND_LONG_VQA: ["street market", "train station"],
}


@dataclass
class FixtureSet:
    """A deterministic corpus wired into mock backends."""

    key_phrases: dict[Domain, list[str]]
    fetcher: MockFetcher
    vlm: MockVLM
    ocr: MockOCR
    index: MockSimilarityIndex
    images: list[tuple[Domain, FetchedImage]] = field(default_factory=list)


def demo_fixture_set(extra_neighbors: int = 2) -> FixtureSet:
    """The 20-image corpus used by the mock pipeline mode and the tests."""
    fetch_table: dict[str, list[FetchedImage]] = {}
    ocr_table: dict[str, str] = {}
    images: list[tuple[Domain, FetchedImage]] = []

    seed = 0
    for domain, count in DEMO_DOMAIN_PLAN:
        phrases = DEMO_KEY_PHRASES[domain]
        for n in range(count):
            phrase = phrases[n % len(phrases)]
            img = FetchedImage(
                uri=f"fixture://{domain.value}/{n}",
                data=tiny_png(seed),
                tags=(domain.display_name, f"sample-{n}", phrase),
            )
            seed += 1
            fetch_table.setdefault(phrase, []).append(img)
            images.append((domain, img))

    # OCR fixtures are keyed by the ids ingest will assign to these images.
    ocr_images = [img for d, img in images if d is Domain.OCR]
    for i, img in enumerate(ocr_images):
        image_id = ImageRecord.make_id(dedup_key(img.data), Domain.OCR, SourceChannel.WEB_CRAWL)
        ocr_table[image_id] = DEMO_OCR_TEXTS[i % len(DEMO_OCR_TEXTS)]

    # A couple of similarity neighbors for the first landmark image.
    anchor = images[0][1]
    anchor_id = ImageRecord.make_id(dedup_key(anchor.data), Domain.LANDMARK, SourceChannel.WEB_CRAWL)
    neighbors = [
        FetchedImage(
            uri=f"fixture://landmark/neighbor-{i}",
            data=tiny_png(1000 + i),
            tags=("landmark", f"neighbor-{i}"),
        )
        for i in range(extra_neighbors)
    ]
    index = MockSimilarityIndex({anchor_id: neighbors})

    return FixtureSet(
        key_phrases={d: list(p) for d, p in DEMO_KEY_PHRASES.items()},
        fetcher=MockFetcher(fetch_table),
        vlm=MockVLM(fallback=synthetic_caption),
        ocr=MockOCR(ocr_table),
        index=index,
        images=images,
    )


def write_manifest_corpus(
    directory: str | Path,
    total: int = 50,
    duplicates: int = 10,
    domain: Domain = Domain.IMAGE_SCENE,
) -> Path:
    """Write a local import corpus: PNG files plus a JSONL manifest.

    ``duplicates`` of the manifest rows point at byte-identical copies of
    already-listed images (fresh file names, same content).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    unique = total - duplicates
    if unique <= 0:
        raise ValueError("total must exceed duplicates")
    rows = []
    for i in range(total):
        source = i if i < unique else (i - unique) % unique
        data = tiny_png(5000 + source)
        path = directory / f"img_{i:03d}.png"
        path.write_bytes(data)
        rows.append({"uri": str(path), "domain": domain.value, "tags": [f"scene-{source}"]})
    manifest = directory / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return manifest

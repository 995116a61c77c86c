"""Detailed image captioning stage.

Assembles the per-domain caption prompt, calls the vision-language
backend, and persists one CaptionRecord per image. The prompt assembly is
fully deterministic so that the stored prompt fingerprint can always be
recomputed and checked.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

from .backends import OCRBackend, VLMBackend
from .costing import CostLedger
from .domains import Domain
from .errors import BackendTimeout, EmptyCaption, MissingTemplate, UnresolvedSlot
from .identity import prompt_fingerprint
from .ratelimit import RetryPolicy, TokenBucket, call_with_retry
from .records import CaptionRecord, ImageRecord, ImageState
from .sectionfile import parse_sections
from .store import RecordStore

log = logging.getLogger(__name__)

DEFAULT_TEMPLATE_PATH = Path(__file__).parent / "templates" / "caption_prompt.txt"

# The seven domains that carry an addendum in the caption prompt.
ADDENDUM_DOMAINS = (
    Domain.NUMERICAL_CALCULATION,
    Domain.BRAND_RECOGNITION,
    Domain.POSTERS,
    Domain.LANDMARK,
    Domain.MEME_COMPREHENSION,
    Domain.SOCIAL_RELATION,
    Domain.SPATIAL_RELATIONSHIP,
)

UNIVERSAL_ANCHOR = "Describe the image in as much detail as possible."
TAGS_HEADER = "Image related information:"
OCR_HEADER = "Text information in the image:"

SHORT_CAPTION_WORDS = 40  # soft floor; target average is ~200 words


@dataclass(frozen=True)
class CaptionPromptTemplate:
    universal_body: str
    domain_addenda: dict[Domain, str]

    def __post_init__(self) -> None:
        if UNIVERSAL_ANCHOR not in self.universal_body:
            raise MissingTemplate(f"universal body lacks the anchor sentence {UNIVERSAL_ANCHOR!r}")
        expected = set(ADDENDUM_DOMAINS)
        actual = set(self.domain_addenda)
        if actual != expected:
            missing = sorted(d.value for d in expected - actual)
            surplus = sorted(d.value for d in actual - expected)
            raise MissingTemplate(f"addenda mismatch: missing={missing} surplus={surplus}")

    @classmethod
    def load(cls, path: str | Path = DEFAULT_TEMPLATE_PATH) -> "CaptionPromptTemplate":
        path = Path(path)
        if not path.exists():
            raise MissingTemplate(f"no caption template at {path}")
        sections = parse_sections(path.read_text(encoding="utf-8"))
        if "universal" not in sections:
            raise MissingTemplate("caption template lacks a [universal] section")
        addenda = {}
        for name, body in sections.items():
            if name.startswith("addendum "):
                addenda[Domain.parse(name.removeprefix("addendum "))] = body
        return cls(universal_body=sections["universal"], domain_addenda=addenda)


def build_caption_prompt(image: ImageRecord, template: CaptionPromptTemplate) -> str:
    """Render the caption prompt for one screened image.

    Slot lines whose value is absent are dropped whole, matching the
    template's "(if has)" semantics.
    """
    if image.state is not ImageState.SCREENED:
        raise ValueError(f"image {image.id} is {image.state.value}, expected screened")
    addendum = template.domain_addenda.get(image.domain)
    lines: list[str] = []
    for line in template.universal_body.splitlines():
        if "{ocr_text}" in line:
            if image.ocr_text:
                lines.append(line.replace("{ocr_text}", image.ocr_text))
            continue
        if "{special_requirements}" in line:
            if addendum:
                lines.append(line.replace("{special_requirements}", addendum))
            continue
        lines.append(line.replace("{image_tags}", ", ".join(image.tags)))
    prompt = "\n".join(lines)
    leftover = [tok for tok in ("{image_tags}", "{ocr_text}", "{special_requirements}") if tok in prompt]
    if leftover:
        raise UnresolvedSlot(f"unresolved slots in caption prompt: {leftover}")
    return prompt


def ocr_annotate(image: ImageRecord, ocr: OCRBackend, store: RecordStore) -> ImageRecord:
    """Attach OCR text to an image; empty recognition is stored as absent."""
    if image.state not in (ImageState.COLLECTED, ImageState.SCREENED):
        raise ValueError(f"image {image.id} is {image.state.value}; OCR runs before captioning")
    text = ocr.recognize(image.id, store.open_blob(image.dedup_key)).strip()
    updated = dataclasses.replace(image, ocr_text=text or None)
    store.update_image(updated)
    return updated


class Captioner:
    def __init__(
        self,
        store: RecordStore,
        backend: VLMBackend,
        ledger: CostLedger,
        template: CaptionPromptTemplate | None = None,
        retry: RetryPolicy | None = None,
        bucket: TokenBucket | None = None,
    ):
        self.store = store
        self.backend = backend
        self.ledger = ledger
        self.template = template or CaptionPromptTemplate.load()
        self.retry = retry or RetryPolicy()
        self.bucket = bucket

    def caption_image(self, image: ImageRecord) -> CaptionRecord:
        """Caption one screened image; idempotent per (image, prompt)."""
        if image.state is ImageState.CAPTIONED:
            existing = self.store.captions_for_image(image.id)
            if existing:
                return min(existing, key=lambda c: c.id)
        prompt = build_caption_prompt(image, self.template)
        fingerprint = prompt_fingerprint(prompt)
        caption_id = CaptionRecord.make_id(image.id, fingerprint)
        existing = [c for c in self.store.captions_for_image(image.id) if c.id == caption_id]
        if existing:
            return existing[0]

        if self.bucket:
            self.bucket.acquire()
        retries = 0

        def note_retry(attempt: int, exc: BaseException) -> None:
            nonlocal retries
            retries += 1
            log.warning("caption backend retry %d for image %s: %s", retries, image.id, exc)

        text = call_with_retry(
            lambda: self.backend.describe_image(image.id, self.store.open_blob(image.dedup_key), prompt),
            self.retry,
            retry_on=(BackendTimeout,),
            on_retry=note_retry,
        ).strip()
        if not text:
            self.store.audit("caption.empty", image.id, backend=self.backend.backend_id)
            raise EmptyCaption(f"backend returned an empty caption for image {image.id}")
        if len(text.split()) < SHORT_CAPTION_WORDS:
            log.warning("caption for image %s is only %d words", image.id, len(text.split()))

        record = CaptionRecord(
            id=caption_id,
            image_id=image.id,
            text=text,
            backend_id=self.backend.backend_id,
            prompt_fingerprint=fingerprint,
        )
        if self.store.put_caption(record):
            self.ledger.add_captions(1)
            if retries:
                self.store.audit("caption.retries", image.id, count=retries)
        self.store.transition_image(image.id, ImageState.CAPTIONED, actor="captioner")
        return record

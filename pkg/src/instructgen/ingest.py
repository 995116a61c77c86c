"""Image collection: crawl, similarity expansion, import, dedup, screening.

Three channels feed the store. Web crawling and similarity expansion run
against pluggable fetcher/index contracts (mock implementations ship
in-tree; production crawlers are deliberately out of scope). The
open-source channel imports a local directory through a JSONL manifest.

Every candidate passes the dedup gate: byte-identical images are dropped,
and images whose tag multiset collides with an existing image of the same
domain are accepted but flagged for extra attention during screening.
"""
from __future__ import annotations

import dataclasses
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .backends import FetchedImage, ImageFetcher, SimilarityIndex
from .domains import Domain
from .errors import (
    AnchorMissing,
    ConfigError,
    EmptyQueue,
    FetcherUnavailable,
    QuotaExceeded,
)
from .identity import dedup_key as compute_dedup_key
from .ratelimit import RetryPolicy, call_with_retry
from .records import ImageRecord, ImageState, SourceChannel
from .store import RecordStore

SCREEN_LEASE_TTL_S = 1800.0


@dataclass(frozen=True)
class KeyPhraseSet:
    domain: Domain
    phrases: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.phrases:
            raise ConfigError(f"no key phrases configured for domain {self.domain.value}")
        if any(not p.strip() for p in self.phrases):
            raise ConfigError(f"blank key phrase in domain {self.domain.value}")

    @classmethod
    def load(cls, path: str | Path) -> "KeyPhraseSet":
        """One file per domain: ``<domain>.phrases``, one phrase per line."""
        path = Path(path)
        domain = Domain.parse(path.name.removesuffix(".phrases"))
        phrases = tuple(
            line.strip()
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith("#")
        )
        return cls(domain=domain, phrases=phrases)


@dataclass(frozen=True)
class SimilarityQuery:
    anchor_image_id: str
    k: int
    index_name: str

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("similarity query needs k >= 1")


@dataclass(frozen=True)
class GateResult:
    """Outcome of the dedup gate for one candidate."""

    verdict: str  # accepted | duplicate
    existing_id: str | None = None
    screen_flag: str | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"


@dataclass
class ChannelReport:
    fetched: int = 0
    accepted: int = 0
    duplicates: int = 0
    errors: int = 0
    records: list[ImageRecord] = field(default_factory=list)

    def conserved(self) -> bool:
        return self.accepted + self.duplicates + self.errors == self.fetched


def dedup_gate(store: RecordStore, candidate: ImageRecord) -> GateResult:
    """Strict byte-level dedup plus tag-based near-duplicate flagging.

    Byte duplicates are rejected outright. A distinct image whose tag
    multiset equals that of an existing non-rejected image in the same
    domain is accepted but flagged; the visual judgment is deferred to
    human screening.
    """
    existing = store.dedup_lookup(candidate.dedup_key)
    if existing is not None and existing != candidate.id:
        return GateResult(verdict="duplicate", existing_id=existing)
    flag = None
    if candidate.tags:
        tag_bag = Counter(candidate.tags)
        for other in store.images():
            if (
                other.id != candidate.id
                and other.state is not ImageState.REJECTED
                and other.domain is candidate.domain
                and Counter(other.tags) == tag_bag
            ):
                flag = f"near-duplicate-tags:{other.id}"
                break
    return GateResult(verdict="accepted", screen_flag=flag)


class Ingestor:
    def __init__(self, store: RecordStore, retry: RetryPolicy | None = None):
        self.store = store
        self.retry = retry or RetryPolicy()
        self._screen_leases = store.lease_table("screening", SCREEN_LEASE_TTL_S)

    # --------------------------------------------------------------- intake

    def _admit(
        self,
        fetched: FetchedImage,
        domain: Domain,
        channel: SourceChannel,
        key_phrase: str | None,
        report: ChannelReport,
    ) -> ImageRecord | None:
        digest = compute_dedup_key(fetched.data)
        candidate = ImageRecord(
            id=ImageRecord.make_id(digest, domain, channel),
            uri=fetched.uri,
            source_channel=channel,
            domain=domain,
            dedup_key=digest,
            key_phrase=key_phrase,
            tags=tuple(fetched.tags),
        )
        gate = dedup_gate(self.store, candidate)
        if not gate.accepted:
            report.duplicates += 1
            self.store.audit(
                "ingest.duplicate", candidate.id, existing=gate.existing_id, uri=fetched.uri
            )
            return None
        if gate.screen_flag:
            candidate = dataclasses.replace(candidate, screen_flag=gate.screen_flag)
        self.store.put_blob(fetched.data)
        if self.store.put_image(candidate):
            report.accepted += 1
            return candidate
        # Same id already present (identical content re-fetched): a duplicate.
        report.duplicates += 1
        return None

    def crawl_channel(self, phrases: KeyPhraseSet, fetcher: ImageFetcher) -> ChannelReport:
        """Crawl every phrase of a domain; duplicates are dropped and counted."""
        report = ChannelReport()
        for phrase in phrases.phrases:
            try:
                batch = call_with_retry(
                    lambda: fetcher.fetch(phrase), self.retry, retry_on=(FetcherUnavailable,)
                )
            except QuotaExceeded:
                raise
            for fetched in batch:
                report.fetched += 1
                try:
                    record = self._admit(
                        fetched, phrases.domain, SourceChannel.WEB_CRAWL, phrase, report
                    )
                except Exception:
                    report.errors += 1
                    continue
                if record is not None:
                    report.records.append(record)
        return report

    def expand_similar(self, query: SimilarityQuery, index: SimilarityIndex) -> ChannelReport:
        """Pull up to k nearest neighbors of a screened anchor image."""
        try:
            anchor = self.store.get_image(query.anchor_image_id)
        except Exception as exc:
            raise AnchorMissing(str(exc)) from exc
        if anchor.state is not ImageState.SCREENED:
            raise AnchorMissing(
                f"anchor {anchor.id} is {anchor.state.value}; expansion requires a screened anchor"
            )
        report = ChannelReport()
        for fetched in index.neighbors(query.anchor_image_id, query.k):
            report.fetched += 1
            if compute_dedup_key(fetched.data) == anchor.dedup_key:
                report.duplicates += 1  # the anchor itself came back
                continue
            record = self._admit(
                fetched, anchor.domain, SourceChannel.SIMILARITY_EXPANSION, None, report
            )
            if record is not None:
                report.records.append(record)
        return report

    def import_manifest(self, manifest_path: str | Path, base_dir: str | Path | None = None) -> ChannelReport:
        """Open-source channel: JSONL rows of {uri, domain, tags}, local files."""
        manifest_path = Path(manifest_path)
        base = Path(base_dir) if base_dir else manifest_path.parent
        report = ChannelReport()
        with manifest_path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    uri, domain = row["uri"], Domain.parse(row["domain"])
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise ConfigError(f"{manifest_path}:{line_no}: bad manifest row: {exc}") from exc
                path = Path(uri)
                if not path.is_absolute():
                    path = base / path
                if not path.exists():
                    report.fetched += 1
                    report.errors += 1
                    continue
                fetched = FetchedImage(uri=uri, data=path.read_bytes(), tags=tuple(row.get("tags", ())))
                report.fetched += 1
                record = self._admit(fetched, domain, SourceChannel.OPEN_SOURCE, None, report)
                if record is not None:
                    report.records.append(record)
        return report

    # ------------------------------------------------------------- screening

    def screen_queue_pull(self, reviewer_id: str, limit: int = 20) -> list[ImageRecord]:
        """Lease collected images to a screener; disjoint across screeners."""
        pulled: list[ImageRecord] = []
        for record in sorted(self.store.images(), key=lambda r: r.id):
            if len(pulled) >= limit:
                break
            if record.state is not ImageState.COLLECTED:
                continue
            if self._screen_leases.acquire(record.id, reviewer_id):
                pulled.append(record)
        if not pulled:
            raise EmptyQueue("no images waiting for screening")
        return pulled

    def screen_verdict(
        self,
        image_id: str,
        approve: bool,
        reviewer_id: str,
        category: str | None = None,
    ) -> ImageRecord:
        """Apply a human screening verdict to a collected image."""
        record = self.store.get_image(image_id)
        if category is not None and approve:
            record = dataclasses.replace(record, category=category)
            self.store.update_image(record)
        target = ImageState.SCREENED if approve else ImageState.REJECTED
        updated = self.store.transition_image(image_id, target, actor=reviewer_id)
        self._screen_leases.release(image_id, reviewer_id)
        return updated

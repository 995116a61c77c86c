"""Append-only record store.

Layout under a root directory:

    images.jsonl         image record snapshots (last line per id wins)
    captions.jsonl       caption records
    instructions.jsonl   instruction records
    seeds.jsonl          seed questions
    batches.jsonl        review batches (tasks embedded)
    audit.jsonl          one event per state transition
    blobs/<digest>       content-addressed image bytes
    archive/             raw backend responses kept for failed parses

Every mutation appends a full snapshot line; the in-memory index keeps the
latest snapshot per id. Stages can therefore be replayed and audited, and
a crashed run resumes by re-reading the logs. Writers serialize on one
lock (single-host tool); readers work from immutable snapshots.
"""
from __future__ import annotations

import json
import threading
import time
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import StaleStateTransition, UnknownRecord
from .identity import dedup_key as compute_dedup_key
from .records import (
    CaptionRecord,
    ImageRecord,
    ImageState,
    InstructionRecord,
    ReviewState,
    SeedQuestion,
    image_transition_allowed,
)


def _dump(d: dict[str, Any]) -> str:
    return json.dumps(d, ensure_ascii=False, separators=(",", ":"))


class RecordStore:
    def __init__(self, root: str | Path, clock: Callable[[], float] | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(exist_ok=True)
        (self.root / "archive").mkdir(exist_ok=True)
        self.clock = clock or time.time
        self._lock = threading.RLock()

        self._images: dict[str, ImageRecord] = {}
        self._captions: dict[str, CaptionRecord] = {}
        self._instructions: dict[str, InstructionRecord] = {}
        self._seeds: dict[str, SeedQuestion] = {}
        self._batches: dict[str, dict[str, Any]] = {}
        # dedup_key -> image id, non-rejected records only
        self._dedup_index: dict[str, str] = {}
        self._load()

    # ------------------------------------------------------------------ load

    def _log_path(self, name: str) -> Path:
        return self.root / f"{name}.jsonl"

    def _read_log(self, name: str) -> Iterable[dict[str, Any]]:
        path = self._log_path(name)
        if not path.exists():
            return
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def _load(self) -> None:
        for d in self._read_log("images"):
            rec = ImageRecord.from_dict(d)
            self._images[rec.id] = rec
        for d in self._read_log("captions"):
            rec = CaptionRecord.from_dict(d)
            self._captions[rec.id] = rec
        for d in self._read_log("instructions"):
            rec = InstructionRecord.from_dict(d)
            self._instructions[rec.id] = rec
        for d in self._read_log("seeds"):
            rec = SeedQuestion.from_dict(d)
            self._seeds[rec.id] = rec
        for d in self._read_log("batches"):
            self._batches[d["id"]] = d
        for rec in self._images.values():
            if rec.state is not ImageState.REJECTED:
                self._dedup_index[rec.dedup_key] = rec.id

    def _append(self, name: str, d: dict[str, Any]) -> None:
        with self._log_path(name).open("a", encoding="utf-8") as fh:
            fh.write(_dump(d) + "\n")
            fh.flush()

    # ----------------------------------------------------------------- audit

    def audit(self, action: str, record_id: str, actor: str = "system", **detail: Any) -> None:
        entry = {"ts": round(self.clock(), 6), "actor": actor, "action": action, "record_id": record_id}
        entry.update(detail)
        with self._lock:
            self._append("audit", entry)

    def audit_entries(self) -> list[dict[str, Any]]:
        return list(self._read_log("audit"))

    # ----------------------------------------------------------------- blobs

    def put_blob(self, data: bytes) -> str:
        digest = compute_dedup_key(data)
        path = self.root / "blobs" / digest
        if not path.exists():
            path.write_bytes(data)
        return digest

    def open_blob(self, digest: str) -> bytes:
        path = self.root / "blobs" / digest
        if not path.exists():
            raise UnknownRecord(f"no blob {digest}")
        return path.read_bytes()

    def has_blob(self, digest: str) -> bool:
        return (self.root / "blobs" / digest).exists()

    # ---------------------------------------------------------------- images

    def get_image(self, image_id: str) -> ImageRecord:
        try:
            return self._images[image_id]
        except KeyError:
            raise UnknownRecord(f"no image {image_id}") from None

    def images(self) -> list[ImageRecord]:
        return list(self._images.values())

    def dedup_lookup(self, key: str) -> str | None:
        """Id of the non-rejected image currently holding this dedup key."""
        return self._dedup_index.get(key)

    def put_image(self, record: ImageRecord) -> bool:
        """Insert-if-absent. Returns False when the id is already present."""
        with self._lock:
            if record.id in self._images:
                return False
            holder = self._dedup_index.get(record.dedup_key)
            if holder is not None and holder != record.id:
                raise StaleStateTransition(
                    f"dedup_key {record.dedup_key[:12]}… already held by image {holder}"
                )
            self._images[record.id] = record
            if record.state is not ImageState.REJECTED:
                self._dedup_index[record.dedup_key] = record.id
            self._append("images", record.to_dict())
            return True

    def update_image(self, record: ImageRecord) -> None:
        """Rewrite non-state fields (tags, ocr_text, category)."""
        with self._lock:
            current = self.get_image(record.id)
            if current.state is not record.state:
                raise StaleStateTransition("use transition_image to change state")
            if current.to_dict() == record.to_dict():
                return
            self._images[record.id] = record
            self._append("images", record.to_dict())

    def transition_image(
        self, image_id: str, to_state: ImageState, actor: str = "system", **detail: Any
    ) -> ImageRecord:
        """Atomic state transition along the allowed flow."""
        with self._lock:
            current = self.get_image(image_id)
            if current.state is to_state:
                return current
            if not image_transition_allowed(current.state, to_state):
                raise StaleStateTransition(
                    f"image {image_id}: {current.state.value} -> {to_state.value} not allowed"
                )
            updated = current.with_state(to_state)
            self._images[image_id] = updated
            if to_state is ImageState.REJECTED:
                if self._dedup_index.get(updated.dedup_key) == image_id:
                    del self._dedup_index[updated.dedup_key]
            self._append("images", updated.to_dict())
            self.audit(f"image.{to_state.value}", image_id, actor=actor, **detail)
            return updated

    # -------------------------------------------------------------- captions

    def get_caption(self, caption_id: str) -> CaptionRecord:
        try:
            return self._captions[caption_id]
        except KeyError:
            raise UnknownRecord(f"no caption {caption_id}") from None

    def captions(self) -> list[CaptionRecord]:
        return list(self._captions.values())

    def captions_for_image(self, image_id: str) -> list[CaptionRecord]:
        return [c for c in self._captions.values() if c.image_id == image_id]

    def put_caption(self, record: CaptionRecord) -> bool:
        with self._lock:
            if record.id in self._captions:
                return False
            self._captions[record.id] = record
            self._append("captions", record.to_dict())
            return True

    # ---------------------------------------------------------- instructions

    def get_instruction(self, rec_id: str) -> InstructionRecord:
        try:
            return self._instructions[rec_id]
        except KeyError:
            raise UnknownRecord(f"no instruction {rec_id}") from None

    def instructions(self) -> list[InstructionRecord]:
        return list(self._instructions.values())

    def put_instruction(self, record: InstructionRecord) -> bool:
        with self._lock:
            if record.id in self._instructions:
                return False
            self._instructions[record.id] = record
            self._append("instructions", record.to_dict())
            return True

    def transition_instruction(
        self,
        rec_id: str,
        to_state: ReviewState,
        expected: ReviewState | None = None,
        actor: str = "system",
        **detail: Any,
    ) -> InstructionRecord:
        with self._lock:
            current = self.get_instruction(rec_id)
            if expected is not None and current.review_state is not expected:
                raise StaleStateTransition(
                    f"instruction {rec_id}: expected {expected.value}, found {current.review_state.value}"
                )
            if current.review_state is to_state:
                return current
            updated = current.with_review_state(to_state)
            self._instructions[rec_id] = updated
            self._append("instructions", updated.to_dict())
            self.audit(f"instruction.{to_state.value}", rec_id, actor=actor, **detail)
            return updated

    # ----------------------------------------------------------------- seeds

    def get_seed(self, seed_id: str) -> SeedQuestion:
        try:
            return self._seeds[seed_id]
        except KeyError:
            raise UnknownRecord(f"no seed {seed_id}") from None

    def seeds(self) -> list[SeedQuestion]:
        return list(self._seeds.values())

    def put_seed(self, record: SeedQuestion) -> bool:
        with self._lock:
            if record.id in self._seeds:
                return False
            self._seeds[record.id] = record
            self._append("seeds", record.to_dict())
            return True

    def update_seed(self, record: SeedQuestion) -> None:
        with self._lock:
            if record.id not in self._seeds:
                raise UnknownRecord(f"no seed {record.id}")
            if self._seeds[record.id].to_dict() == record.to_dict():
                return
            self._seeds[record.id] = record
            self._append("seeds", record.to_dict())

    # --------------------------------------------------------------- batches

    def get_batch_doc(self, batch_id: str) -> dict[str, Any]:
        try:
            return self._batches[batch_id]
        except KeyError:
            raise UnknownRecord(f"no batch {batch_id}") from None

    def batch_docs(self) -> list[dict[str, Any]]:
        return list(self._batches.values())

    def put_batch_doc(self, doc: dict[str, Any]) -> None:
        with self._lock:
            self._batches[doc["id"]] = doc
            self._append("batches", doc)

    # --------------------------------------------------------------- archive

    def archive_text(self, name: str, text: str) -> Path:
        path = self.root / "archive" / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path

    # ---------------------------------------------------------------- leases

    def lease_table(self, name: str, ttl_s: float = 1800.0) -> "LeaseTable":
        return LeaseTable(self.root / f"{name}.leases.json", self.clock, ttl_s)

    # ------------------------------------------------------------- integrity

    def scan_dedup_collisions(self) -> list[tuple[str, list[str]]]:
        """Full scan: dedup keys shared by more than one non-rejected image."""
        seen: dict[str, list[str]] = {}
        for rec in self._images.values():
            if rec.state is not ImageState.REJECTED:
                seen.setdefault(rec.dedup_key, []).append(rec.id)
        return sorted((k, sorted(ids)) for k, ids in seen.items() if len(ids) > 1)


class LeaseTable:
    """Expiring single-holder leases over record ids, persisted as JSON.

    A lease marks a record as handed to one worker; expired leases are
    treated as free so abandoned sessions cannot starve the queue.
    """

    def __init__(self, path: Path, clock: Callable[[], float], ttl_s: float = 1800.0):
        self.path = path
        self.clock = clock
        self.ttl_s = ttl_s
        self._lock = threading.Lock()
        self._leases: dict[str, dict[str, Any]] = {}
        if path.exists():
            self._leases = json.loads(path.read_text(encoding="utf-8"))

    def _save(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._leases, indent=0, sort_keys=True), encoding="utf-8")
        tmp.replace(self.path)

    def _live(self, entry: dict[str, Any]) -> bool:
        return entry["expires"] > self.clock()

    def holder_of(self, rec_id: str) -> str | None:
        with self._lock:
            entry = self._leases.get(rec_id)
            return entry["holder"] if entry and self._live(entry) else None

    def acquire(self, rec_id: str, holder: str) -> bool:
        """Take the lease if free or expired; re-acquire by holder is a no-op."""
        with self._lock:
            entry = self._leases.get(rec_id)
            if entry and self._live(entry) and entry["holder"] != holder:
                return False
            self._leases[rec_id] = {"holder": holder, "expires": self.clock() + self.ttl_s}
            self._save()
            return True

    def release(self, rec_id: str, holder: str) -> None:
        with self._lock:
            entry = self._leases.get(rec_id)
            if entry and entry["holder"] == holder:
                del self._leases[rec_id]
                self._save()

"""Multi-round human correction workflow.

A batch groups instruction records of one domain. Each round is one full
shuffled pass over the batch: reviewers lease tasks one at a time, submit
approve/correct/reject verdicts, and the round closes when every task has
a verdict. A batch is accepted only after at least ``min_rounds`` rounds
(floor three) AND a final pass with zero corrections and zero rejections;
any rework re-opens another shuffled round.

Corrections create a new record with ``provenance=corrected`` linked to
its ancestor; the ancestor is retired so it can never leak into an
export. Every transition writes one audit entry.
"""
from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from typing import Any

from .costing import CostLedger
from .domains import Domain, QuestionType
from .errors import (
    AlreadyInReview,
    BatchNotInRound,
    ConfigError,
    EmptySelection,
    InvalidCorrection,
    RoundIncomplete,
    StaleLease,
)
from .identity import record_id as make_digest
from .records import InstructionRecord, Provenance, QATurn, ReviewState
from .store import RecordStore
from .suffixes import DEFAULT_SUFFIX_TABLE
from .validation import validate_record

MIN_ROUNDS_FLOOR = 3
REVIEW_LEASE_TTL_S = 1800.0

GENERIC_CHECKLIST = (
    "the question suits the image and the domain",
    "the answer is correct and grounded in the image",
    "grammar and phrasing are natural",
)

DOMAIN_CHECKLISTS: dict[Domain, tuple[str, ...]] = {
    Domain.OCR: GENERIC_CHECKLIST
    + (
        "the text in the image is recognized correctly",
        "the text content is recognized comprehensively",
        "the order of the text output corresponds to its position in the image",
    ),
    Domain.MULTI_ROUND_LONG_VQA: GENERIC_CHECKLIST
    + ("the five turns keep a continuous logical linkage",),
}


@dataclass(frozen=True)
class AcceptanceCriteria:
    domain: Domain
    checklist: tuple[str, ...]

    @classmethod
    def for_domain(cls, domain: Domain) -> "AcceptanceCriteria":
        return cls(domain=domain, checklist=DOMAIN_CHECKLISTS.get(domain, GENERIC_CHECKLIST))


@dataclass(frozen=True)
class ReviewTask:
    id: str
    batch_id: str
    record_id: str
    presented: dict[str, Any]
    round_index: int
    reviewer_id: str
    checklist: tuple[str, ...] = ()


@dataclass(frozen=True)
class RoundStatus:
    """Returned by next_task when nothing is available to this reviewer."""

    batch_id: str
    round_index: int
    rounds_completed: int
    min_rounds: int
    outstanding: int        # tasks in this round still lacking a verdict
    state: str

    @property
    def round_complete(self) -> bool:
        return self.outstanding == 0


@dataclass(frozen=True)
class BatchView:
    id: str
    domain: Domain
    state: str
    round_index: int
    rounds_completed: int
    min_rounds: int
    task_count: int
    outstanding: int


CORRECTABLE_FIELDS = ("question", "options", "correct_option", "answer", "turns")


def _shuffled(ids: list[str], rng_seed: int, round_index: int, previous: list[str]) -> list[str]:
    """Seeded permutation; re-rolled until it differs from the previous round."""
    rng = random.Random(f"{rng_seed}:{round_index}")
    order = list(ids)
    rng.shuffle(order)
    while len(order) > 1 and order == previous:
        rng.shuffle(order)
    return order


def batch_accepts(rounds_completed: int, min_rounds: int, corrections: int, rejections: int) -> bool:
    """The acceptance rule applied when a round closes.

    A batch is accepted only once at least ``min_rounds`` full passes are
    done AND the pass that just closed required no rework at all.
    """
    return rounds_completed >= min_rounds and corrections == 0 and rejections == 0


class ReviewService:
    def __init__(self, store: RecordStore, ledger: CostLedger | None = None):
        self.store = store
        self.ledger = ledger
        self._leases = store.lease_table("review", REVIEW_LEASE_TTL_S)

    # ---------------------------------------------------------------- open

    def open_batch(
        self,
        domain: Domain,
        record_ids: list[str],
        min_rounds: int = MIN_ROUNDS_FLOOR,
        rng_seed: int = 0,
    ) -> BatchView:
        if not record_ids:
            raise EmptySelection("cannot open a batch with no records")
        if min_rounds < MIN_ROUNDS_FLOOR:
            raise ConfigError(f"min_rounds {min_rounds} below the floor of {MIN_ROUNDS_FLOOR}")
        records = []
        for rid in record_ids:
            rec = self.store.get_instruction(rid)
            if rec.review_state is ReviewState.IN_REVIEW:
                raise AlreadyInReview(f"record {rid} is already in review")
            if rec.review_state is not ReviewState.UNREVIEWED:
                raise ConfigError(f"record {rid} is {rec.review_state.value}, expected unreviewed")
            records.append(rec)

        batch_id = make_digest("batch", domain=domain.value, records=sorted(record_ids), seed=rng_seed)
        tasks = {}
        task_ids = []
        for rec in records:
            task_id = make_digest("task", batch=batch_id, record=rec.id)
            task_ids.append(task_id)
            tasks[task_id] = {"record_id": rec.id, "active": True}
        doc = {
            "id": batch_id,
            "domain": domain.value,
            "task_ids": task_ids,
            "tasks": tasks,
            "min_rounds": min_rounds,
            "rng_seed": rng_seed,
            "rounds_completed": 0,
            "round_index": 1,
            "state": "in_round",
            "permutation": _shuffled(task_ids, rng_seed, 1, []),
            "verdicts": {},
            "corrections_in_round": 0,
            "rejections_in_round": 0,
            "history": [],
        }
        for rec in records:
            self.store.transition_instruction(
                rec.id, ReviewState.IN_REVIEW, expected=ReviewState.UNREVIEWED,
                actor="review", batch=batch_id, round=1,
            )
        self.store.put_batch_doc(doc)
        self.store.audit("batch.open", batch_id, tasks=len(task_ids), min_rounds=min_rounds)
        return self._view(doc)

    # Views ------------------------------------------------------------

    def _view(self, doc: dict[str, Any]) -> BatchView:
        return BatchView(
            id=doc["id"],
            domain=Domain(doc["domain"]),
            state=doc["state"],
            round_index=doc["round_index"],
            rounds_completed=doc["rounds_completed"],
            min_rounds=doc["min_rounds"],
            task_count=sum(1 for t in doc["tasks"].values() if t["active"]),
            outstanding=self._outstanding(doc),
        )

    def _outstanding(self, doc: dict[str, Any]) -> int:
        return sum(
            1
            for tid in doc["permutation"]
            if doc["tasks"][tid]["active"] and tid not in doc["verdicts"]
        )

    def batches(self) -> list[BatchView]:
        return [self._view(d) for d in sorted(self.store.batch_docs(), key=lambda d: d["id"])]

    def batch(self, batch_id: str) -> BatchView:
        return self._view(self.store.get_batch_doc(batch_id))

    # ---------------------------------------------------------------- tasks

    def _presented(self, record: InstructionRecord) -> dict[str, Any]:
        payload: dict[str, Any] = {"instruction": record.to_dict()}
        if record.image_id:
            image = self.store.get_image(record.image_id)
            payload["image"] = image.dedup_key  # blob id, served by content id
            captions = self.store.captions_for_image(record.image_id)
            if captions:
                payload["caption"] = min(captions, key=lambda c: c.id).text
        elif record.source_path:
            payload["image_path"] = record.source_path
        return payload

    def next_task(self, batch_id: str, reviewer_id: str) -> ReviewTask | RoundStatus:
        """Lease the next unserved task of the current round to a reviewer."""
        doc = self.store.get_batch_doc(batch_id)
        if doc["state"] != "in_round":
            raise BatchNotInRound(f"batch {batch_id} is {doc['state']}")
        for tid in doc["permutation"]:
            task = doc["tasks"][tid]
            if not task["active"] or tid in doc["verdicts"]:
                continue
            lease_key = f"{batch_id}/{tid}"
            # A live lease marks the task as served this round, even to its
            # own holder; expiry frees it for re-serving.
            if self._leases.holder_of(lease_key) is not None:
                continue
            self._leases.acquire(lease_key, reviewer_id)
            record = self.store.get_instruction(task["record_id"])
            return ReviewTask(
                id=tid,
                batch_id=batch_id,
                record_id=record.id,
                presented=self._presented(record),
                round_index=doc["round_index"],
                reviewer_id=reviewer_id,
                checklist=AcceptanceCriteria.for_domain(Domain(doc["domain"])).checklist,
            )
        return RoundStatus(
            batch_id=batch_id,
            round_index=doc["round_index"],
            rounds_completed=doc["rounds_completed"],
            min_rounds=doc["min_rounds"],
            outstanding=self._outstanding(doc),
            state=doc["state"],
        )

    def _apply_correction(
        self, record: InstructionRecord, payload: dict[str, Any]
    ) -> InstructionRecord:
        unknown = set(payload) - set(CORRECTABLE_FIELDS)
        if unknown:
            raise InvalidCorrection(f"uncorrectable fields: {sorted(unknown)}")
        fields: dict[str, Any] = {}
        if "question" in payload:
            fields["question"] = DEFAULT_SUFFIX_TABLE.append(str(payload["question"]), record.qtype)
        if "options" in payload:
            fields["options"] = tuple(str(o) for o in payload["options"])
        if "correct_option" in payload:
            fields["correct_option"] = payload["correct_option"]
        if "answer" in payload:
            fields["answer"] = str(payload["answer"])
        if "turns" in payload:
            fields["turns"] = tuple(QATurn(str(q), str(a)) for q, a in payload["turns"])

        corrected = dataclasses.replace(
            record,
            **fields,
            provenance=Provenance.CORRECTED,
            ancestor_id=record.id,
            review_state=ReviewState.IN_REVIEW,
        )
        # Keep answer text coherent with a re-pointed correct option.
        if corrected.qtype is QuestionType.MULTIPLE_CHOICE and corrected.correct_option is not None:
            if 0 <= corrected.correct_option < len(corrected.options) and "answer" not in payload:
                corrected = dataclasses.replace(
                    corrected, answer=corrected.options[corrected.correct_option]
                )
        corrected = dataclasses.replace(
            corrected,
            id=InstructionRecord.make_id(
                corrected.domain,
                corrected.qtype,
                corrected.question,
                image_id=corrected.image_id,
                answer=corrected.answer,
                options=corrected.options,
                turns=corrected.turns,
                source=(record.id, "correction"),
            ),
        )
        report = validate_record(corrected)
        if not report.ok:
            raise InvalidCorrection(
                f"correction fails validation: {', '.join(report.codes())}",
                violations=list(report.violations),
            )
        return corrected

    def submit_verdict(
        self,
        batch_id: str,
        task_id: str,
        reviewer_id: str,
        verdict: str,
        correction: dict[str, Any] | None = None,
    ) -> dict[str, Any]:
        """Apply one reviewer verdict; returns the applied record state."""
        doc = self.store.get_batch_doc(batch_id)
        if doc["state"] != "in_round":
            raise BatchNotInRound(f"batch {batch_id} is {doc['state']}")
        if task_id not in doc["tasks"]:
            raise EmptySelection(f"no task {task_id} in batch {batch_id}")
        lease_key = f"{batch_id}/{task_id}"
        if self._leases.holder_of(lease_key) != reviewer_id:
            raise StaleLease(f"task {task_id} is not leased by {reviewer_id}")
        if task_id in doc["verdicts"]:
            raise StaleLease(f"task {task_id} already has a verdict this round")
        if verdict not in ("approve", "correct", "reject"):
            raise ConfigError(f"unknown verdict {verdict!r}")

        task = doc["tasks"][task_id]
        record = self.store.get_instruction(task["record_id"])
        applied: dict[str, Any] = {"verdict": verdict, "record_id": record.id}

        if verdict == "correct":
            if not correction:
                raise InvalidCorrection("correct verdict requires a correction payload")
            corrected = self._apply_correction(record, correction)
            self.store.put_instruction(corrected)
            # The replaced revision is retired; only its correction can ship.
            self.store.transition_instruction(
                record.id, ReviewState.REJECTED, expected=ReviewState.IN_REVIEW,
                actor=reviewer_id, reason="superseded-by-correction", successor=corrected.id,
            )
            task["record_id"] = corrected.id
            doc["corrections_in_round"] += 1
            applied["corrected_record_id"] = corrected.id
            if self.ledger:
                self.ledger.add_corrections(1)
        elif verdict == "reject":
            self.store.transition_instruction(
                record.id, ReviewState.REJECTED, expected=ReviewState.IN_REVIEW,
                actor=reviewer_id, reason="rejected-in-review", batch=batch_id,
            )
            task["active"] = False
            doc["rejections_in_round"] += 1

        doc["verdicts"][task_id] = {
            "verdict": verdict,
            "reviewer_id": reviewer_id,
            "round": doc["round_index"],
        }
        self._leases.release(lease_key, reviewer_id)
        self.store.put_batch_doc(doc)
        self.store.audit(
            f"verdict.{verdict}", task["record_id"],
            actor=reviewer_id, batch=batch_id, round=doc["round_index"],
        )
        applied["round_index"] = doc["round_index"]
        applied["outstanding"] = self._outstanding(doc)
        return applied

    # --------------------------------------------------------------- rounds

    def advance_round(self, batch_id: str) -> BatchView:
        """Close a completed round; accept the batch or open the next round."""
        doc = self.store.get_batch_doc(batch_id)
        if doc["state"] != "in_round":
            raise BatchNotInRound(f"batch {batch_id} is {doc['state']}")
        if self._outstanding(doc) > 0:
            raise RoundIncomplete(
                f"round {doc['round_index']} still has {self._outstanding(doc)} open tasks"
            )

        corrections = doc["corrections_in_round"]
        rejections = doc["rejections_in_round"]
        doc["rounds_completed"] += 1
        doc["history"].append(
            {
                "round": doc["round_index"],
                "permutation": list(doc["permutation"]),
                "corrections": corrections,
                "rejections": rejections,
            }
        )
        if batch_accepts(doc["rounds_completed"], doc["min_rounds"], corrections, rejections):
            doc["state"] = "accepted"
            for task in doc["tasks"].values():
                if task["active"]:
                    self.store.transition_instruction(
                        task["record_id"], ReviewState.ACCEPTED, expected=ReviewState.IN_REVIEW,
                        actor="review", batch=batch_id, round=doc["round_index"],
                    )
            self.store.put_batch_doc(doc)
            self.store.audit("batch.accepted", batch_id, rounds=doc["rounds_completed"])
            return self._view(doc)

        previous = list(doc["permutation"])
        doc["round_index"] += 1
        active_ids = [tid for tid in doc["task_ids"] if doc["tasks"][tid]["active"]]
        doc["permutation"] = _shuffled(active_ids, doc["rng_seed"], doc["round_index"], previous)
        doc["verdicts"] = {}
        doc["corrections_in_round"] = 0
        doc["rejections_in_round"] = 0
        self.store.put_batch_doc(doc)
        self.store.audit(
            "batch.next-round", batch_id,
            round=doc["round_index"], corrections=corrections, rejections=rejections,
        )
        return self._view(doc)

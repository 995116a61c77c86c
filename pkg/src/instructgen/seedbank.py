"""Per-domain seed question bank.

Seed files live one per domain. Sections declare the seed kind and an
optional category tag; each non-blank line inside a section is one seed
template. Wildcard templates carry ``<placeholder>`` markers that are
passed through to the generation prompt verbatim: the text backend
instantiates them in context, this engine never fills them.

    [general]
    Identify the species in the image.

    [wildcard category=naming]
    Is the scientific name of this <object> <name>?

Newly loaded seeds are unvalidated. A small generation batch is run per
domain and a human approves the resulting report before the seeds become
eligible for sampling.
"""
from __future__ import annotations

import dataclasses
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .domains import Domain
from .errors import InsufficientSeeds, NoCaptionedImages, SeedParseError
from .records import CaptionRecord, ImageRecord, ImageState, SeedKind, SeedQuestion
from .store import RecordStore

SEED_FILE_SUFFIX = ".seeds"
DEFAULT_SEED_DIR = Path(__file__).parent / "data" / "seeds"

_HEADER_RE = re.compile(r"^\[(general|wildcard)(?:\s+category=(\S+))?\]$")
_PLACEHOLDER_RE = re.compile(r"<[^<>]+>")

SMALL_BATCH_LIMIT = 10


@dataclass(frozen=True)
class SeedLoadReport:
    counts: dict[Domain, int]
    warnings: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def parse_seed_file(path: Path, domain: Domain) -> list[SeedQuestion]:
    seeds: list[SeedQuestion] = []
    kind: SeedKind | None = None
    category: str | None = None
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _HEADER_RE.match(line)
        if m:
            kind = SeedKind(m.group(1))
            category = m.group(2)
            continue
        if line.startswith("["):
            raise SeedParseError(f"malformed section header {line!r}", str(path), line_no)
        if kind is None:
            raise SeedParseError("seed text before any [general]/[wildcard] header", str(path), line_no)
        has_placeholder = bool(_PLACEHOLDER_RE.search(line))
        if kind is SeedKind.WILDCARD and not has_placeholder:
            raise SeedParseError("wildcard seed lacks a <placeholder>", str(path), line_no)
        if kind is SeedKind.GENERAL and has_placeholder:
            raise SeedParseError("general seed contains a <placeholder>", str(path), line_no)
        seeds.append(
            SeedQuestion(
                id=SeedQuestion.make_id(domain, line),
                domain=domain,
                kind=kind,
                template=line,
                category=category,
            )
        )
    return seeds


def load_seed_bank(source: str | Path, store: RecordStore) -> SeedLoadReport:
    """Load every ``<domain>.seeds`` file under ``source`` into the store.

    ``source`` may also point at a single seed file. Counts are grouped by
    domain; a zero-seed file surfaces a warning rather than an error.
    """
    source = Path(source)
    files = [source] if source.is_file() else sorted(source.glob(f"*{SEED_FILE_SUFFIX}"))
    counts: dict[Domain, int] = {}
    warnings: list[str] = []
    for path in files:
        domain = Domain.parse(path.name.removesuffix(SEED_FILE_SUFFIX))
        seeds = parse_seed_file(path, domain)
        if not seeds:
            warnings.append(f"{path.name}: no seeds defined for domain {domain.value}")
        fresh = 0
        for seed in seeds:
            if store.put_seed(seed):
                fresh += 1
        counts[domain] = counts.get(domain, 0) + len(seeds)
    return SeedLoadReport(counts=counts, warnings=tuple(warnings))


@dataclass(frozen=True)
class SeedValidationReport:
    domain: Domain
    attempts: int
    parse_success_rate: float
    seed_usage: dict[str, int]              # seed id -> times offered
    offending_seed_ids: tuple[str, ...]     # seeds offered in failed calls
    image_ids: tuple[str, ...]
    errors: tuple[str, ...] = ()


class SeedBank:
    def __init__(self, store: RecordStore):
        self.store = store

    def pool(
        self,
        domain: Domain,
        category: str | None = None,
        include_unvalidated: bool = False,
    ) -> list[SeedQuestion]:
        """Eligible seeds, sorted by id so sampling is order-independent."""
        seeds = [
            s
            for s in self.store.seeds()
            if s.domain is domain
            and (include_unvalidated or s.validated)
            and (category is None or s.category == category)
        ]
        return sorted(seeds, key=lambda s: s.id)

    def sample_seeds(
        self,
        domain: Domain,
        n: int,
        rng_seed: int,
        category: str | None = None,
        include_unvalidated: bool = False,
    ) -> list[SeedQuestion]:
        """Uniform sample of ``n`` distinct seeds, reproducible per rng_seed."""
        pool = self.pool(domain, category, include_unvalidated)
        if len(pool) < n:
            raise InsufficientSeeds(len(pool), n)
        rng = random.Random(rng_seed)
        return rng.sample(pool, n)

    def validate_seeds_small_batch(
        self,
        domain: Domain,
        generator_handle: Callable[[ImageRecord, CaptionRecord, list[SeedQuestion]], tuple[bool, str | None]],
        n_seed_refs: int = 3,
        rng_seed: int = 0,
        limit: int = SMALL_BATCH_LIMIT,
    ) -> SeedValidationReport:
        """Trial-run the generator on a few captioned images of this domain.

        The trial samples from the whole (unvalidated) bank; validation is
        the gate that makes seeds eligible for production sampling, so it
        cannot require already-validated seeds.
        """
        images = sorted(
            (i for i in self.store.images() if i.domain is domain and i.state is ImageState.CAPTIONED),
            key=lambda i: i.id,
        )[:limit]
        if not images:
            raise NoCaptionedImages(f"no captioned images in domain {domain.value}")

        usage: dict[str, int] = {}
        offending: list[str] = []
        errors: list[str] = []
        ok_count = 0
        for offset, image in enumerate(images):
            captions = self.store.captions_for_image(image.id)
            if not captions:
                continue
            seeds = self.sample_seeds(
                domain, n_seed_refs, rng_seed + offset, include_unvalidated=True
            )
            for s in seeds:
                usage[s.id] = usage.get(s.id, 0) + 1
            ok, error = generator_handle(image, min(captions, key=lambda c: c.id), seeds)
            if ok:
                ok_count += 1
            else:
                offending.extend(s.id for s in seeds)
                if error:
                    errors.append(error)

        attempts = len(images)
        return SeedValidationReport(
            domain=domain,
            attempts=attempts,
            parse_success_rate=ok_count / attempts if attempts else 0.0,
            seed_usage=usage,
            offending_seed_ids=tuple(dict.fromkeys(offending)),
            image_ids=tuple(i.id for i in images),
            errors=tuple(errors),
        )

    def approve_validation(self, domain: Domain, seed_ids: list[str] | None = None) -> int:
        """Human approval of a validation report: flip seeds to validated.

        With no explicit ids, every seed of the domain is approved.
        """
        flipped = 0
        for seed in self.store.seeds():
            if seed.domain is not domain or seed.validated:
                continue
            if seed_ids is not None and seed.id not in seed_ids:
                continue
            self.store.update_seed(dataclasses.replace(seed, validated=True))
            flipped += 1
        return flipped

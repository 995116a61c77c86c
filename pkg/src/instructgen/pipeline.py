"""End-to-end pipeline orchestration.

Stages run in the engine's order: collect, screen, caption, seeds,
generate, expand. Every produced id is a content digest, so re-running a
stage over an unchanged store inserts nothing and costs nothing; a
crashed run is resumed by simply running again.

Mock mode wires every backend to the deterministic in-tree fixtures and
plays the human screening/seed-approval parts automatically so the whole
engine can be exercised hermetically. Manual correction is never part of
``run``: it lives behind the review service.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .backends import HttpChatBackend, load_profiles
from .captioner import Captioner, CaptionPromptTemplate, ocr_annotate
from .converter import convert_source
from .costing import CostLedger, Money, PriceTable
from .domains import NO_SEED_DOMAINS, ConvType, Domain, QuestionType
from .errors import ConfigError, EmptyQueue, InsufficientSeeds, ParseFailure, StageFailure
from .generator import GenPromptLibrary, Generator, parse_generation_response
from .ingest import Ingestor, KeyPhraseSet
from .mock_backends import FixtureSet, demo_fixture_set
from .records import GenerationConfig, ImageState
from .seedbank import DEFAULT_SEED_DIR, SeedBank, load_seed_bank
from .store import RecordStore

STAGES = ("collect", "screen", "caption", "seeds", "generate", "expand")


@dataclass
class PipelineConfig:
    store_dir: str = "store"
    mock: bool = True
    domains: list[Domain] = field(default_factory=list)
    qtypes: list[QuestionType] = field(
        default_factory=lambda: [
            QuestionType.JUDGMENT,
            QuestionType.MULTIPLE_CHOICE,
            QuestionType.LONG_VQA,
            QuestionType.SHORT_VQA,
        ]
    )
    rng_seed: int = 42
    seed_dir: str | None = None
    phrase_dir: str | None = None
    import_manifests: list[dict] = field(default_factory=list)
    convert_manifests: list[dict] = field(default_factory=list)
    backend_profiles: str | None = None
    price_table: dict = field(default_factory=dict)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    stages: list[str] = field(default_factory=lambda: list(STAGES))

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load pipeline config {path}: {exc}") from exc
        return cls.from_dict(doc, base_dir=Path(path).parent)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "PipelineConfig":
        cfg = cls()
        base = base_dir or Path.cwd()

        def _path(p: str) -> str:
            return str(p if Path(p).is_absolute() else base / p)

        if "store" in doc:
            cfg.store_dir = _path(doc["store"])
        cfg.mock = bool(doc.get("mock", cfg.mock))
        if "domains" in doc:
            cfg.domains = [Domain.parse(d) for d in doc["domains"]]
        if "qtypes" in doc:
            cfg.qtypes = [QuestionType.parse(q) for q in doc["qtypes"]]
        cfg.rng_seed = int(doc.get("rng_seed", cfg.rng_seed))
        if doc.get("seed_dir"):
            cfg.seed_dir = _path(doc["seed_dir"])
        if doc.get("phrase_dir"):
            cfg.phrase_dir = _path(doc["phrase_dir"])
        cfg.import_manifests = list(doc.get("import_manifests", ()))
        cfg.convert_manifests = list(doc.get("convert_manifests", ()))
        if doc.get("backend_profiles"):
            cfg.backend_profiles = _path(doc["backend_profiles"])
        cfg.price_table = dict(doc.get("price_table", ()))
        gen = doc.get("generation", {})
        cfg.generation = GenerationConfig(
            n_seed_refs=int(gen.get("n_seed_refs", 3)),
            questions_per_call=int(gen.get("questions_per_call", 3)),
            rng_seed=cfg.rng_seed,
        )
        if "stages" in doc:
            unknown = set(doc["stages"]) - set(STAGES)
            if unknown:
                raise ConfigError(f"unknown stages: {sorted(unknown)}")
            cfg.stages = [s for s in STAGES if s in doc["stages"]]
        return cfg


@dataclass
class RunReport:
    stages: dict[str, dict] = field(default_factory=dict)
    ledger_before: str = "0.00"
    ledger_after: str = "0.00"
    counts_before: dict = field(default_factory=dict)
    counts_after: dict = field(default_factory=dict)

    @property
    def ledger_delta(self) -> str:
        return (Money.parse(self.ledger_after) - Money.parse(self.ledger_before)).text()

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "ledger_before": self.ledger_before,
            "ledger_after": self.ledger_after,
            "ledger_delta": self.ledger_delta,
            "counts_before": self.counts_before,
            "counts_after": self.counts_after,
        }


def _stable_rng_seed(*parts: object) -> int:
    text = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


class Pipeline:
    def __init__(self, config: PipelineConfig, fixtures: FixtureSet | None = None):
        self.config = config
        self.store = RecordStore(config.store_dir)
        price = PriceTable.from_dict(config.price_table) if config.price_table else PriceTable()
        self.ledger = CostLedger(self.store.root / "ledger.json", price)
        self.fixtures = fixtures
        if config.mock and fixtures is None:
            self.fixtures = demo_fixture_set()
        self.ingestor = Ingestor(self.store)
        self.seedbank = SeedBank(self.store)
        self._wire_backends()

    def _wire_backends(self) -> None:
        if self.config.mock:
            fx = self.fixtures
            self.vlm = fx.vlm
            from .mock_backends import SyntheticLLM

            self.llm = SyntheticLLM()
            self.ocr = fx.ocr
            return
        if not self.config.backend_profiles:
            raise ConfigError("non-mock runs need a backend_profiles file")
        profiles = load_profiles(self.config.backend_profiles)
        for name in ("vlm", "llm"):
            if name not in profiles:
                raise ConfigError(f"backend_profiles lacks a {name!r} profile")
        self.vlm = HttpChatBackend(profiles["vlm"])
        self.llm = HttpChatBackend(profiles["llm"])
        self.ocr = None  # no production OCR integration; ocr_text stays absent

    # ------------------------------------------------------------- stages

    def _domains(self) -> list[Domain]:
        if self.config.domains:
            return self.config.domains
        if self.fixtures:
            return list(self.fixtures.key_phrases)
        return []

    def stage_collect(self) -> dict:
        counts = {"fetched": 0, "accepted": 0, "duplicates": 0, "errors": 0}
        if self.fixtures:
            fetcher = self.fixtures.fetcher
            phrase_map = self.fixtures.key_phrases
        elif self.config.phrase_dir:
            fetcher = None
            phrase_map = {}
            for path in sorted(Path(self.config.phrase_dir).glob("*.phrases")):
                kps = KeyPhraseSet.load(path)
                phrase_map[kps.domain] = list(kps.phrases)
        else:
            fetcher, phrase_map = None, {}
        if fetcher is not None:
            for domain in self._domains():
                phrases = phrase_map.get(domain)
                if not phrases:
                    continue
                report = self.ingestor.crawl_channel(
                    KeyPhraseSet(domain=domain, phrases=tuple(phrases)), fetcher
                )
                counts["fetched"] += report.fetched
                counts["accepted"] += report.accepted
                counts["duplicates"] += report.duplicates
                counts["errors"] += report.errors
        for entry in self.config.import_manifests:
            report = self.ingestor.import_manifest(entry["path"])
            counts["fetched"] += report.fetched
            counts["accepted"] += report.accepted
            counts["duplicates"] += report.duplicates
            counts["errors"] += report.errors
        return counts

    def stage_screen(self) -> dict:
        pending = [i for i in self.store.images() if i.state is ImageState.COLLECTED]
        if not self.config.mock:
            return {"pending": len(pending), "screened": 0}
        screened = 0
        try:
            pulled = self.ingestor.screen_queue_pull("mock-screener", limit=10_000)
        except EmptyQueue:
            pulled = []
        for record in pulled:
            self.ingestor.screen_verdict(record.id, approve=True, reviewer_id="mock-screener")
            screened += 1
        return {"pending": 0, "screened": screened}

    def stage_caption(self) -> dict:
        captioner = Captioner(
            self.store, self.vlm, self.ledger, template=CaptionPromptTemplate.load()
        )
        captioned = 0
        skipped = 0
        for image in sorted(self.store.images(), key=lambda r: r.id):
            if image.state is ImageState.CAPTIONED:
                skipped += 1
                continue
            if image.state is not ImageState.SCREENED:
                continue
            if image.domain is Domain.OCR and self.ocr is not None and image.ocr_text is None:
                image = ocr_annotate(image, self.ocr, self.store)
            captioner.caption_image(image)
            captioned += 1
        return {"captioned": captioned, "already": skipped}

    def stage_seeds(self) -> dict:
        source = self.config.seed_dir or DEFAULT_SEED_DIR
        report = load_seed_bank(source, self.store)
        validated = 0
        if self.config.mock:
            generator = self._generator()

            def trial(image, caption, seeds):
                try:
                    prompt_qtype = QuestionType.MULTIPLE_CHOICE
                    template = generator.library.template_for("with_seed", prompt_qtype)
                    from .generator import build_generation_prompt

                    prompt = build_generation_prompt(
                        caption, image, prompt_qtype, seeds, template,
                        generator.library, self.config.generation,
                    )
                    parse_generation_response(
                        generator.backend.complete(prompt),
                        prompt_qtype,
                        self.config.generation.questions_per_call,
                    )
                    return True, None
                except ParseFailure as exc:
                    return False, str(exc)

            for domain in sorted(report.counts, key=lambda d: d.value):
                if domain in NO_SEED_DOMAINS or domain.conv_type is ConvType.MULTI_ROUND:
                    continue
                has_captioned = any(
                    i.domain is domain and i.state is ImageState.CAPTIONED
                    for i in self.store.images()
                )
                if not has_captioned:
                    continue
                trial_report = self.seedbank.validate_seeds_small_batch(
                    domain, trial, n_seed_refs=self.config.generation.n_seed_refs,
                    rng_seed=self.config.rng_seed,
                )
                if trial_report.parse_success_rate == 1.0:
                    validated += self.seedbank.approve_validation(domain)
        return {"loaded": report.total, "validated": validated, "warnings": list(report.warnings)}

    def _generator(self) -> Generator:
        return Generator(self.store, self.llm, self.ledger, library=GenPromptLibrary.load())

    def stage_generate(self) -> dict:
        generator = self._generator()
        calls = 0
        records = 0
        failures = 0
        for image in sorted(self.store.images(), key=lambda r: r.id):
            if image.state is not ImageState.CAPTIONED:
                continue
            if image.domain.conv_type is ConvType.MULTI_ROUND:
                continue
            captions = self.store.captions_for_image(image.id)
            if not captions:
                continue
            caption = min(captions, key=lambda c: c.id)
            for qtype in self.config.qtypes:
                if qtype is QuestionType.MULTI_ROUND:
                    continue
                seeds = []
                if image.domain not in NO_SEED_DOMAINS:
                    try:
                        seeds = self.seedbank.sample_seeds(
                            image.domain,
                            self.config.generation.n_seed_refs,
                            _stable_rng_seed(self.config.rng_seed, image.id, qtype.value),
                            category=image.category,
                        )
                    except InsufficientSeeds:
                        failures += 1
                        continue
                try:
                    out = generator.generate_instructions(
                        caption, image, qtype, self.config.generation, seeds
                    )
                except ParseFailure:
                    failures += 1
                    continue
                calls += 1
                records += len(out)
        return {"calls": calls, "records": records, "failures": failures}

    def stage_expand(self) -> dict:
        generator = self._generator()
        multi_records = 0
        failures = 0
        for image in sorted(self.store.images(), key=lambda r: r.id):
            if image.state is not ImageState.CAPTIONED:
                continue
            if image.domain.conv_type is not ConvType.MULTI_ROUND:
                continue
            captions = self.store.captions_for_image(image.id)
            if not captions:
                continue
            try:
                out = generator.generate_instructions(
                    min(captions, key=lambda c: c.id),
                    image,
                    QuestionType.MULTI_ROUND,
                    self.config.generation,
                    [],
                )
                multi_records += len(out)
            except ParseFailure:
                failures += 1
        converted = 0
        for entry in self.config.convert_manifests:
            report = convert_source(
                entry["path"],
                entry["adapter"],
                self.store,
                source_name=entry.get("source_name"),
                domain=Domain.parse(entry["domain"]) if entry.get("domain") else None,
            )
            converted += report.converted
        return {"multi_round_records": multi_records, "converted": converted, "failures": failures}

    # ---------------------------------------------------------------- run

    def _store_counts(self) -> dict:
        return {
            "images": len(self.store.images()),
            "captions": len(self.store.captions()),
            "instructions": len(self.store.instructions()),
        }

    def run(self, stage_range: list[str] | None = None, dry_run: bool = False) -> RunReport:
        stages = [s for s in self.config.stages if stage_range is None or s in stage_range]
        report = RunReport(
            ledger_before=self.ledger.total().text(),
            counts_before=self._store_counts(),
        )
        if dry_run:
            report.stages = {name: {"dry_run": True} for name in stages}
            report.ledger_after = report.ledger_before
            report.counts_after = report.counts_before
            return report
        handlers = {
            "collect": self.stage_collect,
            "screen": self.stage_screen,
            "caption": self.stage_caption,
            "seeds": self.stage_seeds,
            "generate": self.stage_generate,
            "expand": self.stage_expand,
        }
        for name in stages:
            try:
                report.stages[name] = handlers[name]()
            except Exception as exc:
                raise StageFailure(name, str(exc)) from exc
        report.ledger_after = self.ledger.total().text()
        report.counts_after = self._store_counts()
        return report


def run_pipeline(
    config: PipelineConfig,
    stage_range: list[str] | None = None,
    dry_run: bool = False,
    fixtures: FixtureSet | None = None,
) -> RunReport:
    return Pipeline(config, fixtures=fixtures).run(stage_range, dry_run)

"""Command line entry point.

Exit codes: 0 ok, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .captioner import Captioner, CaptionPromptTemplate, ocr_annotate
from .converter import convert_source
from .costing import CostLedger, PriceTable, estimate
from .domains import Domain, QuestionType
from .errors import ConfigError, EmptyQueue, InstructGenError, StageFailure
from .exporter import dataset_stats, export_dataset, exportable
from .generator import Generator
from .ingest import Ingestor, KeyPhraseSet, SimilarityQuery
from .mock_backends import SyntheticLLM, demo_fixture_set
from .pipeline import STAGES, Pipeline, PipelineConfig
from .records import ImageState
from .review import ReviewService
from .seedbank import SeedBank, load_seed_bank
from .store import RecordStore


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False, default=str))


@click.group()
@click.option("--store", "store_dir", default="store", show_default=True, help="Record store directory.")
@click.pass_context
def main(ctx: click.Context, store_dir: str) -> None:
    """Semi-automatic visual instruction dataset engine."""
    ctx.ensure_object(dict)
    ctx.obj["store_dir"] = store_dir


def _store(ctx: click.Context) -> RecordStore:
    return RecordStore(ctx.obj["store_dir"])


def _ledger(store: RecordStore) -> CostLedger:
    return CostLedger(store.root / "ledger.json")


# ---------------------------------------------------------------- ingest

@main.group()
def ingest() -> None:
    """Collect candidate images."""


@ingest.command("crawl")
@click.option("--domain", required=True)
@click.option("--phrases", "phrase_file", type=click.Path(exists=True), help="Key-phrase file; defaults to the mock fixtures.")
@click.option("--mock", is_flag=True, help="Use the deterministic fixture fetcher.")
@click.pass_context
def ingest_crawl(ctx: click.Context, domain: str, phrase_file: str | None, mock: bool) -> None:
    store = _store(ctx)
    dom = Domain.parse(domain)
    if not mock and not phrase_file:
        raise ConfigError("crawl needs --mock or a --phrases file with a production fetcher")
    fixtures = demo_fixture_set()
    if phrase_file:
        kps = KeyPhraseSet.load(phrase_file)
    else:
        phrases = fixtures.key_phrases.get(dom)
        if not phrases:
            raise ConfigError(f"no fixture phrases for domain {dom.value}")
        kps = KeyPhraseSet(domain=dom, phrases=tuple(phrases))
    report = Ingestor(store).crawl_channel(kps, fixtures.fetcher)
    _echo_json({"fetched": report.fetched, "accepted": report.accepted,
                "duplicates": report.duplicates, "errors": report.errors})


@ingest.command("import")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.pass_context
def ingest_import(ctx: click.Context, manifest: str) -> None:
    report = Ingestor(_store(ctx)).import_manifest(manifest)
    _echo_json({"fetched": report.fetched, "accepted": report.accepted,
                "duplicates": report.duplicates, "errors": report.errors})


@ingest.command("expand")
@click.option("--anchor", required=True, help="Anchor image id.")
@click.option("--k", default=5, show_default=True)
@click.option("--mock", is_flag=True, help="Use the fixture similarity index.")
@click.pass_context
def ingest_expand(ctx: click.Context, anchor: str, k: int, mock: bool) -> None:
    if not mock:
        raise ConfigError("no production similarity index is wired in; use --mock")
    index = demo_fixture_set().index
    report = Ingestor(_store(ctx)).expand_similar(
        SimilarityQuery(anchor_image_id=anchor, k=k, index_name=index.index_name), index
    )
    _echo_json({"fetched": report.fetched, "accepted": report.accepted,
                "duplicates": report.duplicates})


@ingest.command("screen-pull")
@click.option("--reviewer", required=True)
@click.option("--limit", default=20, show_default=True)
@click.pass_context
def ingest_screen_pull(ctx: click.Context, reviewer: str, limit: int) -> None:
    try:
        records = Ingestor(_store(ctx)).screen_queue_pull(reviewer, limit)
    except EmptyQueue:
        click.echo("queue empty")
        return
    _echo_json([{"id": r.id, "uri": r.uri, "domain": r.domain.value,
                 "flag": r.screen_flag} for r in records])


@ingest.command("screen-verdict")
@click.argument("image_id")
@click.option("--reviewer", required=True)
@click.option("--approve/--reject", default=True)
@click.option("--category", default=None)
@click.pass_context
def ingest_screen_verdict(ctx: click.Context, image_id: str, reviewer: str, approve: bool, category: str | None) -> None:
    record = Ingestor(_store(ctx)).screen_verdict(image_id, approve, reviewer, category)
    click.echo(f"{record.id} -> {record.state.value}")


# --------------------------------------------------------------- caption

@main.command("caption")
@click.option("--mock", is_flag=True, help="Use the fixture vision backend.")
@click.option("--limit", default=0, help="Stop after N images (0 = all).")
@click.pass_context
def caption_cmd(ctx: click.Context, mock: bool, limit: int) -> None:
    """Caption screened images."""
    if not mock:
        raise ConfigError("production captioning runs through `run` with backend profiles")
    store = _store(ctx)
    fixtures = demo_fixture_set()
    captioner = Captioner(store, fixtures.vlm, _ledger(store), CaptionPromptTemplate.load())
    done = 0
    for image in sorted(store.images(), key=lambda r: r.id):
        if image.state is not ImageState.SCREENED:
            continue
        if image.domain is Domain.OCR and image.ocr_text is None:
            image = ocr_annotate(image, fixtures.ocr, store)
        captioner.caption_image(image)
        done += 1
        if limit and done >= limit:
            break
    click.echo(f"captioned {done} images")


# ----------------------------------------------------------------- seeds

@main.group()
def seeds() -> None:
    """Manage the seed question bank."""


@seeds.command("load")
@click.option("--source", type=click.Path(exists=True), help="Seed directory or file; defaults to the bundled bank.")
@click.pass_context
def seeds_load(ctx: click.Context, source: str | None) -> None:
    from .seedbank import DEFAULT_SEED_DIR

    report = load_seed_bank(source or DEFAULT_SEED_DIR, _store(ctx))
    _echo_json({"counts": {d.value: n for d, n in report.counts.items()},
                "warnings": list(report.warnings)})


@seeds.command("sample")
@click.option("--domain", required=True)
@click.option("-n", "count", default=3, show_default=True)
@click.option("--seed", "rng_seed", default=0, show_default=True)
@click.option("--category", default=None)
@click.option("--include-unvalidated", is_flag=True)
@click.pass_context
def seeds_sample(ctx: click.Context, domain: str, count: int, rng_seed: int, category: str | None, include_unvalidated: bool) -> None:
    bank = SeedBank(_store(ctx))
    sample = bank.sample_seeds(
        Domain.parse(domain), count, rng_seed, category, include_unvalidated
    )
    _echo_json([{"id": s.id, "kind": s.kind.value, "template": s.template} for s in sample])


@seeds.command("validate")
@click.option("--domain", required=True)
@click.option("--approve", is_flag=True, help="Approve the report and mark seeds validated.")
@click.pass_context
def seeds_validate(ctx: click.Context, domain: str, approve: bool) -> None:
    store = _store(ctx)
    bank = SeedBank(store)
    dom = Domain.parse(domain)
    generator = Generator(store, SyntheticLLM(), _ledger(store))

    def trial(image, caption, sample):
        from .generator import build_generation_prompt, parse_generation_response

        try:
            template = generator.library.template_for("with_seed", QuestionType.MULTIPLE_CHOICE)
            prompt = build_generation_prompt(
                caption, image, QuestionType.MULTIPLE_CHOICE, sample, template, generator.library
            )
            parse_generation_response(generator.backend.complete(prompt), QuestionType.MULTIPLE_CHOICE, 3)
            return True, None
        except InstructGenError as exc:
            return False, str(exc)

    report = bank.validate_seeds_small_batch(dom, trial)
    _echo_json({"domain": dom.value, "attempts": report.attempts,
                "parse_success_rate": report.parse_success_rate,
                "offending_seed_ids": list(report.offending_seed_ids)})
    if approve:
        flipped = bank.approve_validation(dom)
        click.echo(f"approved: {flipped} seeds validated")


# -------------------------------------------------------------- generate

@main.command("generate")
@click.option("--domain", required=True)
@click.option("--qtype", required=True)
@click.option("--limit", default=0, help="Max images to process (0 = all).")
@click.option("--seed", "rng_seed", default=42, show_default=True)
@click.option("--mock", is_flag=True, help="Use the deterministic text backend.")
@click.pass_context
def generate_cmd(ctx: click.Context, domain: str, qtype: str, limit: int, rng_seed: int, mock: bool) -> None:
    """Generate instruction-answer pairs from captions."""
    if not mock:
        raise ConfigError("production generation runs through `run` with backend profiles")
    store = _store(ctx)
    cfg = PipelineConfig(store_dir=ctx.obj["store_dir"], rng_seed=rng_seed,
                         domains=[Domain.parse(domain)], qtypes=[QuestionType.parse(qtype)])
    pipeline = Pipeline(cfg)
    counts = pipeline.stage_generate() if QuestionType.parse(qtype) is not QuestionType.MULTI_ROUND else pipeline.stage_expand()
    _echo_json(counts)


# --------------------------------------------------------------- convert

@main.command("convert")
@click.option("--adapter", required=True)
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--source-name", default=None)
@click.option("--domain", default=None)
@click.pass_context
def convert_cmd(ctx: click.Context, adapter: str, manifest: str, source_name: str | None, domain: str | None) -> None:
    """Import an external dataset manifest."""
    report = convert_source(
        manifest, adapter, _store(ctx), source_name=source_name,
        domain=Domain.parse(domain) if domain else None,
    )
    _echo_json({"read": report.read, "converted": report.converted,
                "skipped_existing": report.skipped_existing})


# ---------------------------------------------------------------- review

@main.group()
def review() -> None:
    """Human correction workflow."""


@review.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8400, show_default=True)
@click.pass_context
def review_serve(ctx: click.Context, host: str, port: int) -> None:
    from .review_api import serve

    click.echo(f"review service on http://{host}:{port} (store: {ctx.obj['store_dir']})")
    serve(ctx.obj["store_dir"], host, port)


@review.command("open")
@click.option("--domain", required=True)
@click.option("--min-rounds", default=3, show_default=True)
@click.option("--seed", "rng_seed", default=0, show_default=True)
@click.option("--limit", default=0, help="Cap batch size (0 = all unreviewed).")
@click.pass_context
def review_open(ctx: click.Context, domain: str, min_rounds: int, rng_seed: int, limit: int) -> None:
    store = _store(ctx)
    dom = Domain.parse(domain)
    from .records import ReviewState

    ids = sorted(
        r.id for r in store.instructions()
        if r.domain is dom and r.review_state is ReviewState.UNREVIEWED
    )
    if limit:
        ids = ids[:limit]
    view = ReviewService(store, _ledger(store)).open_batch(dom, ids, min_rounds, rng_seed)
    _echo_json({"batch_id": view.id, "tasks": view.task_count, "state": view.state})


@review.command("next")
@click.option("--batch", "batch_id", required=True)
@click.option("--reviewer", required=True)
@click.pass_context
def review_next(ctx: click.Context, batch_id: str, reviewer: str) -> None:
    import dataclasses

    store = _store(ctx)
    result = ReviewService(store, _ledger(store)).next_task(batch_id, reviewer)
    _echo_json(dataclasses.asdict(result))


@review.command("verdict")
@click.option("--batch", "batch_id", required=True)
@click.option("--task", "task_id", required=True)
@click.option("--reviewer", required=True)
@click.option("--verdict", type=click.Choice(["approve", "correct", "reject"]), required=True)
@click.option("--correction", default=None, help="JSON object of corrected fields.")
@click.pass_context
def review_verdict(ctx: click.Context, batch_id: str, task_id: str, reviewer: str, verdict: str, correction: str | None) -> None:
    store = _store(ctx)
    payload = json.loads(correction) if correction else None
    applied = ReviewService(store, _ledger(store)).submit_verdict(
        batch_id, task_id, reviewer, verdict, payload
    )
    _echo_json(applied)


@review.command("advance")
@click.option("--batch", "batch_id", required=True)
@click.pass_context
def review_advance(ctx: click.Context, batch_id: str) -> None:
    store = _store(ctx)
    view = ReviewService(store, _ledger(store)).advance_round(batch_id)
    _echo_json({"batch_id": view.id, "state": view.state,
                "rounds_completed": view.rounds_completed, "round_index": view.round_index})


# ------------------------------------------------------------------ cost

@main.group()
def cost() -> None:
    """Cost accounting."""


@cost.command("estimate")
@click.option("--images", default=0, type=int)
@click.option("--instructions", default=0, type=int)
@click.option("--mode", type=click.Choice(["engine", "manual"]), required=True)
@click.pass_context
def cost_estimate(ctx: click.Context, images: int, instructions: int, mode: str) -> None:
    store_dir = Path(ctx.obj["store_dir"])
    price = PriceTable()
    ledger_path = store_dir / "ledger.json"
    if ledger_path.exists():
        price = CostLedger(ledger_path).price
    click.echo(f"{estimate(images, instructions, mode, price)} USD")


@cost.command("total")
@click.pass_context
def cost_total(ctx: click.Context) -> None:
    ledger = _ledger(_store(ctx))
    parts = {name: f"{money} USD" for name, money in ledger.breakdown().items()}
    _echo_json({"counts": ledger.counts(), "breakdown": parts, "total": f"{ledger.total()} USD"})


# ---------------------------------------------------------------- export

@main.command("export")
@click.option("--out", required=True, type=click.Path())
@click.option("--profile", default="conversations", show_default=True)
@click.option("--array", "as_array", is_flag=True, help="Single JSON array instead of JSONL.")
@click.pass_context
def export_cmd(ctx: click.Context, out: str, profile: str, as_array: bool) -> None:
    """Write the accepted dataset in dialogue format."""
    result = export_dataset(_store(ctx), out, profile, as_array)
    click.echo(f"exported {result.count} records to {result.path}")


@main.command("stats")
@click.option("--accepted-only", is_flag=True, help="Restrict to exportable records.")
@click.pass_context
def stats_cmd(ctx: click.Context, accepted_only: bool) -> None:
    """Dataset statistics: totals, domains, question types."""
    store = _store(ctx)
    records = store.instructions()
    if accepted_only:
        records = [r for r in records if exportable(r)]
    report = dataset_stats(records, store)
    click.echo(report.table())
    _echo_json(report.to_dict())


# ------------------------------------------------------------------- run

@main.command("run")
@click.option("--config", "config_file", type=click.Path(exists=True), help="Pipeline config JSON.")
@click.option("--stages", "stage_csv", default=None, help=f"Comma-separated subset of {','.join(STAGES)}.")
@click.option("--dry-run", is_flag=True)
@click.option("--mock", is_flag=True, help="Force mock backends regardless of config.")
@click.pass_context
def run_cmd(ctx: click.Context, config_file: str | None, stage_csv: str | None, dry_run: bool, mock: bool) -> None:
    """Run the pipeline stages end to end."""
    if config_file:
        cfg = PipelineConfig.from_file(config_file)
        cfg.store_dir = ctx.obj["store_dir"] if ctx.obj["store_dir"] != "store" else cfg.store_dir
    else:
        cfg = PipelineConfig(store_dir=ctx.obj["store_dir"])
    if mock:
        cfg.mock = True
    stage_range = stage_csv.split(",") if stage_csv else None
    if stage_range:
        unknown = set(stage_range) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
    report = Pipeline(cfg).run(stage_range, dry_run)
    _echo_json(report.to_dict())


def cli() -> None:
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(130)
    except StageFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except InstructGenError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    cli()

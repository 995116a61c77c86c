from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from instructgen.costing import Money
from instructgen.domains import ConvType, Domain, QuestionType
from instructgen.errors import ConfigError
from instructgen.pipeline import STAGES, Pipeline, PipelineConfig, run_pipeline
from instructgen.records import ImageState, Provenance
from instructgen.store import RecordStore
from instructgen.validation import validate_record

RECORD_LOGS = ("images.jsonl", "captions.jsonl", "instructions.jsonl", "seeds.jsonl")


def _log_digests(store_dir: Path) -> dict[str, str]:
    out = {}
    for name in RECORD_LOGS:
        path = store_dir / name
        out[name] = hashlib.sha256(path.read_bytes()).hexdigest() if path.exists() else ""
    return out


@pytest.fixture
def config(tmp_path) -> PipelineConfig:
    return PipelineConfig(store_dir=str(tmp_path / "store"))


class TestMockRun:
    def test_all_stages_produce_expected_shape(self, config):
        report = run_pipeline(config)
        assert list(report.stages) == list(STAGES)
        assert report.stages["collect"]["accepted"] == 20
        assert report.stages["screen"]["screened"] == 20
        assert report.stages["caption"]["captioned"] == 20
        assert report.stages["generate"]["failures"] == 0
        # single-turn: 3 records per call, always
        gen = report.stages["generate"]
        assert gen["records"] == 3 * gen["calls"]
        assert gen["records"] >= 60
        assert report.stages["expand"]["multi_round_records"] == 2

    def test_every_persisted_record_validates(self, config):
        run_pipeline(config)
        store = RecordStore(config.store_dir)
        records = store.instructions()
        assert records
        for record in records:
            assert validate_record(record).ok, record.id

    def test_stage_ordering_invariant(self, config):
        run_pipeline(config)
        store = RecordStore(config.store_dir)
        for record in store.instructions():
            if record.provenance is Provenance.CONVERTED:
                continue
            image = store.get_image(record.image_id)
            assert image.state is ImageState.CAPTIONED
            assert store.captions_for_image(image.id)

    def test_ledger_matches_price_table_arithmetic(self, config):
        report = run_pipeline(config)
        store = RecordStore(config.store_dir)
        p = Pipeline(config)
        captions = len(store.captions())
        instructions = len(store.instructions())
        expected = p.ledger.price.caption_unit.scaled(captions) + p.ledger.price.gen_instruction_unit.scaled(instructions)
        assert Money.parse(report.ledger_after) == expected

    def test_caption_stage_only_creates_no_instructions(self, tmp_path):
        config = PipelineConfig(store_dir=str(tmp_path / "store"))
        report = run_pipeline(config, stage_range=["collect", "screen", "caption"])
        store = RecordStore(config.store_dir)
        assert report.stages["caption"]["captioned"] == 20
        assert store.instructions() == []

    def test_dry_run_touches_nothing(self, config):
        report = run_pipeline(config, dry_run=True)
        assert all(v == {"dry_run": True} for v in report.stages.values())
        assert not (Path(config.store_dir) / "images.jsonl").exists()


class TestIdempotencyAndResume:
    def test_rerun_creates_zero_records_and_zero_ledger_delta(self, config):
        run_pipeline(config)
        before = _log_digests(Path(config.store_dir))
        second = run_pipeline(config)
        after = _log_digests(Path(config.store_dir))
        assert second.ledger_delta == "0.00"
        assert second.counts_before == second.counts_after
        assert before == after

    def test_interrupt_and_resume_equals_uninterrupted(self, tmp_path):
        # interrupted: run the first three stages, then everything
        cfg_a = PipelineConfig(store_dir=str(tmp_path / "a"))
        run_pipeline(cfg_a, stage_range=["collect", "screen"])
        run_pipeline(cfg_a, stage_range=["caption", "seeds"])
        run_pipeline(cfg_a)
        # uninterrupted
        cfg_b = PipelineConfig(store_dir=str(tmp_path / "b"))
        run_pipeline(cfg_b)
        assert _log_digests(Path(cfg_a.store_dir)) == _log_digests(Path(cfg_b.store_dir))


class TestConvertIntegration:
    def test_convert_manifest_through_run(self, tmp_path):
        manifest = tmp_path / "geo.jsonl"
        rows = [
            {"item_id": f"g{i}", "question": f"Geometry question {i}?", "answer": str(i), "image": f"geo/{i}.png"}
            for i in range(4)
        ]
        manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        config = PipelineConfig(store_dir=str(tmp_path / "store"))
        config.convert_manifests = [{"path": str(manifest), "adapter": "geometry_qa", "source_name": "geo-mini"}]
        report = run_pipeline(config)
        assert report.stages["expand"]["converted"] == 4
        store = RecordStore(config.store_dir)
        converted = [r for r in store.instructions() if r.provenance is Provenance.CONVERTED]
        assert len(converted) == 4
        assert all(r.source_name == "geo-mini" for r in converted)


class TestConfig:
    def test_from_file_round_trip(self, tmp_path):
        doc = {
            "store": "relative-store",
            "mock": True,
            "domains": ["landmark", "ocr"],
            "qtypes": ["MC", "judgment"],
            "rng_seed": 7,
            "stages": ["collect", "screen", "caption"],
        }
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        cfg = PipelineConfig.from_file(path)
        assert cfg.store_dir == str(tmp_path / "relative-store")
        assert cfg.domains == [Domain.LANDMARK, Domain.OCR]
        assert cfg.qtypes == [QuestionType.MULTIPLE_CHOICE, QuestionType.JUDGMENT]
        assert cfg.rng_seed == 7
        assert cfg.stages == ["collect", "screen", "caption"]

    def test_unknown_stage_rejected(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps({"stages": ["collect", "deploy"]}), encoding="utf-8")
        with pytest.raises(ConfigError):
            PipelineConfig.from_file(path)

    def test_non_mock_requires_profiles(self, tmp_path):
        config = PipelineConfig(store_dir=str(tmp_path / "store"), mock=False)
        with pytest.raises(ConfigError):
            Pipeline(config)

    def test_malformed_config_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            PipelineConfig.from_file(path)


class TestDomainSubsets:
    def test_domain_restriction(self, tmp_path):
        config = PipelineConfig(
            store_dir=str(tmp_path / "store"),
            domains=[Domain.LANDMARK],
            qtypes=[QuestionType.MULTIPLE_CHOICE],
        )
        run_pipeline(config)
        store = RecordStore(config.store_dir)
        assert {i.domain for i in store.images()} == {Domain.LANDMARK}
        records = store.instructions()
        assert len(records) == 4 * 3  # 4 landmark fixtures, one MC call each
        assert {r.qtype for r in records} == {QuestionType.MULTIPLE_CHOICE}

    def test_multi_round_only_in_multi_round_domain(self, config):
        run_pipeline(config)
        store = RecordStore(config.store_dir)
        for record in store.instructions():
            if record.qtype is QuestionType.MULTI_ROUND:
                assert record.domain.conv_type is ConvType.MULTI_ROUND
                assert len(record.turns) == 5

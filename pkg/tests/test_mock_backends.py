from __future__ import annotations

import json

import pytest

from instructgen.domains import Domain, QuestionType
from instructgen.errors import BackendTimeout, FixtureMissing, MalformedOptions, ParseFailure
from instructgen.generator import Generator
from instructgen.identity import dedup_key, prompt_fingerprint
from instructgen.mock_backends import (
    DEMO_DOMAIN_PLAN,
    FaultInjector,
    FixtureLLM,
    MockOCR,
    MockSimilarityIndex,
    MockVLM,
    SyntheticLLM,
    demo_fixture_set,
    synthetic_caption,
    tiny_png,
    write_manifest_corpus,
)
from instructgen.records import ImageState

from conftest import add_caption, add_image, byte_digest_pairwise_distinct


class TestTinyPng:
    def test_valid_png_and_deterministic(self):
        a, b = tiny_png(1), tiny_png(1)
        assert a == b
        assert a.startswith(b"\x89PNG\r\n\x1a\n")
        assert a.endswith(b"IEND\xae\x42\x60\x82")

    def test_distinct_seeds_distinct_bytes(self):
        blobs = [tiny_png(i) for i in range(30)]
        assert byte_digest_pairwise_distinct(blobs)


class TestFixtureMocks:
    def test_vlm_table_hit_is_stable(self):
        vlm = MockVLM({"img1": "caption text"})
        assert vlm.describe_image("img1", b"", "p") == "caption text"
        assert vlm.describe_image("img1", b"", "p") == "caption text"

    def test_vlm_miss_raises(self):
        with pytest.raises(FixtureMissing):
            MockVLM({}).describe_image("img1", b"", "p")

    def test_vlm_fallback(self):
        vlm = MockVLM(fallback=synthetic_caption)
        text = vlm.describe_image("img1", b"", "p")
        assert text == synthetic_caption("img1")
        assert len(text.split()) >= 40

    def test_fixture_llm_keyed_by_fingerprint(self):
        prompt = "the exact prompt"
        llm = FixtureLLM({prompt_fingerprint(prompt): "the canned reply"})
        assert llm.complete(prompt) == "the canned reply"
        with pytest.raises(FixtureMissing):
            llm.complete("a drifted prompt")

    def test_ocr_defaults_to_empty(self):
        ocr = MockOCR({"a": "TEXT"})
        assert ocr.recognize("a", b"") == "TEXT"
        assert ocr.recognize("b", b"") == ""

    def test_index_miss_raises(self):
        with pytest.raises(FixtureMissing):
            MockSimilarityIndex({}).neighbors("anchor", 3)


class TestSyntheticLLM:
    def test_identical_prompts_identical_output(self):
        prompt = "you need to design 3 Judgment questions ... Image description: x"
        assert SyntheticLLM().complete(prompt) == SyntheticLLM().complete(prompt)

    def test_unrecognized_request_raises(self):
        with pytest.raises(FixtureMissing):
            SyntheticLLM().complete("tell me a story")

    def test_multi_round_shape(self):
        out = SyntheticLLM().complete('Create 5 Questions using English: x\nImage description: y')
        assert out.count("Question") == 5
        assert out.count("Answer") == 5


class TestFaultProfiles:
    def test_timeout_after_two_third_call_times_out(self):
        flaky = FaultInjector(SyntheticLLM(), timeout_after=2)
        prompt = "design 3 Judgment questions please. Image description: z"
        flaky.complete(prompt)
        flaky.complete(prompt)
        with pytest.raises(BackendTimeout):
            flaky.complete(prompt)

    def test_fail_first_profile(self):
        flaky = FaultInjector(SyntheticLLM(), fail_first=1)
        with pytest.raises(BackendTimeout):
            flaky.complete("design 3 Judgment questions. Image description: z")
        assert flaky.complete("design 3 Judgment questions. Image description: z")

    def test_malformed_mc_fixture_surfaces_malformed_options(self, store, ledger):
        image = add_image(store, Domain.LANDMARK, ImageState.CAPTIONED)
        caption = add_caption(store, image)

        class MalformedMC:
            backend_id = "bad-mc"

            def complete(self, prompt: str) -> str:
                # three options where four are required
                return (
                    "Question 1: Pick?\nOptions 1:\nA. a\nB. b\nC. c\nAnswer 1: A\n\n"
                    "Question 2: Pick?\nOptions 2:\nA. a\nB. b\nC. c\nAnswer 2: B\n\n"
                    "Question 3: Pick?\nOptions 3:\nA. a\nB. b\nC. c\nAnswer 3: C\n"
                )

        from instructgen.records import SeedKind, SeedQuestion

        seeds = [
            SeedQuestion(
                id=SeedQuestion.make_id(Domain.LANDMARK, f"s{i}?"),
                domain=Domain.LANDMARK, kind=SeedKind.GENERAL, template=f"s{i}?", validated=True,
            )
            for i in range(3)
        ]
        gen = Generator(store, MalformedMC(), ledger)
        with pytest.raises(MalformedOptions):
            gen.generate_instructions(caption, image, QuestionType.MULTIPLE_CHOICE, seeds=seeds)


class TestDemoCorpus:
    def test_twenty_images_across_six_domains(self):
        fx = demo_fixture_set()
        assert len(fx.images) == 20
        domains = {d for d, _ in fx.images}
        assert len(domains) == len(DEMO_DOMAIN_PLAN) == 6
        assert byte_digest_pairwise_distinct([img.data for _, img in fx.images])

    def test_ocr_fixtures_keyed_by_ingest_ids(self):
        fx = demo_fixture_set()
        ocr_images = [img for d, img in fx.images if d is Domain.OCR]
        assert len(fx.ocr.table) == len(ocr_images)
        from instructgen.records import ImageRecord, SourceChannel

        for img in ocr_images:
            image_id = ImageRecord.make_id(dedup_key(img.data), Domain.OCR, SourceChannel.WEB_CRAWL)
            assert fx.ocr.table[image_id]

    def test_fixture_set_is_reproducible(self):
        a, b = demo_fixture_set(), demo_fixture_set()
        assert [(d, img.uri, img.data) for d, img in a.images] == [
            (d, img.uri, img.data) for d, img in b.images
        ]

    def test_manifest_corpus_counts(self, tmp_path):
        manifest = write_manifest_corpus(tmp_path, total=50, duplicates=10)
        rows = [json.loads(l) for l in manifest.read_text().splitlines()]
        assert len(rows) == 50
        digests = [dedup_key((tmp_path / f"img_{i:03d}.png").read_bytes()) for i in range(50)]
        assert len(set(digests)) == 40

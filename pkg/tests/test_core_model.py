from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from instructgen.domains import ConvType, Domain, QuestionType, question_types_for
from instructgen.identity import content_id, dedup_key, record_id
from instructgen.records import (
    ImageRecord,
    ImageState,
    InstructionRecord,
    Provenance,
    QATurn,
    ReviewState,
    SourceChannel,
)
from instructgen.suffixes import DEFAULT_SUFFIX_TABLE
from instructgen.validation import validate_record

from conftest import add_image, make_mc_record


class TestDomainTaxonomy:
    def test_exactly_24_domains(self):
        assert len(Domain) == 24

    def test_partition_sizes(self):
        by_type = {}
        for d in Domain:
            by_type.setdefault(d.conv_type, []).append(d)
        assert len(by_type[ConvType.SINGLE_TURN_PERCEPTION]) == 15
        assert len(by_type[ConvType.SINGLE_TURN_REASONING]) == 8
        assert by_type[ConvType.MULTI_ROUND] == [Domain.MULTI_ROUND_LONG_VQA]

    def test_spot_row_assignments(self):
        assert Domain.OCR.conv_type is ConvType.SINGLE_TURN_PERCEPTION
        assert Domain.LANDMARK.conv_type is ConvType.SINGLE_TURN_PERCEPTION
        assert Domain.NUMERICAL_CALCULATION.conv_type is ConvType.SINGLE_TURN_REASONING
        assert Domain.WRITING.conv_type is ConvType.SINGLE_TURN_REASONING
        assert Domain.MEME_COMPREHENSION.conv_type is ConvType.SINGLE_TURN_REASONING

    def test_parse_accepts_display_forms(self):
        assert Domain.parse("image style") is Domain.IMAGE_STYLE
        assert Domain.parse("OCR") is Domain.OCR
        with pytest.raises(ValueError):
            Domain.parse("not a domain")

    def test_question_type_vocabulary(self):
        assert {q.value for q in QuestionType} == {
            "judgment", "multiple_choice", "long_vqa", "short_vqa", "multi_round",
        }
        assert QuestionType.JUDGMENT.abbrev == "TF"
        assert QuestionType.MULTIPLE_CHOICE.abbrev == "MC"

    def test_multi_round_type_only_for_multi_round_domain(self):
        for d in Domain:
            types = question_types_for(d)
            if d.conv_type is ConvType.MULTI_ROUND:
                assert types == (QuestionType.MULTI_ROUND,)
            else:
                assert QuestionType.MULTI_ROUND not in types


class TestIdentity:
    def test_same_content_same_id(self):
        a = record_id("instruction", image_id="i1", qtype="mc", question="What?")
        b = record_id("instruction", image_id="i1", qtype="mc", question="What?")
        assert a == b

    def test_one_character_changes_id(self):
        a = record_id("instruction", image_id="i1", qtype="mc", question="What?")
        b = record_id("instruction", image_id="i1", qtype="mc", question="What!")
        assert a != b

    def test_ids_are_fixed_length(self):
        assert len(content_id("x", {"a": 1})) == 32
        assert len(dedup_key(b"anything")) == 64

    def test_kind_namespacing(self):
        assert content_id("image", {"a": 1}) != content_id("caption", {"a": 1})


def _mc(**overrides) -> InstructionRecord:
    question = DEFAULT_SUFFIX_TABLE.append("Which fits?", QuestionType.MULTIPLE_CHOICE)
    base = dict(
        id="r1",
        image_id="img1",
        domain=Domain.LANDMARK,
        qtype=QuestionType.MULTIPLE_CHOICE,
        question=question,
        options=("a", "b", "c", "d"),
        correct_option=2,
        answer="c",
        provenance=Provenance.GENERATED,
    )
    base.update(overrides)
    return InstructionRecord(**base)


class TestValidateRecord:
    def test_valid_mc_record_has_zero_violations(self):
        assert validate_record(_mc()).ok

    def test_five_options_flags_option_count(self):
        report = validate_record(_mc(options=("a", "b", "c", "d", "e")))
        assert "option-count" in report.codes()

    def test_multi_round_with_four_turns_flags_turn_count(self):
        turns = tuple(QATurn(f"q{i}", f"a{i}") for i in range(4))
        record = InstructionRecord(
            id="r2",
            image_id="img1",
            domain=Domain.MULTI_ROUND_LONG_VQA,
            qtype=QuestionType.MULTI_ROUND,
            question="q0",
            turns=turns,
        )
        assert "turn-count" in validate_record(record).codes()

    def test_multi_round_with_answer_flagged(self):
        turns = tuple(QATurn(f"q{i}", f"a{i}") for i in range(5))
        record = InstructionRecord(
            id="r3",
            image_id="img1",
            domain=Domain.MULTI_ROUND_LONG_VQA,
            qtype=QuestionType.MULTI_ROUND,
            question="q0",
            turns=turns,
            answer="stray",
        )
        assert "answer-not-allowed" in validate_record(record).codes()

    def test_multi_round_qtype_outside_multi_round_domain(self):
        turns = tuple(QATurn(f"q{i}", f"a{i}") for i in range(5))
        record = InstructionRecord(
            id="r4", image_id="img1", domain=Domain.LANDMARK,
            qtype=QuestionType.MULTI_ROUND, question="q0", turns=turns,
        )
        assert "qtype-domain-mismatch" in validate_record(record).codes()

    def test_missing_suffix_flagged(self):
        report = validate_record(_mc(question="Which fits?"))
        assert "suffix-missing" in report.codes()

    def test_corrected_without_ancestor_flagged(self):
        report = validate_record(_mc(provenance=Provenance.CORRECTED))
        assert "ancestor-missing" in report.codes()

    def test_converted_needs_attribution(self):
        report = validate_record(
            _mc(provenance=Provenance.CONVERTED, image_id=None, source_path="x.png")
        )
        assert "attribution-missing" in report.codes()

    def test_judgment_answer_must_be_normalized(self):
        question = DEFAULT_SUFFIX_TABLE.append("Is it red?", QuestionType.JUDGMENT)
        record = InstructionRecord(
            id="r5", image_id="img1", domain=Domain.LANDMARK,
            qtype=QuestionType.JUDGMENT, question=question, answer="Yes.",
        )
        assert "judgment-answer" in validate_record(record).codes()

    def test_empty_question_flagged(self):
        assert "question-empty" in validate_record(_mc(question="  ")).codes()

    def test_duplicate_options_flagged(self):
        report = validate_record(_mc(options=("a", "a", "c", "d"), answer="c"))
        assert "options-duplicate" in report.codes()

    def test_report_is_deterministic(self):
        bad = _mc(options=("a", "b", "c", "d", "e"), question="Which fits?")
        assert validate_record(bad).codes() == validate_record(bad).codes()


# ------------------------------------------------------------- round trips

_TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40
)


@st.composite
def instruction_records(draw) -> InstructionRecord:
    domain = draw(st.sampled_from(list(Domain)))
    qtype = draw(st.sampled_from(list(QuestionType)))
    options: tuple[str, ...] = ()
    correct = None
    answer = None
    turns: tuple[QATurn, ...] = ()
    if qtype is QuestionType.MULTIPLE_CHOICE:
        options = tuple(draw(st.lists(_TEXT, min_size=4, max_size=4)))
        correct = draw(st.integers(min_value=0, max_value=3))
        answer = options[correct]
    elif qtype is QuestionType.MULTI_ROUND:
        turns = tuple(QATurn(draw(_TEXT), draw(_TEXT)) for _ in range(5))
    else:
        answer = draw(_TEXT)
    question = draw(_TEXT)
    return InstructionRecord(
        id=record_id("instruction", q=question, d=domain.value, t=qtype.value),
        image_id=draw(st.one_of(st.none(), _TEXT)),
        domain=domain,
        qtype=qtype,
        question=question,
        options=options,
        correct_option=correct,
        answer=answer,
        turns=turns,
        provenance=draw(st.sampled_from(list(Provenance))),
        review_state=draw(st.sampled_from(list(ReviewState))),
    )


class TestRoundTrip:
    @given(instruction_records())
    def test_instruction_record_round_trip(self, record: InstructionRecord):
        parsed = InstructionRecord.from_dict(json.loads(json.dumps(record.to_dict())))
        assert parsed == record

    @given(instruction_records())
    def test_domain_closure(self, record: InstructionRecord):
        assert record.domain in Domain

    def test_unknown_fields_preserved_on_rewrite(self):
        d = _mc().to_dict()
        d["annotator_note"] = "keep me"
        parsed = InstructionRecord.from_dict(d)
        assert parsed.to_dict()["annotator_note"] == "keep me"

    def test_image_record_round_trip(self, store):
        image = add_image(store, Domain.OCR, ImageState.CAPTIONED, ocr_text="STOP")
        parsed = ImageRecord.from_dict(json.loads(json.dumps(image.to_dict())))
        assert parsed == image

    def test_image_state_flow(self, store):
        image = add_image(store, state=ImageState.COLLECTED)
        with pytest.raises(Exception):
            store.transition_image(image.id, ImageState.CAPTIONED)  # skips screened
        store.transition_image(image.id, ImageState.SCREENED)
        store.transition_image(image.id, ImageState.CAPTIONED)
        final = store.transition_image(image.id, ImageState.REJECTED)
        assert final.state is ImageState.REJECTED

    def test_referential_integrity_scan(self, store):
        from conftest import add_caption

        image = add_image(store, Domain.LANDMARK, ImageState.CAPTIONED)
        add_caption(store, image)
        record = make_mc_record(store, image)
        resolved = store.get_image(record.image_id)
        assert resolved.id == image.id
        assert store.captions_for_image(image.id)

    def test_source_channels(self):
        assert {c.value for c in SourceChannel} == {
            "web_crawl", "similarity_expansion", "open_source",
        }

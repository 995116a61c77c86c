from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from instructgen.costing import (
    DEFAULT_PRICES,
    Money,
    PriceTable,
    CostLedger,
    estimate,
    ledger_total,
)


class TestMoney:
    def test_parse_round_trip(self):
        for text in ("0.00885", "0.0004", "0.13", "0.84", "128304.05", "817320.00"):
            money = Money.parse(text)
            assert Money.parse(money.to_json()) == money

    def test_text_formats(self):
        assert Money.parse("0.00885").text() == "0.00885"
        assert Money.parse("128304.05").text() == "128,304.05"
        assert Money.parse("817320").text() == "817,320.00"
        assert Money.parse("0").text() == "0.00"
        assert Money.parse("0.1304").text() == "0.1304"
        assert Money(-12_345).text() == "-0.12345"

    def test_parse_rejects_excess_precision(self):
        with pytest.raises(ValueError):
            Money.parse("0.000001")

    def test_grouping_can_be_disabled(self):
        assert Money.parse("128304.05").text(grouped=False) == "128304.05"

    @given(st.integers(min_value=0, max_value=10**12), st.integers(min_value=0, max_value=10**12))
    def test_addition_is_exact(self, a, b):
        assert (Money(a) + Money(b)).subunits == a + b


class TestEstimate:
    def test_engine_mode_full_corpus(self):
        # 161000*0.00885 + 973000*(0.0004+0.13) = 1424.85 + 126879.20
        assert estimate(161_000, 973_000, "engine").text() == "128,304.05"

    def test_manual_mode_full_corpus(self):
        # 973000 * 0.84; image count does not enter
        assert estimate(0, 973_000, "manual").text() == "817,320.00"
        assert estimate(161_000, 973_000, "manual").text() == "817,320.00"

    def test_zero_counts(self):
        assert estimate(0, 0, "engine").text() == "0.00"

    def test_engine_is_one_sixth_of_manual(self):
        engine = estimate(161_000, 973_000, "engine").subunits
        manual = estimate(0, 973_000, "manual").subunits
        assert 6 * engine == pytest.approx(manual, rel=0.07)

    def test_rejects_negative_counts(self):
        with pytest.raises(ValueError):
            estimate(-1, 0, "engine")

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            estimate(1, 1, "typo")

    @given(
        st.integers(min_value=0, max_value=10**6),
        st.integers(min_value=0, max_value=10**6),
        st.integers(min_value=0, max_value=10**6),
        st.integers(min_value=0, max_value=10**6),
    )
    def test_linearity_componentwise(self, i1, n1, i2, n2):
        mode = "engine"
        combined = estimate(i1 + i2, n1 + n2, mode)
        assert combined == estimate(i1, n1, mode) + estimate(i2, n2, mode)


class TestLedger:
    def test_per_unit_values(self, tmp_path):
        led = CostLedger(tmp_path / "ledger.json")
        led.add_captions(1)
        assert ledger_total(led).text() == "0.00885"

    def test_instruction_plus_correction(self, tmp_path):
        # hand-checked: 0.0004 + 0.13 = 0.1304
        led = CostLedger(tmp_path / "ledger.json")
        led.add_instructions(1)
        led.add_corrections(1)
        assert ledger_total(led).text() == "0.1304"

    def test_empty_ledger(self, tmp_path):
        assert ledger_total(CostLedger(tmp_path / "ledger.json")).text() == "0.00"

    def test_counters_are_monotone(self, tmp_path):
        led = CostLedger(tmp_path / "ledger.json")
        with pytest.raises(ValueError):
            led.add_captions(-1)

    def test_persistence_round_trip(self, tmp_path):
        path = tmp_path / "ledger.json"
        led = CostLedger(path)
        led.add_captions(3)
        led.add_instructions(7)
        reloaded = CostLedger(path)
        assert reloaded.counts() == {"caption_count": 3, "instruction_count": 7, "correction_count": 0}
        assert reloaded.total() == led.total()

    def test_total_matches_engine_estimate_shape(self, tmp_path):
        led = CostLedger(tmp_path / "ledger.json")
        led.add_captions(20)
        led.add_instructions(218)
        expected = led.price.caption_unit.scaled(20) + led.price.gen_instruction_unit.scaled(218)
        assert led.total() == expected

    def test_breakdown_sums_to_total(self, tmp_path):
        led = CostLedger(tmp_path / "ledger.json")
        led.add_captions(5)
        led.add_instructions(11)
        led.add_corrections(2)
        parts = led.breakdown()
        assert parts["captions"] + parts["instructions"] + parts["corrections"] == led.total()


class TestPriceTable:
    def test_defaults_match_published_unit_prices(self):
        table = PriceTable()
        assert table.caption_unit.to_json() == "0.00885"
        assert table.gen_instruction_unit.to_json() == "0.0004"
        assert table.manual_correction_unit.to_json() == "0.13"
        assert table.manual_construction_unit.to_json() == "0.84"

    def test_rejects_negative_price(self):
        with pytest.raises(ValueError):
            PriceTable(caption_unit=Money(-1))

    def test_dict_round_trip(self):
        table = PriceTable.from_dict({"caption_unit": "0.01"})
        assert table.caption_unit == Money.parse("0.01")
        assert table.manual_correction_unit.to_json() == DEFAULT_PRICES["manual_correction_unit"]
        assert PriceTable.from_dict(table.to_dict()) == table

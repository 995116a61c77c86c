"""Exact-decimal cost accounting.

Money is an integer count of 1/100,000 USD so that the per-caption price
(0.00885 USD) is representable exactly; no binary floating point is used
anywhere in this module. Totals are therefore bit-for-bit reproducible.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

SCALE = 100_000  # subunits per USD
_FRAC_DIGITS = 5


@dataclass(frozen=True, order=True)
class Money:
    subunits: int

    @classmethod
    def parse(cls, text: str) -> "Money":
        text = text.strip().replace(",", "").removeprefix("$")
        sign = -1 if text.startswith("-") else 1
        if text.startswith(("-", "+")):
            text = text[1:]
        whole, _, frac = text.partition(".")
        if len(frac) > _FRAC_DIGITS:
            raise ValueError(f"more than {_FRAC_DIGITS} decimal places: {text!r}")
        frac = frac.ljust(_FRAC_DIGITS, "0")
        if not (whole or frac).strip():
            raise ValueError(f"not a money amount: {text!r}")
        return cls(sign * (int(whole or "0") * SCALE + int(frac or "0")))

    def __add__(self, other: "Money") -> "Money":
        return Money(self.subunits + other.subunits)

    def __sub__(self, other: "Money") -> "Money":
        return Money(self.subunits - other.subunits)

    def scaled(self, count: int) -> "Money":
        return Money(self.subunits * count)

    def __str__(self) -> str:
        return self.text()

    def text(self, grouped: bool = True) -> str:
        """Decimal rendering: at least cents, trailing sub-cent zeros dropped."""
        sign = "-" if self.subunits < 0 else ""
        units, frac = divmod(abs(self.subunits), SCALE)
        frac_s = f"{frac:0{_FRAC_DIGITS}d}"
        frac_s = frac_s[:2] + frac_s[2:].rstrip("0")
        units_s = f"{units:,}" if grouped else str(units)
        return f"{sign}{units_s}.{frac_s}"

    def to_json(self) -> str:
        return self.text(grouped=False)


ZERO = Money(0)

DEFAULT_PRICES = {
    "caption_unit": "0.00885",
    "gen_instruction_unit": "0.0004",
    "manual_correction_unit": "0.13",
    "manual_construction_unit": "0.84",
}


@dataclass(frozen=True)
class PriceTable:
    caption_unit: Money = Money.parse(DEFAULT_PRICES["caption_unit"])
    gen_instruction_unit: Money = Money.parse(DEFAULT_PRICES["gen_instruction_unit"])
    manual_correction_unit: Money = Money.parse(DEFAULT_PRICES["manual_correction_unit"])
    manual_construction_unit: Money = Money.parse(DEFAULT_PRICES["manual_construction_unit"])

    def __post_init__(self) -> None:
        for name in DEFAULT_PRICES:
            if getattr(self, name).subunits < 0:
                raise ValueError(f"negative price: {name}")

    def to_dict(self) -> dict[str, str]:
        return {name: getattr(self, name).to_json() for name in DEFAULT_PRICES}

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "PriceTable":
        merged = {**DEFAULT_PRICES, **d}
        return cls(**{name: Money.parse(merged[name]) for name in DEFAULT_PRICES})


def estimate(images: int, instructions: int, mode: str, price: PriceTable | None = None) -> Money:
    """Projected build cost.

    engine: every image is captioned once, every instruction is generated
    and then manually corrected. manual: every instruction is written by
    hand; image count does not enter (no per-image price exists there).
    """
    if images < 0 or instructions < 0:
        raise ValueError("counts must be non-negative")
    price = price or PriceTable()
    if mode == "engine":
        per_instruction = price.gen_instruction_unit + price.manual_correction_unit
        return price.caption_unit.scaled(images) + per_instruction.scaled(instructions)
    if mode == "manual":
        return price.manual_construction_unit.scaled(instructions)
    raise ValueError(f"unknown mode {mode!r} (expected engine or manual)")


class CostLedger:
    """Monotone counters of billable work, persisted as a JSON snapshot."""

    def __init__(self, path: str | Path, price: PriceTable | None = None):
        self.path = Path(path)
        self.price = price or PriceTable()
        self.caption_count = 0
        self.instruction_count = 0
        self.correction_count = 0
        self._lock = threading.Lock()
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        d = json.loads(self.path.read_text(encoding="utf-8"))
        self.caption_count = int(d.get("caption_count", 0))
        self.instruction_count = int(d.get("instruction_count", 0))
        self.correction_count = int(d.get("correction_count", 0))
        if "price" in d:
            self.price = PriceTable.from_dict(d["price"])

    def _save(self) -> None:
        doc = {
            "caption_count": self.caption_count,
            "instruction_count": self.instruction_count,
            "correction_count": self.correction_count,
            "price": self.price.to_dict(),
        }
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.path)

    def _bump(self, attr: str, n: int) -> None:
        if n < 0:
            raise ValueError("counters are monotone; negative increments not allowed")
        with self._lock:
            setattr(self, attr, getattr(self, attr) + n)
            self._save()

    def add_captions(self, n: int = 1) -> None:
        self._bump("caption_count", n)

    def add_instructions(self, n: int = 1) -> None:
        self._bump("instruction_count", n)

    def add_corrections(self, n: int = 1) -> None:
        self._bump("correction_count", n)

    def counts(self) -> dict[str, int]:
        with self._lock:
            return {
                "caption_count": self.caption_count,
                "instruction_count": self.instruction_count,
                "correction_count": self.correction_count,
            }

    def breakdown(self) -> dict[str, Money]:
        c = self.counts()
        return {
            "captions": self.price.caption_unit.scaled(c["caption_count"]),
            "instructions": self.price.gen_instruction_unit.scaled(c["instruction_count"]),
            "corrections": self.price.manual_correction_unit.scaled(c["correction_count"]),
        }

    def total(self) -> Money:
        parts = self.breakdown()
        return parts["captions"] + parts["instructions"] + parts["corrections"]


def ledger_total(ledger: CostLedger) -> Money:
    return ledger.total()

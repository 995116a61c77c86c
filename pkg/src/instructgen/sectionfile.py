"""Parser for the named-section text files used by prompt templates.

Format: ``[name]`` headers introduce sections; ``#`` lines are comments;
section bodies keep their internal line breaks, trimmed at both ends.
"""
from __future__ import annotations


def parse_sections(text: str) -> dict[str, str]:
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            current = sections.setdefault(name, [])
            continue
        if current is not None:
            current.append(line.rstrip())
    return {name: "\n".join(lines).strip("\n") for name, lines in sections.items()}

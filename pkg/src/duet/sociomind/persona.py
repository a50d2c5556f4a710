"""Persona instructions rendered from personality-inventory items."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from duet.embedding import HashingEmbedder, TextEmbedding, cosine_matrix
from duet.errors import EmptyInstructionDb, MalformedRow

PERSONA_TEMPLATE = "A person with {extend} {trait} tends to behave/think: {behavior}"
FIELDS = ("instrument", "alpha", "key", "text", "label")


@dataclass(frozen=True)
class PersonaInstruction:
    id: int
    trait_dimension: str
    extend: str
    behavior: str
    instrument: str = ""
    alpha: float | None = None
    embedding: TextEmbedding | None = None

    @property
    def rendered(self) -> str:
        return PERSONA_TEMPLATE.format(extend=self.extend, trait=self.trait_dimension, behavior=self.behavior)


class PersonaDB:
    def __init__(self, instructions: list[PersonaInstruction], embedder):
        self.instructions = instructions
        self.embedder = embedder
        self.matrix = (
            np.stack([i.embedding.values for i in instructions]) if instructions else np.zeros((0, embedder.dim))
        )

    def __len__(self) -> int:
        return len(self.instructions)


def _parse_key(raw) -> int:
    s = str(raw).strip()
    try:
        key = int(float(s))
    except ValueError:
        raise MalformedRow(f"key must be +1 or -1, got {raw!r}") from None
    if key not in (1, -1) or float(s) != key:
        raise MalformedRow(f"key must be +1 or -1, got {raw!r}")
    return key


def load_persona_db(rows: Iterable, embedder=None) -> PersonaDB:
    """Rows are mappings or sequences in ``(instrument, alpha, key, text, label)`` order."""
    embedder = embedder or HashingEmbedder()
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            row = list(row)
            if len(row) != len(FIELDS):
                raise MalformedRow(f"row {i}: expected {len(FIELDS)} fields")
            row = dict(zip(FIELDS, row))
        missing = [f for f in ("key", "text", "label") if not str(row.get(f, "")).strip()]
        if missing:
            raise MalformedRow(f"row {i}: missing {missing}")
        key = _parse_key(row["key"])
        alpha = row.get("alpha")
        try:
            alpha = None if alpha in (None, "") else float(alpha)
        except ValueError:
            raise MalformedRow(f"row {i}: alpha is not numeric") from None
        extend = "high" if key == 1 else "low"
        trait, behavior = str(row["label"]).strip(), str(row["text"]).strip()
        rendered = PERSONA_TEMPLATE.format(extend=extend, trait=trait, behavior=behavior)
        out.append(PersonaInstruction(i, trait, extend, behavior, str(row.get("instrument", "")), alpha, embedder.embed(rendered)))
    return PersonaDB(out, embedder)


def load_persona_csv(path=None, embedder=None) -> PersonaDB:
    """Read a CSV with the inventory columns; the bundled sample when ``path`` is None."""
    if path is None:
        text = resources.files("duet.data").joinpath("persona_sample.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return load_persona_db(csv.DictReader(text.splitlines()), embedder)


def retrieve_persona_instructions(db: PersonaDB, context_text: str, psych_state=None, n: int = 3) -> list[PersonaInstruction]:
    """Top-``n`` instructions by cosine to the context plus the rendered state."""
    if len(db) == 0:
        raise EmptyInstructionDb("persona instruction database is empty")
    query = context_text if psych_state is None else context_text + "\n" + psych_state.render()
    scores = cosine_matrix(db.embedder.embed(query), db.matrix)
    order = np.lexsort((np.arange(len(db)), -scores))[: max(n, 0)]
    return [db.instructions[i] for i in order]

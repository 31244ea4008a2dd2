"""Review-corpus ingestion: time/season splits, subsampling, tokenization.

Input is JSON-lines with fields text/date/label (label optional). The
splitters produce the two drifted halves; subsample carves the small
drifted set out of the second half.
"""

from __future__ import annotations

import datetime
import json
import re
from dataclasses import dataclass

import numpy as np

from .corpus_synth import Corpus
from .errors import DataFormatError

SUMMER_MONTHS = {6, 7, 8}
WINTER_MONTHS = {12, 1, 2}

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass
class ReviewRecord:
    text: str
    date: datetime.date
    label: object = None

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text:
            raise DataFormatError("review text must be a non-empty string")
        if not isinstance(self.date, datetime.date):
            raise DataFormatError("review date must be a date")


def parse_record(obj: dict) -> ReviewRecord:
    if not isinstance(obj, dict) or "text" not in obj or "date" not in obj:
        raise DataFormatError("review record needs text and date fields")
    try:
        date = datetime.date.fromisoformat(str(obj["date"])[:10])
    except ValueError as exc:
        raise DataFormatError(f"unparseable review date {obj['date']!r}") from exc
    return ReviewRecord(obj["text"], date, obj.get("label"))


def load_reviews(path) -> list:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                records.append(parse_record(obj))
            except DataFormatError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    return records


def split_by_time(records, boundary: datetime.date):
    """(strictly before boundary, on or after boundary); order preserved."""
    if not records:
        raise DataFormatError("cannot split an empty record list")
    d1 = [r for r in records if r.date < boundary]
    d2 = [r for r in records if r.date >= boundary]
    if not d1 or not d2:
        raise DataFormatError(
            f"time split at {boundary.isoformat()} left one side empty "
            f"({len(d1)} before, {len(d2)} after)"
        )
    return d1, d2


def split_by_season(records):
    """(summer = months 6-8, winter = months 12,1,2); other months dropped."""
    if not records:
        raise DataFormatError("cannot split an empty record list")
    summer = [r for r in records if r.date.month in SUMMER_MONTHS]
    winter = [r for r in records if r.date.month in WINTER_MONTHS]
    if not summer or not winter:
        raise DataFormatError(
            f"season split left one side empty ({len(summer)} summer, {len(winter)} winter)"
        )
    return summer, winter


def subsample(records, pct: float, seed: int):
    """pct fraction of records without replacement, deterministic by seed.

    Selection is a prefix of one seeded shuffle, so smaller percentages at
    the same seed are nested inside larger ones; output keeps the input's
    relative order.
    """
    if not 0.0 <= pct <= 1.0:
        raise DataFormatError(f"pct must be in [0,1], got {pct}")
    n_keep = round(pct * len(records))
    order = np.random.default_rng(seed).permutation(len(records))
    picked = sorted(order[:n_keep].tolist())
    return [records[i] for i in picked]


def tokenize(records) -> Corpus:
    """Lowercase, split on non-alphanumeric runs, one review per line.
    Reviews with no tokens are skipped."""
    lines = []
    for r in records:
        toks = _TOKEN_RE.findall(r.text.lower())
        if toks:
            lines.append(toks)
    return Corpus.from_lines(lines)

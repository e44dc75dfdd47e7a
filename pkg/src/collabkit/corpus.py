"""Work records and co-production count tables.

A work's nationality is the set of countries of its contributors'
institutions; works whose contributors expose no institution country are
counted as unknown. Tables can equally be keyed by institution.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import EmptySlice

COUNTRY_KEY = "country"
INSTITUTION_KEY = "institution"
VALID_KEYS = (COUNTRY_KEY, INSTITUTION_KEY)

_JOURNAL_TYPES = ("journal-article", "article")


@dataclass(frozen=True)
class WorkRecord:
    """One published work reduced to what the counting pipeline needs."""

    work_id: str
    year: int
    discipline_id: str
    nationalities: frozenset[str]
    institutions: frozenset[str]
    is_journal_article: bool


@dataclass(frozen=True)
class Period:
    """Inclusive year range with a display label."""

    label: str
    year_from: int
    year_to: int

    def __post_init__(self) -> None:
        if self.year_from > self.year_to:
            raise ValueError(f"period {self.label!r}: empty year range")

    def contains(self, year: int) -> bool:
        return self.year_from <= year <= self.year_to

    def years(self) -> range:
        return range(self.year_from, self.year_to + 1)


def overlapping_periods(periods: Sequence[Period]) -> list[tuple[Period, Period]]:
    """All pairs of periods whose year ranges intersect."""
    clashes = []
    for a, b in combinations(periods, 2):
        if a.year_from <= b.year_to and b.year_from <= a.year_to:
            clashes.append((a, b))
    return clashes


def _ror_tail(value: str) -> str:
    """Normalize a ROR id to its bare form (drop the https://ror.org/ prefix)."""
    return value.rsplit("/", 1)[-1]


def nationality_of(raw: Mapping) -> frozenset[str]:
    """Union of institution country codes across all contributors.

    The same country appearing through several contributors or institutions
    counts once. An empty result means the nationality is unknown.
    """
    countries: set[str] = set()
    for authorship in raw.get("authorships") or ():
        for inst in authorship.get("institutions") or ():
            code = inst.get("country_code")
            if code:
                countries.add(str(code).upper())
    return frozenset(countries)


def institutions_of(raw: Mapping) -> frozenset[str]:
    """Union of bare ROR ids across all contributors."""
    rors: set[str] = set()
    for authorship in raw.get("authorships") or ():
        for inst in authorship.get("institutions") or ():
            ror = inst.get("ror")
            if ror:
                rors.add(_ror_tail(str(ror)))
    return frozenset(rors)


def work_from_metadata(raw: Mapping, discipline_id: str) -> WorkRecord:
    """Build a WorkRecord from one raw works-endpoint item."""
    work_id = raw.get("id")
    if not work_id:
        raise ValueError("work item has no id")
    year = raw.get("publication_year")
    if not isinstance(year, int):
        raise ValueError(f"work {work_id}: missing publication year")
    wtype = (raw.get("type") or "").lower()
    return WorkRecord(
        work_id=str(work_id),
        year=year,
        discipline_id=discipline_id,
        nationalities=nationality_of(raw),
        institutions=institutions_of(raw),
        is_journal_article=wtype in _JOURNAL_TYPES,
    )


@dataclass(frozen=True)
class CountTable:
    """Production and co-production counts for one discipline/period slice.

    ``unary`` maps each entity to the number of works it appears in,
    ``pairwise`` maps each unordered pair (keys sorted ascending) to the
    number of works both appear in, and ``multi`` maps each entity to the
    number of its works involving at least one other entity. A work with
    an empty key set contributes only to ``unknown_count``. Completed
    tables are immutable and safe to share.
    """

    discipline_id: str
    period: Period
    key: str
    unary: dict[str, int] = field(default_factory=dict)
    pairwise: dict[tuple[str, str], int] = field(default_factory=dict)
    multi: dict[str, int] = field(default_factory=dict)
    unknown_count: int = 0
    total_count: int = 0

    def __post_init__(self) -> None:
        if self.key not in VALID_KEYS:
            raise ValueError(f"unknown aggregation key {self.key!r}")

    def pair_count(self, a: str, b: str) -> int:
        if a == b:
            return self.unary.get(a, 0)
        lo, hi = sorted((a, b))
        return self.pairwise.get((lo, hi), 0)


def build_count_table(
    records: Iterable[WorkRecord],
    discipline_id: str,
    period: Period,
    key: str = COUNTRY_KEY,
) -> CountTable:
    """Count works falling inside the discipline/period slice.

    Every work in the slice raises an entity's unary count at most once;
    pairwise counts cover each unordered entity pair present on the work.
    """
    if key not in VALID_KEYS:
        raise ValueError(f"unknown aggregation key {key!r}")
    unary: Counter[str] = Counter()
    pairwise: Counter[tuple[str, str]] = Counter()
    multi: Counter[str] = Counter()
    unknown = 0
    total = 0
    for rec in records:
        if rec.discipline_id != discipline_id or not period.contains(rec.year):
            continue
        total += 1
        entities = sorted(
            rec.nationalities if key == COUNTRY_KEY else rec.institutions
        )
        if not entities:
            unknown += 1
            continue
        for e in entities:
            unary[e] += 1
        if len(entities) >= 2:
            for e in entities:
                multi[e] += 1
            for a, b in combinations(entities, 2):
                pairwise[(a, b)] += 1
    return CountTable(
        discipline_id=discipline_id,
        period=period,
        key=key,
        unary=dict(unary),
        pairwise=dict(pairwise),
        multi=dict(multi),
        unknown_count=unknown,
        total_count=total,
    )


def merge_tables(a: CountTable, b: CountTable) -> CountTable:
    """Pointwise sum of two shards of the same slice."""
    if (a.discipline_id, a.period, a.key) != (b.discipline_id, b.period, b.key):
        raise ValueError("tables describe different slices")
    unary = Counter(a.unary)
    unary.update(b.unary)
    pairwise = Counter(a.pairwise)
    pairwise.update(b.pairwise)
    multi = Counter(a.multi)
    multi.update(b.multi)
    return CountTable(
        discipline_id=a.discipline_id,
        period=a.period,
        key=a.key,
        unary=dict(unary),
        pairwise=dict(pairwise),
        multi=dict(multi),
        unknown_count=a.unknown_count + b.unknown_count,
        total_count=a.total_count + b.total_count,
    )


def top_entities(table: CountTable, n: int) -> list[str]:
    """The n entities with the highest unary counts, ties broken by name."""
    ranked = sorted(table.unary.items(), key=lambda kv: (-kv[1], kv[0]))
    return [name for name, _ in ranked[:n]]


def unknown_rate(table: CountTable) -> float:
    """Fraction of works in the slice with an empty key set."""
    if table.total_count == 0:
        raise EmptySlice(
            f"{table.discipline_id} {table.period.label}: no works in slice"
        )
    return table.unknown_count / table.total_count


def table_to_json(table: CountTable) -> str:
    doc = {
        "schema": 1,
        "discipline": table.discipline_id,
        "period": {
            "label": table.period.label,
            "year_from": table.period.year_from,
            "year_to": table.period.year_to,
        },
        "key": table.key,
        "unary": dict(sorted(table.unary.items())),
        "pairwise": [
            [a, b, c] for (a, b), c in sorted(table.pairwise.items())
        ],
        "multi": dict(sorted(table.multi.items())),
        "unknown_count": table.unknown_count,
        "total_count": table.total_count,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def table_from_json(text: str) -> CountTable:
    doc = json.loads(text)
    period = Period(
        label=doc["period"]["label"],
        year_from=doc["period"]["year_from"],
        year_to=doc["period"]["year_to"],
    )
    return CountTable(
        discipline_id=doc["discipline"],
        period=period,
        key=doc["key"],
        unary={str(k): int(v) for k, v in doc["unary"].items()},
        pairwise={(a, b): int(c) for a, b, c in doc["pairwise"]},
        multi={str(k): int(v) for k, v in doc["multi"].items()},
        unknown_count=int(doc["unknown_count"]),
        total_count=int(doc["total_count"]),
    )


def unary_to_csv(table: CountTable) -> str:
    lines = ["entity,count"]
    for name, count in sorted(table.unary.items()):
        lines.append(f"{name},{count}")
    return "\n".join(lines) + "\n"


def pairwise_to_csv(table: CountTable) -> str:
    lines = ["entity_a,entity_b,count"]
    for (a, b), count in sorted(table.pairwise.items()):
        lines.append(f"{a},{b},{count}")
    return "\n".join(lines) + "\n"

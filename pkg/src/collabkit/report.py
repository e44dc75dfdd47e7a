"""Plot-ready artifacts: chord flow data, circular dendrogram SVGs, and
bit-stable CSV/JSON series exports.

Styling is deliberately minimal; these files feed external plotting, so
data fidelity and byte-for-byte determinism are the contract.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import CountTable, Period, top_entities
from .geometry import ClusterCut, Dendrogram
from .metrics import IcdSeries, KdeCurve, YearSeries

_FMT = "%.6g"
_COORD = "%.6f"

# Fixed cluster palette, cycled by 1-based cluster label.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
    "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173",
    "#5254a3", "#8ca252", "#bd9e39", "#ad494a", "#a55194",
)
TRUNK_COLOR = "#555555"
BAR_COLOR = "#b8b8b8"

# Label used for the aggregate arc of co-production with entities outside
# the displayed top-N selection.
OTHER_LABEL = "__other__"


def _fmt(value: float) -> str:
    return _FMT % value


@dataclass(frozen=True)
class ChordData:
    """Flow matrix behind one chord diagram.

    ``flows`` maps unordered displayed pairs (keys sorted ascending) to
    joint work counts. ``solo`` counts each entity's works carrying no
    other entity at all, and ``other`` sums its co-counts with entities
    outside the displayed selection. Flows overlap for works spanning
    three or more entities, so these segments need not add up to n_X.
    """

    period: Period
    entities: tuple[str, ...]
    flows: dict[tuple[str, str], int]
    solo: dict[str, int]
    other: dict[str, int]


def chord_data(table: CountTable, n: int) -> ChordData:
    """Restrict a count table to its top-N entities for chord plotting."""
    if n < 2:
        raise ValueError("chord data needs at least 2 displayed entities")
    displayed = top_entities(table, n)
    shown = set(displayed)
    flows: dict[tuple[str, str], int] = {}
    other: dict[str, int] = {e: 0 for e in displayed}
    for (a, b), count in table.pairwise.items():
        if a in shown and b in shown:
            flows[(a, b)] = count
        elif a in shown:
            other[a] += count
        elif b in shown:
            other[b] += count
    solo = {
        e: table.unary.get(e, 0) - table.multi.get(e, 0) for e in displayed
    }
    return ChordData(
        period=table.period,
        entities=tuple(displayed),
        flows=flows,
        solo=solo,
        other=other,
    )


def chord_to_csv(chord: ChordData) -> str:
    """Chord rows as source,target,value.

    A self-pair row carries the solo count; a row targeting __other__
    carries co-production with non-displayed entities.
    """
    rows: list[tuple[str, str, int]] = []
    for (a, b), count in chord.flows.items():
        rows.append((a, b, count))
    for entity in chord.entities:
        rows.append((entity, entity, chord.solo[entity]))
        if chord.other[entity]:
            rows.append((entity, OTHER_LABEL, chord.other[entity]))
    lines = ["source,target,value"]
    for a, b, count in sorted(rows):
        lines.append(f"{a},{b},{count}")
    return "\n".join(lines) + "\n"


def render_circular_dendrogram(
    dendrogram: Dendrogram,
    cut: ClusterCut,
    volumes: Mapping[str, int],
) -> str:
    """Standalone SVG: radial tree, cluster-colored leaves and branches,
    and an outer bar ring scaled to per-leaf volumes.

    Leaves sit at uniform angles on a circle; a merge's radius shrinks
    linearly as its height grows, so earlier couplings sit closer to the
    rim. Branches whose leaves share a cluster take that cluster's color;
    links above the cut stay a neutral trunk color.
    """
    entities = dendrogram.entities
    missing = [e for e in entities if e not in volumes]
    if missing:
        raise ValueError(f"volumes missing for leaves: {missing}")
    n = dendrogram.n_leaves
    size = 640.0
    center = size / 2.0
    r_leaf = 200.0
    r_label = 212.0
    r_bar = 252.0
    bar_len_max = 56.0
    r_root = 40.0

    heights = dendrogram.heights
    h_top = max(max(heights), 1e-12)

    def radius(height: float) -> float:
        return r_leaf - (r_leaf - r_root) * (height / h_top)

    angle_of: dict[int, float] = {}
    for position, leaf in enumerate(dendrogram.leaf_order()):
        angle_of[leaf] = 2.0 * math.pi * position / n - math.pi / 2.0
    radius_of: dict[int, float] = {i: r_leaf for i in range(n)}
    for k, m in enumerate(dendrogram.merges):
        angle_of[n + k] = (angle_of[m.left] + angle_of[m.right]) / 2.0
        radius_of[n + k] = radius(m.height)

    def point(node: int, r: float | None = None) -> tuple[float, float]:
        rr = radius_of[node] if r is None else r
        a = angle_of[node]
        return center + rr * math.cos(a), center + rr * math.sin(a)

    leaves_of = dendrogram.subtree_leaves()
    labels = [cut.assignment[e] for e in entities]

    def node_color(node: int) -> str:
        members = {labels[i] for i in leaves_of[node]}
        if len(members) == 1:
            return PALETTE[(next(iter(members)) - 1) % len(PALETTE)]
        return TRUNK_COLOR

    svg = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": "%d" % int(size),
            "height": "%d" % int(size),
            "viewBox": "0 0 %d %d" % (int(size), int(size)),
        },
    )
    ET.SubElement(
        svg,
        "rect",
        {"x": "0", "y": "0", "width": "%d" % int(size), "height": "%d" % int(size), "fill": "#ffffff"},
    )

    links = ET.SubElement(svg, "g", {"class": "links", "fill": "none"})
    for k, m in enumerate(dendrogram.merges):
        node = n + k
        r = radius_of[node]
        color = node_color(node)
        a1, a2 = sorted((angle_of[m.left], angle_of[m.right]))
        x1, y1 = center + r * math.cos(a1), center + r * math.sin(a1)
        x2, y2 = center + r * math.cos(a2), center + r * math.sin(a2)
        large = "1" if (a2 - a1) > math.pi else "0"
        arc = (
            f"M {_COORD % x1} {_COORD % y1} "
            f"A {_COORD % r} {_COORD % r} 0 {large} 1 {_COORD % x2} {_COORD % y2}"
        )
        ET.SubElement(links, "path", {"d": arc, "stroke": color, "stroke-width": "1.4"})
        for child in (m.left, m.right):
            cx, cy = point(child)
            px, py = point(child, r)
            ET.SubElement(
                links,
                "path",
                {
                    "d": f"M {_COORD % cx} {_COORD % cy} L {_COORD % px} {_COORD % py}",
                    "stroke": node_color(child),
                    "stroke-width": "1.4",
                },
            )

    vol_max = max((volumes[e] for e in entities), default=0)
    bar_width = max(1.0, min(12.0, 2.0 * math.pi * r_bar / n * 0.5))
    bars = ET.SubElement(svg, "g", {"class": "bars"})
    for leaf, entity in enumerate(entities):
        if vol_max <= 0:
            continue
        length = bar_len_max * volumes[entity] / vol_max
        x1, y1 = point(leaf, r_bar)
        x2, y2 = point(leaf, r_bar + length)
        ET.SubElement(
            bars,
            "path",
            {
                "d": f"M {_COORD % x1} {_COORD % y1} L {_COORD % x2} {_COORD % y2}",
                "stroke": BAR_COLOR,
                "stroke-width": _COORD % bar_width,
                "class": "bar",
                "data-entity": entity,
                "data-volume": str(volumes[entity]),
            },
        )

    leaves_group = ET.SubElement(svg, "g", {"class": "leaves"})
    for leaf, entity in enumerate(entities):
        x, y = point(leaf)
        color = PALETTE[(labels[leaf] - 1) % len(PALETTE)]
        ET.SubElement(
            leaves_group,
            "circle",
            {
                "class": "leaf",
                "cx": _COORD % x,
                "cy": _COORD % y,
                "r": "3.5",
                "fill": color,
                "data-entity": entity,
                "data-cluster": str(labels[leaf]),
            },
        )
        deg = math.degrees(angle_of[leaf])
        flip = 90.0 < deg % 360.0 < 270.0
        tx, ty = point(leaf, r_label)
        transform = f"rotate({_COORD % (deg + (180.0 if flip else 0.0))} {_COORD % tx} {_COORD % ty})"
        ET.SubElement(
            leaves_group,
            "text",
            {
                "class": "leaf-label",
                "x": _COORD % tx,
                "y": _COORD % ty,
                "font-family": "sans-serif",
                "font-size": "10",
                "dominant-baseline": "middle",
                "text-anchor": "end" if flip else "start",
                "transform": transform,
            },
        ).text = entity

    body = ET.tostring(svg, encoding="unicode")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n"


def _series_rows(series: YearSeries) -> Iterable[tuple[str, str, str, int, float | None, int, bool]]:
    for p in series.points:
        yield (
            series.discipline_id,
            series.entity,
            series.entity_b or "",
            p.year,
            None if p.masked else p.value,
            p.volume,
            p.masked,
        )


def series_to_csv(collection: Sequence[YearSeries]) -> str:
    """CSV rows discipline,entity,year,value,volume,masked.

    Pair series add an entity_b column after entity; the column appears
    only when the collection holds at least one pair series. Masked
    points keep their volume but emit an empty value field.
    """
    if not collection:
        raise ValueError("nothing to export")
    has_pair = any(series.entity_b for series in collection)
    columns = ["discipline", "entity"]
    if has_pair:
        columns.append("entity_b")
    columns += ["year", "value", "volume", "masked"]
    lines = [",".join(columns)]
    for series in collection:
        for disc, ent, ent_b, year, value, volume, masked in _series_rows(series):
            val = "" if value is None else _fmt(value)
            fields = [disc, ent]
            if has_pair:
                fields.append(ent_b)
            fields += [str(year), val, str(volume), str(masked).lower()]
            lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def series_to_json(collection: Sequence[YearSeries]) -> str:
    """JSON mirror of the CSV schema; masked values become null."""
    if not collection:
        raise ValueError("nothing to export")
    has_pair = any(series.entity_b for series in collection)
    rows = []
    for series in collection:
        for disc, ent, ent_b, year, value, volume, masked in _series_rows(series):
            row = {
                "discipline": disc,
                "entity": ent,
                "year": year,
                "value": None if value is None else float(_fmt(value)),
                "volume": volume,
                "masked": masked,
            }
            if has_pair:
                row["entity_b"] = ent_b or None
            rows.append(row)
    return json.dumps(rows, indent=2, sort_keys=True) + "\n"


def icd_series_to_csv(collection: Sequence[IcdSeries]) -> str:
    """Trend rows discipline,period,h0,mean,median, one per period."""
    if not collection:
        raise ValueError("nothing to export")
    lines = ["discipline,period,h0,mean,median"]
    for item in collection:
        lines.append(
            ",".join(
                [
                    item.discipline_id,
                    item.period.label,
                    _fmt(item.result.h0),
                    _fmt(item.result.mean),
                    _fmt(item.result.median),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def icd_series_to_json(collection: Sequence[IcdSeries]) -> str:
    if not collection:
        raise ValueError("nothing to export")
    rows = [
        {
            "discipline": item.discipline_id,
            "period": item.period.label,
            "h0": float(_fmt(item.result.h0)),
            "mean": float(_fmt(item.result.mean)),
            "median": float(_fmt(item.result.median)),
        }
        for item in collection
    ]
    return json.dumps(rows, indent=2, sort_keys=True) + "\n"


def export_series(collection: Sequence, fmt: str = "csv") -> str:
    """Export a YearSeries or IcdSeries collection as CSV or JSON text."""
    items = list(collection)
    if not items:
        raise ValueError("nothing to export")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    if isinstance(items[0], IcdSeries):
        return icd_series_to_csv(items) if fmt == "csv" else icd_series_to_json(items)
    return series_to_csv(items) if fmt == "csv" else series_to_json(items)


def icd_detail_to_csv(item: IcdSeries) -> str:
    """Per-merge rescaled heights: discipline,period,h0,merge_index,rescaled."""
    lines = ["discipline,period,h0,merge_index,rescaled"]
    for k, value in enumerate(item.result.rescaled):
        lines.append(
            ",".join(
                [
                    item.discipline_id,
                    item.period.label,
                    _fmt(item.result.h0),
                    str(k),
                    _fmt(value),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def kde_to_csv(discipline_id: str, period: Period, curve: KdeCurve) -> str:
    lines = ["discipline,period,x,density"]
    for x, d in zip(curve.x, curve.density):
        lines.append(f"{discipline_id},{period.label},{_fmt(x)},{_fmt(d)}")
    return "\n".join(lines) + "\n"


def parse_series_csv(text: str) -> list[dict]:
    """Inverse of series_to_csv, for round-trip checks and downstream use."""
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row = dict(zip(header, parts))
        rows.append(
            {
                "discipline": row["discipline"],
                "entity": row["entity"],
                "entity_b": row.get("entity_b") or None,
                "year": int(row["year"]),
                "value": float(row["value"]) if row["value"] else None,
                "volume": int(row["volume"]),
                "masked": row["masked"] == "true",
            }
        )
    return rows

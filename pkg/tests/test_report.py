"""Presentation layer: chord tables, circular dendrogram SVG, and the
CSV/JSON export formats."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET

import pytest

from collabkit.corpus import Period, build_count_table
from collabkit.geometry import (
    IcdResult,
    cut_clusters,
    distance_matrix,
    euclidean_embedding,
    ward_cluster,
)
from collabkit.metrics import IcdSeries, SeriesPoint, YearSeries, kde
from collabkit.report import (
    OTHER_LABEL,
    PALETTE,
    ChordData,
    chord_data,
    chord_to_csv,
    export_series,
    icd_detail_to_csv,
    icd_series_to_csv,
    icd_series_to_json,
    kde_to_csv,
    parse_series_csv,
    render_circular_dendrogram,
    series_to_csv,
    series_to_json,
)
from tests.util import records_from_sets, table_from_sets

PERIOD = Period("2000", 2000, 2000)


def _svg_root(svg: str) -> ET.Element:
    return ET.fromstring(svg.split("?>", 1)[1])


def _tags(root, suffix):
    return [el for el in root.iter() if el.tag.split("}")[-1] == suffix]


class TestChordData:
    def test_two_entity_flow(self):
        table = table_from_sets([{"US", "CN"}] * 5 + [{"US"}] * 3)
        chord = chord_data(table, 2)
        assert chord.entities == ("US", "CN")  # count order: US 8, CN 5
        assert chord.flows == {("CN", "US"): 5}
        assert chord.solo == {"US": 3, "CN": 0}
        assert chord.other == {"US": 0, "CN": 0}

    def test_three_work_example(self):
        table = table_from_sets([{"US"}, {"CN", "US"}, set()])
        chord = chord_data(table, 2)
        assert chord.flows == {("CN", "US"): 1}
        assert chord.solo == {"US": 1, "CN": 0}

    def test_other_arc(self):
        # US co-produces with CN (kept) and once with BR (dropped at n=2)
        table = table_from_sets([{"US", "CN"}] * 3 + [{"US", "BR"}] + [{"CN"}])
        chord = chord_data(table, 2)
        assert chord.entities == ("CN", "US")  # tie at 4, lexicographic
        assert chord.other == {"US": 1, "CN": 0}

    def test_n_larger_than_entity_count(self):
        table = table_from_sets([{"US", "CN"}])
        chord = chord_data(table, 10)
        assert chord.entities == ("CN", "US")  # tie on count, lexicographic

    def test_n_below_two(self):
        table = table_from_sets([{"US", "CN"}])
        with pytest.raises(ValueError):
            chord_data(table, 1)

    def test_csv_frozen(self):
        chord = ChordData(
            period=PERIOD,
            entities=("US", "CN"),
            flows={("CN", "US"): 5},
            solo={"US": 3, "CN": 0},
            other={"US": 1, "CN": 0},
        )
        # rows sort lexicographically; zero __other__ rows are omitted
        expected = (
            "source,target,value\n"
            "CN,CN,0\n"
            "CN,US,5\n"
            "US,US,3\n"
            "US,__other__,1\n"
        )
        assert chord_to_csv(chord) == expected

    def test_flow_conservation(self):
        table = table_from_sets(
            [{"US", "CN"}] * 4 + [{"US", "JP"}] * 2 + [{"CN", "JP"}] + [{"US"}] * 3
        )
        chord = chord_data(table, 3)
        for ent in chord.entities:
            crossing = sum(
                v for (a, b), v in chord.flows.items() if ent in (a, b)
            )
            total = chord.solo[ent] + crossing + chord.other[ent]
            assert total <= table.unary[ent]


def _clustered(sets, h_star=1.005):
    table = table_from_sets(sets)
    entities = sorted(table.unary)
    dm = distance_matrix(table, entities)
    dend = ward_cluster(dm)
    cut = cut_clusters(dend, h_star)
    volumes = {e: table.unary[e] for e in entities}
    return dend, cut, volumes


class TestDendrogramSvg:
    def test_two_leaves(self):
        dend, cut, volumes = _clustered([{"US", "CN"}] * 2 + [{"US"}] * 3)
        svg = render_circular_dendrogram(dend, cut, volumes)
        root = _svg_root(svg)
        assert root.get("width") == "640" and root.get("height") == "640"
        texts = _tags(root, "text")
        assert sorted(t.text for t in texts) == ["CN", "US"]
        circles = [c for c in _tags(root, "circle") if c.get("class") == "leaf"]
        assert len(circles) == 2
        assert all(c.get("data-entity") in ("US", "CN") for c in circles)

    def test_leaf_angles_uniform(self):
        sets = []
        pool = [f"Z{i:02d}" for i in range(30)]
        for i, a in enumerate(pool):
            sets.extend([{a}] * (i + 1))
            sets.append({a, pool[(i + 1) % 30]})
        dend, cut, volumes = _clustered(sets)
        svg = render_circular_dendrogram(dend, cut, volumes)
        root = _svg_root(svg)
        circles = [c for c in _tags(root, "circle") if c.get("class") == "leaf"]
        assert len(circles) == 30
        angles = sorted(
            math.atan2(float(c.get("cy")) - 320.0, float(c.get("cx")) - 320.0)
            for c in circles
        )
        gaps = [angles[i + 1] - angles[i] for i in range(len(angles) - 1)]
        gaps.append(2 * math.pi + angles[0] - angles[-1])
        for gap in gaps:
            assert gap == pytest.approx(2 * math.pi / 30, abs=1e-6)
        for c in circles:
            r = math.hypot(float(c.get("cx")) - 320.0, float(c.get("cy")) - 320.0)
            assert r == pytest.approx(200.0, abs=1e-4)

    def test_cluster_color_count_matches_cut(self):
        dend, cut, volumes = _clustered(
            [{"US", "CA"}] * 8 + [{"DE", "FR"}] * 8 + [{"US"}, {"CA"}, {"DE"}, {"FR"}]
        )
        svg = render_circular_dendrogram(dend, cut, volumes)
        root = _svg_root(svg)
        circles = [c for c in _tags(root, "circle") if c.get("class") == "leaf"]
        fills = {c.get("fill") for c in circles}
        assert len(fills) == cut.n_clusters
        assert fills <= set(PALETTE)
        for c in circles:
            label = cut.assignment[c.get("data-entity")]
            assert c.get("data-cluster") == str(label)
            assert c.get("fill") == PALETTE[(label - 1) % len(PALETTE)]

    def test_volume_bars_present(self):
        dend, cut, volumes = _clustered([{"US", "CN"}] * 2 + [{"US"}] * 6)
        svg = render_circular_dendrogram(dend, cut, volumes)
        root = _svg_root(svg)
        bars = [el for el in _tags(root, "path") if el.get("class") == "bar"]
        assert {b.get("data-entity") for b in bars} == {"US", "CN"}
        vols = {b.get("data-entity"): b.get("data-volume") for b in bars}
        assert vols == {"US": "8", "CN": "2"}

    def test_missing_volume_rejected(self):
        dend, cut, volumes = _clustered([{"US", "CN"}] * 2 + [{"US"}] * 3)
        volumes.pop("CN")
        with pytest.raises(ValueError, match="volume"):
            render_circular_dendrogram(dend, cut, volumes)

    def test_radius_decreases_with_height(self):
        dend, cut, volumes = _clustered(
            [{"US", "CA"}] * 8 + [{"DE", "FR"}] * 8 + [{"US"}, {"CA"}, {"DE"}, {"FR"}]
        )
        svg = render_circular_dendrogram(dend, cut, volumes)
        root = _svg_root(svg)
        paths = _tags(root, "path")
        assert paths  # at least the merge links exist
        # root node sits strictly inside the leaf ring
        h_max = max(m.height for m in dend.merges)
        assert h_max > 0

    def test_deterministic_bytes(self):
        dend, cut, volumes = _clustered([{"US", "CN"}] * 2 + [{"US"}] * 3)
        a = render_circular_dendrogram(dend, cut, volumes)
        b = render_circular_dendrogram(dend, cut, volumes)
        assert a == b


SERIES = YearSeries(
    discipline_id="C1",
    entity="US",
    points=(
        SeriesPoint(year=1990, value=0.25, volume=120),
        SeriesPoint(year=1991, value=None, volume=30, masked=True, reason="below_min_volume"),
    ),
)

BILATERAL = YearSeries(
    discipline_id="C1",
    entity="US",
    entity_b="CN",
    points=(SeriesPoint(year=1990, value=1.6094379124341003, volume=25),),
)


class TestSeriesExports:
    def test_csv_frozen(self):
        expected = (
            "discipline,entity,year,value,volume,masked\n"
            "C1,US,1990,0.25,120,false\n"
            "C1,US,1991,,30,true\n"
        )
        assert series_to_csv([SERIES]) == expected

    def test_bilateral_csv_has_entity_b(self):
        expected = (
            "discipline,entity,entity_b,year,value,volume,masked\n"
            "C1,US,CN,1990,1.60944,25,false\n"
        )
        assert series_to_csv([BILATERAL]) == expected

    def test_mixed_collections_use_pair_header(self):
        text = series_to_csv([SERIES, BILATERAL])
        lines = text.strip().split("\n")
        assert lines[0] == "discipline,entity,entity_b,year,value,volume,masked"
        assert lines[1] == "C1,US,,1990,0.25,120,false"  # unary rows blank the column

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            series_to_csv([])
        with pytest.raises(ValueError):
            series_to_json([])

    def test_json_masked_value_null(self):
        import json

        rows = json.loads(series_to_json([SERIES]))
        assert rows[0]["value"] == 0.25
        assert "entity_b" not in rows[0]
        assert rows[1]["value"] is None
        assert rows[1]["masked"] is True
        pair_rows = json.loads(series_to_json([BILATERAL]))
        assert pair_rows[0]["entity_b"] == "CN"

    def test_round_trip_via_parser(self):
        parsed = parse_series_csv(series_to_csv([SERIES]))
        assert parsed == [
            {
                "discipline": "C1",
                "entity": "US",
                "entity_b": None,
                "year": 1990,
                "value": 0.25,
                "volume": 120,
                "masked": False,
            },
            {
                "discipline": "C1",
                "entity": "US",
                "entity_b": None,
                "year": 1991,
                "value": None,
                "volume": 30,
                "masked": True,
            },
        ]
        parsed_b = parse_series_csv(series_to_csv([BILATERAL]))
        assert parsed_b[0]["entity_b"] == "CN"
        assert parsed_b[0]["value"] == pytest.approx(1.60944)

    def test_byte_determinism(self):
        assert series_to_csv([SERIES]) == series_to_csv([SERIES])
        assert series_to_json([BILATERAL]) == series_to_json([BILATERAL])


def _icd_series(labels):
    out = []
    for i, label in enumerate(labels):
        start = 1971 + 5 * i
        result = IcdResult(
            h0=1.1, rescaled=(2.0 + i, 2.5 + i), mean=2.25 + i, median=2.25 + i
        )
        out.append(
            IcdSeries(
                discipline_id="C1",
                period=Period(label, start, start + 4),
                result=result,
            )
        )
    return out


class TestIcdExports:
    def test_csv_frozen(self):
        rows = icd_series_to_csv(_icd_series(["1971-1975", "1976-1980"]))
        expected = (
            "discipline,period,h0,mean,median\n"
            "C1,1971-1975,1.1,2.25,2.25\n"
            "C1,1976-1980,1.1,3.25,3.25\n"
        )
        assert rows == expected

    def test_ten_period_labels(self):
        labels = [f"{y}-{y + 4}" for y in range(1971, 2020, 5)]
        csv_text = icd_series_to_csv(_icd_series(labels))
        lines = csv_text.strip().split("\n")[1:]
        assert [ln.split(",")[1] for ln in lines] == labels
        assert len(lines) == 10

    def test_json(self):
        import json

        rows = json.loads(icd_series_to_json(_icd_series(["1971-1975"])))
        assert rows[0]["period"] == "1971-1975"
        assert rows[0]["mean"] == 2.25
        assert rows[0]["h0"] == 1.1

    def test_detail_csv(self):
        text = icd_detail_to_csv(_icd_series(["1971-1975"])[0])
        assert text == (
            "discipline,period,h0,merge_index,rescaled\n"
            "C1,1971-1975,1.1,0,2\n"
            "C1,1971-1975,1.1,1,2.5\n"
        )

    def test_export_series_dispatch(self):
        assert export_series([SERIES], "csv").startswith("discipline,entity,year")
        assert export_series(_icd_series(["1971-1975"]), "csv").startswith(
            "discipline,period,h0"
        )
        assert export_series([SERIES], "json").startswith("[")
        with pytest.raises(ValueError):
            export_series([SERIES], "xml")
        with pytest.raises(ValueError):
            export_series([], "csv")


class TestKdeExport:
    def test_kde_csv_shape(self):
        curve = kde([2.0, 2.1, 2.5, 3.0, 3.2])
        text = kde_to_csv("C1", PERIOD, curve)
        lines = text.strip().split("\n")
        assert lines[0] == "discipline,period,x,density"
        assert len(lines) == 1 + len(curve.x)
        first = lines[1].split(",")
        assert first[0] == "C1" and first[1] == "2000"
        assert float(first[3]) >= 0.0

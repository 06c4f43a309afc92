"""End-to-end pipeline behaviour on a hand-built scenario, plus reports."""

from __future__ import annotations

import dataclasses
import json
import os

import pytest

from cardcohort.cohort import CHANGED, NOT_CHANGED
from cardcohort.geo import OUTWARD, Region, haversine_km
from cardcohort.pipeline import (
    MissingInputError,
    RunConfig,
    aggregate_taz,
    process_year,
    run_pipeline,
)
from cardcohort.reports import write_run_reports

from conftest import MINI_ORIGIN, offset_coord

EXPECTED_HEADERS = {
    "profiles_year1.csv": "card_id,year,home_place,work_place,commute_km,commute_min,rides",
    "profiles_year2.csv": "card_id,year,home_place,work_place,commute_km,commute_min,rides",
    "rejections_year1.csv": "line_no,reason",
    "rejections_year2.csv": "line_no,reason",
    "rejections_stops1.csv": "line_no,reason",
    "rejections_stops2.csv": "line_no,reason",
    "unmatched_year1.csv": "stop_id,count",
    "unmatched_year2.csv": "stop_id,count",
    "summary.csv": "indicator,year1,year2,both",
    "deltas.csv": (
        "card_id,housing_status,housing_dir,move_km,move_bin,"
        "work_status,work_dir,work_move_km,commute_delta_km,commute_bin,r4_2010"
    ),
    "housing_dynamics.csv": "status,direction,bin,count,share_pct",
    "work_dynamics.csv": "status,direction,bin,count,share_pct",
    "commute_variation.csv": "bin,count,share_pct",
    "groups.csv": "group,housing_change,job_change,location,count,share_pct",
    "deprivation.csv": "metric,value",
    "scores.csv": "card_id,group,followup_trips,scored",
    "rejections_followup.csv": "line_no,reason",
}


def read_rows(path: str) -> list[list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n").split(",") for line in fh]


def as_written(coord: tuple[float, float]) -> tuple[float, float]:
    """A coordinate pair as it survives the 7-decimal registry format."""
    return float(f"{coord[0]:.7f}"), float(f"{coord[1]:.7f}")


class TestRunConfigValidate:
    def _cfg(self, **kwargs):
        base = dict(year1="x", year2="x", stops1="x", stops2="x")
        base.update(kwargs)
        return RunConfig(**base)

    def test_missing_files_reported(self, tmp_path):
        real = tmp_path / "real.csv"
        real.write_text("card\n")
        cfg = self._cfg(year1=str(real), year2=str(tmp_path / "gone.csv"))
        with pytest.raises(MissingInputError) as err:
            cfg.validate()
        assert "gone.csv" in str(err.value)

    @pytest.mark.parametrize(
        "kwargs", [{"stay_min": 0}, {"cluster_m": -5.0}, {"change_km": -1.0}, {"threads": 0}]
    )
    def test_bad_thresholds_rejected(self, kwargs):
        with pytest.raises(ValueError):
            self._cfg(**kwargs).validate()


class TestProcessYear:
    def test_year_one_profiles(self, mini_config, mini_bundle):
        year = process_year(mini_config.year1, mini_config.stops1, mini_config, None)
        assert year.week.start_date.isoformat() == "2008-04-07"
        assert len(year.places) == 3
        assert year.parsed == 30
        assert year.kept == 30
        assert sorted(year.profiles) == ["A1", "F1", "S1"]

        a1 = year.profiles["A1"]
        assert (a1.home, a1.work) == (0, 1)
        assert a1.commute_min == 40
        assert a1.rides == 10
        # The registry file carries 7-decimal coordinates, so expected
        # values must start from the rounded form too.
        coords = {k: as_written(v) for k, v in mini_bundle["coords"].items()}
        home_centroid = (
            (coords["HA"][0] + coords["HB"][0]) / 2,
            (coords["HA"][1] + coords["HB"][1]) / 2,
        )
        assert a1.commute_km == pytest.approx(haversine_km(home_centroid, coords["WA"]), abs=1e-9)

        s1 = year.profiles["S1"]
        assert (s1.home, s1.work) == (None, None)
        assert s1.rides == 10

        f1 = year.profiles["F1"]
        assert (f1.home, f1.work) == (0, 1)
        assert f1.commute_min is None
        assert f1.commute_km == pytest.approx(a1.commute_km, abs=1e-12)

    def test_strict_mode_drops_fixed_fare_cards(self, mini_config):
        cfg = dataclasses.replace(mini_config, stay_mode="strict")
        year = process_year(cfg.year1, cfg.stops1, cfg, None)
        assert year.profiles["A1"].home == 0
        assert year.profiles["F1"].home is None
        assert year.profiles["F1"].work is None

    def test_thread_count_does_not_change_profiles(self, mini_config):
        serial = process_year(mini_config.year1, mini_config.stops1, mini_config, None)
        threaded_cfg = dataclasses.replace(mini_config, threads=4)
        threaded = process_year(threaded_cfg.year1, threaded_cfg.stops1, threaded_cfg, None)
        assert serial.profiles == threaded.profiles


@pytest.fixture(scope="module")
def result(mini_bundle):
    cfg = RunConfig(
        year1=mini_bundle["year1"],
        year2=mini_bundle["year2"],
        stops1=mini_bundle["stops"],
        stops2=mini_bundle["stops"],
        followup=mini_bundle["followup"],
        r4=mini_bundle["r4"],
        taz=mini_bundle["taz"],
        center=mini_bundle["center"],
    )
    return run_pipeline(cfg)


class TestMiniPipeline:
    def test_frequent_riders(self, result):
        assert result.fr_cards == ["A1", "F1"]

    def test_mover_delta(self, result, mini_bundle):
        d = result.deltas["A1"]
        assert d.housing_status == CHANGED
        assert d.housing_dir == OUTWARD
        assert d.move_bin == "10-20"
        coords = {k: as_written(v) for k, v in mini_bundle["coords"].items()}
        home1 = (
            (coords["HA"][0] + coords["HB"][0]) / 2,
            (coords["HA"][1] + coords["HB"][1]) / 2,
        )
        assert d.move_km == pytest.approx(haversine_km(home1, coords["XA"]), abs=1e-9)
        assert d.work_status == NOT_CHANGED
        assert d.commute_bin == "0-2"
        assert d.r4_2010 is False

    def test_settled_delta(self, result):
        d = result.deltas["F1"]
        assert d.housing_status == NOT_CHANGED
        assert d.housing_dir is None
        assert d.move_bin is None
        assert d.work_status == NOT_CHANGED
        assert d.commute_delta_km == pytest.approx(0.0, abs=1e-12)
        assert d.commute_bin == "0-2"
        assert d.r4_2010 is True

    def test_group_assignments(self, result):
        assert result.assignments["A1"].group == 9
        assert result.assignments["F1"].group == 20

    def test_deprivation(self, result):
        summary = result.dep_summary
        assert summary.fr_count == 2
        assert summary.scored_count == 1
        assert summary.scored_fraction == 0.5
        assert summary.mean_trips == 3.0
        assert summary.std_trips == 0.0
        by_card = {s.card_id: s for s in result.scores}
        assert by_card["A1"].followup_trips == 0 and not by_card["A1"].scored
        assert by_card["F1"].followup_trips == 3 and by_card["F1"].scored

    def test_taz_assignment(self, result):
        assert [r.name for r in result.taz_regions] == ["near", "far"]
        assert result.taz_counts == [1, 1]
        assert result.taz_outside == 0
        assert result.taz_overlap is False

    def test_report_bundle(self, result, tmp_path_factory):
        out = str(tmp_path_factory.mktemp("reports"))
        written = write_run_reports(result, out)
        assert sorted(written) == sorted(
            list(EXPECTED_HEADERS) + ["taz_fr_homes.geojson"]
        )
        for name, header in EXPECTED_HEADERS.items():
            rows = read_rows(os.path.join(out, name))
            assert ",".join(rows[0][: len(header.split(","))]) == header, name
        for name in written:
            with open(os.path.join(out, name), "rb") as fh:
                blob = fh.read()
            assert b"\r" not in blob, name
            assert blob.endswith(b"\n"), name

    def test_deltas_csv_rows(self, result, tmp_path):
        out = str(tmp_path)
        write_run_reports(result, out)
        rows = read_rows(os.path.join(out, "deltas.csv"))
        assert [r[0] for r in rows[1:]] == ["A1", "F1"]
        a1 = rows[1]
        assert a1[1] == CHANGED
        assert a1[2] == OUTWARD
        assert a1[4] == "10-20"
        assert a1[10] == "0"
        f1 = rows[2]
        assert f1[1] == NOT_CHANGED
        assert f1[2] == ""
        assert f1[10] == "1"

    def test_groups_csv_has_all_twenty_rows(self, result, tmp_path):
        write_run_reports(result, str(tmp_path))
        rows = read_rows(os.path.join(tmp_path, "groups.csv"))
        assert len(rows) == 21
        assert [r[0] for r in rows[1:]] == [str(g) for g in range(1, 21)]
        counts = {int(r[0]): int(r[4]) for r in rows[1:]}
        assert counts[9] == 1
        assert counts[20] == 1
        assert sum(counts.values()) == 2

    def test_housing_dynamics_sums(self, result, tmp_path):
        write_run_reports(result, str(tmp_path))
        rows = read_rows(os.path.join(tmp_path, "housing_dynamics.csv"))[1:]
        by_key = {(r[0], r[1], r[2]): int(r[3]) for r in rows}
        assert by_key[(NOT_CHANGED, "", "")] == 1
        assert by_key[(CHANGED, "", "")] == 1
        assert by_key[(CHANGED, OUTWARD, "")] == 1
        assert by_key[(CHANGED, OUTWARD, "10-20")] == 1
        assert by_key[("Sum", "", "")] == 2
        shares = {(r[0], r[1], r[2]): r[4] for r in rows}
        assert shares[(NOT_CHANGED, "", "")] == "50.0"
        assert shares[("Sum", "", "")] == "100.0"

    def test_summary_counts(self, result, tmp_path):
        write_run_reports(result, str(tmp_path))
        rows = read_rows(os.path.join(tmp_path, "summary.csv"))
        table = {r[0]: r[1:] for r in rows[1:]}
        assert table["total_cardholders"] == ["3", "3", "3"]
        assert table["with_home_place"] == ["2", "2", "2"]
        assert table["with_work_place"] == ["2", "2", "2"]
        assert table["with_commute_distance"] == ["2", "2", "2"]
        assert table["with_commute_time"] == ["1", "1", "1"]
        assert float(table["avg_commute_min"][0]) == 40.0

    def test_scores_csv(self, result, tmp_path):
        write_run_reports(result, str(tmp_path))
        rows = read_rows(os.path.join(tmp_path, "scores.csv"))
        assert rows[1] == ["A1", "9", "0", "0"]
        assert rows[2] == ["F1", "20", "3", "1"]

    def test_taz_geojson_injection(self, result, tmp_path):
        write_run_reports(result, str(tmp_path))
        with open(os.path.join(tmp_path, "taz_fr_homes.geojson"), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        assert doc["outside_count"] == 0
        homes = [f["properties"]["fr_homes"] for f in doc["features"]]
        names = [f["properties"]["name"] for f in doc["features"]]
        assert names == ["near", "far"]
        assert homes == [1, 1]


class TestAggregateTaz:
    SQ1 = Region("one", (((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0), (0.0, 0.0)),))
    SQ2 = Region("two", (((5.0, 0.0), (7.0, 0.0), (7.0, 2.0), (5.0, 2.0), (5.0, 0.0)),))
    SQ_OVERLAP = Region("three", (((1.0, 0.0), (3.0, 0.0), (3.0, 2.0), (1.0, 2.0), (1.0, 0.0)),))

    def test_disjoint_assignment(self):
        counts, outside, overlap = aggregate_taz(
            [(1.0, 1.0), (6.0, 1.0), (9.0, 9.0)], [self.SQ1, self.SQ2]
        )
        assert counts == [1, 1]
        assert outside == 1
        assert overlap is False

    def test_overlap_goes_to_first_region_and_is_flagged(self):
        counts, outside, overlap = aggregate_taz([(1.5, 1.0)], [self.SQ1, self.SQ_OVERLAP])
        assert counts == [1, 0]
        assert outside == 0
        assert overlap is True

    def test_empty_inputs(self):
        assert aggregate_taz([], [self.SQ1]) == ([0], 0, False)
        assert aggregate_taz([(1.0, 1.0)], []) == ([], 1, False)


@pytest.fixture(scope="module")
def empty_result(tmp_path_factory):
    d = tmp_path_factory.mktemp("empty")
    header = "card_id,card_type,fare_type,route_id,board_stop,board_time,alight_stop,alight_time"
    for name in ("year1.csv", "year2.csv", "followup.csv"):
        (d / name).write_text(header + "\n")
    (d / "stops.csv").write_text("stop_id,lon,lat\nS1,116.30,39.90\n")
    cfg = RunConfig(
        year1=str(d / "year1.csv"),
        year2=str(d / "year2.csv"),
        stops1=str(d / "stops.csv"),
        stops2=str(d / "stops.csv"),
        followup=str(d / "followup.csv"),
    )
    return run_pipeline(cfg)


class TestEmptyInputs:
    def test_no_riders_no_cohort(self, empty_result):
        assert empty_result.fr_cards == []
        assert empty_result.deltas == {}
        assert empty_result.assignments == {}
        assert empty_result.dep_summary.fr_count == 0
        assert empty_result.dep_summary.mean_trips is None

    def test_reports_still_written(self, empty_result, tmp_path):
        written = write_run_reports(empty_result, str(tmp_path))
        assert "summary.csv" in written
        rows = read_rows(os.path.join(tmp_path, "groups.csv"))
        assert len(rows) == 21
        assert all(r[4] == "0" for r in rows[1:])

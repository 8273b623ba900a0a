import datetime as dt

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redispatch import market_data, synth
from redispatch.errors import (
    BoundaryError,
    CompletenessError,
    DuplicateRowError,
    GapError,
    ParseError,
)


def write_csvs(tmp_path, dataset):
    zonal = tmp_path / "zonal.csv"
    national = tmp_path / "national.csv"
    holidays = tmp_path / "holidays.txt"
    market_data.write_dataset(dataset, zonal, national, holidays)
    return zonal, national, holidays


@pytest.fixture()
def day_dataset():
    cfg = synth.GeneratorConfig(
        start=dt.date(2019, 6, 3), end=dt.date(2019, 6, 3), seed=1, lockdown=None
    )
    dataset, _ = synth.generate(cfg)
    return dataset


class TestZones:
    def test_seven_zones(self):
        assert len(market_data.ZONES) == 7

    def test_rossano_is_not_a_demand_zone(self):
        flags = {z.name: z.demand_zone for z in market_data.ZONES}
        assert flags["Rossano"] is False
        assert sum(flags.values()) == 6


class TestInterpolateGaps:
    def test_equal_spacing(self):
        filled, n = market_data.interpolate_gaps([10.0, np.nan, np.nan, 40.0], max_gap=6)
        assert filled.tolist() == [10.0, 20.0, 30.0, 40.0]
        assert n == 2

    def test_identity_when_complete(self):
        filled, n = market_data.interpolate_gaps([1.0, 2.0, 3.0], max_gap=6)
        assert filled.tolist() == [1.0, 2.0, 3.0]
        assert n == 0

    def test_midpoint(self):
        filled, _ = market_data.interpolate_gaps([0.0, np.nan, 1.0], max_gap=6)
        assert filled.tolist() == [0.0, 0.5, 1.0]

    def test_gap_longer_than_max_aborts(self):
        series = [1.0, np.nan, np.nan, np.nan, 5.0]
        with pytest.raises(GapError):
            market_data.interpolate_gaps(series, max_gap=2)

    def test_leading_or_trailing_missing_aborts(self):
        with pytest.raises(BoundaryError):
            market_data.interpolate_gaps([np.nan, 1.0, 2.0], max_gap=6)
        with pytest.raises(BoundaryError):
            market_data.interpolate_gaps([1.0, 2.0, np.nan], max_gap=6)

    @given(
        st.lists(
            st.one_of(
                st.floats(-1e6, 1e6),
                st.just(float("nan")),
            ),
            min_size=3,
            max_size=40,
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, values):
        values[0], values[-1] = 1.0, 2.0
        try:
            once, _ = market_data.interpolate_gaps(values, max_gap=40)
        except (GapError, BoundaryError):
            return
        twice, n2 = market_data.interpolate_gaps(once, max_gap=40)
        assert n2 == 0
        np.testing.assert_array_equal(once, twice)

    def test_present_values_untouched(self):
        values = [3.0, np.nan, 7.0, 9.0]
        filled, _ = market_data.interpolate_gaps(values, max_gap=3)
        assert filled[0] == 3.0 and filled[2] == 7.0 and filled[3] == 9.0


class TestAnnotateCalendar:
    def test_saturday_is_not_workday(self):
        flags = market_data.annotate_calendar(
            [dt.datetime(2019, 6, 1, 12)], holidays=[], winter_months={12}
        )
        assert flags[0].workday is False

    def test_listed_holiday_is_not_workday(self):
        # Tuesday, but on the holiday list
        flags = market_data.annotate_calendar(
            [dt.datetime(2019, 1, 1, 9)], holidays=[dt.date(2019, 1, 1)], winter_months={1}
        )
        assert flags[0].workday is False
        assert flags[0].winter is True

    def test_july_not_winter_under_oct_apr(self):
        flags = market_data.annotate_calendar(
            [dt.datetime(2019, 7, 15, 9)],
            holidays=[],
            winter_months=market_data.DEFAULT_WINTER_MONTHS,
        )
        assert flags[0].winter is False

    def test_default_winter_set_is_oct_to_apr(self):
        assert market_data.DEFAULT_WINTER_MONTHS == frozenset({10, 11, 12, 1, 2, 3, 4})

    def test_empty_winter_months_rejected(self):
        with pytest.raises(ValueError):
            market_data.annotate_calendar([dt.datetime(2019, 1, 1)], [], winter_months=set())

    def test_local_timezone_drives_the_date(self):
        # 23:30 UTC on a Friday is already Saturday in Rome
        flags = market_data.annotate_calendar(
            [pd.Timestamp("2019-06-07 23:00", tz="UTC")],
            holidays=[],
            winter_months={12},
            timezone="Europe/Rome",
        )
        assert flags[0].workday is False


class TestLoadDataset:
    def test_single_complete_day(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        ds = market_data.load_dataset(zonal, national, holidays)
        assert len(ds.national) == 24
        assert len(ds.zonal) == 24 * 7
        assert all(v == 0 for v in ds.interpolated_cells.values())

    def test_zonal_record_count_is_seven_per_hour(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        ds = market_data.load_dataset(zonal, national, holidays)
        counts = ds.zonal.groupby("timestamp").size()
        assert (counts == 7).all()

    def test_missing_cell_interpolated_to_midpoint(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        lines = zonal.read_text().splitlines()
        # Find a North row mid-day and blank its solar value, after noting
        # its neighbours.
        header = lines[0].split(",")
        i_solar = header.index("solar_mwh")
        target_line = None
        for i, line in enumerate(lines):
            if line.startswith("2019-06-03T12:00:00Z,North"):
                target_line = i
        fields_before = lines[target_line - 7].split(",")
        fields_after = lines[target_line + 7].split(",")
        fields = lines[target_line].split(",")
        fields_before[i_solar] = "100.0"
        fields_after[i_solar] = "200.0"
        fields[i_solar] = ""
        lines[target_line - 7] = ",".join(fields_before)
        lines[target_line + 7] = ",".join(fields_after)
        lines[target_line] = ",".join(fields)
        zonal.write_text("\n".join(lines) + "\n")

        ds = market_data.load_dataset(zonal, national, holidays)
        row = ds.zonal[
            (ds.zonal["zone"] == "North")
            & (ds.zonal["timestamp"] == pd.Timestamp("2019-06-03 12:00", tz="UTC"))
        ]
        assert row["solar_mwh"].iloc[0] == 150.0
        assert ds.interpolated_cells["zonal.solar_mwh"] == 1

    def test_malformed_row_reports_line_number(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        lines = zonal.read_text().splitlines()
        fields = lines[10].split(",")  # file line 11
        fields[2] = "not-a-number"
        lines[10] = ",".join(fields)
        zonal.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match="line 11"):
            market_data.load_dataset(zonal, national, holidays)

    def test_duplicate_timestamp_zone_rejected(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        lines = zonal.read_text().splitlines()
        lines.append(lines[1])
        zonal.write_text("\n".join(lines) + "\n")
        with pytest.raises(DuplicateRowError):
            market_data.load_dataset(zonal, national, holidays)

    def test_long_gap_aborts(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        lines = zonal.read_text().splitlines()
        header, rows = lines[0], lines[1:]
        # Blank demand for 8 consecutive North hours (> default max_gap 6).
        changed = []
        n_blanked = 0
        for line in rows:
            fields = line.split(",")
            hour = int(fields[0][11:13])
            if fields[1] == "North" and 4 <= hour < 12:
                fields[2] = ""
                n_blanked += 1
            changed.append(",".join(fields))
        assert n_blanked == 8
        zonal.write_text("\n".join([header] + changed) + "\n")
        with pytest.raises(GapError):
            market_data.load_dataset(zonal, national, holidays)

    def test_unknown_zone_rejected(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        lines = zonal.read_text().splitlines()
        fields = lines[3].split(",")
        fields[1] = "Atlantis"
        lines[3] = ",".join(fields)
        zonal.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match="Atlantis"):
            market_data.load_dataset(zonal, national, holidays)

    def test_missing_cost_is_an_error(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        lines = national.read_text().splitlines()
        fields = lines[5].split(",")
        fields[1] = ""
        lines[5] = ",".join(fields)
        national.write_text("\n".join(lines) + "\n")
        with pytest.raises(CompletenessError):
            market_data.load_dataset(zonal, national, holidays)

    def test_round_trip_is_byte_identical(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        ds = market_data.load_dataset(zonal, national, holidays)
        z2, n2 = tmp_path / "z2.csv", tmp_path / "n2.csv"
        market_data.write_dataset(ds, z2, n2)
        assert z2.read_bytes() == zonal.read_bytes()
        assert n2.read_bytes() == national.read_bytes()

    def test_gas_price_constant_within_day(self, tmp_path):
        cfg = synth.GeneratorConfig(
            start=dt.date(2019, 3, 1), end=dt.date(2019, 3, 10), seed=3, lockdown=None
        )
        dataset, _ = synth.generate(cfg)
        zonal, national, holidays = write_csvs(tmp_path, dataset)
        ds = market_data.load_dataset(zonal, national, holidays)
        by_day = ds.national.groupby(ds.national["timestamp"].dt.date)["gas_price_eur_mwh"]
        assert (by_day.nunique() == 1).all()

    def test_missing_gas_day_interpolated_daily(self, tmp_path):
        cfg = synth.GeneratorConfig(
            start=dt.date(2019, 3, 1), end=dt.date(2019, 3, 3), seed=3, lockdown=None
        )
        dataset, _ = synth.generate(cfg)
        zonal, national, holidays = write_csvs(tmp_path, dataset)
        lines = national.read_text().splitlines()
        out = [lines[0]]
        for line in lines[1:]:
            fields = line.split(",")
            if fields[0].startswith("2019-03-02"):
                fields[3] = ""
            out.append(",".join(fields))
        national.write_text("\n".join(out) + "\n")
        ds = market_data.load_dataset(zonal, national, holidays)
        gas = ds.national.set_index("timestamp")["gas_price_eur_mwh"]
        day1 = gas["2019-03-01"].iloc[0]
        day2 = gas["2019-03-02"]
        day3 = gas["2019-03-03"].iloc[0]
        assert day2.nunique() == 1
        assert day2.iloc[0] == pytest.approx((day1 + day3) / 2)

    def test_timezone_header_comment(self, tmp_path, day_dataset):
        zonal, national, holidays = write_csvs(tmp_path, day_dataset)
        # Rewrite both files with naive timestamps declared as UTC.
        for path in (zonal, national):
            lines = path.read_text().splitlines()
            out = ["# timezone: UTC", lines[0]]
            for line in lines[1:]:
                fields = line.split(",")
                fields[0] = fields[0].rstrip("Z").replace("T", " ")
                out.append(",".join(fields))
            path.write_text("\n".join(out) + "\n")
        ds = market_data.load_dataset(zonal, national, holidays)
        assert len(ds.national) == 24


class TestHolidaysFile:
    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "holidays.txt"
        p.write_text("# national holidays\n2019-01-01\n\n2019-04-25  # liberation day\n")
        days = market_data.load_holidays(p)
        assert days == frozenset({dt.date(2019, 1, 1), dt.date(2019, 4, 25)})

    def test_bad_date_reports_line(self, tmp_path):
        p = tmp_path / "holidays.txt"
        p.write_text("2019-01-01\nnot-a-date\n")
        with pytest.raises(ParseError, match="line 2"):
            market_data.load_holidays(p)

import io
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pv_resiliency.errors import ConfigurationError, EmptyFile, HorizonOutOfRange, InsufficientCoverage, MalformedRow, MissingColumn, WeatherError
from pv_resiliency.weather import (
    ColumnSchema,
    ExogenousTrace,
    ForecastMode,
    HistoricalTempProfile,
    WeatherRecord,
    build_historical_profile,
    forecast_irradiance,
    historical_window,
    load_historical_profiles,
    parse_weather_csv,
    resample,
    synthetic_historical_profiles,
    synthetic_irma_week,
    write_historical_profiles,
)
from tests.utils import constant_trace

DT = 1.0 / 6.0


def hourly_records(start, hours, temp=27.0, ghi=0.0):
    return [WeatherRecord(timestamp=start + timedelta(hours=h), ghi=ghi, ambient_temp=temp) for h in range(hours + 1)]


def test_parse_generic_csv_sorts_records():
    text = "timestamp,ghi,temp\n2017-09-10T01:00,10,26.5\n2017-09-10T00:00,0,27\n"
    records = parse_weather_csv(io.StringIO(text))
    assert [r.timestamp for r in records] == [datetime(2017, 9, 10, 0), datetime(2017, 9, 10, 1)]
    assert records[1].ghi == 10.0
    assert records[1].ambient_temp == 26.5


def test_parse_unix_timestamps(tmp_path):
    path = tmp_path / "weather.csv"
    path.write_text("timestamp,ghi,temp\n1505001600,0,27\n1505005200,5,26\n", encoding="utf-8")
    records = parse_weather_csv(path)
    assert records[0].timestamp == datetime(2017, 9, 10, 0, 0)
    assert records[1].timestamp == datetime(2017, 9, 10, 1, 0)


def test_parse_nsrdb_layout():
    text = (
        "Source,Location ID,City\n"
        "NSRDB,12345,Miami\n"
        "Year,Month,Day,Hour,Minute,GHI,Temperature\n"
        "2017,9,10,0,0,0,27.1\n"
        "2017,9,10,0,30,0,26.9\n"
    )
    records = parse_weather_csv(io.StringIO(text), ColumnSchema.nsrdb())
    assert len(records) == 2
    assert records[1].timestamp == datetime(2017, 9, 10, 0, 30)
    assert records[1].ambient_temp == pytest.approx(26.9)


def test_custom_column_names():
    schema = ColumnSchema.from_dict({"timestamp": "time", "ghi": "irradiance", "temperature": "air"})
    records = parse_weather_csv(io.StringIO("time,irradiance,air\n2017-09-10 00:00,1,2\n"), schema)
    assert records[0].ghi == 1.0
    assert records[0].ambient_temp == 2.0


def test_missing_column():
    with pytest.raises(MissingColumn) as e:
        parse_weather_csv(io.StringIO("timestamp,ghi\n2017-09-10T00:00,0\n"))
    assert e.value.column == "temp"
    assert e.value.available == ["timestamp", "ghi"]
    assert "available: timestamp, ghi" in str(e.value)


def test_missing_profile_column(tmp_path):
    (tmp_path / "doy_253.csv").write_text("time_of_day,temp\n00:00,27\n", encoding="utf-8")
    with pytest.raises(MissingColumn) as e:
        load_historical_profiles(tmp_path)
    assert e.value.column == "temp_c"
    assert e.value.available == ["time_of_day", "temp"]


def test_malformed_row_reports_file_line():
    text = "timestamp,ghi,temp\n2017-09-10T00:00,0,27\n2017-09-10T01:00,abc,27\n"
    with pytest.raises(MalformedRow) as e:
        parse_weather_csv(io.StringIO(text))
    assert e.value.row_index == 3


def test_negative_ghi_rejected():
    with pytest.raises(MalformedRow):
        parse_weather_csv(io.StringIO("timestamp,ghi,temp\n2017-09-10T00:00,-1,27\n"))


def test_duplicate_timestamp_rejected():
    text = "timestamp,ghi,temp\n2017-09-10T00:00,0,27\n2017-09-10T01:00,0,27\n2017-09-10T00:00,0,28\n"
    with pytest.raises(MalformedRow, match="duplicate") as e:
        parse_weather_csv(io.StringIO(text))
    assert e.value.row_index == 4
    assert "first on line 2" in str(e.value)


def test_compact_dates_are_not_epochs():
    records = parse_weather_csv(io.StringIO("timestamp,ghi,temp\n20170911,0,27\n201709111030,5,28\n"))
    assert [r.timestamp for r in records] == [datetime(2017, 9, 11), datetime(2017, 9, 11, 10, 30)]


def test_offsets_and_epochs_convert_to_site_time():
    text = "timestamp,ghi,temp\n2017-09-10T12:00-04:00,0,27\n1505001600,0,27\n"
    utc = parse_weather_csv(io.StringIO(text))
    assert [r.timestamp for r in utc] == [datetime(2017, 9, 10, 0), datetime(2017, 9, 10, 16)]
    local = parse_weather_csv(io.StringIO(text), ColumnSchema.from_dict({"timezone": "America/New_York"}))
    assert [r.timestamp for r in local] == [datetime(2017, 9, 9, 20), datetime(2017, 9, 10, 12)]
    # naive stamps are already site time
    naive = parse_weather_csv(io.StringIO("timestamp,ghi,temp\n2017-09-10T12:00,0,27\n"), ColumnSchema(timezone="America/New_York"))
    assert naive[0].timestamp == datetime(2017, 9, 10, 12)
    with pytest.raises(ConfigurationError):
        ColumnSchema(timezone="Mars/Olympus_Mons")


@pytest.mark.parametrize("text", ["", "   \n", "timestamp,ghi,temp\n"])
def test_empty_files(text):
    with pytest.raises(EmptyFile):
        parse_weather_csv(io.StringIO(text))


def test_resample_interpolates_linearly():
    start = datetime(2017, 9, 10)
    records = [
        WeatherRecord(start, 0.0, 20.0),
        WeatherRecord(start + timedelta(hours=1), 600.0, 26.0),
    ]
    trace = resample(records, DT)
    assert len(trace) == 7
    assert trace.ghi[3] == pytest.approx(300.0)
    assert trace.ambient_temp[1] == pytest.approx(21.0)
    assert trace.ambient_temp[-1] == pytest.approx(26.0)


def test_resample_clamps_within_one_step_margin():
    start = datetime(2017, 9, 10)
    records = hourly_records(start, 2, temp=25.0)
    trace = resample(records, DT, start=start, n_steps=14)
    assert trace.ambient_temp[-1] == pytest.approx(25.0)


def test_resample_outside_coverage():
    start = datetime(2017, 9, 10)
    with pytest.raises(InsufficientCoverage):
        resample(hourly_records(start, 2), DT, start=start, n_steps=144)
    with pytest.raises(InsufficientCoverage):
        resample(hourly_records(start, 2)[:1], DT)


def test_historical_profile_averages_years():
    records = hourly_records(datetime(2017, 9, 10), 48, temp=20.0) + hourly_records(datetime(2018, 9, 10), 48, temp=30.0)
    profiles = build_historical_profile(records, DT)
    doy = datetime(2017, 9, 10).timetuple().tm_yday
    assert set(profiles) == {doy, doy + 1}
    assert len(profiles[doy].values) == 144
    assert np.allclose(profiles[doy].values, 25.0)


def test_historical_window_continues_into_next_day():
    profiles = synthetic_historical_profiles(datetime(2017, 9, 10), n_days=2, dt_hours=DT)
    window = historical_window(profiles, datetime(2017, 9, 10, 23, 0), 12, DT)
    values = profiles[253].values
    assert len(window) == 12
    assert window[:6] == pytest.approx(values[138:144])
    assert window[6:] == pytest.approx(values[:6])


def test_historical_window_missing_day_uses_nearest():
    profiles = {doy: HistoricalTempProfile(day_of_year=doy, values=(float(doy),) * 144) for doy in (100, 253)}
    window = historical_window(profiles, datetime(2017, 9, 10, 23, 0), 12, DT)
    assert window.tolist() == [253.0] * 12
    assert historical_window(profiles, datetime(2017, 4, 11), 3, DT).tolist() == [100.0] * 3
    # day 365 is closer to day 1 than to day 253 across the year end
    wrapped = {1: HistoricalTempProfile(day_of_year=1, values=(1.0,) * 144), 253: profiles[253]}
    assert historical_window(wrapped, datetime(2017, 12, 31), 2, DT).tolist() == [1.0, 1.0]
    with pytest.raises(InsufficientCoverage):
        historical_window({}, datetime(2017, 9, 10), 12, DT)


def test_historical_profiles_written_and_loaded(tmp_path):
    profiles = synthetic_historical_profiles(datetime(2017, 9, 10), n_days=1, dt_hours=DT)
    write_historical_profiles(profiles, tmp_path, DT)
    assert (tmp_path / "doy_253.csv").read_text(encoding="utf-8").splitlines()[0] == "time_of_day,temp_c"
    loaded = load_historical_profiles(tmp_path)
    assert loaded[253].values == pytest.approx(profiles[253].values)
    with pytest.raises(InsufficientCoverage):
        load_historical_profiles(tmp_path / "empty")


def test_forecast_modes():
    trace = synthetic_irma_week(n_steps=432)
    perfect = forecast_irradiance(trace, 200, 18)
    assert perfect == pytest.approx(trace.ghi[200:218])
    noisy = forecast_irradiance(trace, 200, 18, ForecastMode.NOISY, seed=4, sigma=0.3)
    assert noisy == pytest.approx(forecast_irradiance(trace, 200, 18, "noisy", seed=4, sigma=0.3))
    assert np.all(noisy >= 0.0)
    persistence = forecast_irradiance(trace, 200, 18, ForecastMode.PERSISTENCE)
    assert persistence == pytest.approx(trace.ghi[56:74])
    # nothing a day earlier: falls back to the true values
    assert forecast_irradiance(trace, 10, 18, ForecastMode.PERSISTENCE) == pytest.approx(trace.ghi[10:28])


def test_forecast_beyond_trace():
    trace = constant_trace(20)
    with pytest.raises(HorizonOutOfRange):
        forecast_irradiance(trace, 10, 18)


def test_trace_rejects_negative_values_and_pads():
    with pytest.raises(WeatherError):
        constant_trace(5, demand=-1.0)
    trace = constant_trace(5, temp=30.0)
    padded = trace.padded(8)
    assert len(padded) == 8
    assert padded.ambient_temp[-1] == 30.0
    assert trace.padded(3) is trace


def test_with_secondary_length_mismatch():
    trace = constant_trace(5)
    with pytest.raises(InsufficientCoverage):
        trace.with_secondary(np.zeros(4))
    assert isinstance(trace.with_secondary(np.ones(5)), ExogenousTrace)


def test_synthetic_week_shape():
    trace = synthetic_irma_week()
    assert len(trace) == 1008
    assert trace.ghi[0] == 0.0
    noon = 72
    assert trace.ghi[noon] < trace.ghi[noon + 2 * 144]
    assert trace.ambient_temp.min() >= 23.0 - 1e-9
    assert trace.ambient_temp.max() <= 31.0 + 1e-9


@settings(max_examples=30, deadline=None)
@given(hourly=st.lists(st.floats(min_value=-10.0, max_value=45.0), min_size=24, max_size=24))
def test_profile_of_identical_days_is_that_day(hourly):
    start = datetime(2017, 9, 10)
    records = [
        WeatherRecord(datetime(year, 9, 10) + timedelta(hours=h), 0.0, hourly[h % 24]) for year in (2015, 2017, 2018) for h in range(3 * 24 + 1)
    ]
    profiles = build_historical_profile(records, DT)
    first = start.timetuple().tm_yday
    assert set(profiles) == {first, first + 1, first + 2}
    expected = np.interp(np.arange(144) * DT, np.arange(25), [*hourly, hourly[0]])
    for profile in profiles.values():
        assert profile.values == pytest.approx(expected, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(window=st.integers(min_value=1, max_value=40))
def test_perfect_windows_rebuild_the_trace(window):
    trace = synthetic_irma_week(n_steps=300)
    starts = range(0, len(trace) - window + 1, window)
    joined = np.concatenate([forecast_irradiance(trace, k, window) for k in starts])
    assert np.array_equal(joined, trace.ghi[: len(joined)])
    assert len(trace) - len(joined) < window

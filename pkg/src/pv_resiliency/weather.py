"""Weather ingestion, historical temperature profiles and forecasts.

Records come from NSRDB-style CSV files (one timestamp column or the
Year/Month/Day/Hour/Minute split) and are resampled onto the simulation grid.
A synthetic hurricane week is available for runs without external data.
"""

import io
import logging
import math
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from dateutil import parser as dateparser
from dateutil import tz

from pv_resiliency.errors import ConfigurationError, EmptyFile, HorizonOutOfRange, InsufficientCoverage, MalformedRow, MissingColumn, WeatherError

logger = logging.getLogger(__name__)

NSRDB_DATE_PARTS = ("Year", "Month", "Day", "Hour", "Minute")
# YYYYMMDD with optional hhmm and ss, read as a date rather than an epoch
COMPACT_DATE = re.compile(r"\d{8}(\d{4}(\d{2})?)?")


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: datetime
    ghi: float
    ambient_temp: float


@dataclass(frozen=True)
class ColumnSchema:
    """Column names of a weather CSV. ``timestamp=None`` means the NSRDB date-part columns.

    ``timezone`` is the site's zone (an IANA name such as ``America/New_York``).
    Unix epochs and timestamps carrying an offset are converted to it; without
    one they are converted to UTC. Naive timestamps are taken as site time.
    """

    timestamp: str = "timestamp"
    ghi: str = "ghi"
    temperature: str = "temp"
    skip_rows: int = 0
    timezone: str = None

    def __post_init__(self):
        if self.timezone is not None and tz.gettz(self.timezone) is None:
            raise ConfigurationError(f"Unknown timezone '{self.timezone}'")

    @property
    def zone(self):
        return tz.gettz(self.timezone) if self.timezone is not None else tz.UTC

    @classmethod
    def nsrdb(cls, timezone=None):
        return cls(timestamp=None, ghi="GHI", temperature="Temperature", skip_rows=2, timezone=timezone)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        if data.get("format") == "nsrdb":
            return cls.nsrdb(data.get("timezone"))
        return cls(
            timestamp=data.get("timestamp", "timestamp"),
            ghi=data.get("ghi", "ghi"),
            temperature=data.get("temperature", "temp"),
            skip_rows=int(data.get("skip_rows", 0)),
            timezone=data.get("timezone"),
        )


@dataclass(frozen=True)
class HistoricalTempProfile:
    day_of_year: int
    values: tuple


class ForecastMode(str, Enum):
    PERFECT = "perfect"
    PERSISTENCE = "persistence"
    NOISY = "noisy"


@dataclass(frozen=True, eq=False)
class ExogenousTrace:
    dt_hours: float
    ghi: np.ndarray
    ambient_temp: np.ndarray
    secondary_demand: np.ndarray
    start: datetime = field(default_factory=lambda: datetime(2017, 9, 10))

    def __post_init__(self):
        n = len(self.ghi)
        if not (len(self.ambient_temp) == len(self.secondary_demand) == n):
            raise InsufficientCoverage(f"Trace arrays differ in length: {n}, {len(self.ambient_temp)}, {len(self.secondary_demand)}")
        if np.any(np.asarray(self.ghi) < 0) or np.any(np.asarray(self.secondary_demand) < 0):
            raise WeatherError("Trace holds negative irradiance or secondary demand")

    def __len__(self):
        return len(self.ghi)

    @property
    def steps_per_day(self):
        return int(round(24.0 / self.dt_hours))

    def timestamp(self, k):
        return self.start + timedelta(hours=k * self.dt_hours)

    def with_secondary(self, demand):
        demand = np.asarray(demand, dtype=float)
        if demand.shape != self.ghi.shape:
            raise InsufficientCoverage(f"Secondary profile has {demand.size} steps, trace has {len(self)}")
        return replace(self, secondary_demand=demand)

    def padded(self, n_steps):
        """Extends the trace to n_steps by repeating its last value."""
        missing = n_steps - len(self)
        if missing <= 0:
            return self
        logger.warning(f"Trace padded with {missing} copies of its last step")

        def pad(values):
            return np.concatenate([values, np.full(missing, values[-1] if len(values) else 0.0)])

        return replace(self, ghi=pad(self.ghi), ambient_temp=pad(self.ambient_temp), secondary_demand=pad(self.secondary_demand))


def _parse_timestamp(raw, zone=tz.UTC):
    text = str(raw).strip()
    if not COMPACT_DATE.fullmatch(text):
        try:
            return datetime.fromtimestamp(float(text), tz=timezone.utc).astimezone(zone).replace(tzinfo=None)
        except ValueError:
            pass
    parsed = dateparser.parse(text)
    if parsed.tzinfo is not None:
        parsed = parsed.astimezone(zone)
    return parsed.replace(tzinfo=None, second=0, microsecond=0)


def _read_frame(source, schema):
    if isinstance(source, (str, Path)):
        with open(source, "rb") as handle:
            raw = handle.read()
    else:
        raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8-sig")
    if not raw.strip():
        raise EmptyFile("Weather file is empty")
    try:
        return pd.read_csv(io.StringIO(raw), skiprows=schema.skip_rows, dtype=str, skip_blank_lines=True)
    except pd.errors.EmptyDataError as e:
        raise EmptyFile("Weather file has no header row") from e


def parse_weather_csv(source, schema: ColumnSchema = None):
    """Parses a weather CSV into records sorted by timestamp.

    Row numbers in errors are 1-based file lines counting the header.
    """
    schema = schema or ColumnSchema()
    frame = _read_frame(source, schema)
    frame.columns = [str(col).strip() for col in frame.columns]
    time_columns = list(NSRDB_DATE_PARTS) if schema.timestamp is None else [schema.timestamp]
    for column in [*time_columns, schema.ghi, schema.temperature]:
        if column not in frame.columns:
            raise MissingColumn(column, frame.columns)
    if frame.empty:
        raise EmptyFile("Weather file has a header but no rows")

    zone = schema.zone
    lines = []
    records = []
    first_line = schema.skip_rows + 2
    for i, row in enumerate(frame.itertuples(index=False)):
        values = dict(zip(frame.columns, row))
        line = first_line + i
        try:
            if schema.timestamp is None:
                parts = [int(float(values[name])) for name in NSRDB_DATE_PARTS]
                timestamp = datetime(*parts)
            else:
                timestamp = _parse_timestamp(values[schema.timestamp], zone)
            ghi = float(values[schema.ghi])
            temp = float(values[schema.temperature])
        except (TypeError, ValueError, OverflowError) as e:
            raise MalformedRow(line, str(e)) from e
        if not (math.isfinite(ghi) and math.isfinite(temp)):
            raise MalformedRow(line, "non-finite value")
        if ghi < 0:
            raise MalformedRow(line, f"negative GHI {ghi}")
        records.append(WeatherRecord(timestamp=timestamp, ghi=ghi, ambient_temp=temp))
        lines.append(line)

    order = sorted(range(len(records)), key=lambda i: (records[i].timestamp, lines[i]))
    for previous, current in zip(order, order[1:]):
        if records[current].timestamp == records[previous].timestamp:
            stamp = records[current].timestamp.isoformat()
            raise MalformedRow(lines[current], f"duplicate timestamp {stamp} (first on line {lines[previous]})")
    records = [records[i] for i in order]
    logger.info(f"Parsed {len(records)} weather records from {records[0].timestamp} to {records[-1].timestamp}")
    return records


def _elapsed_hours(timestamps, origin):
    return np.array([(t - origin).total_seconds() / 3600.0 for t in timestamps])


def resample(records, dt_hours, start=None, n_steps=None):
    """Linear interpolation of the records onto a uniform grid; the ends clamp to the nearest record."""
    if not dt_hours > 0:
        raise InsufficientCoverage(f"dt_hours must be > 0, got {dt_hours}")
    if len(records) < 2:
        raise InsufficientCoverage(f"Need at least two records to resample, got {len(records)}")
    first, last = records[0].timestamp, records[-1].timestamp
    start = start or first
    if n_steps is None:
        n_steps = int(math.floor((last - start).total_seconds() / 3600.0 / dt_hours + 1e-9)) + 1
    end = start + timedelta(hours=(n_steps - 1) * dt_hours)
    margin = timedelta(hours=dt_hours)
    if n_steps < 1 or start < first - margin or end > last + margin:
        raise InsufficientCoverage(f"Records cover {first} to {last}, requested {start} to {end}")

    knots = _elapsed_hours([r.timestamp for r in records], start)
    grid = np.arange(n_steps) * dt_hours
    ghi = np.interp(grid, knots, [r.ghi for r in records])
    temp = np.interp(grid, knots, [r.ambient_temp for r in records])
    return ExogenousTrace(dt_hours=dt_hours, ghi=ghi, ambient_temp=temp, secondary_demand=np.zeros(n_steps), start=start)


def build_historical_profile(records, dt_hours):
    """Averages temperature per (day of year, time-of-day slot) across all years in the records."""
    if len(records) < 2:
        raise InsufficientCoverage("Need at least two temperature records")
    slots = int(round(24.0 / dt_hours))
    frames = []
    by_year = {}
    for record in records:
        by_year.setdefault(record.timestamp.year, []).append(record)
    for year, year_records in sorted(by_year.items()):
        if len(year_records) < 2:
            logger.warning(f"Skipping year {year}: a single record cannot be resampled")
            continue
        trace = resample(year_records, dt_hours)
        stamps = pd.date_range(trace.start, periods=len(trace), freq=pd.Timedelta(seconds=round(dt_hours * 3600.0)))
        frames.append(
            pd.DataFrame(
                {
                    "doy": stamps.dayofyear,
                    "slot": ((stamps.hour * 60 + stamps.minute) // int(round(dt_hours * 60))).astype(int),
                    "temp": trace.ambient_temp,
                }
            )
        )
    if not frames:
        raise InsufficientCoverage("No year has enough records to build a profile")
    means = pd.concat(frames).groupby(["doy", "slot"])["temp"].mean()

    profiles = {}
    for doy, day in means.groupby(level="doy"):
        day = day.droplevel("doy")
        if len(day) < slots:
            logger.debug(f"Day {doy} only has {len(day)}/{slots} slots; left out of the profile")
            continue
        profiles[int(doy)] = HistoricalTempProfile(day_of_year=int(doy), values=tuple(float(day[s]) for s in range(slots)))
    if not profiles:
        raise InsufficientCoverage("No day of year has a complete set of samples")
    return profiles


def nearest_profile(profiles, day):
    """Profile for ``day``, or the closest day of year (wrapping at year end) when it has none."""
    profile = profiles.get(day)
    if profile is not None:
        return profile
    if not profiles:
        raise InsufficientCoverage(f"No historical profile for day of year {day}")
    nearest = min(profiles, key=lambda other: (min(abs(other - day), 365 - abs(other - day)), other))
    logger.debug(f"No historical profile for day of year {day}; using day {nearest}")
    return profiles[nearest]


def historical_window(profiles, when: datetime, n_steps, dt_hours):
    """Historical temperatures for n_steps starting at ``when``, continuing into following days."""
    values = []
    slot = int(round((when.hour * 60 + when.minute) / (dt_hours * 60)))
    day = when.timetuple().tm_yday
    while len(values) < n_steps:
        values.extend(nearest_profile(profiles, day).values[slot:])
        slot = 0
        day += 1
        if day not in profiles and day > 365:
            day = 1
    return np.array(values[:n_steps])


def write_historical_profiles(profiles, directory, dt_hours):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    minutes = dt_hours * 60.0
    for doy, profile in sorted(profiles.items()):
        times = [f"{int(i * minutes) // 60:02d}:{int(i * minutes) % 60:02d}" for i in range(len(profile.values))]
        pd.DataFrame({"time_of_day": times, "temp_c": profile.values}).to_csv(directory / f"doy_{doy:03d}.csv", index=False)
    logger.info(f"Wrote {len(profiles)} historical profiles to {directory}")
    return directory


def load_historical_profiles(directory):
    profiles = {}
    for path in sorted(Path(directory).glob("doy_*.csv")):
        doy = int(path.stem.split("_")[1])
        frame = pd.read_csv(path)
        if "temp_c" not in frame.columns:
            raise MissingColumn("temp_c", frame.columns)
        profiles[doy] = HistoricalTempProfile(day_of_year=doy, values=tuple(float(v) for v in frame["temp_c"]))
    if not profiles:
        raise InsufficientCoverage(f"No doy_*.csv profiles found in {directory}")
    return profiles


def forecast_irradiance(trace: ExogenousTrace, k, n_steps, mode=ForecastMode.PERFECT, seed=0, sigma=0.2):
    mode = ForecastMode(mode)
    if k < 0 or k + n_steps > len(trace):
        raise HorizonOutOfRange(f"Steps {k}..{k + n_steps - 1} fall outside a trace of {len(trace)} steps")
    perfect = trace.ghi[k : k + n_steps].copy()
    if mode == ForecastMode.PERFECT:
        return perfect
    if mode == ForecastMode.NOISY:
        factor = np.maximum(0.0, 1.0 + sigma * np.random.default_rng(seed + k).standard_normal(n_steps))
        return perfect * factor
    lag = trace.steps_per_day
    if k < lag:
        logger.warning(f"No irradiance 24 h before step {k}; using the true values")
        return perfect
    return trace.ghi[k - lag : k - lag + n_steps].copy()


# Synthetic hurricane week: storm for the first 36 hours, then mostly clear days
STORM_HOURS = 36.0
STORM_CLEARNESS = 0.05
DAILY_CLEARNESS = (0.05, 0.8, 0.9, 0.7, 0.9, 0.85, 0.95)
PEAK_GHI = 950.0
SUNRISE, SUNSET = 7.0, 19.5


def clear_sky_ghi(hour_of_day):
    if not SUNRISE <= hour_of_day <= SUNSET:
        return 0.0
    return PEAK_GHI * math.sin(math.pi * (hour_of_day - SUNRISE) / (SUNSET - SUNRISE))


def diurnal_temperature(hour_of_day, mean=27.0, amplitude=4.0):
    return mean + amplitude * math.cos(2.0 * math.pi * (hour_of_day - 15.0) / 24.0)


def synthetic_irma_week(start=None, n_steps=1008, dt_hours=1.0 / 6.0):
    start = start or datetime(2017, 9, 10)
    ghi = np.zeros(n_steps)
    temp = np.zeros(n_steps)
    for k in range(n_steps):
        elapsed = k * dt_hours
        when = start + timedelta(hours=elapsed)
        hour = when.hour + when.minute / 60.0
        day = int(elapsed // 24)
        clearness = STORM_CLEARNESS if elapsed < STORM_HOURS else DAILY_CLEARNESS[min(day, len(DAILY_CLEARNESS) - 1)]
        ghi[k] = clear_sky_ghi(hour) * clearness
        temp[k] = diurnal_temperature(hour)
    return ExogenousTrace(dt_hours=dt_hours, ghi=ghi, ambient_temp=temp, secondary_demand=np.zeros(n_steps), start=start)


def synthetic_historical_profiles(start=None, n_days=8, dt_hours=1.0 / 6.0, mean=26.5, amplitude=3.5):
    start = start or datetime(2017, 9, 10)
    slots = int(round(24.0 / dt_hours))
    values = tuple(diurnal_temperature(i * dt_hours, mean, amplitude) for i in range(slots))
    first = start.timetuple().tm_yday
    return {(first - 1 + i) % 365 + 1: HistoricalTempProfile(day_of_year=(first - 1 + i) % 365 + 1, values=values) for i in range(n_days + 1)}

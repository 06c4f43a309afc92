"""Reading and validating smartcard transaction logs and stop registries.

The transaction format is a plain CSV with one boarding (and, for
distance-based fares, one alighting) per line.  Fixed-fare lines carry no
alighting information at all; that asymmetry is the reason most of the
downstream inference works on stays between consecutive boardings rather
than on closed trips.

Parsing is strict but line-scoped: a malformed line is rejected with a
reason and a line number, never silently dropped, and never aborts the
run unless the rejection rate makes it obvious the file is not in this
schema at all.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Iterator, Mapping

TRANSACTIONS_HEADER = "card_id,card_type,fare_type,route_id,board_stop,board_time,alight_stop,alight_time"
STOPS_HEADER = "stop_id,lon,lat"

CARD_REGULAR = "R"
CARD_STUDENT = "S"
FARE_FIXED = "FIX"
FARE_DISTANCE = "DST"

# A file whose rejection rate exceeds this fraction is treated as being in
# the wrong schema entirely rather than merely dirty.
FATAL_REJECT_FRACTION = 0.5


class SchemaError(Exception):
    """The input file cannot be interpreted under the expected schema."""


@dataclass(frozen=True)
class Rejection:
    line_no: int
    reason: str


@dataclass(frozen=True, slots=True)
class Stop:
    stop_id: str
    lon: float
    lat: float


@dataclass(slots=True)
class TransactionRecord:
    """One validated transaction line.

    Fixed-fare records have ``alight_stop`` and ``alight_time`` set to
    None; distance-fare records always carry both.
    """

    card_id: str
    card_type: str
    fare_type: str
    route_id: str
    board_stop: str
    board_time: datetime
    alight_stop: str | None
    alight_time: datetime | None

    def to_csv_row(self) -> str:
        a_stop = self.alight_stop or ""
        a_time = format_minute(self.alight_time) if self.alight_time else ""
        return ",".join(
            (
                self.card_id,
                self.card_type,
                self.fare_type,
                self.route_id,
                self.board_stop,
                format_minute(self.board_time),
                a_stop,
                a_time,
            )
        )


@dataclass(frozen=True)
class ObservationWeek:
    """A seven-day observation window starting at ``start_date``.

    All rule evaluation happens against the five Monday-to-Friday dates
    inside the window; weekend records are kept for chaining but carry no
    evidential weight.
    """

    label: str
    start_date: date

    @property
    def dates(self) -> tuple[date, ...]:
        return tuple(self.start_date + timedelta(days=i) for i in range(7))

    @property
    def weekdays(self) -> frozenset[date]:
        return frozenset(d for d in self.dates if d.weekday() < 5)

    def contains(self, d: date) -> bool:
        return self.start_date <= d < self.start_date + timedelta(days=7)


def format_minute(t: datetime) -> str:
    return f"{t.year:04d}-{t.month:02d}-{t.day:02d}T{t.hour:02d}:{t.minute:02d}"


def parse_minute(text: str) -> datetime:
    """Parse the canonical minute timestamp ``YYYY-MM-DDTHH:MM``.

    Only the exact sixteen-character form is accepted so that parsing and
    :func:`format_minute` round-trip byte for byte.
    """
    if len(text) != 16 or text[10] != "T":
        raise ValueError(f"not a minute timestamp: {text!r}")
    return datetime.fromisoformat(text)


def _clean(line: str) -> str:
    return line.rstrip("\r\n")


def parse_transactions(
    lines: Iterable[str], week: ObservationWeek
) -> tuple[list[TransactionRecord], list[Rejection]]:
    """Validate a transaction stream against its header and ``week``.

    Returns the accepted records in file order together with the per-line
    rejections.  Every data line lands in exactly one of the two lists.
    Raises :class:`SchemaError` when the header is wrong or when more than
    half of the data lines are rejected.
    """
    it = iter(lines)
    try:
        header = _clean(next(it))
    except StopIteration:
        return [], []
    if header != TRANSACTIONS_HEADER:
        raise SchemaError(f"unexpected transactions header: {header!r}")

    records: list[TransactionRecord] = []
    rejections: list[Rejection] = []
    total = 0
    for line_no, raw in enumerate(it, start=2):
        line = _clean(raw)
        if not line:
            continue
        total += 1
        reason = _parse_line(line, week, records)
        if reason is not None:
            rejections.append(Rejection(line_no, reason))
            # Bail out early on files that are clearly not in this schema.
            if total >= 1000 and len(rejections) * 2 > total:
                raise SchemaError(
                    f"rejected {len(rejections)} of first {total} lines; wrong schema"
                )
    if total and len(rejections) > total * FATAL_REJECT_FRACTION:
        raise SchemaError(f"rejected {len(rejections)} of {total} lines; wrong schema")
    return records, rejections


def _parse_line(
    line: str, week: ObservationWeek, out: list[TransactionRecord]
) -> str | None:
    """Validate one data line, appending to ``out`` on success.

    Returns a rejection reason, or None when the line was accepted.
    Fields are split on bare commas; the schema has no quoting and ids
    containing separators are rejected as a column-count error.
    """
    parts = line.split(",")
    if len(parts) != 8:
        return "bad column count"
    card_id, card_type, fare_type, route_id, b_stop, b_time, a_stop, a_time = parts
    if not card_id:
        return "empty card_id"
    if card_type not in (CARD_REGULAR, CARD_STUDENT):
        return "unknown card type"
    if fare_type not in (FARE_FIXED, FARE_DISTANCE):
        return "unknown fare type"
    if not route_id:
        return "empty route_id"
    if not b_stop:
        return "empty board_stop"
    try:
        board_time = parse_minute(b_time)
    except ValueError:
        return "bad board_time"
    if not week.contains(board_time.date()):
        return "outside observation week"
    if fare_type == FARE_FIXED:
        if a_stop or a_time:
            return "fixed fare with alight fields"
        out.append(
            TransactionRecord(
                card_id, card_type, fare_type, route_id, b_stop, board_time, None, None
            )
        )
        return None
    if not a_stop or not a_time:
        return "distance fare missing alight fields"
    try:
        alight_time = parse_minute(a_time)
    except ValueError:
        return "bad alight_time"
    if alight_time < board_time:
        return "negative leg duration"
    out.append(
        TransactionRecord(
            card_id,
            card_type,
            fare_type,
            route_id,
            b_stop,
            board_time,
            a_stop,
            alight_time,
        )
    )
    return None


def derive_week_start(lines: Iterable[str]) -> date | None:
    """Scan a transaction stream for the earliest parseable boarding date.

    Used when no explicit week start is configured.  The scan looks only
    at the boarding-time column and ignores lines it cannot read, so the
    result does not depend on the order of good and bad lines.
    """
    earliest: date | None = None
    first = True
    for raw in lines:
        if first:
            first = False
            continue
        parts = _clean(raw).split(",")
        if len(parts) != 8:
            continue
        try:
            d = parse_minute(parts[5]).date()
        except ValueError:
            continue
        if earliest is None or d < earliest:
            earliest = d
    return earliest


def load_stops(lines: Iterable[str]) -> tuple[dict[str, Stop], list[Rejection]]:
    """Read a stop registry into a dict keyed by stop id.

    Duplicate ids are a fatal SchemaError: two conflicting coordinates for
    one stop would silently corrupt every distance downstream.  Bad
    coordinate lines are rejected individually.
    """
    it = iter(lines)
    try:
        header = _clean(next(it))
    except StopIteration:
        return {}, []
    if header != STOPS_HEADER:
        raise SchemaError(f"unexpected stops header: {header!r}")
    stops: dict[str, Stop] = {}
    rejections: list[Rejection] = []
    for line_no, raw in enumerate(it, start=2):
        line = _clean(raw)
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            rejections.append(Rejection(line_no, "bad column count"))
            continue
        stop_id, lon_s, lat_s = parts
        if not stop_id:
            rejections.append(Rejection(line_no, "empty stop_id"))
            continue
        if stop_id in stops:
            raise SchemaError(f"duplicate stop_id {stop_id!r} at line {line_no}")
        try:
            lon = float(lon_s)
            lat = float(lat_s)
        except ValueError:
            rejections.append(Rejection(line_no, "bad coordinate"))
            continue
        if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
            rejections.append(Rejection(line_no, "coordinate out of range"))
            continue
        stops[stop_id] = Stop(stop_id, lon, lat)
    return stops, rejections


def geocode(
    records: Iterable[TransactionRecord], known_stops: Mapping[str, Stop]
) -> tuple[list[TransactionRecord], Counter[str]]:
    """Drop records naming stops absent from the registry.

    Returns the surviving records and a counter of unmatched stop ids.
    A record is dropped if either end references an unknown stop; both
    unknown ids on one record are counted.
    """
    kept: list[TransactionRecord] = []
    unmatched: Counter[str] = Counter()
    for rec in records:
        ok = True
        if rec.board_stop not in known_stops:
            unmatched[rec.board_stop] += 1
            ok = False
        if rec.alight_stop is not None and rec.alight_stop not in known_stops:
            unmatched[rec.alight_stop] += 1
            ok = False
        if ok:
            kept.append(rec)
    return kept, unmatched


def group_by_card(records: Iterable[TransactionRecord]) -> dict[str, list[TransactionRecord]]:
    by_card: dict[str, list[TransactionRecord]] = {}
    for rec in records:
        by_card.setdefault(rec.card_id, []).append(rec)
    return by_card


def iter_lines(path: str) -> Iterator[str]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        yield from fh

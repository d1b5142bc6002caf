"""Day-file ingestion, multi-station deduplication and per-vessel grouping.

Day files are CSV with the header::

    timestamp,message_id,latitude,longitude,raw_message,MMSI,originator

``raw_message`` holds the NMEA sentence(s) of the record; several fragments
of one multipart message may share a cell (whitespace separated) or be spread
over consecutive rows.  Timestamps are epoch seconds or ISO-8601 UTC and the
format is detected once per file.
"""

from __future__ import annotations

import csv
import logging
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .decoder import (
    DYNAMIC_TYPES,
    STATIC_TYPES,
    AisMessage,
    FragmentBuffer,
    VesselStatic,
    decode_dynamic,
    decode_line,
    decode_static,
    make_message,
    nmea_checksum,
    parse_sentence,
    to_sentences,
)
from .errors import DecodeError, FileUnreadable, SchemaMismatch, UnsupportedMessageType

log = logging.getLogger(__name__)

RAW_COLUMNS = ("timestamp", "message_id", "latitude", "longitude", "raw_message", "MMSI", "originator")
DAY_FILE_RE = re.compile(r"^(\d{4})_(\d{2})_(\d{2})$")
F_MIN_SECONDS = 2.0
NMEA_SUFFIXES = (".nmea", ".txt")


class ReadResult(NamedTuple):
    messages: list[AisMessage]
    statics: list[VesselStatic]
    skipped: Counter


class Record(NamedTuple):
    kind: str
    record: object  # AisMessage or VesselStatic
    raw: str
    recv_time: float
    originator: str


@dataclass
class MessageStream:
    """All messages of one MMSI, ordered by reception time."""

    mmsi: int
    messages: list[AisMessage] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.messages)

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        return message_arrays(self.messages)


def message_arrays(messages: Sequence[AisMessage]) -> dict[str, np.ndarray]:
    """Column arrays ``t, lat, lon, sog, cog`` with NaN for unavailable values."""
    n = len(messages)
    cols = {k: np.empty(n) for k in ("t", "lat", "lon", "sog", "cog")}
    nan = float("nan")
    for i, m in enumerate(messages):
        cols["t"][i] = m.recv_time
        cols["lat"][i] = nan if m.lat is None else m.lat
        cols["lon"][i] = nan if m.lon is None else m.lon
        cols["sog"][i] = nan if m.sog is None else m.sog
        cols["cog"][i] = nan if m.cog is None else m.cog
    return cols


def is_day_file(path: Path) -> bool:
    return DAY_FILE_RE.match(path.stem) is not None


# -- timestamps ------------------------------------------------------------------

def _parse_epoch(text: str) -> float:
    return float(text)


def _parse_iso(text: str) -> float:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _timestamp_parser(sample: str):
    try:
        float(sample)
        return _parse_epoch
    except ValueError:
        return _parse_iso


# -- reading ---------------------------------------------------------------------

def _open_csv(path: Path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise SchemaMismatch(f"{path}: empty file without header") from None
    except (UnicodeDecodeError, csv.Error) as exc:
        fh.close()
        raise FileUnreadable(f"{path}: {exc}") from exc
    if tuple(h.strip() for h in header) != RAW_COLUMNS:
        fh.close()
        raise SchemaMismatch(f"{path}: header {header} != {list(RAW_COLUMNS)}")
    return fh, reader


def _optional_float(text: str):
    text = text.strip()
    if not text:
        return None
    return float(text)


def iter_records(path: Path, skipped: Counter, tally: Counter | None = None) -> Iterator[Record]:
    """Yield a :class:`Record` for every decoded message of a day file.

    ``kind`` is ``"dynamic"`` or ``"static"``; ``raw`` holds the sentence(s)
    of the message.  Undecodable rows are counted in ``skipped`` by reason;
    ``tally`` receives the number of data ``rows`` and of ``partial`` rows
    (fragments that completed no message).
    """
    tally = Counter() if tally is None else tally
    fh, reader = _open_csv(Path(path))
    buf = FragmentBuffer()
    parse_ts = None
    with fh:
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            tally["rows"] += 1
            if len(row) != len(RAW_COLUMNS):
                skipped["bad_row"] += 1
                continue
            ts_text, _, lat_text, lon_text, raw, _, originator = row
            if parse_ts is None:
                parse_ts = _timestamp_parser(ts_text.strip())
            try:
                recv_time = parse_ts(ts_text)
            except ValueError:
                skipped["bad_timestamp"] += 1
                continue
            try:
                lat = _optional_float(lat_text)
                lon = _optional_float(lon_text)
            except ValueError:
                skipped["bad_position"] += 1
                continue
            sentences = raw.split()
            if not sentences:
                skipped["empty_raw_message"] += 1
                continue
            msg = None
            try:
                if len(sentences) == 1 and ",1,1," in sentences[0][:12]:
                    try:
                        msg = decode_line(sentences[0], recv_time, originator)
                    except UnsupportedMessageType:
                        pass  # single-sentence static report, handled below
                if msg is None:
                    parsed = [parse_sentence(s) for s in sentences]
                    payloads = [b for b in (buf.push(p) for p in parsed) if b is not None]
                    whole = len(payloads) == 1 and len(parsed) == parsed[-1].fragment_count
            except DecodeError as exc:
                skipped[type(exc).__name__] += 1
                continue
            if msg is not None:
                yield Record("dynamic", _with_columns(msg, lat, lon), raw.strip(), recv_time, originator)
                continue
            if not payloads:
                tally["partial"] += 1
            for bits in payloads:
                text = raw.strip() if whole else " ".join(to_sentences(bits))
                mtype = bits.msg_type
                try:
                    if mtype in DYNAMIC_TYPES:
                        m = decode_dynamic(bits, recv_time, originator)
                        yield Record("dynamic", _with_columns(m, lat, lon), text, recv_time, originator)
                    elif mtype in STATIC_TYPES:
                        yield Record("static", decode_static(bits), text, recv_time, originator)
                    else:
                        skipped["unsupported_type"] += 1
                except DecodeError as exc:
                    skipped[type(exc).__name__] += 1


def _with_columns(msg: AisMessage, lat, lon) -> AisMessage:
    # explicit coordinate columns win over the payload
    if lat is None and lon is None:
        return msg
    return make_message(msg.recv_time, msg.mmsi,
                        msg.lat if lat is None else lat,
                        msg.lon if lon is None else lon,
                        msg.sog, msg.cog, msg.msg_type, msg.originator, msg.second)


def read_day_files(dynamic_paths: Iterable[os.PathLike | str],
                   static_paths: Iterable[os.PathLike | str] = ()) -> ReadResult:
    """Read dynamic and static day files.

    Messages come back sorted by reception time (stable across files, which
    are read in name order).
    """
    skipped: Counter = Counter()
    messages: list[AisMessage] = []
    statics: list[VesselStatic] = []
    for path in sorted(map(Path, dynamic_paths)):
        for kind, rec, *_ in iter_day_file(path, skipped):
            (messages if kind == "dynamic" else statics).append(rec)
    for path in sorted(map(Path, static_paths)):
        for kind, rec, *_ in iter_day_file(path, skipped):
            (messages if kind == "dynamic" else statics).append(rec)
    messages.sort(key=lambda m: m.recv_time)
    return ReadResult(messages, statics, skipped)


def static_map(statics: Iterable[VesselStatic]) -> dict[int, VesselStatic]:
    """Collapse repeated static reports: the last known value of each field wins."""
    out: dict[int, VesselStatic] = {}
    for s in statics:
        prev = out.get(s.mmsi)
        if prev is None:
            out[s.mmsi] = s
        else:
            out[s.mmsi] = VesselStatic(
                s.mmsi,
                s.ship_length if s.ship_length is not None else prev.ship_length,
                s.ship_type if s.ship_type is not None else prev.ship_type,
            )
    return out


# -- NMEA text files with tag blocks --------------------------------------------

def parse_tagged_line(line: str) -> tuple[float | None, str, str]:
    r"""Split ``\c:<unix>,s:<station>*hh\!AIVDM,...`` into its parts.

    Returns ``(timestamp or None, station, sentence)``.
    """
    line = line.strip()
    if not line.startswith("\\"):
        return None, "", line
    end = line.find("\\", 1)
    if end < 0:
        raise DecodeError("unterminated tag block")
    tag, sentence = line[1:end], line[end + 1:]
    star = tag.rfind("*")
    if star >= 0:
        try:
            if int(tag[star + 1:], 16) != nmea_checksum(tag[:star]):
                raise DecodeError("tag block checksum mismatch")
        except ValueError:
            raise DecodeError("tag block checksum is not hexadecimal") from None
        tag = tag[:star]
    ts, station = None, ""
    for item in tag.split(","):
        key, _, value = item.partition(":")
        if key == "c":
            ts = float(value)
            if ts > 1e11:  # milliseconds
                ts /= 1000.0
        elif key == "s":
            station = value
    return ts, station, sentence


def iter_nmea_records(path: Path, skipped: Counter, tally: Counter | None = None) -> Iterator[Record]:
    """Like :func:`iter_records` for NMEA text with tag blocks.

    Continuation fragments without a tag block inherit the time and station of
    the previous tagged line.
    """
    tally = Counter() if tally is None else tally
    try:
        fh = open(path, encoding="utf-8", errors="replace")
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    buf = FragmentBuffer()
    ts, station = None, ""
    with fh:
        for line in fh:
            if not line.strip():
                continue
            tally["rows"] += 1
            try:
                t, st, sentence = parse_tagged_line(line)
                if t is not None:
                    ts, station = t, st
                if ts is None:
                    skipped["no_timestamp"] += 1
                    continue
                bits = buf.push(parse_sentence(sentence))
            except (DecodeError, ValueError) as exc:
                skipped[type(exc).__name__] += 1
                continue
            if bits is None:
                tally["partial"] += 1
                continue
            text = sentence if sentence[6:11] == ",1,1," else " ".join(to_sentences(bits))
            try:
                mtype = bits.msg_type
                if mtype in DYNAMIC_TYPES:
                    yield Record("dynamic", decode_dynamic(bits, ts, station), text, ts, station)
                elif mtype in STATIC_TYPES:
                    yield Record("static", decode_static(bits), text, ts, station)
                else:
                    skipped["unsupported_type"] += 1
            except DecodeError as exc:
                skipped[type(exc).__name__] += 1


def iter_day_file(path: os.PathLike | str, skipped: Counter,
                  tally: Counter | None = None) -> Iterator[Record]:
    path = Path(path)
    if path.suffix.lower() in NMEA_SUFFIXES:
        return iter_nmea_records(path, skipped, tally)
    return iter_records(path, skipped, tally)


# -- dedupe & grouping --------------------------------------------------------------

def dedupe(messages: Sequence[AisMessage], f_min: float = F_MIN_SECONDS) -> list[AisMessage]:
    """Drop copies of one report received by several stations within ``f_min``.

    Two messages are copies when their decoded content (MMSI, type, position,
    SOG, COG) is equal and their originators differ.  The earliest copy
    survives; equal times are broken by originator name.  Output keeps the
    input order.
    """
    order = sorted(range(len(messages)),
                   key=lambda i: (messages[i].recv_time, messages[i].originator, i))
    recent: dict[tuple, list[AisMessage]] = defaultdict(list)
    keep = [False] * len(messages)
    for i in order:
        m = messages[i]
        kept = recent[m.content_key()]
        while kept and m.recv_time - kept[0].recv_time >= f_min:
            kept.pop(0)
        if any(k.originator != m.originator for k in kept):
            continue
        kept.append(m)
        keep[i] = True
    return [m for m, k in zip(messages, keep) if k]


def group_by_mmsi(messages: Iterable[AisMessage]) -> list[MessageStream]:
    """One time-ordered stream per MMSI, streams ordered by MMSI."""
    groups: dict[int, list[AisMessage]] = defaultdict(list)
    for m in messages:
        groups[m.mmsi].append(m)
    streams = []
    for mmsi in sorted(groups):
        msgs = groups[mmsi]
        msgs.sort(key=lambda m: m.recv_time)
        streams.append(MessageStream(mmsi, msgs))
    return streams


def day_files(directory: os.PathLike | str, suffixes: Sequence[str] = (".csv",)) -> list[Path]:
    """Files named ``YYYY_MM_DD<suffix>`` in ``directory``, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileUnreadable(f"{directory} is not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix in suffixes and is_day_file(p))

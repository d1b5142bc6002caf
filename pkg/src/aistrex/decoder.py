"""NMEA 0183 ``!AIVDM``/``!AIVDO`` framing and AIS payload decoding.

Position reports (types 1, 2, 3 and the Class-B type 18) decode into
:class:`AisMessage`; static voyage data (type 5 and both parts of type 24)
decode into :class:`VesselStatic`.  Field layouts follow ITU-R M.1371.

Payloads are carried around as :class:`BitPayload`, a big integer plus its
bit length, so that field extraction is a shift and a mask.
"""

from __future__ import annotations

from collections import OrderedDict
from functools import reduce
from operator import xor
from typing import Iterable, NamedTuple, Sequence

from .errors import (
    ChecksumMismatch,
    DecodeError,
    DuplicateFragment,
    MalformedFraming,
    MissingFragment,
    OutOfRangeField,
    TruncatedPayload,
    UnknownTalker,
    UnsupportedMessageType,
)

TALKERS = ("AIVDM", "AIVDO")
DYNAMIC_TYPES = frozenset({1, 2, 3, 18})
STATIC_TYPES = frozenset({5, 24})

# "not available" encodings
LAT_NA_RAW = 91 * 600_000
LON_NA_RAW = 181 * 600_000
SOG_NA_RAW = 1023
COG_NA_RAW = 3600
SOG_NOT_AVAILABLE = 102.3

MAX_SHIP_LENGTH = 500.0

# 6-bit armoring: '0'..'W' -> 0..39, '`'..'w' -> 40..63
_ARMOR_CHARS = [chr(v + 48 if v < 40 else v + 56) for v in range(64)]
_DEARMOR_BITS = str.maketrans({c: format(v, "06b") for v, c in enumerate(_ARMOR_CHARS)})
_SIXBIT_TEXT = "@ABCDEFGHIJKLMNOPQRSTUVWXYZ[\\]^_ !\"#$%&'()*+,-./0123456789:;<=>?"


class RawSentence(NamedTuple):
    talker: str
    fragment_count: int
    fragment_index: int
    sequence_id: int | None
    channel: str | None
    payload: str
    fill_bits: int
    checksum: int

    def body(self) -> str:
        """Everything between ``!`` and ``*``, re-serialized from the fields."""
        seq = "" if self.sequence_id is None else str(self.sequence_id)
        chan = self.channel or ""
        return (f"{self.talker},{self.fragment_count},{self.fragment_index},"
                f"{seq},{chan},{self.payload},{self.fill_bits}")

    def to_line(self) -> str:
        return f"!{self.body()}*{self.checksum:02X}"


class BitPayload(NamedTuple):
    value: int
    length: int

    def uint(self, start: int, width: int) -> int:
        return (self.value >> (self.length - start - width)) & ((1 << width) - 1)

    def sint(self, start: int, width: int) -> int:
        v = self.uint(start, width)
        return v - (1 << width) if v >> (width - 1) else v

    def text(self, start: int, width: int) -> str:
        chars = [_SIXBIT_TEXT[self.uint(start + i, 6)] for i in range(0, width - width % 6, 6)]
        return "".join(chars).rstrip("@ ").strip()

    @property
    def msg_type(self) -> int:
        return self.uint(0, 6) if self.length >= 6 else 0


class AisMessage(NamedTuple):
    """One dynamic position report.

    ``lat``, ``lon``, ``sog`` and ``cog`` are ``None`` when the transmitter
    sent the protocol's "not available" value.  ``second`` is the UTC second
    stamped by the transmitter (``None`` if 60..63).
    """

    recv_time: float
    mmsi: int
    msg_type: int
    lat: float | None
    lon: float | None
    sog: float | None
    cog: float | None
    originator: str = ""
    second: int | None = None

    @property
    def position_available(self) -> bool:
        return self.lat is not None and self.lon is not None

    def content_key(self) -> tuple:
        return (self.mmsi, self.msg_type, self.lat, self.lon, self.sog, self.cog)


class VesselStatic(NamedTuple):
    mmsi: int
    ship_length: float | None
    ship_type: int | None


def make_message(recv_time: float, mmsi: int, lat, lon, sog, cog,
                 msg_type: int = 1, originator: str = "",
                 second: int | None = None) -> AisMessage:
    """Build an :class:`AisMessage`, mapping numeric sentinels to ``None``."""
    if lat is not None and abs(lat - 91.0) < 1e-9:
        lat = None
    if lon is not None and abs(lon - 181.0) < 1e-9:
        lon = None
    if sog is not None and abs(sog - SOG_NOT_AVAILABLE) < 1e-9:
        sog = None
    if cog is not None and cog >= 360.0:
        cog = None
    return AisMessage(float(recv_time), int(mmsi), int(msg_type), lat, lon, sog, cog,
                      originator, second)


# -- framing -----------------------------------------------------------------

_FOLD_MASKS = [(1 << (8 * w)) - 1 for w in (64, 32, 16, 8, 4, 2, 1)]


def nmea_checksum(body: str) -> int:
    """XOR of all characters of ``body`` (the text between ``!`` and ``*``)."""
    raw = body.encode("ascii")
    if len(raw) > 128:
        return reduce(xor, raw, 0)
    # fold the bytes onto themselves in halves; exact for up to 128 bytes
    x = int.from_bytes(raw, "little")
    for w, mask in zip((512, 256, 128, 64, 32, 16, 8), _FOLD_MASKS):
        x = (x >> w) ^ (x & mask)
    return x


def parse_sentence(line: str) -> RawSentence:
    line = line.strip()
    if not line.startswith("!"):
        raise MalformedFraming(f"sentence must start with '!': {line[:20]!r}")
    talker = line[1:6]
    if talker not in TALKERS:
        raise UnknownTalker(talker)
    star = line.rfind("*")
    if star < 0 or len(line) - star != 3:
        raise MalformedFraming("missing or malformed checksum field")
    body = line[1:star]
    try:
        checksum = int(line[star + 1:], 16)
    except ValueError:
        raise MalformedFraming("checksum is not hexadecimal") from None
    fields = body.split(",")
    if len(fields) != 7:
        raise MalformedFraming(f"expected 7 fields, got {len(fields)}")
    if nmea_checksum(body) != checksum:
        raise ChecksumMismatch(f"computed {nmea_checksum(body):02X}, sentence says {checksum:02X}")
    _, count, index, seq, chan, payload, fill = fields
    try:
        count_i, index_i, fill_i = int(count), int(index), int(fill)
        seq_i = int(seq) if seq else None
    except ValueError:
        raise MalformedFraming("non-numeric fragment fields") from None
    if not (1 <= index_i <= count_i) or not (0 <= fill_i <= 5):
        raise MalformedFraming("fragment index/count or fill bits out of range")
    return RawSentence(talker, count_i, index_i, seq_i, chan or None, payload, fill_i, checksum)


def dearmor(payload: str, fill_bits: int = 0) -> BitPayload:
    """Convert 6-bit armored text into a :class:`BitPayload`."""
    if not payload:
        return BitPayload(0, 0)
    try:
        value = int(payload.translate(_DEARMOR_BITS), 2)
    except ValueError:
        raise MalformedFraming("payload contains characters outside the 6-bit armor set") from None
    return BitPayload(value >> fill_bits, 6 * len(payload) - fill_bits)


def armor(bits: BitPayload) -> tuple[str, int]:
    """Inverse of :func:`dearmor`: returns ``(payload, fill_bits)``."""
    fill = (-bits.length) % 6
    value = bits.value << fill
    n = (bits.length + fill) // 6
    chars = [_ARMOR_CHARS[(value >> (6 * (n - 1 - i))) & 0x3F] for i in range(n)]
    return "".join(chars), fill


def assemble(fragments: Sequence[RawSentence]) -> BitPayload:
    if not fragments:
        raise MissingFragment("no fragments")
    count = fragments[0].fragment_count
    seq = fragments[0].sequence_id
    by_index: dict[int, RawSentence] = {}
    for frag in fragments:
        if frag.fragment_count != count or frag.sequence_id != seq:
            raise MalformedFraming("fragments belong to different messages")
        if frag.fragment_index in by_index:
            raise DuplicateFragment(f"fragment {frag.fragment_index} of {count} seen twice")
        by_index[frag.fragment_index] = frag
    missing = [i for i in range(1, count + 1) if i not in by_index]
    if missing:
        raise MissingFragment(f"missing fragment(s) {missing} of {count}")
    text = "".join(by_index[i].payload for i in range(1, count + 1))
    return dearmor(text, by_index[count].fill_bits)


class FragmentBuffer:
    """Reassembles interleaved multipart messages.

    Partial messages are keyed by ``(channel, sequence_id)``; at most
    ``capacity`` partials are held and the least recently touched one is
    evicted first.
    """

    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self._partials: OrderedDict[tuple, list[RawSentence]] = OrderedDict()
        self.evicted = 0

    def __len__(self) -> int:
        return len(self._partials)

    def push(self, sentence: RawSentence) -> BitPayload | None:
        """Add one fragment; return the assembled payload once complete."""
        if sentence.fragment_count == 1:
            return dearmor(sentence.payload, sentence.fill_bits)
        key = (sentence.channel, sentence.sequence_id)
        parts = self._partials.get(key)
        if parts is None or sentence.fragment_index == 1:
            # a first fragment always starts a fresh message under this key
            parts = []
            self._partials[key] = parts
        elif any(p.fragment_index == sentence.fragment_index for p in parts):
            del self._partials[key]
            raise DuplicateFragment(f"fragment {sentence.fragment_index} repeated for {key}")
        parts.append(sentence)
        self._partials.move_to_end(key)
        if len(parts) == sentence.fragment_count:
            del self._partials[key]
            return assemble(parts)
        while len(self._partials) > self.capacity:
            self._partials.popitem(last=False)
            self.evicted += 1
        return None


# -- payload decoding -----------------------------------------------------------

def decode_dynamic(payload: BitPayload, recv_time: float = 0.0,
                   originator: str = "") -> AisMessage:
    v, n = payload
    if n < 6:
        raise TruncatedPayload(f"{n} bits is shorter than the type field")
    msg_type = v >> (n - 6)
    if msg_type == 0:
        raise TruncatedPayload("message type 0 is undefined")
    if msg_type not in DYNAMIC_TYPES:
        raise UnsupportedMessageType(f"type {msg_type} is not a position report")
    # Class B (18) sits 4 bits earlier than Class A for all fields after mmsi
    off = 4 if msg_type == 18 else 0
    sog_at = 50 - off
    if n < 143 - off:
        raise TruncatedPayload(f"type {msg_type} needs {143 - off} bits, got {n}")
    mmsi = (v >> (n - 38)) & 0x3FFFFFFF
    sog_raw = (v >> (n - sog_at - 10)) & 0x3FF
    lon_raw = (v >> (n - sog_at - 39)) & 0xFFFFFFF
    lat_raw = (v >> (n - sog_at - 66)) & 0x7FFFFFF
    cog_raw = (v >> (n - sog_at - 78)) & 0xFFF
    sec_raw = (v >> (n - sog_at - 93)) & 0x3F
    if lon_raw & 0x8000000:
        lon_raw -= 0x10000000
    if lat_raw & 0x4000000:
        lat_raw -= 0x8000000

    if lat_raw == LAT_NA_RAW:
        lat = None
    elif -54_000_000 <= lat_raw <= 54_000_000:
        lat = lat_raw / 600000.0
    else:
        raise OutOfRangeField(f"latitude raw value {lat_raw}")
    if lon_raw == LON_NA_RAW:
        lon = None
    elif -108_000_000 <= lon_raw <= 108_000_000:
        lon = lon_raw / 600000.0
    else:
        raise OutOfRangeField(f"longitude raw value {lon_raw}")
    if cog_raw == COG_NA_RAW:
        cog = None
    elif cog_raw < COG_NA_RAW:
        cog = cog_raw / 10.0
    else:
        raise OutOfRangeField(f"course raw value {cog_raw}")
    sog = None if sog_raw == SOG_NA_RAW else sog_raw / 10.0
    return AisMessage(recv_time, mmsi, msg_type, lat, lon, sog, cog, originator,
                      sec_raw if sec_raw < 60 else None)


def _ship_length(mmsi: int, bow: int, stern: int) -> float | None:
    length = float(bow + stern)
    if length <= 0 or length >= MAX_SHIP_LENGTH:
        return None
    return length


def decode_static(payload: BitPayload) -> VesselStatic:
    msg_type = payload.msg_type
    if msg_type not in STATIC_TYPES:
        if msg_type == 0:
            raise TruncatedPayload("message type 0 is undefined")
        raise UnsupportedMessageType(f"type {msg_type} carries no static data")
    if payload.length < 40:
        raise TruncatedPayload(f"static report of {payload.length} bits")
    mmsi = payload.uint(8, 30)
    if msg_type == 5:
        if payload.length < 270:
            raise TruncatedPayload(f"type 5 needs 270 bits for dimensions, got {payload.length}")
        ship_type = payload.uint(232, 8) or None
        length = _ship_length(mmsi, payload.uint(240, 9), payload.uint(249, 9))
        return VesselStatic(mmsi, length, ship_type)
    # type 24: part A carries only the name, part B type and dimensions
    if payload.uint(38, 2) == 0:
        return VesselStatic(mmsi, None, None)
    if payload.length < 162:
        raise TruncatedPayload(f"type 24B needs 162 bits, got {payload.length}")
    ship_type = payload.uint(40, 8) or None
    if str(mmsi).startswith("98"):
        # auxiliary craft: the dimension bits hold the mothership MMSI
        return VesselStatic(mmsi, None, ship_type)
    return VesselStatic(mmsi, _ship_length(mmsi, payload.uint(132, 9), payload.uint(141, 9)), ship_type)


def decode_line(line: str, recv_time: float = 0.0, originator: str = "") -> AisMessage:
    """Parse and decode a single-fragment position report sentence.

    Hot path of bulk decoding.  Anything unusual is re-parsed by
    :func:`parse_sentence` so that the raised error is the precise one.
    """
    star = line.rfind("*")
    body = line[1:star]
    fields = body.split(",")
    try:
        ok = (line[0] == "!" and len(fields) == 7 and fields[0] in TALKERS
              and fields[1] == "1" and fields[2] == "1" and len(line) - star == 3
              and int(line[star + 1:], 16) == nmea_checksum(body))
    except (ValueError, IndexError):
        ok = False
    if not ok:
        s = parse_sentence(line)
        if s.fragment_count != 1:
            raise MissingFragment("multipart sentence passed to decode_line")
        return decode_dynamic(dearmor(s.payload, s.fill_bits), recv_time, originator)
    fill = fields[6]
    if fill not in ("0", "1", "2", "3", "4", "5"):
        raise MalformedFraming(f"fill bits {fill!r}")
    return decode_dynamic(dearmor(fields[5], int(fill)), recv_time, originator)


def decode_sentences(lines: Iterable[str]) -> tuple[BitPayload, ...]:
    """Assemble all complete payloads contained in ``lines`` (in order)."""
    buf = FragmentBuffer()
    out = []
    for line in lines:
        bits = buf.push(parse_sentence(line))
        if bits is not None:
            out.append(bits)
    return tuple(out)


# -- encoding (fixtures, synthetic data) ------------------------------------------

class _BitWriter:
    def __init__(self):
        self.value = 0
        self.length = 0

    def put(self, value: int, width: int) -> "_BitWriter":
        self.value = (self.value << width) | (value & ((1 << width) - 1))
        self.length += width
        return self

    def put_text(self, text: str, width: int) -> "_BitWriter":
        text = text.upper()[: width // 6].ljust(width // 6, "@")
        for ch in text:
            self.put(_SIXBIT_TEXT.index(ch) if ch in _SIXBIT_TEXT else 0, 6)
        return self

    def payload(self) -> BitPayload:
        return BitPayload(self.value, self.length)


def encode_position(msg: AisMessage, status: int = 0) -> BitPayload:
    """Encode an :class:`AisMessage` as a 168-bit type 1/2/3/18 payload."""
    lat = LAT_NA_RAW if msg.lat is None else round(msg.lat * 600000)
    lon = LON_NA_RAW if msg.lon is None else round(msg.lon * 600000)
    sog = SOG_NA_RAW if msg.sog is None else min(round(msg.sog * 10), 1022)
    cog = COG_NA_RAW if msg.cog is None else round(msg.cog * 10) % 3600
    second = 60 if msg.second is None else msg.second
    w = _BitWriter().put(msg.msg_type, 6).put(0, 2).put(msg.mmsi, 30)
    if msg.msg_type == 18:
        w.put(0, 8)
    elif msg.msg_type in (1, 2, 3):
        w.put(status, 4).put(-128, 8)
    else:
        raise UnsupportedMessageType(msg.msg_type)
    w.put(sog, 10).put(0, 1).put(lon, 28).put(lat, 27).put(cog, 12).put(511, 9).put(second, 6)
    w.put(0, 168 - w.length)
    return w.payload()


def encode_static5(mmsi: int, to_bow: int, to_stern: int, ship_type: int = 0,
                   name: str = "", callsign: str = "") -> BitPayload:
    w = _BitWriter().put(5, 6).put(0, 2).put(mmsi, 30).put(0, 2).put(0, 30)
    w.put_text(callsign, 42).put_text(name, 120).put(ship_type, 8)
    w.put(to_bow, 9).put(to_stern, 9).put(0, 6).put(0, 6).put(1, 4)
    w.put(0, 20).put(0, 8).put_text("", 120).put(0, 1).put(0, 1)
    return w.payload()


def to_sentences(bits: BitPayload, channel: str = "A", sequence_id: int | None = None,
                 talker: str = "AIVDM", max_chars: int = 60) -> list[str]:
    """Frame a payload as one or more checksummed NMEA sentences."""
    text, fill = armor(bits)
    chunks = [text[i:i + max_chars] for i in range(0, len(text), max_chars)] or [""]
    if len(chunks) > 1 and sequence_id is None:
        sequence_id = 0
    lines = []
    for i, chunk in enumerate(chunks, start=1):
        s = RawSentence(talker, len(chunks), i, sequence_id if len(chunks) > 1 else None,
                        channel, chunk, fill if i == len(chunks) else 0, 0)
        lines.append(s._replace(checksum=nmea_checksum(s.body())).to_line())
    return lines


__all__ = [
    "AisMessage", "BitPayload", "DecodeError", "FragmentBuffer", "RawSentence",
    "VesselStatic", "armor", "assemble", "dearmor", "decode_dynamic", "decode_line",
    "decode_sentences", "decode_static", "encode_position", "encode_static5",
    "make_message", "nmea_checksum", "parse_sentence", "to_sentences",
]

"""ABC tune parsing (the subset folk corpora use) and MIDI file output.

The parser recognizes header lines (X index, T title, M meter, L default
note length, K key) followed by body lines of notes A-G/a-g with
accidentals ^ _ =, octave marks ' and ,, duration suffixes, rests z, and
bar lines.  Rendering emits a format-0 Standard MIDI File: big-endian
chunk headers, 480 ticks per quarter note, delta times as variable
length quantities.
"""

import re
from dataclasses import dataclass, field
from fractions import Fraction

TICKS_PER_QUARTER = 480
DEFAULT_TEMPO = 500_000  # microseconds per quarter note (120 BPM)
NOTE_VELOCITY = 90

# Natural-note semitone offsets within an octave; uppercase C sits at
# middle C (MIDI 60), lowercase an octave up.
_LETTER_SEMITONE = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_SHARP_ORDER = "FCGDAEB"
_FLAT_ORDER = "BEADGCF"
# Position of each natural tonic on the circle of fifths (C = 0 sharps).
_CIRCLE_POS = {"C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5, "F": -1}
_MODE_SHIFT = {
    "major": 0, "maj": 0, "": 0,
    "mixolydian": -1, "mix": -1,
    "dorian": -2, "dor": -2,
    "minor": -3, "min": -3, "m": -3,
    "phrygian": -4, "phr": -4,
    "aeolian": -3, "aeo": -3,
    "lydian": 1, "lyd": 1,
    "locrian": -5, "loc": -5,
}


class AbcError(Exception):
    """Raised for tunes the parser cannot accept at all."""


@dataclass(frozen=True)
class NoteEvent:
    letter: str            # A-G, uppercase
    accidental: str        # "^", "_", "=" or "" (none)
    octave_shift: int      # octaves relative to the uppercase register
    duration: Fraction     # in whole-note units

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("note duration must be positive")


@dataclass(frozen=True)
class Rest:
    duration: Fraction


@dataclass(frozen=True)
class BarLine:
    kind: str  # "|", "|:", ":|"


@dataclass
class TuneAst:
    headers: dict
    events: list
    diagnostics: list = field(default_factory=list)  # (line_no, message)

    @property
    def meter(self) -> str:
        return self.headers.get("M", "4/4")

    @property
    def unit_length(self) -> Fraction:
        raw = self.headers.get("L")
        if raw is None:
            return Fraction(1, 8)
        m = re.fullmatch(r"(\d+)/(\d+)", raw.strip())
        if not m:
            raise AbcError(f"unparseable L: header {raw!r}")
        return Fraction(int(m.group(1)), int(m.group(2)))


_HEADER_RE = re.compile(r"^([A-Za-z]):(.*)$")
_TOKEN_RE = re.compile(
    r"""(?P<note>[\^_=]?[A-Ga-g][',]*(?P<ndur>\d+/\d+|/\d+|\d+|/)?)
      | (?P<rest>z(?P<rdur>\d+/\d+|/\d+|\d+|/)?)
      | (?P<bar>\|:|:\||\|)
      | (?P<space>[ \t]+)
    """,
    re.VERBOSE,
)


def tokenize_body_line(line: str):
    """Longest-match tokens plus (offset, char) pairs for unknown chars."""
    tokens = []
    unknown = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            unknown.append((pos, line[pos]))
            pos += 1
            continue
        for kind in ("note", "rest", "bar"):
            if m.group(kind) is not None:
                tokens.append((kind, m))
                break
        pos = m.end()
    return tokens, unknown


def _parse_duration(suffix, unit: Fraction) -> Fraction:
    """Duration suffix times the default note length L, in whole notes."""
    if not suffix:
        return unit
    if suffix == "/":
        return unit / 2
    if suffix.startswith("/"):
        return unit / int(suffix[1:])
    if "/" in suffix:
        num, den = suffix.split("/")
        return unit * Fraction(int(num), int(den))
    return unit * int(suffix)


def parse_tune(text: str) -> TuneAst:
    """Parse one tune into headers and a timed event list.

    Unknown body characters are skipped and reported in
    ast.diagnostics; a missing K: header or an empty body is an error.
    """
    headers = {}
    body_lines = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _HEADER_RE.match(line)
        if m and not body_lines:
            headers[m.group(1)] = m.group(2).strip()
        else:
            body_lines.append((line_no, line))
    if "K" not in headers:
        raise AbcError("tune has no K: (key) header")
    if not body_lines:
        raise AbcError("tune has no body lines")

    ast = TuneAst(headers=headers, events=[])
    unit = ast.unit_length
    for line_no, line in body_lines:
        tokens, unknown = tokenize_body_line(line)
        for offset, ch in unknown:
            ast.diagnostics.append((line_no, f"unknown character {ch!r} at column {offset + 1}"))
        for kind, m in tokens:
            if kind == "note":
                raw = m.group("note")
                accidental = raw[0] if raw[0] in "^_=" else ""
                rest = raw[len(accidental):]
                letter = rest[0]
                shift = 1 if letter.islower() else 0
                marks = rest[1:].rstrip("0123456789/")
                shift += marks.count("'") - marks.count(",")
                ast.events.append(NoteEvent(
                    letter=letter.upper(),
                    accidental=accidental,
                    octave_shift=shift,
                    duration=_parse_duration(m.group("ndur"), unit),
                ))
            elif kind == "rest":
                ast.events.append(Rest(duration=_parse_duration(m.group("rdur"), unit)))
            elif kind == "bar":
                ast.events.append(BarLine(kind=m.group("bar")))
    return ast


def key_signature(key_text: str) -> dict:
    """Map a K: header value to {letter: semitone offset} for the key.

    Sharps and flats follow the circle of fifths; modes shift the count
    (mixolydian -1, dorian -2, minor -3, phrygian -4, lydian +1,
    locrian -5 relative to major).
    """
    m = re.fullmatch(r"\s*([A-Ga-g])([#b]?)\s*([A-Za-z]*)\s*", key_text or "")
    if not m:
        raise AbcError(f"unparseable key signature {key_text!r}")
    tonic, alter, mode = m.group(1).upper(), m.group(2), m.group(3).lower()
    if mode not in _MODE_SHIFT:
        raise AbcError(f"unknown mode {mode!r} in key {key_text!r}")
    count = _CIRCLE_POS[tonic] + (7 if alter == "#" else -7 if alter == "b" else 0)
    count += _MODE_SHIFT[mode]
    if not -7 <= count <= 7:
        raise AbcError(f"key {key_text!r} needs {abs(count)} accidentals; out of range")
    if count >= 0:
        return {letter: 1 for letter in _SHARP_ORDER[:count]}
    return {letter: -1 for letter in _FLAT_ORDER[:-count]}


_ACCIDENTAL_OFFSET = {"^": 1, "_": -1, "=": 0}


def pitch_to_midi(note: NoteEvent, key: dict, bar_accidentals: dict) -> int:
    """Resolve a note to a MIDI number, honoring key and bar accidentals.

    Uppercase C..B is 60..71, lowercase 72..83, each ' +12 and , -12.
    An explicit accidental overrides the key signature and persists for
    that letter-and-octave until the caller clears bar_accidentals at
    the next bar line.
    """
    slot = (note.letter, note.octave_shift)
    if note.accidental:
        offset = _ACCIDENTAL_OFFSET[note.accidental]
        bar_accidentals[slot] = offset
    elif slot in bar_accidentals:
        offset = bar_accidentals[slot]
    else:
        offset = key.get(note.letter, 0)
    midi = 60 + 12 * note.octave_shift + _LETTER_SEMITONE[note.letter] + offset
    if not 0 <= midi <= 127:
        raise AbcError(f"note {note} resolves to MIDI {midi}, outside 0..127")
    return midi


def duration_to_ticks(duration: Fraction, ticks_per_quarter: int = TICKS_PER_QUARTER) -> int:
    """Whole-note-unit duration to integer ticks (4 quarters per whole)."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    return round(duration * 4 * ticks_per_quarter)


@dataclass
class MidiDoc:
    """Delta-timed event list; events are ("tempo", us), ("on"/"off", pitch),
    ("eot",)."""

    ticks_per_quarter: int = TICKS_PER_QUARTER
    tempo: int = DEFAULT_TEMPO
    track: list = field(default_factory=list)  # (delta_ticks, event tuple)


def build_midi_doc(ast: TuneAst, tempo: int = DEFAULT_TEMPO) -> MidiDoc:
    """Walk the AST once, monophonically: notes sound back to back,
    rests advance time, bar lines reset accidental memory."""
    key = key_signature(ast.headers["K"])
    bar_accidentals = {}
    doc = MidiDoc(tempo=tempo)
    doc.track.append((0, ("tempo", tempo)))
    pending_delta = 0
    for event in ast.events:
        if isinstance(event, NoteEvent):
            pitch = pitch_to_midi(event, key, bar_accidentals)
            ticks = duration_to_ticks(event.duration, doc.ticks_per_quarter)
            doc.track.append((pending_delta, ("on", pitch)))
            doc.track.append((ticks, ("off", pitch)))
            pending_delta = 0
        elif isinstance(event, Rest):
            pending_delta += duration_to_ticks(event.duration, doc.ticks_per_quarter)
        elif isinstance(event, BarLine):
            bar_accidentals.clear()
    doc.track.append((pending_delta, ("eot",)))
    return doc


def encode_vlq(n: int) -> bytes:
    """MIDI variable-length quantity: 7-bit groups, high bit on all but last."""
    if not 0 <= n < 1 << 28:
        raise ValueError(f"VLQ value {n} outside [0, 2^28)")
    groups = [n & 0x7F]
    n >>= 7
    while n:
        groups.append((n & 0x7F) | 0x80)
        n >>= 7
    return bytes(reversed(groups))


def decode_vlq(data: bytes, offset: int = 0):
    """Inverse of encode_vlq; returns (value, next_offset)."""
    value = 0
    for i in range(offset, offset + 4):
        if i >= len(data):
            raise ValueError("truncated VLQ")
        byte = data[i]
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, i + 1
    raise ValueError("VLQ longer than 4 bytes")


def encode_smf(doc: MidiDoc) -> bytes:
    """Serialize to a format-0 SMF (one track, big-endian chunk fields)."""
    body = bytearray()
    for delta, event in doc.track:
        body += encode_vlq(delta)
        if event[0] == "tempo":
            body += b"\xff\x51\x03" + event[1].to_bytes(3, "big")
        elif event[0] == "on":
            body += bytes((0x90, event[1], NOTE_VELOCITY))
        elif event[0] == "off":
            body += bytes((0x80, event[1], 0))
        elif event[0] == "eot":
            body += b"\xff\x2f\x00"
        else:
            raise ValueError(f"unknown event {event!r}")
    header = b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big") \
        + (1).to_bytes(2, "big") + doc.ticks_per_quarter.to_bytes(2, "big")
    return header + b"MTrk" + len(body).to_bytes(4, "big") + bytes(body)


def render_smf(ast: TuneAst, tempo: int = DEFAULT_TEMPO) -> bytes:
    return encode_smf(build_midi_doc(ast, tempo))

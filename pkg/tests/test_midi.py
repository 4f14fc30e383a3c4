"""ABC parsing, pitch/key resolution, VLQ coding, and SMF byte output.

The SMF checks run through an independent minimal reader written here
(its own VLQ decoder, its own chunk walk) so the writer is never graded
against itself.
"""

import os
import re
from fractions import Fraction

import numpy as np
import pytest

from abcgen.midi import (
    AbcError,
    BarLine,
    NoteEvent,
    Rest,
    TICKS_PER_QUARTER,
    build_midi_doc,
    decode_vlq,
    duration_to_ticks,
    encode_vlq,
    key_signature,
    parse_tune,
    pitch_to_midi,
    render_smf,
    tokenize_body_line,
)

FIXTURE_TUNE = "X:1\nL:1/4\nK:C\nCDE|"
GOLDEN_PATH = os.path.join(os.path.dirname(__file__), "fixtures", "golden_cde.mid")


# ---------------------------------------------------------------- reader

def _read_vlq(data: bytes, pos: int):
    """Independent 7-bit VLQ reader (deliberately not the library's)."""
    value = 0
    for _ in range(4):
        byte = data[pos]
        pos += 1
        value = value * 128 + (byte % 128)
        if byte < 128:
            return value, pos
    raise AssertionError("VLQ over 4 bytes")


def _read_smf(blob: bytes):
    """Parse a format-0 SMF into (division, [(abs_ticks, kind, *args)])."""
    assert blob[:4] == b"MThd"
    assert int.from_bytes(blob[4:8], "big") == 6
    fmt = int.from_bytes(blob[8:10], "big")
    ntracks = int.from_bytes(blob[10:12], "big")
    division = int.from_bytes(blob[12:14], "big")
    assert fmt == 0
    assert ntracks == 1
    assert blob[14:18] == b"MTrk"
    length = int.from_bytes(blob[18:22], "big")
    track = blob[22:]
    assert len(track) == length, "chunk length disagrees with actual bytes"
    events = []
    now = 0
    pos = 0
    while pos < len(track):
        delta, pos = _read_vlq(track, pos)
        now += delta
        status = track[pos]
        if status == 0xFF:
            meta = track[pos + 1]
            size, data_pos = _read_vlq(track, pos + 2)
            payload = track[data_pos:data_pos + size]
            events.append((now, "meta", meta, payload))
            pos = data_pos + size
        elif status == 0x90:
            events.append((now, "on", track[pos + 1], track[pos + 2]))
            pos += 3
        elif status == 0x80:
            events.append((now, "off", track[pos + 1], track[pos + 2]))
            pos += 3
        else:
            raise AssertionError(f"unexpected status byte {status:#04x}")
    return division, events


# ----------------------------------------------------------------- parse

class TestTokenize:
    def test_notes_rests_bars_spaces(self):
        tokens, unknown = tokenize_body_line("CD z2 |:c':| G,/")
        assert unknown == []
        kinds = [k for k, _ in tokens]
        assert kinds == ["note", "note", "rest", "bar", "note", "bar",
                         "note"]

    def test_unknown_characters_reported_with_offsets(self):
        _, unknown = tokenize_body_line("C&D*")
        assert unknown == [(1, "&"), (3, "*")]

    def test_repeat_bars_beat_plain_bar(self):
        tokens, _ = tokenize_body_line("|::|")
        assert [m.group("bar") for _, m in tokens] == ["|:", ":|"]

    def test_lone_colon_is_unknown(self):
        _, unknown = tokenize_body_line("C:D")
        assert unknown == [(1, ":")]


class TestParseTune:
    def test_three_quarter_notes(self):
        ast = parse_tune(FIXTURE_TUNE)
        assert ast.headers["K"] == "C"
        assert ast.unit_length == Fraction(1, 4)
        assert ast.events == [
            NoteEvent("C", "", 0, Fraction(1, 4)),
            NoteEvent("D", "", 0, Fraction(1, 4)),
            NoteEvent("E", "", 0, Fraction(1, 4)),
            BarLine("|"),
        ]

    def test_duration_suffixes_default_unit(self):
        # L: absent -> unit 1/8; C2 doubles it, D/ halves it.
        ast = parse_tune("X:1\nK:C\nC2 D/\n")
        assert ast.events[0].duration == Fraction(1, 4)
        assert ast.events[1].duration == Fraction(1, 16)

    def test_fractional_suffixes(self):
        ast = parse_tune("X:1\nL:1/8\nK:C\nC/3 D3/2 z4\n")
        assert ast.events[0].duration == Fraction(1, 24)
        assert ast.events[1].duration == Fraction(3, 16)
        assert ast.events[2] == Rest(Fraction(1, 2))

    def test_octave_marks(self):
        ast = parse_tune("X:1\nK:C\nc' C, c\n")
        assert [e.octave_shift for e in ast.events] == [2, -1, 1]
        assert all(e.letter == "C" for e in ast.events)

    def test_accidental_field(self):
        ast = parse_tune("X:1\nK:C\n^F _B =c\n")
        assert [(e.accidental, e.letter) for e in ast.events] == [
            ("^", "F"), ("_", "B"), ("=", "C")]

    def test_missing_key_rejected(self):
        with pytest.raises(AbcError, match="K:"):
            parse_tune("X:1\nL:1/4\nCDE|\n")

    def test_empty_body_rejected(self):
        with pytest.raises(AbcError, match="body"):
            parse_tune("X:1\nK:C\n")

    def test_unknown_chars_become_diagnostics(self):
        ast = parse_tune("X:1\nK:C\nCD$E|\n")
        assert len(ast.events) == 4  # $ skipped, notes kept
        assert ast.diagnostics == [(3, "unknown character '$' at column 3")]

    def test_header_like_line_after_body_is_body(self):
        ast = parse_tune("X:1\nK:C\nCDE|\nX:2\n")
        assert ast.diagnostics  # X, :, 2 are not body tokens
        assert "X" not in [e.letter for e in ast.events if isinstance(e, NoteEvent)]

    def test_meter_defaults(self):
        assert parse_tune("X:1\nK:C\nC\n").meter == "4/4"
        assert parse_tune("X:1\nM:6/8\nK:C\nC\n").meter == "6/8"

    def test_corpus_tunes_parse_clean(self, corpus):
        for tune in corpus.tunes[:10]:
            ast = parse_tune(tune)
            assert ast.diagnostics == []
            assert any(isinstance(e, NoteEvent) for e in ast.events)

    def test_corpus_note_counts_match_regex_oracle(self, corpus):
        # Independent count: in body lines of this corpus, every A-Ga-g
        # character is exactly one note head.
        for tune in corpus.tunes[:10]:
            lines = tune.splitlines()
            body = []
            for line in lines:
                if body or not re.match(r"^[A-Za-z]:", line):
                    body.append(line)
            expected = sum(len(re.findall(r"[A-Ga-g]", ln)) for ln in body)
            ast = parse_tune(tune)
            got = sum(isinstance(e, NoteEvent) for e in ast.events)
            assert got == expected


# ------------------------------------------------------------ pitch, key

class TestKeySignature:
    # Frozen from the standard circle-of-fifths chart.
    CHART = {
        "C": {}, "G": {"F": 1}, "D": {"F": 1, "C": 1},
        "A": {"F": 1, "C": 1, "G": 1},
        "E": {"F": 1, "C": 1, "G": 1, "D": 1},
        "B": {"F": 1, "C": 1, "G": 1, "D": 1, "A": 1},
        "F": {"B": -1}, "Bb": {"B": -1, "E": -1},
        "Eb": {"B": -1, "E": -1, "A": -1},
        "Am": {}, "Em": {"F": 1}, "Bm": {"F": 1, "C": 1},
        "F#m": {"F": 1, "C": 1, "G": 1},
        "Dm": {"B": -1}, "Gm": {"B": -1, "E": -1},
        "Cm": {"B": -1, "E": -1, "A": -1},
        "Dmix": {"F": 1}, "Ador": {"F": 1}, "Gmix": {},
        "Flyd": {}, "Ephr": {}, "Bloc": {},
        "Amin": {}, "Cmaj": {}, "Caeo": {"B": -1, "E": -1, "A": -1},
    }

    def test_against_frozen_chart(self):
        for text, want in self.CHART.items():
            assert key_signature(text) == want, text

    def test_case_and_whitespace(self):
        assert key_signature(" d ") == {"F": 1, "C": 1}
        assert key_signature("DMaj") == {"F": 1, "C": 1}

    def test_unparseable_rejected(self):
        with pytest.raises(AbcError):
            key_signature("H")
        with pytest.raises(AbcError):
            key_signature("")

    def test_unknown_mode_rejected(self):
        with pytest.raises(AbcError, match="mode"):
            key_signature("Cfoo")

    def test_too_many_accidentals_rejected(self):
        with pytest.raises(AbcError, match="out of range"):
            key_signature("G#")  # 8 sharps
        with pytest.raises(AbcError, match="out of range"):
            key_signature("Fb")  # 8 flats


def _note(letter, accidental="", octave=0):
    return NoteEvent(letter, accidental, octave, Fraction(1, 4))


class TestPitchToMidi:
    def test_registers(self):
        assert pitch_to_midi(_note("C"), {}, {}) == 60
        assert pitch_to_midi(_note("B"), {}, {}) == 71
        assert pitch_to_midi(_note("C", octave=1), {}, {}) == 72
        assert pitch_to_midi(_note("C", octave=-1), {}, {}) == 48
        assert pitch_to_midi(_note("A", octave=2), {}, {}) == 93

    def test_explicit_accidentals(self):
        assert pitch_to_midi(_note("F", "^"), {}, {}) == 66
        assert pitch_to_midi(_note("B", "_"), {}, {}) == 70
        assert pitch_to_midi(_note("C", "="), {}, {}) == 60

    def test_key_signature_applies(self):
        key = key_signature("D")
        assert pitch_to_midi(_note("F"), key, {}) == 66
        assert pitch_to_midi(_note("C"), key, {}) == 61
        assert pitch_to_midi(_note("G"), key, {}) == 67

    def test_natural_overrides_key(self):
        key = key_signature("D")
        bar = {}
        assert pitch_to_midi(_note("F", "="), key, bar) == 65

    def test_accidental_persists_within_bar(self):
        bar = {}
        assert pitch_to_midi(_note("C", "^"), {}, bar) == 61
        assert pitch_to_midi(_note("C"), {}, bar) == 61  # memory
        assert pitch_to_midi(_note("C", octave=1), {}, bar) == 72  # other octave
        bar.clear()  # what a bar line does
        assert pitch_to_midi(_note("C"), {}, bar) == 60

    def test_out_of_range_rejected(self):
        with pytest.raises(AbcError, match="outside"):
            pitch_to_midi(_note("C", octave=6), {}, {})


class TestDurationToTicks:
    def test_worked_examples(self):
        assert duration_to_ticks(Fraction(1, 4)) == 480
        assert duration_to_ticks(Fraction(1, 8)) == 240
        assert duration_to_ticks(Fraction(1, 3)) == 640
        assert duration_to_ticks(Fraction(1, 2)) == 960
        assert duration_to_ticks(Fraction(1, 1)) == 1920

    def test_rounds_to_nearest(self):
        assert duration_to_ticks(Fraction(1, 7)) == round(1920 / 7)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            duration_to_ticks(Fraction(0, 1))

    def test_corpus_bars_sum_to_whole_notes(self, corpus):
        # In 4/4, every complete bar's notes and rests span 1920 ticks.
        checked = 0
        for tune in corpus.tunes:
            ast = parse_tune(tune)
            if ast.meter != "4/4":
                continue
            bar_ticks = 0
            has_content = False
            for event in ast.events:
                if isinstance(event, BarLine):
                    if has_content:
                        assert bar_ticks == 1920
                        checked += 1
                    bar_ticks = 0
                    has_content = False
                else:
                    bar_ticks += duration_to_ticks(event.duration)
                    has_content = True
            if checked >= 40:
                break
        assert checked >= 10


# ------------------------------------------------------------------- vlq

class TestVlq:
    EXACT = {
        0: b"\x00",
        1: b"\x01",
        127: b"\x7f",
        128: b"\x81\x00",
        480: b"\x83\x60",
        16383: b"\xff\x7f",
        16384: b"\x81\x80\x00",
        2097151: b"\xff\xff\x7f",
        2097152: b"\x81\x80\x80\x00",
        (1 << 28) - 1: b"\xff\xff\xff\x7f",
    }

    def test_exact_encodings(self):
        for value, blob in self.EXACT.items():
            assert encode_vlq(value) == blob, value

    def test_roundtrip_sampled_full_range(self):
        rng = np.random.default_rng(0)
        values = sorted(set(int(v) for v in rng.integers(0, 1 << 28, size=2000))
                        | set(self.EXACT))
        for n in values:
            blob = encode_vlq(n)
            assert 1 <= len(blob) <= 4
            assert decode_vlq(blob) == (n, len(blob))
            # cross-check against the reader written in this test file
            assert _read_vlq(blob, 0) == (n, len(blob))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            encode_vlq(-1)
        with pytest.raises(ValueError):
            encode_vlq(1 << 28)

    def test_decode_truncated(self):
        with pytest.raises(ValueError, match="truncated"):
            decode_vlq(b"\x80")
        with pytest.raises(ValueError, match="truncated"):
            decode_vlq(b"")

    def test_decode_overlong(self):
        with pytest.raises(ValueError, match="4 bytes"):
            decode_vlq(b"\xff\xff\xff\xff\x7f")

    def test_decode_with_offset(self):
        blob = b"\x00" + encode_vlq(480) + b"\x07"
        assert decode_vlq(blob, 1) == (480, 3)


# ------------------------------------------------------------------- smf

class TestSmfOutput:
    def test_golden_file_byte_equality(self):
        want = open(GOLDEN_PATH, "rb").read()
        got = render_smf(parse_tune(FIXTURE_TUNE))
        assert got == want

    def test_header_bytes(self):
        blob = render_smf(parse_tune(FIXTURE_TUNE))
        assert blob[:14] == bytes.fromhex("4d546864000000060000000101e0")

    def test_tempo_and_eot_events(self):
        division, events = _read_smf(render_smf(parse_tune(FIXTURE_TUNE)))
        assert division == TICKS_PER_QUARTER
        assert events[0] == (0, "meta", 0x51, b"\x07\xa1\x20")  # 500000 us
        assert events[-1][1:] == ("meta", 0x2F, b"")

    def test_custom_tempo(self):
        blob = render_smf(parse_tune(FIXTURE_TUNE), tempo=400_000)
        _, events = _read_smf(blob)
        assert events[0][3] == (400_000).to_bytes(3, "big")

    def test_rests_become_gaps(self):
        doc = build_midi_doc(parse_tune("X:1\nL:1/4\nK:C\nC z C|\n"))
        assert doc.track == [
            (0, ("tempo", 500_000)),
            (0, ("on", 60)), (480, ("off", 60)),
            (480, ("on", 60)), (480, ("off", 60)),
            (0, ("eot",)),
        ]

    def test_bar_line_resets_accidentals_in_render(self):
        _, events = _read_smf(render_smf(parse_tune("X:1\nL:1/4\nK:C\n^C C|C|\n")))
        pitches = [e[2] for e in events if e[1] == "on"]
        assert pitches == [61, 61, 60]

    def test_corpus_renders_satisfy_smf_invariants(self, corpus):
        for tune in corpus.tunes[:10]:
            ast = parse_tune(tune)
            division, events = _read_smf(render_smf(ast))
            assert division == 480
            times = [t for t, *_ in events]
            assert times == sorted(times), "event times must be monotone"
            ons = [e for e in events if e[1] == "on"]
            offs = [e for e in events if e[1] == "off"]
            assert len(ons) == len(offs)
            assert all(e[3] == 90 for e in ons)
            assert all(e[3] == 0 for e in offs)
            # monophonic: strictly alternating on/off, matching pitches
            notes = [e for e in events if e[1] in ("on", "off")]
            for k in range(0, len(notes), 2):
                assert notes[k][1] == "on"
                assert notes[k + 1][1] == "off"
                assert notes[k][2] == notes[k + 1][2]
            # note count agrees with the AST
            assert len(ons) == sum(isinstance(e, NoteEvent) for e in ast.events)
            # total span agrees with summed AST durations
            total = sum(duration_to_ticks(e.duration) for e in ast.events
                        if not isinstance(e, BarLine))
            assert events[-1][0] == total

"""Standard MIDI File (type 0 and 1) parsing into note events, and a small
type-0 writer used by the synthetic dataset generator.

Note pairing: within each track, a note-on with velocity > 0 opens a note on
its (channel, pitch); the next note-off or velocity-0 note-on on the same
(channel, pitch) closes the earliest open one.  Notes still open at the end of
a track are closed at the track's last tick.  Set-tempo meta events from every
track form one global tempo map.  Sustain pedal (CC64) is ignored.
"""
import struct
import warnings
from bisect import bisect_right

from .rolls import HIGHEST_PITCH, NoteEvent
from . import LOWEST_PITCH

DEFAULT_TEMPO = 500000  # microseconds per quarter note (120 BPM)


class MidiParseError(ValueError):
    pass


class MidiWarning(UserWarning):
    pass


def _read_varlen(data, pos):
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise MidiParseError(f"truncated variable-length quantity at byte {pos}")
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos
    raise MidiParseError(f"variable-length quantity longer than 4 bytes at byte {pos}")


def _encode_varlen(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


class TempoMap:
    """Piecewise-linear tick -> seconds conversion."""

    def __init__(self, division, tempo_events=()):
        self.smpte = division & 0x8000
        if self.smpte:
            fps = 256 - (division >> 8)
            tpf = division & 0xFF
            self.seconds_per_tick = 1.0 / (fps * tpf)
            return
        self.tpq = division
        if self.tpq == 0:
            raise MidiParseError("ticks per quarter note is zero")
        changes = sorted(tempo_events, key=lambda e: e[0])
        ticks = [0]
        tempos = [DEFAULT_TEMPO]
        for tick, tempo in changes:
            if tick == ticks[-1]:
                tempos[-1] = tempo
            else:
                ticks.append(tick)
                tempos.append(tempo)
        starts = [0.0]
        for i in range(1, len(ticks)):
            starts.append(starts[-1] + ticks_to_seconds(ticks[i] - ticks[i - 1], tempos[i - 1], self.tpq))
        self._ticks, self._tempos, self._starts = ticks, tempos, starts

    def seconds(self, tick):
        if self.smpte:
            return tick * self.seconds_per_tick
        i = bisect_right(self._ticks, tick) - 1
        return self._starts[i] + ticks_to_seconds(tick - self._ticks[i], self._tempos[i], self.tpq)


def ticks_to_seconds(ticks, tempo, tpq):
    return ticks * tempo / (1e6 * tpq)


def _parse_track(data, start, end):
    """Return (note messages, tempo events, end tick) for one MTrk body."""
    pos = start
    tick = 0
    running = None
    notes = []  # (tick, is_on, channel, pitch)
    tempos = []
    while pos < end:
        delta, pos = _read_varlen(data, pos)
        tick += delta
        if pos >= end:
            raise MidiParseError(f"truncated event at byte {pos}")
        status = data[pos]
        if status == 0xFF:
            if pos + 2 > end:
                raise MidiParseError(f"truncated meta event at byte {pos}")
            mtype = data[pos + 1]
            length, pos = _read_varlen(data, pos + 2)
            if pos + length > end:
                raise MidiParseError(f"truncated meta event body at byte {pos}")
            body = data[pos:pos + length]
            pos += length
            running = None
            if mtype == 0x51 and length == 3:
                tempos.append((tick, (body[0] << 16) | (body[1] << 8) | body[2]))
            elif mtype == 0x2F:
                break
            continue
        if status in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos + 1)
            if pos + length > end:
                raise MidiParseError(f"truncated sysex at byte {pos}")
            pos += length
            running = None
            continue
        if status & 0x80:
            running = status
            pos += 1
        elif running is None:
            raise MidiParseError(f"data byte without running status at byte {pos}")
        kind = running & 0xF0
        n_data = 1 if kind in (0xC0, 0xD0) else 2
        if pos + n_data > end:
            raise MidiParseError(f"truncated channel message at byte {pos}")
        d = data[pos:pos + n_data]
        pos += n_data
        if kind == 0x90:
            notes.append((tick, d[1] > 0, running & 0x0F, d[0]))
        elif kind == 0x80:
            notes.append((tick, False, running & 0x0F, d[0]))
    return notes, tempos, tick


def parse_smf(data, return_dropped=False):
    """Parse a Standard MIDI File held in ``data`` (bytes) into note events.

    Notes outside MIDI 21-108 and zero-length notes are dropped; the count is
    reported through a :class:`MidiWarning` (and returned when
    ``return_dropped`` is true).  Events are sorted by (onset, pitch, offset).
    """
    data = bytes(data)
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("bad header magic (expected 'MThd')")
    (hlen,) = struct.unpack_from(">I", data, 4)
    if hlen < 6 or 8 + hlen > len(data):
        raise MidiParseError("truncated header chunk")
    fmt, ntracks, division = struct.unpack_from(">HHH", data, 8)
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF type {fmt}")
    pos = 8 + hlen
    tracks = []
    all_tempos = []
    while pos + 8 <= len(data) and len(tracks) < ntracks:
        cid = data[pos:pos + 4]
        (clen,) = struct.unpack_from(">I", data, pos + 4)
        body = pos + 8
        if body + clen > len(data):
            raise MidiParseError(f"truncated track chunk at byte {pos}")
        if cid == b"MTrk":
            msgs, tempos, end_tick = _parse_track(data, body, body + clen)
            tracks.append((msgs, end_tick))
            all_tempos.extend(tempos)
        pos = body + clen
    if len(tracks) < ntracks:
        raise MidiParseError(f"header declares {ntracks} tracks, found {len(tracks)}")

    tmap = TempoMap(division, all_tempos)
    raw = []
    for msgs, end_tick in tracks:
        open_notes = {}
        for tick, is_on, ch, pitch in msgs:
            key = (ch, pitch)
            if is_on:
                open_notes.setdefault(key, []).append(tick)
            elif open_notes.get(key):
                raw.append((pitch, open_notes[key].pop(0), tick))
        for (ch, pitch), ticks in open_notes.items():
            for on in ticks:
                raw.append((pitch, on, end_tick))

    notes = []
    dropped = 0
    for pitch, on, off in raw:
        onset, offset = tmap.seconds(on), tmap.seconds(off)
        if not (LOWEST_PITCH <= pitch <= HIGHEST_PITCH) or not offset > onset:
            dropped += 1
            continue
        notes.append(NoteEvent(pitch, onset, offset))
    notes.sort(key=lambda n: (n.onset, n.pitch, n.offset))
    if dropped:
        warnings.warn(f"dropped {dropped} notes outside the piano range or of zero length",
                      MidiWarning, stacklevel=2)
    if return_dropped:
        return notes, dropped
    return notes


def read_smf(path):
    with open(path, "rb") as fh:
        return parse_smf(fh.read())


def encode_smf(note_ticks, tpq=480, tempo=DEFAULT_TEMPO, channel=0, velocity=80):
    """Type-0 SMF bytes for notes given as ``(pitch, on_tick, off_tick)``.

    At equal ticks note-offs are written before note-ons.
    """
    events = []
    for pitch, on, off in note_ticks:
        events.append((off, 0, pitch))
        events.append((on, 1, pitch))
    events.sort()
    body = bytearray()
    body += b"\x00\xff\x51\x03" + tempo.to_bytes(3, "big")
    last = 0
    for tick, is_on, pitch in events:
        body += _encode_varlen(tick - last)
        last = tick
        if is_on:
            body += bytes([0x90 | channel, pitch, velocity])
        else:
            body += bytes([0x80 | channel, pitch, 0])
    body += b"\x00\xff\x2f\x00"
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, tpq)
    return header + b"MTrk" + struct.pack(">I", len(body)) + bytes(body)

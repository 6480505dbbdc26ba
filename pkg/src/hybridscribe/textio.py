"""Plain-text roll and note files.

Roll file::

    HSROLL hop_ms=10 n_pitches=12 n_frames=3 lowest_pitch=60
    000000000000
    100010010000
    100010010000

One line per frame, one ``0``/``1`` character per pitch, lowest pitch first.

Note file: one ``pitch,onset_s,offset_s`` line per note, sorted by onset then
pitch, times with six decimals.
"""
import numpy as np

from .numeric import DimensionError
from .persistence import atomic_write_bytes
from .rolls import NoteEvent, PianoRoll

ROLL_MAGIC = "HSROLL"


class TextFormatError(ValueError):
    pass


def _num(x):
    return repr(float(x)) if float(x) != int(x) else str(int(x))


def format_roll(roll):
    F = roll.frames
    head = (f"{ROLL_MAGIC} hop_ms={_num(roll.hop_ms)} n_pitches={F.shape[1]} "
            f"n_frames={F.shape[0]} lowest_pitch={roll.lowest_pitch}")
    rows = ["".join("1" if v else "0" for v in row) for row in F]
    return "\n".join([head] + rows) + "\n"


def parse_roll(text):
    lines = text.splitlines()
    if not lines or not lines[0].startswith(ROLL_MAGIC + " "):
        raise TextFormatError("missing roll header")
    try:
        fields = dict(item.split("=", 1) for item in lines[0].split()[1:])
        hop = float(fields["hop_ms"])
        N, T = int(fields["n_pitches"]), int(fields["n_frames"])
        low = int(fields.get("lowest_pitch", 21))
    except (KeyError, ValueError) as exc:
        raise TextFormatError(f"bad roll header: {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != T:
        raise DimensionError(f"roll header announces {T} frames, file has {len(body)}")
    frames = np.zeros((T, N), dtype=np.uint8)
    for t, line in enumerate(body):
        if len(line) != N or set(line) - {"0", "1"}:
            raise TextFormatError(f"frame {t}: expected {N} characters of 0/1")
        frames[t] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0")
    return PianoRoll(frames, hop, low)


def format_notes(notes):
    return "".join(f"{n.pitch},{n.onset:.6f},{n.offset:.6f}\n"
                   for n in sorted(notes, key=lambda n: (n.onset, n.pitch, n.offset)))


def parse_notes(text):
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            p, on, off = line.split(",")
            out.append(NoteEvent(int(p), float(on), float(off)))
        except ValueError as exc:
            raise TextFormatError(f"line {lineno}: {exc}") from exc
    return out


def write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()

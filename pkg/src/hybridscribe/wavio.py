"""RIFF/WAVE reading and writing for 16-bit PCM."""
import struct

import numpy as np

from .frontend import AudioClip

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
# KSDATAFORMAT_SUBTYPE_PCM GUID
_PCM_SUBTYPE = b"\x01\x00\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


class WavError(ValueError):
    pass


class UnsupportedFormatError(WavError):
    pass


class WavParseError(WavError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def parse_wav(data):
    """Decode a 16-bit PCM WAV file held in ``data`` (bytes).

    Samples are divided by 32768; stereo channels are averaged to mono.
    """
    data = bytes(data)
    if len(data) < 12:
        raise WavParseError("file shorter than RIFF header", len(data))
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavParseError("missing RIFF/WAVE magic", 0)
    pos = 12
    fmt = None
    samples = None
    while pos < len(data):
        if pos + 8 > len(data):
            raise WavParseError("truncated chunk header", pos)
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + size > len(data):
            raise WavParseError(f"truncated {chunk_id!r} chunk", pos)
        body = data[body_start:body_start + size]
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavParseError("fmt chunk too short", pos)
            tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", body)
            if tag == WAVE_FORMAT_EXTENSIBLE and size >= 40:
                if body[24:40] != _PCM_SUBTYPE:
                    raise UnsupportedFormatError("extensible WAV with non-PCM subtype")
                tag = WAVE_FORMAT_PCM
            if tag != WAVE_FORMAT_PCM:
                raise UnsupportedFormatError(f"format tag {tag:#06x} is not PCM")
            if bits != 16:
                raise UnsupportedFormatError(f"{bits}-bit PCM is not supported")
            if channels not in (1, 2):
                raise UnsupportedFormatError(f"{channels} channels not supported")
            fmt = (channels, rate)
        elif chunk_id == b"data":
            if fmt is None:
                raise WavParseError("data chunk before fmt chunk", pos)
            channels, _ = fmt
            frame_bytes = 2 * channels
            n = size // frame_bytes
            raw = np.frombuffer(body[:n * frame_bytes], dtype="<i2").astype(np.float64)
            raw = raw.reshape(n, channels)
            samples = raw.mean(axis=1) / 32768.0 if channels == 2 else raw[:, 0] / 32768.0
        # chunks are word aligned
        pos = body_start + size + (size & 1)
    if fmt is None:
        raise WavParseError("no fmt chunk", len(data))
    if samples is None:
        samples = np.zeros(0)
    return AudioClip(float(fmt[1]), samples)


def read_wav(path):
    with open(path, "rb") as fh:
        return parse_wav(fh.read())


def encode_wav(samples, sample_rate):
    """16-bit mono PCM bytes; samples are clipped to [-1, 1) then scaled by 32768."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 32767.0 / 32768.0)
    pcm = np.round(x * 32768.0).astype("<i2").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, WAVE_FORMAT_PCM, 1, int(sample_rate),
                                int(sample_rate) * 2, 2, 16)
    return header + fmt + b"data" + struct.pack("<I", len(pcm)) + pcm


def write_wav(path, samples, sample_rate):
    with open(path, "wb") as fh:
        fh.write(encode_wav(samples, sample_rate))

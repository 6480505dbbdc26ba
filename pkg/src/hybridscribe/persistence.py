"""Binary model archives.

Layout (all integers little-endian, unsigned)::

    offset  size   field
    0       4      magic  b"HSCR"
    4       4      format version (u32, currently 1)
    8       4      kind-tag length K (u32)
    12      K      kind tag, UTF-8
    ...     4      metadata length M (u32)
    ...     M      metadata, UTF-8 JSON with sorted keys
    ...     4      tensor count C (u32)
    then C times:
            4      name length L (u32)
            L      tensor name, UTF-8
            4      rank R (u32)
            8*R    dims (u64 each)
            8*n    payload, float64 little-endian, C order (n = prod(dims))

Nothing may follow the last tensor.  Writing is atomic (temporary file in the
target directory, then rename), and identical inputs give identical bytes.
"""
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .acoustic import Dnn, DnnRnn, StackedRnn
from .frontend import Standardizer
from .lm import GenRnn, MarginalPrior, RnnNade
from .numeric import DimensionError
from .postproc import HmmPitchParams, ThresholdSet

MAGIC = b"HSCR"
FORMAT_VERSION = 1


class ArchiveError(Exception):
    """Base class for unreadable or inconsistent archives."""


class WrongMagicError(ArchiveError):
    pass


class VersionMismatchError(ArchiveError):
    pass


class TruncatedArchiveError(ArchiveError):
    pass


class DimensionInconsistencyError(ArchiveError):
    pass


@dataclass
class AcousticBundle:
    """Acoustic model plus the standardizer and thresholds it was trained with."""

    model: object
    standardizer: Standardizer
    thresholds: ThresholdSet = None
    metadata: dict = field(default_factory=dict)


@dataclass
class LmBundle:
    """Language model plus the marginal prior and baseline HMM fitted on the same rolls."""

    lm: object
    prior: MarginalPrior
    hmm: HmmPitchParams = None
    metadata: dict = field(default_factory=dict)


# -- raw container ---------------------------------------------------------------------

def _pack_str(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def encode_archive(kind, metadata, tensors):
    """Serialize ``tensors`` (list of ``(name, array)``) under a kind tag."""
    out = [MAGIC, struct.pack("<I", FORMAT_VERSION), _pack_str(kind),
           _pack_str(json.dumps(metadata or {}, sort_keys=True)),
           struct.pack("<I", len(tensors))]
    for name, arr in tensors:
        a = np.ascontiguousarray(arr, dtype="<f8")
        out.append(_pack_str(name))
        out.append(struct.pack("<I", a.ndim))
        out.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        out.append(a.tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncatedArchiveError(
                f"archive ends inside {what} (need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what):
        raw = self.take(self.u32(what + " length"), what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ArchiveError(f"{what} is not valid UTF-8") from exc


def decode_archive(data):
    """Inverse of :func:`encode_archive`; returns ``(kind, metadata, tensors)``
    with ``tensors`` an insertion-ordered dict."""
    r = _Reader(bytes(data))
    magic = r.take(4, "magic") if len(data) >= 4 else None
    if magic != MAGIC:
        raise WrongMagicError(f"not a model archive (magic {bytes(data[:4])!r})")
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"archive version {version}, reader supports {FORMAT_VERSION}")
    kind = r.string("kind tag")
    try:
        metadata = json.loads(r.string("metadata"))
    except json.JSONDecodeError as exc:
        raise ArchiveError("metadata is not valid JSON") from exc
    count = r.u32("tensor count")
    tensors = {}
    for _ in range(count):
        name = r.string("tensor name")
        rank = r.u32("tensor rank")
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank, f"dims of {name!r}"))
        n = int(np.prod(dims, dtype=np.uint64)) if rank else 1
        payload = r.take(8 * n, f"payload of {name!r}")
        if name in tensors:
            raise ArchiveError(f"duplicate tensor {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    if r.pos != len(r.data):
        raise ArchiveError(f"{len(r.data) - r.pos} unexpected trailing bytes")
    return kind, metadata, tensors


# -- object <-> tensors ----------------------------------------------------------------

def _dnn_parts(m, prefix):
    out = []
    for i, (W, b) in enumerate(m.layers):
        out += [(f"{prefix}{i}.W", W), (f"{prefix}{i}.b", b)]
    return out, {"layers": len(m.layers)}


def _rnn_parts(m, prefix):
    out = []
    for i, (W_in, W_hh, b) in enumerate(m.layers):
        out += [(f"{prefix}{i}.W_in", W_in), (f"{prefix}{i}.W_hh", W_hh), (f"{prefix}{i}.b", b)]
    out += [(f"{prefix}out.W", m.out[0]), (f"{prefix}out.b", m.out[1])]
    return out, {"layers": len(m.layers)}


def _get(tensors, name):
    if name not in tensors:
        raise DimensionInconsistencyError(f"archive is missing tensor {name!r}")
    return tensors[name]


def _build_dnn(tensors, meta, prefix):
    return Dnn([(_get(tensors, f"{prefix}{i}.W"), _get(tensors, f"{prefix}{i}.b"))
                for i in range(meta["layers"])])


def _build_rnn(tensors, meta, prefix):
    layers = [tuple(_get(tensors, f"{prefix}{i}.{k}") for k in ("W_in", "W_hh", "b"))
              for i in range(meta["layers"])]
    return StackedRnn(layers, (_get(tensors, f"{prefix}out.W"), _get(tensors, f"{prefix}out.b")))


def _parts(obj, prefix=""):
    """``(kind, tensors, structure)`` for any archivable object."""
    if isinstance(obj, Dnn):
        t, s = _dnn_parts(obj, prefix + "dnn.")
        return "dnn", t, s
    if isinstance(obj, StackedRnn):
        t, s = _rnn_parts(obj, prefix + "rnn.")
        return "rnn", t, s
    if isinstance(obj, DnnRnn):
        t1, s1 = _dnn_parts(obj.dnn, prefix + "dnn.")
        t2, s2 = _rnn_parts(obj.rnn, prefix + "rnn.")
        return "dnn+rnn", t1 + t2, {"dnn": s1, "rnn": s2}
    if isinstance(obj, (GenRnn, RnnNade)):
        return "lm:" + obj.kind, [(prefix + "lm." + k, obj.p[k]) for k in obj.param_names], {}
    if isinstance(obj, Standardizer):
        return "standardizer", [(prefix + "standardizer.mean", obj.mean),
                                (prefix + "standardizer.std", obj.std)], {}
    if isinstance(obj, MarginalPrior):
        return "prior", [(prefix + "prior.probs", obj.probs)], {}
    if isinstance(obj, HmmPitchParams):
        return "hmm", [(prefix + "hmm.trans", obj.trans), (prefix + "hmm.init", obj.init)], {}
    if isinstance(obj, ThresholdSet):
        return "thresholds", [(prefix + "thresholds", obj.thresholds)], {}
    raise TypeError(f"cannot archive objects of type {type(obj).__name__}")


def _build(kind, tensors, structure, prefix=""):
    if kind == "dnn":
        return _build_dnn(tensors, structure, prefix + "dnn.")
    if kind == "rnn":
        return _build_rnn(tensors, structure, prefix + "rnn.")
    if kind == "dnn+rnn":
        return DnnRnn(_build_dnn(tensors, structure["dnn"], prefix + "dnn."),
                      _build_rnn(tensors, structure["rnn"], prefix + "rnn."))
    if kind in ("lm:rnn", "lm:nade"):
        cls = GenRnn if kind == "lm:rnn" else RnnNade
        return cls({k: _get(tensors, prefix + "lm." + k) for k in cls.param_names})
    if kind == "standardizer":
        return Standardizer(_get(tensors, prefix + "standardizer.mean"),
                            _get(tensors, prefix + "standardizer.std"))
    if kind == "prior":
        return MarginalPrior(_get(tensors, prefix + "prior.probs"))
    if kind == "hmm":
        return HmmPitchParams(_get(tensors, prefix + "hmm.trans"), _get(tensors, prefix + "hmm.init"))
    if kind == "thresholds":
        return ThresholdSet(_get(tensors, prefix + "thresholds"))
    raise ArchiveError(f"unknown archive kind {kind!r}")


_BUNDLES = {
    "acoustic-bundle": (AcousticBundle, ("model", "standardizer", "thresholds")),
    "lm-bundle": (LmBundle, ("lm", "prior", "hmm")),
}


def _bundle_name(obj):
    for tag, (cls, _) in _BUNDLES.items():
        if isinstance(obj, cls):
            return tag
    return None


def to_bytes(obj, metadata=None):
    """Archive bytes for a model, a preprocessing object or a bundle."""
    tag = _bundle_name(obj)
    if tag is None:
        kind, tensors, structure = _parts(obj)
        meta = dict(metadata or {})
        meta["structure"] = structure
        return encode_archive(kind, meta, tensors)
    _, fields = _BUNDLES[tag]
    meta = dict(obj.metadata)
    meta.update(metadata or {})
    tensors, components = [], {}
    for f in fields:
        part = getattr(obj, f)
        if part is None:
            continue
        kind, t, structure = _parts(part, prefix=f + "/")
        tensors += t
        components[f] = {"kind": kind, "structure": structure}
    meta["components"] = components
    return encode_archive(tag, meta, tensors)


def from_bytes(data):
    kind, meta, tensors = decode_archive(data)
    try:
        if kind in _BUNDLES:
            cls, fields = _BUNDLES[kind]
            comps = meta.pop("components", {})
            parts = {f: (_build(comps[f]["kind"], tensors, comps[f]["structure"], prefix=f + "/")
                         if f in comps else None) for f in fields}
            obj = cls(**parts, metadata=meta)
            expected = sum(len(_parts(p, f + "/")[1]) for f, p in parts.items() if p is not None)
        else:
            obj = _build(kind, tensors, meta.get("structure", {}))
            expected = len(_parts(obj)[1])
    except (DimensionError, KeyError, TypeError) as exc:
        raise DimensionInconsistencyError(f"archive tensors are inconsistent: {exc}") from exc
    except ValueError as exc:
        raise ArchiveError(f"archive holds invalid parameter values: {exc}") from exc
    if expected != len(tensors):
        raise DimensionInconsistencyError(
            f"archive holds {len(tensors)} tensors, kind {kind!r} uses {expected}")
    _check_bundle(obj)
    return obj


def _check_bundle(obj):
    if isinstance(obj, AcousticBundle):
        n_in = obj.model.n_inputs
        if obj.standardizer.mean.shape != (n_in,):
            raise DimensionInconsistencyError("standardizer width differs from the model input")
        if obj.thresholds is not None and obj.thresholds.thresholds.shape != (obj.model.n_outputs,):
            raise DimensionInconsistencyError("threshold count differs from the model output")
    elif isinstance(obj, LmBundle):
        if obj.prior.n_pitches != obj.lm.n_pitches:
            raise DimensionInconsistencyError("prior and language model disagree on pitches")
        if obj.hmm is not None and obj.hmm.n_pitches != obj.lm.n_pitches:
            raise DimensionInconsistencyError("HMM and language model disagree on pitches")


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(obj, path, metadata=None):
    atomic_write_bytes(path, to_bytes(obj, metadata))


def load_model(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())

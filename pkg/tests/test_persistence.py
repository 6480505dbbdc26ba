import json
import struct

import numpy as np
import pytest

from conftest import random_lm
from hybridscribe.acoustic import Dnn, DnnRnn, StackedRnn
from hybridscribe.frontend import Standardizer
from hybridscribe.lm import MarginalPrior
from hybridscribe.numeric import make_rng
from hybridscribe.persistence import (ArchiveError, AcousticBundle, DimensionInconsistencyError,
                                      LmBundle, TruncatedArchiveError, VersionMismatchError,
                                      WrongMagicError, decode_archive, encode_archive, from_bytes,
                                      load_model, save_model, to_bytes)
from hybridscribe.postproc import HmmPitchParams, ThresholdSet, fit_hmm


def _hand_archive(kind, meta, tensors, version=1, magic=b"HSCR"):
    """Archive bytes packed field by field, independent of the library encoder."""
    def s(x):
        b = x.encode()
        return len(b).to_bytes(4, "little") + b
    out = magic + version.to_bytes(4, "little") + s(kind) + s(json.dumps(meta, sort_keys=True))
    out += len(tensors).to_bytes(4, "little")
    for name, arr in tensors:
        out += s(name) + len(arr.shape).to_bytes(4, "little")
        out += b"".join(d.to_bytes(8, "little") for d in arr.shape)
        out += b"".join(struct.pack("<d", v) for v in arr.ravel())
    return out


def _params_equal(a, b):
    return all(np.asarray(x).tobytes() == np.asarray(y).tobytes()
               for x, y in zip(_flat(a), _flat(b)))


def _flat(obj):
    if hasattr(obj, "params"):
        return obj.params()
    if isinstance(obj, DnnRnn):
        return obj.dnn.params() + obj.rnn.params()
    if isinstance(obj, Standardizer):
        return [obj.mean, obj.std]
    if isinstance(obj, MarginalPrior):
        return [obj.probs]
    if isinstance(obj, HmmPitchParams):
        return [obj.trans, obj.init]
    if isinstance(obj, ThresholdSet):
        return [obj.thresholds]
    if isinstance(obj, AcousticBundle):
        return _flat(obj.model) + _flat(obj.standardizer) + _flat(obj.thresholds)
    if isinstance(obj, LmBundle):
        return _flat(obj.lm) + _flat(obj.prior) + _flat(obj.hmm)
    raise TypeError(obj)


def _all_objects():
    rng = make_rng(0)
    dnn = Dnn.init(5, 3, hidden=(4, 4), rng=rng, std=1.0)
    rnn = StackedRnn.init(5, 3, hidden=(4, 2), rng=rng, std=1.0)
    hyb = DnnRnn(Dnn.init(5, 3, hidden=(4,), rng=rng, std=1.0),
                 StackedRnn.init(4, 3, hidden=(2,), rng=rng, std=1.0))
    std = Standardizer(rng.standard_normal(5), rng.uniform(0.5, 2, 5))
    prior = MarginalPrior(rng.uniform(0.1, 0.9, 3))
    hmm = fit_hmm([(rng.random((20, 3)) < 0.5)])
    th = ThresholdSet(rng.random(3))
    return {
        "dnn": dnn, "rnn": rnn, "dnn+rnn": hyb,
        "lm:rnn": random_lm(rng, 3, "rnn"), "lm:nade": random_lm(rng, 3, "nade"),
        "standardizer": std, "prior": prior, "hmm": hmm, "thresholds": th,
        "acoustic-bundle": AcousticBundle(hyb, std, th, {"seed": 3, "epochs": 7}),
        "lm-bundle": LmBundle(random_lm(rng, 3, "nade"), prior, hmm, {"seed": 1}),
    }


@pytest.mark.parametrize("kind", sorted(_all_objects()))
def test_round_trip_bit_exact(kind, tmp_path):
    obj = _all_objects()[kind]
    path = tmp_path / "m.hsm"
    save_model(obj, path)
    back = load_model(path)
    assert type(back) is type(obj)
    assert _params_equal(obj, back)
    # and the archive itself is reproduced byte for byte
    assert to_bytes(back) == path.read_bytes()
    assert decode_archive(path.read_bytes())[0] == kind


def test_bundle_metadata_and_optional_parts():
    objs = _all_objects()
    b = from_bytes(to_bytes(objs["acoustic-bundle"]))
    assert b.metadata == {"seed": 3, "epochs": 7}
    no_th = AcousticBundle(objs["dnn"], objs["standardizer"])
    assert from_bytes(to_bytes(no_th)).thresholds is None


def test_encoder_matches_hand_packed_bytes():
    t = [("a", np.array([[1.0, -2.5], [0.0, 3.25]])), ("b", np.array([7.0]))]
    assert encode_archive("thing", {"z": 1, "a": [2]}, t) == _hand_archive(
        "thing", {"z": 1, "a": [2]}, t)


def test_hand_packed_prior_loads():
    data = _hand_archive("prior", {"structure": {}}, [("prior.probs", np.array([0.25, 0.5]))])
    prior = from_bytes(data)
    assert prior.probs.tolist() == [0.25, 0.5]


def test_layout_is_little_endian_fixed_width():
    data = encode_archive("k", {}, [("x", np.array([1.0]))])
    assert data[:4] == b"HSCR"
    assert data[4:8] == b"\x01\x00\x00\x00"
    assert data[-8:] == struct.pack("<d", 1.0)


# -- corruption fixtures ---------------------------------------------------------------

def _prior_bytes():
    return _hand_archive("prior", {"structure": {}}, [("prior.probs", np.array([0.25, 0.5]))])


def test_wrong_magic():
    data = bytearray(_prior_bytes())
    data[:4] = b"XXXX"
    with pytest.raises(WrongMagicError):
        from_bytes(bytes(data))
    with pytest.raises(WrongMagicError):
        from_bytes(b"HS")


def test_version_mismatch():
    data = _hand_archive("prior", {}, [("prior.probs", np.array([0.5]))], version=2)
    with pytest.raises(VersionMismatchError):
        from_bytes(data)


@pytest.mark.parametrize("cut", [5, 10, 20, 40, 60, 1])
def test_truncated(cut):
    data = _prior_bytes()
    with pytest.raises(TruncatedArchiveError):
        from_bytes(data[:-cut] if cut < len(data) - 8 else data[:8])


def test_truncated_is_archive_error():
    assert issubclass(TruncatedArchiveError, ArchiveError)


def test_tensor_count_mismatch():
    extra = _hand_archive("prior", {"structure": {}}, [("prior.probs", np.array([0.5])),
                                                      ("stray", np.array([1.0]))])
    with pytest.raises(DimensionInconsistencyError):
        from_bytes(extra)


def test_missing_tensor():
    data = _hand_archive("standardizer", {"structure": {}},
                         [("standardizer.mean", np.zeros(2))])
    with pytest.raises(DimensionInconsistencyError):
        from_bytes(data)


def test_dimension_chain_broken():
    t = [("dnn.0.W", np.zeros((3, 4))), ("dnn.0.b", np.zeros(3)),
         ("dnn.1.W", np.zeros((2, 5))), ("dnn.1.b", np.zeros(2))]
    with pytest.raises(DimensionInconsistencyError):
        from_bytes(_hand_archive("dnn", {"structure": {"layers": 2}}, t))


def test_bundle_cross_check():
    objs = _all_objects()
    bad = AcousticBundle(objs["dnn"], Standardizer(np.zeros(4), np.ones(4)))
    with pytest.raises(DimensionInconsistencyError):
        from_bytes(to_bytes(bad))


def test_trailing_bytes_and_bad_values():
    with pytest.raises(ArchiveError):
        from_bytes(_prior_bytes() + b"\x00")
    with pytest.raises(ArchiveError):
        from_bytes(_hand_archive("prior", {}, [("prior.probs", np.array([0.0]))]))
    with pytest.raises(ArchiveError):
        from_bytes(_hand_archive("nonsense", {}, []))


def test_atomic_save_leaves_no_temp_files(tmp_path):
    save_model(_all_objects()["prior"], tmp_path / "p.hsm")
    assert [p.name for p in tmp_path.iterdir()] == ["p.hsm"]

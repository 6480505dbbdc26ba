"""Kernel dispatch: the compiled ``_ckernels`` extension when it is built,
otherwise the numpy implementations in ``_pykernels``.

Set ``HYBRIDSCRIBE_PURE=1`` before import to force the numpy path. Both
backends are deterministic; they may differ from each other in the last bits
of floating-point results (summation order, libm vs numpy transcendentals).
"""
import os

from . import _pykernels

KERNEL_NAMES = (
    "affine_rows",
    "sigmoid_affine_rows",
    "bernoulli_logprob_rows",
    "nade_logprob_rows",
    "viterbi_binary",
)

_compiled = None
if os.environ.get("HYBRIDSCRIBE_PURE") != "1":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"
_impl = _compiled if _compiled is not None else _pykernels

affine_rows = _impl.affine_rows
sigmoid_affine_rows = _impl.sigmoid_affine_rows
bernoulli_logprob_rows = _impl.bernoulli_logprob_rows
nade_logprob_rows = _impl.nade_logprob_rows
viterbi_binary = _impl.viterbi_binary


def compiled_available():
    return _compiled is not None


def backends():
    """Map of backend name to kernel module, for tests and benchmarks."""
    out = {"numpy": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out

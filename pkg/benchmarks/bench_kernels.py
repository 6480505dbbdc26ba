"""Time every kernel under each available backend, plus one beam-search decode.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, backend) with the best wall time over the repeats
and the speed-up of the compiled backend over numpy.
"""
import argparse
import timeit

import numpy as np

from hybridscribe import kernels
from hybridscribe.decoder import DecoderConfig, beam_search
from hybridscribe.lm import MarginalPrior, RnnNade
from hybridscribe.numeric import make_rng


def _cases(rng):
    """Shapes typical of decoding a 12-pitch model with a 100-wide beam."""
    B, D, H, F = 400, 12, 150, 513
    X, W, b = rng.standard_normal((B, F)), rng.standard_normal((100, F)) * 0.05, rng.standard_normal(100)
    Z = (rng.random((B, D)) < 0.3).astype(np.uint8)
    lp1 = np.log(rng.uniform(0.05, 0.95, D))
    lp0 = np.log1p(-np.exp(lp1))
    Wn, Vn = rng.standard_normal((D, H)) * 0.1, rng.standard_normal((D, H)) * 0.1
    bv, c = rng.standard_normal((B, D)), rng.standard_normal((B, H))
    emit = rng.standard_normal((3000, 88, 2))
    lt = np.log(rng.dirichlet([1, 1], size=(88, 2)))
    li = np.log(rng.dirichlet([1, 1], size=88))
    return {
        "affine_rows": lambda k: k.affine_rows(X, W, b),
        "sigmoid_affine_rows": lambda k: k.sigmoid_affine_rows(X, W, b),
        "bernoulli_logprob_rows": lambda k: k.bernoulli_logprob_rows(lp1, lp0, Z),
        "nade_logprob_rows": lambda k: k.nade_logprob_rows(Wn, Vn, bv, c, Z),
        "viterbi_binary": lambda k: k.viterbi_binary(emit, lt, li),
    }


def _decode_case(rng):
    lm = RnnNade.init(12, 100, 150, rng, 0.1)
    post = rng.uniform(0.02, 0.98, (60, 12))
    prior = MarginalPrior(np.full(12, 0.2))
    return lambda: beam_search(post, lm, prior, DecoderConfig(20))


def _with_backend(mod, fn):
    saved = {k: getattr(kernels, k) for k in kernels.KERNEL_NAMES}
    try:
        for k in kernels.KERNEL_NAMES:
            setattr(kernels, k, getattr(mod, k))
        return fn()
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.backends()
    cases = _cases(make_rng(0))
    decode = _decode_case(make_rng(1))
    print(f"{'kernel':26s}" + "".join(f"{name:>12s}" for name in sorted(backends)) + "   speed-up")
    rows = [(name, lambda mod, f=f: (lambda: f(mod))) for name, f in cases.items()]
    rows.append(("beam_search w=20, T=60", lambda mod: (lambda: _with_backend(mod, decode))))
    for name, make in rows:
        times = {}
        for bname, mod in sorted(backends.items()):
            fn = make(mod)
            fn()
            times[bname] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        line = f"{name:26s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in sorted(backends))
        if "cython" in times:
            line += f"   {times['numpy'] / times['cython']:6.1f}x"
        print(line)


if __name__ == "__main__":
    main()

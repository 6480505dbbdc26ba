"""Frame-level and onset-only note-level transcription metrics."""
from dataclasses import dataclass

import numpy as np

from .numeric import DimensionError

DEFAULT_ONSET_TOLERANCE_MS = 50.0


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f_measure: float
    accuracy: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp, fp, fn):
        """Ratios from counts.

        Both sides empty (``tp + fp + fn == 0``) counts as a perfect match;
        when only one side is empty the ratio with a zero denominator is 0.
        """
        tp, fp, fn = int(tp), int(fp), int(fn)
        if tp + fp + fn == 0:
            return cls(1.0, 1.0, 1.0, 1.0, 0, 0, 0)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f, tp / (tp + fp + fn), tp, fp, fn)


def frame_metrics(pred, truth):
    """Cell-wise counts over aligned (T, N) rolls, truncated to the shorter."""
    P = np.asarray(getattr(pred, "frames", pred)) > 0
    Y = np.asarray(getattr(truth, "frames", truth)) > 0
    if P.ndim != 2 or Y.ndim != 2 or P.shape[1] != Y.shape[1]:
        raise DimensionError(f"rolls disagree on the pitch count: {P.shape} vs {Y.shape}")
    hp, ht = getattr(pred, "hop_ms", None), getattr(truth, "hop_ms", None)
    if hp is not None and ht is not None and hp != ht:
        raise ValueError(f"rolls use different hops: {hp} ms vs {ht} ms")
    T = min(P.shape[0], Y.shape[0])
    P, Y = P[:T], Y[:T]
    tp = int((P & Y).sum())
    return EvalResult.from_counts(tp, int(P.sum()) - tp, int(Y.sum()) - tp)


def match_onsets(pred, truth, tolerance_ms=DEFAULT_ONSET_TOLERANCE_MS):
    """One-to-one matching of same-pitch notes with onsets within tolerance.

    Candidate pairs are taken greedily in ascending onset-distance order
    (ties by truth then prediction index).  Returns a list of
    ``(pred_index, truth_index)`` pairs.
    """
    if not tolerance_ms > 0:
        raise ValueError("onset tolerance must be positive")
    tol = tolerance_ms / 1000.0
    by_pitch = {}
    for j, n in enumerate(truth):
        by_pitch.setdefault(n.pitch, []).append(j)
    pairs = []
    for i, n in enumerate(pred):
        for j in by_pitch.get(n.pitch, ()):
            d = abs(n.onset - truth[j].onset)
            # tiny slack so that exact-decimal boundaries (0.05 s) are inclusive
            if d <= tol + 1e-9:
                pairs.append((d, j, i))
    pairs.sort()
    used_p, used_t, out = set(), set(), []
    for _, j, i in pairs:
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        out.append((i, j))
    return out


def note_onset_metrics(pred, truth, tolerance_ms=DEFAULT_ONSET_TOLERANCE_MS):
    tp = len(match_onsets(pred, truth, tolerance_ms))
    return EvalResult.from_counts(tp, len(pred) - tp, len(truth) - tp)


def aggregate(results):
    """Pool counts over tracks, then recompute the ratios."""
    results = list(results)
    if not results:
        raise ValueError("nothing to aggregate")
    return EvalResult.from_counts(sum(r.tp for r in results), sum(r.fp for r in results),
                                  sum(r.fn for r in results))


def format_table(cells, acoustic_kinds, post_kinds, title="F-measure (%)"):
    """Fixed-width text table: one row per acoustic model, and a frame / note
    column pair per post-processing method.

    ``cells[(acoustic, post)] = (frame_f, note_f)`` with values in [0, 1];
    missing cells print as ``-``.
    """
    label_w = max([len("Acoustic")] + [len(a) for a in acoustic_kinds])
    col_w = 7
    group_w = 2 * col_w + 1
    lines = [title]
    head1 = " " * label_w + " |" + "|".join(f" {p:^{group_w}} " for p in post_kinds) + "|"
    head2 = f"{'Acoustic':<{label_w}} |" + "|".join(
        f" {'Frame':>{col_w}} {'Note':>{col_w}} " for _ in post_kinds) + "|"
    rule = "-" * len(head2)
    lines += [rule, head1, head2, rule]
    for a in acoustic_kinds:
        parts = []
        for p in post_kinds:
            cell = cells.get((a, p))
            if cell is None:
                parts.append(f" {'-':>{col_w}} {'-':>{col_w}} ")
            else:
                parts.append(f" {100 * cell[0]:>{col_w}.2f} {100 * cell[1]:>{col_w}.2f} ")
        lines.append(f"{a:<{label_w}} |" + "|".join(parts) + "|")
    lines.append(rule)
    return "\n".join(lines) + "\n"

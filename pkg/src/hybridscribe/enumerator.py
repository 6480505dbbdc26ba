"""Best-first enumeration of binary configurations under independent Bernoullis.

The most probable configuration sets bit ``i`` iff ``p_i >= 0.5``.  Any other
configuration differs from it on a *flip-set*, and costs the sum of
``|log p_i - log(1 - p_i)|`` over that set.  Flip-sets are generated lazily
over the bits sorted by cost: from a set whose largest sorted position is
``k`` the two successors are "append ``k+1``" and "replace ``k`` by ``k+1``".
Every subset is reached exactly once and successors never cost less than their
parent, so a heap pops configurations in non-decreasing cost.

Ties: all configurations of exactly equal cost (costs are summed with
``math.fsum`` so the value does not depend on summation order) are collected
and emitted in ascending lexicographic order of the bit vector.  A tie class
larger than ``max_tie_group`` is emitted in chunks, each sorted on its own.
"""
import heapq
import math
from collections import deque

import numpy as np

from .numeric import EPS, clamp_prob


class ConfigEnumerator:
    """Iterator over ``(bits, log_probability)`` in non-increasing probability.

    Parameters
    ----------
    probs : array_like, shape (N,)
        Independent on-probabilities; clamped to ``[EPS, 1 - EPS]``.
    max_tie_group : int
        Bound on the number of equal-cost configurations sorted at once.
    """

    def __init__(self, probs, max_tie_group=4096):
        p = clamp_prob(np.asarray(probs, dtype=np.float64).ravel())
        self.n = p.size
        self.log_p1 = np.log(p)
        self.log_p0 = np.log1p(-p)
        self.map_bits = (p >= 0.5).astype(np.uint8)
        self.map_logprob = math.fsum(np.where(self.map_bits > 0, self.log_p1, self.log_p0))
        costs = np.abs(self.log_p1 - self.log_p0)
        self._order = np.lexsort((np.arange(self.n), costs))
        self._sorted_costs = costs[self._order].tolist()
        self.max_tie_group = max_tie_group
        self._heap = [(0.0, 0, ())]
        self._counter = 1
        self._pending = deque()
        self.emitted = 0

    def _bits(self, flips):
        bits = self.map_bits.copy()
        if flips:
            idx = self._order[list(flips)]
            bits[idx] ^= 1
        return bits

    def _push(self, flips):
        cost = math.fsum(self._sorted_costs[k] for k in flips)
        heapq.heappush(self._heap, (cost, self._counter, flips))
        self._counter += 1

    def _fill(self):
        if self._pending or not self._heap:
            return
        cost = self._heap[0][0]
        group = []
        while self._heap and self._heap[0][0] == cost and len(group) < self.max_tie_group:
            _, _, flips = heapq.heappop(self._heap)
            if flips:
                last = flips[-1]
                if last + 1 < self.n:
                    self._push(flips + (last + 1,))
                    self._push(flips[:-1] + (last + 1,))
            elif self.n:
                self._push((0,))
            group.append(self._bits(flips))
        group.sort(key=lambda b: b.tobytes())
        logprob = self.map_logprob - cost
        self._pending.extend((b, logprob) for b in group)

    def peek_logprob(self):
        """Log-probability of the next emission, or ``None`` once exhausted."""
        self._fill()
        return self._pending[0][1] if self._pending else None

    def next_most_probable(self):
        """Return the next ``(bits, log_probability)``, or ``None`` once all
        ``2**N`` configurations have been emitted."""
        self._fill()
        if not self._pending:
            return None
        self.emitted += 1
        return self._pending.popleft()

    def __iter__(self):
        return self

    def __next__(self):
        item = self.next_most_probable()
        if item is None:
            raise StopIteration
        return item


def enumerator_create(posteriors_at_t, max_tie_group=4096):
    return ConfigEnumerator(posteriors_at_t, max_tie_group)


def next_most_probable(enumerator):
    return enumerator.next_most_probable()


class SharedEnumeration:
    """Memoized emissions of one enumerator, read by many cursors.

    Every beam hypothesis at a given depth sees the same frame posteriors, so
    they share one enumeration and each keeps only an index into it.
    """

    def __init__(self, enumerator):
        self._enum = enumerator
        self.bits = []
        self.logprobs = []

    def get(self, k):
        while len(self.bits) <= k:
            item = self._enum.next_most_probable()
            if item is None:
                return None
            self.bits.append(item[0])
            self.logprobs.append(item[1])
        return self.bits[k], self.logprobs[k]

    def bound(self, k):
        """Log-probability of emission ``k`` (an upper bound for all later ones)."""
        item = self.get(k)
        return None if item is None else item[1]

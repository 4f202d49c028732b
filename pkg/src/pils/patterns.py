"""Mining of frequent customer-visit sequences from solutions.

A pattern is a contiguous customer sequence inside a route, identified up
to mirror reversal. The pool counts every occurrence seen during a run
and tracks, per pattern length, the top-`phi_freq` most frequent patterns
in an indexed min-heap so that injection can sample from them cheaply.
"""

from __future__ import annotations

import csv
import io

Pattern = tuple  # canonical customer tuple


class InvalidPatternError(ValueError):
    pass


def canonicalize(raw, l_min: int | None = None, l_max: int | None = None) -> Pattern:
    """Mirror-invariant canonical form: the lexicographically smaller of
    the sequence and its reverse. Idempotent."""
    seq = tuple(raw)
    if l_min is not None and len(seq) < l_min:
        raise InvalidPatternError(f"pattern length {len(seq)} < {l_min}")
    if l_max is not None and len(seq) > l_max:
        raise InvalidPatternError(f"pattern length {len(seq)} > {l_max}")
    if not seq:
        raise InvalidPatternError("empty pattern")
    if 0 in seq:
        raise InvalidPatternError("pattern must not contain the depot")
    if len(set(seq)) != len(seq):
        raise InvalidPatternError("pattern repeats a customer")
    rev = seq[::-1]
    return seq if seq <= rev else rev


class _TopHeap:
    """Bounded min-heap over (frequency, -stamp) with a position index.

    The stamp is the global tick when the entry last changed frequency,
    so among equal frequencies the entry that reached the frequency first
    ranks higher. A challenger evicts the root only when its frequency is
    strictly greater, which keeps membership stable under ties.
    """

    __slots__ = ("cap", "items", "pos")

    def __init__(self, cap: int):
        self.cap = cap
        self.items: list[list] = []  # [freq, -stamp, pattern]
        self.pos: dict[Pattern, int] = {}

    def __len__(self):
        return len(self.items)

    def __contains__(self, p):
        return p in self.pos

    def root(self):
        return self.items[0]

    def patterns(self):
        return [it[2] for it in self.items]

    def _swap(self, i, j):
        items, pos = self.items, self.pos
        items[i], items[j] = items[j], items[i]
        pos[items[i][2]] = i
        pos[items[j][2]] = j

    def _sift_up(self, i):
        items = self.items
        while i > 0:
            parent = (i - 1) >> 1
            if items[i][:2] < items[parent][:2]:
                self._swap(i, parent)
                i = parent
            else:
                break

    def _sift_down(self, i):
        items = self.items
        size = len(items)
        while True:
            left = 2 * i + 1
            if left >= size:
                break
            child = left
            right = left + 1
            if right < size and items[right][:2] < items[left][:2]:
                child = right
            if items[child][:2] < items[i][:2]:
                self._swap(i, child)
                i = child
            else:
                break

    def insert(self, p, freq, stamp):
        self.items.append([freq, -stamp, p])
        self.pos[p] = len(self.items) - 1
        self._sift_up(len(self.items) - 1)

    def update(self, p, freq, stamp):
        i = self.pos[p]
        self.items[i][0] = freq
        self.items[i][1] = -stamp
        # frequency only grows, so the entry can only move away from the root
        self._sift_down(i)

    def replace_root(self, p, freq, stamp):
        evicted = self.items[0][2]
        del self.pos[evicted]
        self.items[0] = [freq, -stamp, p]
        self.pos[p] = 0
        self._sift_down(0)
        return evicted


class PatternPool:
    """Frequency map over canonical patterns plus per-length top heaps.

    `freq` accumulates for the whole run and is never decayed. `best_cost`
    optionally remembers the cheapest solution each pattern was extracted
    from, which feeds the frequency-vs-quality analysis.
    """

    def __init__(self, l_min: int = 3, l_max: int = 5, phi_freq: int = 100):
        if l_min < 1 or l_max < l_min:
            raise ValueError("need 1 <= l_min <= l_max")
        if phi_freq < 1:
            raise ValueError("phi_freq must be >= 1")
        self.l_min = l_min
        self.l_max = l_max
        self.phi_freq = phi_freq
        self.freq: dict[Pattern, int] = {}
        self.stamp: dict[Pattern, int] = {}
        self.best_cost: dict[Pattern, int] = {}
        self.heaps = {l: _TopHeap(phi_freq) for l in range(l_min, l_max + 1)}
        self._tick = 0

    def record(self, p: Pattern, cost=None) -> None:
        """Count one occurrence of a canonical pattern, O(log phi_freq)."""
        length = len(p)
        if length < self.l_min or length > self.l_max:
            raise InvalidPatternError(f"pattern length {length} outside pool range")
        self._tick += 1
        f = self.freq.get(p, 0) + 1
        self.freq[p] = f
        self.stamp[p] = self._tick
        if cost is not None:
            old = self.best_cost.get(p)
            if old is None or cost < old:
                self.best_cost[p] = cost
        heap = self.heaps[length]
        if p in heap:
            heap.update(p, f, self._tick)
        elif len(heap) < heap.cap:
            heap.insert(p, f, self._tick)
        elif f > heap.root()[0]:
            heap.replace_root(p, f, self._tick)

    def extract(self, sol, cost=None) -> int:
        """Count every pattern window of every route; returns windows seen.

        A route with k customers holds max(0, k - l + 1) windows of size l.
        """
        total = 0
        for route in sol.routes:
            k = len(route)
            for l in range(self.l_min, self.l_max + 1):
                for j in range(k - l + 1):
                    self.record(canonicalize(route[j:j + l]), cost=cost)
                    total += 1
        return total

    def top_patterns(self, length: int) -> list[Pattern]:
        """Current heap membership for one length (arbitrary heap order)."""
        return self.heaps[length].patterns()

    def sample_candidates(self, phi_size: int, rng) -> list[Pattern]:
        """Uniform without-replacement draw of up to phi_size patterns per
        length from the tracked tops; lengths concatenated in order."""
        if phi_size < 0:
            raise ValueError("phi_size must be >= 0")
        out = []
        for l in range(self.l_min, self.l_max + 1):
            pats = self.heaps[l].patterns()
            take = min(phi_size, len(pats))
            if take == 0:
                continue
            if take == len(pats):
                out.extend(pats)
            else:
                out.extend(rng.sample(pats, take))
        return out

    def ranked(self, length: int) -> list[Pattern]:
        """Heap content sorted most-frequent first under the stable tie rule."""
        heap = self.heaps[length]
        return sorted(heap.patterns(), key=lambda p: (-self.freq[p], self.stamp[p]))

    def dump(self, stream) -> None:
        """CSV dump of the tracked tops: length,sequence,frequency,best_cost."""
        w = csv.writer(stream)
        w.writerow(["length", "sequence", "frequency", "best_cost"])
        for l in range(self.l_min, self.l_max + 1):
            for p in self.ranked(l):
                bc = self.best_cost.get(p, "")
                w.writerow([l, " ".join(str(c) for c in p), self.freq[p], bc])

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, stream, phi_freq: int | None = None) -> "PatternPool":
        """Rebuild a pool from a dump; insertion order follows the file."""
        rows = list(csv.reader(stream))
        if not rows or rows[0][:3] != ["length", "sequence", "frequency"]:
            raise ValueError("not a pattern pool dump")
        entries = []
        for row in rows[1:]:
            if not row:
                continue
            length = int(row[0])
            seq = tuple(int(t) for t in row[1].split())
            if len(seq) != length:
                raise ValueError(f"sequence {row[1]!r} does not match length {length}")
            freq = int(row[2])
            best = int(row[3]) if len(row) > 3 and row[3] != "" else None
            entries.append((seq, freq, best))
        if not entries:
            raise ValueError("empty pattern pool dump")
        l_min = min(len(e[0]) for e in entries)
        l_max = max(len(e[0]) for e in entries)
        if phi_freq is None:
            counts = {}
            for seq, _, _ in entries:
                counts[len(seq)] = counts.get(len(seq), 0) + 1
            phi_freq = max(counts.values())
        pool = cls(l_min=l_min, l_max=l_max, phi_freq=phi_freq)
        for seq, freq, best in entries:
            p = canonicalize(seq)
            pool._tick += 1
            pool.freq[p] = freq
            pool.stamp[p] = pool._tick
            if best is not None:
                pool.best_cost[p] = best
            heap = pool.heaps[len(p)]
            if len(heap) < heap.cap:
                heap.insert(p, freq, pool._tick)
            elif freq > heap.root()[0]:
                heap.replace_root(p, freq, pool._tick)
        return pool


def expected_window_count(sol, l_min: int, l_max: int) -> int:
    """Closed-form total window count used as the extraction oracle."""
    total = 0
    for route in sol.routes:
        k = len(route)
        for l in range(l_min, l_max + 1):
            total += max(0, k - l + 1)
    return total

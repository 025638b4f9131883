"""Combinatorics of mixing subshifts of finite type.

Symbols are 0-based: a d-symbol shift uses the alphabet {0, ..., d-1}.
Two-sided sequences are indexed by the integers and the shift acts by
(sigma x)_n = x_{n+1}.  A ``Word`` pins symbols on a contiguous index window;
a ``Cylinder`` is the set of sequences through a word.  Arbitrary points are
represented by eventually periodic two-sided sequences (``PeriodicPoint``):
they are dense, closed under the shift, finitely representable, and every
nonempty cylinder contains one.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Literal, Optional, Sequence

from .errors import NotMixingError


class TransitionMatrix:
    """A 0/1 transition matrix with no dead symbols.

    Every row and every column must contain at least one 1, so every symbol
    has an admissible successor and predecessor and every admissible word
    extends to a bi-infinite sequence.
    """

    def __init__(self, entries: Sequence[Sequence[int]]):
        rows = tuple(tuple(int(v) for v in row) for row in entries)
        d = len(rows)
        if d == 0 or any(len(row) != d for row in rows):
            raise ValueError("transition matrix must be square and nonempty")
        if any(v not in (0, 1) for row in rows for v in row):
            raise ValueError("transition matrix entries must be 0 or 1")
        for i in range(d):
            if not any(rows[i]):
                raise ValueError(f"symbol {i} has no admissible successor")
            if not any(rows[j][i] for j in range(d)):
                raise ValueError(f"symbol {i} has no admissible predecessor")
        self._rows = rows
        self._succ = tuple(tuple(b for b in range(d) if rows[a][b]) for a in range(d))
        self._pred = tuple(tuple(a for a in range(d) if rows[a][b]) for b in range(d))
        self._mixing: Optional[int] = None
        self._mixing_known = False

    @property
    def d(self) -> int:
        return len(self._rows)

    @property
    def entries(self) -> tuple[tuple[int, ...], ...]:
        return self._rows

    def allows(self, a: int, b: int) -> bool:
        return bool(self._rows[a][b])

    def successors(self, a: int) -> tuple[int, ...]:
        return self._succ[a]

    def predecessors(self, b: int) -> tuple[int, ...]:
        return self._pred[b]

    def is_word_admissible(self, symbols: Sequence[int]) -> bool:
        if any(not (0 <= s < self.d) for s in symbols):
            return False
        return all(self._rows[a][b] for a, b in zip(symbols, symbols[1:]))

    def words(self, length: int) -> Iterator[tuple[int, ...]]:
        """All admissible words of the given length, lexicographically."""
        if length == 0:
            yield ()
            return
        stack = [(s,) for s in reversed(range(self.d))]
        while stack:
            w = stack.pop()
            if len(w) == length:
                yield w
            else:
                stack.extend((w + (b,)) for b in reversed(self._succ[w[-1]]))

    def continuations(self, a: int, length: int) -> Iterator[tuple[int, ...]]:
        """Admissible words w of the given length with a -> w[0] allowed."""
        if length == 0:
            yield ()
            return
        stack = [(b,) for b in reversed(self._succ[a])]
        while stack:
            w = stack.pop()
            if len(w) == length:
                yield w
            else:
                stack.extend((w + (b,)) for b in reversed(self._succ[w[-1]]))

    def path_counts(self, m: int) -> list[list[int]]:
        """The m-th matrix power over the integers: entry (a, b) counts
        admissible words of length m+1 from a to b."""
        d = self.d
        power = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
        base = [list(row) for row in self._rows]
        for _ in range(m):
            power = [
                [sum(power[i][k] * base[k][j] for k in range(d)) for j in range(d)]
                for i in range(d)
            ]
        return power

    def mixing_exponent(self) -> Optional[int]:
        """Least M >= 1 with every entry of A^M positive, or None.

        The search is capped at Wielandt's bound d^2 - 2d + 2, beyond which a
        primitive matrix must already have a positive power.
        """
        if self._mixing_known:
            return self._mixing
        d = self.d
        cap = max(1, d * d - 2 * d + 2)
        power = self._rows
        result = None
        for m in range(1, cap + 1):
            if all(all(row) for row in power):
                result = m
                break
            power = tuple(
                tuple(
                    1 if any(power[i][k] and self._rows[k][j] for k in range(d)) else 0
                    for j in range(d)
                )
                for i in range(d)
            )
        self._mixing = result
        self._mixing_known = True
        return result

    def require_mixing(self) -> int:
        M = self.mixing_exponent()
        if M is None:
            raise NotMixingError(
                "transition matrix is not mixing: no power up to Wielandt's "
                "bound is entrywise positive"
            )
        return M

    def to_json(self) -> dict:
        return {"d": self.d, "A": [list(row) for row in self._rows]}

    @classmethod
    def from_json(cls, data: dict) -> "TransitionMatrix":
        A = cls(data["A"])
        if "d" in data and int(data["d"]) != A.d:
            raise ValueError("declared alphabet size does not match matrix shape")
        return A

    def __eq__(self, other) -> bool:
        return isinstance(other, TransitionMatrix) and self._rows == other._rows

    def __hash__(self) -> int:
        return hash(self._rows)

    def __repr__(self) -> str:
        return f"TransitionMatrix({[list(r) for r in self._rows]})"


def full_shift(d: int) -> TransitionMatrix:
    """The full d-shift: every transition allowed."""
    return TransitionMatrix([[1] * d for _ in range(d)])


def golden_mean_shift() -> TransitionMatrix:
    """Two symbols, forbidden word 11."""
    return TransitionMatrix([[1, 1], [1, 0]])


@dataclass(frozen=True)
class Word:
    """An admissible finite word pinned at integer coordinates
    start, start+1, ..., start+len-1."""

    symbols: tuple[int, ...]
    start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    @property
    def end(self) -> int:
        return self.start + len(self.symbols) - 1

    def __len__(self) -> int:
        return len(self.symbols)

    def to_json(self) -> dict:
        return {"symbols": list(self.symbols), "start": self.start}

    @classmethod
    def from_json(cls, data: dict) -> "Word":
        return cls(tuple(data["symbols"]), int(data["start"]))


@dataclass(frozen=True)
class Cylinder:
    """The rectangle C(a_s ... a_e)_s of all sequences through a word.

    Nonempty iff the word is admissible; with no dead symbols every
    admissible word is two-sided extendable, so no further check is needed.
    """

    word: Word

    @classmethod
    def future(cls, symbols: Sequence[int], start: int = 0) -> "Cylinder":
        return cls(Word(tuple(symbols), start))

    @property
    def start(self) -> int:
        return self.word.start

    def contains_point(self, x: "PeriodicPoint") -> bool:
        w = self.word
        return all(x.symbol(w.start + i) == s for i, s in enumerate(w.symbols))


def cylinder_children(
    A: TransitionMatrix, c: Cylinder, direction: Literal["future", "past"]
) -> list[Cylinder]:
    """One-symbol admissible refinements of a cylinder.

    The children partition c: their union is c and they are pairwise
    disjoint.  Enumeration is lexicographic in the new symbol.
    """
    w = c.word
    if not A.is_word_admissible(w.symbols):
        raise ValueError("cylinder word is not admissible")
    if direction == "future":
        return [
            Cylinder(Word(w.symbols + (b,), w.start)) for b in A.successors(w.symbols[-1])
        ]
    if direction == "past":
        return [
            Cylinder(Word((b,) + w.symbols, w.start - 1))
            for b in A.predecessors(w.symbols[0])
        ]
    raise ValueError(f"unknown direction {direction!r}")


@lru_cache(maxsize=None)
def _least_cycle_through(A: TransitionMatrix, a: int) -> tuple[int, ...]:
    """Shortest admissible cycle through a, lexicographically least among
    the shortest.  Returned as (a, c_1, ..., c_{L-1}) with c_{L-1} -> a
    allowed."""
    if A.allows(a, a):
        return (a,)
    # breadth-first over paths from a, lexicographic within each length
    frontier: list[tuple[int, ...]] = [(a,)]
    for _ in range(A.d):
        nxt: list[tuple[int, ...]] = []
        for path in frontier:
            for b in A.successors(path[-1]):
                if b == a:
                    return path
                nxt.append(path + (b,))
        frontier = nxt
    raise ValueError(f"no admissible cycle through symbol {a}")  # unreachable


def canonical_future(A: TransitionMatrix, a: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Greedy lexicographically least continuation after symbol a, folded as
    (tail, cycle): the sequence after a is tail followed by cycle repeated."""
    walk = [a]
    seen = {a: 0}
    while True:
        b = A.successors(walk[-1])[0]
        if b in seen:
            i = seen[b]
            if i == 0:
                return (), tuple(walk[1:]) + (walk[0],)
            return tuple(walk[1:i]), tuple(walk[i:])
        seen[b] = len(walk)
        walk.append(b)


class PeriodicPoint:
    """An eventually periodic two-sided sequence.

    The core occupies coordinates [core_start, core_start + len(core) - 1];
    past_cycle tiles everything to the left and future_cycle everything to
    the right.  The shift acts by moving core_start.
    """

    __slots__ = ("matrix", "past_cycle", "core", "future_cycle", "core_start")

    def __init__(
        self,
        matrix: TransitionMatrix,
        past_cycle: Sequence[int],
        core: Sequence[int],
        future_cycle: Sequence[int],
        core_start: int = 0,
    ):
        self.matrix = matrix
        self.past_cycle = tuple(int(s) for s in past_cycle)
        self.core = tuple(int(s) for s in core)
        self.future_cycle = tuple(int(s) for s in future_cycle)
        self.core_start = int(core_start)
        if not self.past_cycle or not self.future_cycle:
            raise ValueError("past and future cycles must be nonempty")
        self._validate()

    def _validate(self):
        A = self.matrix
        for cyc in (self.past_cycle, self.future_cycle):
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                if not A.allows(a, b):
                    raise ValueError(f"cycle {cyc} is not admissible")
        if not A.is_word_admissible(self.core):
            raise ValueError(f"core {self.core} is not admissible")
        first_after_past = self.core[0] if self.core else self.future_cycle[0]
        if not A.allows(self.past_cycle[-1], first_after_past):
            raise ValueError("past cycle does not connect admissibly")
        if self.core and not A.allows(self.core[-1], self.future_cycle[0]):
            raise ValueError("core does not connect admissibly to the future cycle")

    @property
    def core_end(self) -> int:
        return self.core_start + len(self.core) - 1

    def symbol(self, n: int) -> int:
        if n < self.core_start:
            return self.past_cycle[(n - self.core_start) % len(self.past_cycle)]
        if n <= self.core_end:
            return self.core[n - self.core_start]
        return self.future_cycle[(n - self.core_end - 1) % len(self.future_cycle)]

    def word(self, lo: int, hi: int) -> tuple[int, ...]:
        """Symbols at coordinates lo..hi inclusive."""
        return tuple(self.symbol(n) for n in range(lo, hi + 1))

    def shift(self, m: int = 1) -> "PeriodicPoint":
        """sigma^m of this point: coordinates move left by m."""
        out = object.__new__(PeriodicPoint)
        out.matrix = self.matrix
        out.past_cycle = self.past_cycle
        out.core = self.core
        out.future_cycle = self.future_cycle
        out.core_start = self.core_start - m
        return out

    @classmethod
    def from_cycle(cls, matrix: TransitionMatrix, cycle: Sequence[int]) -> "PeriodicPoint":
        """The periodic point repeating ``cycle`` with cycle[0] at coordinate 0."""
        return cls(matrix, cycle, (), cycle, core_start=0)

    @classmethod
    def fixed(cls, matrix: TransitionMatrix, a: int) -> "PeriodicPoint":
        if not matrix.allows(a, a):
            raise ValueError(f"symbol {a} has no self-loop")
        return cls.from_cycle(matrix, (a,))

    @classmethod
    def from_past_word(
        cls, matrix: TransitionMatrix, symbols: Sequence[int], end: int = 0
    ) -> "PeriodicPoint":
        """A point whose coordinates end-len+1 .. end carry ``symbols``,
        completed canonically on both sides."""
        symbols = tuple(symbols)
        past = _least_cycle_through(matrix, symbols[0])
        tail, cyc = canonical_future(matrix, symbols[-1])
        return cls(
            matrix,
            past,
            symbols + tail,
            cyc,
            core_start=end - len(symbols) + 1,
        )

    def with_future(self, symbols: Sequence[int]) -> "PeriodicPoint":
        """The point sharing this point's coordinates <= 0, carrying
        ``symbols`` at coordinates 1..n, completed canonically afterwards."""
        symbols = tuple(symbols)
        if symbols and not self.matrix.allows(self.symbol(0), symbols[0]):
            raise ValueError("future word does not continue coordinate 0 admissibly")
        if not self.matrix.is_word_admissible(symbols):
            raise ValueError("future word is not admissible")
        cycle, middle, start = self._materialized_past(0)
        last = symbols[-1] if symbols else self.symbol(0)
        tail, cyc = canonical_future(self.matrix, last)
        return PeriodicPoint(
            self.matrix, cycle, middle + symbols + tail, cyc, core_start=start
        )

    def _materialized_past(self, upto: int) -> tuple[tuple[int, ...], tuple[int, ...], int]:
        """(rotated past cycle, symbols L..upto, L) describing coordinates
        <= upto of this point."""
        L = min(self.core_start, upto + 1)
        middle = self.word(L, upto)
        lp = len(self.past_cycle)
        r = (L - self.core_start) % lp
        cycle = self.past_cycle[r:] + self.past_cycle[:r]
        return cycle, middle, L

    def _equality_horizon(self, other: "PeriodicPoint") -> int:
        extent = max(
            abs(self.core_start), abs(self.core_end),
            abs(other.core_start), abs(other.core_end), 1,
        )
        period = max(
            math.lcm(len(self.past_cycle), len(other.past_cycle)),
            math.lcm(len(self.future_cycle), len(other.future_cycle)),
        )
        return extent + period + 1

    def same_point(self, other: "PeriodicPoint") -> bool:
        if self.matrix != other.matrix:
            raise ValueError("points live over different transition matrices")
        K = self._equality_horizon(other)
        return all(self.symbol(n) == other.symbol(n) for n in range(-K, K + 1))

    def __repr__(self) -> str:
        return (
            f"PeriodicPoint(past={self.past_cycle}, core={self.core}@"
            f"{self.core_start}, future={self.future_cycle})"
        )


def mixing_exponent(A: TransitionMatrix) -> Optional[int]:
    """Least M with A^M entrywise positive; None if A is not mixing."""
    return A.mixing_exponent()


def distance(x: PeriodicPoint, y: PeriodicPoint) -> float:
    """The shift metric 1/2^(N+1), N the half-width of the largest symmetric
    rectangle containing both points.

    Convention: points disagreeing at coordinate 0 are at distance 1
    (N = -1); equal points are at distance 0, detected exactly from the
    finite representations.
    """
    if x.matrix != y.matrix:
        raise ValueError("points live over different transition matrices")
    if x.symbol(0) != y.symbol(0):
        return 1.0
    K = x._equality_horizon(y)
    for n in range(1, K + 1):
        if x.symbol(n) != y.symbol(n) or x.symbol(-n) != y.symbol(-n):
            return 0.5 ** n  # N = n - 1
    return 0.0


def unstable_decomposition(
    x: PeriodicPoint, m: int, target: Optional[Cylinder] = None
) -> list[PeriodicPoint]:
    """Representatives y^i with sigma^m(W^u_loc(x)) = disjoint union of
    W^u_loc(y^i).

    Each representative shares the m-shifted past of x and carries one of
    the k_m admissible length-m continuations of x_0 on coordinates
    (-m, 0].  Futures are completed canonically, except that when ``target``
    is a cylinder C(a_0...a_l)_0 and the representative ends at a_0, its
    future is routed through the target word; this is the free choice of
    representative within a leaf that the adaptedness bound exploits.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    A = x.matrix
    t_word: Optional[tuple[int, ...]] = None
    if target is not None:
        if target.word.start != 0:
            raise ValueError("target cylinder must start at coordinate 0")
        t_word = target.word.symbols
    cycle, middle, L = x._materialized_past(0)
    reps = []
    for w in A.continuations(x.symbol(0), m):
        if t_word is not None and w[-1] == t_word[0]:
            routed = t_word[1:]
            tail, cyc = canonical_future(A, t_word[-1])
            future_tail, future_cycle = routed + tail, cyc
        else:
            future_tail, future_cycle = canonical_future(A, w[-1])
        reps.append(
            PeriodicPoint(
                A,
                cycle,
                middle + w + future_tail,
                future_cycle,
                core_start=L - m,
            )
        )
    return reps


def cylinder_hit_fraction(
    x: PeriodicPoint, m: int, U: Cylinder
) -> tuple[float, float]:
    """Fraction of decomposition representatives that can be routed into U,
    and a certified lower bound valid for every base point and every m > M.

    U must be of the form C(a_0...a_l)_0.  A representative lies in U
    exactly when its coordinate-0 symbol is a_0 (its future may then be
    routed through U's word).  The bound comes from partitioning the
    representatives by their symbol e at coordinate -M: within each class
    the proportion ending at a_0 is exactly (A^M)[e][a_0] / sum_b
    (A^M)[e][b], which is positive by mixing and independent of m.
    """
    A = x.matrix
    M = A.require_mixing()
    if m <= M:
        raise ValueError(f"m must exceed the mixing exponent M={M}")
    if U.word.start != 0:
        raise ValueError("cylinder must start at coordinate 0")
    if not A.is_word_admissible(U.word.symbols):
        raise ValueError("cylinder word is not admissible")
    a0 = U.word.symbols[0]
    counts_m = A.path_counts(m)
    row = counts_m[x.symbol(0)]
    k_m = sum(row)
    hits = counts_m[x.symbol(0)][a0]
    counts_M = A.path_counts(M)
    bound = min(
        counts_M[e][a0] / sum(counts_M[e]) for e in range(A.d)
    )
    return hits / k_m, bound


def periodic_points(A: TransitionMatrix, period: int) -> list[PeriodicPoint]:
    """All points of (not necessarily least) period ``period``, one per
    admissible closing word read off coordinates 0..period-1."""
    return [
        PeriodicPoint.from_cycle(A, w)
        for w in A.words(period)
        if A.allows(w[-1], w[0])
    ]


def random_periodic_point(A: TransitionMatrix, rng, max_len: int = 6) -> PeriodicPoint:
    """A pseudo-random periodic point, for sampling-style checks."""
    length = int(rng.integers(1, max_len + 1))
    for _ in range(1000):
        w = [int(rng.integers(A.d))]
        for _ in range(length - 1):
            succ = A.successors(w[-1])
            w.append(int(succ[rng.integers(len(succ))]))
        if A.allows(w[-1], w[0]):
            phase = int(rng.integers(len(w)))
            return PeriodicPoint.from_cycle(A, tuple(w)).shift(phase)
    raise RuntimeError("failed to sample an admissible cycle")

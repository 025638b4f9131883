"""Finite-range potentials and the reduction to one-sided potentials.

A potential of window (lo, hi) reads coordinates lo..hi of a point; its
table assigns a real to every admissible word of that length.  The JSON
window [p, q] with p, q >= 0 corresponds to (lo, hi) = (-p, q).  Windows
with lo >= 1 realize functions of the future coordinates only, i.e.
elements of the one-sided function space.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

from .errors import SchemaError
from .sft import PeriodicPoint, TransitionMatrix


class FiniteRangePotential:
    """A real function of finitely many coordinates of a shift point."""

    __slots__ = ("matrix", "lo", "hi", "table")

    def __init__(
        self,
        matrix: TransitionMatrix,
        lo: int,
        hi: int,
        table: Mapping[Sequence[int], float],
        validate: bool = True,
    ):
        if hi < lo:
            raise ValueError("window upper end below lower end")
        self.matrix = matrix
        self.lo = int(lo)
        self.hi = int(hi)
        self.table = {tuple(w): float(v) for w, v in table.items()}
        if validate:
            self._validate_domain()

    def _validate_domain(self):
        expected = set(self.matrix.words(self.range))
        got = set(self.table)
        missing = expected - got
        if missing:
            raise SchemaError(
                "E_POTENTIAL_MISSING_WORD",
                f"table lacks admissible words, e.g. {sorted(missing)[0]}",
            )
        extra = got - expected
        if extra:
            raise SchemaError(
                "E_POTENTIAL_BAD_WORD",
                f"table contains inadmissible or ill-sized words, e.g. {sorted(extra)[0]}",
            )

    @property
    def range(self) -> int:
        return self.hi - self.lo + 1

    @property
    def window(self) -> tuple[int, int]:
        """(p, q) in the JSON convention: dependence on coordinates -p..q."""
        return (-self.lo, self.hi)

    @classmethod
    def from_window(
        cls,
        matrix: TransitionMatrix,
        window: tuple[int, int],
        table: Mapping[Sequence[int], float],
    ) -> "FiniteRangePotential":
        p, q = window
        if p < 0 or q < 0:
            raise SchemaError("E_POTENTIAL_BAD_WINDOW", "window entries must be >= 0")
        return cls(matrix, -p, q, table)

    @classmethod
    def constant(
        cls, matrix: TransitionMatrix, value: float, lo: int = 0, hi: int = 0
    ) -> "FiniteRangePotential":
        return cls(matrix, lo, hi, {w: value for w in matrix.words(hi - lo + 1)})

    def value(self, word: Sequence[int]) -> float:
        return self.table[tuple(word)]

    def at(self, x: PeriodicPoint, shift: int = 0) -> float:
        """Evaluate at sigma^shift(x)."""
        return self.table[x.word(self.lo + shift, self.hi + shift)]

    def read(self, word: Sequence[int], word_start: int, shift: int = 0) -> float:
        """Evaluate at sigma^shift of any point whose symbols on the word's
        span agree with ``word`` (the window must lie inside the span)."""
        a = self.lo + shift - word_start
        b = self.hi + shift - word_start
        if a < 0 or b >= len(word):
            raise IndexError("window falls outside the supplied word")
        return self.table[tuple(word[a : b + 1])]

    def shifted(self, j: int) -> "FiniteRangePotential":
        """The potential x -> phi(sigma^j x); same table, moved window."""
        return FiniteRangePotential(
            self.matrix, self.lo + j, self.hi + j, self.table, validate=False
        )

    def plus_constant(self, c: float) -> "FiniteRangePotential":
        return FiniteRangePotential(
            self.matrix, self.lo, self.hi,
            {w: v + c for w, v in self.table.items()}, validate=False,
        )

    def sup_norm(self) -> float:
        return max(abs(v) for v in self.table.values())

    def min_value(self) -> float:
        return min(self.table.values())

    def variation(self, n: int) -> float:
        """Exact sup of |phi(x) - phi(y)| over pairs agreeing on |k| <= n.

        Zero for n >= max(p, q) since agreement then covers the window.
        """
        span = [k for k in range(self.lo, self.hi + 1) if abs(k) <= n]
        groups: dict[tuple[int, ...], list[float]] = {}
        for w, v in self.table.items():
            key = tuple(w[k - self.lo] for k in span)
            groups.setdefault(key, []).append(v)
        return max((max(vs) - min(vs) for vs in groups.values()), default=0.0)

    def to_json(self) -> dict:
        return {
            "window": [-self.lo, self.hi],
            "table": {"".join(map(str, w)): v for w, v in self.table.items()},
        }

    @classmethod
    def from_json(cls, matrix: TransitionMatrix, data: dict) -> "FiniteRangePotential":
        if matrix.d > 10:
            raise SchemaError(
                "E_POTENTIAL_BAD_WORD", "digit-string tables require d <= 10"
            )
        try:
            p, q = data["window"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError("E_POTENTIAL_BAD_WINDOW", "missing or malformed window") from exc
        if "table" not in data or not isinstance(data["table"], dict):
            raise SchemaError("E_POTENTIAL_MISSING_WORD", "missing potential table")
        table = {tuple(int(ch) for ch in key): v for key, v in data["table"].items()}
        return cls.from_window(matrix, (int(p), int(q)), table)

    def __repr__(self) -> str:
        return f"FiniteRangePotential(window=[{self.lo},{self.hi}], {len(self.table)} words)"


@dataclass(frozen=True)
class CoboundaryCertificate:
    """Witness of reduced - phi = gamma - gamma o sigma.

    ``residual`` is the exact maximum of the identity defect over every
    admissible word spanning all three windows; for finite-range input the
    construction is exact, so it sits at floating round-off.
    """

    side: str
    reduced: FiniteRangePotential
    transfer: FiniteRangePotential
    residual: float


def _birkhoff_window_sum(
    phi: FiniteRangePotential, shifts: range, sign: float
) -> FiniteRangePotential:
    """sign * sum_{j in shifts} phi o sigma^j as an explicit table."""
    A = phi.matrix
    lo = phi.lo + min(shifts, default=0)
    hi = phi.hi + max(shifts, default=0)
    table = {}
    for w in A.words(hi - lo + 1):
        table[w] = sign * sum(phi.read(w, lo, shift=j) for j in shifts)
    return FiniteRangePotential(A, lo, hi, table)


def sinai_reduce(
    phi: FiniteRangePotential, side: Literal["plus", "minus"] = "plus"
) -> CoboundaryCertificate:
    """Replace a potential by a cohomologous one depending only on future
    coordinates (side "plus": window slides to [1, p+q+1]) or only on
    coordinates <= 0 (side "minus": window slides to [lo-q, 0]).

    For finite-range potentials the cohomology is by a power of the shift:
    phi o sigma^s has the required window and phi o sigma^s - phi is the
    coboundary of the finite Birkhoff sum -sum_{j=0}^{s-1} phi o sigma^j.
    The identity is exact (the reduced table IS the original table) and the
    construction is idempotent: a potential already one-sided on the
    requested side comes back unchanged with zero transfer function.
    """
    A = phi.matrix
    if side == "plus":
        s = max(0, 1 - phi.lo)
    elif side == "minus":
        s = min(0, -phi.hi)
    else:
        raise ValueError(f"unknown side {side!r}")
    reduced = phi.shifted(s)
    if s == 0:
        gamma = FiniteRangePotential.constant(A, 0.0)
    elif s > 0:
        gamma = _birkhoff_window_sum(phi, range(0, s), -1.0)
    else:
        gamma = _birkhoff_window_sum(phi, range(s, 0), +1.0)
    residual = _identity_residual(phi, reduced, gamma)
    return CoboundaryCertificate(side, reduced, gamma, residual)


def _identity_residual(
    phi: FiniteRangePotential,
    reduced: FiniteRangePotential,
    gamma: FiniteRangePotential,
) -> float:
    """max |reduced(x) - phi(x) - gamma(x) + gamma(sigma x)| over a spanning
    set of admissible words."""
    lo = min(phi.lo, reduced.lo, gamma.lo)
    hi = max(phi.hi, reduced.hi, gamma.hi + 1)
    worst = 0.0
    for w in phi.matrix.words(hi - lo + 1):
        defect = (
            reduced.read(w, lo)
            - phi.read(w, lo)
            - gamma.read(w, lo)
            + gamma.read(w, lo, shift=1)
        )
        worst = max(worst, abs(defect))
    return worst

"""Leafwise measures on local unstable sets.

The local unstable set of a point z consists of all sequences sharing its
coordinates <= 0; its sub-cylinders are labelled by future words at
coordinates 1..n.  This module builds, for a mixing matrix and a
finite-range potential, the canonical family nu_z of measures on these
leaves: the equilibrium state's conditional measures, normalized so that
the exact pushforward identity

    sigma nu_z  =  e^{phi0(z)} nu_{sigma z}

holds, where phi0 is the potential with its pressure subtracted (the
identity forces pressure zero: summing the multiplier around any periodic
orbit must reproduce the trivial holonomy).

Closed form.  Let psi be the normalized one-sided potential of range k,
m the stationary block masses, h the eigenfunction, gamma the transfer
function of the one-sided reduction, and cond_z the conditional Markov mass
of a future word given the block z_{2-k}..z_0.  Then

    nu_z([w_1..w_n]) = e^{G(z)} cond_z(w),
    G(z) = log m(z_{2-k}..z_0) - sum_{j=1}^{k-1} phi0(sigma^{-j} z)
           - gamma(sigma^{1-k} z) - log h(z_{2-k}..z_0),

which is exactly the density e^{-(gamma + log h)} against the one-sided
equilibrium measure, multiplied by the product correction comparing the
past-interaction of each future with the base point's own future.  All
quantities are finite-range, so every mass is an exact finite expression.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .potentials import CoboundaryCertificate, FiniteRangePotential, sinai_reduce
from .sft import Cylinder, PeriodicPoint, TransitionMatrix, Word
from .transfer import GibbsMeasure


class LeafFamily:
    """The leafwise measure family attached to (matrix, potential).

    Construction is pure; the only mutable state is a write-once cache of
    Markov step weights, safe to fill concurrently.
    """

    def __init__(self, matrix: TransitionMatrix, phi: FiniteRangePotential, tol: float = 1e-13):
        matrix.require_mixing()
        self.matrix = matrix
        self.phi = phi
        self.certificate: CoboundaryCertificate = sinai_reduce(phi, "plus")
        self.gibbs = GibbsMeasure.from_one_sided(matrix, self.certificate.reduced, tol)
        self.pressure = self.gibbs.pressure
        self.phi0 = phi.plus_constant(-self.pressure)
        self.gamma = self.certificate.transfer
        self.k = self.gibbs.k
        self._psi = self.gibbs.normalized.table
        self._logh = {b: math.log(v) for b, v in self.gibbs.spectral.eigenfunction.items()}
        self._step_cache: dict[tuple[tuple[int, ...], int], float] = {}
        self._build_totals()

    def _build_totals(self):
        k = self.k
        phi0, gamma = self.phi0, self.gamma
        self.g_lo = min(2 - k, phi0.lo - (k - 1), gamma.lo + 1 - k)
        self.g_hi = max(0, phi0.hi - 1)
        table = {}
        for w in self.matrix.words(self.g_hi - self.g_lo + 1):
            block = w[(2 - k) - self.g_lo : 1 - self.g_lo]
            val = math.log(self.gibbs.m[block]) - self._logh[block]
            for j in range(1, k):
                val -= phi0.read(w, self.g_lo, shift=-j)
            val -= gamma.read(w, self.g_lo, shift=1 - k)
            table[w] = val
        self._log_total = table
        values = list(table.values())
        self.comparability = math.exp(max(values) - min(values))

    # -- masses ---------------------------------------------------------

    def base_block(self, z: PeriodicPoint) -> tuple[int, ...]:
        return z.word(2 - self.k, 0)

    def _step(self, block: tuple[int, ...], symbol: int) -> float:
        """One-step conditional probability of the next future symbol."""
        key = (block, symbol)
        cached = self._step_cache.get(key)
        if cached is not None:
            return cached
        f = block + (symbol,)
        value = self._psi.get(f)
        if value is None:
            prob = 0.0
        else:
            nxt = f[1:]
            prob = math.exp(value) * self.gibbs.m[nxt] / self.gibbs.m[block]
        self._step_cache[key] = prob
        return prob

    def conditional(self, z: PeriodicPoint, future: Sequence[int]) -> float:
        """Probability of the future word given the past of z (the leaf
        conditional; equals the measure of the sub-cylinder over the total)."""
        return self._conditional(self.base_block(z), tuple(future))

    def _conditional(self, block: tuple[int, ...], future: tuple[int, ...]) -> float:
        prob = 1.0
        for s in future:
            prob *= self._step(block, s)
            if prob == 0.0:
                return 0.0
            block = block[1:] + (s,)
        return prob

    def log_total(self, z: PeriodicPoint) -> float:
        return self._log_total[z.word(self.g_lo, self.g_hi)]

    def total(self, z: PeriodicPoint) -> float:
        """nu_z of the whole local unstable set of z."""
        return math.exp(self.log_total(z))

    def mass(self, z: PeriodicPoint, future) -> float:
        """nu_z of the sub-cylinder of the leaf cut out by the future word
        (a Word pinned at coordinate 1, or a bare symbol sequence)."""
        w = _future_symbols(future)
        if w and not self.matrix.allows(z.symbol(0), w[0]):
            raise ValueError("future word does not continue the base point admissibly")
        if not self.matrix.is_word_admissible(w):
            raise ValueError("future word is not admissible")
        return self.total(z) * self._conditional(self.base_block(z), w)

    def leaf_measure(self, z: PeriodicPoint, depth: int) -> "LeafMeasure":
        """Materialize all sub-cylinder masses of the leaf to the given depth."""
        masses: dict[tuple[int, ...], float] = {}
        total = self.total(z)
        block0 = self.base_block(z)
        stack = [((s,), self._step(block0, s)) for s in reversed(self.matrix.successors(z.symbol(0)))]
        while stack:
            w, p = stack.pop()
            masses[w] = total * p
            if len(w) < depth:
                blk = (block0 + w)[-(self.k - 1):]
                stack.extend(
                    (w + (s,), p * self._step(blk, s))
                    for s in reversed(self.matrix.successors(w[-1]))
                )
        return LeafMeasure(base=z, masses=masses, depth=depth, total=total)

    # -- structure checks -----------------------------------------------

    def quasi_invariance_defect(self, z: PeriodicPoint, depth: int) -> float:
        """Max relative defect of the pushforward identity on all
        sub-cylinders of the image leaf up to the given depth.

        Compares nu_z(sigma^{-1} B) with e^{phi0(z)} nu_{sigma z}(B) for B
        ranging over the future cylinders of W^u_loc(sigma z); preimages
        are the cylinders of W^u_loc(z) whose first symbol is z_1.
        """
        factor = math.exp(self.phi0.at(z))
        sz = z.shift(1)
        z1 = z.symbol(1)
        worst = 0.0
        lhs_total = self.mass(z, (z1,))
        rhs_total = factor * self.total(sz)
        worst = abs(lhs_total - rhs_total) / rhs_total
        for n in range(1, depth + 1):
            for c in self.matrix.continuations(sz.symbol(0), n):
                rhs = factor * self.mass(sz, c)
                lhs = self.mass(z, (z1,) + c)
                worst = max(worst, abs(lhs - rhs) / rhs)
        return worst

    def comparability_sampled(self, points: Iterable[PeriodicPoint]) -> float:
        """Empirical ratio of extreme leaf totals over the sample; bounded
        by the exact constant ``comparability``."""
        totals = [self.total(z) for z in points]
        return max(totals) / min(totals)


def _future_symbols(future) -> tuple[int, ...]:
    if isinstance(future, Word):
        if future.start != 1:
            raise ValueError("future words are pinned at coordinate 1")
        return future.symbols
    return tuple(future)


@dataclass
class LeafMeasure:
    """Masses of the sub-cylinders of one local unstable set, to a depth."""

    base: PeriodicPoint
    masses: dict[tuple[int, ...], float]
    depth: int
    total: float

    def additivity_defect(self) -> float:
        """Max |mass(w) - sum of one-symbol extensions| over materialized
        words (the deepest level has no children to compare)."""
        A = self.base.matrix
        worst = 0.0
        for w, mass in self.masses.items():
            if len(w) >= self.depth:
                continue
            children = sum(self.masses[w + (s,)] for s in A.successors(w[-1]))
            worst = max(worst, abs(mass - children))
        top = sum(self.masses[(s,)] for s in A.successors(self.base.symbol(0)))
        return max(worst, abs(self.total - top))


def delta_ratio(
    phi: FiniteRangePotential,
    x: PeriodicPoint,
    y_future,
    yprime_future,
) -> float:
    """Density correction comparing two futures glued to the same past:
    the product over j >= 1 of e^{phi(sigma^-j (x . y')) - phi(sigma^-j (x . y))}.

    Only terms with j <= q-1 survive (q the upper window end of phi), so
    both futures must carry at least max(q-1, 0) symbols.  The pressure
    constant cancels, so phi may be supplied normalized or not.
    """
    y = _future_symbols(y_future)
    yp = _future_symbols(yprime_future)
    J = max(phi.hi - 1, 0)
    if len(y) < J or len(yp) < J:
        raise ValueError(f"futures must carry at least {J} symbols for this window")
    xy = x.with_future(y)
    xyp = x.with_future(yp)
    log_ratio = 0.0
    for j in range(1, J + 1):
        log_ratio += phi.at(xyp, -j) - phi.at(xy, -j)
    return math.exp(log_ratio)


@dataclass
class GluedMeasure:
    """A probability on the two-sided space assembled from a finitely
    supported past marginal and the leafwise conditionals.

    Each fiber is a complete base point carrying weight w_j; the measure
    conditions on the leaf through that point as normalized nu.  The past
    marginal need not be shift-invariant; that freedom is the hypothesis
    class of the rigidity statement.
    """

    family: LeafFamily
    fibers: list[tuple[float, PeriodicPoint]]

    def __post_init__(self):
        total = sum(w for w, _ in self.fibers)
        if any(w <= 0 for w, _ in self.fibers):
            raise ValueError("fiber weights must be positive")
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fiber weights sum to {total}, expected 1")
        self.fibers = [(w / total, z) for w, z in self.fibers]

    def integral(self, obs: FiniteRangePotential) -> float:
        """Exact integral of a finite-range observable."""
        fam = self.family
        out = 0.0
        depth = max(obs.hi, 0)
        for weight, z in self.fibers:
            if depth == 0:
                out += weight * obs.at(z)
                continue
            past = z.word(obs.lo, 0) if obs.lo <= 0 else ()
            acc = 0.0
            for v in fam.matrix.continuations(z.symbol(0), depth):
                p = fam.conditional(z, v)
                if p == 0.0:
                    continue
                acc += p * obs.value(past + v[max(obs.lo, 1) - 1 : obs.hi])
            out += weight * acc
        return out

    def cylinder_mass(self, c: Cylinder) -> float:
        """Mass of a two-sided cylinder under the glued measure."""
        fam = self.family
        w = c.word
        out = 0.0
        for weight, z in self.fibers:
            past_end = min(w.end, 0)
            if any(z.symbol(n) != w.symbols[n - w.start] for n in range(w.start, past_end + 1)):
                continue
            if w.end <= 0:
                out += weight
            elif w.start >= 2:
                # unpinned bridge coordinates 1..start-1: sum them out
                acc = 0.0
                for v in fam.matrix.continuations(z.symbol(0), w.end):
                    if v[w.start - 1 :] == w.symbols:
                        acc += fam.conditional(z, v)
                out += weight * acc
            else:
                out += weight * fam.conditional(z, w.symbols[max(1 - w.start, 0) :])
        return out

    def conditional_defect(self, depth: int) -> float:
        """Max |fiber conditional - normalized leaf mass| to the depth;
        zero by construction, kept as an executable consistency contract."""
        fam = self.family
        worst = 0.0
        for _, z in self.fibers:
            lm = fam.leaf_measure(z, depth)
            for w, mass in lm.masses.items():
                worst = max(worst, abs(mass / lm.total - fam.conditional(z, w)))
        return worst


def glue(family: LeafFamily, fibers: Sequence[tuple[float, PeriodicPoint]]) -> GluedMeasure:
    """Assemble a measure with the given past marginal and leafwise
    conditionals.  ``fibers`` lists (weight, base point); weights must be
    positive and sum to 1."""
    return GluedMeasure(family, list(fibers))


# -- stock past marginals -----------------------------------------------


def gibbs_past_fibers(family: LeafFamily, depth: int) -> list[tuple[float, PeriodicPoint]]:
    """The equilibrium state's own past marginal on depth-length past words
    (glued back, this reproduces the equilibrium state on any cylinder whose
    past part lies within the depth)."""
    A = family.matrix
    out = []
    for w in A.words(depth):
        out.append((family.gibbs.word_mass(w), PeriodicPoint.from_past_word(A, w, end=0)))
    return out


def uniform_past_fibers(A: TransitionMatrix, depth: int) -> list[tuple[float, PeriodicPoint]]:
    words = list(A.words(depth))
    return [
        (1.0 / len(words), PeriodicPoint.from_past_word(A, w, end=0)) for w in words
    ]


def point_past_fiber(A: TransitionMatrix, past_word: Sequence[int]) -> list[tuple[float, PeriodicPoint]]:
    return [(1.0, PeriodicPoint.from_past_word(A, tuple(past_word), end=0))]


def random_past_fibers(
    A: TransitionMatrix, depth: int, rng
) -> list[tuple[float, PeriodicPoint]]:
    words = list(A.words(depth))
    raw = rng.random(len(words)) + 1e-3
    weights = raw / raw.sum()
    return [
        (float(p), PeriodicPoint.from_past_word(A, w, end=0))
        for p, w in zip(weights, words)
    ]

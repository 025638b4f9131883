"""Leaf-averaging operators, their uniform convergence, and the rigidity
experiment.

The n-th averaging operator sends an observable f to the leafwise mean of
f o sigma^n against the leaf measure:

    (R_n f)(x) = nu_x(f o sigma^n) / nu_x(whole leaf),

which for finite-range data is the conditional expectation of the window
of f at time n given the past of x.  R_n f is therefore locally constant:
it depends on x only through the coordinates -W..0 with W = max(k-2,
-(n + lo_f)), so its sup and inf are exact maxima over finitely many past
classes.  The gap sup - inf is nonincreasing in n and the increasing
sequence of infima converges to the equilibrium integral of f; watching the
gap close is a decidable, per-n certificate of the uniform convergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .leafwise import GluedMeasure, LeafFamily
from .potentials import FiniteRangePotential
from .sft import Cylinder, PeriodicPoint, unstable_decomposition
from .transfer import _choose  # noqa: F401  (re-exported for samplers)


@dataclass
class AtomicMeasure:
    """A finitely supported probability: decomposition representatives with
    their leaf-mass weights."""

    points: list[PeriodicPoint]
    weights: list[float]

    def mass_on(self, U: Cylinder) -> float:
        return sum(w for p, w in zip(self.points, self.weights) if U.contains_point(p))

    def integrate(self, values: Sequence[float]) -> float:
        return sum(w * v for w, v in zip(self.weights, values))


@dataclass
class ConvergenceReport:
    """Per-n extrema of R_n f and the identified limit.

    rows hold (n, inf, sup, gap, c_n) with c_n = inf R_n f; c_n is
    nondecreasing and gap nonincreasing, both up to floating round-off.
    converged_at is the least n with gap < tol, or None if the cap was hit.
    """

    observable_id: str
    rows: list[tuple[int, float, float, float, float]]
    converged_at: Optional[int]
    limit: float
    reference: float
    defect: float

    def monotonicity_defect(self) -> tuple[float, float]:
        """(worst c_n decrease, worst gap increase); both ~0."""
        worst_c = 0.0
        worst_gap = 0.0
        for prev, cur in zip(self.rows, self.rows[1:]):
            worst_c = max(worst_c, prev[4] - cur[4])
            worst_gap = max(worst_gap, cur[3] - prev[3])
        return worst_c, worst_gap


class LeafAverager:
    """Evaluates R_n exactly against a leaf family."""

    def __init__(self, family: LeafFamily):
        self.family = family
        self.matrix = family.matrix

    # -- core evaluation --------------------------------------------------

    def _value(self, obs: FiniteRangePotential, n: int, read: Callable[[int], int]) -> float:
        """R_n obs at any point whose coordinates <= 0 are given by ``read``."""
        fam = self.family
        k = fam.k
        hi = n + obs.hi
        lo = n + obs.lo
        if hi <= 0:
            return obs.table[tuple(read(c) for c in range(lo, hi + 1))]
        block0 = tuple(read(c) for c in range(2 - k, 1))
        if lo >= 1:
            return self._value_future(obs, block0, lo)
        # window straddles the seam: only finitely many continuations matter
        past = tuple(read(c) for c in range(lo, 1))
        total = 0.0
        for v in self.matrix.continuations(read(0), hi):
            p = fam._conditional(block0, v)
            if p:
                total += p * obs.table[past + v]
        return total

    def _value_future(self, obs: FiniteRangePotential, block0: tuple[int, ...], s: int) -> float:
        """Expectation of the observable window at coordinates s..s+L-1,
        s >= 1, given the starting block, by propagating the block chain."""
        fam = self.family
        gibbs = fam.gibbs
        rho = np.zeros(len(gibbs.blocks))
        rho[gibbs.block_index[block0]] = 1.0
        for _ in range(s - 1):
            rho = rho @ gibbs.T
        total = 0.0
        for i, u in enumerate(gibbs.blocks):
            if rho[i] == 0.0:
                continue
            total += rho[i] * self._unfold(obs, u, 1.0)
        return total

    def _unfold(self, obs: FiniteRangePotential, block: tuple[int, ...], p: float) -> float:
        """Sum over the next L symbols of transition weight times table value."""
        fam = self.family
        L = obs.range
        total = 0.0
        stack = [((), block, p)]
        while stack:
            w, blk, prob = stack.pop()
            if len(w) == L:
                total += prob * obs.table[w]
                continue
            last = blk[-1]
            for s in fam.matrix.successors(last):
                q = prob * fam._step(blk, s)
                if q:
                    stack.append((w + (s,), blk[1:] + (s,), q))
        return total

    # -- public surface ---------------------------------------------------

    def average(self, obs: FiniteRangePotential, n: int, x: PeriodicPoint) -> float:
        """R_n obs (x), an exact weighted sum over leaf sub-cylinders."""
        if n < 0:
            raise ValueError("n must be >= 0")
        return self._value(obs, n, x.symbol)

    def past_window(self, obs: FiniteRangePotential, n: int) -> int:
        """W such that R_n obs depends only on coordinates -W..0."""
        return max(self.family.k - 2, -(n + obs.lo), 0)

    def class_values(self, obs: FiniteRangePotential, n: int) -> dict[tuple[int, ...], float]:
        """Exact value of R_n obs on every past class (words at -W..0)."""
        W = self.past_window(obs, n)
        out = {}
        for w in self.matrix.words(W + 1):
            out[w] = self._value(obs, n, lambda c, _w=w: _w[c + W])
        return out

    def extrema(self, obs: FiniteRangePotential, n: int) -> tuple[float, float]:
        values = self.class_values(obs, n).values()
        return min(values), max(values)

    def converge(
        self,
        obs: FiniteRangePotential,
        tol: float = 1e-8,
        n_max: int = 60,
        observable_id: str = "f",
    ) -> ConvergenceReport:
        """Track inf/sup of R_n obs until the gap closes below tol.

        The reference value is the equilibrium integral of the observable;
        the identified limit (the final infimum) must agree with it within
        the final gap, since the integral lies between inf and sup at every
        n.
        """
        reference = self.family.gibbs.integral(obs)
        rows = []
        converged_at = None
        limit = math.nan
        for n in range(n_max + 1):
            lo, hi = self.extrema(obs, n)
            rows.append((n, lo, hi, hi - lo, lo))
            limit = lo
            if hi - lo < tol:
                converged_at = n
                break
        return ConvergenceReport(
            observable_id=observable_id,
            rows=rows,
            converged_at=converged_at,
            limit=limit,
            reference=reference,
            defect=abs(limit - reference),
        )

    # -- image-decomposition measures --------------------------------------

    def decomposition_measure(
        self, x: PeriodicPoint, m: int, target: Optional[Cylinder] = None
    ) -> AtomicMeasure:
        """The probability on representatives of the m-step image of the
        leaf of x, weighting each sub-leaf by its share of leaf mass:

            weight(y^i)  =  nu_x(cylinder of the m-word of y^i) / nu_x(leaf).

        One measure serves every n in the composition identity
        R_{n+m} f(x) = sum_i weight_i R_n f(y^i).
        """
        fam = self.family
        reps = unstable_decomposition(x, m, target=target)
        block0 = fam.base_block(x)
        weights = [fam._conditional(block0, rep.word(-m + 1, 0)) for rep in reps]
        return AtomicMeasure(points=reps, weights=weights)

    def composition_defect(
        self, obs: FiniteRangePotential, x: PeriodicPoint, n: int, m: int
    ) -> float:
        """|R_{n+m} f(x) - integral of R_n f against the decomposition
        measure|, evaluated along two independent paths."""
        theta = self.decomposition_measure(x, m)
        via_theta = theta.integrate([self.average(obs, n, y) for y in theta.points])
        direct = self.average(obs, n + m, x)
        return abs(direct - via_theta)

    def adaptedness_bound(self, U: Cylinder) -> float:
        """Constructive positive lower bound C_U / K^2 for the mass the
        decomposition measures give U, K the exact comparability constant."""
        from .sft import PeriodicPoint as _P, cylinder_hit_fraction

        A = self.matrix
        M = A.require_mixing()
        probe = _P.from_past_word(A, (U.word.symbols[0],), end=0)
        _, c_u = cylinder_hit_fraction(probe, M + 1, U)
        return c_u / self.family.comparability**2


def min_mass_on_cylinder(measures: Sequence[AtomicMeasure], U: Cylinder) -> float:
    """Infimum of the decomposition-measure masses of U over a family built
    with representatives routed toward U."""
    return min(theta.mass_on(U) for theta in measures)


def conditional_expectation_integral(
    averager: LeafAverager, glued: GluedMeasure, obs: FiniteRangePotential, n: int
) -> float:
    """Integral of the n-th conditional expectation of the observable
    against a glued measure.

    The conditional expectation with respect to the n-refined leaf
    partition is constant on each fiber and equals R_n obs at the n-fold
    preimage of the fiber's base point, so the integral is a finite sum
    against the past marginal.  As n grows it approaches the equilibrium
    integral no matter the marginal.
    """
    return sum(
        weight * averager.average(obs, n, z.shift(-n)) for weight, z in glued.fibers
    )


@dataclass
class RigidityRow:
    marginal_id: str
    observable_id: str
    n: int
    value: float
    reference: float
    defect: float
    converged: bool


def rigidity_experiment(
    averager: LeafAverager,
    marginals: Sequence[tuple[str, GluedMeasure]],
    observables: Sequence[tuple[str, FiniteRangePotential]],
    tol: float = 1e-8,
    n_max: int = 60,
    threads: int = 1,
) -> list[RigidityRow]:
    """For every (marginal, observable) pair, evaluate the conditional
    expectation integral at the n where the averaging gap closes and report
    its defect against the equilibrium integral.

    Small defects for non-invariant marginals are the finite-size witness
    that the equilibrium state is pinned down by its leaf conditionals.
    """
    reports = {
        obs_id: averager.converge(obs, tol=tol, n_max=n_max, observable_id=obs_id)
        for obs_id, obs in observables
    }

    def run(task):
        marg_id, glued, obs_id, obs = task
        rep = reports[obs_id]
        n_star = rep.converged_at if rep.converged_at is not None else n_max
        value = conditional_expectation_integral(averager, glued, obs, n_star)
        return RigidityRow(
            marginal_id=marg_id,
            observable_id=obs_id,
            n=n_star,
            value=value,
            reference=rep.reference,
            defect=abs(value - rep.reference),
            converged=rep.converged_at is not None,
        )

    tasks = [
        (marg_id, glued, obs_id, obs)
        for marg_id, glued in marginals
        for obs_id, obs in observables
    ]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]

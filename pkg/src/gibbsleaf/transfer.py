"""Transfer operator, pressure, and the equilibrium state.

For a one-sided potential of range k the transfer operator sums over
one-sided preimages, which prepend a symbol to the future:

    (L h)(x) = sum_{b -> x_first} e^{psi(b . x)} h(b . x).

On functions of (k-1)-blocks this is the matrix with entry (u <- v) equal
to e^{psi(f)}, where the k-word f fuses the prepended block v with the
argument block u (f = v + last symbol of u, admissible when v and u overlap
in k-2 symbols).  The leading eigenvalue exponentiates the topological
pressure; normalizing by the eigenfunction and eigenvalue yields a
potential with L 1 = 1 whose equilibrium state is an exact stationary
higher-order Markov measure on blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import IterationError
from .potentials import FiniteRangePotential
from .sft import Cylinder, TransitionMatrix


def _k_word_table(phi: FiniteRangePotential) -> tuple[int, dict[tuple[int, ...], float]]:
    """The potential's table as a k-word table with k >= 2.

    Range-1 potentials are lifted to range 2 by reading the first symbol;
    this realizes the same function on the one-sided space and lets every
    downstream formula assume nonempty blocks.
    """
    k = phi.range
    if k >= 2:
        return k, dict(phi.table)
    A = phi.matrix
    return 2, {w: phi.table[w[:1]] for w in A.words(2)}


@dataclass
class BlockOperator:
    """The transfer operator restricted to functions of (k-1)-blocks."""

    matrix: np.ndarray
    blocks: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int]
    k: int
    table: dict[tuple[int, ...], float]
    base: TransitionMatrix


def build_operator(phi_plus: FiniteRangePotential) -> BlockOperator:
    """Assemble the weighted block matrix of the transfer operator.

    Requires a one-sided potential (window within the future coordinates).
    The matrix is primitive exactly when the transition matrix is mixing.
    """
    if phi_plus.lo < 0:
        raise ValueError(
            "potential must be one-sided (window in coordinates >= 0); "
            "apply sinai_reduce first"
        )
    A = phi_plus.matrix
    k, table = _k_word_table(phi_plus)
    blocks = tuple(A.words(k - 1))
    if not blocks:
        raise ValueError("empty block space")
    index = {b: i for i, b in enumerate(blocks)}
    M = np.zeros((len(blocks), len(blocks)))
    for f, value in table.items():
        v, u = f[:-1], f[1:]
        M[index[u], index[v]] = math.exp(value)
    return BlockOperator(M, blocks, index, k, table, A)


@dataclass
class SpectralData:
    """Leading eigendata of a transfer operator.

    eigenfunction h solves L h = lambda h; eigenmeasure is the adjoint
    eigenvector, normalized to a probability with <eigenmeasure,
    eigenfunction> = 1.  pressure = log lambda.  gap is the modulus ratio of
    the second to the leading eigenvalue, estimated by deflated power
    iteration; it is < 1 for primitive operators.
    """

    blocks: tuple[tuple[int, ...], ...]
    h: np.ndarray
    nu: np.ndarray
    eigenvalue: float
    pressure: float
    gap: float
    residual_inf: float
    residual_l1: float
    iterations: int
    k: int

    @property
    def eigenfunction(self) -> dict[tuple[int, ...], float]:
        return {b: float(v) for b, v in zip(self.blocks, self.h)}

    @property
    def eigenmeasure(self) -> dict[tuple[int, ...], float]:
        return {b: float(v) for b, v in zip(self.blocks, self.nu)}

    def to_json(self) -> dict:
        return {
            "lambda": self.eigenvalue,
            "pressure": self.pressure,
            "gap": self.gap,
            "residual_inf": self.residual_inf,
            "residual_l1": self.residual_l1,
            "iterations": self.iterations,
        }


def _power_iterate(M: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray, int]:
    v = np.ones(M.shape[0])
    v /= v.sum()
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        total = w.sum()
        if total <= 0:
            raise IterationError("operator lost positivity; input not primitive?")
        new_lam = total / v.sum()
        w = w / total
        if abs(new_lam - lam) < tol * new_lam:
            residual = np.max(np.abs(M @ w - new_lam * w))
            if residual < tol * new_lam:
                return new_lam, w, it
        lam, v = new_lam, w
    raise IterationError(
        f"power iteration failed to converge within {max_iter} iterations; "
        "the block operator is likely not primitive (non-mixing matrix)"
    )


def _second_modulus(M: np.ndarray, lam: float, h: np.ndarray, eta: np.ndarray) -> float:
    n = M.shape[0]
    if n == 1:
        return 0.0
    D = M - lam * np.outer(h, eta) / float(eta @ h)
    rng_state = np.arange(1, n + 1, dtype=float)
    v = rng_state / np.linalg.norm(rng_state)
    steps = 256
    norm0 = 1.0
    for _ in range(steps):
        v = D @ v
        norm = np.linalg.norm(v)
        if norm < 1e-300:
            return 0.0
        v /= norm
        norm0 *= norm ** (1.0 / steps)
    return norm0


def leading_eigendata(
    op: BlockOperator, tol: float = 1e-13, max_iter: int = 10**6
) -> SpectralData:
    """Power iteration with a deterministic all-ones start vector.

    Raises IterationError on non-convergence, which signals a non-primitive
    operator.  The returned eigenmeasure is a probability and the
    eigenfunction is scaled so that <eigenmeasure, eigenfunction> = 1.
    """
    M = op.matrix
    lam, h, it1 = _power_iterate(M, tol, max_iter)
    lam_t, eta, it2 = _power_iterate(M.T, tol, max_iter)
    eta = eta / eta.sum()
    h = h / float(eta @ h)
    gap_abs = _second_modulus(M, lam, h, eta)
    return SpectralData(
        blocks=op.blocks,
        h=h,
        nu=eta,
        eigenvalue=lam,
        pressure=math.log(lam),
        gap=min(gap_abs / lam, 1.0),
        residual_inf=float(np.max(np.abs(M @ h - lam * h))) / lam,
        residual_l1=float(np.sum(np.abs(M.T @ eta - lam * eta))) / lam,
        iterations=it1 + it2,
        k=op.k,
    )


def normalize_potential(
    phi_plus: FiniteRangePotential, spectral: SpectralData
) -> FiniteRangePotential:
    """psi = phi + log h - log h o sigma - log lambda, with L_psi 1 = 1.

    The result is registered on coordinates 1..k.  Sum over prepended
    symbols of e^psi equals 1 for every block, up to the eigen-residual.
    """
    k, table = _k_word_table(phi_plus)
    logh = {b: math.log(v) for b, v in zip(spectral.blocks, spectral.h)}
    loglam = math.log(spectral.eigenvalue)
    psi_table = {
        f: value + logh[f[:-1]] - logh[f[1:]] - loglam for f, value in table.items()
    }
    return FiniteRangePotential(phi_plus.matrix, 1, k, psi_table)


class GibbsMeasure:
    """The equilibrium state of a one-sided potential, as an exact
    stationary k-step Markov measure on future words.

    Block masses m(u) = eigenmeasure(u) * eigenfunction(u) are stationary
    for the forward transition probabilities T(u -> v) = e^{psi(f)} m(v) /
    m(u); a word mass anchors at its final block:

        mu([w_1..w_n]) = m(w_{n-k+2}..w_n) * prod_j e^{psi(w_j..w_{j+k-1})}.
    """

    def __init__(
        self,
        matrix: TransitionMatrix,
        potential: FiniteRangePotential,
        spectral: SpectralData,
        normalized: FiniteRangePotential,
    ):
        self.matrix = matrix
        self.potential = potential
        self.spectral = spectral
        self.normalized = normalized
        self.k = spectral.k
        self.blocks = spectral.blocks
        self.block_index = {b: i for i, b in enumerate(self.blocks)}
        m = spectral.nu * spectral.h
        self.m_vector = m / m.sum()
        self.m = {b: float(v) for b, v in zip(self.blocks, self.m_vector)}
        n = len(self.blocks)
        T = np.zeros((n, n))
        for f, value in normalized.table.items():
            i, j = self.block_index[f[:-1]], self.block_index[f[1:]]
            T[i, j] = math.exp(value) * self.m_vector[j] / self.m_vector[i]
        self.T = T

    @classmethod
    def from_one_sided(
        cls, matrix: TransitionMatrix, phi_plus: FiniteRangePotential, tol: float = 1e-13
    ) -> "GibbsMeasure":
        op = build_operator(phi_plus)
        spectral = leading_eigendata(op, tol)
        psi = normalize_potential(phi_plus, spectral)
        return cls(matrix, phi_plus, spectral, psi)

    @property
    def pressure(self) -> float:
        return self.spectral.pressure

    def word_mass(self, word) -> float:
        """Mass of the future cylinder through ``word``; 0 if inadmissible.

        Shift-invariance makes the mass independent of where the word is
        pinned, so only the symbols matter.
        """
        w = tuple(word)
        if not self.matrix.is_word_admissible(w):
            return 0.0
        km1 = self.k - 1
        if len(w) == 0:
            return 1.0
        if len(w) < km1:
            return sum(m for b, m in self.m.items() if b[: len(w)] == w)
        mass = self.m[w[-km1:]]
        psi = self.normalized.table
        for i in range(len(w) - self.k + 1):
            mass *= math.exp(psi[w[i : i + self.k]])
        return mass

    def cylinder_mass(self, c: Cylinder) -> float:
        return self.word_mass(c.word.symbols)

    def integral(self, phi: FiniteRangePotential) -> float:
        """Exact integral of a finite-range function: sum of table values
        weighted by word masses (well defined by shift invariance)."""
        return sum(self.word_mass(w) * v for w, v in phi.table.items())

    def entropy(self) -> float:
        """Entropy of the stationary block chain, -sum mu([f]) log T(f)."""
        total = 0.0
        for f, value in self.normalized.table.items():
            i, j = self.block_index[f[:-1]], self.block_index[f[1:]]
            step = self.T[i, j]
            total -= self.word_mass(f) * math.log(step)
        return total

    def entropy_and_variational_check(self) -> tuple[float, float]:
        """(entropy, |pressure - entropy - integral of the potential|)."""
        H = self.entropy()
        defect = abs(self.pressure - H - self.integral(self.potential))
        return H, defect

    def gibbs_constant(self) -> float:
        """K >= 1 with mu(C)/exp(S_n psi) in [1/K, K] for every cylinder,
        computed exactly from block masses and boundary weight products.

        The ratio for an (n+1)-word w equals m(end block) / prod of the
        k-1 normalized weights read past the end of w, so it ranges over
        finitely many values independent of n.
        """
        psi = self.normalized.table
        k = self.k
        ratios = []
        for u in self.matrix.words(2 * k - 2):
            tail = sum(psi[u[j : j + k]] for j in range(k - 1))
            ratios.append(self.m[u[: k - 1]] * math.exp(-tail))
        return max(max(ratios), 1.0 / min(ratios))

    def prepend_probabilities(self, block: tuple[int, ...]) -> dict[int, float]:
        """P(previous symbol = b | current leading block), i.e. the
        normalized weights e^{psi(b . block)}; they sum to 1 by L 1 = 1."""
        psi = self.normalized.table
        out = {}
        for b in self.matrix.predecessors(block[0]):
            f = (b,) + block
            if f in psi:
                out[b] = math.exp(psi[f])
        return out

    def sample_word(self, rng, n_past: int, n_future: int) -> tuple[tuple[int, ...], int]:
        """Draw a word exactly distributed as the equilibrium marginal on
        coordinates -n_past..n_future: a block from the stationary masses,
        extended forward by the transition chain (stationarity makes the
        window placement immaterial).

        Returns (symbols, start) with start = -n_past.
        """
        length = n_past + n_future + 1
        idx = _choose(rng, self.m_vector)
        word = list(self.blocks[idx])
        while len(word) < length:
            idx = _choose(rng, self.T[idx])
            word.append(self.blocks[idx][-1])
        return tuple(word[:length]), -n_past


def _choose(rng, weights: np.ndarray) -> int:
    """Inverse-CDF draw; deterministic given the generator state."""
    u = rng.random()
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i
    return len(weights) - 1

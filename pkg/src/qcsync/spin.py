"""Total-spin operators, Dicke states and singlet-state constructors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares

from .qstate import (
    MAX_QUBITS,
    StateError,
    apply_global_rotation,
    bit_table,
    expectation_op,
    n_qubits_of,
)

SVD_CUT = 1e-8


class SingletRankError(RuntimeError):
    """Numerical rank of the singlet null space is ambiguous."""


class SolverError(RuntimeError):
    """A nonlinear solve did not converge within its restart budget."""

    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (best residual {residual:.3e})")
        self.residual = residual


def catalan(half_n: int) -> int:
    if half_n < 0:
        raise ValueError("half_n must be >= 0")
    return math.comb(2 * half_n, half_n) // (half_n + 1)


def _check_even(n_qubits: int, lo: int = 2) -> None:
    if n_qubits % 2 or not lo <= n_qubits <= MAX_QUBITS:
        raise StateError(f"n_qubits must be even in [{lo}, {MAX_QUBITS}], got {n_qubits}")


# -- operators ---------------------------------------------------------------

@dataclass(frozen=True)
class SpinOperators:
    """Sparse total-spin operators ``S^j = sum_n sigma^j_n / 2`` and ``S^2``."""

    n_qubits: int
    Sx: sp.csr_matrix
    Sy: sp.csr_matrix
    Sz: sp.csr_matrix
    S2: sp.csr_matrix

    def residual(self, psi: np.ndarray) -> float:
        """Largest ``||S^j psi||`` over j in {x, y, z}, plus ``|<S^2>|``."""
        r = max(np.linalg.norm(op @ psi) for op in (self.Sx, self.Sy, self.Sz))
        return float(max(r, abs(expectation_op(psi, self.S2))))


def _site_op(op: np.ndarray, site: int, n: int) -> sp.csr_matrix:
    left = sp.identity(1 << site, format="csr")
    right = sp.identity(1 << (n - site - 1), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


@lru_cache(maxsize=16)
def spin_operators(n_qubits: int) -> SpinOperators:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise StateError(f"n_qubits outside [1, {MAX_QUBITS}]")
    sx = np.array([[0, 1], [1, 0]], dtype=complex) / 2
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
    sz = np.array([[1, 0], [0, -1]], dtype=complex) / 2
    Sx, Sy, Sz = (sum(_site_op(s, k, n_qubits) for k in range(n_qubits)).tocsr()
                  for s in (sx, sy, sz))
    S2 = (Sx @ Sx + Sy @ Sy + Sz @ Sz).tocsr()
    S2.eliminate_zeros()
    return SpinOperators(n_qubits, Sx, Sy, Sz, S2)


def spin_residual(psi: np.ndarray) -> float:
    return spin_operators(n_qubits_of(psi)).residual(psi)


def is_singlet(psi: np.ndarray, atol: float = 1e-8) -> bool:
    n = n_qubits_of(psi)
    return n % 2 == 0 and psi.ndim == 1 and spin_residual(psi) < atol


def balanced_indices(n_qubits: int) -> np.ndarray:
    """Basis indices with exactly n/2 ones (the kernel of S^z), ascending."""
    w = bit_table(n_qubits).sum(axis=1)
    return np.flatnonzero(w == n_qubits // 2)


def s2_sector_matrix(n_qubits: int) -> np.ndarray:
    """Dense S^2 restricted to the S^z = 0 sector, in :func:`balanced_indices` order.

    ``S^2 = 3N/4 + sum_{i<j} (X_i X_j + Y_i Y_j + Z_i Z_j) / 2``: the diagonal
    is ``3N/4 + sum_{i<j} z_i z_j / 2`` and each pair (i, j) with differing
    bits hops with unit amplitude to the string with those bits exchanged.
    """
    idx = balanced_indices(n_qubits)
    pos = {int(s): k for k, s in enumerate(idx)}
    bits = bit_table(n_qubits)[idx]
    z = 1 - 2 * bits
    d = len(idx)
    m = np.zeros((d, d))
    zsum = z.sum(axis=1)
    m[np.arange(d), np.arange(d)] = 3 * n_qubits / 4 + (zsum**2 - n_qubits) / 4
    for i, j in combinations(range(n_qubits), 2):
        flip = (1 << (n_qubits - 1 - i)) | (1 << (n_qubits - 1 - j))
        diff = np.flatnonzero(bits[:, i] != bits[:, j])
        for k in diff:
            m[pos[int(idx[k]) ^ flip], k] += 1.0
    return m


# -- Dicke and supersinglet --------------------------------------------------

def dicke_state(m_qubits: int, k: int) -> np.ndarray:
    """Normalized symmetric superposition of all m-bit strings with k ones."""
    if not 1 <= m_qubits <= MAX_QUBITS:
        raise StateError(f"m_qubits outside [1, {MAX_QUBITS}]")
    if not 0 <= k <= m_qubits:
        raise StateError(f"k={k} outside [0, {m_qubits}]")
    w = bit_table(m_qubits).sum(axis=1)
    psi = np.zeros(1 << m_qubits, dtype=complex)
    psi[w == k] = math.exp(-0.5 * (math.lgamma(m_qubits + 1) - math.lgamma(k + 1)
                                   - math.lgamma(m_qubits - k + 1)))
    return psi


def supersinglet(n_qubits: int) -> np.ndarray:
    """``sum_k (-1)^k |D_k> |D_{N/2-k}> / sqrt(N/2+1)`` on two halves of N/2 qubits."""
    _check_even(n_qubits)
    h = n_qubits // 2
    psi = np.zeros(1 << n_qubits, dtype=complex)
    for k in range(h + 1):
        psi += (-1) ** k * np.kron(dicke_state(h, k), dicke_state(h, h - k))
    return psi / math.sqrt(h + 1)


def supersinglet_permutation_form(n_qubits: int) -> np.ndarray:
    """Supersinglet as a weighted sum over balanced bit strings.

    A string with ``K`` ones in the first half carries the weight
    ``(-1)^K K! (N/2 - K)! / ((N/2)! sqrt(N/2 + 1))``.
    """
    _check_even(n_qubits)
    h = n_qubits // 2
    idx = balanced_indices(n_qubits)
    k1 = bit_table(n_qubits)[idx, :h].sum(axis=1)
    psi = np.zeros(1 << n_qubits, dtype=complex)
    lg = np.array([math.lgamma(k + 1) + math.lgamma(h - k + 1) - math.lgamma(h + 1)
                   for k in k1])
    psi[idx] = (-1.0) ** k1 * np.exp(lg) / math.sqrt(h + 1)
    return psi


_TO_BASIS = {
    "z": np.eye(2, dtype=complex),
    "x": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
}


def basis_change(basis: str) -> np.ndarray:
    """Unitary taking z-basis spin eigenstates to eigenstates along ``basis``."""
    try:
        return _TO_BASIS[basis.lower()]
    except KeyError:
        raise StateError(f"basis must be one of x, y, z; got {basis!r}") from None


def supersinglet_in_basis(n_qubits: int, basis: str = "z") -> np.ndarray:
    """Supersinglet built from spin-N/4 eigenstates quantized along ``basis``."""
    _check_even(n_qubits)
    h = n_qubits // 2
    u = basis_change(basis)
    psi = np.zeros(1 << n_qubits, dtype=complex)
    for k in range(h + 1):
        a = apply_global_rotation(dicke_state(h, k), u)
        b = apply_global_rotation(dicke_state(h, h - k), u)
        psi += (-1) ** k * np.kron(a, b)
    return psi / math.sqrt(h + 1)


# -- singlet subspace --------------------------------------------------------

@dataclass(frozen=True)
class SingletBasis:
    """Orthonormal basis (columns of ``vectors``) of the N-qubit singlet sector."""

    n_qubits: int
    vectors: np.ndarray
    singular_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.conj().T

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        psi = self.vectors @ np.asarray(coeffs, dtype=complex)
        return psi / np.linalg.norm(psi)


@lru_cache(maxsize=8)
def singlet_subspace(n_qubits: int) -> SingletBasis:
    """Null space of S^2 inside the S^z = 0 sector, by SVD with cutoff 1e-8.

    Raises :class:`SingletRankError` if any singular value falls in the
    ambiguous band ``(1e-10, 1e-6)`` around the cut.
    """
    _check_even(n_qubits)
    m = s2_sector_matrix(n_qubits)
    _, s, vh = np.linalg.svd(m)
    ambiguous = s[(s > SVD_CUT * 1e-2) & (s < SVD_CUT * 1e2)]
    if ambiguous.size:
        raise SingletRankError(
            f"singular values {ambiguous} too close to cutoff {SVD_CUT:g} "
            f"for n_qubits={n_qubits}")
    null = vh[s < SVD_CUT].conj().T
    vecs = np.zeros((1 << n_qubits, null.shape[1]), dtype=complex)
    vecs[balanced_indices(n_qubits)] = null
    return SingletBasis(n_qubits, vecs, s)


def random_singlet(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    basis = singlet_subspace(n_qubits)
    c = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return basis.combine(c)


# -- homogeneous singlet -----------------------------------------------------

def _neighbour_table(n_qubits: int):
    """For every weight N/2+1 and N/2-1 string, the positions of its balanced neighbours."""
    idx = balanced_indices(n_qubits)
    pos = {int(s): k for k, s in enumerate(idx)}
    bits = bit_table(n_qubits)
    w = bits.sum(axis=1)
    rows = []
    for s in np.flatnonzero((w == n_qubits // 2 + 1) | (w == n_qubits // 2 - 1)):
        heavy = w[s] > n_qubits // 2
        flips = [q for q in range(n_qubits) if bits[s, q] == (1 if heavy else 0)]
        rows.append([pos[int(s) ^ (1 << (n_qubits - 1 - q))] for q in flips])
    return idx, np.array(rows)


def phase_constraint_residuals(phases: np.ndarray, n_qubits: int) -> np.ndarray:
    """Complex sums of neighbouring phase factors; all vanish for a homogeneous singlet."""
    _, table = _neighbour_table(n_qubits)
    return np.exp(1j * np.asarray(phases))[table].sum(axis=1)


@dataclass(frozen=True)
class HomogeneousSinglet:
    state: np.ndarray
    phases: np.ndarray
    residual: float
    restarts: int


def solve_homogeneous_singlet(n_qubits: int, rng: np.random.Generator,
                              restarts: int = 50, tol: float = 1e-10) -> HomogeneousSinglet:
    """Find balanced-string phases solving the local consistency relations.

    Nonlinear least squares on the real and imaginary parts of every
    neighbour sum, from uniform random phases, restarting up to ``restarts``
    times.  Raises :class:`SolverError` with the best residual on failure.
    """
    _check_even(n_qubits)
    idx, table = _neighbour_table(n_qubits)
    d = len(idx)

    def resid(ph):
        s = np.exp(1j * ph)[table].sum(axis=1)
        return np.concatenate([s.real, s.imag])

    best = (np.inf, None)
    for attempt in range(1, restarts + 1):
        x0 = rng.uniform(0, 2 * np.pi, size=d)
        if table.size == 0:
            sol = x0
        else:
            sol = least_squares(resid, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15).x
        r = float(np.abs(resid(sol)).max()) if table.size else 0.0
        if r < best[0]:
            best = (r, sol)
        if r < tol:
            break
    r, sol = best
    if r >= tol:
        raise SolverError(f"homogeneous singlet N={n_qubits} did not converge "
                          f"in {restarts} restarts", r)
    sol = np.mod(sol - sol[0], 2 * np.pi)
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[idx] = np.exp(1j * sol) / math.sqrt(d)
    return HomogeneousSinglet(psi, sol, r, attempt)


def homogeneous_singlet(n_qubits: int, rng: np.random.Generator, restarts: int = 50) -> np.ndarray:
    return solve_homogeneous_singlet(n_qubits, rng, restarts).state


def singlet_residual_report(psi: np.ndarray) -> dict:
    ops = spin_operators(n_qubits_of(psi))
    return {
        "norm": float(np.linalg.norm(psi)),
        "S2": float(expectation_op(psi, ops.S2).real),
        "residual": ops.residual(psi),
    }

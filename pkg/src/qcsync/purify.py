"""Bell-pair purification under an unknown local phase, and the sector check.

Pairs are two-qubit density matrices on (Alice-side, Bob-side).  A pure pair
``exp(i phi Z_1 / 2)|Psi->`` carries the local phase convention mismatch
``phi``.  One BBPSSW round twirls both copies into Werner form, converts
``|Psi->`` to ``|Phi+>`` with a unilateral Y, applies bilateral CNOTs,
keeps the source pair when the two target qubits agree in Z, and converts
back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qstate as qs
from .spin import SingletBasis

_S = 1 / math.sqrt(2)
PSI_MINUS = np.array([0, _S, -_S, 0], dtype=complex)
PHI_PLUS = np.array([_S, 0, 0, _S], dtype=complex)
PHI_MINUS = np.array([_S, 0, 0, -_S], dtype=complex)
PSI_PLUS = np.array([0, _S, _S, 0], dtype=complex)
# BellDiagonalState field order
BELL_BASIS = np.stack([PSI_MINUS, PHI_PLUS, PHI_MINUS, PSI_PLUS], axis=1)

SECTOR_THRESHOLD = -0.5
SECTOR_MAX_STDERR = 0.1


class PurificationError(RuntimeError):
    pass


class IndeterminateSector(PurificationError):
    """Standard error of the Z1Z2 estimate is too large to decide."""


@dataclass(frozen=True)
class BellDiagonalState:
    p_psi_minus: float
    p_phi_plus: float
    p_phi_minus: float
    p_psi_plus: float

    def __post_init__(self):
        w = self.weights
        if np.any(w < -1e-12) or abs(w.sum() - 1) > 1e-10:
            raise ValueError(f"Bell weights must be a probability vector, got {w}")

    @classmethod
    def from_weights(cls, w) -> "BellDiagonalState":
        return cls(*(float(x) for x in w))

    @classmethod
    def werner(cls, fidelity: float) -> "BellDiagonalState":
        q = (1 - fidelity) / 3
        return cls(fidelity, q, q, q)

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.p_psi_minus, self.p_phi_plus, self.p_phi_minus, self.p_psi_plus])

    @property
    def fidelity(self) -> float:
        return self.p_psi_minus

    @property
    def zz(self) -> float:
        """``<Z1 Z2>``: +1 on the Phi states, -1 on the Psi states."""
        return self.p_phi_plus + self.p_phi_minus - self.p_psi_minus - self.p_psi_plus

    def density(self) -> np.ndarray:
        return (BELL_BASIS * self.weights) @ BELL_BASIS.conj().T


def preskill_input(phi: float) -> np.ndarray:
    """``exp(i phi Z_1 / 2)|Psi->`` as a density matrix."""
    if not -math.pi - 1e-12 <= phi <= math.pi + 1e-12:
        raise ValueError("phi must lie in [-pi, pi]")
    u = np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)])
    return qs.to_density(qs.apply_operator(PSI_MINUS, 1, u))


def flip_sector(rho: np.ndarray) -> np.ndarray:
    """Apply the pi rotation ``exp(i pi Z_1 / 2)`` to Alice's side."""
    return qs.apply_operator(rho, 1, np.diag([1j, -1j]))


def bell_twirl(rho: np.ndarray) -> BellDiagonalState:
    """Bell-basis diagonal of a pair; singlet fidelity is unchanged."""
    rho = qs.to_density(rho)
    w = np.real(np.einsum("ia,ij,ja->a", BELL_BASIS.conj(), rho, BELL_BASIS))
    w = np.clip(w, 0, None)
    return BellDiagonalState.from_weights(w / w.sum())


def werner_twirl(state: BellDiagonalState) -> BellDiagonalState:
    """Average over bilateral rotations U x U: keeps F, spreads the rest evenly."""
    return BellDiagonalState.werner(state.fidelity)


def werner_twirl_matrix(rho: np.ndarray) -> np.ndarray:
    f = float(np.real(PSI_MINUS.conj() @ rho @ PSI_MINUS))
    p = np.outer(PSI_MINUS, PSI_MINUS.conj())
    return f * p + (1 - f) / 3 * (np.eye(4) - p)


def cnot_step(state: BellDiagonalState) -> tuple[BellDiagonalState, float]:
    """Closed-form Y / bilateral-CNOT / parity postselection / Y map on Bell weights."""
    sm, fp, fm, sp_ = state.weights
    norm = (sm + sp_) ** 2 + (fp + fm) ** 2
    if norm <= 0:
        raise PurificationError("zero success probability")
    out = np.array([sm**2 + sp_**2, 2 * fp * fm, fp**2 + fm**2, 2 * sm * sp_]) / norm
    return BellDiagonalState.from_weights(out), float(norm)


def bbpssw_round(state: BellDiagonalState) -> tuple[BellDiagonalState, float]:
    """One BBPSSW round on two identical copies; returns (kept pair, success probability)."""
    return cnot_step(werner_twirl(state))


# -- full density-matrix route (oracle for the closed form) ------------------

def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    bits = qs.bit_table(n)
    idx = np.arange(1 << n)
    flip = 1 << (n - target)
    return np.where(bits[:, control - 1] == 1, idx ^ flip, idx)


def cnot_step_dm(rho: np.ndarray) -> tuple[np.ndarray, float]:
    """Two-copy simulation of :func:`cnot_step` on a 4x4 pair density matrix.

    Qubit order is (a1, b1, a2, b2); pair 1 is the source and survives.
    """
    big = np.kron(rho, rho)
    for q in (2, 4):
        big = qs.apply_operator(big, q, qs.Y)
    perm = _cnot_perm(4, 2, 4)[_cnot_perm(4, 1, 3)]
    big = big[np.ix_(perm, perm)]
    bits = qs.bit_table(4)
    keep = bits[:, 2] == bits[:, 3]
    big = big * np.outer(keep, keep)
    p = float(np.trace(big).real)
    if p <= 0:
        raise PurificationError("zero success probability")
    out = qs.partial_trace(big / p, [1, 2])
    out = qs.apply_operator(out, 2, qs.Y)
    return qs.hermitize(out), p


def bbpssw_round_dm(rho: np.ndarray) -> tuple[np.ndarray, float]:
    return cnot_step_dm(werner_twirl_matrix(qs.to_density(rho)))


# -- iteration ----------------------------------------------------------------

@dataclass
class PurificationTrace:
    """Round 0 is the input pair; round r > 0 is the pair kept after r rounds."""

    phi: float | None
    fidelity: list[float] = field(default_factory=list)
    success_prob: list[float] = field(default_factory=list)
    zz: list[float] = field(default_factory=list)
    states: list[BellDiagonalState] = field(default_factory=list, repr=False)

    def record(self, state: BellDiagonalState, p: float) -> None:
        self.states.append(state)
        self.fidelity.append(state.fidelity)
        self.success_prob.append(p)
        self.zz.append(state.zz)

    @property
    def final(self) -> BellDiagonalState:
        return self.states[-1]

    def rows(self) -> list[tuple]:
        return [(self.phi, r, f, p, z) for r, (f, p, z)
                in enumerate(zip(self.fidelity, self.success_prob, self.zz))]


def purify(pair, rounds: int, phi: float | None = None) -> PurificationTrace:
    """Iterate :func:`bbpssw_round` on a pair (density matrix or Bell weights)."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    state = pair if isinstance(pair, BellDiagonalState) else bell_twirl(pair)
    tr = PurificationTrace(phi)
    tr.record(state, 1.0)
    for _ in range(rounds):
        state, p = bbpssw_round(state)
        tr.record(state, p)
    return tr


def purify_sweep(phi_grid, rounds: int) -> list[PurificationTrace]:
    return [purify(preskill_input(float(phi)), rounds, phi=float(phi)) for phi in phi_grid]


# -- sector check --------------------------------------------------------------

def sample_zz(state: BellDiagonalState, shots: int, rng: np.random.Generator) -> np.ndarray:
    """``shots`` +-1 outcomes of measuring Z1 Z2 on copies of the pair."""
    p_same = state.p_phi_plus + state.p_phi_minus
    return np.where(rng.random(shots) < p_same, 1, -1)


@dataclass(frozen=True)
class SectorDecision:
    decision: str
    estimate: float
    stderr: float


def sector_check(samples, threshold: float = SECTOR_THRESHOLD,
                 max_stderr: float = SECTOR_MAX_STDERR) -> SectorDecision:
    """Decide whether the purified pairs sit in the singlet sector.

    A converged singlet gives ``<Z1 Z2> = -1``; a failed run drifts to 0.
    Flip when the estimate exceeds ``threshold``.
    """
    s = np.asarray(samples, dtype=float)
    if s.size < 2:
        raise IndeterminateSector("need at least two samples")
    est = float(s.mean())
    err = float(s.std(ddof=1) / math.sqrt(s.size))
    # all-equal samples give zero spread; fall back to the binomial bound
    err = max(err, 1 / s.size)
    if err >= max_stderr:
        raise IndeterminateSector(f"stderr {err:.3f} >= {max_stderr}; take more samples")
    return SectorDecision("flip" if est > threshold else "keep", est, err)


@dataclass
class SectorResult:
    phi: float
    first: PurificationTrace
    check: SectorDecision
    final: PurificationTrace

    @property
    def flipped(self) -> bool:
        return self.check.decision == "flip"


def purify_with_sector_check(phi: float, rounds: int, rng: np.random.Generator,
                             shots: int = 1000) -> SectorResult:
    """Purify, test ``<Z1 Z2>`` on ``shots`` sacrificed pairs, flip and redo if needed."""
    raw = preskill_input(phi)
    first = purify(raw, rounds, phi=phi)
    check = sector_check(sample_zz(first.final, shots, rng))
    final = first
    if check.decision == "flip":
        final = purify(flip_sector(raw), rounds, phi=phi)
    return SectorResult(phi, first, check, final)


# -- singlet-sector projection (stand-in for supersinglet distillation) --------

def singlet_project(rho: np.ndarray, basis: SingletBasis) -> np.ndarray:
    """``P rho P / tr(P rho P)`` with P the projector onto the singlet sector."""
    rho = qs.to_density(rho)
    v = basis.vectors
    if v.shape[0] != rho.shape[0]:
        raise ValueError("basis and state dimensions differ")
    inner = v.conj().T @ rho @ v
    w = float(np.trace(inner).real)
    if w <= 1e-14:
        raise PurificationError("state has no weight in the singlet sector")
    return qs.hermitize(v @ inner @ v.conj().T / w)

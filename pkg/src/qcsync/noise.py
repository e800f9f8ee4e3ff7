"""Phase-flip noise on prepared singlets, the worst-case Z-rotation error, and fidelities."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from . import qstate as qs
from .protocol import AmplitudeTable, amplitude_correlation, group_of
from .spin import supersinglet


@dataclass(frozen=True)
class DephasingParams:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"phase-flip probability must lie in [0, 1], got {self.p}")


def _check_p(p: float) -> float:
    return DephasingParams(float(p)).p


def dephase(rho: np.ndarray, p: float) -> np.ndarray:
    """Independent phase flips ``{sqrt(1-p) I, sqrt(p) Z}`` on every qubit.

    Each qubit whose bit differs between row and column scales the element
    by ``1 - 2p``, so the composed map is a Hadamard product with
    ``(1 - 2p) ** hamming(i, j)``.
    """
    p = _check_p(p)
    rho = qs.to_density(rho)
    n = qs.n_qubits_of(rho)
    idx = np.arange(1 << n)
    diff = idx[:, None] ^ idx[None, :]
    ham = np.zeros_like(diff)
    for q in range(n):
        ham += (diff >> q) & 1
    return rho * (1 - 2 * p) ** ham


def dephase_kraus(rho: np.ndarray, p: float) -> np.ndarray:
    """Same channel, applied qubit by qubit with explicit Kraus operators."""
    p = _check_p(p)
    rho = qs.to_density(rho)
    for q in range(1, qs.n_qubits_of(rho) + 1):
        rho = (1 - p) * rho + p * qs.apply_operator(rho, q, qs.Z)
    return rho


def dephase_explicit(rho: np.ndarray, p: float) -> np.ndarray:
    """Brute-force sum over all ``2^N`` flip patterns s, weighted ``p^|s| (1-p)^(N-|s|)``."""
    p = _check_p(p)
    rho = qs.to_density(rho)
    n = qs.n_qubits_of(rho)
    signs = 1 - 2 * qs.bit_table(n)
    out = np.zeros_like(rho)
    for s in itertools.product((0, 1), repeat=n):
        k = sum(s)
        w = p**k * (1 - p) ** (n - k)
        if w == 0:
            continue
        # diagonal of Z^s = Z_1^s1 ... Z_N^sN
        d = np.prod(np.where(np.array(s, dtype=bool), signs, 1), axis=1)
        out += w * (d[:, None] * rho * d[None, :])
    return out


def dephased_amplitudes(n_qubits: int, p: float, state: np.ndarray | None = None) -> AmplitudeTable:
    """``Tr(rho X_1 X_n)`` for the dephased supersinglet (or ``state``)."""
    if n_qubits < 4 or n_qubits % 2:
        raise ValueError("n_qubits must be even and >= 4")
    psi = supersinglet(n_qubits) if state is None else state
    tab = amplitude_correlation(dephase(psi, p), "X")
    return AmplitudeTable(n_qubits, tab.amplitudes, "dephased")


def dephase_sweep(n_list, p_grid) -> list[tuple[int, float, int, str, float]]:
    """Rows ``(N, p, party, group, amplitude)``."""
    rows = []
    for n in n_list:
        psi = supersinglet(n)
        for p in p_grid:
            tab = dephased_amplitudes(n, float(p), psi)
            rows += [(n, float(p), k, group_of(k, n), a) for k, a in tab.amplitudes.items()]
    return rows


def dephase_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "p", "party", "group", "amplitude"])
    for n, p, k, g, a in rows:
        w.writerow([n, f"{p:.17g}", k, g, f"{a:.17g}"])
    return buf.getvalue()


def preskill_worst_case(singlet: np.ndarray, epsilon: float) -> np.ndarray:
    """``exp(-i eps Z_1)|S>``: the systematic rotation behind a fidelity ``cos^2 eps``."""
    return qs.apply_operator(singlet, 1, np.diag([np.exp(-1j * epsilon), np.exp(1j * epsilon)]))


def fidelity(state: np.ndarray, target: np.ndarray) -> float:
    """``<target|rho|target>`` for a pure target; ``state`` may be pure or mixed."""
    target = np.asarray(target)
    if target.ndim != 1:
        raise ValueError("target must be a pure state vector")
    if state.shape[0] != target.shape[0]:
        raise ValueError(f"dimension mismatch: {state.shape[0]} vs {target.shape[0]}")
    if qs.is_density(state):
        f = np.real(target.conj() @ state @ target)
    else:
        f = abs(np.vdot(target, state)) ** 2
    return float(min(1.0, max(0.0, f)))

"""Timing-error budget: systematic offset from imperfect fidelity plus shot noise."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .protocol import amplitude_closed_form, check_window, p00_closed_form

# inverse angular frequencies, seconds
CLOCK_PRESETS = {"cs": 17e-12, "sr": 0.4e-15}


@dataclass(frozen=True)
class ErrorBudget:
    M: float
    F: float
    omega: float
    delta_t_F: float
    delta_t_SQL: float
    delta_t_total: float

    def in_seconds(self, clock: str) -> float:
        """Total error for a preset clock, treating ``omega`` as dimensionless."""
        return self.delta_t_total * self.omega * CLOCK_PRESETS[clock]


def _check_F(F: float) -> None:
    if not 0 < F <= 1:
        raise ValueError(f"fidelity must lie in (0, 1], got {F}")


def _check_M(M: float) -> None:
    if not M >= 1:
        raise ValueError(f"shot count must be >= 1, got {M}")


def delta_t_fidelity(F: float, omega: float = 1.0) -> float:
    _check_F(F)
    return 2 * math.sqrt(1 - F) / omega


def delta_t_shot(M: float, omega: float = 1.0) -> float:
    _check_M(M)
    return 1 / (omega * math.sqrt(2 * M))


def delta_t_total(M: float, F: float, omega: float = 1.0) -> ErrorBudget:
    dtf = delta_t_fidelity(F, omega)
    dts = delta_t_shot(M, omega)
    total = math.sqrt(1 / (2 * M) + 4 * (1 - F)) / omega
    return ErrorBudget(M, F, omega, dtf, dts, total)


def shot_probabilities(n: int, t: float, epsilon: float, n_qubits: int,
                       omega: float = 1.0) -> tuple[float, float]:
    """Supersinglet probabilities of party ``n`` reading + / - after a Z offset ``epsilon``."""
    if not 2 <= n <= n_qubits:
        raise ValueError(f"party must lie in [2, {n_qubits}]")
    p00 = p00_closed_form(n, n_qubits)
    p01 = 0.5 - p00
    h = (omega * t - 2 * epsilon) / 2
    p_plus = 2 * p00 * math.cos(h) ** 2 + 2 * p01 * math.sin(h) ** 2
    return p_plus, 1 - p_plus


def binomial_xbar_std(p_plus: float, M: float) -> float:
    """Exact standard deviation of ``x = (2k - M)/M`` for ``k ~ Binomial(M, p_plus)``."""
    return 2 * math.sqrt(p_plus * (1 - p_plus) / M)


def gaussian_xbar_std(p_plus: float, M: float) -> float:
    """Width ``sqrt(2 p+ p- / M)`` of the Gaussian approximation used for the shot-noise floor."""
    return math.sqrt(2 * p_plus * (1 - p_plus) / M)


@dataclass(frozen=True)
class TimingMC:
    n_qubits: int
    party: int
    t: float
    M: int
    trials: int
    epsilon: float
    omega: float
    mean_t: float
    std_t: float
    std_xbar: float
    # std of t-hat rescaled by |A_n sin(omega t)|, comparable to delta_t_shot
    std_t_normalized: float

    @property
    def bias(self) -> float:
        return self.mean_t - self.t


def monte_carlo_timing(n_qubits: int, t: float, M: int, trials: int,
                       rng: np.random.Generator, party: int = 2,
                       epsilon: float = 0.0, omega: float = 1.0) -> TimingMC:
    """Empirical spread of the arccos time estimate over ``trials`` runs of ``M`` shots."""
    if trials < 100:
        raise ValueError("trials must be >= 100")
    _check_M(M)
    check_window(t, omega)
    amp = amplitude_closed_form(n_qubits)[party]
    p_plus, _ = shot_probabilities(party, t, epsilon, n_qubits, omega)
    k = rng.binomial(M, p_plus, size=trials)
    xbar = (2 * k - M) / M
    that = np.arccos(np.clip(xbar / amp, -1, 1)) / omega
    std_t = float(that.std(ddof=1))
    slope = abs(amp * math.sin(omega * t))
    return TimingMC(n_qubits, party, t, M, trials, epsilon, omega,
                    float(that.mean()), std_t, float(xbar.std(ddof=1)), std_t * slope)


def error_sweep(M_grid, F_list, omega: float = 1.0) -> list[tuple[float, float, float, float, float]]:
    """Rows ``(M, F, dt*omega, dt_cs_ps, dt_sr_fs)`` in grid order (F outer, M inner)."""
    if len(M_grid) == 0 or len(F_list) == 0:
        raise ValueError("grids must be nonempty")
    rows = []
    for F in F_list:
        for M in M_grid:
            b = delta_t_total(float(M), float(F), omega)
            dto = b.delta_t_total * omega
            rows.append((float(M), float(F), dto,
                         dto * CLOCK_PRESETS["cs"] * 1e12, dto * CLOCK_PRESETS["sr"] * 1e15))
    return rows


def error_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["M", "F", "dt_omega", "dt_cs_ps", "dt_sr_fs"])
    for r in rows:
        w.writerow([f"{x:.17g}" for x in r])
    return buf.getvalue()

"""Search over singlet states for the largest geometric-mean signal amplitude."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import qstate as qs
from .protocol import AmplitudeTable, amplitude_correlation
from .purify import PSI_MINUS
from .spin import singlet_subspace, supersinglet

AMP_FLOOR = 1e-15
BOUND_TOL = 1e-9


class OptimizerError(RuntimeError):
    pass


class BoundViolation(AssertionError):
    pass


def geomean(amps) -> float:
    a = np.maximum(np.abs(np.asarray(list(amps), dtype=float)), AMP_FLOOR)
    return float(np.exp(np.log(a).mean()))


def objective_geomean(state: np.ndarray) -> float:
    """Geometric mean of ``|A_n|`` over parties 2..N (raises on non-singlets)."""
    return geomean(amplitude_correlation(state, "X").amplitudes.values())


def supersinglet_objective(n_qubits: int) -> float:
    return objective_geomean(supersinglet(n_qubits))


# -- N = 4 two-parameter family ----------------------------------------------

def _bell_pairs4() -> np.ndarray:
    return np.kron(PSI_MINUS, PSI_MINUS)


def n4_candidate(theta: float, phi: float, atol: float = 1e-12) -> np.ndarray | None:
    """``cos(theta)|Psi->_12 |Psi->_34 + e^{i phi} sin(theta)|S_4>``, renormalized.

    Returns None when the superposition has (near-)zero norm.
    """
    v = math.cos(theta) * _bell_pairs4() + np.exp(1j * phi) * math.sin(theta) * supersinglet(4)
    nrm = np.linalg.norm(v)
    if nrm < atol:
        return None
    return v / nrm


@dataclass
class ScanResult:
    thetas: np.ndarray
    phis: np.ndarray
    values: np.ndarray  # shape (len(thetas), len(phis)); NaN marks skipped points
    best: float
    argmax: list[tuple[float, float]]
    local_maxima: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return int(np.isnan(self.values).sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "phi", "objective"])
        for i, th in enumerate(self.thetas):
            for j, ph in enumerate(self.phis):
                v = self.values[i, j]
                w.writerow([f"{th:.17g}", f"{ph:.17g}", "nan" if np.isnan(v) else f"{v:.17g}"])
        return buf.getvalue()

    def maxima_json(self) -> str:
        return json.dumps({
            "best": self.best,
            "argmax": [{"theta": t, "phi": p} for t, p in self.argmax],
            "local_maxima": [{"theta": t, "phi": p, "objective": v} for t, p, v in self.local_maxima],
        }, indent=2)


def scan_n4(theta_steps: int = 64, phi_steps: int = 64, tie_tol: float = 1e-9) -> ScanResult:
    """Evaluate the objective on ``theta = i pi/theta_steps``, ``phi = 2 pi j/phi_steps``.

    Both axes are periodic (theta and theta + pi give the same ray), so the
    half-open grid covers the whole family.
    """
    if theta_steps < 8 or phi_steps < 8:
        raise ValueError("need at least 8 steps per axis")
    thetas = np.pi * np.arange(theta_steps) / theta_steps
    phis = 2 * np.pi * np.arange(phi_steps) / phi_steps
    vals = np.full((theta_steps, phi_steps), np.nan)
    for i, th in enumerate(thetas):
        for j, ph in enumerate(phis):
            psi = n4_candidate(th, ph)
            if psi is not None:
                vals[i, j] = objective_geomean(psi)
    best = float(np.nanmax(vals))
    arg = [(float(thetas[i]), float(phis[j])) for i, j in zip(*np.nonzero(vals >= best - tie_tol))]
    # periodic 3x3 neighbourhood maxima
    filled = np.nan_to_num(vals, nan=-np.inf)
    neigh = np.max([np.roll(np.roll(filled, di, 0), dj, 1)
                    for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)], axis=0)
    loc = [(float(thetas[i]), float(phis[j]), float(vals[i, j]))
           for i, j in zip(*np.nonzero(filled >= neigh)) if filled[i, j] > 0]
    loc.sort(key=lambda r: -r[2])
    return ScanResult(thetas, phis, vals, best, arg, loc)


def permutation_overlap(state: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Largest ``|<P S|psi>|`` over qubit permutations P of the supersinglet."""
    n = qs.n_qubits_of(state)
    s = supersinglet(n).reshape((2,) * n)
    best, arg = -1.0, ()
    for perm in itertools.permutations(range(n)):
        ov = abs(np.vdot(np.transpose(s, perm).ravel(), state))
        if ov > best:
            best, arg = float(ov), tuple(p + 1 for p in perm)
    return best, arg


# -- general singlet-subspace search -------------------------------------------

class _SubspaceObjective:
    """``A_n = c^H M_n c`` with ``M_n = V^H X_1 X_n V`` precomputed on the singlet basis."""

    def __init__(self, n_qubits: int):
        if n_qubits not in (4, 6):
            raise ValueError("general optimization supports n_qubits in {4, 6}")
        self.n = n_qubits
        self.basis = singlet_subspace(n_qubits)
        v = self.basis.vectors
        idx = np.arange(1 << n_qubits)
        self.mats = []
        for k in range(2, n_qubits + 1):
            mask = (1 << (n_qubits - 1)) | (1 << (n_qubits - k))
            self.mats.append(v.conj().T @ v[idx ^ mask])
        self.dim = self.basis.dim

    def coeffs(self, x: np.ndarray) -> np.ndarray:
        c = x[: self.dim] + 1j * x[self.dim:]
        return c / np.linalg.norm(c)

    def __call__(self, x: np.ndarray) -> float:
        c = self.coeffs(x)
        return geomean(np.real(c.conj() @ m @ c) for m in self.mats)


def pattern_search(f, x0: np.ndarray, step: float = 0.5, tol: float = 1e-10,
                   max_evals: int = 200_000) -> tuple[np.ndarray, float, bool]:
    """Maximize ``f`` by compass moves along each coordinate, halving the step on failure."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    evals = 1
    while step > tol:
        if evals >= max_evals:
            return x, fx, False
        improved = False
        for i in range(x.size):
            for s in (step, -step):
                y = x.copy()
                y[i] += s
                fy = f(y)
                evals += 1
                if fy > fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step *= 0.5
    return x, fx, True


@dataclass
class OptimizeResult:
    state: np.ndarray
    objective: float
    restarts: int
    converged: int
    history: list[float]


def optimize_singlet(n_qubits: int, restarts: int, rng: np.random.Generator,
                     method: str = "pattern", max_evals: int = 200_000) -> OptimizeResult:
    """Maximize the geometric-mean amplitude over unit vectors in the singlet subspace."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if method not in ("pattern", "nelder-mead"):
        raise ValueError("method must be 'pattern' or 'nelder-mead'")
    obj = _SubspaceObjective(n_qubits)
    best_x, best_f, ok, hist = None, -1.0, 0, []
    for _ in range(restarts):
        x0 = rng.standard_normal(2 * obj.dim)
        if method == "pattern":
            x, fx, conv = pattern_search(obj, x0, max_evals=max_evals)
        else:
            r = minimize(lambda y: -obj(y), x0, method="Nelder-Mead",
                         options={"xatol": 1e-10, "fatol": 1e-13, "maxfev": max_evals})
            x, fx, conv = r.x, -r.fun, bool(r.success)
        ok += conv
        hist.append(fx)
        if fx > best_f:
            best_x, best_f = x, fx
    if not ok:
        raise OptimizerError(f"no restart converged within {max_evals} evaluations")
    state = obj.basis.combine(obj.coeffs(best_x))
    return OptimizeResult(state, objective_geomean(state), restarts, ok, hist)


# -- reduced-state checks -------------------------------------------------------

def werner_fit(rho2: np.ndarray) -> tuple[float, float]:
    """Least-squares ``x`` in ``x|Psi-><Psi-| + (1-x) I/4`` and the max-abs residual."""
    f = float(np.real(PSI_MINUS.conj() @ rho2 @ PSI_MINUS))
    x = (4 * f - 1) / 3
    model = x * np.outer(PSI_MINUS, PSI_MINUS.conj()) + (1 - x) * np.eye(4) / 4
    return x, float(np.abs(rho2 - model).max())


@dataclass
class BoundReport:
    amplitudes: AmplitudeTable
    upper_margin: float  # min over n of 1/3 - A_n
    lower_margin: float  # min over n of A_n + 1
    werner_x: dict[int, float]
    werner_residual: float

    @property
    def ok(self) -> bool:
        return self.upper_margin >= -BOUND_TOL and self.lower_margin >= -BOUND_TOL


def amplitude_bound_check(state: np.ndarray, strict: bool = True) -> BoundReport:
    """Check ``-1 <= A_n <= 1/3`` and the Werner form of every reduced pair (1, n)."""
    tab = amplitude_correlation(state, "X")
    a = tab.as_array()
    n = tab.n_qubits
    xs, res = {}, 0.0
    for k in range(2, n + 1):
        x, r = werner_fit(qs.partial_trace(state, [1, k]))
        xs[k] = x
        res = max(res, r)
    rep = BoundReport(tab, float(np.min(1 / 3 - a)), float(np.min(a + 1)), xs, res)
    if strict and not rep.ok:
        raise BoundViolation(
            f"amplitude outside [-1, 1/3]: margins {rep.upper_margin:.3e}, {rep.lower_margin:.3e}")
    return rep

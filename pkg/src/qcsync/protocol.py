"""The multiparty clock-synchronization protocol on a shared singlet.

Alice holds qubit 1 and measures it in the X basis; every other party n
reads a signal ``A_n cos(omega t)`` from X measurements on its own qubit,
where t is the time elapsed since Alice's measurement.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import qstate as qs
from .spin import is_singlet, spin_residual

PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)
AMP_ATOL = 1e-10


class ProtocolError(ValueError):
    pass


def group_of(party: int, n_qubits: int) -> str:
    """Group I holds qubits [1, N/2], Group II holds [N/2+1, N]."""
    if not 1 <= party <= n_qubits:
        raise ProtocolError(f"party {party} outside [1, {n_qubits}]")
    return "I" if party <= n_qubits // 2 else "II"


@dataclass
class AmplitudeTable:
    n_qubits: int
    amplitudes: dict[int, float]
    method: str = ""

    @property
    def parties(self) -> list[int]:
        return sorted(self.amplitudes)

    def __getitem__(self, party: int) -> float:
        try:
            return self.amplitudes[party]
        except KeyError:
            raise ProtocolError(f"no amplitude for party {party}") from None

    def group(self, party: int) -> str:
        return group_of(party, self.n_qubits)

    def total(self) -> float:
        return float(sum(self.amplitudes.values()))

    def as_array(self) -> np.ndarray:
        return np.array([self.amplitudes[n] for n in self.parties])

    def max_difference(self, other: "AmplitudeTable") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))

    def check(self, atol: float = AMP_ATOL) -> None:
        """Raise if the sum rule or the [-1, 1/3] range is violated."""
        if abs(self.total() + 1) > atol:
            raise ProtocolError(f"sum rule violated: sum A_n = {self.total():.12g}")
        a = self.as_array()
        if a.min() < -1 - atol or a.max() > 1 / 3 + atol:
            raise ProtocolError(f"amplitude outside [-1, 1/3]: {a}")

    def rows(self) -> list[tuple[int, str, float]]:
        return [(n, self.group(n), self.amplitudes[n]) for n in self.parties]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["party", "group", "amplitude"])
        for n, g, a in self.rows():
            w.writerow([n, g, f"{a:.17g}"])
        return buf.getvalue()


def _require_singlet(state: np.ndarray) -> None:
    if qs.is_density(state) or not is_singlet(state):
        raise ProtocolError(
            f"input is not a singlet state (spin residual "
            f"{spin_residual(state) if not qs.is_density(state) else float('nan'):.3e})")


def alice_measure(state: np.ndarray, rng: np.random.Generator):
    """X-basis measurement of qubit 1 on a singlet; returns (outcome, post_state, prob)."""
    _require_singlet(state)
    return qs.measure(state, 1, "X", rng)


def branch_state(state: np.ndarray, outcome: int) -> tuple[np.ndarray, float]:
    """Normalized post-measurement state for Alice's outcome (+1 or -1) and its probability."""
    post, p = qs.project(state, 1, PLUS if outcome > 0 else MINUS)
    if p <= 0:
        raise ProtocolError(f"Alice outcome {outcome:+d} has zero probability")
    return qs.normalize(post), p


def correction_phases(n_qubits: int) -> np.ndarray:
    """Diagonal of ``exp(i pi S^z)``."""
    return qs.z_phases(n_qubits, -math.pi)


def apply_correction(state: np.ndarray, alice_outcome: int) -> np.ndarray:
    """Apply ``exp(i pi S^z)`` on Alice's -1 outcome; identity otherwise."""
    if alice_outcome > 0:
        return state
    return qs.apply_diagonal(state, correction_phases(qs.n_qubits_of(state)))


def _x_table(state: np.ndarray, method: str) -> AmplitudeTable:
    n = qs.n_qubits_of(state)
    return AmplitudeTable(n, {k: qs.expectation(state, {k: "X"}) for k in range(2, n + 1)}, method)


def amplitude_direct(singlet: np.ndarray) -> AmplitudeTable:
    """``A_n = <psi(0)| X_n |psi(0)>`` on the corrected post-measurement state."""
    _require_singlet(singlet)
    psi, _ = branch_state(singlet, +1)
    return _x_table(psi, "direct")


def amplitude_direct_minus(singlet: np.ndarray) -> AmplitudeTable:
    """Same as :func:`amplitude_direct` but through Alice's -1 branch and the correction."""
    _require_singlet(singlet)
    psi, _ = branch_state(singlet, -1)
    return _x_table(apply_correction(psi, -1), "direct-minus")


def _pair_table(state: np.ndarray, letter: str, method: str) -> AmplitudeTable:
    n = qs.n_qubits_of(state)
    amps = {k: qs.expectation(state, {1: letter, k: letter}) for k in range(2, n + 1)}
    return AmplitudeTable(n, amps, method)


def amplitude_correlation(singlet: np.ndarray, axis: str = "X") -> AmplitudeTable:
    """``A_n = <S| sigma_1 sigma_n |S>`` along ``axis`` (X by default).

    Also accepts density matrices, where it returns ``Tr(rho sigma_1 sigma_n)``.
    """
    if not qs.is_density(singlet):
        _require_singlet(singlet)
    return _pair_table(singlet, axis.upper(), f"correlation-{axis.upper()}")


def amplitude_postprocessed(singlet: np.ndarray, naive: bool = False) -> AmplitudeTable:
    """Signal from both uncorrected branches, ``p+ <X_n>_+ - p- <X_n>_-``.

    With ``naive=True`` the minus branch is added instead of subtracted,
    which averages the signal away.
    """
    _require_singlet(singlet)
    n = qs.n_qubits_of(singlet)
    plus, p_plus = branch_state(singlet, +1)
    minus, p_minus = branch_state(singlet, -1)
    sign = 1.0 if naive else -1.0
    amps = {k: p_plus * qs.expectation(plus, {k: "X"}) + sign * p_minus * qs.expectation(minus, {k: "X"})
            for k in range(2, n + 1)}
    return AmplitudeTable(n, amps, "naive-average" if naive else "postprocessed")


def amplitude_closed_form(n_qubits: int) -> AmplitudeTable:
    """Supersinglet amplitudes: 1/3 in Group I, ``-(N+4)/(3N)`` in Group II."""
    if n_qubits < 4 or n_qubits % 2:
        raise ProtocolError("closed form needs even n_qubits >= 4")
    g2 = -(n_qubits + 4) / (3 * n_qubits)
    amps = {k: (1 / 3 if k <= n_qubits // 2 else g2) for k in range(2, n_qubits + 1)}
    return AmplitudeTable(n_qubits, amps, "closed-form")


def p00_closed_form(party: int, n_qubits: int) -> float:
    """Probability that qubits 1 and ``party`` both read 0 in the supersinglet."""
    if group_of(party, n_qubits) == "I":
        return 1 / 3
    return (n_qubits / 2 - 1) / (3 * n_qubits)


def signal(table: AmplitudeTable, n: int, t: float, omega: float) -> float:
    return table[n] * math.cos(omega * t)


def normalize_signal(raw: float, n: int, table: AmplitudeTable) -> float:
    a = table[n]
    if a == 0:
        raise ProtocolError(f"party {n} has zero amplitude; cannot normalize")
    return raw / a


# -- sampling ---------------------------------------------------------------

@dataclass
class ProtocolConfig:
    n_qubits: int
    omega: float = 1.0
    correction_mode: str = "physical"
    seed: int = 0

    def __post_init__(self):
        if self.n_qubits % 2 or self.n_qubits < 2:
            raise ProtocolError("n_qubits must be even and >= 2")
        if not self.omega > 0:
            raise ProtocolError("omega must be positive")
        if self.correction_mode not in ("physical", "classical"):
            raise ProtocolError("correction_mode must be 'physical' or 'classical'")


@dataclass
class RunRecord:
    config: ProtocolConfig
    t_true: float
    shots: int
    alice_outcomes: list[int]
    xbar: dict[int, float]
    estimates: dict[int, float]
    samples: dict[int, list[int]] = field(default_factory=dict, repr=False)

    def to_json(self, include_samples: bool = False) -> str:
        d = {
            "config": asdict(self.config),
            "t_true": self.t_true,
            "shots": self.shots,
            "alice_plus_count": int(sum(1 for a in self.alice_outcomes if a > 0)),
            "xbar": {str(k): v for k, v in self.xbar.items()},
            "estimates": {str(k): v for k, v in self.estimates.items()},
        }
        if include_samples:
            d["alice_outcomes"] = self.alice_outcomes
            d["samples"] = {str(k): v for k, v in self.samples.items()}
        return json.dumps(d, indent=2)


def joint_x_distribution(state: np.ndarray) -> np.ndarray:
    """Probabilities of all X-basis outcome strings (bit 0 = +, bit 1 = -)."""
    n = qs.n_qubits_of(state)
    rot = state
    for q in range(1, n + 1):
        rot = qs.apply_operator(rot, q, qs.H)
    p = np.real(np.diag(rot)) if qs.is_density(rot) else np.abs(rot) ** 2
    p = np.clip(p, 0, None)
    return p / p.sum()


def branch_distributions(state: np.ndarray, t: float, omega: float, mode: str):
    """Per Alice outcome: (probability, joint X distribution of all qubits at time t).

    ``state`` may be a pure state or a density matrix.  In physical mode the
    minus branch is corrected before evolving.
    """
    out = {}
    for a, v in ((+1, PLUS), (-1, MINUS)):
        post, p = qs.project(state, 1, v)
        if p <= 0:
            out[a] = (0.0, None)
            continue
        post = qs.normalize(post)
        if mode == "physical":
            post = apply_correction(post, a)
        out[a] = (p, joint_x_distribution(qs.evolve(post, t, omega)))
    return out


def estimate_time(xbar: float, amplitude: float, omega: float) -> float:
    """Invert ``xbar = A cos(omega t)`` on the window omega t in [0, pi]."""
    return math.acos(min(1.0, max(-1.0, xbar / amplitude))) / omega


def check_window(t: float, omega: float) -> None:
    if not 0 < omega * t < math.pi:
        raise ProtocolError(f"omega*t = {omega * t:.6g} outside the inversion window (0, pi)")


def simulate_run(config: ProtocolConfig, t_true: float, shots_M: int,
                 rng: np.random.Generator, state: np.ndarray | None = None,
                 table: AmplitudeTable | None = None) -> RunRecord:
    """Run the protocol ``shots_M`` times on fresh copies of ``state``.

    Each repetition samples Alice's outcome and then every other party's
    X outcome from the exact joint distribution of that branch, so shots are
    independent protocol repetitions.  Parties normalize with ``table``
    (closed-form supersinglet amplitudes by default) and invert with arccos.
    """
    from .spin import supersinglet

    if shots_M < 1:
        raise ProtocolError("shots_M must be >= 1")
    check_window(t_true, config.omega)
    n = config.n_qubits
    if state is None:
        state = supersinglet(n)
    if table is None:
        table = amplitude_closed_form(n) if n >= 4 else AmplitudeTable(n, {2: -1.0})
    dists = branch_distributions(state, t_true, config.omega, config.correction_mode)
    p_plus = dists[+1][0]
    alice = np.where(rng.random(shots_M) < p_plus, 1, -1)
    signs = 1 - 2 * qs.bit_table(n)  # +1 for '+' outcome
    samples = np.empty((shots_M, n), dtype=int)
    for a in (+1, -1):
        mask = alice == a
        k = int(mask.sum())
        if k:
            draws = rng.choice(1 << n, size=k, p=dists[a][1])
            samples[mask] = signs[draws]
    if config.correction_mode == "classical":
        samples = samples * alice[:, None]
    xbar = {m: float(samples[:, m - 1].mean()) for m in range(2, n + 1)}
    est = {m: estimate_time(xbar[m], table[m], config.omega) for m in range(2, n + 1)}
    return RunRecord(config, t_true, shots_M, alice.tolist(), xbar, est,
                     {m: samples[:, m - 1].tolist() for m in range(2, n + 1)})


def sequential_run(state: np.ndarray, order: Sequence[int], t: float, omega: float,
                   rng: np.random.Generator) -> dict[int, int]:
    """One protocol repetition with explicit state collapse, parties measured in ``order``.

    Returns the corrected +1/-1 outcome of every party in ``order``.
    """
    a, post, _ = alice_measure(state, rng)
    post = qs.evolve(apply_correction(post, a), t, omega)
    out = {}
    for party in order:
        o, post, _ = qs.measure(post, party, "X", rng)
        out[party] = o
    return out


def all_tables(singlet: np.ndarray) -> dict[str, AmplitudeTable]:
    """Every amplitude route, keyed by method name."""
    tabs = [amplitude_direct(singlet), amplitude_correlation(singlet, "X"),
            amplitude_correlation(singlet, "Z"), amplitude_postprocessed(singlet)]
    return {t.method: t for t in tabs}


def route_disagreement(tables: Iterable[AmplitudeTable]) -> float:
    tables = list(tables)
    ref = tables[0]
    return max((ref.max_difference(t) for t in tables[1:]), default=0.0)

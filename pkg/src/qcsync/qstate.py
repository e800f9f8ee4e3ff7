"""Dense state-vector and density-matrix kernel for up to 12 qubits.

States are plain numpy arrays: a 1-D array of length ``2**n`` is a pure
state, a ``(2**n, 2**n)`` array is a density matrix.  Qubits are numbered
from 1, and qubit 1 (Alice) is the most significant bit of the basis index,
so ``basis_label(0b1000, 4) == "1000"`` has qubit 1 in state ``|1>``.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping, Union

import numpy as np

MAX_QUBITS = 12
ATOL = 1e-10
EIG_ATOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

# Measurement frames: column 0 is the +1 outcome, column 1 the -1 outcome.
BASES = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
}

PauliSpec = Union[str, Mapping[int, str]]


class StateError(ValueError):
    """Raised for malformed states or out-of-range arguments."""


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n or n < 1 or n > MAX_QUBITS:
        raise StateError(f"dimension {dim} is not 2**n with 1 <= n <= {MAX_QUBITS}")
    if state.ndim == 2 and state.shape != (dim, dim):
        raise StateError(f"density matrix must be square, got {state.shape}")
    if state.ndim not in (1, 2):
        raise StateError(f"state must be 1-D or 2-D, got ndim={state.ndim}")
    return n


def is_density(state: np.ndarray) -> bool:
    return state.ndim == 2


def as_state(data, n_qubits: int | None = None) -> np.ndarray:
    """Validate and copy ``data`` into a complex state array."""
    arr = np.array(data, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise StateError("state contains NaN or Inf")
    n = n_qubits_of(arr)
    if n_qubits is not None and n != n_qubits:
        raise StateError(f"expected {n_qubits} qubits, got {n}")
    return arr


def basis_label(index: int, n_qubits: int) -> str:
    """Bit string of a basis index; character 0 is qubit 1."""
    return format(index, f"0{n_qubits}b")


def basis_index(label: str) -> int:
    return int(label, 2)


def ket(label: str) -> np.ndarray:
    """Computational basis state, e.g. ``ket("0110")``."""
    n = len(label)
    psi = np.zeros(1 << n, dtype=complex)
    psi[basis_index(label)] = 1.0
    return psi


def bit_table(n_qubits: int) -> np.ndarray:
    """``(2**n, n)`` array of basis-state bits, column q-1 is qubit q."""
    idx = np.arange(1 << n_qubits)
    shifts = n_qubits - 1 - np.arange(n_qubits)
    return (idx[:, None] >> shifts) & 1


def normalize(psi: np.ndarray) -> np.ndarray:
    if is_density(psi):
        tr = np.trace(psi).real
        if tr <= 0:
            raise StateError("cannot normalize a density matrix with zero trace")
        return psi / tr
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise StateError("cannot normalize the zero vector")
    return psi / nrm


def to_density(state: np.ndarray) -> np.ndarray:
    if is_density(state):
        return state
    return np.outer(state, state.conj())


def check_unitary(u: np.ndarray, atol: float = ATOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise StateError(f"single-qubit operator must be 2x2, got {u.shape}")
    if not np.allclose(u.conj().T @ u, I2, atol=atol):
        raise StateError("operator is not unitary")
    return u


def check_density(rho: np.ndarray, atol: float = ATOL, eig_atol: float = EIG_ATOL) -> None:
    """Raise unless ``rho`` is Hermitian, unit trace and positive semidefinite."""
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise StateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise StateError(f"density matrix trace {np.trace(rho).real!r} != 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -eig_atol:
        raise StateError(f"density matrix has negative eigenvalue {lo:.3e}")


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def _check_qubit(qubit: int, n: int) -> int:
    if not 1 <= qubit <= n:
        raise StateError(f"qubit index {qubit} outside [1, {n}]")
    return qubit - 1


def _apply_to_axis(psi: np.ndarray, axis: int, op: np.ndarray, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    t = np.tensordot(op, t, axes=([1], [axis]))
    return np.moveaxis(t, 0, axis).reshape(-1)


def apply_operator(state: np.ndarray, qubit: int, op: np.ndarray) -> np.ndarray:
    """Apply an arbitrary 2x2 operator to one qubit (no unitarity check).

    Density matrices are conjugated, ``op @ rho @ op^dagger``.
    """
    n = n_qubits_of(state)
    ax = _check_qubit(qubit, n)
    op = np.asarray(op, dtype=complex)
    if not is_density(state):
        return _apply_to_axis(state, ax, op, n)
    t = state.reshape((2,) * (2 * n))
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [ax])), 0, ax)
    t = np.moveaxis(np.tensordot(op.conj(), t, axes=([1], [n + ax])), 0, n + ax)
    return t.reshape(state.shape)


def apply_single_qubit(state: np.ndarray, qubit: int, u: np.ndarray) -> np.ndarray:
    return apply_operator(state, qubit, check_unitary(u))


def apply_global_rotation(state: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply ``u`` to every qubit, i.e. ``U^{\\otimes N}``."""
    u = check_unitary(u)
    out = state
    for q in range(1, n_qubits_of(state) + 1):
        out = apply_operator(out, q, u)
    return out


def _pauli_factors(p: PauliSpec, n: int) -> dict[int, np.ndarray]:
    if isinstance(p, str):
        if len(p) != n:
            raise StateError(f"Pauli string {p!r} has length {len(p)}, state has {n} qubits")
        items = {q + 1: c for q, c in enumerate(p.upper())}
    else:
        items = {int(q): str(c).upper() for q, c in p.items()}
    out = {}
    for q, c in items.items():
        if c not in PAULI:
            raise StateError(f"unknown Pauli letter {c!r}")
        _check_qubit(q, n)
        if c != "I":
            out[q] = PAULI[c]
    return out


def apply_pauli(state: np.ndarray, p: PauliSpec) -> np.ndarray:
    """Left-multiply a pure state by a Pauli string (one-sided for matrices)."""
    n = n_qubits_of(state)
    out = state
    for q, m in _pauli_factors(p, n).items():
        if is_density(out):
            t = out.reshape((2,) * (2 * n))
            t = np.moveaxis(np.tensordot(m, t, axes=([1], [q - 1])), 0, q - 1)
            out = t.reshape(out.shape)
        else:
            out = _apply_to_axis(out, q - 1, m, n)
    return out


def expectation(state: np.ndarray, p: PauliSpec) -> float:
    """Real expectation value of a Pauli string.

    ``p`` is either a full-length string such as ``"XIIZ"`` or a mapping
    ``{qubit: letter}`` with 1-based qubit indices.
    """
    applied = apply_pauli(state, p)
    if is_density(state):
        return float(np.trace(applied).real)
    return float(np.vdot(state, applied).real)


def expectation_op(state: np.ndarray, op) -> complex:
    """``<op>`` for a full-dimension (dense or scipy sparse) operator."""
    if is_density(state):
        return complex(np.trace(op @ state))
    return complex(np.vdot(state, op @ state))


def partial_trace(state: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on the 1-based qubits in ``keep`` (kept in index order)."""
    n = n_qubits_of(state)
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise StateError("keep set must be nonempty")
    for q in keep:
        _check_qubit(q, n)
    k_ax = [q - 1 for q in keep]
    t_ax = [a for a in range(n) if a not in k_ax]
    dk = 1 << len(keep)
    if not is_density(state):
        t = np.transpose(state.reshape((2,) * n), k_ax + t_ax).reshape(dk, -1)
        return t @ t.conj().T
    t = state.reshape((2,) * (2 * n))
    perm = k_ax + t_ax + [n + a for a in k_ax] + [n + a for a in t_ax]
    dt = 1 << len(t_ax)
    t = np.transpose(t, perm).reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def project(state: np.ndarray, qubit: int, outcome_vector) -> tuple[np.ndarray, float]:
    """Apply ``|v><v|`` on one qubit; returns the unnormalized state and its probability."""
    v = np.asarray(outcome_vector, dtype=complex).reshape(2)
    if abs(np.linalg.norm(v) - 1) > ATOL:
        raise StateError("outcome vector must be normalized")
    post = apply_operator(state, qubit, np.outer(v, v.conj()))
    if is_density(state):
        prob = float(np.trace(post).real)
    else:
        prob = float(np.vdot(post, post).real)
    return post, max(prob, 0.0)


def _basis_matrix(basis) -> np.ndarray:
    if isinstance(basis, str):
        try:
            return BASES[basis.upper()]
        except KeyError:
            raise StateError(f"unknown basis {basis!r}") from None
    b = np.asarray(basis, dtype=complex)
    if b.shape != (2, 2) or not np.allclose(b.conj().T @ b, I2, atol=ATOL):
        raise StateError("basis must be an orthonormal 2x2 frame (columns)")
    return b


def measure(state: np.ndarray, qubit: int, basis, rng: np.random.Generator):
    """Projective measurement of one qubit.

    Returns ``(outcome, post_state, prob)`` with ``outcome`` = +1 for the
    first basis column and -1 for the second.  The post-state is normalized.
    """
    b = _basis_matrix(basis)
    post_p, p_plus = project(state, qubit, b[:, 0])
    if rng.random() < p_plus:
        return 1, normalize(post_p), p_plus
    post_m, p_minus = project(state, qubit, b[:, 1])
    if p_minus <= 0:
        raise StateError("sampled a zero-probability branch")
    return -1, normalize(post_m), p_minus


def z_phases(n_qubits: int, angle: float) -> np.ndarray:
    """Diagonal of ``exp(-i angle * sum_n Z_n / 2)`` on the computational basis."""
    bits = bit_table(n_qubits)
    m = (n_qubits - 2 * bits.sum(axis=1)) / 2  # (n0 - n1)/2
    return np.exp(-1j * angle * m)


def apply_diagonal(state: np.ndarray, diag: np.ndarray) -> np.ndarray:
    if is_density(state):
        return diag[:, None] * state * diag.conj()[None, :]
    return diag * state


def evolve(state: np.ndarray, t: float, omega: float) -> np.ndarray:
    """Free evolution ``exp(-i H t)`` with ``H = omega * S^z`` (hbar = 1)."""
    return apply_diagonal(state, z_phases(n_qubits_of(state), omega * t))


def overlap(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b))


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = ATOL) -> bool:
    """Pure states equal modulo a global phase."""
    ov = np.vdot(a, b)
    if abs(ov) < ATOL:
        return np.allclose(a, b, atol=atol)
    phase = ov / abs(ov)
    return np.allclose(a * phase, b, atol=atol)


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary."""
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    dim = 1 << n_qubits
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# -- RNG ---------------------------------------------------------------------

def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def point_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for grid point ``index``; stable across runs and orderings."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


# -- serialization -----------------------------------------------------------

def state_to_json(psi: np.ndarray) -> str:
    """``{"n_qubits": n, "amps": [[re, im], ...]}`` in basis-index order.

    Floats are written with Python's shortest round-trip repr, so
    :func:`state_from_json` restores the array bit for bit.
    """
    if is_density(psi):
        raise StateError("JSON state format holds pure states only")
    n = n_qubits_of(psi)
    amps = [[float(a.real), float(a.imag)] for a in psi]
    return json.dumps({"n_qubits": n, "amps": amps})


def state_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    amps = np.array([complex(re, im) for re, im in obj["amps"]], dtype=complex)
    return as_state(amps, n_qubits=int(obj["n_qubits"]))

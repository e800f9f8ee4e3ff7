import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcsync import purify as pu
from qcsync import qstate as qs
from qcsync.spin import singlet_subspace, supersinglet

PI = math.pi


def clifford_group():
    """The 24 single-qubit Cliffords modulo phase, generated by H and S."""
    gens = [qs.H, np.diag([1, 1j])]
    found = [np.eye(2, dtype=complex)]

    def key(u):
        k = np.flatnonzero(np.abs(u.ravel()) > 1e-9)[0]
        v = u.ravel() / (u.ravel()[k] / abs(u.ravel()[k]))
        return tuple(np.round(v, 8))

    seen = {key(found[0])}
    frontier = list(found)
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                w = g @ u
                if key(w) not in seen:
                    seen.add(key(w))
                    found.append(w)
                    nxt.append(w)
        frontier = nxt
    return found


CLIFFORDS = clifford_group()


def random_bell(rng):
    return pu.BellDiagonalState.from_weights(rng.dirichlet(np.ones(4)))


class TestBellDiagonal:
    def test_validation(self):
        with pytest.raises(ValueError):
            pu.BellDiagonalState(0.5, 0.5, 0.5, -0.5)
        with pytest.raises(ValueError):
            pu.BellDiagonalState(0.5, 0.1, 0.1, 0.1)

    def test_zz(self):
        assert pu.BellDiagonalState(1, 0, 0, 0).zz == -1
        assert pu.BellDiagonalState(0, 0.5, 0.5, 0).zz == 1
        assert abs(pu.BellDiagonalState.werner(0.25).zz) < 1e-15

    def test_density_zz_matches(self):
        b = random_bell(np.random.default_rng(0))
        assert abs(qs.expectation(b.density(), "ZZ") - b.zz) < 1e-12


class TestPreskillInput:
    @pytest.mark.parametrize("phi,f", [(0, 1), (PI, 0), (PI / 2, 0.5)])
    def test_fidelity(self, phi, f):
        assert abs(pu.bell_twirl(pu.preskill_input(phi)).fidelity - f) < 1e-12

    def test_identity_at_zero(self):
        assert np.allclose(pu.preskill_input(0), np.outer(pu.PSI_MINUS, pu.PSI_MINUS))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-PI, PI))
    def test_cos_squared(self, phi):
        rho = pu.preskill_input(phi)
        qs.check_density(rho)
        assert abs(pu.bell_twirl(rho).fidelity - math.cos(phi / 2) ** 2) < 1e-12

    def test_range(self):
        with pytest.raises(ValueError):
            pu.preskill_input(4.0)

    def test_flip_swaps_sector(self):
        phi = 0.8 * PI
        f = pu.bell_twirl(pu.flip_sector(pu.preskill_input(phi))).fidelity
        assert abs(f - math.sin(phi / 2) ** 2) < 1e-12


class TestTwirl:
    def test_fixed_points(self):
        assert np.allclose(pu.bell_twirl(pu.preskill_input(0)).weights, [1, 0, 0, 0])
        assert np.allclose(pu.bell_twirl(np.eye(4) / 4).weights, 0.25)

    def test_bell_twirl_is_bilateral_pauli_average(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            rho = qs.random_density(2, rng)
            avg = sum(qs.apply_pauli(qs.apply_pauli(rho, p + p).conj().T, p + p).conj().T
                      for p in "IXYZ") / 4
            assert np.allclose(avg, pu.bell_twirl(rho).density(), atol=1e-12)

    def test_werner_twirl_is_clifford_average(self):
        # the single-qubit Clifford group is a unitary 2-design, so this is the exact U x U average
        assert len(CLIFFORDS) == 24
        rng = np.random.default_rng(2)
        for _ in range(10):
            rho = qs.random_density(2, rng)
            avg = sum(np.kron(c, c) @ rho @ np.kron(c, c).conj().T for c in CLIFFORDS) / 24
            assert np.allclose(avg, pu.werner_twirl_matrix(rho), atol=1e-12)
            assert np.allclose(pu.werner_twirl(pu.bell_twirl(rho)).density(), avg, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_fidelity_preserved(self, seed):
        rho = qs.random_density(2, np.random.default_rng(seed))
        f = float(np.real(pu.PSI_MINUS.conj() @ rho @ pu.PSI_MINUS))
        b = pu.bell_twirl(rho)
        assert abs(b.fidelity - f) < 1e-12
        assert abs(pu.werner_twirl(b).fidelity - f) < 1e-12


class TestRound:
    def test_singlet_fixed_point(self):
        s = pu.BellDiagonalState(1, 0, 0, 0)
        for _ in range(5):
            s, p = pu.bbpssw_round(s)
            assert s.fidelity == 1 and p == 1

    def test_werner_recurrence(self):
        for f in (0.3, 0.6, 0.9):
            q = (1 - f) / 3
            out, p = pu.bbpssw_round(pu.BellDiagonalState.werner(f))
            assert abs(out.fidelity - (f * f + q * q) / (f * f + 2 * f * q + 5 * q * q)) < 1e-14
            assert abs(p - (f * f + 2 * f * q + 5 * q * q)) < 1e-14

    def test_examples(self):
        assert pu.bbpssw_round(pu.BellDiagonalState.werner(0.7))[0].fidelity > 0.7
        s = pu.BellDiagonalState.werner(0.3)
        for _ in range(20):
            s, _ = pu.bbpssw_round(s)
            assert s.fidelity < 0.5

    def test_threshold_property(self):
        for f in np.linspace(0.26, 0.99, 50):
            out = pu.bbpssw_round(pu.BellDiagonalState.werner(f))[0].fidelity
            assert (out > f) == (f > 0.5), f

    def test_below_quarter_moves_up_to_quarter(self):
        out = pu.bbpssw_round(pu.BellDiagonalState.werner(0.1))[0].fidelity
        assert 0.1 < out < 0.25

    def test_matrix_oracle_random_inputs(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            b = random_bell(rng)
            out, p = pu.cnot_step(b)
            rho, p2 = pu.cnot_step_dm(b.density())
            assert abs(p - p2) < 1e-10
            assert np.allclose(rho, out.density(), atol=1e-10)

    def test_matrix_oracle_full_round(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            rho = qs.random_density(2, rng)
            out, p = pu.bbpssw_round(pu.bell_twirl(rho))
            rho2, p2 = pu.bbpssw_round_dm(rho)
            assert abs(p - p2) < 1e-10
            assert np.allclose(rho2, out.density(), atol=1e-10)


class TestSweep:
    def test_examples(self):
        tr = pu.purify_sweep([0.0, 0.3 * PI, 0.7 * PI], 10)
        assert all(f == 1 for f in tr[0].fidelity)
        assert tr[1].fidelity[-1] >= 0.99
        assert tr[2].fidelity[-1] < 0.5

    def test_trace_invariants(self):
        for tr in pu.purify_sweep(np.linspace(0, PI, 17), 10):
            assert len(tr.fidelity) == 11
            assert all(0 <= f <= 1 for f in tr.fidelity)
            assert all(0 < p <= 1 for p in tr.success_prob)

    def test_monotone_below_threshold(self):
        for tr in pu.purify_sweep(np.linspace(0, PI / 2, 16, endpoint=False), 10):
            assert np.all(np.diff(tr.fidelity) >= -1e-15)

    def test_convergence_region(self):
        # given enough rounds, the boundary sits at pi/2 to within one grid step
        step = PI / 32
        for k in range(33):
            phi = k * step
            f = pu.purify(pu.preskill_input(phi), 60, phi).fidelity[-1]
            if phi < PI / 2 - step / 2:
                assert f >= 0.99, k
            elif phi > PI / 2 + step / 2:
                assert f < 0.5, k

    def test_failed_zz_recorded(self):
        tr = pu.purify(pu.preskill_input(0.9 * PI), 40, 0.9 * PI)
        assert tr.zz[0] == pytest.approx(-1)
        # the limit itself is only recorded; the sector check needs it well above -1
        assert tr.zz[-1] > pu.SECTOR_THRESHOLD

    def test_rounds_validation(self):
        with pytest.raises(ValueError):
            pu.purify(pu.preskill_input(0.1), 0)

    def test_rows(self):
        rows = pu.purify(pu.preskill_input(0.1), 2, 0.1).rows()
        assert [r[1] for r in rows] == [0, 1, 2] and rows[0][0] == 0.1


class TestSectorCheck:
    def test_keep_singlet(self):
        s = pu.sample_zz(pu.BellDiagonalState(1, 0, 0, 0), 100, np.random.default_rng(0))
        d = pu.sector_check(s)
        assert d.decision == "keep" and d.estimate == -1

    def test_flip_failed(self):
        s = pu.sample_zz(pu.BellDiagonalState.werner(0.25), 1000, np.random.default_rng(1))
        assert pu.sector_check(s).decision == "flip"

    def test_indeterminate(self):
        with pytest.raises(pu.IndeterminateSector):
            pu.sector_check([1, -1, 1, -1, 1])
        with pytest.raises(pu.IndeterminateSector):
            pu.sector_check([1])

    @pytest.mark.parametrize("phi", [0.0, 0.2 * PI, 0.8 * PI, 0.9 * PI, PI])
    def test_pipeline_converges_after_flip(self, phi):
        res = pu.purify_with_sector_check(phi, 10, np.random.default_rng(2))
        assert res.final.fidelity[-1] >= 0.99
        assert res.flipped == (phi > PI / 2)

    @pytest.mark.parametrize("phi", [0.35 * PI, 0.6 * PI, 0.65 * PI])
    def test_near_threshold_needs_more_rounds(self, phi):
        res = pu.purify_with_sector_check(phi, 30, np.random.default_rng(5))
        assert res.final.fidelity[-1] >= 0.99
        assert res.flipped == (phi > PI / 2)

    def test_zero_keeps(self):
        assert pu.purify_with_sector_check(0.0, 10, np.random.default_rng(3)).check.decision == "keep"


class TestSingletProject:
    def test_supersinglet_unchanged(self):
        s = supersinglet(4)
        out = pu.singlet_project(s, singlet_subspace(4))
        assert np.allclose(out, np.outer(s, s.conj()), atol=1e-12)

    def test_bell_pairs_inside(self):
        v = np.kron(pu.PSI_MINUS, pu.PSI_MINUS)
        out = pu.singlet_project(v, singlet_subspace(4))
        assert np.allclose(out, np.outer(v, v.conj()), atol=1e-12)

    def test_depolarized_gain(self):
        s = supersinglet(4)
        rho = 0.9 * np.outer(s, s.conj()) + 0.1 * np.eye(16) / 16
        out = pu.singlet_project(rho, singlet_subspace(4))
        assert np.real(s.conj() @ out @ s) > 0.9

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_idempotent(self, seed):
        b = singlet_subspace(4)
        rho = qs.random_density(4, np.random.default_rng(seed))
        once = pu.singlet_project(rho, b)
        qs.check_density(once)
        assert np.allclose(pu.singlet_project(once, b), once, atol=1e-10)

    def test_zero_weight(self):
        with pytest.raises(pu.PurificationError):
            pu.singlet_project(qs.ket("0000"), singlet_subspace(4))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pu.singlet_project(qs.ket("00"), singlet_subspace(4))


def test_bell_basis_orthonormal():
    b = pu.BELL_BASIS
    assert np.allclose(b.conj().T @ b, np.eye(4))
    for i, j in itertools.combinations(range(4), 2):
        assert abs(np.vdot(b[:, i], b[:, j])) < 1e-15

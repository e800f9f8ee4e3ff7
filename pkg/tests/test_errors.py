import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcsync import errors as er
from qcsync import protocol as pr
from qcsync import qstate as qs
from qcsync.noise import preskill_worst_case
from qcsync.spin import supersinglet


class TestComponents:
    def test_fidelity_term(self):
        assert er.delta_t_fidelity(1.0) == 0
        assert er.delta_t_fidelity(0.99, 1.0) == pytest.approx(0.2, abs=1e-12)
        assert er.delta_t_fidelity(0.99, 2.0) == pytest.approx(0.1, abs=1e-12)

    @settings(max_examples=30)
    @given(st.floats(1e-4, 1.5))
    def test_fidelity_cos2_identity(self, eps):
        assert er.delta_t_fidelity(math.cos(eps) ** 2) == pytest.approx(2 * abs(math.sin(eps)), rel=1e-9)

    def test_small_eps(self):
        assert er.delta_t_fidelity(math.cos(1e-3) ** 2) == pytest.approx(2e-3, rel=1e-6)

    @pytest.mark.parametrize("F", [0.0, -0.1, 1.01])
    def test_fidelity_range(self, F):
        with pytest.raises(ValueError):
            er.delta_t_fidelity(F)

    def test_shot_term(self):
        assert er.delta_t_shot(2) == pytest.approx(0.5)
        assert er.delta_t_shot(10) == pytest.approx(1 / math.sqrt(20))
        assert er.delta_t_shot(1e12) < 1e-6
        with pytest.raises(ValueError):
            er.delta_t_shot(0.5)

    def test_total_examples(self):
        assert er.delta_t_total(10, 0.99).delta_t_total == pytest.approx(0.3, abs=1e-12)
        assert er.delta_t_total(1e15, 1.0).delta_t_total < 1e-7

    def test_cs_preset(self):
        b = er.delta_t_total(10, 0.99)
        assert b.in_seconds("cs") * 1e12 == pytest.approx(5.1, abs=1e-9)
        assert er.CLOCK_PRESETS == {"cs": 17e-12, "sr": 0.4e-15}

    def test_quadrature_grid(self):
        for M in np.logspace(0, 6, 20):
            for F in np.linspace(0.5, 1, 20):
                b = er.delta_t_total(M, F, 1.3)
                assert abs(b.delta_t_total**2 - b.delta_t_F**2 - b.delta_t_SQL**2) < 1e-12
                assert min(b.delta_t_total, b.delta_t_F, b.delta_t_SQL) >= 0


class TestShotProbabilities:
    def test_group_one_n4(self):
        assert er.shot_probabilities(2, 0, 0, 4)[0] == pytest.approx(2 / 3)

    @settings(max_examples=30)
    @given(st.integers(2, 8), st.floats(-3, 3), st.floats(-0.5, 0.5))
    def test_sum_and_signal(self, n, t, eps):
        pp, pm = er.shot_probabilities(n, t, eps, 8)
        assert pp + pm == 1
        a = pr.amplitude_closed_form(8)[n]
        assert abs((pp - pm) - a * math.cos(t - 2 * eps)) < 1e-12

    def test_period_average(self):
        ts = np.linspace(0, 2 * math.pi, 400, endpoint=False)
        for n in (2, 4):
            avg = np.mean([er.shot_probabilities(n, t, 0.1, 4)[0] for t in ts])
            assert avg == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("n_qubits", [4, 6])
    def test_matches_state_simulation(self, n_qubits):
        s = supersinglet(n_qubits)
        eps, t = 0.13, 0.8
        dists = pr.branch_distributions(preskill_worst_case(s, eps), t, 1.0, "physical")
        bits = qs.bit_table(n_qubits)
        for k in range(2, n_qubits + 1):
            direct = sum(p * d[bits[:, k - 1] == 0].sum() for p, d in dists.values())
            assert abs(direct - er.shot_probabilities(k, t, eps, n_qubits)[0]) < 1e-10

    def test_bad_party(self):
        with pytest.raises(ValueError):
            er.shot_probabilities(1, 0, 0, 4)


class TestShotNoise:
    def test_binomial_exact(self):
        # brute-force variance of x = (2k - M)/M from the binomial pmf
        from scipy.stats import binom
        for M, p in [(10, 0.5), (57, 0.3), (200, 0.61)]:
            k = np.arange(M + 1)
            w = binom.pmf(k, M, p)
            x = (2 * k - M) / M
            sd = math.sqrt(np.sum(w * x**2) - np.sum(w * x) ** 2)
            assert er.binomial_xbar_std(p, M) == pytest.approx(sd, rel=1e-10)

    def test_gaussian_approximation_is_sqrt2_narrow(self):
        for M in (50, 100, 1000):
            for p in (0.45, 0.5, 0.55):
                r = er.binomial_xbar_std(p, M) / er.gaussian_xbar_std(p, M)
                assert r == pytest.approx(math.sqrt(2), rel=1e-12)

    def test_floor_equals_gaussian_at_half(self):
        assert er.gaussian_xbar_std(0.5, 100) == pytest.approx(er.delta_t_shot(100))


class TestMonteCarlo:
    def test_empirical_std_matches_binomial(self):
        mc = er.monte_carlo_timing(4, math.pi / 2, 100, 10_000, np.random.default_rng(0))
        assert mc.std_xbar == pytest.approx(er.binomial_xbar_std(0.5, 100), rel=0.05)
        # delta method: std(t) |A sin wt| = std(x)
        assert mc.std_t_normalized == pytest.approx(mc.std_xbar, rel=0.1)

    def test_bias_from_epsilon(self):
        eps, t = 0.1, 1.2
        mc = er.monte_carlo_timing(4, t, 10_000, 2000, np.random.default_rng(1), epsilon=eps)
        se = mc.std_t / math.sqrt(mc.trials)
        assert abs(mc.bias + 2 * eps) < 4 * se + 1e-3

    def test_m1_finite(self):
        mc = er.monte_carlo_timing(4, 1.0, 1, 500, np.random.default_rng(2))
        assert math.isfinite(mc.std_t)

    def test_preconditions(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            er.monte_carlo_timing(4, 1.0, 10, 50, rng)
        with pytest.raises(pr.ProtocolError):
            er.monte_carlo_timing(4, 3.5, 10, 200, rng)

    def test_reproducible(self):
        a = er.monte_carlo_timing(6, 1.0, 30, 300, np.random.default_rng(9), party=5)
        b = er.monte_carlo_timing(6, 1.0, 30, 300, np.random.default_rng(9), party=5)
        assert a == b


class TestSweep:
    def test_saturation(self):
        rows = er.error_sweep([1e6], [0.99])
        assert abs(rows[0][2] - 0.2) < 1e-3

    def test_f1_curve(self):
        for M, F, dto, *_ in er.error_sweep([1, 10, 1000], [1.0]):
            assert dto == pytest.approx(1 / math.sqrt(2 * M))

    def test_monotone_and_ordered(self):
        Ms = np.logspace(0, 6, 40)
        Fs = [1.0, 0.999, 0.99, 0.9]
        rows = er.error_sweep(Ms, Fs)
        curves = np.array([r[2] for r in rows]).reshape(len(Fs), len(Ms))
        assert np.all(np.diff(curves, axis=1) <= 0)
        assert np.all(np.diff(curves, axis=0) > 0)
        for F, c in zip(Fs, curves):
            assert c[-1] == pytest.approx(2 * math.sqrt(1 - F), abs=1e-3)

    def test_units_columns(self):
        M, F, dto, cs, sr = er.error_sweep([10], [0.99])[0]
        assert cs == pytest.approx(dto * 17)
        assert sr == pytest.approx(dto * 0.4)

    def test_csv(self):
        text = er.error_csv(er.error_sweep([1], [1.0])).splitlines()
        assert text[0] == "M,F,dt_omega,dt_cs_ps,dt_sr_fs"

    def test_empty(self):
        with pytest.raises(ValueError):
            er.error_sweep([], [1.0])

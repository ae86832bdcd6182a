"""Risk evaluation and report generator tests."""

import math

import numpy as np
import pytest

from semimartreg.noise import LevySpec, RobustFamily, derive_rng
from semimartreg.risk import (
    FixedWeightPipeline,
    ProjectionPipeline,
    SelectionPipeline,
    build_grid_for,
    efficiency_sweep,
    improvement_report,
    l2_risk_exact,
    monte_carlo_risk,
    oracle_report,
    pinsker_constant,
    robust_risk,
    worst_single_frequency,
)
from semimartreg.select import SelectionConfig, ShrinkageConfig, make_shrinkage_config
from semimartreg.signal import Signal, synthesize


class TestL2RiskExact:
    def test_perfect_estimate(self):
        th = np.array([0.5, -0.2, 0.1])
        assert l2_risk_exact(th, th) == 0.0

    def test_zero_estimate(self):
        th = np.array([0.5, -0.2, 0.1])
        assert l2_risk_exact(np.zeros(3), th) == pytest.approx(float(np.sum(th**2)))

    def test_matches_quadrature(self):
        rng = np.random.default_rng(17)
        th = rng.normal(size=8)
        est = th + rng.normal(size=8) * 0.3
        t = (np.arange(4096) + 0.5) / 4096
        diff = synthesize(Signal(est), t) - synthesize(Signal(th), t)
        quad = float(np.mean(diff**2))
        assert l2_risk_exact(est, th) == pytest.approx(quad, abs=1e-8)

    def test_tail_and_padding(self):
        est = np.array([1.0])
        th = np.array([1.0, 0.5])
        assert l2_risk_exact(est, th) == pytest.approx(0.25)
        assert l2_risk_exact(est, th, tail_norm=0.1) == pytest.approx(0.35)


class TestMonteCarloRisk:
    def test_zero_noise_deterministic(self):
        sig = Signal(np.array([0.4, 0.3]))
        report = monte_carlo_risk(
            sig, LevySpec(0.0, 0.0), ProjectionPipeline(m=2), 10, 1, n=8, M=64
        )
        assert report.std_error == 0.0
        assert report.mean_risk == pytest.approx(0.0, abs=1e-8)

    def test_projection_risk_oracle(self):
        # oracle: exact expectation m*sigma/n for S = 0 under Brownian noise
        m, n = 5, 25
        report = monte_carlo_risk(
            Signal(np.zeros(1)), LevySpec(1.0, 0.0), ProjectionPipeline(m=m),
            600, 33, n=n, M=64,
        )
        assert abs(report.mean_risk - m / n) <= 3 * report.std_error

    def test_doubling_reps_halves_variance(self):
        sig = Signal(np.zeros(1))
        a = monte_carlo_risk(sig, LevySpec(1.0, 0.0), ProjectionPipeline(m=3),
                             400, 44, n=16, M=32)
        b = monte_carlo_risk(sig, LevySpec(1.0, 0.0), ProjectionPipeline(m=3),
                             800, 44, n=16, M=32)
        ratio = b.std_error**2 / a.std_error**2
        assert 0.3 <= ratio <= 0.75

    def test_bit_identical_reruns(self):
        sig = Signal(np.array([0.2]))
        kwargs = dict(n=8, M=32)
        a = monte_carlo_risk(sig, LevySpec(0.5, 0.5), ProjectionPipeline(m=2), 50, 7, **kwargs)
        b = monte_carlo_risk(sig, LevySpec(0.5, 0.5), ProjectionPipeline(m=2), 50, 7, **kwargs)
        assert a == b

    def test_workers_do_not_change_results(self):
        sig = Signal(np.array([0.2]))
        a = monte_carlo_risk(sig, LevySpec(0.5, 0.5), ProjectionPipeline(m=2),
                             40, 7, n=8, M=32, workers=1)
        b = monte_carlo_risk(sig, LevySpec(0.5, 0.5), ProjectionPipeline(m=2),
                             40, 7, n=8, M=32, workers=2)
        assert a == b

    def test_needs_two_reps(self):
        with pytest.raises(ValueError):
            monte_carlo_risk(Signal(np.zeros(1)), LevySpec(1.0, 0.0),
                             ProjectionPipeline(m=1), 1, 0, n=4, M=32)

    def test_fixed_weights_with_leading_ones_match_projection(self):
        sig = Signal(np.array([0.3, -0.2]))
        lam = np.array([1.0, 1.0, 1.0, 0.0, 0.0])
        a = monte_carlo_risk(sig, LevySpec(0.8, 0.0), FixedWeightPipeline(lam=lam),
                             80, 14, n=16, M=32)
        b = monte_carlo_risk(sig, LevySpec(0.8, 0.0), ProjectionPipeline(m=3),
                             80, 14, n=16, M=32)
        assert a.mean_risk == pytest.approx(b.mean_risk, rel=1e-12)


class TestRobustRisk:
    def test_singleton_equals_monte_carlo(self):
        sig = Signal(np.array([0.3]))
        fam = RobustFamily(members=(LevySpec(1.0, 0.0),), rho_lower=0.9, sigma_star=1.0)
        a = robust_risk(sig, fam, ProjectionPipeline(m=2), 60, 5, n=8, M=32)
        b = monte_carlo_risk(sig, fam.members[0], ProjectionPipeline(m=2), 60, 5, n=8, M=32)
        assert a.mean_risk == b.mean_risk
        assert a.std_error == b.std_error
        assert a.argmax_member == 0

    def test_dominated_member_identified(self):
        # oracle: projection risk scales with sigma_Q, so the larger-sigma
        # member must achieve the supremum
        sig = Signal(np.zeros(1))
        fam = RobustFamily(
            members=(LevySpec(0.8, 0.0), LevySpec(1.6, 0.0)),
            rho_lower=0.5, sigma_star=2.6,
        )
        report = robust_risk(sig, fam, ProjectionPipeline(m=4), 300, 9, n=16, M=32)
        assert report.argmax_member == 1
        assert report.member_risks[1] > report.member_risks[0]


class TestOracleReport:
    def test_selection_never_beats_best_member_beyond_noise(self):
        spec = LevySpec(0.5, 0.5)
        grid = build_grid_for(100, 0.5)
        sig = Signal(np.array([0.5, 0.3, -0.2, 0.1]))
        cfg = SelectionConfig(delta=0.05, n=100, J=grid.max_support())
        report = oracle_report(sig, spec, grid, cfg, 150, 13, n=100, M=256)
        assert report.oracle_lhs >= min(report.member_risks) - 3 * report.std_error
        assert report.oracle_holds
        assert report.oracle_factor == pytest.approx(1.15 / 0.85)

    def test_singleton_grid_reduces_to_member(self):
        from semimartreg.select import build_weight_grid

        spec = LevySpec(1.0, 0.0)
        grid = build_weight_grid(50, 1.0, k_star=1, epsilon=1.0, J=8)
        sig = Signal(np.array([0.4, 0.2]))
        cfg = SelectionConfig(delta=0.05, n=50, J=8, sigma_known=1.0)
        report = oracle_report(sig, spec, grid, cfg, 100, 15, n=50, M=64)
        assert report.oracle_lhs == pytest.approx(report.member_risks[0], rel=1e-12)

    def test_selection_pipeline_matches_manual_selection(self):
        from semimartreg.noise import derive_rng, simulate
        from semimartreg.observe import simulate_observations
        from semimartreg.select import model_select, improved_select
        from semimartreg.observe import estimate_fourier, estimate_variance_proxy

        spec = LevySpec(0.7, 0.5)
        n, M = 60, 64
        grid = build_grid_for(n, 0.74)
        cfg = SelectionConfig(delta=0.05, n=n, J=grid.max_support())
        shrink_cfg = make_shrinkage_config("levy", grid, n, 0.74, rho_lower=0.49, d=4)
        sig = Signal(np.array([0.4, 0.2]))
        noise = simulate(spec, n, M, derive_rng(77, 0))
        path = simulate_observations(sig, noise)
        theta = estimate_fourier(path, cfg.J).theta_hat
        sigma = estimate_variance_proxy(path)

        plain = SelectionPipeline(grid=grid, config=cfg)
        np.testing.assert_array_equal(
            plain(path), model_select(theta, grid, cfg, sigma).signal.coeffs
        )
        improved = SelectionPipeline(grid=grid, config=cfg, shrink_cfg=shrink_cfg)
        np.testing.assert_array_equal(
            improved(path),
            improved_select(theta, grid, cfg, sigma, shrink_cfg).signal.coeffs,
        )

    def test_determinism(self):
        spec = LevySpec(0.5, 0.5)
        grid = build_grid_for(60, 0.5)
        sig = Signal(np.array([0.3, 0.2]))
        cfg = SelectionConfig(delta=0.05, n=60, J=grid.max_support())
        a = oracle_report(sig, spec, grid, cfg, 40, 3, n=60, M=64)
        b = oracle_report(sig, spec, grid, cfg, 40, 3, n=60, M=64)
        assert a == b

    def test_member_risks_match_bruteforce(self):
        # oracle: rebuild every member risk with plain sums on the same paths
        from semimartreg.noise import derive_rng, simulate
        from semimartreg.observe import ObservationPath, estimate_fourier
        from semimartreg.observe import signal_increments

        spec = LevySpec(0.5, 0.5)
        n, M, reps, seed = 100, 256, 60, 13
        grid = build_grid_for(n, 0.5)
        J = grid.max_support()
        sig = Signal(np.array([0.5, 0.3, -0.2, 0.1]))
        cfg = SelectionConfig(delta=0.05, n=n, J=J, sigma_known=0.5)
        rep_report = oracle_report(sig, spec, grid, cfg, reps, seed, n=n, M=M)

        det = signal_increments(sig, n, M)
        theta = np.concatenate([sig.coeffs, np.zeros(J - sig.coeffs.size)])
        sums = np.zeros(grid.nu)
        for rep in range(reps):
            noise = simulate(spec, n, M, derive_rng(seed, rep))
            th = estimate_fourier(ObservationPath(det + noise.increments, n, M), J).theta_hat
            for i, w in enumerate(grid.members):
                sums[i] += sum((w.lam[j] * th[j] - theta[j]) ** 2 for j in range(J))
        np.testing.assert_allclose(np.asarray(rep_report.member_risks), sums / reps,
                                   rtol=1e-10)


class TestImprovementReport:
    def setup_cfg(self, d=10, n=100, l=9.0):
        return ShrinkageConfig(d=d, l_star=l, r_star=math.log(n + 1.0), v_n=float(n), n=n)

    def test_zero_budget_means_zero_delta(self):
        cfg = ShrinkageConfig(d=5, l_star=0.0, r_star=5.0, v_n=100.0, n=100)
        report = improvement_report(
            Signal(np.array([0.5])), LevySpec(1.0, 0.0), np.ones(5), cfg, 50, 2,
            n=100, M=256,
        )
        assert report.delta_hat == 0.0
        assert report.delta_se == 0.0
        assert report.improvement_bound == 0.0

    def test_levy_improvement_bound(self):
        cfg = self.setup_cfg()
        sig = Signal(np.array([0.5, 0.3, 0.2]))
        report = improvement_report(sig, LevySpec(1.0, 0.0), np.ones(10), cfg,
                                    800, 6, n=100, M=256)
        assert report.delta_hat - report.improvement_bound <= 3 * report.delta_se
        assert report.identity_max_dev < 1e-12

    def test_pairing_seed_stability(self):
        cfg = self.setup_cfg()
        sig = Signal(np.array([0.5, 0.3, 0.2]))
        a = improvement_report(sig, LevySpec(1.0, 0.0), np.ones(10), cfg, 800, 6,
                               n=100, M=256)
        b = improvement_report(sig, LevySpec(1.0, 0.0), np.ones(10), cfg, 800, 60,
                               n=100, M=256)
        combined = math.hypot(a.delta_se, b.delta_se)
        assert abs(a.delta_hat - b.delta_hat) <= 3 * combined

    def test_signal_norm_hypothesis_enforced(self):
        cfg = ShrinkageConfig(d=3, l_star=2.0, r_star=0.5, v_n=100.0, n=100)
        with pytest.raises(ValueError):
            improvement_report(Signal(np.array([5.0])), LevySpec(1.0, 0.0),
                               np.ones(3), cfg, 10, 0, n=100, M=256)


class TestPinskerConstant:
    def test_reference_value(self):
        # oracle: direct evaluation of the closed form at k=1, r=1
        expected = 3.0 ** (1.0 / 3.0) * (1.0 / (2.0 * math.pi)) ** (2.0 / 3.0)
        assert pinsker_constant(1, 1.0) == pytest.approx(expected, rel=1e-12)
        assert pinsker_constant(1, 1.0) == pytest.approx(0.423565, abs=1e-6)

    def test_radius_scaling(self):
        for k in (1, 2, 5):
            ratio = pinsker_constant(k, 2.0) / pinsker_constant(k, 1.0)
            assert ratio == pytest.approx(2.0 ** (1.0 / (2 * k + 1)), rel=1e-12)

    def test_large_k_trend(self):
        # oracle: numeric sweep against (2k)^(1/(2k+1)) (1/pi)^(2k/(2k+1))
        def asymptote(k):
            return (2.0 * k) ** (1.0 / (2 * k + 1)) * (1.0 / math.pi) ** (2.0 * k / (2 * k + 1))

        ratios = [pinsker_constant(k, 1.0) / asymptote(k) for k in range(1, 40)]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))
        assert abs(ratios[-1] - 1.0) < 0.03

    def test_validation(self):
        with pytest.raises(ValueError):
            pinsker_constant(0, 1.0)
        with pytest.raises(ValueError):
            pinsker_constant(1, 0.0)


class TestEfficiencySweep:
    def test_small_sweep_sane(self):
        fam = RobustFamily(members=(LevySpec(1.0, 0.0),), rho_lower=0.9, sigma_star=1.0)
        report = efficiency_sweep(1, 1.0, fam, [50, 100], 50, 19, M=64, n_signals=2)
        assert len(report.rows) == 2
        for row in report.rows:
            assert math.isfinite(row.ratio) and row.ratio > 0
        assert report.rows[0].normalization == pytest.approx(50 ** (2.0 / 3.0))
        assert report.rows[1].v_n == 100.0

    def test_normalization_matches_reference(self):
        # v_n = n at sigma_star = 1; exponent 2k/(2k+1) = 2/3 at k = 1
        assert 400 ** (2.0 / 3.0) == pytest.approx(54.288, abs=1e-2)

    def test_increasing_horizons_required(self):
        fam = RobustFamily(members=(LevySpec(1.0, 0.0),), rho_lower=0.9, sigma_star=1.0)
        with pytest.raises(ValueError):
            efficiency_sweep(1, 1.0, fam, [100, 100], 10, 0, M=64)

    def test_worst_single_frequency_in_ball(self):
        from semimartreg.signal import sobolev_norm

        grid = build_grid_for(100, 1.0)
        sig = worst_single_frequency(grid, 1, 1.0, 1.0, 100)
        assert np.count_nonzero(sig.coeffs) == 1
        assert sobolev_norm(sig, 1) == pytest.approx(0.95, rel=1e-9)

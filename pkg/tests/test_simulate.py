import numpy as np
import pytest
from scipy import stats

from fwerkit import InputError
from fwerkit.simulate import (
    PROCEDURES,
    SimulationConfig,
    compare_procedures,
    default_family_sizes,
    estimate_fwer,
    estimate_power,
    generate_scenario,
    table3_style_weights,
)


def pvalues(config, reps):
    return np.array([generate_scenario(config, r)[0].pvalues for r in range(reps)])


class TestHelpers:
    def test_table3_style_weights(self):
        w = table3_style_weights(12)
        assert w == tuple([0.1] * 10 + [0.0, 0.0])
        assert sum(table3_style_weights(7)) == pytest.approx(1.0)
        assert table3_style_weights(2) == (0.5, 0.5)

    @pytest.mark.parametrize("m, sizes", [(7, (3, 2, 2)), (3, (1, 1, 1)), (2, (1, 1)), (12, (4, 4, 4))])
    def test_family_sizes(self, m, sizes):
        assert default_family_sizes(m) == sizes


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(m=3, rho=1.0),
        dict(m=3, rho=-0.1),
        dict(m=3, n_reps=50),
        dict(m=3, alpha=1.5),
        dict(m=3, effects=(1.0, 0.0)),
        dict(m=3, procedure="magic"),
        dict(m=3, weights=(1.0,)),
        dict(m=3, family_sizes=(1, 1)),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InputError):
            SimulationConfig(**kwargs)

    def test_defaults(self):
        c = SimulationConfig(m=4, procedure="Sidak-Holm")
        assert c.effects == (0.0,) * 4 and c.procedure == "sidak_holm"
        assert c.true_nulls.all()


class TestScenario:
    def test_null_pvalues_uniform(self):
        p = pvalues(SimulationConfig(m=3, n_reps=2000), 2000)
        for j in range(3):
            assert stats.kstest(p[:, j], "uniform").pvalue > 0.001

    def test_dominant_shift(self):
        p = pvalues(SimulationConfig(m=3, effects=(10.0, 0.0, 0.0)), 500)
        assert p[:, 0].max() < 1e-10

    def test_near_perfect_correlation(self):
        z = stats.norm.isf(pvalues(SimulationConfig(m=4, rho=0.999), 300) / 2)
        assert np.all(np.ptp(z, axis=1) < 0.3)

    def test_reproducible(self):
        c = SimulationConfig(m=5, seed=123)
        assert generate_scenario(c, 17)[0] == generate_scenario(c, 17)[0]
        assert generate_scenario(c, 17)[0] != generate_scenario(c, 18)[0]

    def test_wy_scenario_has_data(self):
        table, data = generate_scenario(SimulationConfig(m=3, procedure="westfall_young", n_units=10), 0)
        assert table is None
        assert data.n_units == 10 and data.n_treated == 5


class TestEstimates:
    @pytest.mark.parametrize("procedure", [p for p in PROCEDURES if p != "westfall_young"])
    def test_alpha_zero(self, procedure):
        r = estimate_fwer(SimulationConfig(m=4, n_reps=200, alpha=0.0, procedure=procedure))
        assert r.empirical_fwer == 0.0 and r.any_rejection_rate == 0.0

    def test_unadjusted_inflates(self):
        r = estimate_fwer(SimulationConfig(m=10, n_reps=3000, procedure="unadjusted"))
        assert abs(r.empirical_fwer - 0.4013) < 0.03

    def test_bonferroni_controls(self):
        r = estimate_fwer(SimulationConfig(m=5, n_reps=3000, rho=0.3))
        assert r.empirical_fwer <= 0.05 + 3 * np.sqrt(0.05 * 0.95 / 3000)
        lo, hi = r.fwer_interval
        assert lo <= r.empirical_fwer <= hi

    def test_fixed_sequence_strong_signal(self):
        r = estimate_power(SimulationConfig(m=3, effects=(5, 5, 5), n_reps=500, procedure="fixed_sequence"))
        assert r.any_rejection_rate > 0.99

    def test_fixed_sequence_dead_gate(self):
        c = SimulationConfig(m=3, effects=(0, 5, 5), n_reps=2000)
        reports = compare_procedures(c, ["fixed_sequence", "holm"])
        seq, holm = reports["fixed_sequence"].power, reports["holm"].power
        assert seq["h2"] <= 0.05 + 3 * np.sqrt(0.05 * 0.95 / 2000)
        assert holm["h2"] > 0.9 and holm["h3"] > 0.9

    def test_power_needs_effect(self):
        with pytest.raises(InputError):
            estimate_power(SimulationConfig(m=3, n_reps=100))

    def test_paired_runs_reproducible(self):
        c = SimulationConfig(m=4, effects=(2.8, 2.8, 0, 0), n_reps=500, seed=9)
        a = compare_procedures(c, ["bonferroni", "fallback"])
        b = compare_procedures(c, ["bonferroni", "fallback"])
        for name in a:
            assert a[name].rejection_rates == b[name].rejection_rates

    def test_paired_comparison_consistent_with_single_runs(self):
        c = SimulationConfig(m=4, effects=(2.0, 1.0, 0, 0), n_reps=400, seed=4, procedure="holm")
        paired = compare_procedures(c, ["holm", "hochberg"])["holm"]
        assert paired.rejection_rates == estimate_fwer(c).rejection_rates

    def test_gatekeeping_with_plan_shape(self):
        c = SimulationConfig(m=4, n_reps=500, procedure="gatekeeping", family_sizes=(2, 2), gate_mode="parallel")
        assert estimate_fwer(c).empirical_fwer <= 0.1

    def test_wy_cannot_pair(self):
        with pytest.raises(InputError):
            compare_procedures(SimulationConfig(m=3, n_reps=100), ["westfall_young", "holm"])

    def test_wy_small_run(self):
        c = SimulationConfig(m=3, n_reps=100, procedure="westfall_young", n_units=12)
        r = estimate_fwer(c)
        assert 0.0 <= r.empirical_fwer <= 0.2
        assert r.as_dict()["config"]["resampling"]["B"] == 500

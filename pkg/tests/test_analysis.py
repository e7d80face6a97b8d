"""KS statistic, equivariance, constraint surface, regularization sweep."""

import math

import numpy as np
import pytest
import scipy.stats

from bohm_equilibrium import (
    IntegratorConfig,
    TwoParticleState,
    constraint_surface_experiment,
    constraint_width,
    equivariance_check,
    ks_statistic,
    normal_cdf,
    regularization_sweep,
    substream_normals,
)

from _oracles import cdf_sup_distance

# brute-force sup |Phi(x/2) - Phi(x)|, the large-n limit of the
# doubled-std KS statistic (frozen from a 2e6-point grid scan)
DOUBLED_STD_SUP = 0.16133728441737238


def default_state():
    return TwoParticleState.from_widths(0.05, 1.0)


def default_config():
    return IntegratorConfig(dt=1e-3, t_final=2.0)


def test_ks_statistic_exact_small_case():
    # two samples at the median: D = |1 - F(0)| = 0.5 exactly
    assert ks_statistic(np.array([0.0, 0.0]), normal_cdf(0.0, 1.0)) == 0.5


def test_ks_statistic_requires_two_samples():
    with pytest.raises(ValueError):
        ks_statistic(np.array([0.0]), normal_cdf(0.0, 1.0))
    with pytest.raises(ValueError):
        ks_statistic(np.array([]), normal_cdf(0.0, 1.0))


def test_ks_statistic_matches_scipy():
    z = substream_normals(42, 0, 5000)[:, 0]
    ours = ks_statistic(z, normal_cdf(0.0, 1.0))
    theirs = scipy.stats.kstest(z, "norm").statistic
    assert ours == pytest.approx(theirs, rel=1e-12)


def test_ks_statistic_in_law_samples_are_small():
    cdf = normal_cdf(0.0, 1.0)
    for seed in (42, 43, 44):
        z = substream_normals(seed, 0, 100_000)[:, 0]
        assert ks_statistic(z, cdf) < 1.95 / math.sqrt(100_000)


def test_ks_statistic_detects_wrong_width():
    z = substream_normals(42, 0, 10_000)[:, 0]
    ks = ks_statistic(2.0 * z, normal_cdf(0.0, 1.0))
    assert ks > 0.1
    assert ks == pytest.approx(DOUBLED_STD_SUP, abs=0.02)
    # cross-check the frozen constant itself
    sup = cdf_sup_distance(normal_cdf(0.0, 2.0), normal_cdf(0.0, 1.0), -12.0, 12.0)
    assert sup == pytest.approx(DOUBLED_STD_SUP, abs=1e-9)


def test_ks_median_shrinks_with_n():
    cdf = normal_cdf(0.0, 1.0)

    def median_ks(n):
        values = [
            ks_statistic(substream_normals(seed, 0, n)[:, 0], cdf)
            for seed in range(100, 110)
        ]
        return float(np.median(values))

    m500, m2000, m8000 = median_ks(500), median_ks(2000), median_ks(8000)
    assert m500 > m2000 > m8000


def test_normal_cdf_validation():
    with pytest.raises(ValueError):
        normal_cdf(0.0, 0.0)


def test_equivariance_check_default_state():
    reports = equivariance_check(
        default_state(), 20_000, 42, default_config(), [0.0, 0.5, 2.0]
    )
    assert [report.t for report in reports] == [0.0, 0.5, 2.0]
    noise = 1.95 / math.sqrt(20_000)
    for report in reports:
        assert report.max_ks < 1.5 * noise
        for stats in report.observables:
            assert stats.n == 20_000
            assert stats.empirical_std == pytest.approx(stats.analytic_std, rel=0.02)
    assert {s.observable for s in reports[0].observables} == {
        "y1",
        "y2",
        "y1+y2",
        "y1-y2",
    }
    assert reports[0].get("y1").analytic_std == pytest.approx(
        math.hypot(0.05, 0.5), rel=1e-12
    )
    with pytest.raises(KeyError):
        reports[0].get("y1*y2")


def test_equivariance_check_validates_times():
    state = default_state()
    config = default_config()
    with pytest.raises(ValueError):
        equivariance_check(state, 100, 42, config, [])
    with pytest.raises(ValueError):
        equivariance_check(state, 100, 42, config, [1.0, 0.5])
    with pytest.raises(ValueError):
        equivariance_check(state, 100, 42, config, [-0.5, 1.0])
    with pytest.raises(ValueError):
        equivariance_check(state, 100, 42, config, [1.0, 5.0])


def test_equivariance_parallel_width_invariance():
    state = default_state()
    config = IntegratorConfig(dt=5e-3, t_final=1.0)
    a = equivariance_check(state, 2000, 42, config, [1.0], parallel_width=1)
    b = equivariance_check(state, 2000, 42, config, [1.0], parallel_width=8)
    for sa, sb in zip(a[0].observables, b[0].observables):
        assert sa.empirical_std == sb.empirical_std
        assert sa.ks == sb.ks


def test_constraint_surface_experiment():
    report = constraint_surface_experiment(
        default_state(), 500, 42, default_config()
    )
    assert report.max_abs_sum <= 1e-9
    assert report.sum_width_empirical < 1e-9
    assert report.sum_width_equilibrium == pytest.approx(20.000249998437518, rel=1e-12)
    assert report.width_mismatch_ratio > 1e3
    assert report.diff_width_empirical == pytest.approx(
        report.diff_width_analytic, rel=0.1
    )
    assert report.diff_width_analytic == pytest.approx(math.sqrt(5.0), rel=1e-12)


def test_constraint_surface_requires_centered_sum_narrow():
    config = default_config()
    diff_state = TwoParticleState.from_widths(0.05, 1.0, correlation="difference")
    with pytest.raises(ValueError, match="sum-narrow"):
        constraint_surface_experiment(diff_state, 10, 42, config)
    shifted = TwoParticleState.from_widths(0.05, 1.0, cm_center=0.3)
    with pytest.raises(ValueError, match="centered"):
        constraint_surface_experiment(shifted, 10, 42, config)


def test_regularization_sweep_rows():
    state = default_state()
    result = regularization_sweep(state, (0.4, 0.2), 5000, 42, default_config())
    assert result.n == 5000
    assert len(result.rows) == 2
    noise = 1.95 / math.sqrt(5000)
    previous_r = 0.0
    for row in result.rows:
        assert row.r > previous_r
        previous_r = row.r
        # identity holds bitwise by construction
        assert row.r * row.delta_y_i == row.delta_y_f
        # and agrees with the evolved constraint width independently
        row_state = state.with_narrow_sigma(0.5 * row.delta_y_i)
        assert row.delta_y_f == pytest.approx(
            constraint_width(row_state, 2.0, "sum"), rel=1e-12
        )
        assert row.delta_y_f_empirical == pytest.approx(row.delta_y_f, rel=0.05)
        assert row.ks < 1.5 * noise


def test_regularization_sweep_difference_orientation():
    state = TwoParticleState.from_widths(0.05, 1.0, correlation="difference")
    result = regularization_sweep(state, (0.5,), 2000, 42, default_config())
    row = result.rows[0]
    row_state = state.with_narrow_sigma(0.5)
    assert row.delta_y_f == pytest.approx(
        constraint_width(row_state, 2.0, "difference"), rel=1e-12
    )
    assert row.delta_y_f_empirical == pytest.approx(row.delta_y_f, rel=0.1)


def test_regularization_sweep_warns_when_stiff():
    state = default_state()
    config = IntegratorConfig(dt=1e-3, t_final=0.05)
    with pytest.warns(RuntimeWarning, match="stiff"):
        regularization_sweep(state, (0.028,), 100, 42, config)


def test_regularization_sweep_validates_widths():
    state = default_state()
    config = default_config()
    with pytest.raises(ValueError):
        regularization_sweep(state, (), 100, 42, config)
    with pytest.raises(ValueError):
        regularization_sweep(state, (0.2, 0.4), 100, 42, config)
    with pytest.raises(ValueError):
        regularization_sweep(state, (0.4, -0.2), 100, 42, config)

import numpy as np
import pytest

from src.errors import ConfigError, InsufficientDataError
from src.models.kinetic_models import ModelSpec, SweepPlan, SweepRecord
from src.models.operators import CorrelationFamily, DensityOp
from src.services import tensor_core
from src.services.meanfield_lab import MeanFieldLab, loglog_slope, noise_floor

spec = ModelSpec(d=2, phi=(1.0, 0.25))
free_spec = ModelSpec(d=2, phi=(0.0, 0.0))
f = tensor_core.seeded_density(2, seed=42, trace_norm_target=1.0)
pair = DensityOp(n=2, d=2, data=tensor_core.product_state(f, 2))
lab = MeanFieldLab(spec)


def _records(values, epsilons=(0.4, 0.2, 0.1, 0.05), metric="mean_field", t=0.2):
    return [SweepRecord(epsilon=e, t=t, metric=metric, value=v, tail_floor=0.0, order=1)
            for e, v in zip(epsilons, values)]


def _plan(model_spec=spec, **overrides):
    fields = dict(spec=model_spec, initial=f, epsilons=[0.3, 0.1, 0.03, 0.01], times=[0.2], max_order=2)
    fields.update(overrides)
    return SweepPlan(**fields)


def test_loglog_slope_of_power_law():
    slope, intercept = loglog_slope([1.0, 2.0, 4.0], [3.0, 12.0, 48.0])

    assert slope == pytest.approx(2.0)
    assert intercept == pytest.approx(np.log(3.0))


def test_noise_floor_grows_as_epsilon_shrinks():
    assert noise_floor(0.01, 1.0, 2) > noise_floor(0.1, 1.0, 2) > noise_floor(0.1, 1.0, 0)


def test_noise_floor_is_round_off_of_scaled_series():
    eps = np.finfo(float).eps

    assert noise_floor(0.1, 1.0, 1) == pytest.approx(100.0 * eps * (1.0 + 10.0 * 1.0))
    assert noise_floor(0.1, 2.0, 1) == pytest.approx(100.0 * eps * (2.0 + 10.0 * 4.0))


def test_fit_rate_of_linear_distances():
    fit = MeanFieldLab.fit_rate(_records([0.2, 0.1, 0.05, 0.025]))

    assert fit.slope == pytest.approx(1.0)
    assert fit.used == 4


def test_fit_rate_of_constant_distances():
    fit = MeanFieldLab.fit_rate(_records([0.3, 0.3, 0.3, 0.3]))

    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_needs_three_points():
    with pytest.raises(InsufficientDataError):
        MeanFieldLab.fit_rate(_records([0.2, 0.1], epsilons=(0.4, 0.2)))


def test_fit_rate_rejects_mixed_metrics():
    records = _records([0.2, 0.1]) + _records([0.2, 0.1], metric="chaos")

    with pytest.raises(ConfigError):
        MeanFieldLab.fit_rate(records)


def test_assess_classifies_groups():
    records = (
        _records([0.2, 0.1, 0.05, 0.025])
        + _records([0.0, 0.0, 0.0, 0.0], metric="chaos")
        + _records([0.3, 0.3, 0.3, 0.3], metric="correlation")
    )

    verdicts = {a.metric: a for a in MeanFieldLab.assess(records)}

    assert verdicts["mean_field"].passed and not verdicts["mean_field"].exact
    assert verdicts["chaos"].exact and verdicts["chaos"].passed
    assert not verdicts["correlation"].passed
    assert not verdicts["correlation"].monotone


def test_lemma1_without_interaction_vanishes():
    reports = MeanFieldLab(free_spec).lemma1_check(2, 0.5, pair)

    assert all(r.passed for r in reports)
    assert all(r.measured <= 1e-12 for r in reports if r.name.startswith("lemma1_bound"))


def test_lemma1_bound_and_duhamel_identity():
    reports = lab.lemma1_check(2, 0.5, pair)

    assert all(r.passed for r in reports), [r for r in reports if not r.passed]


def test_lemma2_cumulant_limit_is_first_order():
    reports = lab.lemma2_check(1, 1, 0.5, pair)

    slope = reports[-1]
    assert [r.name for r in reports[:-1]] == [f"lemma2_residual[n=1,eps={e}]" for e in (1e-1, 1e-2, 1e-3)]
    assert slope.passed, slope
    assert slope.measured >= 0.9


def test_scattering_duhamel_identities():
    f3 = DensityOp(n=3, d=2, data=tensor_core.product_state(f, 3))

    reports = lab.scattering_duhamel_check(2, 0.5, f3)

    assert len(reports) == 2
    assert all(r.passed for r in reports), reports


def test_generated_evolution_limits():
    reports = lab.generated_limit_check(1, 0.5, pair)

    assert [r.name for r in reports] == ["generated_limit_first[plain]", "generated_limit_second[plain]"]
    assert all(r.passed for r in reports), reports


def test_correlated_generated_evolution_limit():
    (report,) = lab.generated_limit_check(1, 0.5, pair, correlations=CorrelationFamily.jastrow(2, 0.5))

    assert report.name == "generated_limit_first[correlated]"
    assert report.passed, report


@pytest.mark.parametrize("n", [1, 2])
def test_small_time_generator(n):
    data = tensor_core.product_state(f, 1 + n)
    report = lab.generator_check(1, n, DensityOp(n=1 + n, d=2, data=data))

    assert report.passed, report


def test_free_sweep_is_exact():
    plan = _plan(free_spec, epsilons=[0.3, 0.1, 0.03], times=[0.0, 0.5], max_order=1)

    records = MeanFieldLab(free_spec).theorem1_sweep(plan)

    assessments = MeanFieldLab.assess(records)
    assert len(records) == 6
    assert all(a.exact for a in assessments)


def test_sweep_at_time_zero_vanishes():
    records = lab.theorem1_sweep(_plan(times=[0.0], max_order=1))

    assert all(r.value <= 1e-10 for r in records)


def test_mean_field_distance_is_first_order_in_epsilon():
    records = lab.theorem1_sweep(_plan())

    (assessment,) = MeanFieldLab.assess(records)
    assert assessment.passed
    assert assessment.slope >= 0.9
    assert [r.epsilon for r in records] == [0.3, 0.1, 0.03, 0.01]


def test_sweep_refuses_times_beyond_t0():
    with pytest.raises(ConfigError):
        lab.theorem1_sweep(_plan(times=[0.6], max_order=0))


def test_forced_sweep_beyond_t0_runs():
    records = lab.theorem1_sweep(_plan(times=[0.6], max_order=0, force=True))

    assert len(records) == 4


def test_identity_correlations_reproduce_plain_sweep():
    plain = lab.theorem1_sweep(_plan(max_order=1))
    correlated = lab.theorem1_sweep(_plan(max_order=1, correlations=CorrelationFamily.identity(2)))

    assert {r.metric for r in correlated} == {"mean_field_correlated"}
    for a, b in zip(plain, correlated):
        assert b.value == pytest.approx(a.value, rel=1e-10, abs=1e-14)


def test_chaos_sweep_records_both_metrics():
    plan = _plan(epsilons=[0.3, 0.1, 0.03], max_order=1, functional_order=1,
                 correlations=CorrelationFamily.jastrow(2, 0.5))

    records = lab.theorem2_sweep(plan)

    assert {r.metric for r in records} == {"chaos", "correlation"}
    assert len(records) == 6


def test_chaos_and_correlation_decay_first_order():
    records = lab.theorem2_sweep(_plan(functional_order=1))

    verdicts = {a.metric: a for a in MeanFieldLab.assess(records)}
    assert set(verdicts) == {"chaos", "correlation"}
    for verdict in verdicts.values():
        assert verdict.passed, verdict
        assert verdict.monotone


def test_diagonal_correlations_propagate():
    plan = _plan(functional_order=0, correlations=CorrelationFamily.jastrow(2, 0.5))

    records = lab.correlation_propagation_sweep(plan)

    (verdict,) = MeanFieldLab.assess(records)
    assert verdict.metric == "correlation_propagation"
    assert verdict.passed, verdict
    assert verdict.monotone


def test_correlation_propagation_needs_correlations():
    with pytest.raises(ConfigError):
        lab.correlation_propagation_sweep(_plan())


def test_sweep_records_do_not_depend_on_thread_count():
    plan = _plan(max_order=1)

    serial = MeanFieldLab(spec, threads=1).theorem1_sweep(plan)
    parallel = MeanFieldLab(spec, threads=3).theorem1_sweep(plan)

    assert [(r.epsilon, r.t, r.metric, r.value) for r in serial] == \
        [(r.epsilon, r.t, r.metric, r.value) for r in parallel]

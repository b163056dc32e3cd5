import math

import numpy as np
import pytest

from esfd.errors import UsageError
from esfd.experiments import (
    SCHEMAS,
    ExperimentRecord,
    SweepPlan,
    ThetaSpec,
    derive_seed,
    expected_abs_cosine,
    run_plan,
)
from esfd.objectives import ObjectiveSpec
from esfd.specfun import chi_mean, chi_variance


def plan(experiment, **kw):
    return SweepPlan(experiment, **kw)


def test_record_schema_enforced():
    with pytest.raises(ValueError):
        ExperimentRecord("sphere-shell", 1, 1.0, 1, 1, 0, {"emp_ratio_var": 1.0})
    with pytest.raises(UsageError):
        ExperimentRecord("nope", 1, 1.0, 1, 1, 0, {})


@pytest.mark.parametrize(
    "kw",
    [dict(dims=()), dict(dims=(0,)), dict(dims=(2.5,)), dict(sigmas=(-1.0,)), dict(lams=(0,)),
     dict(trials=0), dict(base_seed=-1), dict(step_size=0.0)],
)
def test_plan_validation(kw):
    with pytest.raises(UsageError):
        SweepPlan("norm-concentration", **{"dims": (3,), **kw})


def test_theta_spec():
    assert ThetaSpec.parse("origin").point(3, 0).tolist() == [0.0, 0.0, 0.0]
    spec = ThetaSpec.parse("ball:2.5")
    p = spec.point(50, 11)
    assert np.linalg.norm(p) <= 2.5
    np.testing.assert_array_equal(p, spec.point(50, 11))
    for bad in ("ball:", "ball:-1", "cube:1"):
        with pytest.raises(UsageError):
            ThetaSpec.parse(bad)


def test_derive_seed_stable_and_distinct():
    a = derive_seed(42, "x", 10, 1.0, 100, 0)
    assert a == derive_seed(42, "x", 10, 1.0, 100, 0)
    assert a != derive_seed(42, "x", 10, 1.0, 100, 1)
    assert a != derive_seed(43, "x", 10, 1.0, 100, 0)
    assert 0 <= a < 2**64


def test_norm_concentration_small_n():
    recs = run_plan(plan("norm-concentration", dims=(1,), lams=(1000,), trials=100))
    m = recs[0].metrics
    assert tuple(m) == SCHEMAS["norm-concentration"]
    assert m["exact_mean"] == pytest.approx(0.7978845608, rel=1e-10)
    assert abs(m["emp_mean"] - m["exact_mean"]) < 3 * math.sqrt(0.3634 / 10**5)


def test_norm_concentration_ratio_decreases():
    recs = run_plan(plan("norm-concentration", dims=(10, 100, 1000, 10000), lams=(10,), trials=10))
    ratios = [r.metrics["ratio_s_over_mu"] for r in recs]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    big = recs[-1].metrics
    assert 0.9995 <= big["emp_mean"] / big["asym_mean"] <= 1.0005


def test_difference_scaling_small():
    recs = run_plan(plan(
        "difference-scaling", dims=(20,), lams=(10, 100, 1000), trials=100,
        objective=ObjectiveSpec("linear", 20, {"offset": 5.0}), theta=ThetaSpec("origin", 0.0),
    ))
    slopes = {r.metrics["fit_slope"] for r in recs}
    assert len(slopes) == 1
    assert -0.6 < slopes.pop() < -0.4
    for r in recs:
        assert r.metrics["r_theta"] == 5.0
        assert r.metrics["per_coord_var_D"] == pytest.approx(25 / r.lam, rel=0.2)
        assert r.metrics["predicted_norm"] == pytest.approx(5 * math.sqrt(20 / r.lam))


def test_difference_scaling_mirrored_is_exactly_zero():
    recs = run_plan(plan(
        "difference-scaling", dims=(8,), lams=(10, 100), trials=5, mirrored=True,
        objective=ObjectiveSpec("sphere", 8),
    ))
    assert all(r.metrics["mean_norm_D"] == 0.0 for r in recs)
    assert all(math.isnan(r.metrics["fit_slope"]) for r in recs)


def test_difference_scaling_rejects_zero_r_theta():
    with pytest.raises(UsageError, match="R\\(theta\\) = 0"):
        run_plan(plan("difference-scaling", dims=(5,), objective=ObjectiveSpec("sphere", 5),
                      theta=ThetaSpec("origin", 0.0), trials=2))


def test_dimension_convergence_small():
    recs = run_plan(plan("dimension-convergence", dims=(10, 1000), sigmas=(0.1,), lams=(100,), trials=10))
    assert recs[1].metrics["rel_err_scaling"] < recs[0].metrics["rel_err_scaling"]
    assert recs[1].metrics["cosine_es_fd"] > 0.99


def test_dimension_convergence_rejects_constant():
    with pytest.raises(UsageError):
        run_plan(plan("dimension-convergence", dims=(5,), trials=2,
                      objective=ObjectiveSpec("constant", 5)))


def test_sphere_shell_metrics():
    recs = run_plan(plan("sphere-shell", dims=(10, 100, 1000), lams=(100,), trials=20))
    var = [r.metrics["emp_ratio_var"] for r in recs]
    assert var[0] > var[1] > var[2]
    total = 20 * 100
    for r in recs:
        m = r.metrics
        assert m["exact_ratio_var"] == pytest.approx(chi_variance(r.n) / chi_mean(r.n) ** 2)
        assert m["max_abs_coord_mean"] < 3 / math.sqrt(total) + 3 / math.sqrt(r.n)
    assert recs[2].metrics["mean_abs_pairwise_cos"] < recs[0].metrics["mean_abs_pairwise_cos"]


def test_expected_abs_cosine_brute_force():
    # small-n Monte Carlo oracle for E|u.v| and its large-n form sqrt(2/(pi n))
    rng = np.random.default_rng(0)
    for n in (2, 3, 5):
        u = rng.standard_normal((200000, n))
        v = rng.standard_normal((200000, n))
        cos = np.abs((u * v).sum(1)) / np.linalg.norm(u, axis=1) / np.linalg.norm(v, axis=1)
        assert expected_abs_cosine(n) == pytest.approx(cos.mean(), abs=4 * cos.std() / math.sqrt(2e5))
    assert expected_abs_cosine(2) == pytest.approx(2 / math.pi)
    assert expected_abs_cosine(10**4) == pytest.approx(math.sqrt(2 / (math.pi * 10**4)), rel=1e-3)


def _final(recs, key):
    last = max(r.metrics["iteration"] for r in recs)
    return [r.metrics[key] for r in recs if r.metrics["iteration"] == last]


def test_paired_optimization_constant_objective():
    base = dict(dims=(6,), sigmas=(0.1,), lams=(10,), trials=2, iterations=50, checkpoints=5,
                objective=ObjectiveSpec("constant", 6, {"value": 3.0}), normalize_es=True)
    recs = run_plan(plan("paired-optimization", **base))
    # FD sees no signal and never moves; ES drifts through the R(theta) term
    assert all(v == 3.0 for v in _final(recs, "f_fd"))
    assert all(v > 0 for v in _final(recs, "traj_scale"))
    mirrored = run_plan(plan("paired-optimization", mirrored=True, **base))
    assert all(r.metrics["traj_scale"] == 0.0 and r.metrics["traj_dist"] == 0.0 for r in mirrored)


def test_paired_optimization_records_divergence():
    recs = run_plan(plan("paired-optimization", dims=(100,), sigmas=(0.05,), lams=(50,), trials=1,
                         iterations=200, checkpoints=4, normalize_es=True))
    last = [r.metrics for r in recs][-1]
    assert last["es_failed_at"] > 0
    assert math.isnan(last["f_es"]) and math.isnan(last["traj_dist"])
    assert last["fd_failed_at"] == -1 and math.isfinite(last["f_fd"])
    assert last["normalize_es"] == 1.0


def test_paired_optimization_mirrored_converges():
    recs = run_plan(plan("paired-optimization", dims=(20,), sigmas=(0.05,), lams=(50,), trials=3,
                         iterations=300, checkpoints=3, normalize_es=True, mirrored=True))
    first = [r.metrics for r in recs if r.metrics["iteration"] == 0]
    last = [r.metrics for r in recs if r.metrics["iteration"] == 300]
    for a, b in zip(first, last):
        assert a["f_es"] / b["f_es"] > 100 and a["f_fd"] / b["f_fd"] > 100
        assert b["es_failed_at"] == -1 and b["fd_failed_at"] == -1


@pytest.mark.parametrize("experiment", sorted(SCHEMAS))
def test_runs_are_reproducible_across_thread_counts(experiment):
    kw = dict(dims=(3, 12), sigmas=(0.5,), lams=(4, 8), trials=3, iterations=20, checkpoints=2,
              objective=ObjectiveSpec("linear", 3, {"offset": 1.0}) if experiment == "difference-scaling" else None)
    p = plan(experiment, **kw)
    a = run_plan(p, threads=1)
    b = run_plan(p, threads=8)
    assert repr(a) == repr(b)


def test_wrong_plan_for_function():
    from esfd.experiments import sphere_shell_experiment

    with pytest.raises(UsageError):
        sphere_shell_experiment(plan("norm-concentration", dims=(2,)))

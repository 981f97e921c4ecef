import numpy as np
import pytest
from scipy import stats

from calipers.calibrate import benchmark_pi
from calipers.core import PredictionInterval, build_grid
from calipers.kernel import BandwidthStrategy
from calipers.neuralnet import MlpConfig
from calipers.pipeline import build_point_intervals
from calipers.simbench import (
    EvalConfig,
    EvalReport,
    SimModelSpec,
    child_seed,
    closed_form_conditional_cdf,
    draw_noise,
    evaluate_methods,
    mc_coverage,
    noise_scale,
    regression_mean,
    report_row,
    seed_stream,
    simulate,
    true_conditional_cdf,
)


# --- generators ---

def test_model1_mean_function_is_exact():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 5))
    expect = x[:, 0] ** 2 + np.sin(x[:, 1] + x[:, 2])
    assert np.allclose(regression_mean(1, x), expect)
    assert np.allclose(noise_scale(1, x), 1.0)


def test_model4_mean_and_scale_functions():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((50, 5))
    mean = x[:, 0] ** 2 + np.exp(x[:, 1] + x[:, 2] / 3.0) + x[:, 3] - x[:, 4]
    scale = 0.5 + x[:, 1] ** 2 / 2.0 + x[:, 4] ** 2 / 2.0
    assert np.allclose(regression_mean(4, x), mean)
    assert np.allclose(noise_scale(4, x), scale)


def test_simulate_is_mean_plus_scaled_noise():
    spec = SimModelSpec(model_id=5, n=400, seed=9)
    data = simulate(spec)
    # regenerate the same streams to recover the noise exactly
    rng = np.random.default_rng(9)
    x = rng.standard_normal((400, 5))
    eps = draw_noise(5, rng, 400)
    assert np.array_equal(data.x, x)
    assert np.allclose(
        data.y, regression_mean(5, x) + noise_scale(5, x) * eps
    )


def test_simulate_deterministic_and_seed_sensitive():
    a = simulate(SimModelSpec(1, 100, seed=5))
    b = simulate(SimModelSpec(1, 100, seed=5))
    c = simulate(SimModelSpec(1, 100, seed=6))
    assert np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)


def test_skew_noise_normalization_and_skewness():
    rng = np.random.default_rng(42)
    z = draw_noise(3, rng, 1_000_000)
    assert 0.99 <= z.var() <= 1.01
    assert stats.skew(z) > 0.5


def test_t5_noise_keeps_natural_variance():
    rng = np.random.default_rng(43)
    z = draw_noise(2, rng, 400_000)
    assert z.var() == pytest.approx(5.0 / 3.0, rel=0.05)


def test_normal_noise_ks_statistic():
    rng = np.random.default_rng(44)
    z = draw_noise(1, rng, 100_000)
    assert stats.kstest(z, "norm").statistic <= 0.006


def test_t5_noise_ks_statistic():
    rng = np.random.default_rng(45)
    z = draw_noise(2, rng, 100_000)
    assert stats.kstest(z, "t", args=(5,)).statistic <= 0.006


def test_empirical_skew_normalization_flag():
    spec = SimModelSpec(3, 5000, seed=7)
    data = simulate(spec, empirical_normalize=True)
    resid = data.y - regression_mean(3, data.x)
    assert resid.var() == pytest.approx(1.0, abs=1e-9)


# --- seed streams ---

def test_seed_stream_determinism_and_separation():
    a1 = seed_stream(10, 1).standard_normal(1000)
    a2 = seed_stream(10, 1).standard_normal(1000)
    b = seed_stream(10, 2).standard_normal(1000)
    assert np.array_equal(a1, a2)
    assert np.any(a1 != b)


def test_seed_stream_uniformity_chi_square():
    u = seed_stream(123, 4).uniform(size=100_000)
    counts, _ = np.histogram(u, bins=50, range=(0.0, 1.0))
    assert stats.chisquare(counts).pvalue > 0.001


def test_child_seed_is_stable():
    assert child_seed(5, 3) == child_seed(5, 3)
    assert child_seed(5, 3) != child_seed(5, 4)


# --- oracles ---

def test_true_cdf_median_and_tail():
    x = np.zeros(5)
    mu = float(regression_mean(1, x)[0])
    v = 4000
    est = true_conditional_cdf(1, x, mu, v=v, rng=np.random.default_rng(1))
    assert est == pytest.approx(0.5, abs=3.0 / np.sqrt(v))
    far = true_conditional_cdf(1, x, mu - 6.0, v=v, rng=np.random.default_rng(2))
    assert far <= 0.001


def test_true_cdf_agrees_with_closed_form():
    rng = np.random.default_rng(3)
    v = 5000
    for model_id in (1, 4):
        for _ in range(5):
            x = rng.standard_normal(5)
            q = float(regression_mean(model_id, x)[0] + rng.uniform(-2, 2))
            mc = true_conditional_cdf(model_id, x, q, v=v, rng=np.random.default_rng(9))
            exact = closed_form_conditional_cdf(model_id, x, q)
            assert mc == pytest.approx(exact, abs=3.0 / np.sqrt(v))


def test_closed_form_rejected_for_nonnormal_models():
    with pytest.raises(ValueError):
        closed_form_conditional_cdf(2, np.zeros(5), 0.0)


def test_mc_coverage_boundary_cases():
    x = np.ones(5)
    rng = np.random.default_rng(4)
    wide = PredictionInterval(-1e6, 1e6, method="aa", level=0.95)
    assert mc_coverage(1, x, wide, v=2000, rng=rng) >= 0.9999
    point = PredictionInterval(0.123, 0.123, method="aa", level=0.95)
    assert mc_coverage(1, x, point, v=2000, rng=np.random.default_rng(5)) <= 0.001


def test_mc_coverage_of_true_normal_interval():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(5)
    mu = float(regression_mean(1, x)[0])
    v = 4000
    pi = PredictionInterval(mu - 1.96, mu + 1.96, method="b", level=0.95)
    cov = mc_coverage(1, x, pi, v=v, rng=np.random.default_rng(7))
    assert cov == pytest.approx(0.95, abs=3.0 / np.sqrt(v))


def test_benchmark_with_oracle_moments_covers_nominally():
    # S=1, T=1 with the true first two moments of Model-1
    rng = np.random.default_rng(8)
    x = rng.standard_normal(5)
    mu = float(regression_mean(1, x)[0])
    pi = benchmark_pi(mu, mu * mu + 1.0, 0.05)
    assert pi.length == pytest.approx(2.0 * 1.959964, abs=1e-4)
    v = 5000
    cov = mc_coverage(1, x, pi, v=v, rng=np.random.default_rng(9))
    assert cov == pytest.approx(0.95, abs=3.0 / np.sqrt(v))


# --- evaluation protocol ---

_TINY_MLP = MlpConfig(layer_widths=(5, 5), epochs=25, batch_size=64, seed=3)
_TINY = EvalConfig(
    s=2, t=12, v=150, alpha=0.1, grid_points=15, mlp=_TINY_MLP,
    kernel_strategy=BandwidthStrategy("mlcv", budget=40),
)
_METHODS = ["b", "quantile", "m", "sa", "st", "aa", "at", "aaa", "aak", "aaak"]


@pytest.fixture(scope="module")
def tiny_run():
    spec = SimModelSpec(model_id=1, n=150, seed=11)
    return evaluate_methods(spec, _METHODS, _TINY)


def test_reports_cover_every_method_with_sane_fields(tiny_run):
    assert [r.method for r in tiny_run] == _METHODS
    for r in tiny_run:
        assert 0.0 <= r.cr <= 1.0
        assert r.al >= 0.0
        assert r.replications == 2
        assert 0 < r.test_points_used <= 12
        assert r.skipped_benchmark_points >= 0
        assert r.failed_replications == 0


def test_widened_variants_dominate_in_aggregate(tiny_run):
    by = {r.method: r for r in tiny_run}
    assert by["aaa"].cr >= by["aa"].cr
    assert by["aaa"].al >= by["aa"].al
    assert by["at"].cr >= by["aa"].cr
    assert by["st"].cr >= by["sa"].cr
    assert by["aaak"].cr >= by["aak"].cr


def test_evaluate_methods_is_deterministic(tiny_run):
    spec = SimModelSpec(model_id=1, n=150, seed=11)
    again = evaluate_methods(spec, _METHODS, _TINY)
    for a, b in zip(tiny_run, again):
        assert a == b


def test_replication_callback_sees_containment():
    spec = SimModelSpec(model_id=1, n=150, seed=11)
    seen = []

    def check(i, intervals, valid):
        seen.append(i)
        for t in range(valid.size):
            if not valid[t]:
                continue
            aa = intervals["aa"][t]
            aaa = intervals["aaa"][t]
            assert aaa.lo <= aa.lo and aaa.hi >= aa.hi

    evaluate_methods(spec, ["aa", "aaa"], _TINY, on_replication=check)
    assert seen == [1, 2]


def test_pointwise_interval_orderings():
    spec = SimModelSpec(model_id=1, n=150, seed=21)
    data = simulate(spec)
    grid = build_grid(data.y, 15)
    x_eval = seed_stream(21, 0).standard_normal((10, 5))
    intervals, valid = build_point_intervals(
        ["sa", "st", "aa", "at", "aaa"], data, grid, x_eval, 0.1, _TINY_MLP,
    )
    assert valid.all()
    for t in range(10):
        assert intervals["st"][t].lo <= intervals["sa"][t].lo
        assert intervals["st"][t].hi >= intervals["sa"][t].hi
        assert intervals["at"][t].lo <= intervals["aa"][t].lo
        assert intervals["at"][t].hi >= intervals["aa"][t].hi
        assert intervals["aaa"][t].lo <= intervals["aa"][t].lo
        assert intervals["aaa"][t].hi >= intervals["aa"][t].hi


def test_failed_replication_dropped_and_counted(monkeypatch):
    import calipers.simbench as sb
    from calipers.neuralnet import TrainingDivergedError

    real = sb.build_point_intervals
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise TrainingDivergedError(1, 0)
        return real(*args, **kwargs)

    monkeypatch.setattr(sb, "build_point_intervals", flaky)
    spec = SimModelSpec(model_id=1, n=120, seed=31)
    reports = evaluate_methods(spec, ["aa"], _TINY)
    assert reports[0].replications == 1
    assert reports[0].failed_replications == 1


def test_all_replications_failing_raises(monkeypatch):
    import calipers.simbench as sb
    from calipers.neuralnet import TrainingDivergedError

    def always(*args, **kwargs):
        raise TrainingDivergedError(1, 0)

    monkeypatch.setattr(sb, "build_point_intervals", always)
    with pytest.raises(RuntimeError, match="all replications failed"):
        evaluate_methods(SimModelSpec(1, 120, seed=1), ["aa"], _TINY)


def test_invalid_methods_rejected():
    with pytest.raises(ValueError):
        evaluate_methods(SimModelSpec(1, 100, seed=1), [], _TINY)
    with pytest.raises(ValueError):
        evaluate_methods(SimModelSpec(1, 100, seed=1), ["zz"], _TINY)
    with pytest.raises(ValueError):
        evaluate_methods(SimModelSpec(1, 100, seed=1), ["aa", "aa"], _TINY)


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(s=0)
    with pytest.raises(ValueError):
        EvalConfig(alpha=1.0)
    with pytest.raises(ValueError):
        EvalConfig(grid_points=1)
    with pytest.raises(ValueError):
        SimModelSpec(model_id=7, n=10)


def test_report_row_formatting():
    rep = EvalReport("aa", 0.9512345678, 4.12, 20, 198.5, 30)
    row = report_row(rep, "model-1", "network", "10x10", 2000, 200, 12.3456)
    assert row[:6] == ["model-1", "network", "aa", "10x10", "2000", "200"]
    assert row[6] == "0.951235"
    assert row[9] == "198.5"
    assert row[11] == "12.346"

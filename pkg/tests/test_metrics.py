import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdreg.degradations import GroundTruth, synthetic_cloud
from cpdreg.errors import ParameterError
from cpdreg.metrics import (
    CSV_HEADER,
    BenchRecord,
    random_affine,
    read_bench_csv,
    resample,
    rmse,
    run_benchmark,
    write_bench_csv,
)
from cpdreg.registration import RegistrationConfig
from cpdreg.solvers import SolverVariant
from cpdreg.timing import TimingBreakdown


def test_rmse_examples():
    pts = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert rmse(pts, GroundTruth.identity(pts)) == 0.0
    assert rmse([[3.0, 4.0]], {0: [0.0, 0.0]}) == pytest.approx(5.0)
    assert rmse([[0.0], [2.0]], {0: [0.0], 1: [0.0]}) == pytest.approx(math.sqrt(2))


def test_rmse_covered_points_only():
    assert rmse([[0.0], [100.0], [2.0]], {0: [0.0], 2: [0.0]}) == pytest.approx(math.sqrt(2))


def test_rmse_empty_truth():
    with pytest.raises(ParameterError):
        rmse([[0.0]], {})


@settings(max_examples=40)
@given(st.integers(0, 2**31 - 1), st.integers(1, 30))
def test_rmse_permutation_invariant(seed, M):
    r = np.random.default_rng(seed)
    X, T = r.normal(size=(M, 3)), r.normal(size=(M, 3))
    perm = r.permutation(M)
    assert rmse(X[perm], GroundTruth.identity(T[perm])) == pytest.approx(rmse(X, GroundTruth.identity(T)), rel=1e-12)


def test_resample():
    src = np.arange(4000.0)[:, None]
    a = resample(src, 500, seed=3)
    assert a.shape == (500, 1) and len(np.unique(a)) == 500
    np.testing.assert_array_equal(a, resample(src, 500, seed=3))
    with pytest.raises(ParameterError):
        resample(src, 4001)


def test_random_affine_is_mild():
    pts = synthetic_cloud(300, 3, seed=1)
    moved = random_affine(pts, seed=2)
    assert 0 < np.max(np.linalg.norm(moved - pts, axis=1)) < 0.5


def test_benchmark_structure():
    recs = run_benchmark([60, 90], ["cpd", "fast"], RegistrationConfig(iterations=3), seed=0,
                         generator=lambda n, s: synthetic_cloud(n, 3, s), warmup=False)
    assert [(r.M, r.variant.value) for r in recs] == [(60, "cpd"), (60, "fast"), (90, "cpd"), (90, "fast")]
    for r in recs:
        t = r.timing
        assert t.f_us == t.eig_us + t.iter_us and t.total_us == t.c_us + t.f_us + t.o_us
        assert r.rmse >= 0 and not r.failed and r.iterations == 3


def test_benchmark_records_failures(monkeypatch):
    import cpdreg.metrics as metrics
    from cpdreg.errors import NumericError

    calls = []

    def flaky(model, scene, cfg):
        calls.append(cfg.variant)
        if cfg.variant is SolverVariant.CPD:
            raise NumericError("singular")
        return real(model, scene, cfg)

    real = metrics.register
    monkeypatch.setattr(metrics, "register", flaky)
    recs = run_benchmark([40], ["cpd", "fast"], RegistrationConfig(iterations=2), source=synthetic_cloud(50, 2),
                         warmup=False)
    assert recs[0].failed and "singular" in recs[0].error
    assert not recs[1].failed


def test_benchmark_needs_input():
    with pytest.raises(ParameterError):
        run_benchmark([10], ["fast"], RegistrationConfig())


def test_csv_round_trip(tmp_path):
    recs = [
        BenchRecord(500, 500, SolverVariant.FAST, TimingBreakdown(1, 2, 3, 4), 0.00123, 20),
        BenchRecord(1000, 1000, SolverVariant.CPD_LOWRANK, TimingBreakdown(10**7, 0, 5, 999_999), 1.5e-7, 20),
    ]
    path = tmp_path / "b.csv"
    write_bench_csv(recs, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert path.read_text().splitlines()[1].split(",")[3:9] == [
        "0.000001", "0.000002", "0.000003", "0.000005", "0.000004", "0.000010"]
    assert read_bench_csv(path) == recs


def test_failed_record_round_trip(tmp_path):
    rec = BenchRecord(10, 10, SolverVariant.CPD, TimingBreakdown(), math.nan, 0, failed=True, error="x")
    write_bench_csv([rec], tmp_path / "b.csv")
    back = read_bench_csv(tmp_path / "b.csv")[0]
    assert back.failed and math.isnan(back.rmse)

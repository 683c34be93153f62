import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evtraj.dataset import synthetic_corpus
from evtraj.evaluation import (
    CSV_HEADER,
    ErrorDecomposition,
    SweepPoint,
    SweepResult,
    compare_strategies,
    error_decompose,
    evaluate,
    predict_windows,
    rate_profile,
    summary_json,
    sweep_win,
    sweep_wout,
    train_and_evaluate,
    truth_windows,
    window_lengths,
)
from evtraj.sampling import SampledSequence, Spatial
from evtraj.seq2seq import Seq2SeqModel, TrainConfig
from evtraj.tracker import as_track_array

import oracles


def _error_oracle(p, q):
    s = t = 0.0
    n = 0
    for a, b in zip(p, q):
        s += (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2
        t += (a[2] - b[2]) ** 2
        n += 1
    return math.sqrt(s / n), math.sqrt(t / n)


def test_error_examples():
    rng = np.random.default_rng(0)
    truth = rng.normal(size=(45, 3))
    assert error_decompose(truth, truth)[:2] == (0.0, 0.0)
    shifted = truth + [3.0, 4.0, 0.0]
    err = error_decompose(shifted, truth)
    assert err.spatial_rmse == pytest.approx(5.0, abs=1e-12) and err.temporal_rmse == 0.0
    with pytest.raises(ValueError):
        error_decompose(truth, truth[:3])


def test_error_matches_summation_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p, q = rng.normal(0, 10, size=(45, 3)), rng.normal(0, 10, size=(45, 3))
        s, t, _ = error_decompose(p, q)
        rs, rt = _error_oracle(p.tolist(), q.tolist())
        assert abs(s - rs) <= 1e-12 and abs(t - rt) <= 1e-12


def test_structured_inputs_use_microseconds():
    a = np.zeros(3, dtype=[("x", "f8"), ("y", "f8"), ("t", "f8")])
    b = a.copy()
    b["t"] = 2000.0
    assert error_decompose(a, b).temporal_rmse == pytest.approx(2.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 10))
def test_error_is_metric_like(seed, scale):
    rng = np.random.default_rng(seed)
    p, q = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
    e = error_decompose(p, q)
    assert e.spatial_rmse >= 0 and e.temporal_rmse >= 0
    perm = rng.permutation(10)
    assert error_decompose(p[perm], q[perm])[:2] == pytest.approx(e[:2], rel=1e-12)
    # scaling both spatial offsets scales the spatial error
    q_scaled = q.copy()
    q_scaled[:, :2] = p[:, :2] + scale * (q[:, :2] - p[:, :2])
    assert error_decompose(p, q_scaled).spatial_rmse == pytest.approx(scale * e.spatial_rmse, rel=1e-9)


def test_sweep_result_axis_and_csv_round_trip():
    e = ErrorDecomposition(1.5, 2.5, 10)
    r = SweepResult("w_out", [SweepPoint(5, e, None, 3), SweepPoint(15, e, 120.25, 4)])
    text = r.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = SweepResult.from_csv(text)
    assert back.to_csv() == text
    with pytest.raises(ValueError):
        SweepResult("w_in", [SweepPoint(20, e), SweepPoint(20, e)])
    with pytest.raises(ValueError):
        SweepResult("bogus", [])
    summary = json.loads(summary_json([r], {"seed": 0}))
    assert summary["config_hash"] and summary["sweeps"][0]["axis"] == "w_out"


def test_window_lengths():
    assert window_lengths(222.2) == (20, 44)
    assert window_lengths(1.0) == (2, 1)


def test_rate_profile_examples():
    t = np.arange(50) * 10000
    seq = SampledSequence(as_track_array([(0.0, 0.0, int(v)) for v in t]), None)
    times, rates = rate_profile(seq, 100)
    assert np.allclose(rates, 100.0)
    ref = oracles.rate_profile(t.tolist(), 100)
    assert times.tolist() == [a for a, _ in ref] and rates.tolist() == pytest.approx([b for _, b in ref])
    with pytest.raises(ValueError):
        rate_profile(SampledSequence(seq.points[:1], None), 100)
    with pytest.raises(ValueError):
        rate_profile(SampledSequence(seq.points[:5], None), 100)


def test_rate_profile_matches_oracle_on_irregular_times():
    rng = np.random.default_rng(3)
    t = np.cumsum(rng.integers(1, 20000, 300))
    seq = SampledSequence(as_track_array([(0.0, 0.0, int(v)) for v in t]), None)
    times, rates = rate_profile(seq, 50)
    ref = oracles.rate_profile(t.tolist(), 50)
    assert times.tolist() == [a for a, _ in ref]
    assert rates.tolist() == pytest.approx([b for _, b in ref], rel=1e-12)


@pytest.fixture(scope="module")
def tiny():
    return synthetic_corpus(12, seed=2).resample(Spatial(4))


def test_evaluate_pairs_cumulative_arrival_times(tiny):
    te = tiny.windows("test", 6, 4)
    truth = truth_windows(te)
    assert np.allclose(truth[..., 2], np.cumsum(te.targets[..., 2], axis=-1))
    m = Seq2SeqModel.zeros()
    pred = predict_windows(m, te)
    assert pred.shape == truth.shape
    assert evaluate(m, te).n_points == len(te) * 4


def test_single_point_sweep_equals_standalone(tiny):
    cfg = TrainConfig(epochs=2, batch_size=64)
    r = sweep_wout(tiny, 6, [4], cfg, stride=4)
    _, err, _, n = train_and_evaluate(tiny, 6, 4, cfg, stride=4)
    assert r.points[0].error == err and r.points[0].n_test_windows == n
    with pytest.raises(ValueError):
        sweep_win(tiny, 4, [6, 6], cfg)


def test_compare_strategies_is_deterministic(tiny):
    raw = synthetic_corpus(12, seed=2)
    cfg = TrainConfig(epochs=1, batch_size=64)
    a = compare_strategies(raw, (4, 8), 0, cfg, in_ms=40, out_ms=60, stride=4, hidden_size=6)
    b = compare_strategies(raw, (4, 8), 0, cfg, in_ms=40, out_ms=60, stride=4, hidden_size=6)
    assert [r.to_csv() for r in a] == [r.to_csv() for r in b]
    spatial, fixed = a
    assert spatial.axis == "spatial_D" and fixed.axis == "fixed_rate_F"
    # paired design: both conditions see the same window lengths per D
    assert [(p.w_in, p.w_out) for p in spatial.points] == [(p.w_in, p.w_out) for p in fixed.points]

"""Acceptance suite: one test per criterion, at the stated tolerances.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary ends with
one PASS/FAIL line per criterion. The training budgets used by criteria
3 to 6 are set by the constants below.
"""

import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from scipy.stats import spearmanr

from evtraj.cli import main as cli_main
from evtraj.dataset import augment, flip_augment, make_splits
from evtraj.evaluation import compare_strategies, rate_profile, sweep_win, sweep_wout
from evtraj.events import EVENT_DTYPE, SimConfig, generate_events, random_throw, simulate_trajectory
from evtraj.sampling import FixedRate, SampledSequence, Spatial, pooled_rate, subsample
from evtraj.seq2seq import (
    AdamState,
    Seq2SeqModel,
    TrainConfig,
    adam_step,
    decode,
    encode,
    forward,
    loss_and_grads,
    lstm_cell_forward,
    mse_loss,
    train,
)
from evtraj.tracker import TRACK_DTYPE, track_stream

import oracles

# training budgets (see the decisions ledger for how they were chosen)
SANITY_EPOCHS = 50
SANITY_STRIDE = 1
SWEEP_EPOCHS = 60
SWEEP_STRIDE = 4

PROPERTY_CASES = 1000
PROPERTY_SETTINGS = settings(max_examples=PROPERTY_CASES, deadline=None, derandomize=True,
                             suppress_health_check=[HealthCheck.too_slow])


def _detail(request, text):
    request.node.user_properties.append(("detail", text))
    print(text)


@pytest.fixture(scope="module")
def d2_corpus(raw_corpus):
    return raw_corpus.resample(Spatial(2))


# ---------------------------------------------------------------------------
# 1. gradient oracle
# ---------------------------------------------------------------------------

# Central differences carry a roundoff error of about eps * |L| / h ~ 1e-11 on
# these losses, so a partial below ~1e-7 cannot be resolved to 1e-4 relative.
# Relative error is taken against max(|a|, |n|, GRAD_FLOOR), with a tenfold
# margin over that resolution limit.
GRAD_FLOOR = 1e-6


@pytest.mark.criterion(1, "BPTT gradients vs central differences (H=5, w_in=4, w_out=3, 100 trials)")
def test_c01_gradient_oracle(request):
    start = time.perf_counter()
    worst = 0.0
    n_checked = 0
    h = 1e-5
    for trial in range(100):
        rng = np.random.default_rng(trial)
        model = Seq2SeqModel.create(hidden_size=5, seed=trial)
        X = rng.normal(0, 0.5, size=(1, 4, 3))
        T = rng.normal(0, 0.5, size=(1, 3, 3))
        _, grads = loss_and_grads(model, X, T)
        for name, p in model.params().items():
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = mse_loss(forward(model, X, 3), T)
                p[idx] = old - h
                down = mse_loss(forward(model, X, 3), T)
                p[idx] = old
                num = (up - down) / (2 * h)
                a = grads[name][idx]
                worst = max(worst, abs(a - num) / max(abs(a), abs(num), GRAD_FLOOR))
                n_checked += 1
    elapsed = time.perf_counter() - start
    _detail(request, f"max relative error {worst:.2e} over {n_checked} partials in {elapsed:.1f} s")
    assert worst < 1e-4
    assert elapsed < 60


# ---------------------------------------------------------------------------
# 2. scalar oracles
# ---------------------------------------------------------------------------


@pytest.mark.criterion(2, "cell, encode, decode, MSE and 100 Adam steps vs scalar loops (<= 1e-10)")
def test_c02_scalar_oracles(request):
    start = time.perf_counter()
    worst = {}
    for seed in range(5):
        rng = np.random.default_rng(seed)
        model = Seq2SeqModel.create(seed=seed)
        for p in model.params().values():
            p[...] = rng.normal(0, 0.4, p.shape)
        x, h, c = rng.normal(size=3), rng.normal(size=25), rng.normal(size=25)
        h1, c1, _ = lstm_cell_forward(model.encoder, x, h, c)
        rh, rc = oracles.cell_forward(model.encoder.W_ih, model.encoder.W_hh, model.encoder.b, x, h, c)
        worst["cell"] = max(worst.get("cell", 0), np.max(np.abs(h1 - rh)), np.max(np.abs(c1 - rc)))

        seq = rng.normal(0, 0.5, size=(20, 3))
        he, ce = encode(model, seq)
        rhe, rce = oracles.encode(model, seq)
        worst["encode"] = max(worst.get("encode", 0), np.max(np.abs(he - rhe)), np.max(np.abs(ce - rce)))

        y = decode(model, (he, ce), 45)
        ry = np.array(oracles.decode(model, rhe, rce, 45))
        worst["decode"] = max(worst.get("decode", 0), np.max(np.abs(y - ry)))

        target = rng.normal(size=(45, 3))
        worst["mse"] = max(worst.get("mse", 0), abs(mse_loss(y, target) - oracles.mse(y.tolist(), target.tolist())))

    rng = np.random.default_rng(99)
    params = {"W": rng.normal(size=(8, 5)), "b": rng.normal(size=8)}
    start_params = {k: v.ravel().tolist() for k, v in params.items()}
    grads_seq = [{k: rng.normal(size=v.shape) for k, v in params.items()} for _ in range(100)]
    state = AdamState()
    for g in grads_seq:
        adam_step(state, params, g, 0.01)
    ref = oracles.adam(start_params, [{k: v.ravel().tolist() for k, v in g.items()} for g in grads_seq], 0.01)
    worst["adam"] = max(np.max(np.abs(params[k].ravel() - np.array(ref[k]))) for k in params)

    elapsed = time.perf_counter() - start
    _detail(request, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" in {elapsed:.1f} s")
    assert all(v <= 1e-10 for v in worst.values())
    assert elapsed < 60


# ---------------------------------------------------------------------------
# 3. training sanity
# ---------------------------------------------------------------------------


@pytest.mark.criterion(3, f"training sanity: val spatial RMSE after {SANITY_EPOCHS} epochs < 50% of epoch 1")
@pytest.mark.slow
def test_c03_training_sanity(request, raw_corpus, d2_corpus):
    assert len(raw_corpus) == 500
    assert [raw_corpus.split.count(s) for s in ("train", "validation", "test")] == [470, 20, 10]
    start = time.perf_counter()
    tr = d2_corpus.windows("train", 20, 45, SANITY_STRIDE)
    va = d2_corpus.windows("validation", 20, 45)
    config = TrainConfig(learning_rate=0.01, epochs=SANITY_EPOCHS, batch_size=128, seed=0)
    _, curve = train(Seq2SeqModel.create(seed=0), tr, va, config)
    elapsed = time.perf_counter() - start
    first, last = curve.val_spatial_rmse[0], curve.val_spatial_rmse[-1]
    _detail(request, f"{len(tr)} windows, val spatial RMSE {first:.2f} -> {last:.2f} px "
                     f"(ratio {last / first:.3f}) in {elapsed / 60:.1f} min")
    assert all(np.isfinite(curve.train_loss)) and all(np.isfinite(curve.val_loss))
    assert last < 0.5 * first
    assert elapsed <= 30 * 60


# ---------------------------------------------------------------------------
# 4-6. sweep trends
# ---------------------------------------------------------------------------


def _sweep_config():
    return TrainConfig(epochs=SWEEP_EPOCHS, batch_size=128, learning_rate=0.01, seed=0, restore_best=True)


@pytest.mark.criterion(4, "w_out sweep: spatial RMSE non-decreasing, Spearman >= 0.9")
@pytest.mark.slow
def test_c04_wout_trend(request, d2_corpus):
    values = (5, 15, 25, 35, 45)
    result = sweep_wout(d2_corpus, 20, values, _sweep_config(), stride=SWEEP_STRIDE)
    rmse = result.spatial_rmse
    rho = spearmanr(values, rmse).statistic
    _detail(request, f"spatial RMSE {np.round(rmse, 2).tolist()} px, Spearman {rho:.2f}")
    assert np.all(np.diff(rmse) >= 0)
    assert rho >= 0.9


@pytest.mark.criterion(5, "w_in sweep: RMSE(40) within 15% of RMSE(20), both below RMSE(5)")
@pytest.mark.slow
def test_c05_win_plateau(request, d2_corpus):
    result = sweep_win(d2_corpus, 45, (5, 10, 20, 40), _sweep_config(), stride=SWEEP_STRIDE)
    e = dict(zip(result.axis_values.astype(int).tolist(), result.spatial_rmse))
    rel = abs(e[40] - e[20]) / e[20]
    _detail(request, f"spatial RMSE {[round(e[k], 2) for k in (5, 10, 20, 40)]} px, |40 vs 20| {100 * rel:.1f}%")
    assert rel <= 0.15
    assert e[40] < e[5] and e[20] < e[5]


@pytest.mark.criterion(6, "spatial <= matched-rate fixed sampling for >= 2 of D in {2,4,6}")
@pytest.mark.slow
def test_c06_strategy_comparison(request, raw_corpus):
    spatial, fixed = compare_strategies(raw_corpus, (2, 4, 6), 0, _sweep_config(), stride=SWEEP_STRIDE)
    wins = int(np.sum(spatial.spatial_rmse <= fixed.spatial_rmse))
    _detail(request, f"spatial {np.round(spatial.spatial_rmse, 2).tolist()} px vs fixed "
                     f"{np.round(fixed.spatial_rmse, 2).tolist()} px, spatial wins {wins}/3")
    assert wins >= 2


# ---------------------------------------------------------------------------
# 7. rate-profile flattening
# ---------------------------------------------------------------------------


@pytest.mark.criterion(7, "rate profile std(D=12) < std(D=2) on every trajectory; mean rate falls with D")
def test_c07_rate_profile(request, raw_corpus):
    Ds = (2, 4, 6, 8, 10, 12)
    flatter = 0
    for tr in raw_corpus.trajectories:
        s2 = np.std(rate_profile(subsample(tr, Spatial(2)), 100)[1])
        s12 = np.std(rate_profile(subsample(tr, Spatial(12)), 100)[1])
        flatter += s12 < s2
    means = [pooled_rate([subsample(tr, Spatial(d)) for tr in raw_corpus.trajectories])[0] for d in Ds]
    _detail(request, f"flatter on {flatter}/{len(raw_corpus)} trajectories; mean rates "
                     + ", ".join(f"D={d}: {m:.0f} Hz" for d, m in zip(Ds, means)))
    assert flatter == len(raw_corpus)
    assert all(a > b for a, b in zip(means, means[1:]))


# ---------------------------------------------------------------------------
# 8. sampler / tracker invariants
# ---------------------------------------------------------------------------


@st.composite
def tracks(draw, max_len=60):
    n = draw(st.integers(0, max_len))
    xs = draw(st.lists(st.floats(0, 303, allow_nan=False), min_size=n, max_size=n))
    ys = draw(st.lists(st.floats(0, 239, allow_nan=False), min_size=n, max_size=n))
    gaps = draw(st.lists(st.integers(0, 20000), min_size=n, max_size=n))
    out = np.empty(n, TRACK_DTYPE)
    out["x"], out["y"], out["t"] = xs, ys, np.cumsum(gaps, dtype=np.int64)
    return out


deltas = st.floats(0.1, 40, allow_nan=False)
periods = st.floats(0.1, 50, allow_nan=False)

C8 = pytest.mark.criterion(8, f"sampler/tracker invariants, {PROPERTY_CASES} cases each")


@C8
@PROPERTY_SETTINGS
@given(tracks(), deltas)
def test_c08_spatial_distance_bound(tr, D):
    pts = subsample(tr, Spatial(D)).points
    assert np.all(np.hypot(np.diff(pts["x"]), np.diff(pts["y"])) >= D)
    assert np.all(np.diff(pts["t"]) > 0)


@C8
@PROPERTY_SETTINGS
@given(tracks(), periods)
def test_c08_fixed_interval_bound(tr, F):
    pts = subsample(tr, FixedRate(F)).points
    assert np.all(np.diff(pts["t"]) >= F * 1000)


@C8
@PROPERTY_SETTINGS
@given(tracks(), st.one_of(deltas.map(Spatial), periods.map(FixedRate)))
def test_c08_subsampling_idempotent(tr, strategy):
    once = subsample(tr, strategy)
    twice = subsample(once, strategy)
    assert np.array_equal(once.points, twice.points)


@st.composite
def dyadic_tracks(draw, max_len=60):
    """Tracks whose coordinates lie on a 2**-20 px grid, so reflections are representable."""
    n = draw(st.integers(0, max_len))
    grid = 2.0**-20
    xs = draw(st.lists(st.integers(0, int(303 / grid)), min_size=n, max_size=n))
    ys = draw(st.lists(st.integers(0, int(239 / grid)), min_size=n, max_size=n))
    out = np.empty(n, TRACK_DTYPE)
    out["x"], out["y"] = np.array(xs, dtype=np.float64) * grid, np.array(ys, dtype=np.float64) * grid
    out["t"] = np.arange(n)
    return out


@C8
@PROPERTY_SETTINGS
@given(dyadic_tracks(), tracks())
def test_c08_flip_involution(exact, arbitrary):
    seq = SampledSequence(exact, None)
    assert np.array_equal(flip_augment(flip_augment(seq)).points, exact)
    assert np.array_equal(flip_augment(exact)["y"], exact["y"])
    # Arbitrary doubles below the mirror axis carry bits that 303 - x cannot hold,
    # so no float64 map can be an exact involution there; it is exact to one ulp of 303.
    back = flip_augment(flip_augment(arbitrary))
    assert np.all(np.abs(back["x"] - arbitrary["x"]) <= np.spacing(303.0))
    assert np.array_equal(back["y"], arbitrary["y"]) and np.array_equal(back["t"], arbitrary["t"])


@st.composite
def event_streams(draw):
    n = draw(st.integers(0, 150))
    xs = draw(st.lists(st.integers(0, 303), min_size=n, max_size=n))
    ys = draw(st.lists(st.integers(0, 239), min_size=n, max_size=n))
    gaps = draw(st.lists(st.integers(0, 500), min_size=n, max_size=n))
    ev = np.zeros(n, EVENT_DTYPE)
    ev["x"], ev["y"], ev["t"] = xs, ys, np.cumsum(gaps, dtype=np.int64)
    return ev


@C8
@PROPERTY_SETTINGS
@given(event_streams(), st.floats(1, 320), st.integers(1, 30))
def test_c08_tracker_centroid_exact(ev, roi, threshold):
    got = track_stream(ev, roi, threshold)
    ref = oracles.track(list(zip(ev["x"].tolist(), ev["y"].tolist(), ev["t"].tolist())), roi, threshold)
    assert [tuple(p) for p in got.tolist()] == ref


@C8
@PROPERTY_SETTINGS
@given(st.integers(3, 120), st.integers(0, 2**31 - 1))
def test_c08_split_leak_free(n_sources, seed):
    trajs = [np.empty(0, TRACK_DTYPE)] * n_sources
    corpus = make_splits(augment(trajs), seed=seed)
    labels = {}
    for sid, split in zip(corpus.source_ids, corpus.split):
        assert labels.setdefault(sid, split) == split
    assert sorted(set(corpus.split)) == ["test", "train", "validation"]
    assert len(corpus.split) == 2 * n_sources


# ---------------------------------------------------------------------------
# 9. determinism
# ---------------------------------------------------------------------------


def _pipeline(root):
    root.mkdir()
    steps = [
        ["simulate", "--out", root / "events.evt1"],
        ["track", "--events", root / "events.evt1", "--drop-init", "--out", root / "track.csv"],
        ["sample", "--track", root / "track.csv", "--strategy", "spatial", "--delta-px", 2,
         "--out", root / "sampled.csv"],
        ["dataset", "build", "--count", 20, "--out", root / "corpus"],
        ["train", "--manifest", root / "corpus" / "manifest.json", "--strategy", "spatial", "--delta-px", 2,
         "--w-in", 10, "--w-out", 15, "--epochs", 3, "--stride", 2, "--out", root / "model.s2s"],
        ["eval", "--manifest", root / "corpus" / "manifest.json", "--strategy", "spatial", "--delta-px", 2,
         "--model", root / "model.s2s", "--out", root / "eval.csv"],
        ["sweep", "--axis", "wout", "--values", "5,15", "--count", 20, "--w-in", 10, "--epochs", 2,
         "--stride", 2, "--out", root / "sweep_wout.csv"],
        ["sweep", "--axis", "strategy", "--values", "2,4", "--count", 20, "--epochs", 2, "--stride", 2,
         "--out", root / "sweep_strategy.csv"],
    ]
    for step in steps:
        assert cli_main(["--seed", "11", *map(str, step)]) == 0
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


@pytest.mark.criterion(9, "two seeded pipeline runs give byte-identical result CSVs")
def test_c09_determinism(request, tmp_path):
    a = _pipeline(tmp_path / "run_a")
    b = _pipeline(tmp_path / "run_b")
    _detail(request, f"{len(a)} CSV files compared")
    assert a.keys() == b.keys()
    assert all(a[k] == b[k] for k in a)


# ---------------------------------------------------------------------------
# 10. tracker throughput
# ---------------------------------------------------------------------------


def _million_event_stream():
    cfg = SimConfig()
    parts, offset = [], 0
    k = 0
    while sum(len(p) for p in parts) < 1_000_000:
        initial, duration = random_throw(np.random.default_rng(k), cfg)
        states = simulate_trajectory(cfg, initial, duration, 1e-3)
        ev = generate_events(states, SimConfig(seed=k))
        ev["t"] += offset
        offset = int(ev["t"][-1]) + 1
        parts.append(ev)
        k += 1
    return np.concatenate(parts)[:1_000_000]


@pytest.mark.criterion(10, "tracker throughput >= 100,000 events/s on 1M events")
def test_c10_tracker_throughput(request):
    events = _million_event_stream()
    assert len(events) == 1_000_000
    start = time.perf_counter()
    track = track_stream(events)
    elapsed = time.perf_counter() - start
    rate = len(events) / elapsed
    _detail(request, f"{rate:,.0f} events/s ({len(track)} track points)")
    assert rate >= 100_000

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrtforge.models import (CHECKPOINT_VERSION, BaselineModel, Batch, CheckpointError,
                             LossWeights, Normalizer, PinnModel, load_checkpoint, save_checkpoint)
from mrtforge.nn import MLP, Adam, MlpSpec, sigmoid, softplus
from mrtforge.radiation import tmrt_from_fluxes

sys.path.insert(0, str(Path(__file__).parent / "oracles"))
import loss_oracle  # noqa: E402

# frozen from tests/oracles/radiation_oracle.py (zero-initialised heads)
ZERO_INIT_T = {1.0: -205.4186681827856, 100.0: -58.96472250097116}


def pinn(n_in=8, n_lw=3, hidden=(16,), seed=0, **kw):
    return PinnModel([f"f{i}" for i in range(n_in)], range(n_in), range(n_lw), hidden, seed=seed, **kw)


def zeroed(model):
    model.sw.zero_output_layer()
    model.lw.zero_output_layer()
    return model


def test_spec_defaults_and_validation():
    assert MlpSpec(4, 2).hidden_dims == [128, 256, 128]
    with pytest.raises(ValueError):
        MlpSpec(0, 2)
    with pytest.raises(ValueError):
        MlpSpec(4, 2, [8], activation="tanh")


def test_mlp_shape_error():
    net = MLP(MlpSpec(3, 2, [4]))
    assert net(np.zeros((5, 3))).shape == (5, 2)
    with pytest.raises(ValueError):
        net(np.zeros((5, 4)))


def test_mlp_backward_matches_finite_difference():
    rng = np.random.default_rng(1)
    net = MLP(MlpSpec(3, 2, [5, 4]), rng)
    x = rng.normal(size=(6, 3))
    out, cache = net.forward(x)
    up = rng.normal(size=out.shape)
    grads = net.backward(cache, up)
    h = 1e-6
    for p, g in zip(net.params, grads):
        for idx in list(np.ndindex(p.shape))[:6]:
            old = p[idx]
            p[idx] = old + h
            fp = float((net(x) * up).sum())
            p[idx] = old - h
            fm = float((net(x) * up).sum())
            p[idx] = old
            assert abs((fp - fm) / (2 * h) - g[idx]) < 1e-6


def test_softplus_and_sigmoid_stable():
    x = np.array([-800.0, -1.0, 0.0, 1.0, 800.0])
    assert np.all(np.isfinite(softplus(x)))
    assert softplus(np.array([0.0]))[0] == pytest.approx(math.log(2.0))
    s = sigmoid(x)
    assert s[0] == 0.0 and s[-1] == 1.0 and s[2] == 0.5


@pytest.mark.parametrize("scale", [1.0, 100.0])
def test_zero_initialised_heads(scale):
    m = zeroed(pinn(flux_scale=scale))
    out = m.predict(np.random.default_rng(0).normal(size=(3, 8)))
    assert np.allclose(out["S"], scale * math.log(2.0), rtol=1e-15)
    assert np.allclose(out["L"], scale * math.log(2.0), rtol=1e-15)
    assert np.allclose(out["tmrt"], ZERO_INIT_T[scale], atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 1e3))
def test_fluxes_nonnegative(seed, spread):
    rng = np.random.default_rng(seed)
    m = pinn(seed=seed % 7)
    out = m.predict(rng.normal(scale=spread, size=(16, 8)))
    assert np.all(out["S"] >= 0) and np.all(out["L"] >= 0)


def test_identical_rows_identical_outputs():
    m = pinn()
    x = np.random.default_rng(2).normal(size=(1, 8))
    out = m.predict(np.repeat(x, 4, axis=0))
    assert np.all(out["tmrt"] == out["tmrt"][0])
    assert np.array_equal(m.predict(np.repeat(x, 4, axis=0))["S"], out["S"])


def test_physics_layer_consistency():
    m = pinn(hidden=(32, 32), seed=3)
    out = m.predict(np.random.default_rng(4).normal(size=(50, 8)))
    t = tmrt_from_fluxes((out["S"], out["L"]), m.profile)
    assert np.max(np.abs(t - out["tmrt"])) < 1e-9


def test_input_shape_checked():
    with pytest.raises(ValueError):
        pinn().predict(np.zeros((2, 7)))


def crafted_batch(model):
    o = loss_oracle
    zeroed(model)
    model.set_output_bias(o.S, o.L)
    X = np.random.default_rng(0).normal(size=(2, model.input_dim))
    fl = np.array([o.S_LAB + o.L_LAB, [np.nan] * 12])
    return Batch(X, np.array(o.T_LAB), fl, np.array([False, True]))


def test_crafted_batch_loss():
    o = loss_oracle
    m = pinn(n_in=4, n_lw=2, hidden=(8,))
    total, comp = m.loss(crafted_batch(m))
    assert abs(total - o.total) < 1e-10
    assert abs(comp["tmrt"] - o.l_t) < 1e-10
    assert abs(comp["flux"] - o.l_f) < 1e-10
    assert abs(comp["night"] - o.l_n) < 1e-10


def test_perfect_predictions_zero_loss():
    m = pinn()
    X = np.random.default_rng(5).normal(size=(6, 8))
    out = m.predict(X)
    b = Batch(X, out["tmrt"], np.concatenate([out["S"], out["L"]], axis=1))
    total, comp, grads = m.loss(b, grad=True)
    assert total == 0.0
    assert max(np.abs(g).max() for g in grads) < 1e-8


def test_reduces_to_tmrt_mse():
    m = pinn()
    rng = np.random.default_rng(6)
    X = rng.normal(size=(10, 8))
    y = rng.uniform(20, 60, 10)
    b = Batch(X, y, rng.uniform(0, 500, (10, 12)), rng.random(10) < 0.5)
    total, _ = m.loss(b, LossWeights(1.0, 0.0, 0.0))
    assert total == pytest.approx(np.mean((m.predict(X)["tmrt"] - y) ** 2), rel=1e-14)


def test_flux_term_skips_unlabelled_rows():
    m = pinn()
    X = np.random.default_rng(7).normal(size=(4, 8))
    fl = np.full((4, 12), np.nan)
    _, comp = m.loss(Batch(X, np.zeros(4), fl))
    assert comp["flux"] == 0.0


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        Batch(np.zeros((0, 8)), np.zeros(0))


def test_loss_weights_nonnegative():
    with pytest.raises(ValueError):
        LossWeights(1.0, -0.1, 0.0)


def test_normalizer_constant_column():
    n = Normalizer.fit(np.array([[1.0, 5.0], [3.0, 5.0]]))
    assert n.std.tolist() == [1.0, 1.0]
    assert n(np.array([[2.0, 5.0]])).tolist() == [[0.0, 0.0]]


def test_baseline_loss_is_mse():
    m = BaselineModel([f"f{i}" for i in range(5)], (8,), target_mean=40.0, target_std=10.0)
    rng = np.random.default_rng(8)
    X, y = rng.normal(size=(7, 5)), rng.uniform(20, 60, 7)
    total, comp = m.loss(Batch(X, y))
    assert total == pytest.approx(np.mean((m.predict(X)["tmrt"] - y) ** 2))
    assert m.predict(X)["S"] is None


def test_adam_minimises_quadratic():
    p = [np.array([3.0, -2.0])]
    opt = Adam(p, lr=0.1)
    for _ in range(500):
        opt.step([2 * p[0]])
    assert np.abs(p[0]).max() < 1e-2


def test_adam_weight_decay_mask():
    p = [np.ones(2), np.ones(2)]
    opt = Adam(p, lr=0.1, weight_decay=0.5, decay=[True, False])
    opt.step([np.zeros(2), np.zeros(2)])
    assert p[0].tolist() == [0.95, 0.95] and p[1].tolist() == [1.0, 1.0]


def test_adam_rejects_bad_lr():
    with pytest.raises(ValueError):
        Adam([np.zeros(1)], lr=0.0)


@pytest.mark.parametrize("kind", ["pinn", "baseline"])
def test_checkpoint_round_trip(tmp_path, kind):
    if kind == "pinn":
        m = pinn(hidden=(8, 4), seed=9)
    else:
        m = BaselineModel([f"f{i}" for i in range(8)], (8,), seed=9, target_mean=3.0)
    m.normalizer = Normalizer(np.arange(8.0), np.ones(8) * 2)
    save_checkpoint(tmp_path / "c.json", m, {"names": m.feature_names}, {"note": 1})
    back, feats, extra = load_checkpoint(tmp_path / "c.json")
    X = np.random.default_rng(10).normal(size=(5, 8))
    assert np.array_equal(back.predict(X)["tmrt"], m.predict(X)["tmrt"])
    assert np.array_equal(back.normalizer.mean, m.normalizer.mean)
    assert feats == {"names": m.feature_names} and extra == {"note": 1}


def test_checkpoint_version_rejected(tmp_path):
    save_checkpoint(tmp_path / "c.json", pinn(), {})
    doc = json.loads((tmp_path / "c.json").read_text())
    doc["version"] = CHECKPOINT_VERSION + 1
    (tmp_path / "c.json").write_text(json.dumps(doc))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(tmp_path / "c.json")


def test_checkpoint_garbage_rejected(tmp_path):
    (tmp_path / "a.json").write_text("{not json")
    (tmp_path / "b.json").write_text('{"format": "other"}')
    for name in ("a.json", "b.json", "missing.json"):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / name)

import json

import numpy as np
import pytest

from attre2vec.errors import ValidationError
from attre2vec.optim import (
    AdamW,
    MissingGradient,
    ParameterStore,
    adamw_step,
    read_checkpoint,
    save_checkpoint,
)


def store(**arrays):
    p = ParameterStore()
    for k, v in arrays.items():
        p.add(k, np.asarray(v, float))
    return p


def test_zero_gradient_no_decay_leaves_params():
    p = store(w=[1.0, -2.0])
    p["w"].grad = np.zeros(2)
    adamw_step(p, AdamW(weight_decay=0.0))
    assert np.array_equal(p["w"].value, [1.0, -2.0])


def test_first_step_by_hand():
    p = store(w=[0.0])
    p["w"].grad = np.array([1.0])
    opt = AdamW(lr=0.001, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0)
    opt.step(p)
    # m_hat = v_hat = 1 -> step = lr * 1 / (1 + eps)
    assert p["w"].value[0] == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-18)
    assert opt.step_count == 1


def test_decoupled_weight_decay_by_hand():
    p = store(w=[2.0])
    p["w"].grad = np.array([0.0])
    AdamW(lr=0.1, weight_decay=0.5).step(p)
    assert p["w"].value[0] == pytest.approx(2.0 * (1 - 0.05))


def test_identical_params_stay_identical():
    p = store(a=[0.3, 0.1], b=[0.3, 0.1])
    opt = AdamW()
    for g in ([1.0, -1.0], [0.5, 2.0]):
        p["a"].grad = np.array(g)
        p["b"].grad = np.array(g)
        opt.step(p)
    assert np.array_equal(p["a"].value, p["b"].value)


def test_missing_gradient_named():
    p = store(a=[1.0], b=[1.0])
    p["a"].grad = np.ones(1)
    with pytest.raises(MissingGradient, match="'b'"):
        AdamW().step(p)


def test_duplicate_names_rejected():
    p = store(a=[1.0])
    with pytest.raises(ValueError):
        p.add("a", [2.0])


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    p = store(a=rng.normal(size=(2, 3)), b=rng.normal(size=4))
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, p, {"d": 3})
    cfg, state, payload = read_checkpoint(path)
    assert cfg == {"d": 3} and payload["version"] == 1
    q = store(a=np.zeros((2, 3)), b=np.zeros(4))
    q.load_state(state)
    for k in ("a", "b"):
        assert np.array_equal(q[k].value, p[k].value)


def test_checkpoint_rejects_shape_mismatch(tmp_path):
    p = store(a=np.ones((2, 3)))
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, p, {})
    _, state, _ = read_checkpoint(path)
    with pytest.raises(ValidationError, match="shape"):
        store(a=np.ones((3, 2))).load_state(state)
    raw = json.loads(path.read_text())
    raw["params"]["a"]["shape"] = [7]
    path.write_text(json.dumps(raw))
    with pytest.raises(ValidationError):
        read_checkpoint(path)

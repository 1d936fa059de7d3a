import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jcm import autodiff as ad


def _mlp(widths, seed=0, head="linear"):
    store = ad.ParamStore()
    spec = ad.MLPSpec(widths, head=head)
    ad.init_mlp(store, spec, "", np.random.default_rng(seed))
    return store, spec


def test_zero_network_outputs_zero():
    store, spec = _mlp((3, 4, 2))
    for k in store.params:
        store.params[k][...] = 0
    out, _ = ad.mlp_forward(store, spec, np.ones((5, 3)))
    np.testing.assert_array_equal(out.data, 0)


def test_identity_layer():
    store = ad.ParamStore()
    store.add("0.W", np.eye(3))
    store.add("0.b", np.zeros(3))
    x = np.arange(6.0).reshape(2, 3)
    out, _ = ad.mlp_forward(store, ad.MLPSpec((3, 3)), x)
    np.testing.assert_array_equal(out.data, x)


def test_init_is_seeded_and_glorot_bounded():
    a, spec = _mlp((10, 6, 4), seed=3)
    b, _ = _mlp((10, 6, 4), seed=3)
    x = np.linspace(0, 1, 20).reshape(2, 10)
    assert ad.mlp_forward(a, spec, x)[0].data.tobytes() == ad.mlp_forward(b, spec, x)[0].data.tobytes()
    assert np.abs(a.params["0.W"]).max() <= math.sqrt(6 / 16)
    np.testing.assert_array_equal(a.params["1.b"], 0)


def test_linear_sum_gradient():
    store = ad.ParamStore()
    store.add("W", np.ones((3, 2)))
    x = np.arange(12.0).reshape(4, 3)
    tape = ad.Tape()
    loss = (tape.const(x) @ tape.param(store, "W")).sum()
    ad.backward(tape, loss)
    np.testing.assert_array_equal(store.grads["W"], np.outer(x.sum(0), np.ones(2)))


def test_backward_accumulates():
    store, spec = _mlp((3, 4, 2))
    x = np.random.default_rng(0).standard_normal((5, 3))

    def run():
        out, tape = ad.mlp_forward(store, spec, x)
        ad.backward(tape, ad.square(out).sum())
    run()
    first = {k: g.copy() for k, g in store.grads.items()}
    run()
    for k in first:
        np.testing.assert_array_equal(store.grads[k], 2 * first[k])


def test_backward_errors():
    with pytest.raises(RuntimeError):
        ad.backward(ad.Tape())
    tape = ad.Tape()
    with pytest.raises(ValueError):
        ad.backward(tape, tape.const(np.ones(3)) * 2.0)


def _composite_loss(x, y):
    def loss_fn(store):
        tape = ad.Tape()
        h = ad.relu(tape.const(x) @ tape.param(store, "W1") + tape.param(store, "b1"))
        z = h @ tape.param(store, "W2")
        p = ad.floor_renorm(ad.softmax(z), 1e-12)
        ce = -(ad.log(p) * y).sum(axis=1).mean()
        extra = ad.sqrt(ad.square(z).sum(axis=1) + 1.0).mean() / 3.0
        t = ad.transpose(ad.concat([z, ad.exp(z * 0.1)], axis=1), (1, 0))
        return ce + extra + ad.log_softmax(t, axis=0)[0:2].mean() + (1.0 - t[1]).sum() * 0.01, tape
    return loss_fn


def test_composite_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    store = ad.ParamStore()
    store.add("W1", rng.standard_normal((4, 7)))
    store.add("b1", rng.standard_normal(7) * 0.1)
    store.add("W2", rng.standard_normal((7, 3)))
    x = rng.standard_normal((6, 4))
    y = np.eye(3)[rng.integers(0, 3, 6)]
    rep = ad.gradcheck(_composite_loss(x, y), store)
    assert rep.max_rel_err < 1e-4


def test_straight_through_passes_soft_gradient():
    store = ad.ParamStore()
    store.add("a", np.array([0.3, -0.2]))
    tape = ad.Tape()
    a = tape.param(store, "a")
    out = ad.straight_through(a * 2.0, np.array([1.0, -1.0]))
    np.testing.assert_array_equal(out.data, [1.0, -1.0])
    ad.backward(tape, out.sum())
    np.testing.assert_array_equal(store.grads["a"], [2.0, 2.0])


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 5), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_shift_invariance(x, c):
    tape = ad.Tape()
    np.testing.assert_allclose(ad.softmax(tape.const(x + c)).data, ad.softmax(tape.const(x)).data,
                               atol=1e-12)


def test_adam_zero_grad_and_zero_lr():
    store = ad.ParamStore()
    store.add("p", np.array([1.0, 2.0]))
    ad.adam_step(store, 0.1)
    np.testing.assert_array_equal(store.params["p"], [1.0, 2.0])
    store.grads["p"][...] = [0.5, -1.0]
    ad.adam_step(store, 0.0)
    np.testing.assert_array_equal(store.params["p"], [1.0, 2.0])
    assert np.all(store.m["p"] != 0) and np.all(store.v["p"] != 0)


def test_adam_first_step_magnitude():
    # hand-computed: mhat = g, vhat = g^2, so the step is lr * g / (|g| + eps)
    for g in (3.0, -0.01):
        store = ad.ParamStore()
        store.add("p", np.array([0.0]))
        store.grads["p"][...] = g
        ad.adam_step(store, 1e-3)
        assert store.params["p"][0] == pytest.approx(-1e-3 * g / (abs(g) + 1e-8), rel=1e-12)
        np.testing.assert_array_equal(store.grads["p"], 0)


def test_adam_rejects_non_finite():
    store = ad.ParamStore()
    store.add("p", np.zeros(1))
    store.grads["p"][...] = np.nan
    with pytest.raises(ad.NonFiniteGradient):
        ad.adam_step(store, 1e-3)


def test_cosine_schedule():
    assert ad.cosine_lr(0) == 5e-4
    assert ad.cosine_lr(300) == 1e-6
    assert ad.cosine_lr(150) == pytest.approx(1e-6 + 0.5 * 4.99e-4, rel=1e-12)
    assert ad.cosine_lr(500) == 1e-6
    lrs = [ad.cosine_lr(t) for t in range(301)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def _read_jcmp(raw):
    """Independent parser following the documented byte layout."""
    assert raw[:4] == b"JCMP"
    version, count = struct.unpack_from("<HI", raw, 4)
    pos, out = 10, {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, pos)
        name = raw[pos + 2:pos + 2 + nlen].decode()
        pos += 2 + nlen
        ndim = raw[pos]
        shape = struct.unpack_from(f"<{ndim}I", raw, pos + 1)
        pos += 1 + 4 * ndim
        size = int(np.prod(shape))
        out[name] = np.array(struct.unpack_from(f"<{size}d", raw, pos)).reshape(shape)
        pos += 8 * size
    assert pos == len(raw)
    return version, out


def test_checkpoint_round_trip_and_layout(tmp_path):
    store, spec = _mlp((3, 5, 2), seed=4)
    store.add("scalar", np.float64(2.5))
    path = tmp_path / "m.jcmp"
    ad.save_checkpoint(store, path)
    version, arrays = _read_jcmp(path.read_bytes())
    assert version == 1
    loaded = ad.load_checkpoint(path)
    assert list(loaded) == list(store.params)
    for k, v in store.params.items():
        np.testing.assert_array_equal(loaded[k], v)
        np.testing.assert_array_equal(arrays[k], v)
    fresh, _ = _mlp((3, 5, 2), seed=9)
    fresh.add("scalar", 0.0)
    ad.restore_params(fresh, loaded)
    assert fresh.flat().tobytes() == store.flat().tobytes()


def test_checkpoint_corruption(tmp_path):
    store, _ = _mlp((2, 2))
    path = tmp_path / "m.jcmp"
    ad.save_checkpoint(store, path)
    raw = path.read_bytes()
    for bad in (b"XXXX" + raw[4:], raw[:-3], raw + b"\0", raw[:4] + b"\x02\x00" + raw[6:]):
        path.write_bytes(bad)
        with pytest.raises(ad.CheckpointError):
            ad.load_checkpoint(path)


def test_gradcheck_flags_wrong_gradient():
    store = ad.ParamStore()
    store.add("p", np.array([1.0, 2.0]))

    def loss_fn(s):
        tape = ad.Tape()
        p = tape.param(s, "p")
        # forward is p^2 but the recorded gradient is wrong by construction
        wrong = ad.straight_through(p * 3.0, s.params["p"] ** 2)
        return wrong.sum(), tape
    assert ad.gradcheck(loss_fn, store).pass_fraction == 0.0

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from honeyseq.features import CATEGORICAL, FEATURES, TARGETS, EncodedSequence
from honeyseq.neural import (
    Adam,
    InputSpec,
    NonFinite,
    RecurrentConfig,
    SequenceClassifier,
    ShapeMismatch,
    TcnConfig,
    TrainConfig,
    accuracy,
    causal_dilated_conv,
    checkpoint,
    clip_gradients,
    gru_step,
    loss_and_grad,
    lstm_step,
    predict_next,
    residual_block_forward,
    tcn_forward,
    train,
)
from honeyseq.neural import ops
from honeyseq.neural.tensor import Tensor

SPEC = InputSpec({n: 3 for n in CATEGORICAL}, None, embedding_dim=2)


def rand_inputs(rng, steps, spec=SPEC):
    x = np.zeros((17, steps))
    for i, n in enumerate(FEATURES):
        if n in CATEGORICAL:
            x[i] = rng.integers(-1, spec.cardinality[n] + 1, steps)
        else:
            x[i] = rng.normal(size=steps)
    return x


TINY = [("tcn", TcnConfig(2, 4, 2, 0.1)), ("lstm", RecurrentConfig(5, 0.1)), ("gru", RecurrentConfig(5, 0.1))]


# --- causal convolution ---------------------------------------------------------

def test_identity_kernel():
    x = np.random.default_rng(0).normal(size=(3, 6))
    assert np.array_equal(causal_dilated_conv(x, np.eye(3)[:, :, None], 1), x)


def test_impulse_response():
    x = np.zeros((1, 6))
    x[0, 0] = 1.0
    y = causal_dilated_conv(x, np.ones((1, 1, 2)), 1)
    assert y[0].tolist() == [1, 1, 0, 0, 0, 0]
    y = causal_dilated_conv(x, np.ones((1, 1, 2)), 3)
    assert y[0].tolist() == [1, 0, 0, 1, 0, 0]


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3), st.integers(0, 11))
def test_conv_perturbation_causality(seed, k, d, t0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 12))
    kern = rng.normal(size=(3, 2, k))
    y = causal_dilated_conv(x, kern, d)
    x2 = x.copy()
    x2[:, t0] += rng.normal(size=2) + 1.0
    y2 = causal_dilated_conv(x2, kern, d)
    assert np.array_equal(y[:, :t0], y2[:, :t0])
    # outputs beyond the kernel span are unaffected too
    assert np.array_equal(y[:, t0 + d * (k - 1) + 1:], y2[:, t0 + d * (k - 1) + 1:])


def test_conv_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        causal_dilated_conv(np.zeros((3, 5)), np.zeros((2, 4, 2)), 1)
    with pytest.raises((ShapeMismatch, ValueError)):
        causal_dilated_conv(np.zeros((3, 5)), np.zeros((2, 3, 2)), 0)


# --- residual block -------------------------------------------------------------

def _block_params(rng, c_in, c_out, k, zero=False):
    p = {}
    for n, fan in ((1, c_in), (2, c_out)):
        p[f"conv{n}.w"] = np.zeros((c_out, fan, k)) if zero else rng.normal(size=(c_out, fan, k))
        p[f"conv{n}.b"] = np.zeros(c_out)
        p[f"norm{n}.gain"] = np.ones(c_out)
        p[f"norm{n}.offset"] = np.zeros(c_out)
    if c_in != c_out:
        p["proj.w"] = rng.normal(size=(c_out, c_in))
        p["proj.b"] = np.zeros(c_out)
    return p


def test_zero_branch_is_relu():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 7))
    y = residual_block_forward(x, _block_params(rng, 4, 4, 2, zero=True), dilation=2)
    assert np.array_equal(y, np.maximum(x, 0.0))


def test_dropout_zero_train_equals_eval():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 7))
    p = _block_params(rng, 4, 4, 3)
    ev = residual_block_forward(x, p, 1)
    tr = residual_block_forward(x, p, 1, dropout=0.0, rng=np.random.default_rng(9))
    assert np.array_equal(ev, tr)
    dropped = residual_block_forward(x, p, 1, dropout=0.5, rng=np.random.default_rng(9))
    assert not np.array_equal(ev, dropped)


def test_projection_path():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 5))
    y = residual_block_forward(x, _block_params(rng, 3, 6, 2), 1)
    assert y.shape == (6, 5)
    p = _block_params(rng, 3, 6, 2)
    del p["proj.w"], p["proj.b"]
    with pytest.raises(ShapeMismatch):
        residual_block_forward(x, p, 1)


def test_model_projection_iff_channels_differ():
    m = SequenceClassifier.create("tcn", TcnConfig(2, SPEC.channels, 2), SPEC, 5)
    assert not any(k.endswith("proj.w") for k in m.params)
    m = SequenceClassifier.create("tcn", TcnConfig(2, 7, 2), SPEC, 5)
    assert "block0.proj.w" in m.params and "block1.proj.w" not in m.params


# --- TCN ------------------------------------------------------------------------

def test_dilation_schedule():
    cfg = TcnConfig(num_blocks=4)
    assert [cfg.dilation(b) for b in range(4)] == [1, 2, 4, 8]
    assert TcnConfig(2, 100, 2).receptive_field == 7


def measured_receptive_field(model, steps, seed=0):
    rng = np.random.default_rng(seed)
    x = rand_inputs(rng, steps, model.inputs)
    base = model.logits(x)[:, -1]
    real = [i for i, n in enumerate(FEATURES) if n not in CATEGORICAL]
    influencing = []
    for t in range(steps):
        x2 = x.copy()
        x2[real, t] += 3.0 + rng.normal(size=len(real))
        if not np.array_equal(model.logits(x2)[:, -1], base):
            influencing.append(t)
    return steps - min(influencing), influencing


@pytest.mark.parametrize("blocks", [1, 2, 3])
@pytest.mark.parametrize("k", [2, 3])
def test_receptive_field_law(blocks, k):
    cfg = TcnConfig(blocks, 6, k, 0.0)
    model = SequenceClassifier.create("tcn", cfg, SPEC, 4, seed=blocks * 10 + k)
    law = 1 + 2 * (k - 1) * (2 ** blocks - 1)
    steps = law + 6
    rf, influencing = measured_receptive_field(model, steps)
    assert rf == law == cfg.receptive_field
    assert influencing == list(range(steps - law, steps))


@given(st.integers(0, 1000), st.integers(1, 11))
def test_tcn_end_to_end_causality(seed, t0):
    rng = np.random.default_rng(seed)
    model = SequenceClassifier.create("tcn", TcnConfig(2, 5, 3, 0.3), SPEC, 4, seed=seed)
    x = rand_inputs(rng, 12)
    y = model.logits(x)
    x2 = x.copy()
    x2[:, t0:] = rand_inputs(rng, 12 - t0)
    assert np.array_equal(model.logits(x2)[:, :t0], y[:, :t0])


def test_tcn_single_step_and_determinism():
    cfg = TcnConfig()
    spec = InputSpec({n: 10 for n in CATEGORICAL}, None, 8)
    a = SequenceClassifier.create("tcn", cfg, spec, 12, seed=7)
    b = SequenceClassifier.create("tcn", cfg, spec, 12, seed=7)
    x = rand_inputs(np.random.default_rng(0), 1, spec)
    assert tcn_forward(x, cfg, a).shape == (12, 1)
    x = rand_inputs(np.random.default_rng(0), 9, spec)
    assert tcn_forward(x, cfg, a).tobytes() == tcn_forward(x, cfg, b).tobytes()
    with pytest.raises(ShapeMismatch):
        tcn_forward(x, TcnConfig(3), a)
    with pytest.raises(ShapeMismatch):
        a.logits(np.zeros((16, 3)))


# --- recurrent cells --------------------------------------------------------------

def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def lstm_oracle(x, h, c, w, u, b):
    """Gate equations written out per unit with scalar math."""
    H = len(h)
    pre = [sum(w[r][j] * x[j] for j in range(len(x))) + sum(u[r][j] * h[j] for j in range(H)) + b[r]
           for r in range(4 * H)]
    h_new, c_new = [], []
    for n in range(H):
        i_g = _sig(pre[n])
        f_g = _sig(pre[H + n])
        g_c = math.tanh(pre[2 * H + n])
        o_g = _sig(pre[3 * H + n])
        cn = f_g * c[n] + i_g * g_c
        c_new.append(cn)
        h_new.append(o_g * math.tanh(cn))
    return h_new, c_new


def gru_oracle(x, h, w, u, b):
    H = len(h)
    wx = [sum(w[r][j] * x[j] for j in range(len(x))) + b[r] for r in range(3 * H)]
    uh = [sum(u[r][j] * h[j] for j in range(H)) for r in range(3 * H)]
    out = []
    for n in range(H):
        r_g = _sig(wx[n] + uh[n])
        z_g = _sig(wx[H + n] + uh[H + n])
        cand = math.tanh(wx[2 * H + n] + r_g * uh[2 * H + n])
        out.append((1 - z_g) * cand + z_g * h[n])
    return out


@pytest.mark.parametrize("seed", range(5))
def test_lstm_step_vs_oracle(seed):
    rng = np.random.default_rng(seed)
    D, H = 4, 3
    x, h, c = rng.normal(size=D), rng.normal(size=H), rng.normal(size=H)
    w, u, b = rng.normal(size=(4 * H, D)), rng.normal(size=(4 * H, H)), rng.normal(size=4 * H)
    h1, c1 = lstm_step(x, h, c, w, u, b)
    ho, co = lstm_oracle(x.tolist(), h.tolist(), c.tolist(), w.tolist(), u.tolist(), b.tolist())
    assert np.max(np.abs(h1 - ho)) < 1e-12 and np.max(np.abs(c1 - co)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_gru_step_vs_oracle(seed):
    rng = np.random.default_rng(seed)
    D, H = 4, 3
    x, h = rng.normal(size=D), rng.normal(size=H)
    w, u, b = rng.normal(size=(3 * H, D)), rng.normal(size=(3 * H, H)), rng.normal(size=3 * H)
    got = gru_step(x, h, w, u, b)
    assert np.max(np.abs(got - gru_oracle(x.tolist(), h.tolist(), w.tolist(), u.tolist(), b.tolist()))) < 1e-12


def test_zero_weights_zero_hidden():
    x = np.arange(4.0)
    h, c = lstm_step(x, np.zeros(3), np.zeros(3), np.zeros((12, 4)), np.zeros((12, 3)), np.zeros(12))
    assert np.array_equal(h, np.zeros(3))
    assert np.array_equal(gru_step(x, np.zeros(3), np.zeros((9, 4)), np.zeros((9, 3)), np.zeros(9)), np.zeros(3))


def test_lstm_gate_saturation():
    rng = np.random.default_rng(4)
    H, D = 3, 4
    b = np.zeros(4 * H)
    b[:H] = -50.0        # input gate closed
    b[H:2 * H] = 50.0    # forget gate open
    c_prev = rng.normal(size=H)
    _, c = lstm_step(rng.normal(size=D), rng.normal(size=H), c_prev,
                     rng.normal(size=(4 * H, D)) * 0.1, rng.normal(size=(4 * H, H)) * 0.1, b)
    assert np.max(np.abs(c - c_prev)) < 1e-9


def test_step_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        lstm_step(np.zeros(4), np.zeros(3), np.zeros(3), np.zeros((12, 5)), np.zeros((12, 3)), np.zeros(12))
    with pytest.raises(ShapeMismatch):
        gru_step(np.zeros(4), np.zeros(3), np.zeros((12, 4)), np.zeros((9, 3)), np.zeros(9))


@pytest.mark.parametrize("cell,step,gates", [(ops.lstm, "lstm", 4), (ops.gru, "gru", 3)])
def test_sequence_cell_matches_steps(cell, step, gates):
    rng = np.random.default_rng(5)
    D, H, T = 4, 3, 6
    x = rng.normal(size=(D, T))
    w, u, b = rng.normal(size=(gates * H, D)), rng.normal(size=(gates * H, H)), rng.normal(size=gates * H)
    out = cell(Tensor(x), Tensor(w), Tensor(u), Tensor(b)).data
    h, c = np.zeros(H), np.zeros(H)
    for t in range(T):
        if step == "lstm":
            h, c = lstm_step(x[:, t], h, c, w, u, b)
        else:
            h = gru_step(x[:, t], h, w, u, b)
        np.testing.assert_allclose(out[:, t], h, rtol=0, atol=1e-14)


@pytest.mark.parametrize("hidden", [5, 128, 600])
def test_gru_is_three_quarters_of_lstm(hidden):
    cfg = RecurrentConfig(hidden)
    lstm = SequenceClassifier.create("lstm", cfg, SPEC, 4)
    gru = SequenceClassifier.create("gru", cfg, SPEC, 4)
    assert 4 * gru.num_parameters("rnn.") == 3 * lstm.num_parameters("rnn.")
    assert gru.num_parameters() < lstm.num_parameters()


# --- loss and gradients ------------------------------------------------------------

def test_uniform_logits_loss_is_log_c():
    rng = np.random.default_rng(0)
    for kind, cfg in TINY:
        m = SequenceClassifier.create(kind, cfg, SPEC, 7)
        m.params["head.w"][:] = 0.0
        loss, _ = loss_and_grad(m, rand_inputs(rng, 5), rng.integers(0, 7, 5))
        assert abs(loss - math.log(7)) < 1e-12


@pytest.mark.parametrize("kind,cfg", [("tcn", TcnConfig()), ("lstm", RecurrentConfig()), ("gru", RecurrentConfig())])
def test_initial_loss_near_log_c(kind, cfg):
    rng = np.random.default_rng(1)
    spec = InputSpec({n: 10 for n in CATEGORICAL}, None, 8)
    m = SequenceClassifier.create(kind, cfg, spec, 12, seed=3)
    losses = [loss_and_grad(m, rand_inputs(rng, 12, spec), np.arange(12))[0] for _ in range(3)]
    assert abs(np.mean(losses) - math.log(12)) < 0.05 * math.log(12)


def _fd_errors(model, x, y, key, eps=1e-5):
    _, grads = loss_and_grad(model, x, y, None, key)
    errors = {}
    for name, p in model.params.items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            lp, _ = loss_and_grad(model, x, y, None, key)
            p[idx] = old - eps
            lm, _ = loss_and_grad(model, x, y, None, key)
            p[idx] = old
            num[idx] = (lp - lm) / (2 * eps)
        den = max(np.linalg.norm(grads[name]), np.linalg.norm(num))
        errors[name] = 0.0 if den < 1e-12 else float(np.linalg.norm(grads[name] - num) / den)
    return errors


@pytest.mark.parametrize("kind,cfg", TINY)
def test_finite_difference_gradients(kind, cfg):
    rng = np.random.default_rng(11)
    m = SequenceClassifier.create(kind, cfg, SPEC, 5, seed=1)
    for k in m.params:
        m.params[k] = m.params[k] + rng.normal(scale=0.3, size=m.params[k].shape)
    assert m.num_parameters() <= 5000
    x = rand_inputs(rng, 7)
    y = rng.integers(0, 5, 7)
    errors = _fd_errors(m, x, y, key=(1, 2, 3))
    assert set(errors) == set(m.params)
    assert max(errors.values()) < 1e-4, errors


def test_scaled_inputs_gradient():
    from honeyseq.features import Scaler
    spec = InputSpec(SPEC.cardinality, Scaler({"hour": 12.0, "date": 15.0, "event_order": 3.0, "dest_port": 1.0},
                                              {"hour": 6.0, "date": 8.0, "event_order": 2.0, "dest_port": 100.0}), 2)
    rng = np.random.default_rng(12)
    m = SequenceClassifier.create("tcn", TcnConfig(1, 3, 2, 0.0), spec, 4, seed=2)
    errors = _fd_errors(m, rand_inputs(rng, 5, spec), rng.integers(0, 4, 5), None)
    assert max(errors.values()) < 1e-4


def test_clipping():
    g = {"a": np.array([6.0, 0.0]), "b": np.array([[0.0, 8.0]])}
    norm = clip_gradients(g, 1.0)
    assert norm == 10.0
    total = math.sqrt(sum(float((v ** 2).sum()) for v in g.values()))
    assert abs(total - 1.0) < 1e-12
    small = {"a": np.array([0.3])}
    clip_gradients(small, 1.0)
    assert small["a"][0] == 0.3


def test_loss_and_grad_threshold():
    rng = np.random.default_rng(3)
    m = SequenceClassifier.create("gru", RecurrentConfig(4), SPEC, 5)
    for k in m.params:
        m.params[k] = m.params[k] * 20
    _, g = loss_and_grad(m, rand_inputs(rng, 6), rng.integers(0, 5, 6), threshold=1.0)
    assert math.sqrt(sum(float((v ** 2).sum()) for v in g.values())) <= 1.0 + 1e-12


def test_non_finite_detected():
    rng = np.random.default_rng(0)
    m = SequenceClassifier.create("tcn", TcnConfig(1, 3, 2), SPEC, 4)
    x = rand_inputs(rng, 4)
    x[FEATURES.index("hour"), 1] = np.nan
    with pytest.raises(NonFinite):
        loss_and_grad(m, x, np.zeros(4, dtype=int))
    seq = EncodedSequence("bad", x, np.zeros((4, 4), dtype=np.int64))
    with pytest.raises(NonFinite, match="bad"):
        train(m, "event_type", [seq], TrainConfig(max_epochs=1))


# --- training -------------------------------------------------------------------

def test_train_config_defaults():
    c = TrainConfig()
    assert (c.max_epochs, c.minibatch_size, c.initial_lr, c.lr_drop_factor, c.lr_drop_period,
            c.gradient_threshold) == (30, 1, 0.001, 0.1, 12, 1.0)
    assert [c.learning_rate(e) for e in (0, 11, 12, 23, 24, 29)] == pytest.approx(
        [1e-3, 1e-3, 1e-4, 1e-4, 1e-5, 1e-5], rel=1e-12)
    assert (TcnConfig(), RecurrentConfig()) == (TcnConfig(2, 100, 2, 0.02), RecurrentConfig(600, 0.05))


def test_adam_matches_formula():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam(p)
    g1, g2 = np.array([0.5, -1.0]), np.array([0.1, 0.2])
    opt.step({"w": g1}, 0.01)
    opt.step({"w": g2}, 0.01)
    m = 0.1 * g1 * 0.9 + 0.1 * g2
    v = 0.001 * g1 ** 2 * 0.999 + 0.001 * g2 ** 2
    w = np.array([1.0, -2.0]) - 0.01 * np.sign(g1) * 1.0  # first step moves by lr*sign
    w = w - 0.01 * (m / (1 - 0.9 ** 2)) / (np.sqrt(v / (1 - 0.999 ** 2)) + 1e-8)
    # the implementation folds epsilon into the bias correction, a 1e-8-scale difference
    np.testing.assert_allclose(p["w"], w, rtol=0, atol=1e-8)


def _chain_sequences(n_seq, steps, spec):
    """Alternating A,B,A,B... in the command_type feature; next label alternates too."""
    row = FEATURES.index("command_type")
    seqs = []
    for s in range(n_seq):
        x = np.zeros((17, steps))
        x[[i for i, n in enumerate(FEATURES) if n in CATEGORICAL]] = -1
        first = s % 2
        states = [(first + t) % 2 for t in range(steps + 1)]
        x[row] = states[:-1]
        y = np.full((4, steps), 0, dtype=np.int64)
        y[TARGETS.index("command_type")] = states[1:]
        seqs.append(EncodedSequence(f"s{s}", x, y))
    return seqs


@pytest.mark.parametrize("kind,cfg", [("tcn", TcnConfig(1, 8, 2, 0.0)), ("lstm", RecurrentConfig(8, 0.0)),
                                      ("gru", RecurrentConfig(8, 0.0))])
def test_memorizable_dataset(kind, cfg):
    spec = InputSpec({n: 2 for n in CATEGORICAL}, None, 2)
    seqs = _chain_sequences(40, 5, spec)
    m = SequenceClassifier.create(kind, cfg, spec, 4, seed=0)
    hist = train(m, "command_type", seqs, TrainConfig(max_epochs=30, seed=0), eval_sequences=seqs)
    assert accuracy(m, seqs, "command_type") == 1.0
    assert len(hist.train_loss) == 30 and hist.train_loss[-1] < hist.train_loss[0]
    # after A comes B, after B comes A
    prefix = seqs[0].inputs[:, :1]
    assert prefix[FEATURES.index("command_type"), 0] == 0
    assert int(np.argmax(predict_next(m, prefix))) == 1
    assert int(np.argmax(predict_next(m, seqs[0].inputs[:, :2]))) == 0


def test_training_deterministic():
    spec = InputSpec({n: 2 for n in CATEGORICAL}, None, 2)
    seqs = _chain_sequences(4, 4, spec)
    finals = []
    for _ in range(2):
        m = SequenceClassifier.create("tcn", TcnConfig(1, 4, 2, 0.2), spec, 4, seed=5)
        train(m, "command_type", seqs, TrainConfig(max_epochs=3, seed=9))
        finals.append({k: v.tobytes() for k, v in m.params.items()})
    assert finals[0] == finals[1]


def test_train_rejects_empty_and_bad_target():
    m = SequenceClassifier.create("tcn", TcnConfig(1, 3, 2), SPEC, 4)
    with pytest.raises(ValueError):
        train(m, "command_type", [])
    with pytest.raises(ValueError):
        train(m, "colour", _chain_sequences(1, 3, SPEC))


# --- prediction -------------------------------------------------------------------

@given(st.integers(0, 500), st.sampled_from(["tcn", "lstm", "gru"]), st.integers(1, 8))
def test_predict_next_is_distribution(seed, kind, steps):
    cfg = dict(TINY)[kind]
    m = SequenceClassifier.create(kind, cfg, SPEC, 6, seed=seed)
    p = predict_next(m, rand_inputs(np.random.default_rng(seed), steps))
    assert p.shape == (6,) and np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-9


def test_future_padding_does_not_change_prediction():
    rng = np.random.default_rng(8)
    m = SequenceClassifier.create("tcn", TcnConfig(2, 5, 2, 0.0), SPEC, 6, seed=1)
    prefix = rand_inputs(rng, 5)
    p = predict_next(m, prefix)
    padded = np.concatenate([prefix, rand_inputs(rng, 4)], axis=1)
    assert np.array_equal(ops.softmax_array(m.logits(padded)[:, 4:5])[:, 0], p)


def test_predict_next_empty_prefix():
    m = SequenceClassifier.create("tcn", TcnConfig(1, 3, 2), SPEC, 4)
    with pytest.raises(ShapeMismatch):
        predict_next(m, np.zeros((17, 0)))


# --- checkpoint -----------------------------------------------------------------

@pytest.mark.parametrize("kind,cfg", TINY)
def test_checkpoint_round_trip(tmp_path, kind, cfg):
    m = SequenceClassifier.create(kind, cfg, SPEC, 5, seed=3)
    path = tmp_path / "m.json"
    checkpoint.save(path, m, "command", "abc", {"note": 1})
    m2, meta = checkpoint.load(path)
    assert meta == {"target": "command", "vocab_digest": "abc", "extra": {"note": 1}}
    assert (m2.kind, m2.config, m2.num_classes) == (m.kind, m.config, m.num_classes)
    for k in m.params:
        assert m2.params[k].tobytes() == m.params[k].tobytes()
    x = rand_inputs(np.random.default_rng(0), 4)
    assert m2.logits(x).tobytes() == m.logits(x).tobytes()


def test_checkpoint_errors(tmp_path):
    m = SequenceClassifier.create("gru", RecurrentConfig(3), SPEC, 5)
    obj = checkpoint.to_dict(m, "command", "abc")
    bad = dict(obj)
    del bad["version"]
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.from_dict(bad)
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.from_dict({**obj, "format": "other"})
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.from_dict({**obj, "version": 99})
    t = checkpoint.encode_tensor(np.arange(6.0).reshape(2, 3))
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.decode_tensor({**t, "shape": [4, 2]})
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.decode_tensor({**t, "dtype": "float32"})
    (tmp_path / "x.json").write_text("{nope")
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.load(tmp_path / "x.json")


def test_tensor_encoding_is_little_endian():
    import base64
    t = checkpoint.encode_tensor(np.array([1.0]))
    assert base64.b64decode(t["data"]) == b"\x00\x00\x00\x00\x00\x00\xf0\x3f"

"""Differentiable kernels.  Sequences are laid out channels x time."""

from __future__ import annotations

import numpy as np

from .tensor import ShapeMismatch, Tensor


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


sigmoid_array = _sigmoid


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    return Tensor(a.data + b.data, (a, b), lambda g: (g, g))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def scale(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant array (dropout masks)."""
    return Tensor(x.data * mask, (x,), lambda g: (g * mask,))


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; ``rng=None`` (eval mode) is the identity."""
    if rng is None or p <= 0.0:
        return x
    keep = rng.random(x.shape) >= p
    return scale(x, keep / (1.0 - p))


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([p.data for p in parts], axis=axis), parts, backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``w @ x + b`` applied to every time step; x is (C_in, T)."""
    if w.shape[1] != x.shape[0] or b.shape != (w.shape[0],):
        raise ShapeMismatch(f"linear: x{x.shape} w{w.shape} b{b.shape}")
    out = w.data @ x.data + b.data[:, None]

    def backward(g):
        return w.data.T @ g, g @ x.data.T, g.sum(axis=1)

    return Tensor(out, (x, w, b), backward)


def embed(table: Tensor, rows: np.ndarray) -> Tensor:
    """Gather ``table[rows]`` and lay it out as (D, T)."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.min(initial=0) < 0 or rows.max(initial=0) >= table.shape[0]:
        raise ShapeMismatch(f"embedding row out of range for table {table.shape}")

    def backward(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, rows, g.T)
        return (dt,)

    return Tensor(table.data[rows].T, (table,), backward)


def embed_concat(tables: list[Tensor], rows: list[np.ndarray], dense: np.ndarray) -> Tensor:
    """``concat([embed(t, r) for t, r in ...] + [dense])`` as a single node."""
    widths = [t.shape[1] for t in tables]
    for t, r in zip(tables, rows):
        if r.min(initial=0) < 0 or r.max(initial=0) >= t.shape[0]:
            raise ShapeMismatch(f"embedding row out of range for table {t.shape}")
    out = np.concatenate([t.data[r].T for t, r in zip(tables, rows)] + [dense], axis=0)

    def backward(g):
        grads, start = [], 0
        for t, r, w in zip(tables, rows, widths):
            dt = np.zeros_like(t.data)
            np.add.at(dt, r, g[start:start + w].T)
            grads.append(dt)
            start += w
        return grads

    return Tensor(out, tables, backward)


def _shifted_stack(x: np.ndarray, k: int, dilation: int) -> np.ndarray:
    """Rows ``[j*C:(j+1)*C]`` hold x delayed by ``dilation*(k-1-j)`` steps."""
    c, t = x.shape
    stack = np.zeros((k * c, t))
    for j in range(k):
        delay = dilation * (k - 1 - j)
        if delay < t:
            stack[j * c:(j + 1) * c, delay:] = x[:, :t - delay]
    return stack


def causal_conv_array(x: np.ndarray, kernel: np.ndarray, dilation: int) -> np.ndarray:
    """y[:, t] = sum_j kernel[:, :, j] @ x[:, t - dilation*(k-1-j)], zero left-padded."""
    c_out, c_in, k = kernel.shape
    if x.ndim != 2 or x.shape[0] != c_in:
        raise ShapeMismatch(f"conv: x{x.shape} kernel{kernel.shape}")
    if dilation < 1 or k < 1:
        raise ValueError("dilation and kernel size must be >= 1")
    flat = kernel.transpose(0, 2, 1).reshape(c_out, k * c_in)
    return flat @ _shifted_stack(x, k, dilation)


def causal_conv(x: Tensor, kernel: Tensor, bias: Tensor, dilation: int) -> Tensor:
    c_out, c_in, k = kernel.shape
    if bias.shape != (c_out,):
        raise ShapeMismatch(f"conv bias {bias.shape} for {c_out} outputs")
    if x.data.ndim != 2 or x.shape[0] != c_in:
        raise ShapeMismatch(f"conv: x{x.shape} kernel{kernel.shape}")
    t = x.shape[1]
    flat = kernel.data.transpose(0, 2, 1).reshape(c_out, k * c_in)
    stack = _shifted_stack(x.data, k, dilation)
    out = flat @ stack + bias.data[:, None]

    def backward(g):
        dk = (g @ stack.T).reshape(c_out, k, c_in).transpose(0, 2, 1)
        dstack = flat.T @ g
        dx = np.zeros((c_in, t))
        for j in range(k):
            delay = dilation * (k - 1 - j)
            if delay < t:
                dx[:, :t - delay] += dstack[j * c_in:(j + 1) * c_in, delay:]
        return dx, dk, g.sum(axis=1)

    return Tensor(out, (x, kernel, bias), backward)


def layer_norm(x: Tensor, gain: Tensor, offset: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each time step over the channel axis."""
    c = x.shape[0]
    mu = x.data.mean(axis=0, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=0, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gain.data[:, None] + offset.data[:, None]

    def backward(g):
        dxhat = g * gain.data[:, None]
        dx = inv / c * (c * dxhat - dxhat.sum(axis=0, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=0, keepdims=True))
        return dx, (g * xhat).sum(axis=1), g.sum(axis=1)

    return Tensor(out, (x, gain, offset), backward)


# --- recurrent cells -----------------------------------------------------
# LSTM gate rows are stacked [i; f; g; o], GRU rows [r; u; n].

def lstm_step(x_t, h_prev, c_prev, w, u, b):
    """One LSTM step on vectors; returns ``(h_t, c_t)``."""
    hidden = h_prev.shape[0]
    if w.shape[0] != 4 * hidden or u.shape != (4 * hidden, hidden) or w.shape[1] != x_t.shape[0]:
        raise ShapeMismatch("lstm_step: inconsistent dimensions")
    z = w @ x_t + u @ h_prev + b
    i = _sigmoid(z[:hidden])
    f = _sigmoid(z[hidden:2 * hidden])
    g = np.tanh(z[2 * hidden:3 * hidden])
    o = _sigmoid(z[3 * hidden:])
    c_t = f * c_prev + i * g
    return o * np.tanh(c_t), c_t


def gru_step(x_t, h_prev, w, u, b):
    """One GRU step: reset gate r, update gate u, candidate n."""
    hidden = h_prev.shape[0]
    if w.shape[0] != 3 * hidden or u.shape != (3 * hidden, hidden) or w.shape[1] != x_t.shape[0]:
        raise ShapeMismatch("gru_step: inconsistent dimensions")
    zx = w @ x_t + b
    zh = u @ h_prev
    r = _sigmoid(zx[:hidden] + zh[:hidden])
    z = _sigmoid(zx[hidden:2 * hidden] + zh[hidden:2 * hidden])
    n = np.tanh(zx[2 * hidden:] + r * zh[2 * hidden:])
    return (1.0 - z) * n + z * h_prev


def lstm(x: Tensor, w: Tensor, u: Tensor, b: Tensor) -> Tensor:
    """Run an LSTM over (D, T) inputs from zero state; returns hidden states (H, T)."""
    d, t_len = x.shape
    hidden = u.shape[1]
    if w.shape != (4 * hidden, d) or u.shape != (4 * hidden, hidden) or b.shape != (4 * hidden,):
        raise ShapeMismatch("lstm: inconsistent dimensions")
    xproj = w.data @ x.data + b.data[:, None]
    hs = np.zeros((hidden, t_len + 1))
    cs = np.zeros((hidden, t_len + 1))
    gates = np.empty((4 * hidden, t_len))
    for t in range(t_len):
        z = xproj[:, t] + u.data @ hs[:, t]
        i = _sigmoid(z[:hidden])
        f = _sigmoid(z[hidden:2 * hidden])
        g = np.tanh(z[2 * hidden:3 * hidden])
        o = _sigmoid(z[3 * hidden:])
        cs[:, t + 1] = f * cs[:, t] + i * g
        hs[:, t + 1] = o * np.tanh(cs[:, t + 1])
        gates[:, t] = np.concatenate([i, f, g, o])

    def backward(gh):
        dz = np.empty((4 * hidden, t_len))
        dh_next = np.zeros(hidden)
        dc_next = np.zeros(hidden)
        for t in range(t_len - 1, -1, -1):
            i, f, g, o = np.split(gates[:, t], 4)
            tc = np.tanh(cs[:, t + 1])
            dh = gh[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz[:hidden, t] = dc * g * i * (1.0 - i)
            dz[hidden:2 * hidden, t] = dc * cs[:, t] * f * (1.0 - f)
            dz[2 * hidden:3 * hidden, t] = dc * i * (1.0 - g * g)
            dz[3 * hidden:, t] = dh * tc * o * (1.0 - o)
            dh_next = u.data.T @ dz[:, t]
            dc_next = dc * f
        return w.data.T @ dz, dz @ x.data.T, dz @ hs[:, :-1].T, dz.sum(axis=1)

    return Tensor(hs[:, 1:].copy(), (x, w, u, b), backward)


def gru(x: Tensor, w: Tensor, u: Tensor, b: Tensor) -> Tensor:
    """Run a GRU over (D, T) inputs from zero state; returns hidden states (H, T)."""
    d, t_len = x.shape
    hidden = u.shape[1]
    if w.shape != (3 * hidden, d) or u.shape != (3 * hidden, hidden) or b.shape != (3 * hidden,):
        raise ShapeMismatch("gru: inconsistent dimensions")
    xproj = w.data @ x.data + b.data[:, None]
    hs = np.zeros((hidden, t_len + 1))
    cache = np.empty((4 * hidden, t_len))  # r, u, n, U_n h
    for t in range(t_len):
        zh = u.data @ hs[:, t]
        r = _sigmoid(xproj[:hidden, t] + zh[:hidden])
        z = _sigmoid(xproj[hidden:2 * hidden, t] + zh[hidden:2 * hidden])
        n = np.tanh(xproj[2 * hidden:, t] + r * zh[2 * hidden:])
        hs[:, t + 1] = (1.0 - z) * n + z * hs[:, t]
        cache[:, t] = np.concatenate([r, z, n, zh[2 * hidden:]])

    def backward(gh):
        dzx = np.empty((3 * hidden, t_len))
        dzh = np.empty((3 * hidden, t_len))
        dh_next = np.zeros(hidden)
        for t in range(t_len - 1, -1, -1):
            r, z, n, qn = np.split(cache[:, t], 4)
            h_prev = hs[:, t]
            dh = gh[:, t] + dh_next
            dn = dh * (1.0 - z) * (1.0 - n * n)
            dzu = dh * (h_prev - n) * z * (1.0 - z)
            dzr = dn * qn * r * (1.0 - r)
            dzx[:, t] = np.concatenate([dzr, dzu, dn])
            dzh[:, t] = np.concatenate([dzr, dzu, dn * r])
            dh_next = dh * z + u.data.T @ dzh[:, t]
        return w.data.T @ dzx, dzx @ x.data.T, dzh @ hs[:, :-1].T, dzx.sum(axis=1)

    return Tensor(hs[:, 1:].copy(), (x, w, u, b), backward)


def log_softmax_array(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def softmax_array(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax_array(logits))


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean over time steps of ``-log softmax(logits)[target]``; logits (C, T)."""
    targets = np.asarray(targets, dtype=np.int64)
    c, t_len = logits.shape
    if targets.shape != (t_len,):
        raise ShapeMismatch(f"targets {targets.shape} for logits {logits.shape}")
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= c:
        raise ShapeMismatch("target class out of range")
    logp = log_softmax_array(logits.data)
    cols = np.arange(t_len)
    loss = -logp[targets, cols].mean()

    def backward(g):
        grad = np.exp(logp)
        grad[targets, cols] -= 1.0
        return (grad * (g / t_len),)

    return Tensor(loss, (logits,), backward)

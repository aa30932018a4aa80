"""Differentiable layers with explicit forward/backward passes.

Everything is float64 numpy.  Each layer caches what its backward pass
needs, writes parameter gradients into ``self.grads`` (same keys as
``self.params``), and returns the gradient with respect to its input so
layers can be chained.  Batches are leading dimensions throughout.
"""
from __future__ import annotations

import numpy as np


def _sigmoid(x):
    # Piecewise form avoids overflow warnings for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Layer:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    """y = x @ W.T + b with W of shape (n_out, n_in)."""

    def __init__(self, n_in: int, n_out: int):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params = {"W": np.zeros((n_out, n_in)), "b": np.zeros(n_out)}
        self._x = None

    def forward(self, x):
        if x.shape[-1] != self.n_in:
            raise ValueError(f"expected input width {self.n_in}, got {x.shape[-1]}")
        self._x = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, dout):
        self.grads = {"W": dout.T @ self._x, "b": dout.sum(axis=0)}
        return dout @ self.params["W"]


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class Conv1D(Layer):
    """Valid cross-correlation along time, kernel width 2, stride 1.

    Input (B, T, C_in) -> output (B, T-1, C_out); kernels are stored as
    (C_out, 2, C_in).
    """

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.c_in, self.c_out = c_in, c_out
        self.params = {"K": np.zeros((c_out, 2, c_in)), "b": np.zeros(c_out)}

    def _kernel_matrix(self):
        # (2*C_in, C_out) with window position varying slowest.
        return self.params["K"].transpose(1, 2, 0).reshape(2 * self.c_in, self.c_out)

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.c_in or x.shape[1] < 2:
            raise ValueError(f"expected (B, T>=2, {self.c_in}), got {x.shape}")
        self._windows = np.concatenate([x[:, :-1, :], x[:, 1:, :]], axis=2)
        return self._windows @ self._kernel_matrix() + self.params["b"]

    def backward(self, dout):
        b, tm1, _ = dout.shape
        flat_w = self._windows.reshape(-1, 2 * self.c_in)
        flat_d = dout.reshape(-1, self.c_out)
        dK = (flat_w.T @ flat_d).reshape(2, self.c_in, self.c_out).transpose(2, 0, 1)
        self.grads = {"K": dK, "b": dout.sum(axis=(0, 1))}
        dwin = dout @ self._kernel_matrix().T
        dx = np.zeros((b, tm1 + 1, self.c_in))
        dx[:, :-1, :] += dwin[:, :, :self.c_in]
        dx[:, 1:, :] += dwin[:, :, self.c_in:]
        return dx


class LSTM(Layer):
    """Unrolled LSTM returning the last hidden state.

    Gates are packed [i, f, g, o] in Wx (D, 4H), Wh (H, 4H), b (4H,):
    i, f, o sigmoid, g tanh, c' = f*c + i*g, h' = o*tanh(c').  backward()
    runs full backpropagation through time from the last-state gradient.
    """

    def __init__(self, n_in: int, hidden: int):
        super().__init__()
        self.n_in, self.hidden = n_in, hidden
        self.params = {"Wx": np.zeros((n_in, 4 * hidden)),
                       "Wh": np.zeros((hidden, 4 * hidden)),
                       "b": np.zeros(4 * hidden)}

    def _gates(self, z):
        H = self.hidden
        return (_sigmoid(z[:, :H]), _sigmoid(z[:, H:2 * H]),
                np.tanh(z[:, 2 * H:3 * H]), _sigmoid(z[:, 3 * H:]))

    def step(self, x_t: np.ndarray, h: np.ndarray,
             c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One cell update (h', c') without caching; batch rows."""
        i, f, g, o = self._gates(
            x_t @ self.params["Wx"] + h @ self.params["Wh"] + self.params["b"])
        c_new = f * c + i * g
        return o * np.tanh(c_new), c_new

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ValueError(f"expected (B, T, {self.n_in}), got {x.shape}")
        B, T, _ = x.shape
        H = self.hidden
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        self._x = x
        self._cache = []
        xz = x @ self.params["Wx"] + self.params["b"]   # input part, all steps
        for t in range(T):
            i, f, g, o = self._gates(xz[:, t, :] + h @ self.params["Wh"])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            self._cache.append((h, c, i, f, g, o, tc))
            h = o * tc
            c = c_new
        return h

    def backward(self, dout):
        B, T, _ = self._x.shape
        H = self.hidden
        Wx, Wh = self.params["Wx"], self.params["Wh"]
        dWx = np.zeros_like(Wx)
        dWh = np.zeros_like(Wh)
        db = np.zeros(4 * H)
        dx = np.empty_like(self._x)
        dh = dout
        dc = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            h_prev, c_prev, i, f, g, o, tc = self._cache[t]
            dc = dc + dh * o * (1.0 - tc * tc)
            dz = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                dh * tc * o * (1.0 - o),
            ], axis=1)
            x_t = self._x[:, t, :]
            dWx += x_t.T @ dz
            dWh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t, :] = dz @ Wx.T
            dh = dz @ Wh.T
            dc = dc * f
        self.grads = {"Wx": dWx, "Wh": dWh, "b": db}
        return dx


class GRU(Layer):
    """Unrolled GRU returning the last hidden state.

    Update/reset gates are packed [z, r] in Wxzr (D, 2H), Uzr (H, 2H),
    bzr (2H,); the candidate uses Wxn (D, H), Un (H, H), bn (H,) as
    n = tanh(x Wxn + (r*h) Un + bn) and h' = (1-z)*h + z*n.
    """

    def __init__(self, n_in: int, hidden: int):
        super().__init__()
        self.n_in, self.hidden = n_in, hidden
        self.params = {"Wxzr": np.zeros((n_in, 2 * hidden)),
                       "Uzr": np.zeros((hidden, 2 * hidden)),
                       "bzr": np.zeros(2 * hidden),
                       "Wxn": np.zeros((n_in, hidden)),
                       "Un": np.zeros((hidden, hidden)),
                       "bn": np.zeros(hidden)}

    def step(self, x_t: np.ndarray, h: np.ndarray) -> np.ndarray:
        """One cell update h' without caching; batch rows."""
        p = self.params
        zr = _sigmoid(x_t @ p["Wxzr"] + h @ p["Uzr"] + p["bzr"])
        z, r = zr[:, :self.hidden], zr[:, self.hidden:]
        n = np.tanh(x_t @ p["Wxn"] + (r * h) @ p["Un"] + p["bn"])
        return (1.0 - z) * h + z * n

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ValueError(f"expected (B, T, {self.n_in}), got {x.shape}")
        B, T, _ = x.shape
        H = self.hidden
        p = self.params
        h = np.zeros((B, H))
        self._x = x
        self._cache = []
        xzr = x @ p["Wxzr"] + p["bzr"]
        xn = x @ p["Wxn"] + p["bn"]
        for t in range(T):
            zr = _sigmoid(xzr[:, t, :] + h @ p["Uzr"])
            z, r = zr[:, :H], zr[:, H:]
            rh = r * h
            n = np.tanh(xn[:, t, :] + rh @ p["Un"])
            self._cache.append((h, z, r, rh, n))
            h = (1.0 - z) * h + z * n
        return h

    def backward(self, dout):
        B, T, _ = self._x.shape
        H = self.hidden
        p = self.params
        g = {k: np.zeros_like(v) for k, v in p.items()}
        dx = np.empty_like(self._x)
        dh = dout
        for t in range(T - 1, -1, -1):
            h_prev, z, r, rh, n = self._cache[t]
            dz = dh * (n - h_prev)
            dn = dh * z
            dh_prev = dh * (1.0 - z)
            dn_pre = dn * (1.0 - n * n)
            x_t = self._x[:, t, :]
            g["Wxn"] += x_t.T @ dn_pre
            g["Un"] += rh.T @ dn_pre
            g["bn"] += dn_pre.sum(axis=0)
            drh = dn_pre @ p["Un"].T
            dr = drh * h_prev
            dh_prev = dh_prev + drh * r
            dzr_pre = np.concatenate([dz * z * (1.0 - z),
                                      dr * r * (1.0 - r)], axis=1)
            g["Wxzr"] += x_t.T @ dzr_pre
            g["Uzr"] += h_prev.T @ dzr_pre
            g["bzr"] += dzr_pre.sum(axis=0)
            dx[:, t, :] = dzr_pre @ p["Wxzr"].T + dn_pre @ p["Wxn"].T
            dh = dh_prev + dzr_pre @ p["Uzr"].T
        self.grads = g
        return dx


def softmax_cross_entropy(logits: np.ndarray,
                          labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient on the logits.

    Stabilized by max subtraction; the gradient is (softmax - onehot) / B,
    so its rows sum to zero.
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    B = len(labels)
    rows = np.arange(B)
    loss = float(-np.mean(shifted[rows, labels]
                          - np.log(exp.sum(axis=1))))
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return loss, grad / B

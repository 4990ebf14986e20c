"""Plain numpy LSTM forward, written against the checkpoint format only."""

from __future__ import annotations

import numpy as np

from .formats import read_checkpoint


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward(tensors: dict, inputs: np.ndarray) -> dict:
    """Runs the network over inputs of shape (input_dim, T).

    Gate rows are stacked as input, forget, candidate, output. Returned
    hidden/cell arrays have T + 1 columns, column 0 being the learned initial state.
    """
    w_in = tensors["w_input"]
    w_rec = tensors["w_recurrent"]
    bias = tensors["bias"].reshape(-1)
    w_pi = tensors["w_policy"]
    b_pi = tensors["b_policy"].reshape(-1)
    w_v = tensors["w_value"].reshape(-1)
    b_v = float(np.asarray(tensors["b_value"]).reshape(-1)[0])
    h = tensors["h0"].reshape(-1).copy()
    c = tensors["c0"].reshape(-1).copy()
    H = h.size
    T = inputs.shape[1]

    hidden = np.zeros((H, T + 1))
    cell = np.zeros((H, T + 1))
    logits = np.zeros((w_pi.shape[0], T))
    values = np.zeros(T)
    hidden[:, 0], cell[:, 0] = h, c
    for t in range(T):
        z = w_in @ inputs[:, t] + w_rec @ h + bias
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = _sigmoid(z[3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        hidden[:, t + 1], cell[:, t + 1] = h, c
        logits[:, t] = w_pi @ h + b_pi
        values[t] = w_v @ h + b_v
    return {"hidden": hidden, "cell": cell, "logits": logits, "values": values}


def forward_from_checkpoint(path, inputs: np.ndarray) -> dict:
    return lstm_forward(read_checkpoint(path)["tensors"], inputs)

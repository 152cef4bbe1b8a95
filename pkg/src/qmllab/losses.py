"""Scalar losses used by the classifiers and the forward-forward layers."""

from __future__ import annotations

import numpy as np

from .errors import InputError


def softplus(z):
    """ln(1 + e^z) without overflow."""
    return np.logaddexp(0.0, z)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-np.logaddexp(0.0, -z))


def softmax(logits):
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, label):
    """Loss and d(loss)/d(logits) for one sample or a batch.

    For a batch ``(B, C)`` with labels ``(B,)`` the loss is the batch mean and
    the gradient rows are already divided by ``B``.
    """
    logits = np.asarray(logits, dtype=float)
    label_arr = np.asarray(label)
    n_cls = logits.shape[-1]
    if np.any(label_arr < 0) or np.any(label_arr >= n_cls):
        raise InputError(f"label {label} outside 0..{n_cls - 1}")
    single = logits.ndim == 1
    lg = np.atleast_2d(logits)
    lab = np.atleast_1d(label_arr).astype(np.int64)
    shifted = lg - lg.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(lg.shape[0])
    losses = log_z - shifted[rows, lab]
    grad = np.exp(shifted - log_z[:, None])
    grad[rows, lab] -= 1.0
    if single:
        return float(losses[0]), grad[0]
    return float(losses.mean()), grad / lg.shape[0]


def ff_loss(g_pos, g_neg, threshold):
    """Forward-forward logistic loss: softplus(thr - g_pos) + softplus(g_neg - thr)."""
    return softplus(threshold - np.asarray(g_pos, dtype=float)) + softplus(np.asarray(g_neg, dtype=float) - threshold)

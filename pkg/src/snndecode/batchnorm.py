"""Threshold-scaled batch normalization over joint batch and time statistics.

Input currents of every layer are normalized per channel before membrane
integration.  During training the statistics pool the batch and time axes
together, and the normalized value is rescaled by the firing threshold so
that a unit-gain channel has standard deviation equal to the threshold:

    out = threshold * gamma * (x - mean) / sqrt(var + eps) + beta

That scaling keeps layer firing rates in a workable range and is what
makes deep spike-driven stacks trainable.  At inference time the running
(exponential-moving-average) statistics are used instead, which makes the
transform a fixed per-channel affine map, applicable one frame at a time.

Variances are population (biased) moments throughout, including the
running ones.
"""

from __future__ import annotations

import numpy as np

TRAIN = "train"
EVAL = "eval"


def batch_stats(currents: np.ndarray):
    """Per-channel mean and population variance over every leading axis.

    ``currents`` has shape ``(..., channels)``; all axes except the last
    are pooled, so a ``(batch, time, channels)`` tensor is reduced over
    batch and time jointly.
    """
    currents = np.asarray(currents)
    pop = int(np.prod(currents.shape[:-1]))
    if pop < 1:
        raise ValueError("normalization population is empty")
    flat = currents.reshape(pop, currents.shape[-1])
    mean = flat.mean(axis=0)
    var = flat.var(axis=0)
    return mean, var


def normalize(currents, mean, var, gamma, beta, threshold, eps):
    """Apply the threshold-scaled affine normalization with given statistics.

    Returns ``(out, xhat, inv_std)`` where ``xhat`` is the standardized
    input, kept because the backward pass needs it.
    """
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (currents - mean) * inv_std
    out = threshold * gamma * xhat + beta
    return out, xhat, inv_std


def tdbn_apply(currents, gamma, beta, run_mean, run_var, threshold, mode,
               eps=1e-5, momentum=0.1):
    """Normalize a current tensor in either training or inference mode.

    Training mode computes fresh statistics over the pooled leading axes
    (requiring a population of at least 2) and also returns running
    statistics advanced by one exponential-moving-average step; the caller
    decides whether to keep them.  Inference mode applies the stored
    running statistics and returns them unchanged.

    Returns
    -------
    (ndarray, ndarray, ndarray)
        ``(normalized, new_run_mean, new_run_var)``.
    """
    currents = np.asarray(currents)
    if mode == TRAIN:
        pop = int(np.prod(currents.shape[:-1]))
        if pop < 2:
            raise ValueError(
                f"training-mode normalization needs a batch*time population "
                f"of at least 2 per channel, got {pop}"
            )
        mean, var = batch_stats(currents)
        out, _, _ = normalize(currents, mean, var, gamma, beta, threshold, eps)
        new_mean = (1.0 - momentum) * run_mean + momentum * mean
        new_var = (1.0 - momentum) * run_var + momentum * var
        return out, new_mean.astype(run_mean.dtype), new_var.astype(run_var.dtype)
    if mode == EVAL:
        out, _, _ = normalize(currents, run_mean, run_var, gamma, beta,
                              threshold, eps)
        return out, run_mean, run_var
    raise ValueError(f"unknown normalization mode {mode!r}")


def tdbn_backward(grad_out, xhat, inv_std, gamma, threshold):
    """Backward pass through training-mode normalization.

    ``grad_out`` and ``xhat`` have shape ``(..., channels)`` with the same
    pooled population the forward pass used.  Returns the gradient with
    respect to the raw currents plus the per-channel gamma and beta
    gradients.
    """
    pop = int(np.prod(grad_out.shape[:-1]))
    axes = tuple(range(grad_out.ndim - 1))
    grad_beta = grad_out.sum(axis=axes)
    grad_gamma = threshold * (grad_out * xhat).sum(axis=axes)
    # standard batch-norm backward on xhat, with the extra threshold*gamma
    # factor folded into the upstream gradient
    g = grad_out * (threshold * gamma)
    g_sum = g.sum(axis=axes)
    gx_sum = (g * xhat).sum(axis=axes)
    grad_in = (inv_std / pop) * (pop * g - g_sum - xhat * gx_sum)
    return grad_in, grad_gamma, grad_beta

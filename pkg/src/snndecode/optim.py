"""AdamW with decoupled weight decay, plus the decay-factor clamp.

Weight decay touches only the weight matrices: the per-neuron decay
factors and the normalizer's affine parameters are excluded, and decay
factors are clamped back into [0, 1] after every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backprop import Gradients
from .network import NetworkParams

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8

_FIELDS = ("weight", "tau", "gamma", "beta")


@dataclass
class AdamWState:
    """First/second moment accumulators and the shared step counter."""

    step: int
    m: list        # one dict per layer: field name -> accumulator array
    v: list

    def copy(self) -> "AdamWState":
        return AdamWState(
            step=self.step,
            m=[{k: a.copy() for k, a in layer.items()} for layer in self.m],
            v=[{k: a.copy() for k, a in layer.items()} for layer in self.v],
        )


def _param_arrays(layer):
    return {
        "weight": layer.weight,
        "tau": layer.tau,
        "gamma": layer.norm.gamma,
        "beta": layer.norm.beta,
    }


def adamw_init(params: NetworkParams) -> AdamWState:
    """Zeroed optimizer state matching the parameter shapes."""
    m, v = [], []
    for layer in params.layers:
        arrays = _param_arrays(layer)
        m.append({k: np.zeros_like(a) for k, a in arrays.items()})
        v.append({k: np.zeros_like(a) for k, a in arrays.items()})
    return AdamWState(step=0, m=m, v=v)


def clamp_tau(params: NetworkParams) -> NetworkParams:
    """Clip every decay factor into [0, 1]; returns a copy."""
    out = params.copy()
    for layer in out.layers:
        np.clip(layer.tau, 0.0, 1.0, out=layer.tau)
    return out


def adamw_step(params: NetworkParams, grads: Gradients, state: AdamWState,
               *, learning_rate: float, weight_decay: float,
               beta1: float = BETA1, beta2: float = BETA2,
               eps: float = EPS):
    """One optimizer step; returns ``(new_params, new_state)``.

    Decoupled decay multiplies weights by ``1 - lr * weight_decay``
    independently of the gradient; decay factors are clamped to [0, 1]
    afterwards.  Inputs are left untouched.
    """
    new_params = params.copy()
    new_state = state.copy()
    new_state.step += 1
    t = new_state.step
    bias1 = 1.0 - beta1 ** t
    bias2 = 1.0 - beta2 ** t

    for layer, grad, m, v in zip(new_params.layers, grads.layers,
                                 new_state.m, new_state.v):
        arrays = _param_arrays(layer)
        grad_arrays = {
            "weight": grad.weight,
            "tau": grad.tau,
            "gamma": grad.gamma,
            "beta": grad.beta,
        }
        for name in _FIELDS:
            p = arrays[name]
            g = np.asarray(grad_arrays[name], dtype=p.dtype)
            if name == "weight" and weight_decay:
                p *= 1.0 - learning_rate * weight_decay
            m[name] = beta1 * m[name] + (1.0 - beta1) * g
            v[name] = beta2 * v[name] + (1.0 - beta2) * (g * g)
            m_hat = m[name] / bias1
            v_hat = v[name] / bias2
            p -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        np.clip(layer.tau, 0.0, 1.0, out=layer.tau)

    return new_params, new_state

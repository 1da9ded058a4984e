"""AdamW with decoupled weight decay.

The decay shrinks the parameter directly (before the moment update), so it
never leaks into the running gradient statistics — that decoupling is the
whole point of the W in the name.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class AdamWState:
    """Optimizer state for one parameter tensor."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise ValueError(f"m shape {self.m.shape} != v shape {self.v.shape}")
        if self.t < 0:
            raise ValueError("step count must be non-negative")
        if np.any(self.v < 0.0):
            raise ValueError("second moment must be entrywise non-negative")

    @classmethod
    def fresh(cls, param: np.ndarray, lr: float = 1e-5, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.01) -> "AdamWState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param), t=0,
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                   weight_decay=weight_decay)


def adamw_step(param: np.ndarray, grad: np.ndarray, state: AdamWState
               ) -> tuple[np.ndarray, AdamWState]:
    """One update; returns the new parameter and advanced state."""
    if param.shape != grad.shape:
        raise ValueError(f"param shape {param.shape} != grad shape {grad.shape}")
    if param.shape != state.m.shape:
        raise ValueError(f"state shaped {state.m.shape} for param {param.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    t = state.t + 1
    out = param * (1.0 - state.lr * state.weight_decay)
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    out = out - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out, replace(state, m=m, v=v, t=t)


class AdamW:
    """Convenience wrapper keeping one AdamWState per named parameter."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.states = {
            name: AdamWState.fresh(p, lr=lr, beta1=beta1, beta2=beta2,
                                   eps=eps, weight_decay=weight_decay)
            for name, p in params.items()
        }

    def step(self, params: dict[str, np.ndarray],
             grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Update every parameter that received a gradient; returns new dict."""
        out = dict(params)
        for name, grad in grads.items():
            if name not in params:
                raise KeyError(f"gradient for unknown parameter {name!r}")
            out[name], self.states[name] = adamw_step(
                params[name], grad, self.states[name])
        return out

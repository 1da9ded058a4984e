"""Central finite-difference verification of analytic gradients.

`loss_fn(params)` must return `(loss, grads)` where grads mirrors the params
dict.  The checker perturbs coordinates one at a time and compares the
two-sided difference quotient against the analytic entry, reporting the worst
relative error |a - n| / (|a| + |n| + 1e-12).

For large models, `samples_per_param` caps how many coordinates of each tensor
are probed (chosen by a seeded generator), which keeps full-model checks
affordable without losing the cross-section property.
"""

from __future__ import annotations

import numpy as np


def grad_check(loss_fn, params: dict[str, np.ndarray], eps: float = 1e-5,
               samples_per_param: int | None = None, seed: int = 0) -> float:
    """Maximum relative error between analytic and numerical gradients."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    _, grads = loss_fn(params)
    missing = set(params) - set(grads)
    if missing:
        raise ValueError(f"loss_fn returned no gradient for {sorted(missing)}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        analytic = grads[name]
        if analytic.shape != p.shape:
            raise ValueError(
                f"gradient for {name!r} has shape {analytic.shape}, "
                f"param has {p.shape}")
        n_coords = p.size
        if samples_per_param is not None and samples_per_param < n_coords:
            coords = rng.choice(n_coords, size=samples_per_param, replace=False)
        else:
            coords = np.arange(n_coords)
        for idx in coords:
            multi = np.unravel_index(idx, p.shape)
            original = p[multi]
            p[multi] = original + eps
            hi, _ = loss_fn(params)
            p[multi] = original - eps
            lo, _ = loss_fn(params)
            p[multi] = original
            numeric = (hi - lo) / (2.0 * eps)
            a = float(analytic[multi])
            err = abs(a - numeric) / (abs(a) + abs(numeric) + 1e-12)
            worst = max(worst, err)
    return worst

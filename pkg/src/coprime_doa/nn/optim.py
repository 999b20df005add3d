"""RMSProp parameter updates (functional, bit-reproducible)."""

import numpy as np

from ..errors import ShapeMismatch


def rmsprop_step(params, grads, state, lr, decay=0.9, eps=1e-8):
    """One RMSProp step over dicts of named arrays.

    cache <- decay * cache + (1 - decay) * g^2
    p     <- p - lr * g / (sqrt(cache) + eps)

    ``state`` maps names to caches (missing entries start at zero).
    Returns new (params, state) dicts; inputs are not mutated.
    """
    if lr < 0.0:
        raise ValueError("learning rate must be non-negative")
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must lie in (0, 1)")
    new_params = {}
    new_state = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")
        cache = state.get(name)
        if cache is None:
            cache = np.zeros_like(p)
        elif cache.shape != p.shape:
            raise ShapeMismatch(f"{name}: state {cache.shape} vs param {p.shape}")
        cache = decay * cache + (1.0 - decay) * g * g
        new_params[name] = p - lr * g / (np.sqrt(cache) + eps)
        new_state[name] = cache
    return new_params, new_state

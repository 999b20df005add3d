"""Losses: per-bin Bernoulli NLL, Gaussian KL, and the weighted ELBO."""

import numpy as np

from ..errors import LengthMismatch, NegativeKL, NonPositiveScale

PROB_CLAMP = 1e-7


def bernoulli_nll(probs, labels):
    """Multi-label binary cross-entropy, summed over the last axis.

    Probabilities are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] before the
    logs.  Returns a scalar for one prediction, a vector for a batch.
    """
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise LengthMismatch(
            f"probs {probs.shape} vs labels {labels.shape}")
    if np.any((labels != 0.0) & (labels != 1.0)):
        raise ValueError("labels must be 0/1")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    nll = -(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)).sum(axis=-1)
    return float(nll) if nll.ndim == 0 else nll


def bernoulli_nll_grad(probs, labels):
    """d(nll)/d(probs); zero where the clamp is active."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise LengthMismatch(
            f"probs {probs.shape} vs labels {labels.shape}")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    inside = (probs >= PROB_CLAMP) & (probs <= 1.0 - PROB_CLAMP)
    return inside * (p - labels) / (p * (1.0 - p))


def gaussian_kl(mean, scale, prior_scale):
    """KL(N(mean, scale^2) || N(0, prior_scale^2)), summed elementwise.

    Closed form per element:
        ln(prior/scale) + (scale^2 + mean^2) / (2 prior^2) - 1/2
    """
    mean = np.asarray(mean, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0.0) or prior_scale <= 0.0:
        raise NonPositiveScale("scales must be strictly positive")
    pvar = prior_scale ** 2
    terms = (np.log(prior_scale / scale)
             + (scale ** 2 + mean ** 2) / (2.0 * pvar) - 0.5)
    return float(np.sum(terms))


def elbo_loss(nll, kl_total, kl_weight):
    """Training objective: nll + kl_weight * kl_total."""
    if kl_weight <= 0.0:
        raise ValueError("kl weight must be positive")
    if kl_total < 0.0:
        raise NegativeKL(f"kl total {kl_total} < 0")
    return float(nll) + kl_weight * float(kl_total)

"""Network layers with exact reverse-mode gradients.

Deterministic layers: Conv1D, BatchNorm, AveragePooling1D, Flatten,
Dropout, Dense.  Variational counterparts (Conv1DReparam,
DenseVariational) keep a factorized Gaussian over every weight and
sample through the reparameterization trick, so gradients flow to the
posterior mean and raw scale.

Conventions: activations propagate as float64 arrays shaped
(batch, length, channels) until Flatten, then (batch, features).
Each layer caches its forward intermediates; backward() consumes the
cache and fills ``self.grads``.
"""

import numpy as np

from ..errors import ShapeMismatch, StaleCache


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(x):
    return np.logaddexp(0.0, np.asarray(x, dtype=float))


def inv_softplus(y):
    """Inverse of softplus for y > 0: log(exp(y) - 1)."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("inv_softplus requires positive input")
    return y + np.log1p(-np.exp(-y))


def reparameterize(mean, raw_scale, epsilon=None, seed=None):
    """Sample w = mean + softplus(raw_scale) * epsilon.

    ``epsilon`` defaults to a standard-normal draw seeded by ``seed``.
    """
    mean = np.asarray(mean, dtype=float)
    raw_scale = np.asarray(raw_scale, dtype=float)
    if mean.shape != raw_scale.shape:
        raise ShapeMismatch("mean and raw_scale shapes differ")
    if epsilon is None:
        epsilon = np.random.default_rng(seed).standard_normal(mean.shape)
    else:
        epsilon = np.asarray(epsilon, dtype=float)
        if epsilon.shape != mean.shape:
            raise ShapeMismatch("epsilon shape differs from mean")
    return mean + softplus(raw_scale) * epsilon


_ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")


def _activate(name, z):
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _activate_grad(name, z, y, grad):
    if name == "linear":
        return grad
    if name == "relu":
        return grad * (z > 0.0)
    if name == "sigmoid":
        return grad * y * (1.0 - y)
    if name == "tanh":
        return grad * (1.0 - y * y)
    raise ValueError(f"unknown activation {name!r}")


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


RAW_SCALE_INIT = -5.0  # softplus(-5) ~ 6.7e-3: near-deterministic start


class Layer:
    """Base layer: parameter dicts plus a one-shot forward cache."""

    kind = "layer"

    def __init__(self):
        self.params = {}
        self.non_trainable = {}
        self.grads = {}
        self._cache = None

    def forward(self, x, train=False, sample=False, rng=None):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def kl(self):
        return 0.0

    def kl_grads(self):
        return {}

    @property
    def is_variational(self):
        return False

    def _take_cache(self):
        if self._cache is None:
            raise StaleCache(f"{self.kind}: backward without matching forward")
        cache, self._cache = self._cache, None
        return cache


def _conv1d_core(x, w, stride):
    """Valid 1-D convolution; returns (pre-activation, window view)."""
    if x.ndim != 3:
        raise ShapeMismatch(f"conv1d expects (batch, length, channels), got {x.shape}")
    k, c_in, _ = w.shape
    if x.shape[2] != c_in:
        raise ShapeMismatch(f"conv1d expects {c_in} channels, got {x.shape[2]}")
    if x.shape[1] < k:
        raise ShapeMismatch("input shorter than kernel")
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)[:, ::stride]
    z = np.einsum("btck,kcf->btf", windows, w)
    return z, windows


def _conv1d_backward_core(grad_z, windows, w, x_shape, stride):
    k = w.shape[0]
    t_out = grad_z.shape[1]
    grad_w = np.einsum("btck,btf->kcf", windows, grad_z)
    grad_b = grad_z.sum(axis=(0, 1))
    grad_x = np.zeros(x_shape)
    for i in range(k):
        grad_x[:, i:i + stride * t_out:stride, :] += np.einsum(
            "btf,cf->btc", grad_z, w[i])
    return grad_x, grad_w, grad_b


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, in_channels, filters, kernel_size, stride=1,
                 activation="linear", rng=None):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.stride = stride
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        fan_in = kernel_size * in_channels
        fan_out = kernel_size * filters
        self.params = {
            "weight": _glorot(rng, (kernel_size, in_channels, filters),
                              fan_in, fan_out),
            "bias": np.zeros(filters),
        }

    def forward(self, x, train=False, sample=False, rng=None):
        z, windows = _conv1d_core(x, self.params["weight"], self.stride)
        z = z + self.params["bias"]
        y = _activate(self.activation, z)
        self._cache = (x.shape, windows, z, y)
        return y

    def backward(self, grad_out):
        x_shape, windows, z, y = self._take_cache()
        grad_z = _activate_grad(self.activation, z, y, grad_out)
        grad_x, grad_w, grad_b = _conv1d_backward_core(
            grad_z, windows, self.params["weight"], x_shape, self.stride)
        self.grads = {"weight": grad_w, "bias": grad_b}
        return grad_x


class BatchNorm(Layer):
    """Per-channel normalization over batch (and length, if present)."""

    kind = "batchnorm"

    def __init__(self, channels, momentum=0.99, eps=1e-3):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params = {"gamma": np.ones(channels), "beta": np.zeros(channels)}
        self.non_trainable = {
            "running_mean": np.zeros(channels),
            "running_var": np.ones(channels),
        }

    def forward(self, x, train=False, sample=False, rng=None):
        if x.shape[-1] != self.channels:
            raise ShapeMismatch(
                f"batchnorm expects {self.channels} channels, got {x.shape[-1]}")
        axes = tuple(range(x.ndim - 1))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.non_trainable["running_mean"] = (
                m * self.non_trainable["running_mean"] + (1.0 - m) * mean)
            self.non_trainable["running_var"] = (
                m * self.non_trainable["running_var"] + (1.0 - m) * var)
        else:
            mean = self.non_trainable["running_mean"]
            var = self.non_trainable["running_var"]
        ivar = 1.0 / np.sqrt(var + self.eps)
        xc = x - mean
        xhat = xc * ivar
        y = self.params["gamma"] * xhat + self.params["beta"]
        self._cache = (train, xc, ivar, xhat, axes,
                       int(np.prod([x.shape[a] for a in axes])))
        return y

    def backward(self, grad_out):
        train, xc, ivar, xhat, axes, n = self._take_cache()
        gamma = self.params["gamma"]
        self.grads = {
            "gamma": (grad_out * xhat).sum(axis=axes),
            "beta": grad_out.sum(axis=axes),
        }
        grad_xhat = grad_out * gamma
        if not train:
            return grad_xhat * ivar
        grad_var = (grad_xhat * xc).sum(axis=axes) * (-0.5) * ivar ** 3
        grad_mean = (-(grad_xhat.sum(axis=axes)) * ivar
                     + grad_var * (-2.0 / n) * xc.sum(axis=axes))
        return grad_xhat * ivar + grad_var * 2.0 * xc / n + grad_mean / n


class AveragePooling1D(Layer):
    kind = "avgpool1d"

    def __init__(self, pool_size, stride=None):
        super().__init__()
        self.pool_size = pool_size
        self.stride = stride if stride is not None else pool_size

    def forward(self, x, train=False, sample=False, rng=None):
        if x.ndim != 3:
            raise ShapeMismatch("avgpool1d expects (batch, length, channels)")
        if x.shape[1] < self.pool_size:
            raise ShapeMismatch("input shorter than pool window")
        windows = np.lib.stride_tricks.sliding_window_view(
            x, self.pool_size, axis=1)[:, ::self.stride]
        y = windows.mean(axis=-1)
        self._cache = (x.shape, y.shape[1])
        return y

    def backward(self, grad_out):
        x_shape, t_out = self._take_cache()
        grad_x = np.zeros(x_shape)
        share = grad_out / self.pool_size
        for i in range(self.pool_size):
            grad_x[:, i:i + self.stride * t_out:self.stride, :] += share
        self.grads = {}
        return grad_x


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, train=False, sample=False, rng=None):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        self.grads = {}
        return grad_out.reshape(self._take_cache())


class Dropout(Layer):
    """Inverted dropout; identity outside training."""

    kind = "dropout"

    def __init__(self, drop_rate):
        super().__init__()
        if not 0.0 <= drop_rate < 1.0:
            raise ValueError("drop rate must lie in [0, 1)")
        self.drop_rate = drop_rate

    def forward(self, x, train=False, sample=False, rng=None):
        if train and self.drop_rate > 0.0:
            if rng is None:
                raise ValueError("dropout in train mode needs an rng")
            keep = 1.0 - self.drop_rate
            mask = (rng.random(x.shape) >= self.drop_rate) / keep
        else:
            mask = None
        self._cache = mask
        return x if mask is None else x * mask

    def backward(self, grad_out):
        mask = self._take_cache()
        self.grads = {}
        return grad_out if mask is None else grad_out * mask


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, units, activation="linear", rng=None):
        super().__init__()
        self.in_features = in_features
        self.units = units
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        self.params = {
            "weight": _glorot(rng, (in_features, units), in_features, units),
            "bias": np.zeros(units),
        }

    def forward(self, x, train=False, sample=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(
                f"dense expects (batch, {self.in_features}), got {x.shape}")
        z = x @ self.params["weight"] + self.params["bias"]
        y = _activate(self.activation, z)
        self._cache = (x, z, y)
        return y

    def backward(self, grad_out):
        x, z, y = self._take_cache()
        grad_z = _activate_grad(self.activation, z, y, grad_out)
        self.grads = {
            "weight": x.T @ grad_z,
            "bias": grad_z.sum(axis=0),
        }
        return grad_z @ self.params["weight"].T


class _VariationalLayer(Layer):
    """Shared posterior bookkeeping for reparameterized layers.

    Each base parameter ``p`` becomes (``p_mean``, ``p_raw_scale``) with
    scale = softplus(raw_scale) against a zero-mean Gaussian prior.
    """

    base_names = ("weight", "bias")

    def __init__(self, prior_scale=1.0):
        super().__init__()
        if prior_scale <= 0.0:
            raise ValueError("prior scale must be positive")
        self.prior_scale = prior_scale

    @property
    def is_variational(self):
        return True

    def _sample(self, name, sample, rng):
        mean = self.params[f"{name}_mean"]
        raw = self.params[f"{name}_raw_scale"]
        if sample:
            if rng is None:
                raise ValueError("weight sampling needs an rng")
            eps = rng.standard_normal(mean.shape)
        else:
            eps = np.zeros_like(mean)
        return mean + softplus(raw) * eps, eps

    def _route_grads(self, name, grad_value, eps):
        raw = self.params[f"{name}_raw_scale"]
        self.grads[f"{name}_mean"] = grad_value
        self.grads[f"{name}_raw_scale"] = grad_value * eps * sigmoid(raw)

    def kl(self):
        from .losses import gaussian_kl
        total = 0.0
        for name in self.base_names:
            total += gaussian_kl(self.params[f"{name}_mean"],
                                 softplus(self.params[f"{name}_raw_scale"]),
                                 self.prior_scale)
        return total

    def kl_grads(self):
        out = {}
        pvar = self.prior_scale ** 2
        for name in self.base_names:
            mean = self.params[f"{name}_mean"]
            raw = self.params[f"{name}_raw_scale"]
            scale = softplus(raw)
            out[f"{name}_mean"] = mean / pvar
            out[f"{name}_raw_scale"] = (scale / pvar - 1.0 / scale) * sigmoid(raw)
        return out


class Conv1DReparam(_VariationalLayer):
    kind = "conv1d_reparam"

    def __init__(self, in_channels, filters, kernel_size, stride=1,
                 activation="linear", prior_scale=1.0, rng=None):
        super().__init__(prior_scale)
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.stride = stride
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        fan_in = kernel_size * in_channels
        fan_out = kernel_size * filters
        shape = (kernel_size, in_channels, filters)
        self.params = {
            "weight_mean": _glorot(rng, shape, fan_in, fan_out),
            "weight_raw_scale": np.full(shape, RAW_SCALE_INIT),
            "bias_mean": np.zeros(filters),
            "bias_raw_scale": np.full(filters, RAW_SCALE_INIT),
        }

    def forward(self, x, train=False, sample=False, rng=None):
        w, eps_w = self._sample("weight", sample, rng)
        b, eps_b = self._sample("bias", sample, rng)
        z, windows = _conv1d_core(x, w, self.stride)
        z = z + b
        y = _activate(self.activation, z)
        self._cache = (x.shape, windows, z, y, w, eps_w, eps_b)
        return y

    def backward(self, grad_out):
        x_shape, windows, z, y, w, eps_w, eps_b = self._take_cache()
        grad_z = _activate_grad(self.activation, z, y, grad_out)
        grad_x, grad_w, grad_b = _conv1d_backward_core(
            grad_z, windows, w, x_shape, self.stride)
        self.grads = {}
        self._route_grads("weight", grad_w, eps_w)
        self._route_grads("bias", grad_b, eps_b)
        return grad_x


class DenseVariational(_VariationalLayer):
    kind = "dense_variational"

    def __init__(self, in_features, units, activation="linear",
                 prior_scale=1.0, rng=None):
        super().__init__(prior_scale)
        self.in_features = in_features
        self.units = units
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        shape = (in_features, units)
        self.params = {
            "weight_mean": _glorot(rng, shape, in_features, units),
            "weight_raw_scale": np.full(shape, RAW_SCALE_INIT),
            "bias_mean": np.zeros(units),
            "bias_raw_scale": np.full(units, RAW_SCALE_INIT),
        }

    def forward(self, x, train=False, sample=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(
                f"dense expects (batch, {self.in_features}), got {x.shape}")
        w, eps_w = self._sample("weight", sample, rng)
        b, eps_b = self._sample("bias", sample, rng)
        z = x @ w + b
        y = _activate(self.activation, z)
        self._cache = (x, z, y, w, eps_w, eps_b)
        return y

    def backward(self, grad_out):
        x, z, y, w, eps_w, eps_b = self._take_cache()
        grad_z = _activate_grad(self.activation, z, y, grad_out)
        self.grads = {}
        self._route_grads("weight", x.T @ grad_z, eps_w)
        self._route_grads("bias", grad_z.sum(axis=0), eps_b)
        return grad_z @ w.T

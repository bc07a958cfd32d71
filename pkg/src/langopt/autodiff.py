"""Forward-mode dual numbers plus finite-difference and smoothed gradient estimators.

Model functions (dynamics, costs, constraints) are written against the math
shims in this module (``sin``, ``sqrt``, ``stack``, ...), which dispatch on the
argument type: plain ndarrays go straight to numpy, :class:`Dual` arrays
propagate first-order tangents alongside the values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np


class NonFiniteValueError(ValueError):
    """A probed function value came back NaN or infinite."""


class Dual:
    """Array of first-order dual numbers.

    ``val`` has an arbitrary shape S and ``eps`` has shape S + (d,), carrying
    d tangent directions for every element. Arithmetic follows the usual
    first-order rules; plain arrays and scalars mix in as constants.
    """

    __slots__ = ("val", "eps")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, val, eps):
        val = np.asarray(val, dtype=float)
        eps = np.asarray(eps, dtype=float)
        if eps.shape[:-1] != val.shape:
            eps = np.broadcast_to(eps, val.shape + eps.shape[-1:])
        self.val = val
        self.eps = eps

    # -- shape plumbing -------------------------------------------------

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def tangents(self):
        return self.eps.shape[-1]

    def reshape(self, shape):
        shape = tuple(shape)
        return Dual(self.val.reshape(shape), self.eps.reshape(shape + self.eps.shape[-1:]))

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            eidx = idx + (slice(None),)
        else:
            eidx = idx
        return Dual(self.val[idx], self.eps[eidx])

    def sum(self, axis=None):
        if axis is None:
            d = self.eps.shape[-1]
            return Dual(self.val.sum(), self.eps.reshape(-1, d).sum(axis=0))
        if axis < 0:
            axis = self.val.ndim + axis
        return Dual(self.val.sum(axis=axis), self.eps.sum(axis=axis))

    # -- arithmetic -----------------------------------------------------

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val + o.val, self.eps + o.eps)
        return Dual(self.val + o, self.eps)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val - o.val, self.eps - o.eps)
        return Dual(self.val - o, self.eps)

    def __rsub__(self, o):
        return Dual(o - self.val, -self.eps)

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(
                self.val * o.val,
                self.eps * o.val[..., None] + o.eps * self.val[..., None],
            )
        o = np.asarray(o, dtype=float)
        return Dual(self.val * o, self.eps * o[..., None])

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            val = self.val / o.val
            eps = (self.eps * o.val[..., None] - o.eps * self.val[..., None]) / (
                o.val * o.val
            )[..., None]
            return Dual(val, eps)
        o = np.asarray(o, dtype=float)
        return Dual(self.val / o, self.eps / o[..., None])

    def __rtruediv__(self, o):
        o = np.asarray(o, dtype=float)
        val = o / self.val
        eps = -self.eps * (o / (self.val * self.val))[..., None]
        return Dual(val, eps)

    def __pow__(self, p):
        p = float(p)
        return Dual(self.val**p, (p * self.val ** (p - 1.0))[..., None] * self.eps)

    # comparisons look at values only
    def __lt__(self, o):
        return self.val < value(o)

    def __le__(self, o):
        return self.val <= value(o)

    def __gt__(self, o):
        return self.val > value(o)

    def __ge__(self, o):
        return self.val >= value(o)

    def __repr__(self):
        return f"Dual(val={self.val!r}, tangents={self.eps.shape[-1]})"


ArrayLike = Union[np.ndarray, Dual]


def value(x):
    """Strip tangents: the plain value array of ``x``."""
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


def seed(x: np.ndarray) -> Dual:
    """Attach identity tangents along the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    return Dual(x, np.broadcast_to(np.eye(n), x.shape + (n,)))


def constant(x, d: int) -> Dual:
    """Lift a plain array to a Dual with ``d`` zero tangents."""
    x = np.asarray(x, dtype=float)
    return Dual(x, np.zeros(x.shape + (d,)))


def _unary(x, fval, fderiv):
    if isinstance(x, Dual):
        return Dual(fval(x.val), fderiv(x.val)[..., None] * x.eps)
    return fval(np.asarray(x, dtype=float))


def sin(x):
    return _unary(x, np.sin, np.cos)


def cos(x):
    return _unary(x, np.cos, lambda v: -np.sin(v))


def tanh(x):
    return _unary(x, np.tanh, lambda v: 1.0 - np.tanh(v) ** 2)


def exp(x):
    return _unary(x, np.exp, np.exp)


def log(x):
    return _unary(x, np.log, lambda v: 1.0 / v)


def sqrt(x):
    return _unary(x, np.sqrt, lambda v: 0.5 / np.sqrt(v))


def absolute(x):
    return _unary(x, np.abs, lambda v: np.where(v >= 0.0, 1.0, -1.0))


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def softplus(x):
    """Numerically stable log(1 + exp(x))."""
    return _unary(
        x,
        lambda v: np.logaddexp(0.0, v),
        lambda v: _sigmoid(np.atleast_1d(v)).reshape(np.shape(v)),
    )


def where(cond, a, b):
    """Select between ``a`` and ``b`` (dual-aware); ``cond`` is a plain mask."""
    cond = np.asarray(cond)
    if isinstance(a, Dual) or isinstance(b, Dual):
        d = a.tangents if isinstance(a, Dual) else b.tangents
        if not isinstance(a, Dual):
            a = constant(np.broadcast_to(a, cond.shape), d)
        if not isinstance(b, Dual):
            b = constant(np.broadcast_to(b, cond.shape), d)
        return Dual(
            np.where(cond, a.val, b.val),
            np.where(cond[..., None], a.eps, b.eps),
        )
    return np.where(cond, a, b)


def maximum(a, b):
    """Elementwise max; on ties the first argument's tangent wins."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        return where(value(a) >= value(b), a, b)
    return np.maximum(a, b)


def minimum(a, b):
    """Elementwise min; on ties the first argument's tangent wins."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        return where(value(a) <= value(b), a, b)
    return np.minimum(a, b)


def stack(parts, axis=0):
    if any(isinstance(p, Dual) for p in parts):
        d = next(p.tangents for p in parts if isinstance(p, Dual))
        shp = np.broadcast_shapes(*(np.shape(value(p)) for p in parts))
        parts = [
            p if isinstance(p, Dual) else constant(np.broadcast_to(value(p), shp), d)
            for p in parts
        ]
        eaxis = axis if axis >= 0 else axis - 1
        return Dual(
            np.stack([p.val for p in parts], axis=axis),
            np.stack([p.eps for p in parts], axis=eaxis),
        )
    return np.stack(parts, axis=axis)


def concat(parts, axis=-1):
    if any(isinstance(p, Dual) for p in parts):
        d = next(p.tangents for p in parts if isinstance(p, Dual))
        parts = [p if isinstance(p, Dual) else constant(value(p), d) for p in parts]
        eaxis = axis if axis >= 0 else axis - 1
        return Dual(
            np.concatenate([p.val for p in parts], axis=axis),
            np.concatenate([p.eps for p in parts], axis=eaxis),
        )
    return np.concatenate(parts, axis=axis)


def asum(x, axis=None):
    if isinstance(x, Dual):
        return x.sum(axis=axis)
    return np.sum(x, axis=axis)


# ---------------------------------------------------------------------------
# gradient estimation methods
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exact:
    """Analytic gradients via dual-number forward mode."""


@dataclass(frozen=True)
class FiniteDifference:
    """Central differences with per-coordinate step ``step * max(1, |x_i|)``."""

    step: float = 1e-6

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("finite-difference step must be positive")


@dataclass(frozen=True)
class Smoothed:
    """Randomized-smoothing estimate from antithetic Gaussian probes."""

    samples: int = 64
    stddev: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("smoothed estimator needs at least 2 samples")
        if not self.stddev > 0:
            raise ValueError("smoothing stddev must be positive")


GradientMethod = Union[Exact, FiniteDifference, Smoothed]


def _check_finite(y, context):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        bad = np.argwhere(~np.isfinite(np.atleast_1d(y)))
        raise NonFiniteValueError(f"non-finite function value at {context}, index {bad[0]}")
    return y


def gradient(f: Callable, x: np.ndarray, method: GradientMethod = Exact(), rng=None):
    """Gradient of a scalar function at ``x`` under the chosen method."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if isinstance(method, Exact):
        y = f(seed(x))
        if not isinstance(y, Dual):  # constant function
            _check_finite(y, "x")
            return np.zeros_like(x)
        _check_finite(y.val, "x")
        return np.array(y.eps, dtype=float)
    if isinstance(method, FiniteDifference):
        g = np.empty(n)
        for i in range(n):
            d = method.step * max(1.0, abs(x[i]))
            e = np.zeros(n)
            e[i] = d
            fp = _check_finite(f(x + e), f"x + {d}*e_{i}")
            fm = _check_finite(f(x - e), f"x - {d}*e_{i}")
            g[i] = (fp - fm) / (2.0 * d)
        return g
    if isinstance(method, Smoothed):
        rng = rng if rng is not None else np.random.default_rng(method.seed)
        s = method.stddev
        g = np.zeros(n)
        for k in range(method.samples):
            e = rng.standard_normal(n)
            fp = _check_finite(f(x + s * e), f"x + stddev*e ({k})")
            fm = _check_finite(f(x - s * e), f"x - stddev*e ({k})")
            g += (fp - fm) / (2.0 * s) * e
        return g / method.samples
    raise TypeError(f"unknown gradient method: {method!r}")


def jacobian(h: Callable, x: np.ndarray, method: GradientMethod = Exact(), rng=None):
    """Dense m-by-n Jacobian of a vector function at ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if isinstance(method, Exact):
        y = h(seed(x))
        if not isinstance(y, Dual):
            y = _check_finite(y, "x")
            return np.zeros(y.shape + (n,))
        _check_finite(y.val, "x")
        return np.array(y.eps, dtype=float)
    if isinstance(method, FiniteDifference):
        cols = []
        for i in range(n):
            d = method.step * max(1.0, abs(x[i]))
            e = np.zeros(n)
            e[i] = d
            hp = _check_finite(h(x + e), f"x + {d}*e_{i}")
            hm = _check_finite(h(x - e), f"x - {d}*e_{i}")
            cols.append((hp - hm) / (2.0 * d))
        return np.stack(cols, axis=-1)
    if isinstance(method, Smoothed):
        rng = rng if rng is not None else np.random.default_rng(method.seed)
        s = method.stddev
        acc = None
        for k in range(method.samples):
            e = rng.standard_normal(n)
            hp = _check_finite(h(x + s * e), f"x + stddev*e ({k})")
            hm = _check_finite(h(x - s * e), f"x - stddev*e ({k})")
            d = (hp - hm) / (2.0 * s)
            term = np.multiply.outer(d, e)
            acc = term if acc is None else acc + term
        return acc / method.samples
    raise TypeError(f"unknown gradient method: {method!r}")


def check_gradient(f: Callable, x: np.ndarray, delta: float = 1e-6) -> float:
    """Max relative disagreement between dual-number and central-difference gradients."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    g_exact = gradient(f, x, Exact())
    g_fd = gradient(f, x, FiniteDifference(step=delta))
    denom = np.maximum(1.0, np.abs(g_exact))
    return float(np.max(np.abs(g_exact - g_fd) / denom))

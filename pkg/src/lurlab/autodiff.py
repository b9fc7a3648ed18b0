"""Exact gradients and Hessian-vector products for the MLP loss family.

Gradients come from hand-written backpropagation. The analytic HVP is
Pearlmutter's R-operator (forward-over-reverse) applied to that same
backward pass; the finite-difference HVP differences two gradients and is
kept as an independent oracle.

Every loss is expressed as a per-sample weighted cross-entropy
``sum_i w_i * ce_i``: mean CE has ``w_i = 1/n`` and the forget loss has
``w_i = -1/n``. Lists of requests are concatenated into one weighted pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .core import LabeledBatch, MlpModel, ParamVector, activate, log_softmax, softmax, _check_batch
from .errors import DegenerateDirectionError, DomainError, ShapeError

LOSS_KINDS = ("ce", "neg_ce", "custom_quadratic")


@dataclass(frozen=True)
class Quadratic:
    """``0.5 * (theta - target)^T A (theta - target)``; ``A`` is symmetrised."""

    A: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        t = np.asarray(self.target, dtype=np.float64).reshape(-1)
        if a.shape != (t.size, t.size):
            raise ShapeError(f"A has shape {a.shape}, target has size {t.size}")
        object.__setattr__(self, "A", 0.5 * (a + a.T))
        object.__setattr__(self, "target", t)


@dataclass(frozen=True)
class GradRequest:
    loss_kind: str
    batch: Union[LabeledBatch, Quadratic]
    weight: float = 1.0

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise DomainError(f"unknown loss kind {self.loss_kind!r}")
        want = Quadratic if self.loss_kind == "custom_quadratic" else LabeledBatch
        if not isinstance(self.batch, want):
            raise DomainError(f"{self.loss_kind} needs a {want.__name__}")
        if want is LabeledBatch and len(self.batch) == 0:
            raise DomainError("empty batch")

    def scaled(self, factor: float) -> "GradRequest":
        return GradRequest(self.loss_kind, self.batch, self.weight * factor)


def ce(batch: LabeledBatch, weight: float = 1.0) -> GradRequest:
    return GradRequest("ce", batch, weight)


def neg_ce(batch: LabeledBatch, weight: float = 1.0) -> GradRequest:
    return GradRequest("neg_ce", batch, weight)


def quadratic(A, target=None, weight: float = 1.0) -> GradRequest:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    target = np.zeros(A.shape[0]) if target is None else target
    return GradRequest("custom_quadratic", Quadratic(A, target), weight)


@dataclass(frozen=True)
class HvpMode:
    mode: str = "analytic"
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.mode not in ("analytic", "finite_difference"):
            raise DomainError(f"unknown hvp mode {self.mode!r}")
        if not self.fd_step > 0:
            raise DomainError("fd_step must be positive")


ANALYTIC = HvpMode("analytic")

Model = Union[MlpModel, ParamVector]
Requests = Union[GradRequest, Sequence[GradRequest]]


def params_of(model: Model) -> ParamVector:
    return model if isinstance(model, ParamVector) else model.params


def with_params(model: Model, params: ParamVector) -> Model:
    return params if isinstance(model, ParamVector) else model.with_params(params)


def _as_list(request: Requests) -> list[GradRequest]:
    return [request] if isinstance(request, GradRequest) else list(request)


def _weighted(model: MlpModel, requests: list[GradRequest]):
    """Concatenate classification requests into ``(x, y, w)``."""
    xs, ys, ws = [], [], []
    for r in requests:
        _check_batch(model, r.batch)
        n = len(r.batch)
        sign = 1.0 if r.loss_kind == "ce" else -1.0
        xs.append(r.batch.inputs)
        ys.append(r.batch.labels)
        ws.append(np.full(n, sign * r.weight / n))
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def _split(model: Model, request: Requests):
    requests = _as_list(request)
    quads = [r for r in requests if r.loss_kind == "custom_quadratic"]
    cls = [r for r in requests if r.loss_kind != "custom_quadratic"]
    if cls and not isinstance(model, MlpModel):
        raise ShapeError("classification losses need an MlpModel")
    theta = params_of(model)
    for q in quads:
        if q.batch.target.size != len(theta):
            raise ShapeError(f"quadratic of size {q.batch.target.size} vs {len(theta)} params")
    return theta, quads, cls


# backpropagation

def _mlp_forward(model: MlpModel, params: ParamVector, x: np.ndarray):
    layers = model.weights(params)
    acts, pre = [x], []
    for i, (w, b) in enumerate(layers):
        z = acts[-1] @ w + b
        pre.append(z)
        if i < len(layers) - 1:
            acts.append(activate(model.activation, z)[0])
    return layers, acts, pre


def _mlp_value_grad(model, params, x, y, w):
    layers, acts, pre = _mlp_forward(model, params, x)
    logits = pre[-1]
    n = y.size
    logp = log_softmax(logits)
    value = float(-(w * logp[np.arange(n), y]).sum())
    delta = softmax(logits)
    delta[np.arange(n), y] -= 1.0
    delta *= w[:, None]
    grads = [None] * (2 * len(layers))
    for l in range(len(layers) - 1, -1, -1):
        grads[2 * l] = acts[l].T @ delta
        grads[2 * l + 1] = delta.sum(axis=0)
        if l > 0:
            _, d1, _ = activate(model.activation, pre[l - 1])
            delta = (delta @ layers[l][0].T) * d1
    return value, np.concatenate([g.reshape(-1) for g in grads])


def _mlp_hvp(model, params, x, y, w, v: ParamVector):
    layers, acts, pre = _mlp_forward(model, params, x)
    vl = list(zip(v.arrays()[0::2], v.arrays()[1::2]))
    n, L = y.size, len(layers)
    derivs = [activate(model.activation, z) for z in pre[:-1]]

    # forward R pass
    r_acts = [np.zeros_like(x)]
    r_pre = []
    for l in range(L):
        rz = r_acts[l] @ layers[l][0] + acts[l] @ vl[l][0] + vl[l][1]
        r_pre.append(rz)
        if l < L - 1:
            r_acts.append(derivs[l][1] * rz)

    p = softmax(pre[-1])
    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta *= w[:, None]
    rz = r_pre[-1]
    r_delta = w[:, None] * p * (rz - (p * rz).sum(axis=1, keepdims=True))

    out = [None] * (2 * L)
    for l in range(L - 1, -1, -1):
        out[2 * l] = r_acts[l].T @ delta + acts[l].T @ r_delta
        out[2 * l + 1] = r_delta.sum(axis=0)
        if l > 0:
            wl, vw = layers[l][0], vl[l][0]
            _, d1, d2 = derivs[l - 1]
            s = delta @ wl.T
            rs = r_delta @ wl.T + delta @ vw.T
            r_delta = rs * d1 + s * d2 * r_pre[l - 1]
            delta = s * d1
    return np.concatenate([o.reshape(-1) for o in out])


# public API

def value(model: Model, request: Requests) -> float:
    """Scalar loss value for one request or the sum of several."""
    theta, quads, cls = _split(model, request)
    total = 0.0
    for q in quads:
        d = theta.data - q.batch.target
        total += q.weight * 0.5 * float(d @ q.batch.A @ d)
    if cls:
        x, y, w = _weighted(model, cls)
        total += _mlp_value_grad(model, theta, x, y, w)[0]
    return total


def value_and_grad(model: Model, request: Requests) -> tuple[float, ParamVector]:
    theta, quads, cls = _split(model, request)
    total, g = 0.0, np.zeros_like(theta.data)
    for q in quads:
        d = theta.data - q.batch.target
        total += q.weight * 0.5 * float(d @ q.batch.A @ d)
        g = g + q.weight * (q.batch.A @ d)
    if cls:
        x, y, w = _weighted(model, cls)
        val, gm = _mlp_value_grad(model, theta, x, y, w)
        total += val
        g = g + gm
    return total, theta.with_data(g)


def grad(model: Model, request: Requests) -> ParamVector:
    """Exact gradient of the (summed) loss w.r.t. the model parameters."""
    return value_and_grad(model, request)[1]


def hvp(model: Model, request: Requests, v: ParamVector, mode: HvpMode = ANALYTIC) -> ParamVector:
    """Hessian of the loss at the model parameters applied to ``v``."""
    theta = params_of(model)
    if not theta.compatible(v):
        raise ShapeError("direction layout differs from parameter layout")
    vnorm = v.norm()
    if vnorm < 1e-12:
        raise DegenerateDirectionError(f"direction norm {vnorm:.3g} below 1e-12")
    if mode.mode == "finite_difference":
        h = mode.fd_step * max(1.0, theta.norm())
        unit = v / vnorm
        gp = grad(with_params(model, theta + unit * h), request)
        gm = grad(with_params(model, theta - unit * h), request)
        return (gp - gm) * (vnorm / (2.0 * h))

    _, quads, cls = _split(model, request)
    out = np.zeros_like(theta.data)
    for q in quads:
        out = out + q.weight * (q.batch.A @ v.data)
    if cls:
        x, y, w = _weighted(model, cls)
        out = out + _mlp_hvp(model, theta, x, y, w, v)
    return theta.with_data(out)


# finite-difference checking

def relative_error(a, b, floor: float = 1e-8) -> np.ndarray:
    """``|a-b| / max(|a|,|b|)``, falling back to ``|a-b|`` below ``floor``."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    diff = np.abs(a - b)
    denom = np.maximum(np.abs(a), np.abs(b))
    return np.where(denom < floor, diff, diff / np.where(denom < floor, 1.0, denom))


def central_difference(func: Callable[[ParamVector], float], theta: ParamVector,
                       rel_step: float = 1e-5) -> ParamVector:
    """Coordinate-wise central differences with ``h_i = rel_step * (1 + |theta_i|)``."""
    out = np.empty_like(theta.data)
    for i in range(len(theta)):
        h = rel_step * (1.0 + abs(theta.data[i]))
        up, down = theta.data.copy(), theta.data.copy()
        up[i] += h
        down[i] -= h
        out[i] = (func(theta.with_data(up)) - func(theta.with_data(down))) / (2.0 * h)
    return theta.with_data(out)


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    worst_index: int
    rel_errors: np.ndarray = field(repr=False)


def grad_check(model: Model, request: Requests, tolerance: float = 1e-5,
               grad_fn: Callable[[Model, Requests], ParamVector] | None = None) -> GradCheckReport:
    """Compare ``grad_fn`` (default :func:`grad`) against central differences.

    Failures are reported in the result rather than raised.
    """
    theta = params_of(model)
    analytic = (grad_fn or grad)(model, request)
    numeric = central_difference(lambda p: value(with_params(model, p), request), theta)
    errs = relative_error(analytic.data, numeric.data)
    worst = int(np.argmax(errs)) if errs.size else -1
    max_err = float(errs[worst]) if errs.size else 0.0
    return GradCheckReport(max_err, bool(max_err <= tolerance), worst, errs)

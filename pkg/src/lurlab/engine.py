"""Bi-level unlearning updates, baselines, saliency masks and the run loop.

The bi-level objective is

    L_r(theta) + lam * L_f(theta - alpha * grad L_r(theta))

and its exact gradient is

    grad L_r(theta) + lam * (I - alpha * H_r(theta)) grad L_f(theta')

which needs one Hessian-vector product per step. ``first_order`` mode drops
that product.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from . import autodiff as ad
from .autodiff import GradRequest, Model, params_of, with_params
from .core import LabeledBatch, MlpModel, ParamVector, init_params, make_rng
from .errors import DomainError, NumericalError

METHODS = ("lur", "lur_b", "ga", "ft", "retrain")
LUR_MODES = ("exact", "first_order")

# RNG stream ids, one per independent consumer inside a run.
_FORGET_STREAM, _RETAIN_STREAM, _INNER_STREAM = 1, 2, 3

Loss = Union[LabeledBatch, GradRequest, list]


def retain_loss(x: Loss):
    return ad.ce(x) if isinstance(x, LabeledBatch) else x


def forget_loss(x: Loss):
    return ad.neg_ce(x) if isinstance(x, LabeledBatch) else x


@dataclass(frozen=True)
class UnlearnConfig:
    method: str = "lur"
    lur_mode: str = "exact"
    alpha: float = 0.01
    outer_lr: float = 0.01
    momentum: float = 0.9
    lam: float = 1.0
    epochs: int = 5
    batch_size_r: int = 32
    batch_size_f: int = 32
    mask_sparsity: float = 0.0
    seed: int = 0
    record_masked_cosine: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.lur_mode not in LUR_MODES:
            raise DomainError(f"unknown lur_mode {self.lur_mode!r}")
        if not self.alpha >= 0:
            raise DomainError("alpha must be >= 0")
        if not self.outer_lr > 0:
            raise DomainError("outer_lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError("momentum must lie in [0, 1)")
        if not self.lam >= 0:
            raise DomainError("lambda must be >= 0")
        if self.epochs < 1 or self.batch_size_r < 1 or self.batch_size_f < 1:
            raise DomainError("epochs and batch sizes must be positive")
        if not 0.0 <= self.mask_sparsity < 1.0:
            raise DomainError("mask_sparsity must lie in [0, 1)")

    def replace(self, **changes) -> "UnlearnConfig":
        return UnlearnConfig(**{**asdict(self), **changes})


# single-step primitives

def inner_step(model: Model, retain: Loss, alpha: float) -> ParamVector:
    """``theta' = theta - alpha * grad L_r(theta)``; the input is not modified."""
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    theta = params_of(model)
    return theta - ad.grad(model, retain_loss(retain)) * alpha


def composite_objective(model: Model, retain: Loss, forget: Loss, alpha: float,
                        lam: float = 1.0, inner: Loss | None = None) -> float:
    """Scalar bi-level objective; ``inner`` defaults to the retain batch."""
    inner = retain if inner is None else inner
    theta_p = inner_step(model, inner, alpha)
    return (ad.value(model, retain_loss(retain))
            + lam * ad.value(with_params(model, theta_p), forget_loss(forget)))


def forget_gradient_at_inner(model: Model, retain: Loss, forget: Loss, alpha: float,
                             exact: bool = True) -> ParamVector:
    """``d L_f(theta') / d theta`` with ``theta'`` from :func:`inner_step`."""
    r = retain_loss(retain)
    theta_p = inner_step(model, r, alpha)
    g_fp = ad.grad(with_params(model, theta_p), forget_loss(forget))
    if not exact or alpha == 0.0 or g_fp.norm() < 1e-12:
        return g_fp
    return g_fp - ad.hvp(model, r, g_fp) * alpha


def lur_total_gradient(model: Model, retain: Loss, forget: Loss, alpha: float,
                       lam: float = 1.0, mode: str = "exact",
                       inner: Loss | None = None, step: int | None = None) -> ParamVector:
    """Gradient of :func:`composite_objective`.

    ``inner`` is the retain batch used for the inner step (defaults to
    ``retain``). ``first_order`` mode omits the Hessian-vector correction.
    """
    if mode not in LUR_MODES:
        raise DomainError(f"unknown mode {mode!r}")
    inner = retain if inner is None else inner
    g_r = ad.grad(model, retain_loss(retain))
    g_f = forget_gradient_at_inner(model, inner, forget, alpha, exact=(mode == "exact"))
    total = g_r + g_f * lam
    if not total.isfinite():
        raise NumericalError("non-finite LUR gradient", step=step)
    return total


def lur_b_gradient(model: Model, retain: Loss, forget: Loss, lam: float = 1.0) -> ParamVector:
    """Joint baseline: ``grad L_r + lam * grad L_f`` at the same point."""
    return ad.grad(model, retain_loss(retain)) + ad.grad(model, forget_loss(forget)) * lam


def theorem1_expansion(model: Model, retain: Loss, forget: Loss, alpha: float) -> ParamVector:
    """Second-order expansion of ``d L_f(theta')/d theta``.

    ``grad L_f - alpha * (H_f grad L_r + H_r grad L_f)``, all at ``theta``.
    """
    r, f = retain_loss(retain), forget_loss(forget)
    g_r, g_f = ad.grad(model, r), ad.grad(model, f)
    if alpha == 0.0:
        return g_f
    cross = params_of(model).zeros_like()
    if g_r.norm() >= 1e-12:
        cross = cross + ad.hvp(model, f, g_r)
    if g_f.norm() >= 1e-12:
        cross = cross + ad.hvp(model, r, g_f)
    return g_f - cross * alpha


# saliency mask

@dataclass(frozen=True)
class SaliencyMask:
    bits: np.ndarray
    sparsity: float

    def apply(self, update: ParamVector) -> ParamVector:
        return update.with_data(update.data * self.bits)


def build_mask(model: Model, retain: Loss, forget: Loss, sparsity: float) -> SaliencyMask:
    """Single-shot saliency mask ``|theta * grad(L_r + L_f)|`` at the given point.

    The ``round(sparsity * P)`` lowest-scoring coordinates are zeroed; among
    equal scores the lower parameter index is kept.
    """
    if not 0.0 <= sparsity < 1.0:
        raise DomainError("sparsity must lie in [0, 1)")
    theta = params_of(model)
    p = len(theta)
    n_zero = int(round(sparsity * p))
    bits = np.ones(p)
    if n_zero:
        g = ad.grad(model, [retain_loss(retain), forget_loss(forget)])
        score = np.abs(theta.data * g.data)
        # sort by descending score, then ascending index
        order = np.lexsort((np.arange(p), -score))
        bits[order[p - n_zero:]] = 0.0
    return SaliencyMask(bits, float(n_zero / p) if p else 0.0)


# training and the unlearning loop

@dataclass
class StepRecord:
    step: int
    loss_r: float | None
    loss_f: float | None
    grad_norm_r: float | None
    grad_norm_f: float | None
    cosine: float | None
    cosine_masked: float | None = None


def cosine(u: ParamVector, v: ParamVector, eps: float = 1e-12) -> float | None:
    """Cosine similarity, or ``None`` when either norm is below ``eps``."""
    nu, nv = u.norm(), v.norm()
    if nu < eps or nv < eps:
        return None
    return float(np.clip(u.dot(v) / (nu * nv), -1.0, 1.0))


@dataclass
class RunTrace:
    method: str
    config: dict
    records: list = field(default_factory=list)
    final_params: ParamVector | None = None
    mask: SaliencyMask | None = None

    def series(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "config": self.config,
            "records": [asdict(r) for r in self.records],
            "final_params": None if self.final_params is None else self.final_params.data.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _n_steps(n: int, bs: int) -> int:
    return max(1, math.ceil(n / bs))


def _draw(rng: np.random.Generator, n: int, bs: int) -> np.ndarray:
    if bs >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=bs, replace=False))


def _finite(x) -> bool:
    return x is None or math.isfinite(x)


def train(model: MlpModel, data: LabeledBatch, epochs: int, lr: float,
          momentum: float = 0.9, batch_size: int = 32, seed: int = 0) -> MlpModel:
    """Plain SGD-with-momentum on mean cross-entropy over shuffled minibatches."""
    rng = make_rng(seed, stream=4)
    theta = model.params
    velocity = theta.zeros_like()
    n = len(data)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = data.subset(np.sort(order[start:start + batch_size]))
            loss, g = ad.value_and_grad(model.with_params(theta), ad.ce(batch))
            if not (math.isfinite(loss) and g.isfinite()):
                raise NumericalError("training diverged", step=step)
            velocity = velocity * momentum + g
            theta = theta - velocity * lr
            step += 1
    return model.with_params(theta)


def unlearn_run(model: MlpModel, splits, config: UnlearnConfig) -> RunTrace:
    """Run ``config.method`` starting from ``model`` and record every outer step.

    ``lur``/``lur_b``/``ga`` take one step per forget minibatch (retain
    minibatches are sampled alongside); ``ft``/``retrain`` take one step per
    retain minibatch. ``retrain`` restarts from a fresh initialisation seeded
    by ``config.seed``.
    """
    cfg = config
    retain_set, forget_set = splits.retain, splits.forget
    n_r, n_f = len(retain_set), len(forget_set)
    needs_forget = cfg.method in ("lur", "lur_b", "ga")
    if n_r == 0 and cfg.method != "ga":
        raise DomainError("retain set is empty")
    if n_f == 0 and needs_forget:
        raise DomainError("forget set is empty")

    if cfg.method == "retrain":
        model = init_params(model.layer_dims, model.activation, cfg.seed)
    trace = RunTrace(cfg.method, asdict(cfg))

    mask = None
    if cfg.mask_sparsity > 0 and cfg.method != "retrain":
        mask = build_mask(model, retain_set, forget_set, cfg.mask_sparsity)
    trace.mask = mask

    rng_f = make_rng(cfg.seed, _FORGET_STREAM)
    rng_r = make_rng(cfg.seed, _RETAIN_STREAM)
    rng_in = make_rng(cfg.seed, _INNER_STREAM)

    theta = model.params
    velocity = theta.zeros_like()
    step = 0
    for _ in range(cfg.epochs):
        if needs_forget:
            order = rng_f.permutation(n_f)
            n_steps = _n_steps(n_f, cfg.batch_size_f)
        else:
            order = rng_r.permutation(n_r)
            n_steps = _n_steps(n_r, cfg.batch_size_r)
        for k in range(n_steps):
            if needs_forget:
                f_idx = np.sort(order[k * cfg.batch_size_f:(k + 1) * cfg.batch_size_f])
                r_idx = _draw(rng_r, n_r, cfg.batch_size_r) if n_r else None
            else:
                r_idx = np.sort(order[k * cfg.batch_size_r:(k + 1) * cfg.batch_size_r])
                f_idx = _draw(rng_f, n_f, cfg.batch_size_f) if n_f else None
            current = model.with_params(theta)
            r_batch = retain_set.subset(r_idx) if r_idx is not None else None
            f_batch = forget_set.subset(f_idx) if f_idx is not None else None

            loss_r = loss_f = g_r = g_f = None
            if r_batch is not None:
                loss_r, g_r = ad.value_and_grad(current, ad.ce(r_batch))
            if f_batch is not None:
                loss_f, g_f = ad.value_and_grad(current, ad.neg_ce(f_batch))

            record = StepRecord(
                step, loss_r, loss_f,
                None if g_r is None else g_r.norm(),
                None if g_f is None else g_f.norm(),
                None if g_r is None or g_f is None else cosine(g_r, g_f),
            )
            if cfg.record_masked_cosine and mask is not None and g_r is not None and g_f is not None:
                record.cosine_masked = cosine(mask.apply(g_r), mask.apply(g_f))
            trace.records.append(record)
            if not all(_finite(x) for x in (loss_r, loss_f, record.grad_norm_r, record.grad_norm_f)):
                trace.final_params = theta
                raise NumericalError("non-finite loss or gradient", step=step, trace=trace)

            if cfg.method == "lur":
                in_batch = retain_set.subset(_draw(rng_in, n_r, cfg.batch_size_r))
                g_fp = forget_gradient_at_inner(current, in_batch, f_batch, cfg.alpha,
                                                exact=(cfg.lur_mode == "exact"))
                update = g_r + g_fp * cfg.lam
            elif cfg.method == "lur_b":
                update = g_r + g_f * cfg.lam
            elif cfg.method == "ga":
                update = g_f
            else:
                update = g_r
            if not update.isfinite():
                trace.final_params = theta
                raise NumericalError("non-finite update", step=step, trace=trace)

            velocity = velocity * cfg.momentum + update
            delta = velocity if mask is None else mask.apply(velocity)
            theta = theta - delta * cfg.outer_lr
            step += 1

    trace.final_params = theta
    return trace


def final_model(model: MlpModel, trace: RunTrace) -> MlpModel:
    return model.with_params(trace.final_params)

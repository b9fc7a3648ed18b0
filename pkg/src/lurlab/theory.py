"""Numerical checks of the Taylor-expansion claims behind the bi-level update.

Each ``*_residual`` function measures how far an expansion is from the exact
quantity at a given inner step ``alpha``; :func:`fit_slope` turns a sweep of
residuals into an observed order of convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Model, params_of, with_params
from .core import ParamVector
from .engine import (RunTrace, UnlearnConfig, cosine, forget_gradient_at_inner, forget_loss,
                     inner_step, lur_total_gradient, retain_loss, theorem1_expansion, unlearn_run)
from .errors import DiagnosticError, InsufficientDataError

DEFAULT_ALPHAS = (1e-3, 3e-3, 1e-2, 3e-2, 1e-1)

__all__ = [
    "DEFAULT_ALPHAS", "SlopeFit", "AlignmentSeries", "cosine", "residual_norm",
    "lemma1_residual", "theorem1_residual", "remark1_residual", "regularizer_gradient",
    "fit_slope", "residual_sweep", "alignment_compare",
]


def residual_norm(vec: ParamVector, segments: Sequence[str] | None = None) -> float:
    """Euclidean norm over the whole vector or only the named segments."""
    if segments is None:
        return vec.norm()
    return float(np.sqrt(sum(np.sum(vec.segment(s) ** 2) for s in segments)))


def lemma1_residual(model: Model, forget, retain, alpha: float,
                    segments: Sequence[str] | None = None) -> float:
    """``|| grad L_f(theta - alpha g_r) - (grad L_f - alpha H_f g_r) ||``."""
    f, r = forget_loss(forget), retain_loss(retain)
    g_r = ad.grad(model, r)
    g_f = ad.grad(model, f)
    shifted = ad.grad(with_params(model, inner_step(model, r, alpha)), f)
    if alpha == 0.0 or g_r.norm() < 1e-12:
        return residual_norm(shifted - g_f, segments)
    linear = g_f - ad.hvp(model, f, g_r) * alpha
    return residual_norm(shifted - linear, segments)


def theorem1_residual(model: Model, retain, forget, alpha: float,
                      segments: Sequence[str] | None = None) -> float:
    """Distance between the exact ``d L_f(theta')/d theta`` and its expansion."""
    exact = forget_gradient_at_inner(model, retain, forget, alpha, exact=True)
    return residual_norm(exact - theorem1_expansion(model, retain, forget, alpha), segments)


def regularizer_gradient(model: Model, retain, forget) -> ParamVector:
    """Gradient of the inner product ``grad L_f . grad L_r``: ``H_f g_r + H_r g_f``."""
    r, f = retain_loss(retain), forget_loss(forget)
    g_r, g_f = ad.grad(model, r), ad.grad(model, f)
    out = params_of(model).zeros_like()
    if g_r.norm() >= 1e-12:
        out = out + ad.hvp(model, f, g_r)
    if g_f.norm() >= 1e-12:
        out = out + ad.hvp(model, r, g_f)
    return out


def remark1_residual(model: Model, retain, forget, alpha: float, lam: float = 1.0,
                     segments: Sequence[str] | None = None) -> float:
    """Exact total gradient minus the gradient of the regularised surrogate

    ``L_r + lam * L_f - lam * alpha * (grad L_f . grad L_r)``.
    """
    exact = lur_total_gradient(model, retain, forget, alpha, lam, mode="exact")
    g_r = ad.grad(model, retain_loss(retain))
    g_f = ad.grad(model, forget_loss(forget))
    surrogate = g_r + g_f * lam
    if alpha != 0.0:
        surrogate = surrogate - regularizer_gradient(model, retain, forget) * (lam * alpha)
    return residual_norm(exact - surrogate, segments)


@dataclass
class SlopeFit:
    alphas: list
    residual_norms: list
    slope: float
    intercept: float
    r_squared: float
    dropped: list = field(default_factory=list)

    def within(self, lo: float = 1.8, hi: float = 2.2, min_r2: float = 0.98) -> bool:
        return lo <= self.slope <= hi and self.r_squared >= min_r2


def fit_slope(alphas: Sequence[float], residuals: Sequence[float]) -> SlopeFit:
    """Least-squares line through ``(log alpha, log residual)``.

    Non-positive residuals are dropped and listed in ``dropped``; fewer than
    four surviving points raise :class:`InsufficientDataError`.
    """
    a = np.asarray(alphas, dtype=np.float64)
    r = np.asarray(residuals, dtype=np.float64)
    if a.shape != r.shape:
        raise ValueError("alphas and residuals differ in length")
    keep = r > 0
    dropped = a[~keep].tolist()
    a, r = a[keep], r[keep]
    if a.size < 4:
        raise InsufficientDataError(f"only {a.size} positive residuals; need 4")
    diffs = np.diff(a)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("alphas must be strictly monotone")
    x, y = np.log(a), np.log(r)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return SlopeFit(a.tolist(), r.tolist(), float(slope), float(intercept), r2, dropped)


def residual_sweep(residual_fn: Callable[[float], float],
                   alphas: Sequence[float] = DEFAULT_ALPHAS) -> SlopeFit:
    return fit_slope(alphas, [residual_fn(a) for a in alphas])


@dataclass
class AlignmentSeries:
    method: str
    seeds: list
    values: list  # one list of per-step cosines (None = undefined) per seed

    def seed_means(self) -> list:
        out = []
        for seed, vals in zip(self.seeds, self.values):
            defined = [v for v in vals if v is not None]
            if not defined:
                raise DiagnosticError(f"every cosine undefined for seed {seed}")
            out.append(float(np.mean(defined)))
        return out

    def mean(self) -> float:
        return float(np.mean(self.seed_means()))


def alignment_compare(task: Callable[[int], tuple], seeds: Sequence[int],
                      config_lur: UnlearnConfig, config_lur_b: UnlearnConfig):
    """Per-step ``cos(grad L_r, grad L_f)`` for two configs on matched seeds.

    ``task(seed)`` must return ``(model, splits)``. Returns
    ``(series_a, series_b, summary)``.
    """
    a = AlignmentSeries(config_lur.method, [], [])
    b = AlignmentSeries(config_lur_b.method, [], [])
    for seed in seeds:
        model, splits = task(seed)
        for series, cfg in ((a, config_lur), (b, config_lur_b)):
            trace: RunTrace = unlearn_run(model, splits, cfg.replace(seed=seed))
            series.seeds.append(seed)
            series.values.append(trace.series("cosine"))
    ma, mb = a.seed_means(), b.seed_means()
    summary = {
        "mean_lur": float(np.mean(ma)),
        "mean_lur_b": float(np.mean(mb)),
        "per_seed_lur": ma,
        "per_seed_lur_b": mb,
        "wins": int(sum(x > y for x, y in zip(ma, mb))),
        "n_seeds": len(ma),
    }
    return a, b, summary

"""Desk-scale unlearning tasks: blobs, a pretrained model and a split."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import MlpModel, init_params
from .data import BlobSpec, DatasetSplit, make_blobs, split_classwise_forget, split_random_forget
from .engine import UnlearnConfig, final_model, train, unlearn_run
from .metrics import MetricsReport, avg_gap, compute_metrics


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32


@dataclass(frozen=True)
class BlobTask:
    """Callable ``seed -> (pretrained model, split)``.

    The seed drives the data draw, the forget selection and the model
    initialisation, so each seed is an independent trial.
    """

    spec: BlobSpec = BlobSpec()
    hidden: tuple = (16,)
    activation: str = "tanh"
    forget_fraction: float = 0.1
    forget_classes: tuple | None = None
    pretrain: TrainConfig = TrainConfig()

    @property
    def layer_dims(self) -> tuple:
        return (self.spec.dims, *self.hidden, self.spec.classes)

    def data(self, seed: int):
        return make_blobs(self.spec, seed)

    def split(self, seed: int) -> DatasetSplit:
        train_set, test_set = self.data(seed)
        if self.forget_classes:
            return split_classwise_forget(train_set, self.forget_classes, test=test_set)
        return split_random_forget(train_set, self.forget_fraction, seed, test=test_set)

    def pretrained(self, seed: int, splits: DatasetSplit) -> MlpModel:
        model = init_params(self.layer_dims, self.activation, seed)
        p = self.pretrain
        return train(model, splits.train, p.epochs, p.lr, p.momentum, p.batch_size, seed)

    def __call__(self, seed: int):
        splits = self.split(seed)
        return self.pretrained(seed, splits), splits


def conflict_task(**overrides) -> BlobTask:
    """Overlapping three-class blobs; random forget samples sit inside the
    retain clusters, so retain and forget gradients oppose each other.

    Features have scale ~3 so the retain-loss curvature (top Hessian
    eigenvalue ~2 after pretraining) makes ``alpha = 1`` an over-long inner
    step, as at full scale.
    """
    spec = BlobSpec(classes=3, dims=2, samples_per_class=100, spread=3.0,
                    conflict_overlap=0.5, radius=9.0)
    return BlobTask(spec=spec, **overrides)


def desk_config(**overrides) -> UnlearnConfig:
    """Unlearning hyperparameters used by the desk-scale experiments."""
    base = dict(method="lur", alpha=0.01, outer_lr=0.01, momentum=0.9, lam=1.0, epochs=5,
                batch_size_r=32, batch_size_f=8)
    return UnlearnConfig(**{**base, **overrides})


def separable_task(**overrides) -> BlobTask:
    spec = BlobSpec(classes=2, dims=2, samples_per_class=100, spread=0.5, radius=3.0)
    return BlobTask(spec=spec, **overrides)


def retrain_config(cfg: UnlearnConfig, pretrain: TrainConfig) -> UnlearnConfig:
    """Configuration for the retrain oracle, mirroring the pretraining recipe."""
    return cfg.replace(method="retrain", epochs=pretrain.epochs, outer_lr=pretrain.lr,
                       momentum=pretrain.momentum, batch_size_r=pretrain.batch_size,
                       mask_sparsity=0.0)


def evaluate(model: MlpModel, splits: DatasetSplit) -> MetricsReport:
    return compute_metrics(model, splits)


def gap_trial(task: BlobTask, seed: int, configs: dict, retrain_cfg: UnlearnConfig | None = None):
    """Run every config in ``configs`` on one seed and score it against retrain.

    Returns ``{"retrain": MetricsReport, name: (MetricsReport, GapReport), ...}``.
    """
    model, splits = task(seed)
    base = next(iter(configs.values())) if configs else UnlearnConfig()
    rcfg = retrain_cfg or retrain_config(base, task.pretrain)
    ref_trace = unlearn_run(model, splits, rcfg.replace(seed=seed))
    reference = evaluate(final_model(model, ref_trace), splits)
    out = {"retrain": reference}
    for name, cfg in configs.items():
        trace = unlearn_run(model, splits, cfg.replace(seed=seed))
        report = evaluate(final_model(model, trace), splits)
        out[name] = (report, avg_gap(report, reference))
    return out


def task_dict(task: BlobTask) -> dict:
    return asdict(task)


def theory_problem(seed: int, dims: tuple = (2, 6, 2), n_retain: int = 16, n_forget: int = 8,
                   jitter: float = 0.3):
    """Random smooth MLP with random retain/forget batches for expansion checks.

    Biases are jittered away from zero so every coordinate carries curvature.
    """
    from .core import LabeledBatch, make_rng

    model = init_params(dims, "tanh", seed)
    rng = make_rng(seed, stream=20)
    model = model.with_params(model.params.with_data(
        model.params.data + jitter * rng.standard_normal(len(model.params))))
    classes = dims[-1]
    retain = LabeledBatch(rng.standard_normal((n_retain, dims[0])), rng.integers(0, classes, n_retain))
    forget = LabeledBatch(rng.standard_normal((n_forget, dims[0])), rng.integers(0, classes, n_forget))
    return model, retain, forget


@dataclass
class SweepRow:
    alpha: float
    mean_gap: float
    std_gap: float
    gaps: list


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def sweep_alpha(problem, seeds, alphas, base: UnlearnConfig, retrain_cfg: UnlearnConfig):
    """Avg. Gap of LUR against retrain for each ``alpha`` over ``seeds``.

    ``problem(seed)`` returns ``(pretrained model, split)``. The retrain
    reference is computed once per seed and shared by every alpha.
    """
    per_alpha = {a: [] for a in alphas}
    for seed in seeds:
        model, splits = problem(seed)
        ref = unlearn_run(model, splits, retrain_cfg.replace(seed=seed))
        reference = evaluate(final_model(model, ref), splits)
        for a in alphas:
            trace = unlearn_run(model, splits, base.replace(method="lur", alpha=a, seed=seed))
            per_alpha[a].append(avg_gap(evaluate(final_model(model, trace), splits), reference).avg_gap)
    rows = [SweepRow(a, *mean_std(per_alpha[a]), per_alpha[a]) for a in alphas]
    return rows


def sweep_argmin(rows) -> int:
    return int(np.argmin([r.mean_gap for r in rows]))

"""
Sweeping the inner step size
============================

A tiny inner step makes LUR collapse onto the joint baseline, while a step
longer than the inverse retain curvature overshoots. The mean Avg. Gap is
therefore lowest at an intermediate alpha.
"""

from lurlab.engine import UnlearnConfig
from lurlab.tasks import conflict_task, desk_config, retrain_config, sweep_alpha, sweep_argmin

task = conflict_task()
grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
rows = sweep_alpha(task, seeds=range(10), alphas=grid, base=desk_config(),
                   retrain_cfg=retrain_config(UnlearnConfig(), task.pretrain))

for row in rows:
    print(f"alpha={row.alpha:<7g} mean gap {row.mean_gap:5.2f} +- {row.std_gap:4.2f}")
print("argmin alpha:", rows[sweep_argmin(rows)].alpha)

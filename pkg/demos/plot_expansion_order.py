"""
Second-order remainders of the bi-level gradient
================================================

The forget gradient evaluated after one retain step expands as
``grad L_f - alpha (H_f grad L_r + H_r grad L_f) + O(alpha^2)``. On a smooth
network the residual of each expansion should fall with slope 2 in log-log
coordinates; on quadratic losses the Taylor step is exact.
"""

import numpy as np

from lurlab import autodiff as ad
from lurlab.core import ParamVector
from lurlab.tasks import theory_problem
from lurlab.theory import (DEFAULT_ALPHAS, fit_slope, lemma1_residual, remark1_residual,
                           theorem1_residual)

checks = {
    "taylor step": lambda m, r, f, a: lemma1_residual(m, f, r, a),
    "forget-gradient expansion": lambda m, r, f, a: theorem1_residual(m, r, f, a),
    "regularised surrogate": lambda m, r, f, a: remark1_residual(m, r, f, a, 1.0),
}

for name, residual in checks.items():
    slopes = []
    for seed in range(10):
        m, r, f = theory_problem(seed)
        fit = fit_slope(DEFAULT_ALPHAS, [residual(m, r, f, a) for a in DEFAULT_ALPHAS])
        slopes.append(fit.slope)
    print(f"{name:28s} slopes {np.min(slopes):.3f} .. {np.max(slopes):.3f}")

# quadratics: the Taylor remainder vanishes and the expansion error is alpha^2 sqrt(61)
theta = ParamVector([1.0, 1.0])
q_r = ad.quadratic(np.diag([2.0, 1.0]))
q_f = ad.quadratic([[1.0, 1.0], [1.0, 3.0]], [1.0, -1.0])
for a in (0.01, 0.1):
    print(f"quadratic alpha={a}: taylor {lemma1_residual(theta, q_f, q_r, a):.1e}, "
          f"expansion {theorem1_residual(theta, q_r, q_f, a):.6f} "
          f"(closed form {a * a * np.sqrt(61):.6f})")

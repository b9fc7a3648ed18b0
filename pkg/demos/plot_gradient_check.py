"""
Checking gradients and Hessian-vector products
==============================================

Hand-written backprop is only trustworthy once it agrees with finite
differences. This script checks the CE gradient of a small tanh MLP, the
analytic Hessian-vector product, and the full bi-level gradient.
"""

import numpy as np

from lurlab import autodiff as ad
from lurlab.engine import composite_objective, lur_total_gradient
from lurlab.tasks import theory_problem

model, retain, forget = theory_problem(seed=0)
print("parameters:", len(model.params), "segments:", model.params.names())

# plain gradient against central differences
report = ad.grad_check(model, ad.ce(retain), tolerance=1e-5)
print(f"CE gradient check: max rel err {report.max_rel_err:.2e} passed={report.passed}")

# R-operator HVP against a finite difference of gradients; the error shrinks as h^2
v = model.params.with_data(np.random.default_rng(0).standard_normal(len(model.params)))
exact = ad.hvp(model, ad.ce(retain), v)
for h in (1e-2, 1e-3, 1e-4):
    approx = ad.hvp(model, ad.ce(retain), v, ad.HvpMode("finite_difference", h))
    print(f"HVP  h={h:g}: |exact - fd| = {np.linalg.norm(exact.data - approx.data):.2e}")

# the exact LUR gradient differentiates through the inner step
for alpha in (1e-3, 1e-2, 1e-1):
    g = lur_total_gradient(model, retain, forget, alpha)
    num = ad.central_difference(
        lambda p: composite_objective(model.with_params(p), retain, forget, alpha), model.params)
    first = lur_total_gradient(model, retain, forget, alpha, mode="first_order")
    print(f"alpha={alpha:g}: exact rel err {ad.relative_error(g.data, num.data).max():.1e}, "
          f"first-order rel err {ad.relative_error(first.data, num.data).max():.1e}")

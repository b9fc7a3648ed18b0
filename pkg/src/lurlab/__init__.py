"""Bi-level machine unlearning on small numpy MLPs.

Modules: ``core`` (parameters, model, losses), ``autodiff`` (gradients and
Hessian-vector products), ``engine`` (unlearning methods), ``theory``
(expansion residuals and alignment), ``metrics`` (UA/RA/TA/MIA), ``data``
(blobs, splits, CSV) and ``cli``.
"""

__version__ = "0.1.0"

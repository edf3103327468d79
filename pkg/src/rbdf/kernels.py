"""Kernel backend selection.

Prefers the compiled extension; falls back to the numpy implementation
when the extension is missing (pure-Python checkout) or when
``RBDF_FORCE_PY=1`` is set.  Both backends expose the same functions and
agree to roundoff; ``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

if os.environ.get("RBDF_FORCE_PY", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND: str = _impl.BACKEND

parity_project = _impl.parity_project
leray = _impl.leray
div_pair = _impl.div_pair
rb_explicit = _impl.rb_explicit
heun_predict = _impl.heun_predict
heun_correct = _impl.heun_correct
products_vel = _impl.products_vel
products_scalar = _impl.products_scalar
add_scaled = _impl.add_scaled
nudge_feedback = _impl.nudge_feedback

"""Kernel selection: compiled Cython core when available, numpy fallback otherwise.

Set ``NISPDG_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
for debugging). The selected backend is reported in ``BACKEND``.
"""

from __future__ import annotations

import os

from . import python_ref

try:
    if os.environ.get("NISPDG_PURE_PYTHON", "") == "1":
        raise ImportError("pure-python backend forced")
    from . import _dg_core as _compiled
except ImportError:
    _compiled = None

HAVE_COMPILED = _compiled is not None
BACKEND = "compiled" if HAVE_COMPILED else "python"


def dg_rhs(model, coeffs, tables, h, out) -> int:
    """Semidiscrete DG right-hand side; returns 0 or 1 + first bad cell index."""
    if HAVE_COMPILED and model.kernel_id is not None:
        return _compiled.dg_rhs(
            coeffs,
            tables.phi_q,
            tables.dphi_q,
            tables.w_q,
            tables.phi_l,
            tables.phi_r,
            h,
            model.kernel_id,
            model.kernel_param,
            out,
        )
    return python_ref.dg_rhs(
        model,
        coeffs,
        tables.phi_q,
        tables.dphi_q,
        tables.w_q,
        tables.phi_l,
        tables.phi_r,
        h,
        out,
    )


def max_speed(model, coeffs, tables) -> tuple[int, float]:
    """(status, max wave speed) over the volume points and traces of all cells."""
    if HAVE_COMPILED and model.kernel_id is not None:
        return _compiled.max_speed(
            coeffs,
            tables.phi_q,
            tables.phi_l,
            tables.phi_r,
            model.kernel_id,
            model.kernel_param,
        )
    return python_ref.max_speed(model, coeffs, tables.phi_q, tables.phi_l, tables.phi_r)

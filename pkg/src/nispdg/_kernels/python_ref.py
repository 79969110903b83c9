"""Pure-numpy reference implementation of the DG hot kernels.

Works for any model object exposing vectorized ``flux``, ``max_wave_speed``
and ``admissible_mask``; the compiled core covers the bundled models only.
"""

from __future__ import annotations

import numpy as np


def _cell_status(model, u_q, u_l, u_r) -> int:
    """1-based index of the first cell with an inadmissible point, 0 if none."""
    ok = (
        model.admissible_mask(u_q).all(axis=1)
        & model.admissible_mask(u_l)
        & model.admissible_mask(u_r)
    )
    if ok.all():
        return 0
    return int(np.nonzero(~ok)[0][0]) + 1


def dg_rhs(model, coeffs, phi_q, dphi_q, w_q, phi_l, phi_r, h, out) -> int:
    u_q = np.einsum("jkm,kq->jqm", coeffs, phi_q)
    u_l = np.einsum("jkm,k->jm", coeffs, phi_l)
    u_r = np.einsum("jkm,k->jm", coeffs, phi_r)

    status = _cell_status(model, u_q, u_l, u_r)
    if status:
        return status

    a = u_r
    b = np.roll(u_l, -1, axis=0)
    lam = np.maximum(model.max_wave_speed(a), model.max_wave_speed(b))
    fhat = 0.5 * (model.flux(a) + model.flux(b)) - 0.5 * lam[:, None] * (b - a)

    vol = np.einsum("jqm,kq,q->jkm", model.flux(u_q), dphi_q, w_q)
    out[:] = (
        vol
        - (
            fhat[:, None, :] * phi_r[None, :, None]
            - np.roll(fhat, 1, axis=0)[:, None, :] * phi_l[None, :, None]
        )
    ) / h
    return 0


def max_speed(model, coeffs, phi_q, phi_l, phi_r) -> tuple[int, float]:
    u_q = np.einsum("jkm,kq->jqm", coeffs, phi_q)
    u_l = np.einsum("jkm,k->jm", coeffs, phi_l)
    u_r = np.einsum("jkm,k->jm", coeffs, phi_r)
    status = _cell_status(model, u_q, u_l, u_r)
    if status:
        return status, 0.0
    speed = max(
        model.max_wave_speed(u_q).max(initial=0.0),
        model.max_wave_speed(u_l).max(initial=0.0),
        model.max_wave_speed(u_r).max(initial=0.0),
    )
    return 0, float(speed)

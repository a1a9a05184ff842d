"""Vectorized numpy implementation of the p-energy kernel.

This is the reference backend and the fallback when the compiled extension
is not available.  ``_ckernels.pyx`` implements the same contract.
"""

import numpy as np


def p_energy(cells, grads, vol, u, p, eps, want_grad=True, want_hdiag=False):
    """Cellwise p-energy of a P1 field.

    Parameters
    ----------
    cells : (M, k) int64 array of vertex indices.
    grads : (M, k, d) metric-normalized gradients of the hat functions, so the
        squared gradient norm of ``u`` on cell ``m`` is ``|sum_a u_a G_a|^2``.
    vol : (M,) cell volumes.
    u : (n,) nodal values.

    Returns ``(E, grad, hdiag, n_singular)`` with
    ``E = sum vol ((|grad u|^2 + eps^2)^(p/2) - eps^p)``; ``grad`` is the
    gradient of ``E / p`` and ``hdiag`` the diagonal of its Hessian.  Cells
    where ``p < 2`` and ``|grad u|^2 + eps^2 == 0`` contribute zero to the
    derivatives and are counted in ``n_singular``.
    """
    n = u.shape[0]
    v = np.einsum("mk,mkd->md", u[cells], grads)
    s = np.einsum("md,md->m", v, v)
    t = s + eps * eps
    E = float(np.sum(vol * (t ** (0.5 * p) - eps**p)))
    if not (want_grad or want_hdiag):
        return E, None, None, 0
    zero = t == 0.0
    n_sing = int(np.count_nonzero(zero)) if p < 2 else 0
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(zero, 0.0, vol * t ** (0.5 * p - 1.0))
    gv = np.einsum("mkd,md->mk", grads, v)
    flat = cells.ravel()
    grad = None
    if want_grad:
        grad = np.bincount(flat, weights=(rho[:, None] * gv).ravel(), minlength=n)
    hdiag = None
    if want_hdiag:
        g2 = np.einsum("mkd,mkd->mk", grads, grads)
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(zero[:, None], 0.0, (p - 2.0) * gv * gv / t[:, None])
        hdiag = np.bincount(flat, weights=(rho[:, None] * (g2 + corr)).ravel(), minlength=n)
    return E, grad, hdiag, n_sing

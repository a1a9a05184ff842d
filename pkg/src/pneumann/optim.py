"""Limited-memory quasi-Newton minimizer for smooth convex energies.

The inverse-Hessian seed is a diagonal (the p-energy Hessian diagonal), scaled
by the usual ``s.y / y.D^-1 y`` factor.  The line search is backtracking
Armijo with step expansion while the directional derivative stays steep; the
expansion is what lets linear descent directions (unbounded problems) run off
to the certification thresholds in a handful of iterations.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
UNBOUNDED = "unbounded_below"


@dataclass
class OptResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    rel_grad: float
    status: str
    resets: int = 0


def lbfgs(
    fg: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    *,
    diag: Callable[[np.ndarray], np.ndarray] | None = None,
    weights: np.ndarray | None = None,
    ref_norm: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 10000,
    memory: int = 10,
    f_floor: float = -np.inf,
    x_cap: float = np.inf,
    diag_every: int = 10,
    accept: Callable[[np.ndarray, np.ndarray], bool] | None = None,
) -> OptResult:
    """Minimize ``f`` given ``fg(x) -> (f, grad)``.

    ``weights`` defines the stopping norm ``sqrt(sum w g^2)``; the iteration
    stops when that norm divided by ``ref_norm`` drops below ``tol`` and the
    optional ``accept(x, g)`` predicate agrees.  ``f < f_floor`` together with
    ``max|x| > x_cap`` is reported as unbounded below.
    """
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    w = np.ones_like(x) if weights is None else weights

    def gnorm(v):
        return float(np.sqrt(np.dot(w * v, v)))

    if ref_norm is None or ref_norm <= 0:
        ref_norm = gnorm(g)
    if ref_norm <= 0:
        return OptResult(x, f, g, 0, 0.0, CONVERGED)

    S: deque = deque(maxlen=memory)
    Y: deque = deque(maxlen=memory)
    RHO: deque = deque(maxlen=memory)
    D = _safe_diag(diag(x)) if diag is not None else np.ones_like(x)
    resets = 0
    it = 0
    rel = gnorm(g) / ref_norm
    while True:
        if rel <= tol and (accept is None or accept(x, g)):
            return OptResult(x, f, g, it, rel, CONVERGED, resets)
        if f < f_floor and np.max(np.abs(x)) > x_cap:
            return OptResult(x, f, g, it, rel, UNBOUNDED, resets)
        if it >= max_iter:
            return OptResult(x, f, g, it, rel, MAX_ITER, resets)
        it += 1
        if diag is not None and it % diag_every == 0:
            D = _safe_diag(diag(x))
        d = _two_loop(g, S, Y, RHO, D)
        gd = float(np.dot(g, d))
        if not gd < 0:
            S.clear(), Y.clear(), RHO.clear()
            resets += 1
            d = -g / D
            gd = float(np.dot(g, d))
        step = _line_search(fg, x, f, g, d, gd)
        if step is None and len(S):
            # curvature information is stale; fall back to scaled gradient descent
            S.clear(), Y.clear(), RHO.clear()
            resets += 1
            d = -g / D
            gd = float(np.dot(g, d))
            step = _line_search(fg, x, f, g, d, gd)
        if step is None:
            logger.debug("line search stalled at iteration %d (rel=%.3e)", it, rel)
            return OptResult(x, f, g, it, rel, CONVERGED if rel <= 10 * tol else MAX_ITER, resets)
        x_new, f_new, g_new = step
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.sqrt(float(np.dot(s, s)) * float(np.dot(y, y))):
            S.append(s), Y.append(y), RHO.append(1.0 / sy)
        x, f, g = x_new, f_new, g_new
        rel = gnorm(g) / ref_norm


def _safe_diag(D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    pos = D[D > 0]
    floor = 1e-12 * float(pos.max()) if pos.size else 1.0
    return np.maximum(D, floor)


def _two_loop(g, S, Y, RHO, D):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(S), reversed(Y), reversed(RHO)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if S:
        y = Y[-1]
        gamma = np.dot(S[-1], y) / np.dot(y, y / D)
    else:
        gamma = 1.0
    r = gamma * q / D
    for (s, y, rho), a in zip(zip(S, Y, RHO), reversed(alphas)):
        b = rho * np.dot(y, r)
        r += (a - b) * s
    return -r


def _line_search(fg, x, f, g, d, gd, c1=1e-4, c2=0.9, max_expand=80, min_step=1e-20):
    t = 1.0
    best = None
    flat = 1e-13 * max(1.0, abs(f))
    while t >= min_step:
        xt = x + t * d
        ft, gt = fg(xt)
        if np.isfinite(ft) and ft <= f + c1 * t * gd:
            best = (xt, ft, gt)
            break
        # below the resolution of f: accept on the slope (approximate Wolfe)
        if np.isfinite(ft) and ft <= f + flat:
            gtd = float(np.dot(gt, d))
            if (2 * c1 - 1) * gd >= gtd >= c2 * gd or abs(gtd) <= abs(gd) * (1 - c1):
                return (xt, ft, gt)
        t *= 0.5
    if best is None:
        return None
    if t < 1.0:
        return best
    # expand while the slope along d is still steep (weak Wolfe curvature fails)
    for _ in range(max_expand):
        xt, ft, gt = best
        if np.dot(gt, d) > c2 * gd:
            break
        t *= 2.0
        xn = x + t * d
        fn, gn = fg(xn)
        if not (np.isfinite(fn) and fn <= f + c1 * t * gd and fn < ft):
            break
        best = (xn, fn, gn)
    return best

"""The variational functional J, its gradient, and the convex solver.

``J(phi) = (1/p) int |grad phi|^p dV + (F, phi)`` with ``F = f - h``.  Its
Euler-Lagrange equation is the weak form of ``Delta_p u = f`` with Neumann
flux ``h`` on the ``data`` boundary.  With ``eps > 0`` the energy density is
``(|grad phi|^2 + eps^2)^(p/2) - eps^p`` (so ``J(0) = 0`` is preserved).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import kernels
from .discrete import Discretization, check_field, discretize
from .errors import InvalidParameterError, SingularityError, SizeMismatchError
from .geometry import DATA
from .optim import CONVERGED, MAX_ITER, UNBOUNDED, lbfgs

logger = logging.getLogger(__name__)

GAUGES = ("none", "mean_zero", "pin_vertex")


@dataclass(frozen=True)
class FunctionalData:
    """Cellwise volume density ``f`` and per-``data``-facet density ``h``."""

    f: np.ndarray | None = None
    h: np.ndarray | None = None

    def scaled(self, lam: float) -> "FunctionalData":
        return FunctionalData(
            None if self.f is None else lam * np.asarray(self.f),
            None if self.h is None else lam * np.asarray(self.h),
        )

    def __add__(self, other: "FunctionalData") -> "FunctionalData":
        def add(a, b):
            if a is None:
                return b
            if b is None:
                return a
            return np.asarray(a) + np.asarray(b)

        return FunctionalData(add(self.f, other.f), add(self.h, other.h))

    def is_zero(self) -> bool:
        return all(a is None or not np.any(a) for a in (self.f, self.h))

    def to_dict(self) -> dict:
        return {
            "f": None if self.f is None else np.asarray(self.f).tolist(),
            "h": None if self.h is None else np.asarray(self.h).tolist(),
        }


ZERO = FunctionalData()


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    eps: float = 1e-8
    grad_tol: float = 1e-8
    max_iter: int = 20000
    memory: int = 10
    gauge: str = "none"
    continuation: bool = True
    eps_start: float = 1e-3

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidParameterError("p must exceed 1")
        if self.eps < 0:
            raise InvalidParameterError("eps must be non-negative")
        if not self.grad_tol > 0:
            raise InvalidParameterError("grad_tol must be positive")
        if self.gauge not in GAUGES:
            raise InvalidParameterError(f"gauge must be one of {GAUGES}")
        if self.max_iter < 1 or self.memory < 1:
            raise InvalidParameterError("max_iter and memory must be positive")

    def with_(self, **kw) -> "SolverConfig":
        d = asdict(self)
        d.update(kw)
        return SolverConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveReport:
    iterations: int
    J: float
    rel_grad: float
    energy: float
    weak_residual: float
    status: str
    eps: float
    compatibility: float
    certificate: dict | None = None
    stages: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Data helpers


def boundary_density(domain, func: Callable, marker: str = DATA) -> FunctionalData:
    """Evaluate ``func`` at the midpoint of every ``data`` facet.

    ``func`` receives the midpoint coordinates as separate arrays
    (``x, y`` for meshes, ``r`` for radial models).
    """
    disc = discretize(domain)
    pts = disc.facet_points[disc.data_facets]
    return FunctionalData(h=np.asarray(func(*pts.T), dtype=float) * np.ones(len(pts)))


def cell_density(domain, func: Callable) -> FunctionalData:
    """Evaluate ``func`` at cell centroids (``x, y``) or midpoints (``r``)."""
    disc = discretize(domain)
    if disc.kind == "mesh":
        c = disc.positions[disc.cells].mean(axis=1)
        vals = func(c[:, 0], c[:, 1])
    else:
        vals = func(disc.cell_radius)
    return FunctionalData(f=np.asarray(vals, dtype=float) * np.ones(disc.n_cells))


def load_vector(disc: Discretization, F: FunctionalData) -> np.ndarray:
    """``b_i = (F, chi_i)``: barycentric and edge-midpoint quadrature."""
    b = np.zeros(disc.n)
    if F.f is not None:
        f = np.asarray(F.f, dtype=float)
        if f.shape != (disc.n_cells,):
            raise SizeMismatchError(f"f has {f.size} entries, domain has {disc.n_cells} cells")
        k = disc.cells.shape[1]
        b += np.bincount(disc.cells.ravel(), weights=np.repeat(f * disc.vol / k, k), minlength=disc.n)
    if F.h is not None:
        h = np.asarray(F.h, dtype=float)
        idx = disc.data_facets
        if h.shape != (len(idx),):
            raise SizeMismatchError(f"h has {h.size} entries, domain has {len(idx)} data facets")
        fac = disc.facets[idx]
        kf = fac.shape[1]
        b -= np.bincount(fac.ravel(), weights=np.repeat(h * disc.facet_measure[idx] / kf, kf), minlength=disc.n)
    if not np.all(np.isfinite(b)):
        raise SizeMismatchError("functional data must be finite")
    return b


@dataclass(frozen=True)
class DataSpec:
    """Domain-independent description of ``F``: densities as functions of points.

    ``f(pts)`` and ``h(pts)`` receive an ``(N, dim)`` array of cell centroids
    (mesh) or cell midpoints (radial) and of ``data`` facet midpoints.  The
    same spec can be evaluated on every exhaustion stage or refinement.
    """

    f: Callable | None = None
    h: Callable | None = None
    label: str = ""

    def on(self, domain) -> FunctionalData:
        disc = discretize(domain)
        f = h = None
        if self.f is not None:
            if disc.kind == "mesh":
                pts = disc.positions[disc.cells].mean(axis=1)
            else:
                pts = disc.cell_radius[:, None]
            f = np.asarray(self.f(pts), dtype=float) * np.ones(disc.n_cells)
        if self.h is not None:
            pts = disc.facet_points[disc.data_facets]
            h = np.asarray(self.h(pts), dtype=float) * np.ones(len(pts))
        return FunctionalData(f, h)

    def scaled(self, lam: float) -> "DataSpec":
        f, h = self.f, self.h
        return DataSpec(
            None if f is None else (lambda pts: lam * np.asarray(f(pts))),
            None if h is None else (lambda pts: lam * np.asarray(h(pts))),
            f"{lam}*({self.label})",
        )


# ---------------------------------------------------------------------------
# Evaluation


def dirichlet_energy(domain, u, p: float) -> float:
    """``int |grad u|^p dV`` of the P1 field ``u``."""
    disc = discretize(domain)
    u = check_field(disc, u)
    E, _, _, _ = kernels.p_energy(disc.cells, disc.grads, disc.vol, u, p, 0.0, False, False)
    return E


def pairing(domain, F: FunctionalData, phi) -> float:
    """``(F, phi) = int f phi dV - int h phi dS``."""
    disc = discretize(domain)
    phi = check_field(disc, phi)
    return float(np.dot(load_vector(disc, F), phi))


def compatibility(domain, F: FunctionalData) -> float:
    """``(F, 1)``."""
    disc = discretize(domain)
    return float(math.fsum(load_vector(disc, F)))


def J_value(domain, F: FunctionalData, phi, config: SolverConfig) -> float:
    disc = discretize(domain)
    phi = check_field(disc, phi)
    E, _, _, _ = kernels.p_energy(disc.cells, disc.grads, disc.vol, phi, config.p, config.eps, False, False)
    return E / config.p + float(np.dot(load_vector(disc, F), phi))


def J_gradient(domain, F: FunctionalData, phi, config: SolverConfig) -> np.ndarray:
    """Partial derivatives of ``J`` with respect to the nodal values."""
    disc = discretize(domain)
    phi = check_field(disc, phi)
    _, g, _, n_sing = kernels.p_energy(disc.cells, disc.grads, disc.vol, phi, config.p, config.eps, True, False)
    if n_sing:
        raise SingularityError(f"{n_sing} cells with zero gradient at p={config.p} < 2 and eps=0")
    return g + load_vector(disc, F)


def weak_residual(domain, u, F: FunctionalData, config: SolverConfig, fixed=None) -> float:
    """Normalized residual of the weak form over hat test functions.

    ``max_i |a(u, chi_i) + (F, chi_i)| / (||grad chi_i||_p max(1, ||grad u||_p^(p-1)))``
    over vertices not in ``fixed``.  The flux is that of the operator being
    solved, i.e. regularized with ``config.eps``; the normalizing energy is the
    plain ``||grad u||_p^p``.
    """
    disc = discretize(domain)
    u = check_field(disc, u)
    p = config.p
    _, g, _, _ = kernels.p_energy(disc.cells, disc.grads, disc.vol, u, p, config.eps, True, False)
    E, _, _, _ = kernels.p_energy(disc.cells, disc.grads, disc.vol, u, p, 0.0, False, False)
    r = g + load_vector(disc, F)
    mask = np.ones(disc.n, dtype=bool)
    if fixed is not None and len(fixed):
        mask[np.fromiter(fixed, dtype=np.int64)] = False
    if not mask.any():
        return 0.0
    scale = disc.hat_norms(p)[mask] * max(1.0, E ** ((p - 1) / p))
    return float(np.max(np.abs(r[mask]) / scale))


# ---------------------------------------------------------------------------
# Minimization


def _eps_schedule(config: SolverConfig) -> list[float]:
    if not config.continuation or config.p >= 2 or config.eps >= config.eps_start:
        return [config.eps]
    out = []
    e = config.eps_start
    while e > config.eps * 1.0000001:
        out.append(e)
        e /= 10.0
    out.append(config.eps)
    return out


def minimize_J(
    domain,
    F: FunctionalData,
    config: SolverConfig,
    fixed: Mapping[int, float] | None = None,
    u0=None,
) -> tuple[np.ndarray, SolveReport]:
    """Minimize ``J`` over P1 fields, optionally with Dirichlet values ``fixed``.

    Dirichlet values are imposed by elimination.  Without Dirichlet vertices
    the ``gauge`` removes the constant mode: ``mean_zero`` optimizes over
    volume-mean-zero fields, ``pin_vertex`` pins vertex 0 to zero.  When the
    constant mode is removed and ``(F, 1) != 0`` the report status is
    ``unbounded_below`` with the constant direction as certificate, since
    ``J(u + c) = J(u) + c (F, 1)``.
    """
    disc = discretize(domain)
    b = load_vector(disc, F)
    p = config.p
    n = disc.n
    u = np.zeros(n) if u0 is None else check_field(disc, u0).copy()

    fixed = dict(fixed or {})
    for k in fixed:
        if not (0 <= int(k) < n):
            raise InvalidParameterError(f"fixed vertex {k} out of range")
    gauge = config.gauge if not fixed else "none"
    if gauge == "pin_vertex":
        fixed = {0: 0.0}
    fixed_idx = np.array(sorted(int(k) for k in fixed), dtype=np.int64)
    if len(fixed_idx):
        u[fixed_idx] = [fixed[int(k)] for k in fixed_idx]
    free = np.setdiff1d(np.arange(n), fixed_idx)
    mass = disc.mass
    total_mass = float(mass.sum())
    compat = float(math.fsum(b))
    b_abs = float(np.sum(np.abs(b)))

    mean_zero = gauge == "mean_zero"
    if mean_zero:
        u -= np.dot(mass, u) / total_mass

    def expand(x):
        full = u.copy()
        full[free] = x
        if mean_zero:
            full -= np.dot(mass, full) / total_mass
        return full

    def make_fg(eps):
        def fg(x):
            full = expand(x)
            E, g, _, _ = kernels.p_energy(disc.cells, disc.grads, disc.vol, full, p, eps, True, False)
            g = g + b
            if mean_zero:
                g = g - mass * (g.sum() / total_mass)
            return E / p + float(np.dot(b, full)), g[free]

        return fg

    def make_diag(eps):
        lap = disc.laplace_diagonal()[free]

        def diag(x):
            full = expand(x)
            _, _, hd, _ = kernels.p_energy(disc.cells, disc.grads, disc.vol, full, p, max(eps, 1e-12), False, True)
            hd = hd[free]
            top = float(hd.max()) if hd.size else 0.0
            scale = top / float(lap.max()) if top > 0 else 1.0
            return np.maximum(hd, 1e-3 * scale * lap)

        return diag

    weights = 1.0 / mass[free]
    x = u[free].copy()
    fg0 = make_fg(config.eps)
    f0, g0 = fg0(x)
    E0 = max(0.0, (f0 - float(np.dot(b, expand(x)))) * p)
    ref = float(np.sqrt(np.dot(weights * g0, g0)))
    if ref == 0.0:
        ref = float(np.sqrt(np.dot(weights * b[free], b[free])))
    umax = max(1.0, float(np.max(np.abs(u))) if n else 1.0)
    j_scale = max(abs(f0), b_abs * umax, E0 / p, 1e-300)
    f_floor = -1e12 * j_scale
    x_cap = 1e8 * umax

    status = CONVERGED
    iters = 0
    rel = 0.0
    stages = []
    schedule = _eps_schedule(config)
    res_cap = 10 * config.grad_tol
    resid_cfg = config

    gauged_incompatible = gauge != "none" and abs(compat) > 1e-9 * max(b_abs, 1e-300)

    def accept(xk, gk):
        return weak_residual(domain, expand(xk), F, resid_cfg, fixed_idx) <= res_cap

    if ref > 0.0:
        J_prev = None
        k = 0
        while k < len(schedule):
            eps = schedule[k]
            last = k == len(schedule) - 1
            tol = config.grad_tol if last else max(config.grad_tol, 1e-6)
            res = lbfgs(
                make_fg(eps), x,
                diag=make_diag(eps), weights=weights, ref_norm=ref, tol=tol,
                max_iter=max(config.max_iter - iters, 1), memory=config.memory,
                f_floor=f_floor, x_cap=x_cap,
                accept=accept if last and not gauged_incompatible else None,
            )
            iters += res.iterations
            x, rel, status = res.x, res.rel_grad, res.status
            stages.append({"eps": eps, "iterations": res.iterations, "J": res.f, "status": res.status})
            if status != CONVERGED:
                break
            if J_prev is not None and not last and abs(res.f - J_prev) <= config.grad_tol * max(1.0, abs(res.f)):
                # continuation has stopped changing J: jump to the target eps
                k = len(schedule) - 1
            else:
                k += 1
            J_prev = res.f
    u = expand(x)
    J = J_value(domain, F, u, config)
    energy = dirichlet_energy(domain, u, p)
    wres = weak_residual(domain, u, F, config, fixed_idx)
    certificate = None
    if status == UNBOUNDED:
        certificate = {
            "kind": "divergent_iterates",
            "J": J,
            "max_abs_u": float(np.max(np.abs(u))),
            "J_threshold": f_floor,
            "u_threshold": x_cap,
        }
    elif not len(fixed_idx) or gauge == "pin_vertex":
        if gauged_incompatible:
            status = UNBOUNDED
            certificate = {
                "kind": "constant_direction",
                "compatibility": compat,
                "slope": compat,
                "note": "J(u + c) = J(u) + c (F, 1) decreases without bound",
            }
    report = SolveReport(
        iterations=iters, J=J, rel_grad=rel, energy=energy, weak_residual=wres,
        status=status, eps=config.eps, compatibility=compat, certificate=certificate, stages=stages,
    )
    logger.debug("minimize_J: %s after %d iterations (rel=%.2e, res=%.2e)", status, iters, rel, wres)
    return u, report


__all__ = [
    "DataSpec",
    "FunctionalData",
    "SolverConfig",
    "SolveReport",
    "ZERO",
    "boundary_density",
    "cell_density",
    "compatibility",
    "dirichlet_energy",
    "pairing",
    "J_value",
    "J_gradient",
    "minimize_J",
    "weak_residual",
    "load_vector",
    "CONVERGED",
    "MAX_ITER",
    "UNBOUNDED",
]

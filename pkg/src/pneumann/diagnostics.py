"""Solvability diagnostics: dual norms, compatibility, cutoff pairings,
cover summability, and the combined verdict.

The dual norm of ``F`` on a cell subset ``omega`` is computed from the
constrained minimizer ``u*`` of ``(1/p) int |grad phi|^p - (F, phi)`` over
fields vanishing on the relative boundary of ``omega``.  With ``J*`` the
minimum, ``||grad u*||_p^p = -J* p / (p - 1)`` and the norm is
``||grad u*||_p^(p-1)``.  The ``J*``-based value is used because its error is
quadratic in the optimizer residual.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import energy
from .capacity import HYPERBOLIC, INCONCLUSIVE, PARABOLIC, ClassificationReport, CutoffSequence
from .covers import Cover, build_annular_cover, growth_exponent
from .discrete import connected_cells, discretize, restrict
from .energy import DataSpec, FunctionalData, SolverConfig, load_vector, minimize_J
from .errors import InvalidParameterError, SolverError
from .geometry import OUTER, MetricMesh, refine, refine_radial
from .optim import CONVERGED, UNBOUNDED

logger = logging.getLogger(__name__)

SOLVABLE = "solvable"
UNSOLVABLE = "unsolvable"

CONVERGES = "converges"
DIVERGES = "diverges"

STABILITY_TOL = 0.2
COMPAT_TOL = 1e-8
VANISH_TOL = 1e-2


@dataclass
class DualNormEstimate:
    value: float
    energy: float
    pairing: float
    duality_gap: float
    lower_bound: float
    n_cells: int
    n_frontier: int
    status: str
    subdomain: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _admissible_samples(sub, frontier, u_star, samples, rng) -> list:
    X = sub.positions
    scale = np.ptp(X, axis=0)
    scale[scale == 0] = 1.0
    out = []
    for k in range(samples):
        kind = k % 3
        if kind == 0:
            kv = rng.normal(size=X.shape[1]) * rng.uniform(0.5, 5.0) / scale
            phi = np.sin(X @ kv + rng.uniform(0, 2 * np.pi)) + rng.normal() * 0.5
        elif kind == 1:
            phi = np.zeros(sub.n)
            phi[rng.integers(0, sub.n, size=rng.integers(1, 8))] = rng.normal(size=1)
        else:
            phi = u_star + rng.normal(scale=rng.uniform(1e-3, 1.0), size=sub.n) * (np.ptp(u_star) + 1e-300)
        phi[frontier] = 0.0
        out.append(phi)
    return out


def dual_norm(
    domain,
    F: FunctionalData,
    cells=None,
    p: float = 2.0,
    config: SolverConfig | None = None,
    samples: int = 500,
    seed: int = 0,
    label: str = "",
) -> DualNormEstimate:
    """``||F||_*`` on the zero-extension space of the cell subset ``cells``.

    Fields vanish on vertices shared with excluded cells and on ``outer``
    vertices.  Without such vertices the space contains constants, so an
    incompatible ``F`` has infinite norm; a compatible one is measured modulo
    constants.
    """
    disc = discretize(domain)
    cells = np.arange(disc.n_cells) if cells is None else np.asarray(cells)
    if connected_cells(disc, cells) != 1:
        raise InvalidParameterError("dual norm requested on a disconnected subdomain")
    R = restrict(disc, cells)
    sub = R.disc
    Fl = R.restrict_data(F)
    b = load_vector(sub, Fl)
    frontier = R.frontier
    cfg = (config or SolverConfig()).with_(p=float(p))
    if not np.any(b):
        return DualNormEstimate(0.0, 0.0, 0.0, 0.0, 0.0, len(cells), len(frontier), CONVERGED, label)
    fixed = {int(k): 0.0 for k in frontier}
    if not fixed:
        if abs(math.fsum(b)) > COMPAT_TOL * float(np.sum(np.abs(b))):
            return DualNormEstimate(math.inf, math.inf, math.inf, 0.0, math.inf, len(cells), 0, UNBOUNDED, label)
        cfg = cfg.with_(gauge="mean_zero")
    else:
        cfg = cfg.with_(gauge="none")
    neg = FunctionalData(None if Fl.f is None else -np.asarray(Fl.f), None if Fl.h is None else -np.asarray(Fl.h))
    u, rep = minimize_J(sub, neg, cfg, fixed=fixed)
    if rep.status != CONVERGED:
        raise SolverError(f"dual-norm minimization ended with {rep.status}")
    Jstar = rep.J
    E = max(-Jstar * p / (p - 1.0), 0.0)
    value = E ** ((p - 1.0) / p)
    E_direct = energy.dirichlet_energy(sub, u, p)
    pair = float(np.dot(b, u))
    gap = abs(pair - E_direct) / max(E_direct, 1e-300)
    rng = np.random.default_rng(seed)
    lower = 0.0
    for phi in _admissible_samples(sub, frontier, u, samples, rng):
        if cfg.gauge == "mean_zero":
            phi = phi - np.dot(sub.mass, phi) / sub.mass.sum()
        e = energy.dirichlet_energy(sub, phi, p)
        if e > 0:
            lower = max(lower, abs(float(np.dot(b, phi))) / e ** (1.0 / p))
    return DualNormEstimate(value, E, pair, gap, lower, len(cells), len(frontier), rep.status, label)


def compatibility(domain, F: FunctionalData) -> float:
    """``(F, 1) = int f dV - int h dS``."""
    return energy.compatibility(domain, F)


def _refined(domain):
    return refine(domain) if isinstance(domain, MetricMesh) else refine_radial(domain)


def _support_radius(domain, F: FunctionalData) -> float:
    disc = discretize(domain)
    b = load_vector(disc, F)
    nz = np.flatnonzero(b)
    return float(disc.radius[nz].max()) if len(nz) else 0.0


def local_dual_norm_stability(domain, spec: DataSpec, p: float, config: SolverConfig | None = None, radius: float | None = None):
    """Dual norm on ``omega = {|x| < radius}`` on ``domain`` and on its refinement.

    ``radius`` defaults to twice the support radius of the data (and at least
    the first dyadic piece).  Returns ``(coarse, fine, relative_change)``.
    """
    F = spec.on(domain)
    if radius is None:
        radius = max(2.0 * _support_radius(domain, F), 4.0)
    out = []
    for dom in (domain, _refined(domain)):
        disc = discretize(dom)
        cells = np.flatnonzero(disc.cell_radius < radius)
        out.append(dual_norm(dom, spec.on(dom), cells, p, config, samples=50, label=f"|x|<{radius:g}"))
    a, b = out[0].value, out[1].value
    change = abs(a - b) / max(a, b) if max(a, b) > 0 and math.isfinite(a + b) else (0.0 if a == b else math.inf)
    return out[0], out[1], change


# ---------------------------------------------------------------------------
# Cutoff pairing


@dataclass
class VanishingReport:
    R: list
    values: list
    limit: float
    scale: float
    passed: bool
    tolerance: float = VANISH_TOL

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def vanishing_pairing_test(
    cutoffs: CutoffSequence,
    spec: DataSpec,
    r_K: float = 1.0,
    allow_noncompact: bool = False,
    tol: float = VANISH_TOL,
) -> VanishingReport:
    """``(F, eta_s)`` along the cutoff sequence and its extrapolated limit.

    The limit comes from a fit ``v_s = v_inf + a / ln(R_s / r_K)`` (the decay
    scale of parabolic cutoffs); the test passes when ``|v_inf|`` is at most
    ``tol`` times the total variation ``sum |(F, chi_i)|``.
    """
    vals, Rs, scale = [], [], 0.0
    for k, (dom, eta) in enumerate(zip(cutoffs.domains, cutoffs.fields)):
        disc = discretize(dom)
        F = spec.on(dom)
        b = load_vector(disc, F)
        if k == 0 and not allow_noncompact:
            outer = disc.marker_vertices(OUTER)
            if np.any(b[outer]):
                raise InvalidParameterError("data support reaches the first stage's outer boundary")
        vals.append(float(np.dot(b, eta)))
        Rs.append(float(disc.radius.max()))
        scale = max(scale, float(np.sum(np.abs(b))))
    v = np.array(vals)
    if len(v) >= 3:
        x = 1.0 / np.log(np.array(Rs) / r_K)
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, v, rcond=None)
        limit = float(coef[0])
    else:
        limit = float(v[-1])
    passed = bool(abs(limit) <= tol * scale) if scale > 0 else True
    return VanishingReport(Rs, vals, limit, scale, passed, tol)


# ---------------------------------------------------------------------------
# Cover series


@dataclass
class SeriesReport:
    norms: list
    partial_sums: list
    theta: float
    theta_stderr: float
    fit_range: tuple
    verdict: str
    exponent: float  # theta * p / (p - 1)
    details: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "dual_norm", "partial_sum"])
        for i, (a, s) in enumerate(zip(self.norms, self.partial_sums), start=1):
            w.writerow([i, repr(a), repr(s)])
        return buf.getvalue()


def theorem31_series(
    domain,
    F: FunctionalData,
    cover: Cover | None,
    p: float,
    config: SolverConfig | None = None,
    fit_range: tuple = (1, 6),
    margin: float = 0.05,
) -> SeriesReport:
    """Per-piece dual norms and partial sums of ``sum ||F||_{Omega_i}^{p/(p-1)}``.

    ``theta`` is the least-squares slope of ``log2 ||F||_{Omega_i}`` over the
    pieces ``fit_range`` (1-based, inclusive).  The series converges when
    ``theta < -max(2 stderr, margin)``, diverges when ``theta`` is above that
    band or a piece norm is infinite, and is inconclusive inside it.  Data
    with finitely many nonzero pieces in the fit range converge trivially.
    """
    if cover is None:
        cover = build_annular_cover(domain)
    q = p / (p - 1.0)
    ests = [dual_norm(domain, F, pc, p, config, samples=0, label=f"Omega_{i + 1}") for i, pc in enumerate(cover.pieces)]
    norms = [e.value for e in ests]
    sums, acc = [], 0.0
    for a in norms:
        acc = acc + a**q if math.isfinite(a) else math.inf
        sums.append(acc)
    lo, hi = fit_range
    hi = min(hi, len(norms))
    idx = np.arange(lo, hi + 1)
    sel = np.array([norms[i - 1] for i in idx])
    details = [e.to_dict() for e in ests]
    if np.any(~np.isfinite(sel)):
        return SeriesReport(norms, sums, math.inf, 0.0, (lo, hi), DIVERGES, math.inf, details)
    nz = sel > 0
    if nz.sum() < 3:
        # nonzero on at most a couple of pieces: a finite sum
        tail_zero = not np.any(sel[np.argmax(nz) + 1 :] > 0) if nz.any() else True
        verdict = CONVERGES if tail_zero else INCONCLUSIVE
        return SeriesReport(norms, sums, -math.inf if tail_zero else float("nan"), 0.0, (lo, hi), verdict, -math.inf, details)
    x, y = idx[nz].astype(float), np.log2(sel[nz])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / float(np.sum((x - x.mean()) ** 2)))
    theta = float(coef[0])
    band = max(2.0 * se, margin)
    if theta < -band:
        verdict = CONVERGES
    elif theta > band:
        verdict = DIVERGES
    else:
        verdict = INCONCLUSIVE
    return SeriesReport(norms, sums, theta, se, (lo, hi), verdict, theta * q, details)


# ---------------------------------------------------------------------------
# Combined verdict


@dataclass
class SolvabilityVerdict:
    manifold_type: str
    checks: list
    verdict: str
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def is_compact(domains, spec: DataSpec) -> bool:
    """Data counts as compactly supported when it vanishes outside the first stage."""
    first_R = float(discretize(domains[0]).radius.max())
    return _support_radius(domains[-1], spec.on(domains[-1])) < first_R


def solvability_verdict(
    domains,
    spec: DataSpec,
    p: float,
    config: SolverConfig | None,
    classification: ClassificationReport,
    series: SeriesReport | None = None,
    cutoffs: CutoffSequence | None = None,
    r_K: float = 1.0,
    compact: bool | None = None,
) -> SolvabilityVerdict:
    """Decision tree over the exhaustion ``domains`` (last stage = largest).

    Necessary-condition failures dominate.  Compact data on a hyperbolic
    manifold needs a finite, mesh-stable local dual norm; on a parabolic one
    additionally ``(F, 1) = 0`` and a vanishing cutoff pairing.  Non-compact
    data needs the cover series to converge and, when parabolic, the
    truncated ``(F, 1)`` to vanish along the exhaustion.
    """
    kind = classification.verdict
    checks = []
    evidence = {"classification": kind}
    if kind == INCONCLUSIVE:
        checks.append({"check": "classification", "outcome": "inconclusive", "necessary": False})
        return SolvabilityVerdict(kind, checks, INCONCLUSIVE, evidence)
    if compact is None:
        compact = is_compact(domains, spec)
    evidence["compact"] = compact
    last = domains[-1]
    F_last = spec.on(last)
    b = load_vector(discretize(last), F_last)
    scale = float(np.sum(np.abs(b)))
    if scale == 0.0:
        checks.append({"check": "zero data", "outcome": "pass", "necessary": False})
        return SolvabilityVerdict(kind, checks, SOLVABLE, evidence)
    failed_necessary = False
    undecided = False

    if compact:
        coarse, fine, change = local_dual_norm_stability(domains[0], spec, p, config)
        ok = math.isfinite(coarse.value) and change <= STABILITY_TOL
        checks.append({
            "check": "local dual norm finite and mesh-stable",
            "outcome": "pass" if ok else "fail", "necessary": True,
            "value": coarse.value, "refined": fine.value, "change": change,
        })
        failed_necessary |= not ok
        if kind == PARABOLIC:
            compat = [energy.compatibility(d, spec.on(d)) for d in domains]
            ok_c = abs(compat[-1]) <= COMPAT_TOL * scale
            checks.append({"check": "compatibility (F,1) = 0", "outcome": "pass" if ok_c else "fail",
                           "necessary": True, "value": compat[-1]})
            failed_necessary |= not ok_c
            if cutoffs is not None:
                van = vanishing_pairing_test(cutoffs, spec, r_K)
                checks.append({"check": "cutoff pairing vanishes", "outcome": "pass" if van.passed else "fail",
                               "necessary": not ok_c, "limit": van.limit})
                if not van.passed and ok_c:
                    undecided = True
    else:
        if series is None:
            series = theorem31_series(last, F_last, build_annular_cover(last), p, config)
        ok_s = series.verdict == CONVERGES
        checks.append({"check": "cover series converges", "outcome": series.verdict, "necessary": True,
                       "theta": series.theta, "stderr": series.theta_stderr})
        if series.verdict == DIVERGES:
            failed_necessary = True
        elif not ok_s:
            undecided = True
        if kind == PARABOLIC:
            compat = [energy.compatibility(d, spec.on(d)) for d in domains]
            scales = [float(np.sum(np.abs(load_vector(discretize(d), spec.on(d))))) for d in domains]
            rel = [abs(c) / s if s > 0 else 0.0 for c, s in zip(compat, scales)]
            ok_c = rel[-1] <= COMPAT_TOL
            checks.append({"check": "truncated (F,1) vanishes along the exhaustion",
                           "outcome": "pass" if ok_c else "fail", "necessary": True, "relative": rel})
            failed_necessary |= not ok_c
    if failed_necessary:
        verdict = UNSOLVABLE
    elif undecided:
        verdict = INCONCLUSIVE
    else:
        verdict = SOLVABLE
    return SolvabilityVerdict(kind, checks, verdict, evidence)


# ---------------------------------------------------------------------------
# Direct solves along an exhaustion


@dataclass
class DirectSolveReport:
    outcome: str  # converged | unbounded_below | diverging_energy
    statuses: list
    energies: list
    R: list
    growth: dict
    gauges: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def direct_solve(domains, spec: DataSpec, p: float, config: SolverConfig | None, manifold_type: str) -> DirectSolveReport:
    """Solve on every stage and summarize.

    Hyperbolic stages vanish on the truncation boundary (the zero-extension
    space); parabolic stages leave it free and remove constants with the
    mean-zero gauge when the truncated data is compatible, else run
    ungauged so that an incompatible problem shows as unbounded below.  A
    stage energy that keeps growing along the exhaustion means the
    finite-energy condition fails in the limit.
    """
    base = config or SolverConfig()
    statuses, energies, Rs, gauges = [], [], [], []
    for dom in domains:
        disc = discretize(dom)
        F = spec.on(dom)
        b = load_vector(disc, F)
        scale = float(np.sum(np.abs(b)))
        if manifold_type == HYPERBOLIC:
            cfg = base.with_(p=float(p), gauge="none")
            fixed = {int(k): 0.0 for k in disc.marker_vertices(OUTER)}
        else:
            compatible = abs(math.fsum(b)) <= COMPAT_TOL * max(scale, 1e-300)
            cfg = base.with_(p=float(p), gauge="mean_zero" if compatible else "none")
            fixed = None
        u, rep = minimize_J(dom, F, cfg, fixed=fixed)
        statuses.append(rep.status)
        energies.append(rep.energy)
        Rs.append(float(disc.radius.max()))
        gauges.append(cfg.gauge)
        if rep.status == UNBOUNDED:
            break
    if UNBOUNDED in statuses:
        return DirectSolveReport(UNBOUNDED, statuses, energies, Rs, {}, gauges)
    if any(s != CONVERGED for s in statuses):
        raise SolverError(f"direct solve did not converge: {statuses}")
    idx = np.log2(np.array(Rs))
    growth = growth_exponent(energies, idx) if max(energies) > 0 else {"bounded": True, "exponent": 0.0}
    outcome = CONVERGED if growth["bounded"] else "diverging_energy"
    return DirectSolveReport(outcome, statuses, energies, Rs, growth, gauges)


def consistent(verdict: str, outcome: str) -> bool:
    """Whether a verdict and a direct-solve outcome agree."""
    if verdict == SOLVABLE:
        return outcome == CONVERGED
    if verdict == UNSOLVABLE:
        return outcome in (UNBOUNDED, "diverging_energy")
    return True


__all__ = [
    "DualNormEstimate",
    "SeriesReport",
    "SolvabilityVerdict",
    "VanishingReport",
    "DirectSolveReport",
    "dual_norm",
    "compatibility",
    "local_dual_norm_stability",
    "vanishing_pairing_test",
    "theorem31_series",
    "solvability_verdict",
    "direct_solve",
    "consistent",
    "is_compact",
    "SOLVABLE",
    "UNSOLVABLE",
    "CONVERGES",
    "DIVERGES",
]

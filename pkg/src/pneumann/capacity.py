"""Variational p-capacity, parabolic/hyperbolic classification, cutoff sequences.

``cap_p(K, omega)`` is the minimum of ``int |grad phi|^p`` over P1 fields equal
to one on ``K`` and zero on the truncation boundary.  Along an exhaustion the
capacities either stay away from zero (p-hyperbolic) or decay to zero
(p-parabolic); :func:`classify` turns a finite trend into a verdict.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .discrete import discretize
from .energy import ZERO, SolverConfig, SolveReport, dirichlet_energy, minimize_J
from .errors import InvalidParameterError, SolverError
from .geometry import DATA, OUTER, MetricMesh, RadialModel, _profile_constants, refine, refine_radial
from .optim import CONVERGED

logger = logging.getLogger(__name__)

HYPERBOLIC = "hyperbolic"
PARABOLIC = "parabolic"
INCONCLUSIVE = "inconclusive"

# verdict thresholds (see ClassificationReport.thresholds)
BETA_SPLIT = -0.1
SAT_DISC_FACTOR = 10.0
SAT_AMP_FACTOR = 5.0
PARA_RATIO = 0.2
PARA_R2 = 0.99
BORDER_R2 = 0.999


# ---------------------------------------------------------------------------
# Problems


def _select(domain, rule) -> np.ndarray:
    """Vertex indices selected by a marker name, a radius bound, or explicit ids."""
    disc = discretize(domain)
    if isinstance(rule, str):
        idx = disc.marker_vertices(rule)
        if not len(idx):
            raise InvalidParameterError(f"no vertices carry marker {rule!r}")
        return idx
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        return np.flatnonzero(disc.radius <= float(rule) * (1 + 1e-12))
    if callable(rule):
        return np.flatnonzero(np.asarray(rule(disc.positions), dtype=bool))
    return np.unique(np.asarray(rule, dtype=np.int64))


@dataclass(eq=False)
class CapacityProblem:
    """Condenser ``(K, omega)`` on a truncated domain.

    ``K`` and ``outer`` are selection rules: a boundary marker name, a radius
    bound (vertices with ``|x| <= value``), a predicate on the vertex
    positions, or explicit vertex indices.  Rules other than explicit indices
    are re-applied after refinement.
    """

    domain: MetricMesh | RadialModel
    K: object = DATA
    outer: object = OUTER
    r_K: float | None = None
    K_idx: np.ndarray = field(init=False, repr=False)
    outer_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.K_idx = _select(self.domain, self.K)
        self.outer_idx = _select(self.domain, self.outer)
        if not len(self.K_idx):
            raise InvalidParameterError("K is empty")
        if not len(self.outer_idx):
            raise InvalidParameterError("outer set is empty")
        if np.intersect1d(self.K_idx, self.outer_idx).size:
            raise InvalidParameterError("K and the outer set overlap")
        if self.r_K is None:
            self.r_K = float(discretize(self.domain).radius[self.K_idx].max())

    def fixed(self) -> dict:
        out = {int(i): 1.0 for i in self.K_idx}
        out.update({int(i): 0.0 for i in self.outer_idx})
        return out

    def refined(self) -> "CapacityProblem":
        dom = self.domain
        fine = refine(dom) if isinstance(dom, MetricMesh) else refine_radial(dom)

        def carry(rule):
            if isinstance(rule, (str, int, float)) or callable(rule):
                return rule
            idx = np.asarray(rule, dtype=np.int64)
            # mesh refinement appends vertices; radial refinement interleaves
            return idx if isinstance(dom, MetricMesh) else 2 * idx

        return CapacityProblem(fine, carry(self.K), carry(self.outer), self.r_K)


@dataclass
class CapacityEstimate:
    value: float
    level: int
    report: SolveReport
    field: np.ndarray = field(repr=False)
    eps: float = 0.0
    R: float | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "level": self.level,
            "eps": self.eps,
            "R": self.R,
            "report": self.report.to_dict(),
        }


def capacity_config(p: float, config: SolverConfig | None = None) -> SolverConfig:
    base = config or SolverConfig()
    return base.with_(p=float(p), gauge="none")


def cap_p(problem: CapacityProblem, p: float, config: SolverConfig | None = None, level: int = 0) -> CapacityEstimate:
    """Discrete p-capacity of ``problem`` (energy of the constrained minimizer)."""
    cfg = capacity_config(p, config)
    u, rep = minimize_J(problem.domain, ZERO, cfg, fixed=problem.fixed())
    if rep.status != CONVERGED:
        raise SolverError(f"capacity solve ended with status {rep.status} (rel_grad={rep.rel_grad:.2e})")
    value = dirichlet_energy(problem.domain, u, cfg.p)
    R = float(discretize(problem.domain).radius.max())
    return CapacityEstimate(value=value, level=level, report=rep, field=u, eps=cfg.eps, R=R)


def cap_refinement_ladder(problem: CapacityProblem, p: float, levels: int, config: SolverConfig | None = None):
    """Capacities on ``levels + 1`` nested refinements (level 0 first)."""
    out = []
    prob = problem
    for lvl in range(levels + 1):
        if lvl:
            prob = prob.refined()
        out.append(cap_p(prob, p, config, level=lvl))
    return out


def cap_radial_closed_form(model: RadialModel, p: float, r_K: float, r_out: float) -> float:
    """``(int_{r_K}^{r_out} w^{-1/(p-1)} dr)^{1-p}``.

    Uses the analytic weight ``c r^m`` when the model carries a profile (and
    then ``r_out = inf`` is allowed); otherwise integrates the piecewise-linear
    weight interpolant.
    """
    if not p > 1:
        raise InvalidParameterError("p must exceed 1")
    q = 1.0 / (p - 1.0)
    lo, hi = model.r_min * (1 - 1e-12), model.r_max * (1 + 1e-12)
    if not (r_K < r_out) or r_K < lo:
        raise InvalidParameterError("need r_min <= r_K < r_out")
    if model.profile is not None:
        c, m = _profile_constants(model.profile)
        if math.isfinite(r_out) and r_out > hi:
            raise InvalidParameterError("r_out exceeds the model range")
        e = 1.0 - m * q
        if abs(e) < 1e-14:
            if not math.isfinite(r_out):
                return 0.0
            A = c ** (-q) * math.log(r_out / r_K)
        elif not math.isfinite(r_out):
            if e > 0:
                return 0.0
            A = c ** (-q) * (-(r_K**e)) / e
        else:
            A = c ** (-q) * (r_out**e - r_K**e) / e
        return A ** (1.0 - p)
    if r_out > hi:
        raise InvalidParameterError("r_out exceeds the model range")
    w = model.weight_function()
    pts = model.nodes[(model.nodes > r_K) & (model.nodes < r_out)]
    A, _ = integrate.quad(lambda r: float(w(r)) ** (-q), r_K, r_out, points=pts[:50] if len(pts) else None, limit=500)
    return A ** (1.0 - p)


# ---------------------------------------------------------------------------
# Classification


def _capacity_integral_log(R, r0, beta):
    """``log((R^beta - r0^beta) / beta)`` with the ``beta -> 0`` limit ``log log(R/r0)``."""
    t = np.log(np.asarray(R, dtype=float) / r0)
    if abs(beta) < 1e-9:
        return np.log(t)
    return beta * math.log(r0) + np.log(np.expm1(beta * t) / beta)


def _r2(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - yhat) ** 2))
    if ss_tot <= 1e-300:
        return 1.0 if ss_res <= 1e-300 else 0.0
    return 1.0 - ss_res / ss_tot


def fit_capacity_model(R, cap, r0, beta_bounds=(-3.0, 3.0)) -> dict:
    """Least-squares fit of ``log cap = lc - a log((R^beta - r0^beta)/beta)``.

    This is the exact form of the radial capacity for power-law weights; its
    sign of ``beta`` separates bounded capacity integrals (``beta < 0``) from
    divergent ones.
    """
    R = np.asarray(R, dtype=float)
    y = np.log(np.asarray(cap, dtype=float))

    def resid(theta):
        lc, a, beta = theta
        return lc - a * _capacity_integral_log(R, r0, beta) - y

    best = None
    lo, hi = beta_bounds
    for b0 in np.linspace(lo, hi, 7):
        b0 = float(np.clip(b0, lo + 1e-6, hi - 1e-6))
        try:
            sol = optimize.least_squares(
                resid, x0=[float(y[0]), 1.0, b0], bounds=([-np.inf, 1e-6, lo], [np.inf, 20.0, hi])
            )
        except (ValueError, FloatingPointError):
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    lc, a, beta = best.x
    yhat = y + best.fun
    return {"log_c": float(lc), "a": float(a), "beta": float(beta), "r2": _r2(y, yhat)}


def fit_saturating(R, cap) -> dict:
    """``cap = c_inf + A R^{-b}`` with ``c_inf >= 0``, ``A >= 0``, ``b > 0``."""
    R = np.asarray(R, dtype=float)
    c = np.asarray(cap, dtype=float)
    scale = float(c.max())

    def model(x, cinf, A, b):
        return cinf + A * x ** (-b)

    best = None
    for b0 in (0.25, 0.5, 1.0, 2.0):
        try:
            popt, _ = optimize.curve_fit(
                model, R, c / scale, p0=[float(c[-1] / scale) * 0.5, 1.0, b0],
                bounds=([0.0, 0.0, 1e-3], [np.inf, np.inf, 10.0]), maxfev=20000,
            )
        except (RuntimeError, ValueError):
            continue
        err = float(np.sum((model(R, *popt) - c / scale) ** 2))
        if best is None or err < best[1]:
            best = (popt, err)
    if best is None:
        return {"c_inf": 0.0, "A": float("nan"), "b": float("nan"), "r2": 0.0, "amplitude_at_Rmax": float("nan")}
    cinf, A, b = best[0]
    yhat = model(R, cinf, A, b) * scale
    return {
        "c_inf": float(cinf * scale),
        "A": float(A * scale),
        "b": float(b),
        "r2": _r2(c, yhat),
        "amplitude_at_Rmax": float(A * scale * R[-1] ** (-b)),
    }


def fit_power(R, cap) -> dict:
    """``log cap = log c - b log R``."""
    x = np.log(np.asarray(R, dtype=float))
    y = np.log(np.asarray(cap, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    return {"c": float(math.exp(icpt)), "b": float(-slope), "r2": _r2(y, icpt + slope * x)}


def fit_log_decay(R, cap, r0, n: int) -> dict:
    """``cap = c (ln(R/r0))^{1-n}``, the borderline ``p = n`` decay."""
    x = (1 - n) * np.log(np.log(np.asarray(R, dtype=float) / r0))
    y = np.log(np.asarray(cap, dtype=float))
    lc = float(np.mean(y - x))
    return {"c": math.exp(lc), "exponent": 1 - n, "r2": _r2(y, lc + x)}


@dataclass
class ClassificationReport:
    verdict: str
    p: float
    table: list  # rows {R, cap, eps, iterations}
    fits: dict
    limit: float
    disc_error: float
    thresholds: dict
    reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "p": self.p,
            "table": self.table,
            "fits": self.fits,
            "limit": self.limit,
            "disc_error": self.disc_error,
            "thresholds": self.thresholds,
            "reasons": self.reasons,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R", "cap", "eps", "iterations"])
        for row in self.table:
            w.writerow([repr(row["R"]), repr(row["cap"]), repr(row["eps"]), row["iterations"]])
        return buf.getvalue()


THRESHOLDS = {
    "beta_split": BETA_SPLIT,
    "hyperbolic_limit_over_disc_error": SAT_DISC_FACTOR,
    "hyperbolic_limit_over_amplitude": SAT_AMP_FACTOR,
    "parabolic_ratio": PARA_RATIO,
    "parabolic_r2": PARA_R2,
    "borderline_r2": BORDER_R2,
}


def decide(R, caps, r0: float, disc_error: float, n: int | None = None) -> tuple[str, dict, float, list]:
    """Verdict from a capacity trend ``caps`` at radii ``R``.

    hyperbolic
        the capacity-integral fit has ``beta < beta_split`` and the saturating
        fit limit exceeds both ``10 x`` the discretization error and ``5 x``
        the residual decay amplitude at ``R_max``;
    parabolic
        ``beta >= beta_split``, the decay fit (``beta >= 0``) has
        ``R^2 >= 0.99``, and either ``cap(R_max) < 0.2 cap(R_min)`` or the
        borderline ``(ln R)^{1-n}`` fit has ``R^2 >= 0.999``;
    otherwise inconclusive.
    """
    R = np.asarray(R, dtype=float)
    caps = np.asarray(caps, dtype=float)
    if len(R) < 4:
        raise InvalidParameterError("classification needs at least 4 exhaustion stages")
    if np.any(caps <= 0):
        raise SolverError("non-positive capacity in the trend")
    free_fit = fit_capacity_model(R, caps, r0)
    decay_fit = fit_capacity_model(R, caps, r0, beta_bounds=(0.0, 3.0))
    sat = fit_saturating(R, caps)
    power = fit_power(R, caps)
    fits = {"capacity_integral": free_fit, "decay": decay_fit, "saturating": sat, "power": power}
    if n is not None and n >= 2:
        fits["log_decay"] = fit_log_decay(R, caps, r0, n)
    ratio = float(caps[-1] / caps[0])
    fits["ratio"] = ratio
    reasons = []
    beta = free_fit["beta"]
    limit = sat["c_inf"]
    verdict = INCONCLUSIVE
    if beta < BETA_SPLIT:
        ok_disc = limit > SAT_DISC_FACTOR * disc_error
        ok_amp = limit > SAT_AMP_FACTOR * sat["amplitude_at_Rmax"]
        reasons.append(f"beta={beta:.3f} < {BETA_SPLIT}: bounded capacity integral")
        reasons.append(f"c_inf={limit:.4g} vs disc_error={disc_error:.3g} ({'ok' if ok_disc else 'fails'})")
        reasons.append(f"c_inf vs decay amplitude {sat['amplitude_at_Rmax']:.3g} ({'ok' if ok_amp else 'fails'})")
        if ok_disc and ok_amp:
            verdict = HYPERBOLIC
    else:
        reasons.append(f"beta={beta:.3f} >= {BETA_SPLIT}: divergent capacity integral")
        ok_fit = decay_fit["r2"] >= PARA_R2
        ok_ratio = ratio < PARA_RATIO
        ok_border = "log_decay" in fits and fits["log_decay"]["r2"] >= BORDER_R2
        reasons.append(f"decay fit R^2={decay_fit['r2']:.5f} ({'ok' if ok_fit else 'fails'})")
        reasons.append(f"cap(R_max)/cap(R_min)={ratio:.4f} ({'ok' if ok_ratio else 'above threshold'})")
        if "log_decay" in fits:
            reasons.append(f"log-decay fit R^2={fits['log_decay']['r2']:.6f}")
        if ok_fit and (ok_ratio or ok_border):
            verdict = PARABOLIC
            limit = 0.0
    return verdict, fits, limit, reasons


def _dimension_tag(domain) -> int:
    return domain.n if isinstance(domain, RadialModel) else 2


def classify(
    problems: Sequence[CapacityProblem],
    p: float,
    config: SolverConfig | None = None,
    disc_error: float | None = None,
) -> ClassificationReport:
    """Classify the manifold behind an exhaustion of capacity problems.

    The discretization error is estimated by one refinement of the smallest
    stage unless ``disc_error`` is given.
    """
    problems = list(problems)
    if len(problems) < 4:
        raise InvalidParameterError("classification needs at least 4 exhaustion stages")
    ests = [cap_p(pr, p, config) for pr in problems]
    table = [
        {"R": e.R, "cap": e.value, "eps": e.eps, "iterations": e.report.iterations}
        for e in ests
    ]
    if disc_error is None:
        fine = cap_p(problems[0].refined(), p, config, level=1)
        disc_error = abs(ests[0].value - fine.value)
    r0 = float(problems[0].r_K)
    R = [e.R for e in ests]
    verdict, fits, limit, reasons = decide(
        R, [e.value for e in ests], r0, disc_error, _dimension_tag(problems[0].domain)
    )
    logger.info("classify p=%g: %s (%s)", p, verdict, "; ".join(reasons))
    return ClassificationReport(
        verdict=verdict, p=float(p), table=table, fits=fits, limit=limit,
        disc_error=float(disc_error), thresholds=dict(THRESHOLDS), reasons=reasons,
    )


def radial_exhaustion(n: int, radii, profile="euclidean", lam=None, r_min=1.0, per_octave=8) -> list:
    """Capacity problems ``(B_{r_min}, B_R)`` on radial models of R^n or a cusp."""
    from .geometry import ExhaustionSpec, build_exhaustion

    params = {"n": n, "profile": profile, "r_min": r_min}
    if lam is not None:
        params["lambda"] = lam
    models = build_exhaustion(ExhaustionSpec("radial", radii, params, per_octave))
    return [CapacityProblem(m, DATA, OUTER, r_K=r_min) for m in models]


# ---------------------------------------------------------------------------
# Cutoff sequences


@dataclass
class CutoffSequence:
    domains: list
    fields: list
    energies: list
    K: list

    def to_dict(self) -> dict:
        return {"energies": self.energies, "R": [float(discretize(d).radius.max()) for d in self.domains]}


def build_cutoffs(problems: Sequence[CapacityProblem], p: float, config: SolverConfig | None = None) -> CutoffSequence:
    """``eta_s``: stage capacity minimizers clamped to ``[0, 1]`` and exactly one on K."""
    domains, fields, energies, Ks = [], [], [], []
    for pr in problems:
        est = cap_p(pr, p, config)
        eta = np.clip(est.field, 0.0, 1.0)
        eta[pr.K_idx] = 1.0
        domains.append(pr.domain)
        fields.append(eta)
        energies.append(dirichlet_energy(pr.domain, eta, p))
        Ks.append(pr.K_idx)
    return CutoffSequence(domains, fields, energies, Ks)


# ---------------------------------------------------------------------------
# Monotonicity and semi-additivity


@dataclass
class PropertiesReport:
    trials: int
    monotonicity_violations: int
    subadditivity_violations: int
    worst_monotonicity: float
    worst_subadditivity: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.monotonicity_violations == 0 and self.subadditivity_violations == 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def _cap_sets(domain, K, outer, p, config) -> float:
    prob = CapacityProblem(domain, np.asarray(sorted(K)), np.asarray(sorted(outer)))
    return cap_p(prob, p, config).value


def capacity_properties_check(
    domain,
    trials: int,
    p: float,
    config: SolverConfig | None = None,
    seed: int = 0,
    tol: float = 1e-6,
) -> PropertiesReport:
    """Random checks of domain monotonicity and semi-additivity of ``cap_p``.

    Each trial draws ``K_1 subset K_2`` and ``omega_2 subset omega_1`` (the
    second outer set is larger) and checks ``cap(K_1, omega_1) <= cap(K_2,
    omega_2)``; then draws ``K_a, K_b`` and checks ``cap(K_a u K_b) <=
    cap(K_a) + cap(K_b)``.  Violations are relative to the larger side.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    disc = discretize(domain)
    outer0 = set(int(i) for i in disc.marker_vertices(OUTER))
    interior = np.array(sorted(set(range(disc.n)) - outer0))
    n_mono = n_sub = 0
    worst_mono = worst_sub = 0.0
    for _ in range(trials):
        k2 = rng.choice(interior, size=rng.integers(2, max(3, len(interior) // 4)), replace=False)
        k1 = rng.choice(k2, size=rng.integers(1, len(k2)), replace=False)
        rest = np.setdiff1d(interior, k2)
        extra = rng.choice(rest, size=rng.integers(0, max(1, len(rest) // 4)), replace=False) if len(rest) else []
        c1 = _cap_sets(domain, set(k1.tolist()), outer0, p, config)
        c2 = _cap_sets(domain, set(k2.tolist()), outer0 | set(int(i) for i in extra), p, config)
        v = (c1 - c2) / max(abs(c2), 1e-300)
        worst_mono = max(worst_mono, v)
        n_mono += v > tol
        ka = set(rng.choice(interior, size=rng.integers(1, 6), replace=False).tolist())
        kb = set(rng.choice(interior, size=rng.integers(1, 6), replace=False).tolist())
        ca = _cap_sets(domain, ka, outer0, p, config)
        cb = _cap_sets(domain, kb, outer0, p, config)
        cab = _cap_sets(domain, ka | kb, outer0, p, config)
        v = (cab - ca - cb) / max(ca + cb, 1e-300)
        worst_sub = max(worst_sub, v)
        n_sub += v > tol
    return PropertiesReport(trials, int(n_mono), int(n_sub), float(worst_mono), float(worst_sub), tol)


__all__ = [
    "CapacityProblem",
    "CapacityEstimate",
    "ClassificationReport",
    "CutoffSequence",
    "PropertiesReport",
    "cap_p",
    "cap_refinement_ladder",
    "cap_radial_closed_form",
    "classify",
    "decide",
    "build_cutoffs",
    "capacity_properties_check",
    "radial_exhaustion",
    "fit_capacity_model",
    "fit_saturating",
    "fit_power",
    "fit_log_decay",
    "HYPERBOLIC",
    "PARABOLIC",
    "INCONCLUSIVE",
]

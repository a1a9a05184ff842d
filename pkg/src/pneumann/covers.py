"""Dyadic annular covers, partitions of unity, the weight gamma, and the
summability conditions built from them.

The cover is ``Omega_1 = {|x| < 4}``, ``Omega_i = {2^(i-1) < |x| < 2^(i+1)}``
(cell membership by centroid radius).  Conditions of hyperbolic type use
prefix sums of ``int_{Omega_j} gamma``; those of parabolic type use suffix
sums, which on a truncated domain are necessarily truncated.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .discrete import Discretization, connected_cells, discretize
from .errors import InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass
class Cover:
    domain: object
    pieces: list  # cell index arrays, pieces[0] is Omega_1
    bands: list  # (lo, hi) radii; lo = 0 for the first piece
    multiplicity: int
    overlaps: list  # Omega_i and Omega_{i+1} share a cell or vertex

    @property
    def m(self) -> int:
        return len(self.pieces)

    def pair(self, i: int) -> np.ndarray:
        """Cells of ``Omega_i u Omega_{i+1}`` (0-based ``i``)."""
        if self.m == 1:
            return self.pieces[0]
        return np.union1d(self.pieces[i], self.pieces[i + 1])

    def n_pairs(self) -> int:
        return max(self.m - 1, 1)

    def to_dict(self) -> dict:
        return {
            "bands": [list(b) for b in self.bands],
            "multiplicity": self.multiplicity,
            "sizes": [int(len(p)) for p in self.pieces],
            "overlaps": self.overlaps,
        }


def build_annular_cover(domain, base: float = 4.0, ratio: float = 2.0, min_bands: int = 3) -> Cover:
    """``Omega_1 = {|x| < base}``, ``Omega_i = {u r^(i-1) < |x| < u r^(i+1)}``, ``u = base / r^2``."""
    if not (base > 0 and ratio > 1):
        raise InvalidParameterError("need base > 0 and ratio > 1")
    disc = discretize(domain)
    rc = disc.cell_radius
    r_max = float(disc.radius.max())
    unit = base / ratio**2
    pieces, bands = [], []
    sel = np.flatnonzero(rc < base)
    if len(sel):
        pieces.append(sel)
        bands.append((0.0, base))
    i = 2
    while unit * ratio ** (i - 1) < r_max * (1 - 1e-12):
        lo, hi = unit * ratio ** (i - 1), unit * ratio ** (i + 1)
        sel = np.flatnonzero((rc > lo) & (rc < hi))
        if len(sel):
            pieces.append(sel)
            bands.append((lo, hi))
        i += 1
    if len(pieces) < min_bands:
        raise InvalidParameterError(
            f"domain radius {r_max:g} covers {len(pieces)} dyadic bands; at least {min_bands} are required"
        )
    count = np.zeros(disc.n_cells, dtype=int)
    for pc in pieces:
        count[pc] += 1
    if np.any(count == 0):
        raise InvalidParameterError("cover misses some cells (centroid on a band edge)")
    overlaps = []
    for a, b in zip(pieces, pieces[1:]):
        va = np.unique(disc.cells[a].ravel())
        vb = np.unique(disc.cells[b].ravel())
        overlaps.append(bool(np.intersect1d(va, vb).size))
    return Cover(domain, pieces, bands, int(count.max()), overlaps)


# ---------------------------------------------------------------------------
# Partition of unity and gamma


def cell_gradients(disc: Discretization, u: np.ndarray) -> np.ndarray:
    """Per-cell metric gradient norm ``|grad u|`` of a nodal field."""
    g = np.einsum("mkd,mk->md", disc.grads, u[disc.cells])
    return np.sqrt(np.einsum("md,md->m", g, g))


@dataclass
class PartitionOfUnity:
    cover: Cover
    psi: np.ndarray  # (m, n_vertices)
    grad_norms: np.ndarray  # (m, n_cells)

    def calibration_bound(self, p: float) -> float:
        """``max_i max_cells |grad psi_i|^p (1 + |x|)^p``."""
        disc = discretize(self.cover.domain)
        w = (1.0 + disc.cell_radius) ** p
        return float(np.max(self.grad_norms**p * w[None, :]))


def build_partition(cover: Cover) -> PartitionOfUnity:
    """Hat profiles in ``log2 |x|`` (one per band), cut to their pieces and normalized.

    ``psi_1 = 1`` on ``|x| <= base/2`` and falls linearly in ``log |x|`` to zero
    at ``base``; ``psi_i`` (i >= 2) rises from the lower band edge to the band
    centre and falls to the upper edge.
    """
    disc = discretize(cover.domain)
    r = np.maximum(disc.radius, 1e-300)
    m = cover.m
    raw = np.zeros((m, disc.n))
    for i, (lo, hi) in enumerate(cover.bands):
        if lo == 0.0:
            mid = hi / 2.0
            raw[i] = np.clip(np.log(hi / r) / math.log(hi / mid), 0.0, 1.0)
        else:
            mid = math.sqrt(lo * hi)
            up = np.log(r / lo) / math.log(mid / lo)
            down = np.log(hi / r) / math.log(hi / mid)
            raw[i] = np.clip(np.minimum(up, down), 0.0, 1.0)
        # vertices touching cells outside the piece must carry zero
        inside = np.zeros(disc.n_cells, dtype=bool)
        inside[cover.pieces[i]] = True
        touch_out = np.zeros(disc.n, dtype=bool)
        touch_out[disc.cells[~inside].ravel()] = True
        raw[i, touch_out] = 0.0
    total = raw.sum(axis=0)
    if np.any(total <= 0):
        bad = int(np.sum(total <= 0))
        raise InvalidParameterError(f"partition of unity degenerates at {bad} vertices; refine the mesh")
    psi = raw / total
    grads = np.stack([cell_gradients(disc, psi[i]) for i in range(m)])
    return PartitionOfUnity(cover, psi, grads)


@dataclass
class WeightGamma:
    values: np.ndarray  # per cell
    c: float
    exponent: float
    p: float

    def violations(self, partition: PartitionOfUnity, rel: float = 0.0) -> int:
        """Number of (i, cell) with ``|grad psi_i|^p > gamma``."""
        lhs = partition.grad_norms**self.p
        return int(np.sum(lhs > self.values[None, :] * (1.0 + rel)))


def gamma_default(domain, p: float, partition: PartitionOfUnity, exponent: float | None = None) -> WeightGamma:
    """``gamma = c (1 + |x|)^exponent`` (default ``-p``), ``c`` the smallest value
    for which the partition-gradient bound holds on every cell.

    ``c`` is rounded up by one part in 10^12 so the cellwise check is immune to
    the last-bit rounding of the product.
    """
    disc = discretize(domain)
    e = -float(p) if exponent is None else float(exponent)
    shape = (1.0 + disc.cell_radius) ** e
    c = float(np.max(partition.grad_norms**p / shape[None, :])) * (1.0 + 1e-12)
    return WeightGamma(c * shape, c, e, float(p))


def gamma_constant(domain, value: float = 1.0, p: float = 2.0) -> WeightGamma:
    disc = discretize(domain)
    return WeightGamma(np.full(disc.n_cells, float(value)), float(value), 0.0, float(p))


def piece_integrals(cover: Cover, gamma: WeightGamma) -> np.ndarray:
    disc = discretize(cover.domain)
    return np.array([math.fsum(gamma.values[pc] * disc.vol[pc]) for pc in cover.pieces])


# ---------------------------------------------------------------------------
# Poincare constants


def _edge_graph(disc: Discretization, cells: np.ndarray):
    c = disc.cells[cells]
    k = c.shape[1]
    rows, cols = [], []
    for a in range(k):
        for b in range(a + 1, k):
            rows.append(c[:, a])
            cols.append(c[:, b])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    d = np.linalg.norm(disc.positions[rows] - disc.positions[cols], axis=1)
    A = coo_matrix((d, (rows, cols)), shape=(disc.n, disc.n)).tocsr()
    return A


def intrinsic_diameter(disc: Discretization, cells: np.ndarray, sources: int = 32, seed: int = 0) -> float:
    """Longest edge-path distance found from a double sweep plus sampled sources."""
    A = _edge_graph(disc, cells)
    verts = np.unique(disc.cells[cells].ravel())
    rng = np.random.default_rng(seed)
    start = [int(verts[0])]
    dist = dijkstra(A, directed=False, indices=start[0])
    far = int(verts[np.argmax(dist[verts])])
    srcs = [far] + rng.choice(verts, size=min(sources, len(verts)), replace=False).tolist()
    D = dijkstra(A, directed=False, indices=srcs)
    return float(np.max(D[:, verts][np.isfinite(D[:, verts])]))


def _cell_abs_integral(disc: Discretization, cells, v: np.ndarray) -> np.ndarray:
    """``int_cell |v|`` for a P1 field, by 4-point subdivision quadrature."""
    c = disc.cells[cells]
    vals = v[c]
    k = c.shape[1]
    if k == 2:
        a, b = vals[:, 0], vals[:, 1]
        pts = [a, 0.75 * a + 0.25 * b, 0.5 * (a + b), 0.25 * a + 0.75 * b, b]
        wts = [1 / 12, 1 / 3, 1 / 6, 1 / 3, 1 / 12]  # composite Simpson on two halves
    else:
        a, b, d = vals[:, 0], vals[:, 1], vals[:, 2]
        ab, bd, da = 0.5 * (a + b), 0.5 * (b + d), 0.5 * (d + a)
        # centroids of the four midpoint sub-triangles
        pts = [(a + ab + da) / 3, (ab + b + bd) / 3, (da + bd + d) / 3, (ab + bd + da) / 3]
        wts = [0.25] * 4
    return disc.vol[cells] * sum(w * np.abs(p) for w, p in zip(wts, pts))


def poincare_ratio(disc: Discretization, cells, gamma_cells: np.ndarray, p: float, u: np.ndarray) -> float:
    """``int gamma |u - u_bar| / int gamma^(1-1/p) |grad u|`` with ``u_bar`` the
    gamma-weighted mean of ``u`` over the cells."""
    cells = np.asarray(cells)
    vol = disc.vol[cells]
    ucell = u[disc.cells[cells]].mean(axis=1)
    ubar = float(np.sum(gamma_cells * vol * ucell) / np.sum(gamma_cells * vol))
    num = float(np.sum(gamma_cells * _cell_abs_integral(disc, cells, u - ubar)))
    den = float(np.sum(gamma_cells ** (1.0 - 1.0 / p) * vol * _gradnorm_cells(disc, cells, u)))
    if den <= 0:
        return 0.0
    return num / den


def _gradnorm_cells(disc, cells, u):
    g = np.einsum("mkd,mk->md", disc.grads[cells], u[disc.cells[cells]])
    return np.sqrt(np.einsum("md,md->m", g, g))


def _test_family(disc: Discretization, verts: np.ndarray, samples: int, rng) -> list:
    X = disc.positions
    r = disc.radius
    fam = []
    if X.shape[1] == 2:
        fam += [X[:, 0].copy(), X[:, 1].copy()]
    fam += [r.copy(), np.log(np.maximum(r, 1e-300))]
    rv = r[verts]
    lo, hi = float(rv.min()), float(rv.max())
    for t in np.linspace(0.1, 0.9, 5):
        cut = lo + t * (hi - lo)
        fam.append(np.clip((r - cut) / max(hi - lo, 1e-300), -1, 1))
    scale = np.ptp(X[verts], axis=0)
    scale[scale == 0] = 1.0
    while len(fam) < samples:
        k = rng.normal(size=X.shape[1]) * rng.uniform(0.5, 4.0) / scale
        ph = rng.uniform(0, 2 * np.pi)
        fam.append(np.sin(X @ k + ph) + 0.3 * rng.normal() * (X @ (rng.normal(size=X.shape[1]) / scale)))
    return fam[:samples]


@dataclass
class PoincareEstimate:
    lower: float
    upper: float
    best: str
    diameter: float
    upper_strict: float = float("nan")


def poincare_constant(
    domain,
    cells,
    gamma: WeightGamma,
    p: float,
    samples: int = 200,
    seed: int = 0,
) -> PoincareEstimate:
    """Bracket the weighted L1 Poincare constant on ``cells``.

    ``lower`` is the largest ratio over a test family (coordinates, radial
    ramps, random smooth fields).  ``upper`` is the one-dimensional transport
    scale ``diam * sup(gamma)^(1/p)`` over the intrinsic diameter of the cell
    set.  ``upper_strict`` multiplies it by ``(sup gamma / inf gamma)^(1-1/p)``,
    the factor a comparison with the unweighted inequality costs; both agree
    for constant ``gamma``.
    """
    disc = discretize(domain)
    cells = np.asarray(cells)
    if connected_cells(disc, cells) != 1:
        raise InvalidParameterError("Poincare constant requested on a disconnected cell set")
    g = gamma.values[cells]
    verts = np.unique(disc.cells[cells].ravel())
    rng = np.random.default_rng(seed)
    best, tag = 0.0, ""
    for k, u in enumerate(_test_family(disc, verts, samples, rng)):
        if np.ptp(u[verts]) == 0:
            continue  # constants are excluded by convention
        v = poincare_ratio(disc, cells, g, p, u)
        if v > best:
            best, tag = v, str(k)
    diam = intrinsic_diameter(disc, cells, seed=seed)
    upper = diam * float(g.max()) ** (1.0 / p)
    strict = upper * (float(g.max()) / float(g.min())) ** (1.0 - 1.0 / p)
    return PoincareEstimate(best, upper, tag, diam, strict)


def poincare_constants(cover: Cover, gamma: WeightGamma, p: float, samples: int = 200, seed: int = 0) -> list:
    return [poincare_constant(cover.domain, cover.pair(i), gamma, p, samples, seed + i) for i in range(cover.n_pairs())]


# ---------------------------------------------------------------------------
# Conditions


def _fit_exp_trend(i: np.ndarray, v: np.ndarray):
    """Best ``v = a + b 2^(kappa i)`` over a grid of ``kappa`` refined by bounded search."""
    from scipy.optimize import minimize_scalar

    def sse(k):
        if abs(k) < 1e-6:
            X = np.column_stack([np.ones_like(i), i])
        else:
            X = np.column_stack([np.ones_like(i), 2.0 ** (k * i)])
        c, *_ = np.linalg.lstsq(X, v, rcond=None)
        return float(np.sum((X @ c - v) ** 2)), c

    grid = np.linspace(-2.0, 2.0, 81)
    errs = [sse(k)[0] for k in grid]
    k0 = int(np.argmin(errs))
    lo, hi = grid[max(k0 - 1, 0)], grid[min(k0 + 1, len(grid) - 1)]
    res = minimize_scalar(lambda k: sse(k)[0], bounds=(lo, hi), method="bounded")
    k = float(res.x) if res.fun <= errs[k0] else float(grid[k0])
    return k, sse(k)[1]


def growth_exponent(values, index=None) -> dict:
    """Asymptotic dyadic growth exponent of a positive sequence.

    Fits ``v_i = a + b 2^(kappa i)``; the sequence grows without bound only if
    ``kappa > 0`` and ``b > 0``, so the reported exponent is ``kappa`` in that
    case and ``-|kappa|`` otherwise.  ``bounded`` means the exponent is not
    positive beyond twice its leave-one-out (jackknife) standard error.  With
    fewer than four values the plain log-linear slope is used.
    """
    v = np.asarray(values, dtype=float)
    i = np.arange(1, len(v) + 1, dtype=float) if index is None else np.asarray(index, dtype=float)
    ok = v > 0
    x, y = i[ok], v[ok]
    out = {"n": int(len(x))}
    if len(x) >= 2:
        out["loglinear_slope"] = float(np.polyfit(x, np.log2(y), 1)[0])
    if len(x) < 4:
        s = out.get("loglinear_slope", 0.0)
        out.update(exponent=s, stderr=float("nan"), bounded=bool(s <= 0.0))
        return out

    def signed(xx, yy):
        k, c = _fit_exp_trend(xx, yy)
        return (k if (k > 0 and c[1] > 0) else -abs(k)), k, c

    e, k, c = signed(x, y)
    jack = [signed(np.delete(x, j), np.delete(y, j))[0] for j in range(len(x))] if len(x) >= 5 else []
    se = float(np.sqrt((len(jack) - 1) / len(jack) * np.sum((np.array(jack) - np.mean(jack)) ** 2))) if jack else 0.0
    out.update(
        exponent=float(e), kappa=float(k), limit=float(c[0]), amplitude=float(c[1]),
        stderr=se, bounded=bool(e <= 2.0 * se),
    )
    return out


@dataclass
class CoverConditionReport:
    kind: str  # "prefix" (hyperbolic type) or "suffix" (parabolic type)
    integrals: list
    sums: list
    C_low: list
    C_high: list
    values: list
    sup: float
    growth: dict
    truncated: bool = True
    notes: list = field(default_factory=list)

    @property
    def bounded(self) -> bool:
        return bool(self.growth.get("bounded", False))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["bounded"] = self.bounded
        return d

    def to_csv(self, other: "CoverConditionReport | None" = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "int_gamma", "S_i", "C_i_low", "C_i_high", "value32", "value33"])
        v32 = self.values if self.kind == "prefix" else (other.values if other else [None] * len(self.values))
        v33 = self.values if self.kind == "suffix" else (other.values if other else [None] * len(self.values))
        for k in range(len(self.values)):
            w.writerow([k + 1, self.integrals[k], self.sums[k], self.C_low[k], self.C_high[k], v32[k], v33[k]])
        return buf.getvalue()


def _constants(constants):
    low = [c.lower if isinstance(c, PoincareEstimate) else float(c) for c in constants]
    high = [c.upper if isinstance(c, PoincareEstimate) else float(c) for c in constants]
    return low, high


def _condition(cover: Cover, gamma: WeightGamma, constants, kind: str, fit_upto: int | None = None) -> CoverConditionReport:
    I = piece_integrals(cover, gamma)
    npairs = cover.n_pairs()
    if constants is None or len(constants) < npairs:
        raise InvalidParameterError(f"need {npairs} Poincare constants, got {0 if constants is None else len(constants)}")
    low, high = _constants(constants[:npairs])
    vals, sums = [], []
    for i in range(npairs):
        j = min(i + 1, cover.m - 1)
        recip = 1.0 / I[i] + 1.0 / I[j]
        if kind == "prefix":
            S = math.fsum(I[: i + 1])
        else:
            S = math.fsum(I[i + 1 :])
        sums.append(S)
        vals.append(high[i] * recip * S)
    v = [x for x in vals if x > 0]
    upto = len(vals) if fit_upto is None else fit_upto
    if kind == "suffix":
        upto = min(upto, len(vals) - 1)  # the last suffix sums are cut by truncation
    growth = growth_exponent(vals[:upto] or vals)
    notes = ["sup over the available pieces only"]
    if kind == "suffix":
        notes.append("suffix sums truncated at the outer boundary; the last values are biased low")
    return CoverConditionReport(
        kind=kind, integrals=I.tolist(), sums=sums, C_low=low, C_high=high, values=vals,
        sup=float(max(v) if v else 0.0), growth=growth, truncated=True, notes=notes,
    )


def condition32_evaluate(cover: Cover, gamma: WeightGamma, constants, fit_upto: int | None = None) -> CoverConditionReport:
    """Hyperbolic-type condition: ``C_i (1/int_i gamma + 1/int_{i+1} gamma) sum_{j<=i} int_j gamma``.

    ``fit_upto`` limits the growth fit to the first pairs (e.g. to leave out
    pairs cut by the truncation boundary).
    """
    return _condition(cover, gamma, constants, "prefix", fit_upto)


def condition33_evaluate(cover: Cover, gamma: WeightGamma, constants, fit_upto: int | None = None) -> CoverConditionReport:
    """Parabolic-type condition: as above with the suffix sums ``sum_{j>=i+1} int_j gamma``."""
    return _condition(cover, gamma, constants, "suffix", fit_upto)


# ---------------------------------------------------------------------------
# Hardy-type embedding check


@dataclass
class HardyReport:
    trials: int
    C_emp: float
    C_emp_refined: float | None
    stable: bool | None
    vanish_on_first: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _random_compact_fields(X, r, r_cut, n, rng, r_zero=None):
    scale = max(float(np.ptp(X)), 1e-300)
    out = []
    for _ in range(n):
        k = rng.normal(size=(3, X.shape[1])) * rng.uniform(0.5, 6.0) / scale
        ph = rng.uniform(0, 2 * np.pi, size=3)
        a = rng.normal(size=3)
        base = sum(a[j] * np.sin(X @ k[j] + ph[j]) for j in range(3)) + rng.normal()
        R0 = r_cut * rng.uniform(0.3, 1.0)
        cut = np.clip((R0 - r) / (0.25 * R0), 0.0, 1.0)
        if r_zero is not None:
            cut = cut * np.clip((r - r_zero) / r_zero, 0.0, 1.0)
        out.append(base * cut)
    return out


def _hardy_max(disc, gamma_vals, p, fields, outer_v) -> float:
    best = 0.0
    for phi in fields:
        phi = phi.copy()
        phi[outer_v] = 0.0
        num = float(np.sum(gamma_vals * disc.vol * np.mean(np.abs(phi[disc.cells]) ** p, axis=1)))
        den = float(np.sum(disc.vol * _gradnorm_cells(disc, np.arange(disc.n_cells), phi) ** p))
        if den > 0 and num > 0:
            best = max(best, num / den)
    return best


def hardy_check(
    domain,
    gamma_fn,
    p: float,
    trials: int = 500,
    seed: int = 0,
    refined=None,
    vanish_radius: float | None = None,
) -> HardyReport:
    """Empirical ``max int gamma |phi|^p / int |grad phi|^p`` over random fields
    supported away from the truncation boundary.

    ``gamma_fn(domain)`` returns per-cell weights, so the same analytic fields
    can be evaluated on ``refined`` for the stability check.  With
    ``vanish_radius`` the fields also vanish for ``|x| <= vanish_radius``.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    from .geometry import OUTER

    def run(dom):
        disc = discretize(dom)
        rng = np.random.default_rng(seed)
        fields = _random_compact_fields(disc.positions, disc.radius, float(disc.radius.max()), trials, rng, vanish_radius)
        return _hardy_max(disc, np.asarray(gamma_fn(dom)), p, fields, disc.marker_vertices(OUTER))

    c0 = run(domain)
    c1 = run(refined) if refined is not None else None
    stable = None if c1 is None else bool(abs(c1 - c0) <= 0.2 * max(c0, c1))
    return HardyReport(trials, c0, c1, stable, vanish_radius is not None)


__all__ = [
    "Cover",
    "PartitionOfUnity",
    "WeightGamma",
    "PoincareEstimate",
    "CoverConditionReport",
    "HardyReport",
    "build_annular_cover",
    "build_partition",
    "gamma_default",
    "gamma_constant",
    "piece_integrals",
    "poincare_ratio",
    "poincare_constant",
    "poincare_constants",
    "condition32_evaluate",
    "condition33_evaluate",
    "growth_exponent",
    "hardy_check",
    "cell_gradients",
]

import math

import numpy as np
import pytest

from pneumann.capacity import build_cutoffs, classify, radial_exhaustion
from pneumann.covers import build_annular_cover
from pneumann.diagnostics import (
    CONVERGES,
    SOLVABLE,
    UNSOLVABLE,
    compatibility,
    consistent,
    direct_solve,
    dual_norm,
    local_dual_norm_stability,
    solvability_verdict,
    theorem31_series,
    vanishing_pairing_test,
)
from pneumann.discrete import discretize
from pneumann.energy import DataSpec, FunctionalData, boundary_density, load_vector
from pneumann.errors import InvalidParameterError
from pneumann.geometry import FREE, OUTER, ExhaustionSpec, build_annulus_mesh, build_exhaustion
from pneumann.reproduce import example32_threshold


def _stiffness(d):
    import scipy.sparse as sp

    rows, cols, vals = [], [], []
    k = d.cells.shape[1]
    for a in range(k):
        for b in range(k):
            rows.append(d.cells[:, a])
            cols.append(d.cells[:, b])
            vals.append(d.vol * np.einsum("md,md->m", d.grads[:, a], d.grads[:, b]))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(d.n, d.n))


def _cos_data(mesh, shift=0.0):
    return boundary_density(mesh, lambda x, y: shift + np.cos(np.arctan2(y, x)))


@pytest.fixture(scope="module")
def free_annulus():
    return build_annulus_mesh(1.0, 4.0, 8, 32, outer=FREE)


@pytest.fixture(scope="module")
def doms_2_16():
    return build_exhaustion(ExhaustionSpec("annulus", [2.0, 4.0, 8.0, 16.0], {"n_angular": 32, "outer": OUTER}, 6))


def test_zero_data_has_zero_norm(annulus):
    d = discretize(annulus)
    e = dual_norm(annulus, FunctionalData(np.zeros(d.n_cells), None), None, 3.0)
    assert e.value == 0.0


def test_p2_norm_matches_linear_solve(annulus):
    # ||F||_*^2 = b^T A^{-1} b on the vertices off the zero-extension frontier
    import scipy.sparse.linalg as spl

    d = discretize(annulus)
    F = _cos_data(annulus, 1.0)
    b = load_vector(d, F)
    free = np.setdiff1d(np.arange(d.n), d.marker_vertices(OUTER))
    A = _stiffness(d)
    oracle = math.sqrt(b[free] @ spl.spsolve(A[free][:, free].tocsc(), b[free]))
    assert oracle == pytest.approx(3.372415627644169, rel=1e-12)  # frozen oracle value
    e = dual_norm(annulus, F, None, 2.0, samples=200)
    assert e.value == pytest.approx(oracle, rel=1e-6)
    assert e.duality_gap <= 1e-6
    assert e.lower_bound <= e.value * (1 + 1e-9)
    assert e.lower_bound >= 0.9 * e.value  # perturbations of the maximizer come close


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_homogeneity_and_triangle(annulus, p):
    F = _cos_data(annulus, 0.5)
    G = FunctionalData(None, np.asarray(_cos_data(annulus).h) ** 2)
    e = dual_norm(annulus, F, None, p, samples=0).value
    for lam in (0.25, 4.0):
        el = dual_norm(annulus, FunctionalData(None, lam * np.asarray(F.h)), None, p, samples=0).value
        assert el == pytest.approx(lam * e, rel=1e-8)
    eg = dual_norm(annulus, G, None, p, samples=0).value
    esum = dual_norm(annulus, FunctionalData(None, np.asarray(F.h) + np.asarray(G.h)), None, p, samples=0).value
    assert esum <= e + eg + 1e-8


def test_restriction_to_subset(annulus):
    d = discretize(annulus)
    F = _cos_data(annulus)
    inner = np.flatnonzero(d.cell_radius < 2.0)
    e_sub = dual_norm(annulus, F, inner, 2.0, samples=0)
    e_all = dual_norm(annulus, F, None, 2.0, samples=0)
    assert e_sub.n_frontier > 0 and e_sub.n_cells == len(inner)
    # fewer admissible fields on the subset
    assert e_sub.value <= e_all.value * (1 + 1e-9)


def test_disconnected_subset_rejected(annulus):
    d = discretize(annulus)
    cells = np.flatnonzero((d.cell_radius < 1.5) | (d.cell_radius > 3.5))
    with pytest.raises(InvalidParameterError):
        dual_norm(annulus, _cos_data(annulus), cells, 2.0)


def test_no_frontier_uses_compatibility(free_annulus):
    inc = dual_norm(free_annulus, _cos_data(free_annulus, 1.0), None, 2.0)
    assert math.isinf(inc.value) and inc.status == "unbounded_below"
    ok = dual_norm(free_annulus, _cos_data(free_annulus), None, 2.0, samples=50)
    assert math.isfinite(ok.value) and ok.duality_gap <= 1e-6


def test_compatibility_values(free_annulus):
    # inner perimeter of the equal-area polygon (not exactly 2 pi) with the outward sign convention
    perim = float(np.sum(discretize(free_annulus).facet_measure[discretize(free_annulus).data_facets]))
    assert compatibility(free_annulus, _cos_data(free_annulus, 1.0)) == pytest.approx(-perim, rel=1e-12)
    assert abs(compatibility(free_annulus, _cos_data(free_annulus))) <= 1e-12


def test_local_stability_under_refinement(annulus):
    spec = DataSpec(h=lambda P: 1.0 + P[:, 0] / np.hypot(P[:, 0], P[:, 1]))
    coarse, fine, change = local_dual_norm_stability(annulus, spec, 2.0)
    assert change <= 0.05 and coarse.value > 0 and fine.value > 0


# ---------------------------------------------------------------------------
# cutoff pairing


@pytest.fixture(scope="module")
def parabolic_cutoffs():
    return build_cutoffs(radial_exhaustion(2, [2.0**k for k in range(1, 9)]), 2.0)


def test_vanishing_pairing(parabolic_cutoffs):
    first = discretize(parabolic_cutoffs.domains[0])
    small = first.cell_radius < 1.5
    area = float(np.sum(first.vol[small]))
    circ = 2 * math.pi  # inner facet measure of the radial model
    balanced = DataSpec(f=lambda P: (P[:, 0] < 1.5) * circ / area, h=lambda P: np.ones(len(P)))
    incompatible = DataSpec(h=lambda P: np.ones(len(P)))
    zero = DataSpec(h=lambda P: np.zeros(len(P)))
    assert vanishing_pairing_test(parabolic_cutoffs, balanced).passed
    bad = vanishing_pairing_test(parabolic_cutoffs, incompatible)
    assert not bad.passed and abs(bad.limit) > 0.5 * circ
    z = vanishing_pairing_test(parabolic_cutoffs, zero)
    assert z.passed and z.limit == 0.0


# ---------------------------------------------------------------------------
# cover series


def test_series_single_piece_converges():
    mesh = build_annulus_mesh(1.0, 64.0, 36, 24)
    F = _cos_data(mesh)
    ser = theorem31_series(mesh, F, build_annular_cover(mesh), 2.0)
    assert ser.verdict == CONVERGES
    assert all(v == 0.0 for v in ser.norms[2:])
    assert ser.partial_sums[-1] == pytest.approx(ser.norms[0] ** 2 + ser.norms[1] ** 2)
    assert ser.to_csv().splitlines()[0] == "i,dual_norm,partial_sum"


def test_cusp_density_threshold():
    # -(lam n (p-1)/p + (1-lam)(2 - 1/p)) at lam = 3/4, p = 3/2, n = 2
    assert example32_threshold(0.75, 1.5) == pytest.approx(-5.0 / 6.0, rel=1e-15)
    assert example32_threshold(1.0, 2.0, n=3) == pytest.approx(-1.5)


# ---------------------------------------------------------------------------
# verdicts and direct solves


def test_exterior_ball_verdicts(doms_2_16):
    h1 = DataSpec(h=lambda P: np.ones(len(P)))
    radii = [2.0**k for k in range(1, 9)]
    par = classify(radial_exhaustion(2, radii), 2.0)
    hyp = classify(radial_exhaustion(2, radii), 1.5)
    assert par.verdict == "parabolic" and hyp.verdict == "hyperbolic"
    v2 = solvability_verdict(doms_2_16, h1, 2.0, None, par, compact=True)
    assert v2.verdict == UNSOLVABLE
    assert any(c["check"].startswith("compatibility") and c["outcome"] == "fail" for c in v2.checks)
    v15 = solvability_verdict(doms_2_16, h1, 1.5, None, hyp, compact=True)
    assert v15.verdict == SOLVABLE
    zero = DataSpec(h=lambda P: np.zeros(len(P)))
    assert solvability_verdict(doms_2_16, zero, 2.0, None, par).verdict == SOLVABLE


def test_direct_solve_outcomes(doms_2_16):
    h1 = DataSpec(h=lambda P: np.ones(len(P)))
    hc = DataSpec(h=lambda P: P[:, 0] / np.hypot(P[:, 0], P[:, 1]))
    assert direct_solve(doms_2_16, h1, 2.0, None, "parabolic").outcome == "unbounded_below"
    conv = direct_solve(doms_2_16, h1, 1.5, None, "hyperbolic")
    assert conv.outcome == "converged" and conv.growth["bounded"]
    assert all(g == "none" for g in conv.gauges)
    assert direct_solve(doms_2_16[:3], hc, 2.0, None, "parabolic").gauges == ["mean_zero"] * 3


def test_consistency_table():
    assert consistent(SOLVABLE, "converged") and not consistent(SOLVABLE, "unbounded_below")
    assert consistent(UNSOLVABLE, "unbounded_below") and consistent(UNSOLVABLE, "diverging_energy")
    assert not consistent(UNSOLVABLE, "converged")
    assert consistent("inconclusive", "converged")

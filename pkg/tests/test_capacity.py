import math

import numpy as np
import pytest
from scipy import integrate

from pneumann.capacity import (
    HYPERBOLIC,
    INCONCLUSIVE,
    PARABOLIC,
    CapacityProblem,
    build_cutoffs,
    cap_p,
    cap_radial_closed_form,
    cap_refinement_ladder,
    capacity_properties_check,
    classify,
    decide,
    radial_exhaustion,
)
from pneumann.errors import InvalidParameterError
from pneumann.geometry import DATA, OUTER, build_annulus_mesh, build_radial_model, sphere_area

RADII = [2.0**k for k in range(1, 11)]


def annulus_oracle(p, a=1.0, b=4.0):
    """(int_a^b (2 pi r)^(-1/(p-1)) dr)^(1-p), integrated numerically."""
    q = 1 / (p - 1)
    A, _ = integrate.quad(lambda r: (2 * math.pi * r) ** (-q), a, b)
    return A ** (1 - p)


def test_annulus_oracle_value():
    assert annulus_oracle(2.0) == pytest.approx(2 * math.pi / math.log(4.0), rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_annulus_ladder_converges_monotonically(p):
    prob = CapacityProblem(build_annulus_mesh(1.0, 4.0, 4, 16), DATA, OUTER)
    vals = [e.value for e in cap_refinement_ladder(prob, p, 3)]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(annulus_oracle(p), rel=0.005)


def test_annulus_capacity_matches_linear_oracle():
    # p = 2: the discrete capacity is u^T A u for the Dirichlet solve with u = 1 / 0
    import scipy.sparse as sp
    import scipy.sparse.linalg as spl

    from pneumann.discrete import discretize

    mesh = build_annulus_mesh(1.0, 4.0, 4, 16)
    d = discretize(mesh)
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            rows.append(d.cells[:, a])
            cols.append(d.cells[:, b])
            vals.append(d.vol * np.einsum("md,md->m", d.grads[:, a], d.grads[:, b]))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(d.n, d.n))
    K, out = d.marker_vertices(DATA), d.marker_vertices(OUTER)
    u = np.zeros(d.n)
    u[K] = 1.0
    free = np.setdiff1d(np.arange(d.n), np.concatenate([K, out]))
    u[free] = spl.spsolve(A[free][:, free].tocsc(), -A[free][:, K] @ np.ones(len(K)))
    oracle = float(u @ A @ u)
    assert oracle == pytest.approx(4.637384949932311, rel=1e-12)  # frozen oracle value
    assert cap_p(CapacityProblem(mesh, DATA, OUTER), 2.0).value == pytest.approx(oracle, rel=1e-9)


def test_closed_form_against_quadrature():
    model = build_radial_model(3, "euclidean", 1.0, 8.0, 64)
    for p in (1.5, 2.0, 4.0):
        q = 1 / (p - 1)
        A, _ = integrate.quad(lambda r: (4 * math.pi * r**2) ** (-q), 1.0, 8.0)
        assert cap_radial_closed_form(model, p, 1.0, 8.0) == pytest.approx(A ** (1 - p), rel=1e-10)


def test_closed_form_unit_ball_in_R3():
    # cap_2 of the unit ball in R^3 is 4 pi; in R^2 (p = n) it vanishes
    m3 = build_radial_model(3, "euclidean", 1.0, 2.0, 16)
    assert cap_radial_closed_form(m3, 2.0, 1.0, math.inf) == pytest.approx(4 * math.pi)
    m2 = build_radial_model(2, "euclidean", 1.0, 2.0, 16)
    assert cap_radial_closed_form(m2, 2.0, 1.0, math.inf) == 0.0


@pytest.mark.parametrize("n,p", [(2, 1.5), (3, 2.0), (2, 3.0)])
def test_discrete_radial_capacity_matches_closed_form(n, p):
    model = build_radial_model(n, "euclidean", 1.0, 16.0, 256)
    est = cap_p(CapacityProblem(model, DATA, OUTER), p)
    assert est.value == pytest.approx(cap_radial_closed_form(model, p, 1.0, 16.0), rel=1e-3)


def test_problem_validation(annulus):
    with pytest.raises(InvalidParameterError):
        CapacityProblem(annulus, DATA, DATA)
    with pytest.raises(InvalidParameterError):
        CapacityProblem(annulus, 0.5, OUTER)  # no vertex within radius 0.5


@pytest.mark.parametrize("n,p,want", [(2, 1.5, HYPERBOLIC), (2, 2.0, PARABOLIC), (3, 2.0, HYPERBOLIC),
                                      (3, 4.0, PARABOLIC)])
def test_classify_radial(n, p, want):
    rep = classify(radial_exhaustion(n, RADII), p)
    assert rep.verdict == want
    assert rep.to_csv().splitlines()[0] == "R,cap,eps,iterations"
    caps = [row["cap"] for row in rep.table]
    assert all(b <= a for a, b in zip(caps, caps[1:]))


def exact_caps(n, p, R):
    model = build_radial_model(n, "euclidean", 1.0, max(R), 16)
    return [cap_radial_closed_form(model, p, 1.0, r) for r in R]


@pytest.mark.parametrize("n,p,want", [(2, 1.5, HYPERBOLIC), (2, 2.0, PARABOLIC), (2, 3.0, PARABOLIC),
                                      (3, 2.0, HYPERBOLIC), (3, 3.0, PARABOLIC), (3, 4.0, PARABOLIC),
                                      (4, 3.0, HYPERBOLIC)])
def test_decide_on_exact_trends(n, p, want):
    verdict, fits, limit, reasons = decide(RADII, exact_caps(n, p, RADII), 1.0, 1e-6, n)
    assert verdict == want, reasons


def test_decide_flat_trend_within_discretization_error_is_inconclusive():
    # no decay, but the level is not resolved above the discretization error either
    verdict, *_ = decide([2.0, 4.0, 8.0, 16.0], [1.0, 0.999, 1.0005, 0.9995], 1.0, 1.0, 2)
    assert verdict == INCONCLUSIVE


def test_cutoffs_are_admissible():
    probs = radial_exhaustion(2, [4.0, 16.0, 64.0, 256.0])
    cut = build_cutoffs(probs, 2.0)
    for pr, eta in zip(probs, cut.fields):
        assert eta.min() >= 0.0 and eta.max() <= 1.0
        assert np.all(eta[pr.K_idx] == 1.0)
    assert all(b < a for a, b in zip(cut.energies, cut.energies[1:]))
    # p = n = 2: energy 2 pi / ln R
    assert cut.energies[-1] == pytest.approx(2 * math.pi / math.log(256.0), rel=1e-3)


def test_capacity_properties_small(annulus):
    rep = capacity_properties_check(build_annulus_mesh(1.0, 4.0, 4, 16), 20, 1.5, seed=3)
    assert rep.passed
    assert rep.monotonicity_violations == 0 and rep.subadditivity_violations == 0


def test_sphere_area_values():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)

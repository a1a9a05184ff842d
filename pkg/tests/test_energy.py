import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from hypothesis import given, settings
from hypothesis import strategies as st

from pneumann.discrete import discretize
from pneumann.energy import (
    DataSpec,
    FunctionalData,
    SolverConfig,
    J_gradient,
    J_value,
    boundary_density,
    cell_density,
    compatibility,
    dirichlet_energy,
    load_vector,
    minimize_J,
    pairing,
    weak_residual,
)
from pneumann.errors import InvalidParameterError, SingularityError, SizeMismatchError
from pneumann.geometry import OUTER, build_annulus_mesh, build_radial_model


def stiffness(disc):
    k = disc.cells.shape[1]
    rows, cols, vals = [], [], []
    for a in range(k):
        for b in range(k):
            rows.append(disc.cells[:, a])
            cols.append(disc.cells[:, b])
            vals.append(disc.vol * np.einsum("md,md->m", disc.grads[:, a], disc.grads[:, b]))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(disc.n, disc.n))


def test_compatibility_unit_density(annulus):
    F = cell_density(annulus, lambda x, y: np.full(x.shape, 1.0 / annulus.total_area))
    assert compatibility(annulus, F) == pytest.approx(1.0, rel=1e-12)


def test_compatibility_boundary_constant(annulus):
    F = boundary_density(annulus, lambda x, y: 1.0)
    assert compatibility(annulus, F) == pytest.approx(-annulus.boundary_length("data"), rel=1e-13)


def test_compatibility_cosine_vanishes():
    vals = []
    for na in (16, 64):
        m = build_annulus_mesh(1.0, 2.0, 3, na)
        vals.append(compatibility(m, boundary_density(m, lambda x, y: np.cos(np.arctan2(y, x)))))
    assert abs(vals[-1]) < 1e-12


def test_pairing_with_constants_is_compatibility(annulus, rng):
    F = FunctionalData(rng.normal(size=annulus.n_cells), rng.normal(size=32))
    assert pairing(annulus, F, np.full(annulus.n_vertices, 3.0)) == pytest.approx(3 * compatibility(annulus, F))


def test_data_spec_matches_boundary_density(annulus):
    spec = DataSpec(h=lambda P: np.cos(np.arctan2(P[:, 1], P[:, 0])))
    F1 = spec.on(annulus)
    F2 = boundary_density(annulus, lambda x, y: np.cos(np.arctan2(y, x)))
    np.testing.assert_array_equal(F1.h, F2.h)
    np.testing.assert_allclose(spec.scaled(2.0).on(annulus).h, 2 * F1.h)


def test_size_mismatch(annulus):
    with pytest.raises(SizeMismatchError):
        compatibility(annulus, FunctionalData(h=np.ones(3)))


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        SolverConfig(p=1.0)
    with pytest.raises(InvalidParameterError):
        SolverConfig(gauge="bogus")


def test_energy_of_linear_field():
    # u = x on the annulus: |grad u| = 1, energy = area for every p
    m = build_annulus_mesh(1.0, 3.0, 6, 24)
    u = m.vertices[:, 0].copy()
    for p in (1.5, 2.0, 3.0):
        assert dirichlet_energy(m, u, p) == pytest.approx(m.total_area, rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_gradient_matches_finite_differences(annulus, rng, p):
    cfg = SolverConfig(p=p)
    F = FunctionalData(rng.normal(size=annulus.n_cells), rng.normal(size=32))
    u = rng.normal(size=annulus.n_vertices)
    g = J_gradient(annulus, F, u, cfg)
    for _ in range(5):
        d = rng.normal(size=annulus.n_vertices)
        h = 1e-5
        fd = (J_value(annulus, F, u + h * d, cfg) - J_value(annulus, F, u - h * d, cfg)) / (2 * h)
        assert abs(fd - g @ d) <= 1e-5 * np.linalg.norm(g) * np.linalg.norm(d)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(1.2, 5.0), t=st.floats(0.0, 1.0), seed=st.integers(0, 2**31))
def test_J_is_convex(annulus, p, t, seed):
    r = np.random.default_rng(seed)
    cfg = SolverConfig(p=p)
    F = FunctionalData(r.normal(size=annulus.n_cells), None)
    a, b = r.normal(size=(2, annulus.n_vertices))
    lhs = J_value(annulus, F, (1 - t) * a + t * b, cfg)
    rhs = (1 - t) * J_value(annulus, F, a, cfg) + t * J_value(annulus, F, b, cfg)
    assert lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def test_singular_gradient_without_regularization(annulus):
    with pytest.raises(SingularityError):
        J_gradient(annulus, FunctionalData(), np.zeros(annulus.n_vertices), SolverConfig(p=1.5, eps=0.0))


def test_linear_solve_oracle():
    m = build_annulus_mesh(1.0, 4.0, 12, 48)
    disc = discretize(m)
    F = boundary_density(m, lambda x, y: 1.0 + 0.5 * np.sin(np.arctan2(y, x)))
    outer = disc.marker_vertices(OUTER)
    u, rep = minimize_J(m, F, SolverConfig(p=2.0), fixed={int(k): 0.0 for k in outer})
    A = stiffness(disc)
    b = -load_vector(disc, F)
    free = np.setdiff1d(np.arange(disc.n), outer)
    ref = np.zeros(disc.n)
    ref[free] = spl.spsolve(A[free][:, free].tocsc(), b[free])
    assert rep.status == "converged"
    assert np.max(np.abs(u - ref)) <= 1e-6 * np.max(np.abs(ref))


def test_zero_data_converges_to_zero(annulus):
    u, rep = minimize_J(annulus, FunctionalData(), SolverConfig(p=1.5, gauge="mean_zero"))
    assert rep.status == "converged"
    assert np.all(u == 0)


def test_incompatible_free_problem_is_unbounded():
    m = build_annulus_mesh(1.0, 4.0, 8, 32, outer="free")
    F = boundary_density(m, lambda x, y: 1.0)
    _, rep = minimize_J(m, F, SolverConfig(p=2.0))
    assert rep.status == "unbounded_below"
    assert rep.certificate["kind"] == "divergent_iterates"
    _, rep = minimize_J(m, F, SolverConfig(p=2.0, gauge="mean_zero"))
    assert rep.status == "unbounded_below"
    assert rep.certificate["kind"] == "constant_direction"
    assert rep.certificate["compatibility"] == pytest.approx(-m.boundary_length("data"), rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_nonlinear_solution_has_small_residual(p):
    m = build_annulus_mesh(1.0, 4.0, 8, 32, outer="free")
    F = boundary_density(m, lambda x, y: np.cos(np.arctan2(y, x)))
    cfg = SolverConfig(p=p, gauge="mean_zero")
    u, rep = minimize_J(m, F, cfg)
    assert rep.status == "converged"
    assert weak_residual(m, u, F, cfg) <= 1e-6
    assert abs(np.dot(discretize(m).mass, u)) < 1e-10


def test_radial_solution_matches_ode():
    # unit flux density at r = 1 on the 2-D radial model: r |u'|^(p-2) u' = -1,
    # u(R) = 0; for p = 3, u' = -r^(-1/2)
    p, R = 3.0, 16.0
    model = build_radial_model(2, "euclidean", 1.0, R, 256)
    disc = discretize(model)
    F = boundary_density(model, lambda r: 1.0)
    u, rep = minimize_J(model, F, SolverConfig(p=p), fixed={disc.n - 1: 0.0})
    r = model.nodes
    exact = 2 * (np.sqrt(R) - np.sqrt(r))
    assert rep.status == "converged"
    assert np.max(np.abs(u - exact)) <= 2e-3 * exact.max()

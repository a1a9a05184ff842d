import math

import numpy as np
import pytest

from pneumann.covers import (
    Cover,
    build_annular_cover,
    build_partition,
    condition32_evaluate,
    condition33_evaluate,
    gamma_constant,
    gamma_default,
    growth_exponent,
    hardy_check,
    piece_integrals,
    poincare_constant,
    poincare_constants,
    poincare_ratio,
)
from pneumann.discrete import discretize
from pneumann.errors import InvalidParameterError
from pneumann.geometry import RadialModel, build_annulus_mesh, build_cusp_mesh, refine


@pytest.fixture(scope="module")
def annulus64():
    return build_annulus_mesh(1.0, 64.0, 48, 48)


@pytest.fixture(scope="module")
def cusp256():
    return build_cusp_mesh(0.75, 0.5, 256.0, 72, 8)


def test_dyadic_piece_counts(annulus64, cusp256):
    cv = build_annular_cover(annulus64)
    assert cv.m == 6 and cv.multiplicity == 2
    assert all(cv.overlaps)
    assert build_annular_cover(cusp256).m == 8
    covered = np.zeros(discretize(annulus64).n_cells, dtype=int)
    for pc in cv.pieces:
        covered[pc] += 1
    assert covered.min() >= 1 and covered.max() == 2


def test_too_small_domain_rejected():
    with pytest.raises(InvalidParameterError):
        build_annular_cover(build_annulus_mesh(1.0, 2.0, 4, 16))


def test_partition_of_unity_invariants(annulus64):
    cv = build_annular_cover(annulus64)
    part = build_partition(cv)
    np.testing.assert_allclose(part.psi.sum(axis=0), 1.0, atol=1e-12)
    assert part.psi.min() >= 0.0 and part.psi.max() <= 1.0
    d = discretize(annulus64)
    for i, (lo, hi) in enumerate(cv.bands):
        support = np.flatnonzero(part.psi[i] > 0)
        assert np.all(d.radius[support] < hi) and np.all(d.radius[support] > lo)


def test_small_radial_partition():
    nodes = np.linspace(1.0, 4.0, 61)
    model = RadialModel(nodes=nodes, weight=np.ones_like(nodes), n=2)
    cv = build_annular_cover(model, base=2.0, min_bands=1)
    part = build_partition(cv)
    assert cv.m == 3 and cv.bands[0] == (0.0, 2.0)
    np.testing.assert_allclose(part.psi.sum(axis=0), 1.0, atol=1e-12)


def test_calibration_zero_violations_and_refinement_stability(cusp256):
    p = 1.5
    cv = build_annular_cover(cusp256)
    part = build_partition(cv)
    gamma = gamma_default(cusp256, p, part)
    assert gamma.violations(part) == 0
    assert np.all(gamma.values > 0)
    fine = refine(cusp256)
    b0 = part.calibration_bound(p)
    b1 = build_partition(build_annular_cover(fine)).calibration_bound(p)
    assert abs(b1 - b0) <= 0.1 * b0


def test_poincare_ratio_unit_interval():
    # gamma = 1, u = r on [0, 1]: int |r - 1/2| / int |u'| = 1/4
    nodes = np.linspace(0.0, 1.0, 41)
    model = RadialModel(nodes=nodes, weight=np.ones_like(nodes), n=1)
    d = discretize(model)
    cells = np.arange(d.n_cells)
    g = np.ones(d.n_cells)
    assert poincare_ratio(d, cells, g, 2.0, nodes.copy()) == pytest.approx(0.25, rel=1e-12)
    assert poincare_ratio(d, cells, g, 2.0, np.full(d.n, 3.0)) == 0.0


def test_poincare_bracket_and_constant_weight_scaling(annulus64):
    cv = build_annular_cover(annulus64)
    gamma = gamma_constant(annulus64, 1.0, 2.0)
    ests = poincare_constants(cv, gamma, 2.0, samples=60)
    for e in ests:
        assert e.lower <= e.upper
    low = np.array([e.lower for e in ests[:4]])
    # for gamma = 1 the constant scales with the size of the pair: ratio ~ 2 per step
    ratios = low[1:] / low[:-1]
    assert np.all((ratios > 1.6) & (ratios < 2.5))


def test_poincare_constant_rejects_disconnected(annulus64):
    d = discretize(annulus64)
    cells = np.concatenate([np.flatnonzero(d.cell_radius < 2), np.flatnonzero(d.cell_radius > 40)])
    with pytest.raises(InvalidParameterError):
        poincare_constant(annulus64, cells, gamma_constant(annulus64), 2.0)


def test_condition_sums_match_direct_summation(cusp256):
    p = 1.5
    cv = build_annular_cover(cusp256)
    gamma = gamma_default(cusp256, p, build_partition(cv))
    consts = [1.0] * cv.n_pairs()
    I = piece_integrals(cv, gamma)
    r32 = condition32_evaluate(cv, gamma, consts)
    r33 = condition33_evaluate(cv, gamma, consts)
    for i in range(cv.n_pairs()):
        assert r32.sums[i] == pytest.approx(sum(I[: i + 1]), rel=1e-12)
        assert r33.sums[i] == pytest.approx(sum(I[i + 1:]), rel=1e-12)
        assert r32.values[i] == pytest.approx((1 / I[i] + 1 / I[i + 1]) * sum(I[: i + 1]), rel=1e-12)
    assert all(b >= a for a, b in zip(r32.sums, r32.sums[1:]))
    assert r33.truncated


def test_single_piece_cover_reduces_to_twice_C():
    mesh = build_annulus_mesh(1.0, 2.0, 4, 16)
    d = discretize(mesh)
    cv = Cover(mesh, [np.arange(d.n_cells)], [(0.0, 2.0)], 1, [])
    r = condition32_evaluate(cv, gamma_constant(mesh), [3.0])
    assert r.values == [pytest.approx(6.0)]


def test_missing_constants_rejected(cusp256):
    cv = build_annular_cover(cusp256)
    with pytest.raises(InvalidParameterError):
        condition32_evaluate(cv, gamma_constant(cusp256), [1.0])


def test_hyperbolic_configuration_condition_bounded(cusp256):
    p = 1.5
    cv = build_annular_cover(cusp256)
    gamma = gamma_default(cusp256, p, build_partition(cv))
    rep = condition32_evaluate(cv, gamma, poincare_constants(cv, gamma, p), fit_upto=6)
    assert rep.bounded


def test_parabolic_configuration_suffix_condition():
    p = 3.0
    mesh = build_cusp_mesh(1.0, 0.5, 256.0, 72, 8)
    cv = build_annular_cover(mesh)
    gamma = gamma_default(mesh, p, build_partition(cv))
    rep = condition33_evaluate(cv, gamma, poincare_constants(cv, gamma, p, samples=60), fit_upto=6)
    assert rep.bounded
    # suffix sums shrink at the truncation boundary
    assert rep.sums[-1] < 0.1 * rep.sums[0]


def test_heavier_tail_suffix_sums_grow_with_truncation():
    # gamma ~ (1+|x|)^(-p+1) on the lambda = 1 wedge is not integrable: the
    # truncated suffix sum S_1 keeps growing as the truncation radius doubles
    p = 3.0
    s1 = {}
    for e in (-p, -p + 1):
        vals = []
        for xm in (64.0, 128.0, 256.0):
            mesh = build_cusp_mesh(1.0, 0.5, xm, int(8 * math.log2(xm / 0.5)), 8)
            cv = build_annular_cover(mesh)
            g = gamma_default(mesh, p, build_partition(cv), exponent=e)
            vals.append(sum(piece_integrals(cv, g)[1:]) / g.c)
        s1[e] = vals
    light, heavy = s1[-p], s1[-p + 1]
    assert heavy[2] - heavy[1] == pytest.approx(heavy[1] - heavy[0], rel=0.15)  # linear in log R
    assert (light[2] - light[1]) < 0.6 * (light[1] - light[0])  # geometric convergence


def test_growth_exponent_cases():
    i = np.arange(1, 8)
    assert growth_exponent(2.0 ** (0.5 * i))["bounded"] is False
    assert growth_exponent(5.0 - 2.0 ** (-i))["bounded"] is True
    assert growth_exponent([1.0, 2.0, 3.0])["exponent"] > 0  # short sequences: log-linear slope


def test_hardy_check_bounded_and_stable(cusp256):
    p = 1.5

    def gamma_fn(dom):
        return (1.0 + discretize(dom).cell_radius) ** (-p)

    mesh = build_cusp_mesh(0.75, 0.5, 64.0, 56, 8)
    rep = hardy_check(mesh, gamma_fn, p, trials=200, refined=refine(mesh))
    assert math.isfinite(rep.C_emp) and rep.C_emp > 0
    assert rep.stable
    v = hardy_check(mesh, gamma_fn, p, trials=100, vanish_radius=4.0)
    assert v.vanish_on_first and math.isfinite(v.C_emp)

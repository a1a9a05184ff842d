import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pneumann.errors import InvalidParameterError, MeshError
from pneumann.geometry import (
    DATA,
    FREE,
    OUTER,
    ExhaustionSpec,
    MetricMesh,
    RadialModel,
    build_annulus_mesh,
    build_cusp_mesh,
    build_exhaustion,
    build_radial_model,
    domain_from_dict,
    refine,
    refine_n,
    refine_radial,
    sphere_area,
)


def test_annulus_area_is_exact(annulus):
    # ring polygons enclose the area of their circles
    assert annulus.total_area == pytest.approx(15 * math.pi, rel=1e-12)
    assert annulus.check() == []


def test_annulus_inner_perimeter_matches_polygon():
    m = build_annulus_mesh(1.0, 2.0, 4, 64)
    t = 2 * math.pi / 64
    radius = math.sqrt(t / math.sin(t))
    assert m.boundary_length(DATA) == pytest.approx(64 * 2 * radius * math.sin(math.pi / 64), rel=1e-13)
    # the equal-area polygon is slightly longer than the circle; O(n^-2) excess
    errs = [build_annulus_mesh(1.0, 2.0, 3, n).boundary_length(DATA) / (2 * math.pi) - 1 for n in (64, 128)]
    assert 0 < errs[1] < errs[0] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)


def test_markers_and_euler_characteristic(annulus):
    assert annulus.euler_characteristic == 0  # annulus: V - E + F = 0
    assert len(annulus.marker_vertices(DATA)) == 32
    assert len(annulus.marker_vertices(OUTER)) == 32


def test_refine_preserves_area_and_nests_vertices(annulus):
    fine = refine(annulus)
    assert fine.n_cells == 4 * annulus.n_cells
    assert fine.total_area == pytest.approx(annulus.total_area, rel=1e-12)
    np.testing.assert_array_equal(fine.vertices[: annulus.n_vertices], annulus.vertices)
    assert refine_n(annulus, 2).n_cells == 16 * annulus.n_cells


def test_cusp_area_oracle():
    # {0.5 < x < 8, |y| < x^lam}: area = 2 (8^(1+lam) - 0.5^(1+lam)) / (1+lam)
    lam = 0.75
    m = build_cusp_mesh(lam, 0.5, 8.0, 256, 16)
    exact = 2 * (8 ** (1 + lam) - 0.5 ** (1 + lam)) / (1 + lam)
    assert m.total_area == pytest.approx(exact, rel=2e-3)
    assert m.check() == []


def test_cusp_markers():
    m = build_cusp_mesh(0.5, 0.5, 8.0, 32, 4, tip=FREE, lateral=DATA)
    assert m.boundary_length(OUTER) == pytest.approx(2 * 8**0.5, rel=1e-12)
    assert m.marker_mask(DATA).sum() == 2 * 32


def test_mesh_json_round_trip(annulus):
    d = json.loads(json.dumps(annulus.to_dict()))
    back = domain_from_dict(d)
    assert isinstance(back, MetricMesh)
    assert back.digest() == annulus.digest()


def test_bad_mesh_version_rejected(annulus):
    d = annulus.to_dict()
    d["version"] = 99
    with pytest.raises(MeshError):
        domain_from_dict(d)


def test_radial_model_weights():
    m = build_radial_model(3, "euclidean", 1.0, 2.0, 16)
    assert m.weight[0] == pytest.approx(sphere_area(3))
    # exact cell means integrate w to the shell volume
    vol = float(np.sum(m.cell_weight * np.diff(m.nodes)))
    assert vol == pytest.approx(4 / 3 * math.pi * (8 - 1), rel=1e-12)


def test_refine_radial_nests():
    m = build_radial_model(2, "euclidean", 1.0, 4.0, 8)
    f = refine_radial(m)
    np.testing.assert_array_equal(f.nodes[::2], m.nodes)
    assert f.total_volume == pytest.approx(m.total_volume, rel=1e-12)


def test_radial_model_validation():
    with pytest.raises(MeshError):
        RadialModel(nodes=np.array([1.0, 0.5]), weight=np.array([1.0, 1.0]))
    with pytest.raises(InvalidParameterError):
        build_radial_model(2, "euclidean", 2.0, 1.0, 16)


def test_exhaustion_requires_dyadic_radii():
    with pytest.raises(InvalidParameterError):
        build_exhaustion(ExhaustionSpec("radial", [2.0, 3.0], {"n": 2}))
    doms = build_exhaustion(ExhaustionSpec("cusp", [2.0, 4.0], {"lambda": 0.5}, 4))
    assert [round(float(np.max(np.hypot(*d.vertices.T))), 6) for d in doms][0] >= 2.0
    assert doms[1].n_cells > doms[0].n_cells


@settings(max_examples=25, deadline=None)
@given(r_in=st.floats(0.2, 2.0), ratio=st.floats(1.5, 10.0), na=st.integers(6, 40))
def test_annulus_area_property(r_in, ratio, na):
    m = build_annulus_mesh(r_in, r_in * ratio, 3, na)
    assert m.total_area == pytest.approx(math.pi * r_in**2 * (ratio**2 - 1), rel=1e-10)
    assert np.all(m.cell_areas > 0)

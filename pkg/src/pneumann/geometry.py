"""Metric meshes and radial weighted models for the model manifolds.

Two domain representations are supported:

* :class:`MetricMesh` -- a 2-D simplicial complex in chart coordinates with a
  piecewise-constant metric tensor per cell and marked boundary edges.
* :class:`RadialModel` -- a 1-D weighted model ``w(r) dr`` standing in for a
  radially symmetric manifold of any dimension.

All generators are mapped-structured (images of rectangles), so uniform
refinement and exhaustion families are exactly nested.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError, MeshError

DATA = "data"
FREE = "free"
OUTER = "outer"
MARKERS = (DATA, FREE, OUTER)

MESH_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class MetricMesh:
    """Triangulated 2-D chart with per-cell metric and marked boundary."""

    vertices: np.ndarray  # (V, 2) chart coordinates
    cells: np.ndarray  # (M, 3) vertex indices, counter-clockwise
    metric: np.ndarray  # (M, 3) packed [g11, g12, g22]
    boundary: np.ndarray  # (E, 2) vertex pairs
    markers: tuple  # (E,) strings from MARKERS
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must have shape (V, 2)")
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise MeshError("cells must have shape (M, 3)")
        metric = self.metric
        if metric is None:
            metric = np.tile([1.0, 0.0, 1.0], (len(cells), 1))
        metric = np.ascontiguousarray(metric, dtype=float)
        if metric.shape != (len(cells), 3):
            raise MeshError("metric must have one [g11, g12, g22] row per cell")
        bnd = np.ascontiguousarray(self.boundary, dtype=np.int64).reshape(-1, 2)
        markers = tuple(str(m) for m in self.markers)
        if len(markers) != len(bnd):
            raise MeshError("one marker per boundary edge is required")
        bad = sorted(set(markers) - set(MARKERS))
        if bad:
            raise MeshError(f"unknown boundary markers {bad}")
        if cells.size and (cells.min() < 0 or cells.max() >= len(verts)):
            raise MeshError("cell references a missing vertex")
        if bnd.size and (bnd.min() < 0 or bnd.max() >= len(verts)):
            raise MeshError("boundary edge references a missing vertex")
        for name, arr in (("vertices", verts), ("cells", cells), ("metric", metric), ("boundary", bnd)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "markers", markers)
        det = metric[:, 0] * metric[:, 2] - metric[:, 1] ** 2
        if np.any(metric[:, 0] <= 0) or np.any(det <= 0):
            raise MeshError("cell metric must be symmetric positive definite")
        if np.any(self.chart_areas <= 0):
            raise MeshError("every cell must have positive area and ccw orientation")

    # -- basic sizes -------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    # -- geometry ----------------------------------------------------------
    @cached_property
    def chart_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def metric_det(self) -> np.ndarray:
        g = self.metric
        return g[:, 0] * g[:, 2] - g[:, 1] ** 2

    @cached_property
    def cell_areas(self) -> np.ndarray:
        """Metric area of each cell (``sqrt(det g)`` times chart area)."""
        return np.sqrt(self.metric_det) * self.chart_areas

    @property
    def total_area(self) -> float:
        return float(math.fsum(self.cell_areas))

    @cached_property
    def boundary_cell(self) -> np.ndarray:
        """Index of the unique cell owning each boundary edge."""
        owner = {}
        for c, tri in enumerate(self.cells):
            for a, b in ((0, 1), (1, 2), (2, 0)):
                owner.setdefault(_ekey(tri[a], tri[b]), c)
        out = np.empty(len(self.boundary), dtype=np.int64)
        for k, (a, b) in enumerate(self.boundary):
            try:
                out[k] = owner[_ekey(a, b)]
            except KeyError:
                raise MeshError(f"boundary edge {a}-{b} is not an edge of any cell") from None
        return out

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """Metric length of each boundary edge (metric of the owning cell)."""
        t = self.vertices[self.boundary[:, 1]] - self.vertices[self.boundary[:, 0]]
        g = self.metric[self.boundary_cell]
        q = g[:, 0] * t[:, 0] ** 2 + 2 * g[:, 1] * t[:, 0] * t[:, 1] + g[:, 2] * t[:, 1] ** 2
        return np.sqrt(q)

    @cached_property
    def radius(self) -> np.ndarray:
        """Euclidean chart distance of each vertex from the origin."""
        return np.hypot(self.vertices[:, 0], self.vertices[:, 1])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @property
    def diameter(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def marker_mask(self, marker: str) -> np.ndarray:
        return np.array([m == marker for m in self.markers], dtype=bool)

    def marker_vertices(self, marker: str) -> np.ndarray:
        mask = self.marker_mask(marker)
        return np.unique(self.boundary[mask].ravel())

    def boundary_length(self, marker: str | None = None) -> float:
        if marker is None:
            return float(math.fsum(self.edge_lengths))
        return float(math.fsum(self.edge_lengths[self.marker_mask(marker)]))

    # -- topology ----------------------------------------------------------
    @cached_property
    def edge_counts(self) -> dict:
        counts: dict = {}
        for tri in self.cells:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                k = _ekey(tri[a], tri[b])
                counts[k] = counts.get(k, 0) + 1
        return counts

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edge_counts) + self.n_cells

    def check(self) -> list[str]:
        """Return a list of invariant violations (empty when the mesh is valid)."""
        problems = []
        if np.any(self.cell_areas <= 0):
            problems.append("non-positive cell area")
        counts = self.edge_counts
        bset = {}
        for (a, b), m in zip(self.boundary, self.markers):
            k = _ekey(a, b)
            if k in bset:
                problems.append(f"boundary edge {k} listed twice")
            bset[k] = m
        for k, n in counts.items():
            if n > 2:
                problems.append(f"edge {k} shared by {n} cells")
            elif n == 1 and k not in bset:
                problems.append(f"topological boundary edge {k} has no marker")
            elif n == 2 and k in bset:
                problems.append(f"marked edge {k} is interior")
        for k in bset:
            if k not in counts:
                problems.append(f"marked edge {k} is not a mesh edge")
        return problems

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.vertices, self.cells, self.metric, self.boundary):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update("|".join(self.markers).encode())
        return h.hexdigest()[:16]

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "version": MESH_FORMAT_VERSION,
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "boundary": [[int(a), int(b), m] for (a, b), m in zip(self.boundary, self.markers)],
        }
        if not np.allclose(self.metric, [1.0, 0.0, 1.0], rtol=0, atol=0):
            d["metric"] = self.metric.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricMesh":
        if d.get("version") != MESH_FORMAT_VERSION:
            raise MeshError(f"unsupported mesh format version {d.get('version')!r}")
        bnd = d.get("boundary", [])
        return cls(
            vertices=np.asarray(d["vertices"], dtype=float).reshape(-1, 2),
            cells=np.asarray(d["cells"], dtype=np.int64).reshape(-1, 3),
            metric=None if d.get("metric") is None else np.asarray(d["metric"], dtype=float),
            boundary=np.asarray([[b[0], b[1]] for b in bnd], dtype=np.int64).reshape(-1, 2),
            markers=tuple(b[2] for b in bnd),
        )


def _ekey(a, b) -> tuple:
    a, b = int(a), int(b)
    return (a, b) if a < b else (b, a)


# ---------------------------------------------------------------------------
# Radial models


@dataclass(frozen=True, eq=False)
class RadialModel:
    """1-D weighted model: energy of a radial field is ``sum w |u'|^p dr``.

    ``weight`` holds samples of ``w`` at the nodes.  When the analytic profile
    is known, ``cell_weight`` holds the exact mean of ``w`` over each interval
    and ``profile`` describes the closed form (used by oracles).
    """

    nodes: np.ndarray
    weight: np.ndarray
    n: int = 2
    cell_weight: np.ndarray | None = None
    profile: dict | None = None

    def __post_init__(self):
        r = np.ascontiguousarray(self.nodes, dtype=float)
        w = np.ascontiguousarray(self.weight, dtype=float)
        if r.ndim != 1 or len(r) < 2:
            raise MeshError("a radial model needs at least two nodes")
        if w.shape != r.shape:
            raise MeshError("one weight sample per node is required")
        if np.any(np.diff(r) <= 0):
            raise MeshError("radial nodes must be strictly increasing")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise MeshError("radial weights must be positive and finite")
        if int(self.n) < 1:
            raise MeshError("dimension tag must be positive")
        cw = self.cell_weight
        if cw is None:
            cw = 0.5 * (w[1:] + w[:-1])
        cw = np.ascontiguousarray(cw, dtype=float)
        if cw.shape != (len(r) - 1,) or np.any(cw <= 0):
            raise MeshError("cell weights must be positive, one per interval")
        for name, arr in (("nodes", r), ("weight", w), ("cell_weight", cw)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n", int(self.n))

    @property
    def n_vertices(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def radius(self) -> np.ndarray:
        return self.nodes

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        return self.cell_weight * np.diff(self.nodes)

    @property
    def total_volume(self) -> float:
        return float(math.fsum(self.cell_volumes))

    @property
    def diameter(self) -> float:
        return self.r_max - self.r_min

    def weight_function(self) -> Callable[[np.ndarray], np.ndarray]:
        """Analytic weight when the profile is known, else piecewise-linear."""
        if self.profile is not None:
            return _profile_function(self.profile)
        nodes, weight = self.nodes, self.weight
        return lambda r: np.interp(r, nodes, weight)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.nodes, self.weight, self.cell_weight):
            h.update(arr.tobytes())
        h.update(str(self.n).encode())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        d = {"nodes": self.nodes.tolist(), "weight": self.weight.tolist(), "n": self.n}
        if self.profile is not None:
            d["profile"] = dict(self.profile)
            d["cell_weight"] = self.cell_weight.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RadialModel":
        cw = d.get("cell_weight")
        return cls(
            nodes=np.asarray(d["nodes"], dtype=float),
            weight=np.asarray(d["weight"], dtype=float),
            n=int(d.get("n", 2)),
            cell_weight=None if cw is None else np.asarray(cw, dtype=float),
            profile=d.get("profile"),
        )


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def _profile_constants(profile: dict) -> tuple[float, float]:
    """Return ``(c, m)`` with ``w(r) = c r**m``."""
    kind = profile["kind"]
    n = int(profile["n"])
    if kind == "euclidean":
        return sphere_area(n), float(n - 1)
    if kind == "cusp":
        lam = float(profile["lambda"])
        return ball_volume(n - 1), lam * (n - 1)
    if kind == "power":
        return float(profile["c"]), float(profile["m"])
    raise InvalidParameterError(f"unknown radial profile {kind!r}")


def _profile_function(profile: dict):
    c, m = _profile_constants(profile)
    return lambda r: c * np.asarray(r, dtype=float) ** m


def _power_mean(c: float, m: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact mean of ``c r**m`` over each interval ``[a, b]``."""
    if abs(m + 1) < 1e-14:
        return c * np.log(b / a) / (b - a)
    return c * (b ** (m + 1) - a ** (m + 1)) / ((m + 1) * (b - a))


def build_radial_model(
    n: int,
    profile: str | tuple = "euclidean",
    r_min: float = 1.0,
    r_max: float = 2.0,
    N: int = 64,
    lam: float | None = None,
) -> RadialModel:
    """Radial model of R^n (``euclidean``) or of the Example-3.1 cusp (``cusp``).

    ``profile`` may be ``"euclidean"``, ``"cusp"`` (with ``lam``), or a tuple
    ``("cusp", lam)``.  Nodes are log-uniform; ``N`` is the number of intervals.
    """
    if isinstance(profile, tuple):
        profile, lam = profile
    if int(n) < 2:
        raise InvalidParameterError("dimension n must be >= 2")
    if int(N) < 8:
        raise InvalidParameterError("N must be >= 8")
    if not (0 < r_min < r_max):
        raise InvalidParameterError("need 0 < r_min < r_max")
    if profile == "cusp":
        if lam is None or lam < 0:
            raise InvalidParameterError("cusp profile needs lambda >= 0")
        prof = {"kind": "cusp", "n": int(n), "lambda": float(lam)}
    elif profile == "euclidean":
        prof = {"kind": "euclidean", "n": int(n)}
    else:
        raise InvalidParameterError(f"unknown radial profile {profile!r}")
    nodes = np.geomspace(r_min, r_max, int(N) + 1)
    nodes[0], nodes[-1] = r_min, r_max
    return _radial_from_profile(nodes, prof)


def _radial_from_profile(nodes: np.ndarray, prof: dict) -> RadialModel:
    c, m = _profile_constants(prof)
    weight = c * nodes**m
    cw = _power_mean(c, m, nodes[:-1], nodes[1:])
    return RadialModel(nodes=nodes, weight=weight, n=int(prof["n"]), cell_weight=cw, profile=prof)


def refine_radial(model: RadialModel) -> RadialModel:
    """Bisect every interval at its geometric mean (nested node sets)."""
    r = model.nodes
    mid = np.sqrt(r[:-1] * r[1:])
    nodes = np.empty(2 * len(r) - 1)
    nodes[0::2] = r
    nodes[1::2] = mid
    if model.profile is not None:
        return _radial_from_profile(nodes, model.profile)
    weight = np.interp(nodes, r, model.weight)
    return RadialModel(nodes=nodes, weight=weight, n=model.n)


# ---------------------------------------------------------------------------
# Mesh generators


def _graded_levels(a: float, b: float, n: int, grading: float) -> np.ndarray:
    """Nodes on [a, b] with spacing proportional to ``r**grading``."""
    t = np.linspace(0.0, 1.0, n + 1)
    if abs(grading - 1.0) < 1e-12:
        r = a * (b / a) ** t
    else:
        e = 1.0 - grading
        r = (a**e + t * (b**e - a**e)) ** (1.0 / e)
    r[0], r[-1] = a, b
    return r


def build_annulus_mesh(
    r_in: float,
    r_out: float,
    n_radial: int,
    n_angular: int,
    grading: float = 1.0,
    inner: str = DATA,
    outer: str = OUTER,
) -> MetricMesh:
    """Structured triangulation of the annulus ``r_in <= |x| <= r_out``.

    Ring vertices sit on the equal-area polygon of each circle (radius scaled
    by ``sqrt(t / sin t)``, ``t = 2 pi / n_angular``), so every ring polygon
    encloses exactly the area of its circle.
    """
    if not (r_in > 0 and r_out > 0):
        raise InvalidParameterError("radii must be positive")
    if not r_in < r_out:
        raise InvalidParameterError("need r_in < r_out")
    if n_radial < 3 or n_angular < 3:
        raise InvalidParameterError("n_radial and n_angular must be >= 3")
    if grading <= 0:
        raise InvalidParameterError("grading must be positive")
    if inner not in MARKERS or outer not in MARKERS:
        raise InvalidParameterError("unknown boundary marker")
    radii = _graded_levels(r_in, r_out, n_radial, grading)
    dt = 2 * math.pi / n_angular
    scale = math.sqrt(dt / math.sin(dt))
    theta = dt * np.arange(n_angular)
    rr, tt = np.meshgrid(radii * scale, theta, indexing="ij")
    verts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])

    def vid(k, j):
        return k * n_angular + (j % n_angular)

    cells = []
    for k in range(n_radial):
        for j in range(n_angular):
            a, b, c, d = vid(k, j), vid(k, j + 1), vid(k + 1, j + 1), vid(k + 1, j)
            cells.append((a, d, c))
            cells.append((a, c, b))
    bnd, mk = [], []
    for j in range(n_angular):
        bnd.append((vid(0, j + 1), vid(0, j)))
        mk.append(inner)
    for j in range(n_angular):
        bnd.append((vid(n_radial, j), vid(n_radial, j + 1)))
        mk.append(outer)
    meta = {
        "generator": "annulus",
        "r_in": r_in,
        "r_out": r_out,
        "n_radial": n_radial,
        "n_angular": n_angular,
        "grading": grading,
        "ring_scale": scale,
    }
    return MetricMesh(verts, np.array(cells), None, np.array(bnd), tuple(mk), meta)


def build_cusp_mesh(
    lam: float,
    x_min: float,
    x_max: float,
    n_axial: int,
    n_cross: int,
    tip: str = FREE,
    lateral: str = FREE,
    axial: str = "log",
) -> MetricMesh:
    """Structured mesh of ``{x_min <= x <= x_max, |y| <= x**lam}``.

    Axial nodes are log-uniform by default (``axial="uniform"`` for equal
    spacing).  The tip cap carries ``tip``, the lateral sides ``lateral``, and
    the far cap ``x = x_max`` is marked ``outer``.
    """
    if lam < 0:
        raise InvalidParameterError("lambda must be >= 0")
    if not (0 < x_min < x_max):
        raise InvalidParameterError("need 0 < x_min < x_max")
    if n_axial < 1 or n_cross < 1:
        raise InvalidParameterError("n_axial and n_cross must be positive")
    if tip not in MARKERS or lateral not in MARKERS:
        raise InvalidParameterError("unknown boundary marker")
    if axial == "log":
        xs = np.geomspace(x_min, x_max, n_axial + 1)
    elif axial == "uniform":
        xs = np.linspace(x_min, x_max, n_axial + 1)
    else:
        raise InvalidParameterError(f"unknown axial spacing {axial!r}")
    xs[0], xs[-1] = x_min, x_max
    eta = np.linspace(-1.0, 1.0, n_cross + 1)
    X = np.repeat(xs, n_cross + 1)
    Y = (xs[:, None] ** lam * eta[None, :]).ravel()
    verts = np.column_stack([X, Y])
    m = n_cross + 1

    def vid(k, j):
        return k * m + j

    cells = []
    for k in range(n_axial):
        for j in range(n_cross):
            a, b, c, d = vid(k, j), vid(k + 1, j), vid(k + 1, j + 1), vid(k, j + 1)
            # diagonals mirror across y = 0 so the mesh is reflection symmetric
            if eta[j] + eta[j + 1] < 0:
                cells.append((a, b, d))
                cells.append((b, c, d))
            else:
                cells.append((a, b, c))
                cells.append((a, c, d))
    bnd, mk = [], []
    for j in range(n_cross):
        bnd.append((vid(0, j + 1), vid(0, j)))
        mk.append(tip)
    for k in range(n_axial):
        bnd.append((vid(k, 0), vid(k + 1, 0)))
        mk.append(lateral)
        bnd.append((vid(k + 1, n_cross), vid(k, n_cross)))
        mk.append(lateral)
    for j in range(n_cross):
        bnd.append((vid(n_axial, j), vid(n_axial, j + 1)))
        mk.append(OUTER)
    meta = {
        "generator": "cusp",
        "lambda": lam,
        "x_min": x_min,
        "x_max": x_max,
        "n_axial": n_axial,
        "n_cross": n_cross,
        "axial": axial,
    }
    return MetricMesh(verts, np.array(cells), None, np.array(bnd), tuple(mk), meta)


def refine(mesh: MetricMesh) -> MetricMesh:
    """Split every triangle into four through its edge midpoints."""
    nv = mesh.n_vertices
    mid_index: dict = {}
    new_pts = []

    def midpoint(a, b):
        k = _ekey(a, b)
        idx = mid_index.get(k)
        if idx is None:
            idx = nv + len(new_pts)
            mid_index[k] = idx
            new_pts.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
        return idx

    cells = np.empty((4 * mesh.n_cells, 3), dtype=np.int64)
    for c, (a, b, d) in enumerate(mesh.cells):
        ab, bd, da = midpoint(a, b), midpoint(b, d), midpoint(d, a)
        cells[4 * c : 4 * c + 4] = ((a, ab, da), (ab, b, bd), (da, bd, d), (ab, bd, da))
    metric = np.repeat(mesh.metric, 4, axis=0)
    bnd, mk = [], []
    for (a, b), m in zip(mesh.boundary, mesh.markers):
        c = mid_index[_ekey(a, b)]
        bnd += [(a, c), (c, b)]
        mk += [m, m]
    verts = np.vstack([mesh.vertices, np.array(new_pts).reshape(-1, 2)])
    meta = dict(mesh.meta)
    meta["refinements"] = meta.get("refinements", 0) + 1
    return MetricMesh(verts, cells, metric, np.array(bnd), tuple(mk), meta)


def refine_n(mesh: MetricMesh, levels: int) -> MetricMesh:
    for _ in range(levels):
        mesh = refine(mesh)
    return mesh


# ---------------------------------------------------------------------------
# Exhaustions


@dataclass
class ExhaustionSpec:
    """Generator id, its fixed parameters, and increasing truncation radii.

    ``per_octave`` sets the resolution per doubling of the radius so that
    consecutive stages share their common nodes exactly.
    """

    generator: str  # "annulus" | "cusp" | "radial"
    radii: Sequence[float]
    params: dict = field(default_factory=dict)
    per_octave: int = 8

    def __post_init__(self):
        r = [float(x) for x in self.radii]
        if not r or any(b <= a for a, b in zip(r, r[1:])):
            raise InvalidParameterError("exhaustion radii must be strictly increasing")
        self.radii = r


def _octaves(a: float, b: float, per_octave: int) -> int:
    n = per_octave * math.log2(b / a)
    k = int(round(n))
    if abs(n - k) > 1e-9:
        raise InvalidParameterError(
            f"radius ratio {b / a:g} is not a power of two; nested stages need dyadic radii"
        )
    return max(k, 1)


def build_exhaustion(spec: ExhaustionSpec) -> list:
    """Nested family of truncated domains, one per radius in ``spec.radii``."""
    g = spec.generator
    p = dict(spec.params)
    out = []
    for R in spec.radii:
        if g == "annulus":
            r_in = float(p.get("r_in", 1.0))
            n = _octaves(r_in, R, spec.per_octave)
            out.append(
                build_annulus_mesh(
                    r_in, R, max(n, 3), int(p.get("n_angular", 32)), 1.0,
                    inner=p.get("inner", DATA), outer=p.get("outer", OUTER),
                )
            )
        elif g == "cusp":
            x_min = float(p.get("x_min", 0.5))
            n = _octaves(x_min, R, spec.per_octave)
            out.append(
                build_cusp_mesh(
                    float(p["lambda"]), x_min, R, n, int(p.get("n_cross", 8)),
                    tip=p.get("tip", FREE), lateral=p.get("lateral", FREE),
                )
            )
        elif g == "radial":
            r_min = float(p.get("r_min", 1.0))
            n = _octaves(r_min, R, spec.per_octave)
            prof = p.get("profile", "euclidean")
            out.append(
                build_radial_model(int(p.get("n", 2)), prof, r_min, R, max(n, 8), lam=p.get("lambda"))
            )
        else:
            raise InvalidParameterError(f"unknown generator {g!r}")
    return out


# ---------------------------------------------------------------------------
# File I/O


def domain_to_dict(domain) -> dict:
    return domain.to_dict()


def domain_from_dict(d: dict):
    if "cells" in d:
        return MetricMesh.from_dict(d)
    if "nodes" in d:
        return RadialModel.from_dict(d)
    raise MeshError("document is neither a mesh nor a radial model")


def load_domain(path) -> MetricMesh | RadialModel:
    with open(path) as fh:
        return domain_from_dict(json.load(fh))


def iter_domains(domains: Iterable) -> Iterable:
    for d in domains:
        if not isinstance(d, (MetricMesh, RadialModel)):
            raise InvalidParameterError(f"not a domain: {type(d).__name__}")
        yield d

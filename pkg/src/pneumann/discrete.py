"""P1 discretization shared by meshes and radial models.

A :class:`Discretization` flattens a domain into the arrays the energy kernel
consumes: cells, metric-normalized hat gradients, cell volumes, and boundary
facets with their measures.  It is cached per domain object.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SizeMismatchError
from .geometry import DATA, OUTER, MetricMesh, RadialModel


@dataclass(frozen=True, eq=False)
class Discretization:
    n: int
    cells: np.ndarray  # (M, k) int64
    grads: np.ndarray  # (M, k, d)
    vol: np.ndarray  # (M,)
    facets: np.ndarray  # (F, kf) int64
    facet_measure: np.ndarray  # (F,)
    facet_marker: np.ndarray  # (F,) str
    positions: np.ndarray  # (n, dim)
    radius: np.ndarray  # (n,)
    cell_radius: np.ndarray  # (M,)
    facet_points: np.ndarray  # (F, dim) facet midpoints
    kind: str
    facet_cell: np.ndarray | None = None  # (F,) owning cell of each facet
    digest: str = ""

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def mass(self) -> np.ndarray:
        """Lumped (row-sum) mass of each vertex."""
        k = self.cells.shape[1]
        return np.bincount(self.cells.ravel(), weights=np.repeat(self.vol / k, k), minlength=self.n)

    @property
    def data_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_marker == DATA)

    def marker_vertices(self, marker: str) -> np.ndarray:
        return np.unique(self.facets[self.facet_marker == marker].ravel())

    def hat_norms(self, p: float) -> np.ndarray:
        """``||grad chi_i||_p`` for every hat function."""
        g = np.sqrt(np.einsum("mkd,mkd->mk", self.grads, self.grads))
        w = self.vol[:, None] * g**p
        return np.bincount(self.cells.ravel(), weights=w.ravel(), minlength=self.n) ** (1.0 / p)

    def laplace_diagonal(self) -> np.ndarray:
        g2 = np.einsum("mkd,mkd->mk", self.grads, self.grads)
        return np.bincount(self.cells.ravel(), weights=(self.vol[:, None] * g2).ravel(), minlength=self.n)


_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def discretize(domain) -> Discretization:
    if isinstance(domain, Discretization):
        return domain
    disc = _CACHE.get(domain)
    if disc is None:
        if isinstance(domain, MetricMesh):
            disc = _from_mesh(domain)
        elif isinstance(domain, RadialModel):
            disc = _from_radial(domain)
        else:
            raise InvalidParameterError(f"unsupported domain type {type(domain).__name__}")
        _CACHE[domain] = disc
    return disc


def _from_mesh(mesh: MetricMesh) -> Discretization:
    P = mesh.vertices[mesh.cells]  # (M, 3, 2)
    J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns = edges
    Jinv = np.linalg.inv(J)  # rows = grad(lambda_1), grad(lambda_2)
    B = np.empty((mesh.n_cells, 3, 2))
    B[:, 1] = Jinv[:, 0]
    B[:, 2] = Jinv[:, 1]
    B[:, 0] = -(B[:, 1] + B[:, 2])
    g = mesh.metric
    det = mesh.metric_det
    ginv = np.empty((mesh.n_cells, 2, 2))
    ginv[:, 0, 0] = g[:, 2] / det
    ginv[:, 1, 1] = g[:, 0] / det
    ginv[:, 0, 1] = ginv[:, 1, 0] = -g[:, 1] / det
    L = np.linalg.cholesky(ginv)  # ginv = L L^T
    grads = np.einsum("mji,mkj->mki", L, B)  # L^T B_a
    centroids = mesh.centroids
    mids = 0.5 * (mesh.vertices[mesh.boundary[:, 0]] + mesh.vertices[mesh.boundary[:, 1]])
    return Discretization(
        n=mesh.n_vertices,
        cells=np.ascontiguousarray(mesh.cells, dtype=np.int64),
        grads=np.ascontiguousarray(grads),
        vol=np.ascontiguousarray(mesh.cell_areas),
        facets=np.ascontiguousarray(mesh.boundary, dtype=np.int64),
        facet_measure=np.ascontiguousarray(mesh.edge_lengths),
        facet_marker=np.array(mesh.markers, dtype=object),
        positions=mesh.vertices,
        radius=mesh.radius,
        cell_radius=np.hypot(centroids[:, 0], centroids[:, 1]),
        facet_points=mids,
        kind="mesh",
        facet_cell=np.asarray(mesh.boundary_cell, dtype=np.int64),
        digest=mesh.digest(),
    )


def _from_radial(model: RadialModel) -> Discretization:
    r = model.nodes
    N = len(r) - 1
    dr = np.diff(r)
    cells = np.column_stack([np.arange(N), np.arange(1, N + 1)]).astype(np.int64)
    grads = np.empty((N, 2, 1))
    grads[:, 0, 0] = -1.0 / dr
    grads[:, 1, 0] = 1.0 / dr
    return Discretization(
        n=len(r),
        cells=cells,
        grads=grads,
        vol=np.ascontiguousarray(model.cell_volumes),
        facets=np.array([[0], [N]], dtype=np.int64),
        facet_measure=np.array([model.weight[0], model.weight[-1]]),
        facet_marker=np.array([DATA, OUTER], dtype=object),
        positions=r[:, None],
        radius=r,
        cell_radius=np.sqrt(r[:-1] * r[1:]),
        facet_points=np.array([[r[0]], [r[-1]]]),
        kind="radial",
        facet_cell=np.array([0, N - 1], dtype=np.int64),
        digest=model.digest(),
    )


@dataclass(frozen=True, eq=False)
class Restriction:
    """A discretization restricted to a subset of cells.

    ``vertices[k]`` is the parent index of local vertex ``k``; ``cells`` and
    ``facets`` are the parent indices of the kept cells and boundary facets.
    ``frontier`` holds local vertices shared with excluded cells or carrying
    the ``outer`` marker: the relative boundary on which zero-extension
    fields vanish.
    """

    disc: Discretization
    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    data_facets: np.ndarray  # positions of kept data facets among the parent's data facets
    frontier: np.ndarray

    def restrict_data(self, F):
        """Restrict cell and data-facet densities of ``F`` to the kept entities."""
        from .energy import FunctionalData

        f = None if F.f is None else np.asarray(F.f)[self.cells]
        h = None if F.h is None else np.asarray(F.h)[self.data_facets]
        return FunctionalData(f, h)

    def extend(self, u_local: np.ndarray, n_parent: int) -> np.ndarray:
        out = np.zeros(n_parent)
        out[self.vertices] = u_local
        return out


def restrict(disc: Discretization, cells) -> Restriction:
    """Sub-discretization on ``cells`` (indices or boolean mask)."""
    cells = np.asarray(cells)
    if cells.dtype == bool:
        cells = np.flatnonzero(cells)
    cells = np.unique(cells.astype(np.int64))
    if not len(cells):
        raise InvalidParameterError("empty cell subset")
    if disc.facet_cell is None:
        raise InvalidParameterError("discretization lacks facet ownership")
    keep = np.zeros(disc.n_cells, dtype=bool)
    keep[cells] = True
    verts = np.unique(disc.cells[cells].ravel())
    local = -np.ones(disc.n, dtype=np.int64)
    local[verts] = np.arange(len(verts))
    outside = np.zeros(disc.n, dtype=bool)
    outside[disc.cells[~keep].ravel()] = True
    kept_f = np.flatnonzero(keep[disc.facet_cell])
    outer_v = np.zeros(disc.n, dtype=bool)
    outer_v[disc.facets[disc.facet_marker == OUTER].ravel()] = True
    frontier = local[verts[outside[verts] | outer_v[verts]]]
    data_all = disc.data_facets
    data_pos = np.flatnonzero(keep[disc.facet_cell[data_all]])
    sub = Discretization(
        n=len(verts),
        cells=np.ascontiguousarray(local[disc.cells[cells]]),
        grads=np.ascontiguousarray(disc.grads[cells]),
        vol=np.ascontiguousarray(disc.vol[cells]),
        facets=np.ascontiguousarray(local[disc.facets[kept_f]]),
        facet_measure=disc.facet_measure[kept_f],
        facet_marker=disc.facet_marker[kept_f],
        positions=disc.positions[verts],
        radius=disc.radius[verts],
        cell_radius=disc.cell_radius[cells],
        facet_points=disc.facet_points[kept_f],
        kind=disc.kind,
        facet_cell=np.searchsorted(cells, disc.facet_cell[kept_f]),
        digest=disc.digest,
    )
    return Restriction(sub, verts, cells, kept_f, data_pos, np.sort(frontier))


def connected_cells(disc: Discretization, cells=None) -> int:
    """Number of connected components (cells sharing a vertex) of a cell subset."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    c = disc.cells if cells is None else disc.cells[np.asarray(cells)]
    k = c.shape[1]
    rows = np.repeat(c[:, 0], k - 1)
    cols = c[:, 1:].ravel()
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(disc.n, disc.n))
    used = np.unique(c.ravel())
    sub = A.tocsr()[used][:, used]
    return int(connected_components(sub, directed=False)[0])


def check_field(disc: Discretization, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (disc.n,):
        raise SizeMismatchError(f"field has shape {u.shape}, domain has {disc.n} vertices")
    if not np.all(np.isfinite(u)):
        raise SizeMismatchError("field contains non-finite values")
    return u

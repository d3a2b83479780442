import logging

import numpy as np
import torch
from skimage import measure

from cadsdf.api import config
from cadsdf.api.common import tally
from cadsdf.api.losses import gaussian_curvature_batch


logger = logging.getLogger(__name__)


class ScalarGrid(object):
    """
    Field samples on ``resolution`` evenly spaced nodes per axis.

    ``values[i, j, k]`` is the field at ``origin + spacing * (i, j, k)``.
    """

    def __init__(self, values, origin, spacing):
        # type: (np.ndarray, float, float) -> None
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3 or len(set(values.shape)) != 1:
            raise ValueError('grid values must be a cube, got shape {}'.format(values.shape))
        if not spacing > 0:
            raise ValueError('spacing must be positive, got {}'.format(spacing))
        if not np.all(np.isfinite(values)):
            raise ValueError('grid values must be finite')
        self.values = values
        self.origin = float(origin)
        self.spacing = float(spacing)

    @property
    def resolution(self):
        return self.values.shape[0]

    def __repr__(self):
        return '<{} resolution={} spacing={:.4g}>'.format(
            self.__class__.__name__, self.resolution, self.spacing)

    def coordinates(self):
        # type: () -> np.ndarray
        return self.origin + self.spacing * np.arange(self.resolution)


class TriangleMesh(object):
    def __init__(self, vertices, triangles, scalars=None):
        # type: (np.ndarray, np.ndarray, np.ndarray) -> None
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles):
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise ValueError('triangle index out of range')
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError('vertices must be finite')
        self.scalars = None if scalars is None else np.asarray(scalars, dtype=np.float64)

    def __repr__(self):
        return '<{} vertices={} triangles={}>'.format(
            self.__class__.__name__, len(self.vertices), len(self.triangles))

    @property
    def is_empty(self):
        return not len(self.triangles)

    def face_areas(self):
        # type: () -> np.ndarray
        tri = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def area(self):
        # type: () -> float
        return float(self.face_areas().sum())

    def edge_counts(self):
        # type: () -> dict
        """
        Number of triangles on each undirected edge, keyed by (low, high).
        """
        edges = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                                self.triangles[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        unique, counts = np.unique(edges, axis=0, return_counts=True)
        return {(int(a), int(b)): int(c) for (a, b), c in zip(unique, counts)}

    def is_watertight(self):
        # type: () -> bool
        counts = self.edge_counts()
        return bool(counts) and all(c == 2 for c in counts.values())

    def euler_characteristic(self):
        # type: () -> int
        return len(self.vertices) - len(self.edge_counts()) + len(self.triangles)

    def transformed(self, scale, translation):
        # type: (float, np.ndarray) -> TriangleMesh
        """
        Copy with vertices mapped to ``vertices * scale + translation``.
        """
        vertices = self.vertices * scale + np.asarray(translation, dtype=np.float64)
        return TriangleMesh(vertices, self.triangles.copy(), self.scalars)


def sample_grid(field, resolution=config.GRID_RESOLUTION, bound=config.GRID_BOUND,
                chunk=config.GRID_CHUNK):
    # type: (..., int, float, int) -> ScalarGrid
    """
    Evaluate ``field`` on ``resolution`` nodes per axis spanning
    [-bound, bound]^3, in row-major (x slowest) order.
    """
    resolution = int(resolution)
    if not config.MIN_RESOLUTION <= resolution <= config.MAX_RESOLUTION:
        raise ValueError('resolution must lie in [{}, {}], got {}'.format(
            config.MIN_RESOLUTION, config.MAX_RESOLUTION, resolution))
    axis = np.linspace(-bound, bound, resolution)
    spacing = 2.0 * bound / (resolution - 1)
    xs, ys, zs = np.meshgrid(axis, axis, axis, indexing='ij')
    points = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)

    values = np.empty(len(points))
    with torch.no_grad():
        for start in range(0, len(points), chunk):
            stop = start + chunk
            values[start:stop] = field.jets(points[start:stop], order=0).values.numpy()
    return ScalarGrid(values.reshape(resolution, resolution, resolution), -bound, spacing)


def _orient_outward(grid, vertices, triangles):
    """
    Flip the winding if face normals mostly point toward decreasing field.
    """
    tri = vertices[triangles]
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    gradient = np.stack(np.gradient(grid.values, grid.spacing), axis=-1)
    nodes = np.rint((tri.mean(axis=1) - grid.origin) / grid.spacing).astype(np.int64)
    nodes = np.clip(nodes, 0, grid.resolution - 1)
    field_gradient = gradient[nodes[:, 0], nodes[:, 1], nodes[:, 2]]
    if np.sum(normals * field_gradient) < 0:
        return triangles[:, [0, 2, 1]]
    return triangles


def marching_cubes(grid, iso=0.0):
    # type: (ScalarGrid, float) -> TriangleMesh
    """
    Extract the ``iso`` level set with marching cubes.

    Vertices are in world coordinates and shared between neighbouring
    cells; triangles are wound so their normals point toward increasing
    field values. A grid that never crosses ``iso`` gives an empty mesh.
    """
    values = grid.values
    if values.min() > iso or values.max() < iso:
        logger.warning('grid values [%g, %g] never cross iso %g; mesh is empty',
                       values.min(), values.max(), iso)
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))

    vertices, triangles, _, _ = measure.marching_cubes(
        values, level=iso, spacing=(grid.spacing,) * 3, allow_degenerate=False
    )
    vertices = vertices.astype(np.float64) + grid.origin
    triangles = triangles.astype(np.int64)
    keep = ((triangles[:, 0] != triangles[:, 1]) & (triangles[:, 1] != triangles[:, 2])
            & (triangles[:, 2] != triangles[:, 0]))
    triangles = _orient_outward(grid, vertices, triangles[keep])
    logger.debug('marching cubes: %d vertices, %d triangles', len(vertices), len(triangles))
    return TriangleMesh(vertices, triangles)


def extract_mesh(field, resolution=config.GRID_RESOLUTION):
    # type: (..., int) -> TriangleMesh
    return marching_cubes(sample_grid(field, resolution))


def curvature_colors(field, mesh, chunk=config.GRID_CHUNK, diagnostics=None):
    # type: (..., TriangleMesh, int, ...) -> np.ndarray
    """
    |Gaussian curvature| of the field's level set at every mesh vertex,
    in the network-input frame. Vertices with a vanishing gradient get 0.
    """
    scalars = np.zeros(len(mesh.vertices))
    guarded = 0
    with torch.no_grad():
        for start in range(0, len(mesh.vertices), chunk):
            stop = start + chunk
            jets = field.jets(mesh.vertices[start:stop], order=2, frame='network')
            k, valid = gaussian_curvature_batch(jets.gradients, jets.hessians)
            scalars[start:stop] = k.abs().numpy()
            guarded += int((~valid).sum())
    if guarded:
        logger.info('%d vertices with vanishing gradient coloured 0', guarded)
    tally(diagnostics, 'guarded_curvature', guarded)
    return scalars

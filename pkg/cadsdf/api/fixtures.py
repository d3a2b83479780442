"""
Synthetic CAD-like test shapes: exact surface samples, a ground-truth mesh
and the sharp edges of each shape.
"""
import logging
import math

import numpy as np
import trimesh

from cadsdf.api import config
from cadsdf.api.meshing import TriangleMesh
from cadsdf.api.metrics import sample_mesh
from cadsdf.api.sampling import PointCloud


logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 100


class _SpherePatch(object):
    def __init__(self, radius):
        self.radius = radius
        self.area = 4.0 * math.pi * radius ** 2

    def sample(self, rng, count):
        normals = rng.standard_normal((count, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return self.radius * normals, normals


class _CylinderWall(object):
    """
    Side of a z-aligned cylinder; ``inward`` for the wall of a hole.
    """

    def __init__(self, radius, z0, z1, inward=False):
        self.radius = radius
        self.z0, self.z1 = z0, z1
        self.sign = -1.0 if inward else 1.0
        self.area = 2.0 * math.pi * radius * (z1 - z0)

    def sample(self, rng, count):
        theta = rng.uniform(0.0, 2.0 * math.pi, count)
        z = rng.uniform(self.z0, self.z1, count)
        radial = np.stack([np.cos(theta), np.sin(theta), np.zeros(count)], axis=1)
        points = self.radius * radial
        points[:, 2] = z
        return points, self.sign * radial


class _Disk(object):
    def __init__(self, radius, z, up):
        self.radius = radius
        self.z = z
        self.normal = np.array([0.0, 0.0, 1.0 if up else -1.0])
        self.area = math.pi * radius ** 2

    def sample(self, rng, count):
        r = self.radius * np.sqrt(rng.random(count))
        theta = rng.uniform(0.0, 2.0 * math.pi, count)
        points = np.stack([r * np.cos(theta), r * np.sin(theta), np.full(count, self.z)], axis=1)
        return points, np.tile(self.normal, (count, 1))


class _MeshPatch(object):
    """
    Planar faces sampled straight from their triangles.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.area = mesh.area()

    def sample(self, rng, count):
        samples = sample_mesh(self.mesh, count, rng)
        return samples.points, samples.normals


class _Surface(object):
    def __init__(self, patches):
        self.patches = patches
        self.areas = np.array([p.area for p in patches])

    def sample(self, rng, count):
        counts = rng.multinomial(count, self.areas / self.areas.sum())
        points, normals = [], []
        for patch, n in zip(self.patches, counts):
            if n:
                p, nrm = patch.sample(rng, int(n))
                points.append(p)
                normals.append(nrm)
        points = np.concatenate(points)
        normals = np.concatenate(normals)
        order = rng.permutation(count)
        return points[order], normals[order]


class Fixture(object):
    def __init__(self, kind, cloud, mesh, edges):
        # type: (str, PointCloud, TriangleMesh, np.ndarray) -> None
        self.kind = kind
        self.cloud = cloud
        self.mesh = mesh
        self.edges = edges

    def __repr__(self):
        return '<{} kind={} points={} edges={}>'.format(
            self.__class__.__name__, self.kind, len(self.cloud), len(self.edges))

    def distance_to_edges(self, points):
        # type: (np.ndarray) -> np.ndarray
        return distance_to_segments(points, self.edges)


def distance_to_segments(points, segments, chunk=4096):
    # type: (np.ndarray, np.ndarray, int) -> np.ndarray
    """
    Euclidean distance from every point to the closest of ``segments``
    (an (M, 2, 3) array); +inf when there are no segments.
    """
    points = np.asarray(points, dtype=np.float64)
    if not len(segments):
        return np.full(len(points), np.inf)
    a = segments[:, 0]
    ab = segments[:, 1] - a
    length2 = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk, None, :]
        t = np.clip(np.sum((p - a) * ab, axis=2) / length2, 0.0, 1.0)
        closest = a + t[..., None] * ab
        out[start:start + chunk] = np.linalg.norm(p - closest, axis=2).min(axis=1)
    return out


def _circle(radius, z, segments=config.CURVED_EDGE_SEGMENTS):
    theta = np.linspace(0.0, 2.0 * math.pi, segments + 1)
    ring = np.stack([radius * np.cos(theta), radius * np.sin(theta), np.full(segments + 1, z)],
                    axis=1)
    return np.stack([ring[:-1], ring[1:]], axis=1)


def _box_edges(half):
    # type: (np.ndarray) -> np.ndarray
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                       dtype=np.float64) * half
    edges = []
    for i in range(8):
        for j in range(i + 1, 8):
            if np.count_nonzero(corners[i] != corners[j]) == 1:
                edges.append([corners[i], corners[j]])
    return np.array(edges)


def _from_trimesh(mesh):
    return TriangleMesh(np.asarray(mesh.vertices), np.asarray(mesh.faces))


def _orient(vertices, triangles, outward):
    """
    Flip triangles whose normal disagrees with the per-face ``outward``.
    """
    tri = vertices[triangles]
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = np.sum(normals * outward, axis=1) < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def _sphere():
    radius = config.SPHERE_RADIUS
    mesh = _from_trimesh(trimesh.creation.icosphere(subdivisions=5, radius=radius))
    return _Surface([_SpherePatch(radius)]), mesh, np.empty((0, 2, 3))


def _cube():
    half = config.CUBE_HALF
    mesh = _from_trimesh(trimesh.creation.box(extents=(2 * half,) * 3))
    return _Surface([_MeshPatch(mesh)]), mesh, _box_edges(np.full(3, half))


def _cylinder():
    radius, half = config.CYLINDER_RADIUS, config.CYLINDER_HALF_HEIGHT
    mesh = _from_trimesh(trimesh.creation.cylinder(
        radius=radius, height=2 * half, sections=config.CURVED_EDGE_SEGMENTS))
    surface = _Surface([
        _CylinderWall(radius, -half, half),
        _Disk(radius, half, up=True),
        _Disk(radius, -half, up=False),
    ])
    edges = np.concatenate([_circle(radius, half), _circle(radius, -half)])
    return surface, mesh, edges


def _box_minus_cylinder():
    """
    Square plate with a round through-hole along z.

    The plate faces are triangulated by rays from the axis: each ray joins a
    hole-rim vertex to the matching point on the square outline, and the
    ray angles include the four square corners.
    """
    half = config.CUBE_HALF
    half_z = config.CUBE_HALF / 2
    radius = config.HOLE_RADIUS
    segments = config.CURVED_EDGE_SEGMENTS

    theta = 2.0 * math.pi * np.arange(segments) / segments
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rim = radius * direction
    outline = direction * (half / np.abs(direction).max(axis=1))[:, None]

    def ring(xy, z):
        return np.column_stack([xy, np.full(segments, z)])

    vertices = np.concatenate([
        ring(rim, half_z), ring(outline, half_z), ring(rim, -half_z), ring(outline, -half_z)
    ])
    rim_top, out_top, rim_bot, out_bot = (np.arange(segments) + k * segments for k in range(4))
    nxt = np.roll(np.arange(segments), -1)

    def quads(a, b):
        # a[i], b[i], b[i+1], a[i+1]
        return np.concatenate([
            np.stack([a, b, b[nxt]], axis=1),
            np.stack([a, b[nxt], a[nxt]], axis=1),
        ])

    planar_groups = [
        (quads(rim_top, out_top), lambda c: np.tile([0.0, 0.0, 1.0], (len(c), 1))),
        (quads(rim_bot, out_bot), lambda c: np.tile([0.0, 0.0, -1.0], (len(c), 1))),
        (quads(out_top, out_bot), lambda c: np.column_stack([c[:, :2], np.zeros(len(c))])),
    ]
    planar = []
    for triangles, outward in planar_groups:
        centroids = vertices[triangles].mean(axis=1)
        planar.append(_orient(vertices, triangles, outward(centroids)))
    planar = np.concatenate(planar)

    wall = quads(rim_top, rim_bot)
    centroids = vertices[wall].mean(axis=1)
    wall = _orient(vertices, wall, -np.column_stack([centroids[:, :2], np.zeros(len(wall))]))

    mesh = TriangleMesh(vertices, np.concatenate([planar, wall]))
    surface = _Surface([
        _MeshPatch(TriangleMesh(vertices, planar)),
        _CylinderWall(radius, -half_z, half_z, inward=True),
    ])
    edges = np.concatenate([
        _box_edges(np.array([half, half, half_z])),
        _circle(radius, half_z),
        _circle(radius, -half_z),
    ])
    return surface, mesh, edges


def _fandisk_like_wedge():
    """
    Triangular prism along y with unequal dihedral angles.
    """
    profile = np.array([[-0.4, -0.3], [0.4, -0.3], [-0.1, 0.35]])
    half_y = 0.3
    corners = np.array([[x, y, z] for y in (-half_y, half_y) for x, z in profile])
    mesh = _from_trimesh(trimesh.convex.convex_hull(corners))
    edges = []
    for y_index in (0, 3):
        for i in range(3):
            edges.append([corners[y_index + i], corners[y_index + (i + 1) % 3]])
    for i in range(3):
        edges.append([corners[i], corners[i + 3]])
    return _Surface([_MeshPatch(mesh)]), mesh, np.array(edges)


_BUILDERS = {
    'sphere': _sphere,
    'cube': _cube,
    'cylinder': _cylinder,
    'box_minus_cylinder': _box_minus_cylinder,
    'fandisk_like_wedge': _fandisk_like_wedge,
}


def synth_fixture(kind, count=10000, noise_sigma=0.0, missing_fraction=0.0, seed=config.SEED):
    # type: (str, int, float, float, int) -> Fixture
    """
    Sample ``count`` points uniformly by area on the surface of ``kind``.

    ``noise_sigma`` is a fraction of the ground-truth bounding-box diagonal
    used as the per-axis Gaussian displacement. With ``missing_fraction``
    set, points closer than ``missing_fraction / 2`` to a sharp edge are
    dropped (and replaced by fresh samples elsewhere).
    """
    if kind not in _BUILDERS:
        raise ValueError('unknown fixture {!r}, expected one of {}'.format(
            kind, ', '.join(config.FIXTURE_KINDS)))
    if count < 1:
        raise ValueError('count must be >= 1, got {}'.format(count))
    if not noise_sigma >= 0:
        raise ValueError('noise_sigma must be >= 0, got {}'.format(noise_sigma))
    if not 0 <= missing_fraction < 1:
        raise ValueError('missing_fraction must lie in [0, 1), got {}'.format(missing_fraction))
    surface, mesh, edges = _BUILDERS[kind]()
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    diagonal = float(np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))
    band = 0.5 * missing_fraction

    points, normals = [], []
    kept = 0
    for _ in range(MAX_ATTEMPTS):
        draw = max(2 * (count - kept), 64)
        p, n = surface.sample(rng, draw)
        if noise_sigma > 0:
            p = p + rng.normal(scale=noise_sigma * diagonal, size=p.shape)
        if band > 0:
            keep = distance_to_segments(p, edges) > band
            p, n = p[keep], n[keep]
        points.append(p)
        normals.append(n)
        kept += len(p)
        if kept >= count:
            break
    else:
        raise ValueError('could not place {} points on {} outside the edge bands'.format(
            count, kind))

    cloud = PointCloud(np.concatenate(points)[:count], np.concatenate(normals)[:count])
    logger.debug('fixture %s: %d points, noise %g, missing %g', kind, count, noise_sigma,
                 missing_fraction)
    return Fixture(kind, cloud, mesh, edges)

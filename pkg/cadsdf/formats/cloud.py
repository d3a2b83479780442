"""
Point cloud files: XYZ (whitespace separated, 3 or 6 columns per line) and
PLY (ASCII or binary little endian, x/y/z with optional nx/ny/nz).
"""
import json
import logging

import numpy as np

from cadsdf.api.common import ParseError
from cadsdf.api.sampling import PointCloud
from cadsdf.formats.util import (
    FLOAT_FORMAT,
    extension,
    load_ply,
    parse_floats,
    vertex_property,
    write_ply,
)


logger = logging.getLogger(__name__)

CLOUD_EXTENSIONS = ('xyz', 'ply')
NORMAL_PROPERTIES = ('nx', 'ny', 'nz')


class Transform(object):
    """
    Uniform scale about ``center``: normalized = (p - center) * scale.
    """

    def __init__(self, scale=1.0, center=(0.0, 0.0, 0.0)):
        # type: (float, ...) -> None
        if not scale > 0:
            raise ValueError('scale must be positive, got {}'.format(scale))
        self.scale = float(scale)
        self.center = np.asarray(center, dtype=np.float64).reshape(3)

    def __repr__(self):
        return '<{} scale={!r} center={}>'.format(
            self.__class__.__name__, self.scale, self.center.tolist())

    def apply(self, points):
        # type: (np.ndarray) -> np.ndarray
        return (np.asarray(points, dtype=np.float64) - self.center) * self.scale

    def invert(self, points):
        # type: (np.ndarray) -> np.ndarray
        return np.asarray(points, dtype=np.float64) / self.scale + self.center

    def denormalize(self, mesh):
        """
        Map a mesh extracted in the normalized frame back to input coordinates.
        """
        return mesh.transformed(1.0 / self.scale, self.center)

    def as_dict(self):
        return {'scale': self.scale, 'center': self.center.tolist()}

    def save(self, path):
        # type: (str) -> None
        with open(path, 'w') as stream:
            json.dump(self.as_dict(), stream, sort_keys=True, indent=2)

    @classmethod
    def load(cls, path):
        # type: (str) -> Transform
        try:
            with open(path) as stream:
                data = json.load(stream)
            return cls(data['scale'], data['center'])
        except (ValueError, KeyError, TypeError) as e:
            raise ParseError('bad transform record ({})'.format(e), path=path)


def _dedupe(points, normals, path):
    _, first = np.unique(points, axis=0, return_index=True)
    duplicates = len(points) - len(first)
    if not duplicates:
        return points, normals
    keep = np.sort(first)
    logger.warning('%s: removed %d duplicate points', path, duplicates)
    return points[keep], None if normals is None else normals[keep]


def _unit(normals, path):
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    if np.any(lengths == 0):
        raise ParseError('{} zero-length normals'.format(int(np.sum(lengths == 0))), path=path)
    return normals / lengths


def _read_xyz(path):
    rows = []
    width = None
    with open(path) as stream:
        for number, raw in enumerate(stream, 1):
            tokens = raw.split()
            if not tokens or tokens[0].startswith('#'):
                continue
            if len(tokens) not in (3, 6):
                raise ParseError('expected 3 or 6 values, got {}'.format(len(tokens)),
                                 path=path, line=number)
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise ParseError('expected {} values like the first point, got {}'.format(
                    width, len(tokens)), path=path, line=number)
            rows.append(parse_floats(tokens, path, number))
    if not rows:
        raise ParseError('no points', path=path)
    data = np.array(rows, dtype=np.float64)
    return data[:, :3], data[:, 3:] if width == 6 else None


def _read_ply_cloud(path):
    loaded = load_ply(path)
    points = np.asarray(loaded.vertices, dtype=np.float64)
    columns = [vertex_property(loaded, name) for name in NORMAL_PROPERTIES]
    normals = None
    if all(column is not None for column in columns):
        normals = np.column_stack(columns)
    return points, normals


def load_cloud(path):
    # type: (str) -> PointCloud
    """
    Read a point cloud; exact duplicate points are dropped with a warning.
    """
    if extension(path, CLOUD_EXTENSIONS) == 'xyz':
        points, normals = _read_xyz(path)
    else:
        points, normals = _read_ply_cloud(path)
    if not np.all(np.isfinite(points)):
        raise ParseError('non-finite coordinates', path=path)
    points, normals = _dedupe(points, normals, path)
    if normals is not None:
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-6):
            normals = _unit(normals, path)
    logger.info('loaded %d points from %s', len(points), path)
    return PointCloud(points, normals)


def write_cloud(path, cloud, binary=False):
    # type: (str, PointCloud, bool) -> None
    ext = extension(path, CLOUD_EXTENSIONS)
    columns = [cloud.points] if cloud.normals is None else [cloud.points, cloud.normals]
    if ext == 'xyz':
        if binary:
            raise ValueError('XYZ files are ASCII only')
        np.savetxt(path, np.column_stack(columns), fmt=FLOAT_FORMAT)
        return
    named = [(axis, cloud.points[:, i]) for i, axis in enumerate('xyz')]
    if cloud.normals is not None:
        named += [(name, cloud.normals[:, i]) for i, name in enumerate(NORMAL_PROPERTIES)]
    write_ply(path, named, binary=binary)


def normalize_cloud(cloud):
    # type: (PointCloud) -> tuple
    """
    Centre the tight bounding box on the origin and scale its longest side
    to 1. Returns the normalized cloud and the :class:`Transform` applied.
    """
    low = cloud.points.min(axis=0)
    high = cloud.points.max(axis=0)
    extent = float(np.max(high - low))
    if not extent > 0:
        raise ValueError('cannot normalize a cloud with zero extent')
    transform = Transform(1.0 / extent, 0.5 * (low + high))
    return PointCloud(transform.apply(cloud.points), cloud.normals), transform

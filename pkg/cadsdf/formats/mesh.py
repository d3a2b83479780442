import logging

import numpy as np
import trimesh

from cadsdf.api.common import ParseError
from cadsdf.api.meshing import TriangleMesh
from cadsdf.formats.util import (
    FLOAT_FORMAT,
    LOAD_ERRORS,
    extension,
    load_ply,
    vertex_property,
    write_ply,
)


logger = logging.getLogger(__name__)

MESH_EXTENSIONS = ('obj', 'ply')
SCALAR_PROPERTY = 'quality'


def _bad_obj_line(path):
    # type: (str) -> int
    """
    Number of the first face line whose vertex reference is malformed or
    out of range, or None.
    """
    vertex_count = 0
    with open(path) as stream:
        for number, raw in enumerate(stream, 1):
            tokens = raw.split()
            if not tokens:
                continue
            if tokens[0] == 'v':
                vertex_count += 1
            elif tokens[0] == 'f':
                for token in tokens[1:]:
                    # "7", "7/1", "7//3", "-1/2/3"
                    try:
                        index = int(token.split('/')[0])
                    except ValueError:
                        return number
                    if not (1 <= index <= vertex_count or -vertex_count <= index <= -1):
                        return number
    return None


def _read_obj(path):
    bad_line = _bad_obj_line(path)
    if bad_line is not None:
        raise ParseError('face references a missing vertex', path=path, line=bad_line)
    try:
        loaded = trimesh.load(path, file_type='obj', process=False, force='mesh',
                              maintain_order=True)
    except LOAD_ERRORS as e:
        logger.debug('trimesh failed on %s', path, exc_info=True)
        raise ParseError('unreadable OBJ data ({})'.format(e), path=path)
    faces = getattr(loaded, 'faces', None)
    if faces is None:
        faces = np.empty((0, 3), dtype=np.int64)
    return TriangleMesh(loaded.vertices, faces)


def _read_ply_mesh(path):
    loaded = load_ply(path)
    faces = getattr(loaded, 'faces', None)
    if faces is None:
        faces = np.empty((0, 3), dtype=np.int64)
    try:
        return TriangleMesh(loaded.vertices, faces, vertex_property(loaded, SCALAR_PROPERTY))
    except ValueError as e:
        raise ParseError(str(e), path=path)


def read_mesh(path):
    # type: (str) -> TriangleMesh
    """
    Read an OBJ or PLY mesh through trimesh, keeping vertex order. Polygons
    come back as triangles; PLY ``quality`` vertex values become the mesh
    scalars.
    """
    if extension(path, MESH_EXTENSIONS) == 'obj':
        mesh = _read_obj(path)
    else:
        mesh = _read_ply_mesh(path)
    logger.debug('read %r from %s', mesh, path)
    return mesh


def write_mesh(path, mesh, binary=False):
    # type: (str, TriangleMesh, bool) -> None
    """
    Write ``mesh`` as OBJ or PLY with full float64 precision. Per-vertex
    scalars are only representable in PLY, where they go to a ``quality``
    property.
    """
    ext = extension(path, MESH_EXTENSIONS)
    if ext == 'obj':
        if mesh.scalars is not None:
            raise ValueError('OBJ cannot carry per-vertex scalars; write PLY instead')
        if binary:
            raise ValueError('OBJ files are ASCII only')
        with open(path, 'wb') as stream:
            np.savetxt(stream, mesh.vertices, fmt='v ' + ' '.join([FLOAT_FORMAT] * 3))
            np.savetxt(stream, mesh.triangles + 1, fmt='f %d %d %d')
    else:
        columns = [(axis, mesh.vertices[:, i]) for i, axis in enumerate('xyz')]
        if mesh.scalars is not None:
            columns.append((SCALAR_PROPERTY, mesh.scalars))
        write_ply(path, columns, mesh.triangles, binary=binary)
    logger.info('wrote %d vertices, %d triangles to %s', len(mesh.vertices),
                len(mesh.triangles), path)

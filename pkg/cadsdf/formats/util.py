import logging
import os

import numpy as np
import trimesh

from cadsdf.api.common import ParseError


logger = logging.getLogger(__name__)

# %.17g round-trips every float64
FLOAT_FORMAT = '%.17g'

# what trimesh raises on malformed or truncated files
LOAD_ERRORS = (ValueError, IndexError, KeyError, TypeError, AttributeError)


def extension(path, allowed):
    # type: (str, tuple) -> str
    ext = os.path.splitext(str(path))[1].lower().lstrip('.')
    if ext not in allowed:
        raise ParseError('unsupported extension {!r}, expected one of {}'.format(
            ext, ', '.join(allowed)), path=path)
    return ext


def parse_floats(tokens, path=None, line=None, element=None):
    # type: (list, str, int, int) -> list
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ParseError('expected numbers, got {!r}'.format(' '.join(tokens)),
                         path=path, line=line, element=element)
    if not all(np.isfinite(values)):
        raise ParseError('non-finite value', path=path, line=line, element=element)
    return values


def ply_header(path):
    # type: (str) -> tuple
    """
    ``(encoding, {element: count}, header_lines)`` from the text header of a
    PLY file.
    """
    counts = {}
    encoding = None
    with open(path, 'rb') as stream:
        for number, raw in enumerate(stream, 1):
            tokens = raw.decode('ascii', 'replace').split()
            if number == 1 and tokens != ['ply']:
                raise ParseError('missing "ply" magic', path=path, line=1)
            if not tokens:
                continue
            if tokens[0] == 'format' and len(tokens) > 1:
                encoding = tokens[1]
            elif tokens[0] == 'element' and len(tokens) == 3:
                try:
                    counts[tokens[1]] = int(tokens[2])
                except ValueError:
                    raise ParseError('bad element count {!r}'.format(tokens[2]), path=path,
                                     line=number)
            elif tokens[0] == 'end_header':
                return encoding, counts, number
    raise ParseError('header has no end_header', path=path)


def _ascii_rows(path, header_lines):
    with open(path) as stream:
        return sum(1 for number, raw in enumerate(stream, 1)
                   if number > header_lines and raw.strip())


def load_ply(path):
    # type: (str) -> ...
    """
    Load a PLY file with trimesh, without merging or reordering vertices.

    Returns a ``trimesh.Trimesh`` when the file has faces and a
    ``trimesh.PointCloud`` otherwise. A file holding fewer vertices than its
    header declares raises :class:`ParseError` naming the first missing
    element.
    """
    encoding, counts, header_lines = ply_header(path)
    declared = counts.get('vertex', 0)
    if not declared:
        raise ParseError('no vertex element', path=path)
    try:
        loaded = trimesh.load(path, file_type='ply', process=False)
    except LOAD_ERRORS as e:
        logger.debug('trimesh failed on %s', path, exc_info=True)
        if encoding == 'ascii':
            available = _ascii_rows(path, header_lines)
            if available < declared:
                raise ParseError('expected {} vertex elements, file ends after {}'.format(
                    declared, available), path=path, element=available)
        raise ParseError('unreadable PLY data ({})'.format(e), path=path)
    if isinstance(loaded, trimesh.Scene):
        raise ParseError('expected a single mesh or point cloud', path=path)
    if len(loaded.vertices) != declared:
        raise ParseError('expected {} vertex elements, got {}'.format(
            declared, len(loaded.vertices)), path=path, element=len(loaded.vertices))
    return loaded


def vertex_property(geometry, name):
    # type: (..., str) -> np.ndarray
    """
    Per-vertex PLY property ``name`` as float64, or None. trimesh keeps
    unrecognised properties in ``vertex_attributes`` and the raw elements
    under ``metadata['_ply_raw']``.
    """
    attributes = getattr(geometry, 'vertex_attributes', None) or {}
    if name in attributes:
        return np.asarray(attributes[name], dtype=np.float64).reshape(-1)
    raw = geometry.metadata.get('_ply_raw', {}).get('vertex', {}).get('data')
    if raw is None:
        return None
    names = raw.dtype.names if hasattr(raw, 'dtype') else tuple(raw)
    if not names or name not in names:
        return None
    return np.asarray(raw[name], dtype=np.float64).reshape(-1)


def write_ply(path, columns, faces=None, binary=False):
    # type: (str, list, np.ndarray, bool) -> None
    """
    Write a vertex element made of ``columns`` (a list of (name, 1-D array)
    pairs, all stored as double) and an optional triangle face element.
    """
    count = len(columns[0][1])
    lines = ['ply', 'format {} 1.0'.format('binary_little_endian' if binary else 'ascii'),
             'element vertex {}'.format(count)]
    lines.extend('property double {}'.format(name) for name, _ in columns)
    if faces is not None:
        lines.append('element face {}'.format(len(faces)))
        lines.append('property list uchar int vertex_indices')
    lines.append('end_header')

    vertices = np.column_stack([np.asarray(values, dtype=np.float64) for _, values in columns])
    with open(path, 'wb') as stream:
        stream.write(('\n'.join(lines) + '\n').encode('ascii'))
        if binary:
            stream.write(vertices.astype('<f8').tobytes())
            if faces is not None:
                rows = np.empty(len(faces), dtype=[('n', 'u1'), ('v', '<i4', (3,))])
                rows['n'] = 3
                rows['v'] = faces
                stream.write(rows.tobytes())
        else:
            np.savetxt(stream, vertices, fmt=FLOAT_FORMAT)
            if faces is not None and len(faces):
                np.savetxt(stream, np.column_stack([np.full(len(faces), 3), faces]), fmt='%d')

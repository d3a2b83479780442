import logging

import numpy as np
from scipy.spatial import cKDTree

from cadsdf.api import config


logger = logging.getLogger(__name__)

REPORT_FIELDS = ['nc', 'cd', 'f1', 'hausdorff', 'sample_count']


class SurfaceSamples(object):
    def __init__(self, points, normals):
        # type: (np.ndarray, np.ndarray) -> None
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if self.points.shape != self.normals.shape:
            raise ValueError('points and normals differ in length')
        if not len(self.points):
            raise ValueError('surface samples must not be empty')
        if np.any(np.abs(np.linalg.norm(self.normals, axis=1) - 1.0) > 1e-6):
            raise ValueError('sample normals must have unit length')
        self._tree = None

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return '<{} count={}>'.format(self.__class__.__name__, len(self))

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree


class MetricsReport(object):
    def __init__(self, nc, cd, f1, hausdorff, sample_count):
        self.nc = float(nc)
        self.cd = float(cd)
        self.f1 = float(f1)
        self.hausdorff = float(hausdorff)
        self.sample_count = int(sample_count)

    def __repr__(self):
        return '<{} nc={:.3f} cd={:.3f} f1={:.3f} hausdorff={:.5f}>'.format(
            self.__class__.__name__, self.nc, self.cd, self.f1, self.hausdorff)

    def as_row(self):
        return [repr(self.nc), repr(self.cd), repr(self.f1), repr(self.hausdorff),
                self.sample_count]

    def as_table(self):
        # type: () -> str
        lines = [
            ('NC (x1e2)', '{:.3f}'.format(self.nc)),
            ('CD L1 (x1e3)', '{:.3f}'.format(self.cd)),
            ('F1 (x1e2)', '{:.3f}'.format(self.f1)),
            ('Hausdorff', '{:.6f}'.format(self.hausdorff)),
            ('samples', str(self.sample_count)),
        ]
        width = max(len(name) for name, _ in lines)
        return '\n'.join('{}  {}'.format(name.ljust(width), value) for name, value in lines)


def sample_mesh(mesh, count, rng):
    # type: (..., int, np.random.Generator) -> SurfaceSamples
    """
    Area-weighted random points on ``mesh`` with the normals of their faces.
    """
    if mesh.is_empty:
        raise ValueError('cannot sample an empty mesh')
    areas = mesh.face_areas()
    total = areas.sum()
    if not total > 0:
        raise ValueError('cannot sample a mesh with zero area')

    faces = rng.choice(len(areas), size=count, p=areas / total)
    uv = rng.random((count, 2))
    flip = uv.sum(axis=1) > 1.0
    uv[flip] = 1.0 - uv[flip]

    tri = mesh.vertices[mesh.triangles[faces]]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    points = tri[:, 0] + uv[:, :1] * e1 + uv[:, 1:] * e2
    normals = np.cross(e1, e2)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return SurfaceSamples(points, normals)


def _nearest(source, target, p=2):
    # type: (SurfaceSamples, SurfaceSamples, int) -> tuple
    """
    Distance and index of the nearest target point for every source point.
    """
    distances, index = target.tree.query(source.points, k=1, p=p)
    return distances, index


def chamfer_l1(a, b):
    # type: (SurfaceSamples, SurfaceSamples) -> float
    """
    Symmetric mean nearest-neighbour L1 distance, scaled by 1e3.
    """
    d_ab, _ = _nearest(a, b, p=1)
    d_ba, _ = _nearest(b, a, p=1)
    return 1e3 * 0.5 * (d_ab.mean() + d_ba.mean())


def f1_score(a, b, threshold=config.F1_THRESHOLD):
    # type: (SurfaceSamples, SurfaceSamples, float) -> float
    """
    Harmonic mean of precision (A near B) and recall (B near A), scaled by
    1e2, with Euclidean distances below ``threshold`` counting as hits.
    """
    d_ab, _ = _nearest(a, b)
    d_ba, _ = _nearest(b, a)
    precision = float(np.mean(d_ab < threshold))
    recall = float(np.mean(d_ba < threshold))
    if precision + recall == 0:
        return 0.0
    return 1e2 * 2.0 * precision * recall / (precision + recall)


def normal_consistency(a, b):
    # type: (SurfaceSamples, SurfaceSamples) -> float
    """
    Mean absolute cosine between each normal and the normal of its nearest
    neighbour on the other surface, both directions, scaled by 1e2.
    Orientation does not matter.
    """
    _, i_ab = _nearest(a, b)
    _, i_ba = _nearest(b, a)
    cos_ab = np.abs(np.sum(a.normals * b.normals[i_ab], axis=1))
    cos_ba = np.abs(np.sum(b.normals * a.normals[i_ba], axis=1))
    return 1e2 * 0.5 * (cos_ab.mean() + cos_ba.mean())


def hausdorff(a, b):
    # type: (SurfaceSamples, SurfaceSamples) -> float
    d_ab, _ = _nearest(a, b)
    d_ba, _ = _nearest(b, a)
    return float(max(d_ab.max(), d_ba.max()))


def evaluate_samples(recon, gt, threshold=config.F1_THRESHOLD):
    # type: (SurfaceSamples, SurfaceSamples, float) -> MetricsReport
    return MetricsReport(
        nc=normal_consistency(recon, gt),
        cd=chamfer_l1(recon, gt),
        f1=f1_score(recon, gt, threshold),
        hausdorff=hausdorff(recon, gt),
        sample_count=min(len(recon), len(gt)),
    )


def evaluate_meshes(recon, gt, count=config.METRIC_SAMPLES, seed=config.SEED,
                    threshold=config.F1_THRESHOLD):
    # type: (..., ..., int, int, float) -> MetricsReport
    """
    Sample ``count`` points on both meshes and compare them.
    """
    rng = np.random.default_rng(seed)
    report = evaluate_samples(sample_mesh(recon, count, rng), sample_mesh(gt, count, rng),
                              threshold)
    logger.info('metrics: %r', report)
    return report

import logging

import numpy as np
import torch
from scipy.spatial import cKDTree

from cadsdf.api import config
from cadsdf.api.common import as_points, tally
from cadsdf.api.losses import GAUSS_KINDS


logger = logging.getLogger(__name__)


class PointCloud(object):
    """
    Input points, with optional unit normals.

    Normals only ever feed the evaluation; the training losses ignore them.
    """

    def __init__(self, points, normals=None):
        # type: (..., ...) -> None
        self.points = as_points(points)
        if not len(self.points):
            raise ValueError('a point cloud needs at least one point')
        self.normals = None
        if normals is not None:
            normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
            if normals.shape != self.points.shape:
                raise ValueError('normals shape {} does not match points shape {}'.format(
                    normals.shape, self.points.shape))
            lengths = np.linalg.norm(normals, axis=1)
            if np.any(np.abs(lengths - 1.0) > 1e-6):
                raise ValueError('normals must have unit length')
            self.normals = normals
        self._tree = None

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return '<{} points={} normals={}>'.format(
            self.__class__.__name__, len(self.points), self.normals is not None)

    @property
    def tree(self):
        # type: () -> cKDTree
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def check_bounds(self, bound=config.CLOUD_BOUND):
        # type: (float) -> None
        if np.any(np.abs(self.points) > bound):
            raise ValueError('points leave [-{0}, {0}]^3; normalize the cloud first'.format(bound))


class SampleBatch(object):
    def __init__(self, manifold, uniform, near_surface, projected):
        # type: (np.ndarray, np.ndarray, np.ndarray, np.ndarray) -> None
        self.manifold = manifold
        self.uniform = uniform
        self.near_surface = near_surface
        self.projected = projected

    def __repr__(self):
        return '<{} manifold={} uniform={} near_surface={} projected={}>'.format(
            self.__class__.__name__, len(self.manifold), len(self.uniform),
            len(self.near_surface), len(self.projected))

    @property
    def curvature_points(self):
        # type: () -> np.ndarray
        if not len(self.projected):
            return self.near_surface
        return np.concatenate([self.near_surface, self.projected])


def knn_scales(cloud, k=config.KNN_K):
    # type: (PointCloud, int) -> np.ndarray
    """
    Distance from every point to its k-th nearest other point.
    """
    n = len(cloud)
    if not 1 <= k < n:
        raise ValueError('k must lie in [1, {}), got {}'.format(n, k))
    # the query point itself comes back first at distance 0
    distances, _ = cloud.tree.query(cloud.points, k=k + 1)
    scales = distances[:, k]
    if np.any(scales <= 0):
        raise ValueError('{} points have a zero k-th neighbour distance; '
                         'remove duplicate points first'.format(int(np.sum(scales <= 0))))
    return scales


def sample_omega(cloud, scales, count, rng):
    # type: (PointCloud, np.ndarray, int, np.random.Generator) -> np.ndarray
    """
    One Gaussian draw per visited point, p_i + sigma_i * g, visiting the
    points in a random order and wrapping around until ``count`` draws.
    """
    if count < 1:
        raise ValueError('count must be >= 1, got {}'.format(count))
    n = len(cloud)
    order = rng.permutation(n)
    index = order[np.arange(count) % n]
    noise = rng.standard_normal((count, 3))
    return cloud.points[index] + np.asarray(scales)[index, None] * noise


def sample_uniform(count, rng):
    # type: (int, np.random.Generator) -> np.ndarray
    if count < 1:
        raise ValueError('count must be >= 1, got {}'.format(count))
    return rng.uniform(-0.5, 0.5, size=(count, 3))


def project_to_surface(field, points, eps=config.GRADIENT_EPS, diagnostics=None):
    # type: (..., np.ndarray, float, ...) -> np.ndarray
    """
    Move every point one step onto the zero level set:
    x' = x - f(x) grad f / |grad f|, in the field's network-input frame.

    Points whose gradient is shorter than ``eps`` are returned unchanged and
    tallied as ``guarded_projection``.
    """
    points = as_points(points)
    with torch.no_grad():
        jets = field.jets(points, order=1, frame='network')
    values = jets.values.numpy()
    gradients = jets.gradients.numpy()
    norms = np.linalg.norm(gradients, axis=1)
    valid = norms >= eps

    scale = field.input_scale
    projected = points.copy()
    step = gradients[valid] / norms[valid, None] * values[valid, None]
    projected[valid] = (points[valid] * scale - step) / scale

    guarded = int(np.sum(~valid))
    if guarded:
        logger.debug('%d points kept in place, gradient below %g', guarded, eps)
    tally(diagnostics, 'guarded_projection', guarded)
    return projected


def make_batch(cloud, scales, train_config, field, iteration, rng, diagnostics=None):
    # type: (PointCloud, np.ndarray, ..., ..., int, np.random.Generator, ...) -> SampleBatch
    """
    Draw the point sets of one training iteration.

    ``iteration`` is carried for logging only; reproducibility comes from
    ``rng`` (see :func:`cadsdf.api.common.iteration_rng`).
    """
    n = len(cloud)
    manifold_count = min(n, train_config.batch_manifold)
    manifold = cloud.points[rng.choice(n, size=manifold_count, replace=False)]
    uniform = sample_uniform(train_config.batch_uniform, rng)
    near_surface = sample_omega(cloud, scales, train_config.batch_omega, rng)
    # only the curvature regularisers read the projected points
    if train_config.dynamic_sampling and train_config.weights.regularizer in GAUSS_KINDS:
        projected = project_to_surface(field, uniform, diagnostics=diagnostics)
    else:
        projected = np.empty((0, 3))
    logger.debug('iteration %d batch: %d/%d/%d/%d', iteration, len(manifold), len(uniform),
                 len(near_surface), len(projected))
    return SampleBatch(manifold, uniform, near_surface, projected)

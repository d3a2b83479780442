import logging
import math
from fractions import Fraction

import torch
from torch.utils.checkpoint import checkpoint

from cadsdf.api import config
from cadsdf.api.common import DTYPE, ConfigError, tally, to_tensor
from cadsdf.api.network import Jet2, JetBatch


logger = logging.getLogger(__name__)

GAUSS_KINDS = ('gauss_dt', 'gauss_plain')
ENERGY_KINDS = ('dirichlet_energy', 'hessian_l2', 'hessian_l1')

CSV_HEADER = ['iteration', 'tau', 'eikonal', 'dm', 'dnm', 'reg', 'total']


class LossWeights(object):
    def __init__(self, lambda_e=config.LAMBDA_E, lambda_dm=config.LAMBDA_DM,
                 lambda_dnm=config.LAMBDA_DNM, lambda_gauss=config.LAMBDA_GAUSS,
                 alpha=config.ALPHA, dt_a=config.DT_A, regularizer=config.REGULARIZER):
        # type: (float, float, float, float, float, float, str) -> None
        self.lambda_e = float(lambda_e)
        self.lambda_dm = float(lambda_dm)
        self.lambda_dnm = float(lambda_dnm)
        self.lambda_gauss = float(lambda_gauss)
        self.alpha = float(alpha)
        self.dt_a = float(dt_a)
        self.regularizer = regularizer
        self.validate()

    def __repr__(self):
        return '<{} {}>'.format(self.__class__.__name__, ' '.join(
            '{}={}'.format(k, v) for k, v in sorted(self.as_dict().items())))

    def as_dict(self):
        return {
            'lambda_e': self.lambda_e,
            'lambda_dm': self.lambda_dm,
            'lambda_dnm': self.lambda_dnm,
            'lambda_gauss': self.lambda_gauss,
            'alpha': self.alpha,
            'dt_a': self.dt_a,
            'regularizer': self.regularizer,
        }

    def validate(self):
        for name in ('lambda_e', 'lambda_dm', 'lambda_dnm', 'lambda_gauss', 'alpha'):
            value = getattr(self, name)
            if not value >= 0:
                raise ConfigError('{} must be >= 0, got {}'.format(name, value))
        if not 0 < self.dt_a < math.pi / 4:
            raise ConfigError('dt_a must lie in (0, pi/4), got {}'.format(self.dt_a))
        if self.regularizer not in config.REGULARIZERS:
            raise ConfigError('unknown regularizer {!r}, expected one of {}'.format(
                self.regularizer, ', '.join(config.REGULARIZERS)))


class BatchJets(object):
    """
    Jets of one training batch: manifold (P), uniform (Q) and the
    curvature set (Omega joined with the projected points). ``near_term``
    is an already reduced curvature regulariser that takes the place of
    ``near``.
    """

    def __init__(self, manifold, uniform, near=None, near_term=None):
        # type: (JetBatch, JetBatch, JetBatch, torch.Tensor) -> None
        self.manifold = manifold
        self.uniform = uniform
        self.near = near
        self.near_term = near_term

    @property
    def surface_and_uniform(self):
        return JetBatch.concat([self.manifold, self.uniform])


class LossBreakdown(object):
    def __init__(self, eikonal, dirichlet_manifold, dirichlet_nonmanifold, regularizer,
                 total, tau, graph=None):
        self.eikonal = float(eikonal)
        self.dirichlet_manifold = float(dirichlet_manifold)
        self.dirichlet_nonmanifold = float(dirichlet_nonmanifold)
        self.regularizer = float(regularizer)
        self.total = float(total)
        self.tau = float(tau)
        self.graph = graph

    def __repr__(self):
        return '<{} total={:.6e} tau={:.3e}>'.format(self.__class__.__name__, self.total, self.tau)

    def as_row(self, iteration):
        # type: (int) -> list
        return [int(iteration), repr(self.tau), repr(self.eikonal), repr(self.dirichlet_manifold),
                repr(self.dirichlet_nonmanifold), repr(self.regularizer), repr(self.total)]


def eikonal_term(jets):
    # type: (JetBatch) -> torch.Tensor
    norms = torch.linalg.norm(jets.gradients, dim=1)
    return (1.0 - norms).abs().mean()


def dirichlet_manifold(jets):
    # type: (JetBatch) -> torch.Tensor
    return jets.values.abs().mean()


def dirichlet_nonmanifold(jets, alpha=config.ALPHA):
    # type: (JetBatch, float) -> torch.Tensor
    return torch.exp(-alpha * jets.values.abs()).mean()


def gaussian_curvature_batch(gradients, hessians, eps=config.GRADIENT_EPS):
    # type: (torch.Tensor, torch.Tensor, float) -> tuple
    """
    Gaussian curvature of the level sets from the bordered Hessian.

    -det([[H, g], [g^T, 0]]) equals g^T adj(H) g, and the columns of adj(H)
    are cross products of the rows of H. Returns ``(k, valid)`` where
    ``valid`` marks points with |g| >= eps; k is finite everywhere.
    """
    g = gradients
    r0, r1, r2 = hessians[:, 0, :], hessians[:, 1, :], hessians[:, 2, :]
    numerator = (
        (g * torch.linalg.cross(r1, r2, dim=1)).sum(1) * g[:, 0]
        + (g * torch.linalg.cross(r2, r0, dim=1)).sum(1) * g[:, 1]
        + (g * torch.linalg.cross(r0, r1, dim=1)).sum(1) * g[:, 2]
    )
    norms = torch.linalg.norm(g, dim=1)
    valid = norms >= eps
    k = numerator / torch.clamp(norms, min=eps) ** 4
    return torch.where(valid, k, torch.zeros_like(k)), valid


def gaussian_curvature(jet, eps=config.GRADIENT_EPS, diagnostics=None):
    # type: (Jet2, float, ...) -> float
    """
    Curvature of a single jet; 0.0 (tallied as ``guarded_curvature``) when
    the gradient is shorter than ``eps``.
    """
    g = torch.as_tensor(jet.gradient, dtype=DTYPE).reshape(1, 3)
    h = torch.as_tensor(jet.hessian, dtype=DTYPE).reshape(1, 3, 3)
    k, valid = gaussian_curvature_batch(g, h, eps)
    if not bool(valid[0]):
        tally(diagnostics, 'guarded_curvature', 1)
    return k[0].item()


def double_trough_coefficients(a=config.DT_A):
    # type: (float) -> tuple
    """
    (c4, c3, c2, c1) of the quartic with DT(0)=0, a peak DT(pi/4)=pi/4 and a
    trough DT(pi/2)=a; a = 1/4 gives the default curve.
    """
    pi = math.pi
    return (
        (64 * pi - 320 * a) / pi ** 4,
        -(64 * pi - 352 * a) / pi ** 3,
        (16 * pi - 116 * a) / pi ** 2,
        12 * a / pi,
    )


def double_trough(t, a=config.DT_A):
    # type: (...) -> ...
    if not isinstance(t, torch.Tensor) and t < 0:
        raise ValueError('double_trough expects t >= 0, got {}'.format(t))
    c4, c3, c2, c1 = double_trough_coefficients(a)
    return c4 * t ** 4 + c3 * t ** 3 + c2 * t ** 2 + c1 * t


def gauss_term(jets, use_dt=True, dt_a=config.DT_A, diagnostics=None):
    # type: (JetBatch, bool, float, ...) -> torch.Tensor
    k, valid = gaussian_curvature_batch(jets.gradients, jets.hessians)
    excluded = int((~valid).sum())
    tally(diagnostics, 'guarded_curvature', excluded)
    penalty = k.abs()
    if use_dt:
        penalty = double_trough(penalty, dt_a)
    mask = valid.to(DTYPE)
    if excluded == len(jets):
        return (penalty * mask).sum()
    return (penalty * mask).sum() / mask.sum()


def chunked_gauss_term(field, points, chunk=config.CURVATURE_CHUNK, use_dt=True,
                       dt_a=config.DT_A, diagnostics=None):
    # type: (..., ..., int, bool, float, ...) -> torch.Tensor
    """
    Same value as ``gauss_term(field.jets(points, 2, 'network'))``, built
    ``chunk`` points at a time. Each chunk's second-order jets are
    recomputed in the backward pass instead of being kept, so peak memory
    follows ``chunk`` and not the number of points.
    """
    if chunk < 1:
        raise ValueError('chunk must be >= 1, got {}'.format(chunk))

    def sums(part):
        jets = field.jets(part, order=2, frame='network')
        k, valid = gaussian_curvature_batch(jets.gradients, jets.hessians)
        penalty = k.abs()
        if use_dt:
            penalty = double_trough(penalty, dt_a)
        mask = valid.to(DTYPE)
        return (penalty * mask).sum(), mask.sum()

    x = to_tensor(points)
    parts = []
    recompute = torch.is_grad_enabled() and len(x) > chunk
    for part in torch.split(x, chunk):
        if recompute:
            parts.append(checkpoint(sums, part, use_reentrant=False))
        else:
            parts.append(sums(part))
    penalty = torch.stack([p for p, _ in parts]).sum()
    count = int(sum(c.item() for _, c in parts))
    tally(diagnostics, 'guarded_curvature', len(x) - count)
    if not count:
        return penalty
    return penalty / count


def alt_energy(jets, kind):
    # type: (JetBatch, str) -> torch.Tensor
    if kind == 'dirichlet_energy':
        return 0.5 * (jets.gradients ** 2).sum(1).mean()
    if kind == 'hessian_l2':
        return (jets.hessians ** 2).sum((1, 2)).mean()
    if kind == 'hessian_l1':
        return jets.hessians.abs().sum((1, 2)).mean()
    raise ValueError('unknown energy kind {!r}, expected one of {}'.format(
        kind, ', '.join(ENERGY_KINDS)))


def annealing_tau(iteration, total_iterations, mode=config.ANNEALING_MODE):
    # type: (float, int, str) -> float
    """
    Weight of the regulariser at ``iteration``.

    'paper': 1 up to 20% of the run, linear down to 1e-4 at 50%, then linear
    down to 0 at the end. 'constant': always 1. 'off': always 0.
    """
    if mode == 'constant':
        return 1.0
    if mode == 'off':
        return 0.0
    if mode != 'paper':
        raise ValueError('unknown annealing mode {!r}'.format(mode))
    if not 0 <= iteration <= total_iterations:
        raise ValueError('iteration {} outside [0, {}]'.format(iteration, total_iterations))

    t = Fraction(iteration) / Fraction(total_iterations)
    plateau_end = Fraction(config.TAU_PLATEAU_END).limit_denominator(1000)
    ramp_end = Fraction(config.TAU_RAMP_END).limit_denominator(1000)
    if t <= plateau_end:
        return 1.0
    if t <= ramp_end:
        w = float((t - plateau_end) / (ramp_end - plateau_end))
        return (1.0 - w) + w * config.TAU_FLOOR
    w = float((t - ramp_end) / (1 - ramp_end))
    return config.TAU_FLOOR * (1.0 - w)


def regularizer_order(regularizer):
    # type: (str) -> int
    """
    Derivative order the P and Q jets need for ``regularizer``.
    """
    return 2 if regularizer in ('hessian_l2', 'hessian_l1') else 1


def total_loss(batch_jets, weights, tau, diagnostics=None):
    # type: (BatchJets, LossWeights, float, ...) -> LossBreakdown
    """
    lambda_E L_E + lambda_DM L_DM + lambda_DNM L_DNM + tau lambda_Gauss L_reg.

    L_E is taken over P and Q together, L_DM over P, L_DNM over Q. The
    curvature regularisers use the near-surface jets; the smoothness
    energies use P and Q.
    """
    surface_and_uniform = batch_jets.surface_and_uniform
    eik = eikonal_term(surface_and_uniform)
    dm = dirichlet_manifold(batch_jets.manifold)
    dnm = dirichlet_nonmanifold(batch_jets.uniform, weights.alpha)

    kind = weights.regularizer
    if kind in GAUSS_KINDS:
        if batch_jets.near_term is not None:
            reg = batch_jets.near_term
        elif batch_jets.near is None or not len(batch_jets.near):
            raise ValueError('{} needs near-surface jets'.format(kind))
        else:
            reg = gauss_term(batch_jets.near, use_dt=kind == 'gauss_dt', dt_a=weights.dt_a,
                             diagnostics=diagnostics)
    elif kind in ENERGY_KINDS:
        reg = alt_energy(surface_and_uniform, kind)
    else:
        reg = torch.zeros((), dtype=DTYPE)

    total = (weights.lambda_e * eik + weights.lambda_dm * dm + weights.lambda_dnm * dnm
             + (tau * weights.lambda_gauss) * reg)
    return LossBreakdown(eik.item(), dm.item(), dnm.item(), reg.item(), total.item(), tau,
                         graph=total)


def mean_dt_curvature(field, points, dt_a=config.DT_A, diagnostics=None):
    # type: (..., ..., float, ...) -> float
    """
    Held-out mean DT(|k|) of a field over ``points`` (network-input frame).
    """
    with torch.no_grad():
        jets = field.jets(points, order=2, frame='network')
        return gauss_term(jets, use_dt=True, dt_a=dt_a, diagnostics=diagnostics).item()

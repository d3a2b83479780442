import csv
import functools
import logging
import os
import time

import torch

from cadsdf.api import config
from cadsdf.api.common import (
    DTYPE,
    ConfigError,
    Diagnostics,
    NonFiniteLossError,
    iteration_rng,
    set_deterministic,
)
from cadsdf.api.losses import (
    CSV_HEADER,
    GAUSS_KINDS,
    BatchJets,
    LossWeights,
    annealing_tau,
    chunked_gauss_term,
    regularizer_order,
    total_loss,
)
from cadsdf.api.network import init_network, load_checkpoint, loss_param_gradient, save_checkpoint
from cadsdf.api.sampling import knn_scales, make_batch


logger = logging.getLogger(__name__)

LOG_FILE = 'train_log.csv'
FINAL_CHECKPOINT = 'model.ckpt'


class TrainConfig(object):
    def __init__(self, iterations=config.ITERATIONS, learning_rate=config.LEARNING_RATE,
                 adam_beta1=config.ADAM_BETA1, adam_beta2=config.ADAM_BETA2,
                 adam_eps=config.ADAM_EPS, weights=None,
                 batch_manifold=config.BATCH_MANIFOLD, batch_uniform=config.BATCH_UNIFORM,
                 batch_omega=config.BATCH_OMEGA, knn_k=config.KNN_K,
                 annealing_mode=config.ANNEALING_MODE, dynamic_sampling=config.DYNAMIC_SAMPLING,
                 seed=config.SEED, deterministic=config.DETERMINISTIC,
                 checkpoint_every=config.CHECKPOINT_EVERY, layer_sizes=None,
                 omega0=config.OMEGA0, log_every=config.LOG_EVERY,
                 curvature_chunk=config.CURVATURE_CHUNK):
        self.iterations = int(iterations)
        self.learning_rate = float(learning_rate)
        self.adam_beta1 = float(adam_beta1)
        self.adam_beta2 = float(adam_beta2)
        self.adam_eps = float(adam_eps)
        self.weights = weights if weights is not None else LossWeights()
        self.batch_manifold = int(batch_manifold)
        self.batch_uniform = int(batch_uniform)
        self.batch_omega = int(batch_omega)
        self.knn_k = int(knn_k)
        self.annealing_mode = annealing_mode
        self.dynamic_sampling = bool(dynamic_sampling)
        self.seed = int(seed)
        self.deterministic = bool(deterministic)
        self.checkpoint_every = int(checkpoint_every)
        self.layer_sizes = list(layer_sizes or config.LAYER_SIZES)
        self.omega0 = float(omega0)
        self.log_every = int(log_every)
        self.curvature_chunk = int(curvature_chunk)
        self.validate()

    def __repr__(self):
        return '<{} iterations={} lr={} regularizer={} seed={}>'.format(
            self.__class__.__name__, self.iterations, self.learning_rate,
            self.weights.regularizer, self.seed)

    @property
    def betas(self):
        return self.adam_beta1, self.adam_beta2

    def as_dict(self):
        data = {k: v for k, v in vars(self).items() if k != 'weights'}
        data.update(self.weights.as_dict())
        return data

    def validate(self):
        if self.iterations <= 0:
            raise ConfigError('iterations must be > 0, got {}'.format(self.iterations))
        if not self.learning_rate > 0:
            raise ConfigError('learning_rate must be > 0, got {}'.format(self.learning_rate))
        for name in ('batch_manifold', 'batch_uniform', 'batch_omega', 'knn_k',
                     'checkpoint_every', 'log_every', 'curvature_chunk'):
            if getattr(self, name) < 1:
                raise ConfigError('{} must be >= 1, got {}'.format(name, getattr(self, name)))
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError('adam betas must lie in [0, 1)')
        if self.annealing_mode not in config.ANNEALING_MODES:
            raise ConfigError('unknown annealing_mode {!r}, expected one of {}'.format(
                self.annealing_mode, ', '.join(config.ANNEALING_MODES)))
        self.weights.validate()


class AdamState(object):
    def __init__(self, parameter_count=None, first_moment=None, second_moment=None, step=0):
        # type: (int, torch.Tensor, torch.Tensor, int) -> None
        if first_moment is None:
            first_moment = torch.zeros(parameter_count, dtype=DTYPE)
        if second_moment is None:
            second_moment = torch.zeros(parameter_count, dtype=DTYPE)
        if first_moment.shape != second_moment.shape:
            raise ValueError('moment vectors differ in shape')
        self.first_moment = first_moment
        self.second_moment = second_moment
        self.step = int(step)

    def __repr__(self):
        return '<{} parameters={} step={}>'.format(
            self.__class__.__name__, self.first_moment.numel(), self.step)


class TrainingLog(object):
    def __init__(self):
        self.rows = []

    def __len__(self):
        return len(self.rows)

    def append(self, iteration, breakdown):
        self.rows.append((iteration, breakdown))

    @property
    def last(self):
        return self.rows[-1][1] if self.rows else None


def adam_update(params, grad, state, lr, betas=(config.ADAM_BETA1, config.ADAM_BETA2),
                eps=config.ADAM_EPS):
    # type: (torch.Tensor, torch.Tensor, AdamState, float, tuple, float) -> tuple
    """
    One bias-corrected Adam update of a flat parameter vector.
    """
    if grad.shape != params.shape or state.first_moment.shape != params.shape:
        raise ValueError('gradient of shape {} does not match {} parameters'.format(
            tuple(grad.shape), params.numel()))
    if not bool(torch.all(torch.isfinite(grad))):
        raise NonFiniteLossError('non-finite gradient at Adam step {}'.format(state.step + 1))
    b1, b2 = betas
    step = state.step + 1
    m = b1 * state.first_moment + (1.0 - b1) * grad
    v = b2 * state.second_moment + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1 ** step)
    v_hat = v / (1.0 - b2 ** step)
    params = params - lr * m_hat / (torch.sqrt(v_hat) + eps)
    return params, AdamState(first_moment=m, second_moment=v, step=step)


def adam_step(net, grad, state, lr, betas=(config.ADAM_BETA1, config.ADAM_BETA2),
              eps=config.ADAM_EPS):
    # type: (..., torch.Tensor, AdamState, float, tuple, float) -> tuple
    params, state = adam_update(net.flat_parameters(), grad, state, lr, betas, eps)
    net.load_flat_parameters(params)
    return net, state


def batch_loss(net, batch, weights, tau, diagnostics=None, chunk=config.CURVATURE_CHUNK):
    # type: (..., ..., LossWeights, float, Diagnostics, int) -> ...
    order = regularizer_order(weights.regularizer)
    manifold = net.jets(batch.manifold, order=order, frame='network')
    uniform = net.jets(batch.uniform, order=order, frame='network')
    near_term = None
    if weights.regularizer in GAUSS_KINDS:
        near_term = chunked_gauss_term(net, batch.curvature_points, chunk,
                                       use_dt=weights.regularizer == 'gauss_dt',
                                       dt_a=weights.dt_a, diagnostics=diagnostics)
    return total_loss(BatchJets(manifold, uniform, near_term=near_term), weights, tau,
                      diagnostics)


def train_step(net, state, cloud, scales, train_config, iteration, diagnostics=None):
    # type: (..., AdamState, ..., ..., TrainConfig, int, Diagnostics) -> tuple
    rng = iteration_rng(train_config.seed, iteration)
    batch = make_batch(cloud, scales, train_config, net, iteration, rng, diagnostics)
    tau = annealing_tau(iteration, train_config.iterations, train_config.annealing_mode)
    loss_fn = functools.partial(batch_loss, weights=train_config.weights, tau=tau,
                                diagnostics=diagnostics, chunk=train_config.curvature_chunk)
    breakdown, grad = loss_param_gradient(net, loss_fn, batch, iteration=iteration)
    net, state = adam_step(net, grad, state, train_config.learning_rate, train_config.betas,
                           train_config.adam_eps)
    return net, state, breakdown


def _start(train_config, resume_from):
    if resume_from is None:
        net = init_network(train_config.layer_sizes, train_config.omega0, train_config.seed)
        return net, AdamState(net.parameter_count), 0

    checkpoint = load_checkpoint(resume_from)
    net = checkpoint['network']
    if 'first_moment' not in checkpoint:
        raise ConfigError('{} has no optimizer state to resume from'.format(resume_from))
    state = AdamState(first_moment=checkpoint['first_moment'],
                      second_moment=checkpoint['second_moment'],
                      step=checkpoint['adam_step'])
    logger.info('resuming from %s at iteration %d', resume_from, checkpoint['iteration'])
    return net, state, checkpoint['iteration']


def _open_log(log_path, start):
    # type: (str, int) -> tuple
    """
    Open the training log for writing. Rows of an earlier run with an
    iteration below ``start`` are kept, anything later is dropped.
    """
    kept = []
    if start and os.path.exists(log_path):
        with open(log_path, newline='') as stream:
            for row in list(csv.reader(stream))[1:]:
                try:
                    if int(row[0]) < start:
                        kept.append(row)
                except (IndexError, ValueError):
                    logger.warning('dropping malformed row %r from %s', row, log_path)
        logger.debug('keeping %d rows of %s', len(kept), log_path)
    csv_file = open(log_path, 'w', newline='')
    writer = csv.writer(csv_file)
    writer.writerow(CSV_HEADER)
    writer.writerows(kept)
    return csv_file, writer


def checkpoint_path(output_dir, iteration):
    # type: (str, int) -> str
    return os.path.join(output_dir, 'checkpoint_{:06d}.ckpt'.format(iteration))


def fit(cloud, train_config, output_dir=None, resume_from=None, callback=None):
    # type: (..., TrainConfig, str, str, ...) -> tuple
    """
    Train a field on ``cloud`` and return ``(network, TrainingLog)``.

    With ``output_dir`` set, each iteration appends a row to train_log.csv,
    checkpoints are written every ``checkpoint_every`` iterations and the
    final network goes to model.ckpt. A non-finite loss aborts the run with
    :class:`NonFiniteLossError`; the last checkpoint remains resumable.
    """
    set_deterministic(train_config.deterministic)
    cloud.check_bounds()
    scales = knn_scales(cloud, train_config.knn_k)
    net, state, start = _start(train_config, resume_from)
    diagnostics = Diagnostics()
    log = TrainingLog()

    csv_file = writer = None
    if output_dir is not None:
        if not os.path.isdir(output_dir):
            os.makedirs(output_dir)
        csv_file, writer = _open_log(os.path.join(output_dir, LOG_FILE), start)

    try:
        for iteration in range(start, train_config.iterations):
            try:
                net, state, breakdown = train_step(net, state, cloud, scales, train_config,
                                                   iteration, diagnostics)
            except NonFiniteLossError:
                logger.error('training aborted at iteration %d; resume from the last checkpoint',
                             iteration)
                raise
            log.append(iteration, breakdown)
            if writer is not None:
                writer.writerow(breakdown.as_row(iteration))

            done = iteration + 1
            if iteration % train_config.log_every == 0 or done == train_config.iterations:
                logger.info('iter=%d total=%.6e tau=%.3e', iteration, breakdown.total,
                            breakdown.tau)
            if output_dir is not None and (done % train_config.checkpoint_every == 0
                                           or done == train_config.iterations):
                if csv_file is not None:
                    csv_file.flush()
                save_checkpoint(checkpoint_path(output_dir, done), net, state, iteration=done)
            if callback is not None:
                callback(iteration, breakdown)
    finally:
        if csv_file is not None:
            csv_file.close()

    if output_dir is not None:
        save_checkpoint(os.path.join(output_dir, FINAL_CHECKPOINT), net, state,
                        iteration=train_config.iterations)
    if diagnostics:
        logger.info('training diagnostics: %s', diagnostics)
    return net, log


def benchmark(cloud, train_config, iterations=10):
    # type: (..., TrainConfig, int) -> list
    """
    Wall time in seconds of each of ``iterations`` training steps, after
    one untimed warm-up step.
    """
    set_deterministic(train_config.deterministic)
    scales = knn_scales(cloud, train_config.knn_k)
    net, state, _ = _start(train_config, None)
    net, state, _ = train_step(net, state, cloud, scales, train_config, 0)
    timings = []
    for iteration in range(1, iterations + 1):
        started = time.perf_counter()
        net, state, _ = train_step(net, state, cloud, scales, train_config,
                                   min(iteration, train_config.iterations))
        timings.append(time.perf_counter() - started)
    return timings

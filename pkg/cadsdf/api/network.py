import json
import logging
import math

import numpy as np
import torch
import torch.nn.functional as F

from cadsdf.api import config
from cadsdf.api.common import DTYPE, NonFiniteLossError, ParseError, as_points, to_tensor


logger = logging.getLogger(__name__)

# symmetric 3x3 stored as (xx, xy, xz, yy, yz, zz)
_SYM_ROWS = [0, 0, 0, 1, 1, 2]
_SYM_COLS = [0, 1, 2, 1, 2, 2]
_SYM_FULL = [[0, 1, 2], [1, 3, 4], [2, 4, 5]]

FRAMES = ('world', 'network')


class Jet2(object):
    """
    Value, gradient and Hessian of a scalar field at one point.
    """

    def __init__(self, value, gradient, hessian):
        # type: (float, np.ndarray, np.ndarray) -> None
        self.value = float(value)
        self.gradient = np.asarray(gradient, dtype=np.float64)
        self.hessian = np.asarray(hessian, dtype=np.float64)

    def __repr__(self):
        return '<{} value={:.6g} |grad|={:.6g}>'.format(
            self.__class__.__name__, self.value, float(np.linalg.norm(self.gradient))
        )


class JetBatch(object):
    """
    Jets of many points held as tensors.

    ``values`` is (N,), ``gradients`` (N, 3) and ``hessians`` (N, 3, 3); the
    derivative tensors are None when they were not requested. Indexing yields
    :class:`Jet2` instances, so a batch also reads as a list of jets.
    """

    def __init__(self, values, gradients=None, hessians=None):
        # type: (torch.Tensor, torch.Tensor, torch.Tensor) -> None
        self.values = values
        self.gradients = gradients
        self.hessians = hessians

    @property
    def order(self):
        if self.hessians is not None:
            return 2
        if self.gradients is not None:
            return 1
        return 0

    def __len__(self):
        return int(self.values.shape[0])

    def __getitem__(self, index):
        if self.hessians is None:
            raise ValueError('batch was evaluated without Hessians')
        return Jet2(
            self.values[index].item(),
            self.gradients[index].detach().numpy(),
            self.hessians[index].detach().numpy(),
        )

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    def detach(self):
        return JetBatch(*[t.detach() if t is not None else None
                          for t in (self.values, self.gradients, self.hessians)])

    @classmethod
    def concat(cls, batches):
        batches = [b for b in batches if len(b)]
        if not batches:
            raise ValueError('nothing to concatenate')
        order = min(b.order for b in batches)
        values = torch.cat([b.values for b in batches])
        gradients = torch.cat([b.gradients for b in batches]) if order >= 1 else None
        hessians = torch.cat([b.hessians for b in batches]) if order >= 2 else None
        return cls(values, gradients, hessians)

    @classmethod
    def from_jets(cls, jets):
        jets = list(jets)
        return cls(
            torch.tensor([j.value for j in jets], dtype=DTYPE),
            torch.tensor(np.array([j.gradient for j in jets]), dtype=DTYPE),
            torch.tensor(np.array([j.hessian for j in jets]), dtype=DTYPE),
        )


def _validate_layer_sizes(layer_sizes):
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError('layer_sizes needs at least 2 entries, got {}'.format(sizes))
    if any(s <= 0 for s in sizes):
        raise ValueError('layer widths must be positive, got {}'.format(sizes))
    if sizes[0] != 3 or sizes[-1] != 1:
        raise ValueError('layer_sizes must start with 3 and end with 1, got {}'.format(sizes))
    if len(sizes) < 3:
        raise ValueError('at least one hidden layer is required, got {}'.format(sizes))
    if any(s < 2 for s in sizes[1:-1]):
        raise ValueError('hidden widths must be at least 2, got {}'.format(sizes))
    return sizes


class FieldNetwork(torch.nn.Module):
    """
    Sine-activated MLP representing the signed distance field f(x).

    World points are multiplied by ``input_scale`` before the first layer.
    Every hidden layer computes sin(omega0 * (W a + b)); the output layer is
    linear. Parameters are float64.
    """

    def __init__(self, layer_sizes=None, omega0=config.OMEGA0, input_scale=config.INPUT_SCALE):
        # type: (list, float, float) -> None
        super(FieldNetwork, self).__init__()
        sizes = _validate_layer_sizes(layer_sizes or config.LAYER_SIZES)
        if not omega0 > 0:
            raise ValueError('omega0 must be positive, got {}'.format(omega0))
        if not input_scale > 0:
            raise ValueError('input_scale must be positive, got {}'.format(input_scale))
        self.layer_sizes = sizes
        self.omega0 = float(omega0)
        self.input_scale = float(input_scale)
        self.layers = torch.nn.ModuleList(
            torch.nn.Linear(n_in, n_out, dtype=DTYPE) for n_in, n_out in zip(sizes[:-1], sizes[1:])
        )

    def __repr__(self):
        return '<{} layer_sizes={} omega0={} input_scale={}>'.format(
            self.__class__.__name__, self.layer_sizes, self.omega0, self.input_scale
        )

    @property
    def parameter_count(self):
        return sum(p.numel() for p in self.parameters())

    def flat_parameters(self):
        # type: () -> torch.Tensor
        return torch.nn.utils.parameters_to_vector(self.parameters()).detach().clone()

    def load_flat_parameters(self, vector):
        # type: (...) -> None
        vector = torch.as_tensor(vector, dtype=DTYPE)
        if vector.shape != (self.parameter_count,):
            raise ValueError('expected {} parameters, got shape {}'.format(
                self.parameter_count, tuple(vector.shape)))
        if not torch.all(torch.isfinite(vector)):
            raise ValueError('parameters must be finite')
        with torch.no_grad():
            torch.nn.utils.vector_to_parameters(vector.clone(), self.parameters())

    def jets(self, points, order=2, frame='world'):
        # type: (..., int, str) -> JetBatch
        """
        Propagate value, gradient and Hessian through the layers.

        Derivatives are carried forward per point (3 input directions, 6
        Hessian entries), so they remain differentiable with respect to the
        parameters. ``frame`` selects whether derivatives are taken with
        respect to world coordinates or network-input coordinates.
        """
        if frame not in FRAMES:
            raise ValueError('unknown frame {!r}'.format(frame))
        x = to_tensor(points)
        n = x.shape[0]
        seed = self.input_scale if frame == 'world' else 1.0

        h = x * self.input_scale
        dh = (seed * torch.eye(3, dtype=DTYPE)).expand(n, 3, 3) if order >= 1 else None
        hh = None
        for layer in self.layers[:-1]:
            w = layer.weight
            z = self.omega0 * F.linear(h, w, layer.bias)
            s = torch.sin(z)
            if order >= 1:
                c = torch.cos(z)
                dz = self.omega0 * torch.matmul(w, dh)
                if order >= 2:
                    outer = dz[..., _SYM_ROWS] * dz[..., _SYM_COLS]
                    hh_next = -s.unsqueeze(-1) * outer
                    if hh is not None:
                        hh_next = hh_next + c.unsqueeze(-1) * (self.omega0 * torch.matmul(w, hh))
                    hh = hh_next
                dh = c.unsqueeze(-1) * dz
            h = s

        last = self.layers[-1]
        values = F.linear(h, last.weight, last.bias)[:, 0]
        gradients = torch.matmul(last.weight, dh)[:, 0, :] if order >= 1 else None
        hessians = None
        if order >= 2:
            hess6 = torch.matmul(last.weight, hh)[:, 0, :]
            hessians = hess6[:, _SYM_FULL]
        return JetBatch(values, gradients, hessians)


def init_network(layer_sizes=None, omega0=config.OMEGA0, seed=config.SEED,
                 input_scale=config.INPUT_SCALE):
    # type: (list, float, int, float) -> FieldNetwork
    """
    Build a network with sine-network initialisation.

    First layer weights are uniform in (-1/fan_in, 1/fan_in), later layers in
    (-sqrt(6/fan_in)/omega0, sqrt(6/fan_in)/omega0); biases start at zero.
    """
    net = FieldNetwork(layer_sizes, omega0=omega0, input_scale=input_scale)
    generator = torch.Generator().manual_seed(int(seed) & 0xFFFFFFFFFFFFFFFF)
    with torch.no_grad():
        for index, layer in enumerate(net.layers):
            fan_in = layer.in_features
            if index == 0:
                bound = 1.0 / fan_in
            else:
                bound = math.sqrt(6.0 / fan_in) / net.omega0
            layer.weight.uniform_(-bound, bound, generator=generator)
            layer.bias.zero_()
    return net


def _single_point(x):
    points = as_points(x)
    if len(points) != 1:
        raise ValueError('expected one point, got {}'.format(len(points)))
    return points


def evaluate(net, x):
    # type: (FieldNetwork, ...) -> float
    with torch.no_grad():
        return net.jets(_single_point(x), order=0).values[0].item()


def evaluate_batch(net, xs):
    # type: (FieldNetwork, ...) -> np.ndarray
    with torch.no_grad():
        return net.jets(xs, order=0).values.numpy()


def eval_jet(net, x, frame='world'):
    # type: (FieldNetwork, ..., str) -> Jet2
    return eval_jet_batch(net, _single_point(x), frame=frame)[0]


def eval_jet_batch(net, xs, order=2, frame='world'):
    # type: (FieldNetwork, ..., int, str) -> JetBatch
    with torch.no_grad():
        return net.jets(xs, order=order, frame=frame)


def loss_param_gradient(net, loss_fn, batch, iteration=None):
    # type: (FieldNetwork, ..., ..., int) -> tuple
    """
    Evaluate ``loss_fn(net, batch)`` and its gradient with respect to every
    parameter, flattened in ``net.parameters()`` order.

    ``loss_fn`` returns either a scalar tensor or an object whose ``graph``
    attribute is one (a LossBreakdown). The first element of the result is
    the float loss or the breakdown itself.
    """
    with torch.enable_grad():
        result = loss_fn(net, batch)
        graph = getattr(result, 'graph', result)
        if not bool(torch.isfinite(graph)):
            raise NonFiniteLossError(
                'non-finite loss {}'.format(graph.item()), iteration=iteration, breakdown=result
            )
        params = list(net.parameters())
        grads = torch.autograd.grad(graph, params, allow_unused=True)
    flat = torch.cat([
        (g if g is not None else torch.zeros_like(p)).reshape(-1)
        for g, p in zip(grads, params)
    ]).detach()
    if graph is result:
        return graph.item(), flat
    result.graph = None
    return result, flat


def save_checkpoint(path, net, adam_state=None, iteration=0):
    # type: (str, FieldNetwork, ..., int) -> None
    """
    Write a checkpoint: a magic/version line, one JSON header line, then the
    raw little-endian float64 arrays listed in the header.
    """
    arrays = [('parameters', net.flat_parameters().numpy())]
    header = {
        'layer_sizes': net.layer_sizes,
        'omega0': net.omega0,
        'input_scale': net.input_scale,
        'parameter_count': net.parameter_count,
        'iteration': int(iteration),
    }
    if adam_state is not None:
        arrays.append(('first_moment', adam_state.first_moment.numpy()))
        arrays.append(('second_moment', adam_state.second_moment.numpy()))
        header['adam_step'] = int(adam_state.step)
    header['arrays'] = [name for name, _ in arrays]

    with open(path, 'wb') as fd:
        magic = '{} {}\n'.format(config.CHECKPOINT_MAGIC, config.CHECKPOINT_VERSION)
        fd.write(magic.encode('ascii'))
        fd.write(json.dumps(header, sort_keys=True).encode('ascii'))
        fd.write(b'\n')
        for _, arr in arrays:
            fd.write(np.ascontiguousarray(arr, dtype='<f8').tobytes())
    logger.debug('wrote checkpoint %s (iteration %s)', path, iteration)


def load_checkpoint(path):
    # type: (str) -> dict
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Returns a dict with ``network``, ``iteration`` and, when present,
    ``first_moment``, ``second_moment`` and ``adam_step``.
    """
    with open(path, 'rb') as fd:
        magic = fd.readline().decode('ascii', 'replace').split()
        if len(magic) != 2 or magic[0] != config.CHECKPOINT_MAGIC:
            raise ParseError('not a checkpoint file', path=path, line=1)
        if magic[1] != str(config.CHECKPOINT_VERSION):
            raise ParseError('unsupported checkpoint version {}'.format(magic[1]), path=path,
                             line=1)
        try:
            header = json.loads(fd.readline().decode('ascii'))
        except ValueError as e:
            raise ParseError('bad header: {}'.format(e), path=path, line=2)
        payload = fd.read()

    net = FieldNetwork(header['layer_sizes'], omega0=header['omega0'],
                       input_scale=header['input_scale'])
    count = header['parameter_count']
    if len(payload) != 8 * count * len(header['arrays']):
        raise ParseError('payload holds {} bytes, expected {}'.format(
            len(payload), 8 * count * len(header['arrays'])), path=path)

    result = {'network': net, 'iteration': header['iteration']}
    for index, name in enumerate(header['arrays']):
        arr = np.frombuffer(payload, dtype='<f8', count=count, offset=8 * count * index)
        result[name] = torch.from_numpy(arr.astype(np.float64))
    net.load_flat_parameters(result.pop('parameters'))
    if 'adam_step' in header:
        result['adam_step'] = header['adam_step']
    return result

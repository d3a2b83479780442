import collections

import numpy as np
import torch


DTYPE = torch.float64


class CadSdfError(ValueError):
    pass


class ParseError(CadSdfError):
    def __init__(self, message, path=None, line=None, element=None):
        # type: (str, str, int, int) -> None
        location = []
        if path is not None:
            location.append(str(path))
        if line is not None:
            location.append('line {}'.format(line))
        if element is not None:
            location.append('element {}'.format(element))
        if location:
            message = '{}: {}'.format(', '.join(location), message)
        super(ParseError, self).__init__(message)
        self.path = path
        self.line = line
        self.element = element


class ConfigError(CadSdfError):
    pass


class NonFiniteLossError(CadSdfError):
    def __init__(self, message, iteration=None, breakdown=None):
        # type: (str, int, ...) -> None
        if iteration is not None:
            message = 'iteration {}: {}'.format(iteration, message)
        super(NonFiniteLossError, self).__init__(message)
        self.iteration = iteration
        self.breakdown = breakdown


class Diagnostics(collections.Counter):
    """
    Tally of guarded or skipped points, keyed by reason.
    """

    def __repr__(self):
        items = ' '.join('{}={}'.format(k, v) for k, v in sorted(self.items()))
        return '<{} {}>'.format(self.__class__.__name__, items)


def tally(diagnostics, key, count):
    # type: (Diagnostics, str, int) -> None
    if count and diagnostics is not None:
        diagnostics[key] += int(count)


def iteration_rng(seed, iteration):
    # type: (int, int) -> np.random.Generator
    """
    Random stream for one training iteration. A run resumed at iteration i
    draws the same samples as an uninterrupted run does at i.
    """
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(iteration)])


def set_deterministic(enabled):
    # type: (bool) -> None
    if enabled:
        torch.set_num_threads(1)
    torch.use_deterministic_algorithms(bool(enabled))


def as_points(points):
    # type: (...) -> np.ndarray
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError('expected an (N, 3) array of points, got shape {}'.format(arr.shape))
    if not np.all(np.isfinite(arr)):
        raise ValueError('points must be finite')
    return arr


def to_tensor(points):
    # type: (...) -> torch.Tensor
    if isinstance(points, torch.Tensor):
        return points.to(DTYPE)
    return torch.from_numpy(as_points(points))

"""
Closed-form signed distance fields sharing the network's jet interface.

They stand in for a trained network wherever an exact answer is known:
projection, curvature, grid sampling and meshing accept either.
"""
import torch

from cadsdf.api.common import DTYPE, to_tensor
from cadsdf.api.network import FRAMES, JetBatch


class AnalyticField(object):
    """
    Base class: subclasses implement ``sdf(points)`` on an (N, 3) tensor.

    Derivatives come from autograd, so ``sdf`` must be pointwise.
    """
    input_scale = 1.0

    def sdf(self, points):
        raise NotImplementedError

    def __repr__(self):
        return '<{}>'.format(self.__class__.__name__)

    def jets(self, points, order=2, frame='world'):
        # type: (..., int, str) -> JetBatch
        if frame not in FRAMES:
            raise ValueError('unknown frame {!r}'.format(frame))
        x = to_tensor(points).detach().clone()
        if order == 0:
            with torch.no_grad():
                return JetBatch(self.sdf(x))

        with torch.enable_grad():
            x.requires_grad_(True)
            values = self.sdf(x)
            (gradients,) = torch.autograd.grad(values.sum(), x, create_graph=order >= 2)
            hessians = None
            if order >= 2 and not gradients.requires_grad:
                # linear field
                hessians = torch.zeros(x.shape[0], 3, 3, dtype=DTYPE)
            elif order >= 2:
                rows = []
                for axis in range(3):
                    (row,) = torch.autograd.grad(gradients[:, axis].sum(), x, retain_graph=True,
                                                 allow_unused=True)
                    rows.append(row if row is not None else torch.zeros_like(x))
                hessians = torch.stack(rows, dim=1)
                hessians = 0.5 * (hessians + hessians.transpose(1, 2))
        return JetBatch(
            values.detach(),
            gradients.detach(),
            hessians.detach() if hessians is not None else None,
        )


class SphereField(AnalyticField):
    def __init__(self, radius=0.4, center=(0.0, 0.0, 0.0)):
        self.radius = float(radius)
        self.center = torch.tensor(center, dtype=DTYPE)

    def sdf(self, points):
        return torch.linalg.norm(points - self.center, dim=1) - self.radius


class PlaneField(AnalyticField):
    """
    f(x) = n . x - offset for a unit normal n.
    """

    def __init__(self, normal=(0.0, 0.0, 1.0), offset=0.0):
        n = torch.tensor(normal, dtype=DTYPE)
        self.normal = n / torch.linalg.norm(n)
        self.offset = float(offset)

    def sdf(self, points):
        return points @ self.normal - self.offset


class CylinderField(AnalyticField):
    """
    Infinite cylinder around the z axis.
    """

    def __init__(self, radius=0.3):
        self.radius = float(radius)

    def sdf(self, points):
        return torch.linalg.norm(points[:, :2], dim=1) - self.radius

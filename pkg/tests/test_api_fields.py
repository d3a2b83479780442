#!/usr/bin/env python
# -*- coding: utf-8 -*-

import unittest

import faker
import numpy as np

from cadsdf.api.fields import CylinderField, PlaneField, SphereField


class FieldsTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.fake = faker.Factory.create()

    def setUp(self):
        self.rng = np.random.default_rng(self.fake.random_int())
        self.points = self.rng.uniform(-0.5, 0.5, size=(50, 3))

    def test_sphere_jets(self):
        field = SphereField(radius=0.3)
        jets = field.jets(self.points)
        norms = np.linalg.norm(self.points, axis=1)
        self.assertTrue(np.allclose(jets.values.numpy(), norms - 0.3))
        self.assertTrue(np.allclose(jets.gradients.numpy(), self.points / norms[:, None]))
        expected = (np.eye(3)[None] - np.einsum('ni,nj->nij', self.points, self.points)
                    / norms[:, None, None] ** 2) / norms[:, None, None]
        self.assertTrue(np.allclose(jets.hessians.numpy(), expected))

    def test_plane_is_linear(self):
        field = PlaneField(normal=(0.0, 3.0, 4.0), offset=0.1)
        jets = field.jets(self.points)
        self.assertTrue(np.allclose(jets.gradients.numpy(), [0.0, 0.6, 0.8]))
        self.assertEqual(np.abs(jets.hessians.numpy()).max(), 0.0)

    def test_cylinder_ignores_z(self):
        field = CylinderField(radius=0.3)
        jets = field.jets(self.points)
        self.assertTrue(np.allclose(jets.values.numpy(),
                                    np.linalg.norm(self.points[:, :2], axis=1) - 0.3))
        self.assertTrue(np.allclose(jets.gradients.numpy()[:, 2], 0.0))
        self.assertTrue(np.allclose(jets.hessians.numpy()[:, 2, :], 0.0))

    def test_order_zero_and_frames(self):
        field = SphereField()
        self.assertIsNone(field.jets(self.points, order=0).gradients)
        world = field.jets(self.points, frame='world')
        network = field.jets(self.points, frame='network')
        self.assertTrue(np.array_equal(world.gradients.numpy(), network.gradients.numpy()))
        with self.assertRaises(ValueError):
            field.jets(self.points, frame='screen')


if __name__ == '__main__':
    unittest.main()

#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math
import unittest

import faker
import numpy as np

from cadsdf.api import config
from cadsdf.api.fixtures import distance_to_segments, synth_fixture


def signed_volume(mesh):
    tri = mesh.vertices[mesh.triangles]
    return np.sum(np.einsum('ij,ij->i', tri[:, 0], np.cross(tri[:, 1], tri[:, 2]))) / 6.0


class FixturesTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.fake = faker.Factory.create()

    def setUp(self):
        self.seed = self.fake.random_int()

    def test_sphere_points_are_exact(self):
        fixture = synth_fixture('sphere', 10000, seed=self.seed)
        radii = np.linalg.norm(fixture.cloud.points, axis=1)
        self.assertEqual(len(fixture.cloud), 10000)
        self.assertLess(np.abs(radii - 0.4).max(), 1e-9)
        self.assertTrue(np.allclose(fixture.cloud.normals, fixture.cloud.points / 0.4))
        self.assertEqual(len(fixture.edges), 0)
        self.assertTrue(np.all(np.isinf(fixture.distance_to_edges(fixture.cloud.points[:5]))))

    def test_cube_noise_magnitude(self):
        clean = synth_fixture('cube', 10000, seed=self.seed)
        noisy = synth_fixture('cube', 10000, noise_sigma=0.005, seed=self.seed)
        displacement = noisy.cloud.points - clean.cloud.points
        expected = 0.005 * 0.8 * math.sqrt(3)
        for axis in range(3):
            self.assertAlmostEqual(displacement[:, axis].std(), expected, delta=0.05 * expected)
        self.assertTrue(np.array_equal(noisy.cloud.normals, clean.cloud.normals))

    def test_cube_missing_bands(self):
        fixture = synth_fixture('cube', 5000, missing_fraction=0.1, seed=self.seed)
        self.assertEqual(len(fixture.cloud), 5000)
        self.assertEqual(len(fixture.edges), 12)
        self.assertGreater(fixture.distance_to_edges(fixture.cloud.points).min(), 0.05)

    def test_every_kind(self):
        for kind in config.FIXTURE_KINDS:
            fixture = synth_fixture(kind, 2000, seed=self.seed)
            self.assertEqual(len(fixture.cloud), 2000, kind)
            self.assertLessEqual(np.abs(fixture.cloud.points).max(), 0.5, kind)
            self.assertTrue(fixture.mesh.is_watertight(), kind)
            self.assertGreater(signed_volume(fixture.mesh), 0, kind)
            fixture.cloud.check_bounds()

    def test_reproducible(self):
        a = synth_fixture('cylinder', 1000, noise_sigma=0.01, seed=self.seed)
        b = synth_fixture('cylinder', 1000, noise_sigma=0.01, seed=self.seed)
        self.assertTrue(np.array_equal(a.cloud.points, b.cloud.points))

    def test_cylinder_samples_lie_on_surface(self):
        fixture = synth_fixture('cylinder', 3000, seed=self.seed)
        points = fixture.cloud.points
        radial = np.linalg.norm(points[:, :2], axis=1)
        on_wall = np.abs(radial - 0.3) < 1e-12
        on_cap = np.abs(np.abs(points[:, 2]) - 0.4) < 1e-12
        self.assertTrue(np.all(on_wall | on_cap))
        wall_fraction = (2 * math.pi * 0.3 * 0.8) / (2 * math.pi * 0.3 * 0.8 + 2 * math.pi * 0.09)
        self.assertAlmostEqual(np.mean(on_wall), wall_fraction, delta=0.04)

    def test_box_minus_cylinder_has_a_hole(self):
        fixture = synth_fixture('box_minus_cylinder', 3000, seed=self.seed)
        self.assertEqual(fixture.mesh.euler_characteristic(), 0)
        radial = np.linalg.norm(fixture.cloud.points[:, :2], axis=1)
        self.assertGreaterEqual(radial.min(), 0.2 - 1e-4)
        expected = 0.8 * 0.8 * 0.4 - math.pi * 0.04 * 0.4
        self.assertAlmostEqual(signed_volume(fixture.mesh), expected, delta=1e-3)
        wall = np.abs(radial - 0.2) < 1e-12
        self.assertTrue(np.allclose(fixture.cloud.normals[wall, :2],
                                    -fixture.cloud.points[wall, :2] / 0.2))

    def test_wedge_edges(self):
        fixture = synth_fixture('fandisk_like_wedge', 1000, seed=self.seed)
        self.assertEqual(len(fixture.edges), 9)
        self.assertEqual(fixture.mesh.euler_characteristic(), 2)
        self.assertLess(fixture.distance_to_edges(fixture.mesh.vertices).max(), 1e-12)

    def test_bad_arguments(self):
        with self.assertRaises(ValueError):
            synth_fixture('torus')
        with self.assertRaises(ValueError):
            synth_fixture('cube', count=0)
        with self.assertRaises(ValueError):
            synth_fixture('cube', missing_fraction=1.5)

    def test_distance_to_segments(self):
        segments = np.array([[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]])
        points = np.array([[0.5, 2.0, 0.0], [-3.0, 0.0, 4.0], [2.0, 0.0, 0.0]])
        self.assertTrue(np.allclose(distance_to_segments(points, segments), [2.0, 5.0, 1.0]))


if __name__ == '__main__':
    unittest.main()

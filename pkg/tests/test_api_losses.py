#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math
import unittest

import faker
import numpy as np
import torch

from cadsdf.api.common import ConfigError, Diagnostics
from cadsdf.api.fields import CylinderField, PlaneField, SphereField
from cadsdf.api.losses import (
    CSV_HEADER,
    BatchJets,
    LossBreakdown,
    LossWeights,
    alt_energy,
    annealing_tau,
    chunked_gauss_term,
    dirichlet_manifold,
    dirichlet_nonmanifold,
    double_trough,
    double_trough_coefficients,
    eikonal_term,
    gauss_term,
    gaussian_curvature,
    gaussian_curvature_batch,
    mean_dt_curvature,
    regularizer_order,
    total_loss,
)
from cadsdf.api.network import Jet2, JetBatch, init_network


def _on_sphere(rng, count, radius):
    directions = rng.standard_normal((count, 3))
    return radius * directions / np.linalg.norm(directions, axis=1, keepdims=True)


class FlatField(object):
    """
    Constant field: zero gradient and Hessian everywhere.
    """
    input_scale = 1.0

    def jets(self, points, order=2, frame='world'):
        n = len(points)
        return JetBatch(torch.zeros(n, dtype=torch.float64), torch.zeros(n, 3, dtype=torch.float64),
                        torch.zeros(n, 3, 3, dtype=torch.float64))


def _tangent_oracle(gradient, hessian):
    """
    Gaussian curvature as the determinant of the Hessian restricted to the
    tangent plane, divided by |g|^2.
    """
    norm = np.linalg.norm(gradient)
    n = gradient / norm
    helper = np.eye(3)[np.argmin(np.abs(n))]
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    basis = np.stack([t1, t2], axis=1)
    return np.linalg.det(basis.T @ hessian @ basis) / norm ** 2


class CurvatureTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.fake = faker.Factory.create()

    def setUp(self):
        self.rng = np.random.default_rng(self.fake.random_int())

    def test_plane_is_flat(self):
        jets = PlaneField(normal=self.rng.standard_normal(3)).jets(
            self.rng.uniform(-0.5, 0.5, size=(20, 3)))
        k, valid = gaussian_curvature_batch(jets.gradients, jets.hessians)
        self.assertTrue(bool(valid.all()))
        self.assertEqual(k.abs().max().item(), 0.0)

    def test_sphere_curvature_is_inverse_square_radius(self):
        for radius in (0.3, 0.4, 1.0):
            jets = SphereField(radius).jets(_on_sphere(self.rng, 50, radius))
            k, _ = gaussian_curvature_batch(jets.gradients, jets.hessians)
            self.assertLess(np.abs(k.numpy() - 1.0 / radius ** 2).max(), 1e-9)

    def test_cylinder_is_developable(self):
        theta = self.rng.uniform(0, 2 * math.pi, 50)
        points = np.stack([0.3 * np.cos(theta), 0.3 * np.sin(theta),
                           self.rng.uniform(-0.4, 0.4, 50)], axis=1)
        jets = CylinderField(0.3).jets(points)
        k, _ = gaussian_curvature_batch(jets.gradients, jets.hessians)
        self.assertLess(k.abs().max().item(), 1e-9)

    def test_matches_tangent_plane_oracle(self):
        for _ in range(100):
            gradient = self.rng.standard_normal(3)
            a = self.rng.standard_normal((3, 3))
            hessian = 0.5 * (a + a.T)
            jet = Jet2(0.0, gradient, hessian)
            expected = _tangent_oracle(gradient, hessian)
            self.assertLess(abs(gaussian_curvature(jet) - expected),
                            1e-8 * max(1.0, abs(expected)))

    def test_joint_scaling_invariance(self):
        gradient = self.rng.standard_normal(3)
        a = self.rng.standard_normal((3, 3))
        hessian = a + a.T
        base = gaussian_curvature(Jet2(0.0, gradient, hessian))
        for s in (0.1, 3.0, 250.0):
            scaled = gaussian_curvature(Jet2(0.0, s * gradient, s * hessian))
            self.assertAlmostEqual(scaled, base, delta=1e-9 * max(1.0, abs(base)))

    def test_vanishing_gradient_is_guarded(self):
        diagnostics = Diagnostics()
        k = gaussian_curvature(Jet2(0.0, np.zeros(3), np.eye(3)), diagnostics=diagnostics)
        self.assertEqual(k, 0.0)
        self.assertEqual(diagnostics['guarded_curvature'], 1)

    def test_gauss_term_excludes_guarded_points(self):
        jets = SphereField(0.5).jets(_on_sphere(self.rng, 10, 0.5))
        gradients = torch.cat([jets.gradients, torch.zeros(1, 3, dtype=torch.float64)])
        hessians = torch.cat([jets.hessians, torch.eye(3, dtype=torch.float64)[None]])
        values = torch.cat([jets.values, torch.zeros(1, dtype=torch.float64)])
        diagnostics = Diagnostics()
        term = gauss_term(JetBatch(values, gradients, hessians), use_dt=False,
                          diagnostics=diagnostics)
        self.assertAlmostEqual(term.item(), 4.0, places=9)
        self.assertEqual(diagnostics['guarded_curvature'], 1)

    def test_chunked_gauss_term_matches_single_pass(self):
        net = init_network([3, 16, 16, 1], seed=self.fake.random_int())
        points = self.rng.uniform(-0.5, 0.5, size=(50, 3))
        # the output bias never reaches gradients or Hessians
        params = list(net.parameters())[:-1]
        with torch.enable_grad():
            whole = gauss_term(net.jets(points, order=2, frame='network'))
            expected = torch.autograd.grad(whole, params)
            for chunk in (1, 7, 50, 64):
                diagnostics = Diagnostics()
                term = chunked_gauss_term(net, points, chunk, diagnostics=diagnostics)
                self.assertAlmostEqual(term.item(), whole.item(), delta=1e-10 * abs(whole.item()))
                for got, want in zip(torch.autograd.grad(term, params), expected):
                    self.assertTrue(torch.allclose(got, want, rtol=1e-9, atol=1e-12), chunk)
                self.assertFalse(diagnostics)
        with torch.no_grad():
            plain = chunked_gauss_term(SphereField(0.5), _on_sphere(self.rng, 9, 0.5), 4,
                                       use_dt=False)
        self.assertAlmostEqual(plain.item(), 4.0, places=9)
        with self.assertRaises(ValueError):
            chunked_gauss_term(net, points, 0)

    def test_chunked_gauss_term_counts_guarded_points(self):
        diagnostics = Diagnostics()
        term = chunked_gauss_term(FlatField(), np.zeros((5, 3)), 2, diagnostics=diagnostics)
        self.assertEqual(term.item(), 0.0)
        self.assertEqual(diagnostics['guarded_curvature'], 5)

    def test_mean_dt_curvature(self):
        points = _on_sphere(self.rng, 30, 1.0)
        self.assertAlmostEqual(mean_dt_curvature(SphereField(1.0), points),
                               double_trough(1.0), places=9)


class DoubleTroughTestCase(unittest.TestCase):
    def test_anchor_values(self):
        self.assertEqual(double_trough(0.0), 0.0)
        self.assertAlmostEqual(double_trough(math.pi / 4), math.pi / 4, delta=1e-12)
        self.assertAlmostEqual(double_trough(math.pi / 2), 0.25, delta=1e-12)

    def test_stationary_points(self):
        h = 1e-6
        for t in (math.pi / 4, math.pi / 2):
            slope = (double_trough(t + h) - double_trough(t - h)) / (2 * h)
            self.assertLess(abs(slope), 1e-8)

    def test_default_coefficients(self):
        pi = math.pi
        expected = ((64 * pi - 80) / pi ** 4, (88 - 64 * pi) / pi ** 3,
                    (16 * pi - 29) / pi ** 2, 3 / pi)
        for got, want in zip(double_trough_coefficients(0.25), expected):
            self.assertAlmostEqual(got, want, delta=1e-14)

    def test_general_trough_height(self):
        for a in (0.1, 0.5, 0.7):
            self.assertAlmostEqual(double_trough(math.pi / 2, a), a, delta=1e-12)
            self.assertAlmostEqual(double_trough(math.pi / 4, a), math.pi / 4, delta=1e-12)

    def test_tensor_input_and_negative_scalar(self):
        t = torch.linspace(0, 2, 5, dtype=torch.float64)
        self.assertEqual(double_trough(t).shape, t.shape)
        with self.assertRaises(ValueError):
            double_trough(-0.1)


class AnnealingTestCase(unittest.TestCase):
    def test_schedule_anchors_are_exact(self):
        total = 10000
        self.assertEqual(annealing_tau(0, total), 1.0)
        self.assertEqual(annealing_tau(2000, total), 1.0)
        self.assertEqual(annealing_tau(5000, total), 1e-4)
        self.assertEqual(annealing_tau(total, total), 0.0)

    def test_schedule_is_monotone(self):
        taus = [annealing_tau(i, 1000) for i in range(1001)]
        self.assertTrue(all(a >= b for a, b in zip(taus, taus[1:])))
        self.assertAlmostEqual(annealing_tau(350, 1000), 0.5 + 0.5e-4, places=12)

    def test_other_modes(self):
        self.assertEqual(annealing_tau(900, 1000, 'constant'), 1.0)
        self.assertEqual(annealing_tau(0, 1000, 'off'), 0.0)
        with self.assertRaises(ValueError):
            annealing_tau(0, 1000, 'cosine')
        with self.assertRaises(ValueError):
            annealing_tau(1001, 1000)


class TotalLossTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.fake = faker.Factory.create()

    def setUp(self):
        self.rng = np.random.default_rng(self.fake.random_int())
        field = SphereField(0.4)
        self.manifold = field.jets(_on_sphere(self.rng, 40, 0.4))
        self.uniform = field.jets(self.rng.uniform(-0.5, 0.5, size=(60, 3)))
        self.near = field.jets(_on_sphere(self.rng, 30, 0.4))

    def test_terms_on_exact_sdf(self):
        self.assertLess(eikonal_term(self.manifold).item(), 1e-12)
        self.assertLess(dirichlet_manifold(self.manifold).item(), 1e-12)
        expected = np.exp(-100.0 * np.abs(self.uniform.values.numpy())).mean()
        self.assertAlmostEqual(dirichlet_nonmanifold(self.uniform).item(), expected, places=12)

    def test_total_is_weighted_sum(self):
        weights = LossWeights()
        breakdown = total_loss(BatchJets(self.manifold, self.uniform, self.near), weights, 0.5)
        self.assertIsInstance(breakdown, LossBreakdown)
        expected = (weights.lambda_e * breakdown.eikonal
                    + weights.lambda_dm * breakdown.dirichlet_manifold
                    + weights.lambda_dnm * breakdown.dirichlet_nonmanifold
                    + 0.5 * weights.lambda_gauss * breakdown.regularizer)
        self.assertAlmostEqual(breakdown.total, expected, delta=1e-9 * expected)
        self.assertAlmostEqual(breakdown.regularizer, double_trough(6.25), places=6)
        self.assertEqual(len(breakdown.as_row(3)), len(CSV_HEADER))

    def test_regularizer_variants(self):
        jets = BatchJets(self.manifold, self.uniform, self.near)
        none = total_loss(jets, LossWeights(regularizer='none'), 1.0)
        self.assertEqual(none.regularizer, 0.0)
        plain = total_loss(jets, LossWeights(regularizer='gauss_plain'), 1.0)
        self.assertAlmostEqual(plain.regularizer, 6.25, places=6)
        dirichlet = total_loss(jets, LossWeights(regularizer='dirichlet_energy'), 1.0)
        self.assertAlmostEqual(dirichlet.regularizer, 0.5, places=9)
        with self.assertRaises(ValueError):
            total_loss(BatchJets(self.manifold, self.uniform), LossWeights(), 1.0)

    def test_hessian_energies_of_identity(self):
        n = 4
        jets = JetBatch(torch.zeros(n, dtype=torch.float64), torch.zeros(n, 3, dtype=torch.float64),
                        torch.eye(3, dtype=torch.float64).expand(n, 3, 3))
        self.assertEqual(alt_energy(jets, 'hessian_l2').item(), 3.0)
        self.assertEqual(alt_energy(jets, 'hessian_l1').item(), 3.0)

    def test_alt_energies(self):
        plane = PlaneField().jets(self.rng.uniform(-0.5, 0.5, size=(10, 3)))
        self.assertEqual(alt_energy(plane, 'hessian_l2').item(), 0.0)
        self.assertEqual(alt_energy(plane, 'hessian_l1').item(), 0.0)
        with self.assertRaises(ValueError):
            alt_energy(plane, 'laplacian')
        self.assertEqual(regularizer_order('hessian_l1'), 2)
        self.assertEqual(regularizer_order('gauss_dt'), 1)

    def test_weight_validation(self):
        with self.assertRaises(ConfigError):
            LossWeights(lambda_e=-1.0)
        with self.assertRaises(ConfigError):
            LossWeights(dt_a=1.0)
        with self.assertRaises(ConfigError):
            LossWeights(regularizer='tv')
        self.assertIn('regularizer', LossWeights().as_dict())


if __name__ == '__main__':
    unittest.main()

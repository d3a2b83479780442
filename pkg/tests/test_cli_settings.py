#!/usr/bin/env python
# -*- coding: utf-8 -*-

import os
import shutil
import tempfile
import unittest

import faker

from cadsdf.api.common import ConfigError
from cadsdf.cli.settings import RunConfig, load_config, parse_bool, parse_config


SAMPLE = """
# sphere run
fixture = sphere
fixture_count = 2000
iterations = 2000     # short
learning_rate = 1e-4
regularizer = gauss_dt
dynamic_sampling = no
hidden_layers = 2
hidden_width = 64
output_dir = runs/sphere
"""


class SettingsTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.fake = faker.Factory.create()

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def write(self, text, name='run.cfg'):
        path = os.path.join(self.directory, name)
        with open(path, 'w') as fd:
            fd.write(text)
        return path

    def test_parse_sample(self):
        run_config = parse_config(SAMPLE)
        train = run_config.train_config
        self.assertEqual(train.iterations, 2000)
        self.assertEqual(train.learning_rate, 1e-4)
        self.assertFalse(train.dynamic_sampling)
        self.assertEqual(train.layer_sizes, [3, 64, 64, 1])
        self.assertEqual(train.weights.regularizer, 'gauss_dt')
        self.assertEqual(train.weights.lambda_dm, 7000.0)
        self.assertEqual(run_config.fixture, 'sphere')
        self.assertEqual(run_config.fixture_count, 2000)
        self.assertIsNone(run_config.input)

    def test_curvature_chunk(self):
        self.assertEqual(parse_config('curvature_chunk = 512').train_config.curvature_chunk, 512)
        self.assertEqual(parse_config('').train_config.curvature_chunk, 2048)
        with self.assertRaises(ConfigError):
            parse_config('curvature_chunk = 0')

    def test_unknown_key_names_key_and_line(self):
        with self.assertRaises(ConfigError) as raised:
            parse_config('iterations = 5\nlearning_rat = 0.1\n', 'x.cfg')
        self.assertIn("'learning_rat'", str(raised.exception))
        self.assertIn('x.cfg:2', str(raised.exception))

    def test_bad_lines(self):
        for text in ('iterations 5', 'iterations = five', 'seed = 1\nseed = 2',
                     'dynamic_sampling = maybe', 'regularizer = tv', 'mesh_resolution = 8',
                     'hidden_layers = 0', 'fixture = torus', 'fixture_missing = 1.0'):
            with self.assertRaises(ConfigError, msg=text):
                parse_config(text)

    def test_parse_bool(self):
        for word in ('true', 'Yes', 'on', '1'):
            self.assertTrue(parse_bool(word))
        for word in ('false', 'NO', 'off', '0'):
            self.assertFalse(parse_bool(word))

    def test_relative_paths_follow_config_file(self):
        cloud = self.write('0 0 0\n', 'points.xyz')
        path = self.write('input = points.xyz\noutput_dir = out\n')
        run_config = load_config(path)
        self.assertEqual(run_config.input, cloud)
        self.assertEqual(run_config.output_dir, os.path.join(self.directory, 'out'))
        run_config.check_inputs()

    def test_check_inputs(self):
        with self.assertRaises(ConfigError):
            RunConfig().check_inputs()
        both = RunConfig({'fixture': 'cube', 'input': self.write('0 0 0\n', 'a.xyz')})
        with self.assertRaises(ConfigError):
            both.check_inputs()
        missing = os.path.join(self.directory, '{}.xyz'.format(self.fake.word()))
        with self.assertRaises(ConfigError) as raised:
            RunConfig({'input': missing}).check_inputs()
        self.assertIn(missing, str(raised.exception))

    def test_missing_config_file(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.directory, 'absent.cfg'))

    def test_dumps_round_trip(self):
        run_config = parse_config(SAMPLE)
        again = parse_config(run_config.dumps())
        self.assertEqual(again.train_config.as_dict(), run_config.train_config.as_dict())
        for key, value in run_config.values.items():
            self.assertEqual(again.values[key], value, key)


if __name__ == '__main__':
    unittest.main()

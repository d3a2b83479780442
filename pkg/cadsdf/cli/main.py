"""
Command line entry point: ``cadsdf fit | mesh | eval | synth | bench``.
"""
import argparse
import csv
import logging
import os
import statistics
import sys

import numpy as np

from cadsdf.api import config
from cadsdf.api.fixtures import synth_fixture
from cadsdf.api.losses import mean_dt_curvature
from cadsdf.api.meshing import curvature_colors, extract_mesh
from cadsdf.api.metrics import REPORT_FIELDS, evaluate_meshes, sample_mesh
from cadsdf.api.network import load_checkpoint
from cadsdf.api.optimizer import FINAL_CHECKPOINT, TrainConfig, benchmark, fit
from cadsdf.api.sampling import PointCloud, knn_scales, sample_omega
from cadsdf.cli.settings import load_config
from cadsdf.formats.cloud import Transform, load_cloud, normalize_cloud, write_cloud
from cadsdf.formats.mesh import read_mesh, write_mesh


logger = logging.getLogger(__name__)

TRANSFORM_FILE = 'transform.json'
MESH_FILE = 'mesh.obj'
METRICS_FILE = 'metrics.csv'
CONFIG_COPY = 'run.cfg'
HELD_OUT_POINTS = 5000

_handler = None


def setup_stderr_root_logger(level=logging.INFO):
    global _handler
    if _handler is not None:
        logging.root.removeHandler(_handler)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setLevel(logging.DEBUG)
    formatter = logging.Formatter(
        fmt="%(asctime)s %(name)s line:%(lineno)-4d %(levelname)-8s %(message)s"
    )
    _handler.setFormatter(formatter)
    logging.root.addHandler(_handler)
    logging.root.setLevel(level)


def _training_cloud(run_config):
    """
    ``(cloud, fixture, transform)`` for ``fit``: a generated fixture, or a
    file normalized into the unit box with its transform written next to
    the checkpoints.
    """
    output_dir = run_config.output_dir
    if run_config.fixture is not None:
        fixture = synth_fixture(run_config.fixture, run_config.fixture_count,
                                run_config.fixture_noise, run_config.fixture_missing,
                                run_config.train_config.seed)
        write_cloud(os.path.join(output_dir, '{}.xyz'.format(fixture.kind)), fixture.cloud)
        write_mesh(os.path.join(output_dir, '{}_gt.obj'.format(fixture.kind)), fixture.mesh)
        return fixture.cloud, fixture, None

    cloud, transform = normalize_cloud(load_cloud(run_config.input))
    transform.save(os.path.join(output_dir, TRANSFORM_FILE))
    return cloud, None, transform


def _write_report(path, report):
    with open(path, 'w', newline='') as fd:
        writer = csv.writer(fd)
        writer.writerow(REPORT_FIELDS)
        writer.writerow(report.as_row())


def _finish_fit(run_config, net, fixture, transform):
    """
    Extract the trained surface at ``mesh_resolution``. Fixture runs are
    also scored against the ground truth with ``metric_samples`` and
    ``f1_threshold``.
    """
    mesh = extract_mesh(net, run_config.mesh_resolution)
    if transform is not None:
        mesh = transform.denormalize(mesh)
    mesh_path = os.path.join(run_config.output_dir, MESH_FILE)
    write_mesh(mesh_path, mesh)
    print(mesh_path)
    if fixture is None:
        return
    if mesh.is_empty:
        logger.warning('nothing to score, the extracted mesh is empty')
        return
    report = evaluate_meshes(mesh, fixture.mesh, run_config.metric_samples,
                             run_config.train_config.seed, run_config.f1_threshold)
    print(report.as_table())
    _write_report(os.path.join(run_config.output_dir, METRICS_FILE), report)


def cmd_fit(args):
    run_config = load_config(args.config)
    if args.output_dir:
        run_config.values['output_dir'] = args.output_dir
    if args.resume:
        run_config.values['resume'] = args.resume
    run_config.check_inputs()

    output_dir = run_config.output_dir
    if not os.path.isdir(output_dir):
        os.makedirs(output_dir)
    with open(os.path.join(output_dir, CONFIG_COPY), 'w') as fd:
        fd.write(run_config.dumps())

    cloud, fixture, transform = _training_cloud(run_config)
    logger.info('fitting %r with %r', cloud, run_config.train_config)
    net, log = fit(cloud, run_config.train_config, output_dir=output_dir,
                 resume_from=run_config.resume)
    if log.last is not None:
        print('final loss {:.6e}'.format(log.last.total))
    print(os.path.join(output_dir, FINAL_CHECKPOINT))
    if not args.no_mesh:
        _finish_fit(run_config, net, fixture, transform)
    return 0


def _default_mesh_path(checkpoint, resolution, fmt):
    stem = os.path.splitext(checkpoint)[0]
    return '{}_{}.{}'.format(stem, resolution, fmt)


def cmd_mesh(args):
    fmt = args.format or ('ply' if args.curvature else 'obj')
    if args.curvature and fmt == 'obj':
        raise ValueError('--curvature needs --format ply')
    net = load_checkpoint(args.checkpoint)['network']
    mesh = extract_mesh(net, args.res)
    if args.curvature and not mesh.is_empty:
        mesh.scalars = curvature_colors(net, mesh)
    if args.transform:
        mesh = Transform.load(args.transform).denormalize(mesh)
    output = args.output or _default_mesh_path(args.checkpoint, args.res, fmt)
    write_mesh(output, mesh, binary=args.binary)
    print(output)
    return 0


def _held_out_points(gt, count, seed):
    rng = np.random.default_rng([seed, 1])
    samples = sample_mesh(gt, count, rng)
    cloud = PointCloud(samples.points)
    return sample_omega(cloud, knn_scales(cloud, min(config.KNN_K, count - 1)), count, rng)


def cmd_eval(args):
    recon = read_mesh(args.mesh)
    gt = read_mesh(args.gt_mesh)
    report = evaluate_meshes(recon, gt, args.samples, args.seed, args.threshold)
    print(report.as_table())
    if args.checkpoint:
        net = load_checkpoint(args.checkpoint)['network']
        points = _held_out_points(gt, HELD_OUT_POINTS, args.seed)
        print('mean DT(|K|)  {:.6e}'.format(mean_dt_curvature(net, points)))
    if args.csv:
        _write_report(args.csv, report)
    return 0


def cmd_synth(args):
    fixture = synth_fixture(args.kind, args.count, args.noise, args.missing, args.seed)
    if not os.path.isdir(args.output_dir):
        os.makedirs(args.output_dir)
    cloud_path = os.path.join(args.output_dir, '{}.{}'.format(args.kind, args.format))
    mesh_path = os.path.join(args.output_dir, '{}_gt.obj'.format(args.kind))
    write_cloud(cloud_path, fixture.cloud)
    write_mesh(mesh_path, fixture.mesh)
    print(cloud_path)
    print(mesh_path)
    return 0


def cmd_bench(args):
    cloud = synth_fixture('sphere', args.points, seed=args.seed).cloud
    sizes = {}
    if args.batch is not None:
        sizes = dict(batch_manifold=args.batch, batch_uniform=args.batch, batch_omega=args.batch)
    train_config = TrainConfig(seed=args.seed, knn_k=min(config.KNN_K, args.points - 1),
                               curvature_chunk=args.chunk, **sizes)
    logger.info('timing %d iterations, batches %d/%d/%d, curvature chunk %d', args.iterations,
                train_config.batch_manifold, train_config.batch_uniform, train_config.batch_omega,
                train_config.curvature_chunk)
    timings = [1e3 * t for t in benchmark(cloud, train_config, args.iterations)]
    for index, ms in enumerate(timings, 1):
        print('iteration {:3d}  {:10.2f} ms'.format(index, ms))
    print('mean {:.2f} ms  median {:.2f} ms  min {:.2f} ms'.format(
        statistics.mean(timings), statistics.median(timings), min(timings)))
    return 0


def _positive(value):
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError('expected a positive integer, got {}'.format(value))
    return number


def build_parser():
    # type: () -> argparse.ArgumentParser
    parser = argparse.ArgumentParser(prog='cadsdf', description=__doc__.strip())
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    p = commands.add_parser('fit', help='train a field from a config file')
    p.add_argument('config')
    p.add_argument('--output-dir')
    p.add_argument('--resume', help='checkpoint to continue from')
    p.add_argument('--no-mesh', action='store_true',
                   help='skip the mesh extraction and scoring after training')
    p.set_defaults(func=cmd_fit)

    p = commands.add_parser('mesh', help='extract the zero level set of a checkpoint')
    p.add_argument('checkpoint')
    p.add_argument('--res', type=_positive, default=config.GRID_RESOLUTION)
    p.add_argument('--curvature', action='store_true', help='store |K| per vertex (PLY)')
    p.add_argument('--format', choices=('obj', 'ply'))
    p.add_argument('--binary', action='store_true', help='binary PLY')
    p.add_argument('--output')
    p.add_argument('--transform', help='{} written by fit'.format(TRANSFORM_FILE))
    p.set_defaults(func=cmd_mesh)

    p = commands.add_parser('eval', help='compare a mesh with a ground-truth mesh')
    p.add_argument('mesh')
    p.add_argument('gt_mesh')
    p.add_argument('--samples', type=_positive, default=config.METRIC_SAMPLES)
    p.add_argument('--seed', type=int, default=config.SEED)
    p.add_argument('--threshold', type=float, default=config.F1_THRESHOLD)
    p.add_argument('--csv', help='also write the report as CSV')
    p.add_argument('--checkpoint', help='report held-out mean DT(|K|) of this network')
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser('synth', help='write a fixture cloud and its ground-truth mesh')
    p.add_argument('kind', choices=config.FIXTURE_KINDS)
    p.add_argument('--count', type=_positive, default=10000)
    p.add_argument('--noise', type=float, default=0.0)
    p.add_argument('--missing', type=float, default=0.0)
    p.add_argument('--seed', type=int, default=config.SEED)
    p.add_argument('--format', choices=('xyz', 'ply'), default='xyz')
    p.add_argument('--output-dir', default='.')
    p.set_defaults(func=cmd_synth)

    p = commands.add_parser('bench', help='time training iterations')
    p.add_argument('--iterations', type=_positive, default=10)
    p.add_argument('--points', type=_positive, default=10000)
    p.add_argument('--batch', type=_positive,
                   help='size of every point batch (default: the training defaults)')
    p.add_argument('--chunk', type=_positive, default=config.CURVATURE_CHUNK,
                   help='curvature points per jet chunk')
    p.add_argument('--seed', type=int, default=config.SEED)
    p.set_defaults(func=cmd_bench)
    return parser


def cli_main(argv=None):
    # type: (list) -> int
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    setup_stderr_root_logger(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        logger.debug('command failed', exc_info=True)
        sys.stderr.write('error: {}\n'.format(e))
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

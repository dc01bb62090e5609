# -*- coding: utf-8 -*-
"""
Command line interface ``gastwin``.

Subcommands::

    gastwin train --config C --data D [--out O] [--f64] [--seed N]
    gastwin eval --checkpoint P --data D [--split test] [--json]
    gastwin infer --checkpoint P --image X --out Y [--figure F]
    gastwin profile [--config C] [--input 512x512] [--json] [--ablations]
    gastwin synth --config S [--out D]
    gastwin selftest [--only NAME ...]

``--data`` is a dataset root in the layout of
:mod:`gastwin.datasets.folder`, or a synthetic dataset config file
(``synth.*`` keys), which is then rendered in memory. The environment variable
``GASTWIN_SEED`` overrides ``data.seed`` of the config; ``--seed`` overrides
both.

Exit codes: 0 success, 1 failed selftest, 2 configuration error, 3 data error
or missing file, 4 numerical failure.
"""
import argparse
import json
import os
import sys
import numpy as np
from skimage.io import imsave

from gastwin.ablation import AblationTable
from gastwin.checkpoint import load_model
from gastwin.config import CONFIG
from gastwin.data import DIET_CLASSES, Sample
from gastwin.datasets.dataset import InMemoryDataset
from gastwin.datasets.folder import FolderDataset, read_image
from gastwin.datasets.synthetic import (
    SyntheticDataset, load_synth_config, synth_generate)
from gastwin.datasets.transforms import nearest_indices, resize_pair
from gastwin.errors import ConfigError, DataError, NumericalError
from gastwin.evaluation import evaluate
from gastwin.modelconfig import (
    ModelConfig, PARSERS, apply_overrides, load_config)
from gastwin.nn.model import GasTwinFormer
from gastwin.profiler import count_flops
from gastwin.selftest import run_selftest, format_results, all_passed
from gastwin.tensor import RngState, default_dtype
from gastwin.trainer import train
from gastwin.version import __version__

SEED_ENV = 'GASTWIN_SEED'

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _seeded(cfg, seed=None):
    env = os.environ.get(SEED_ENV)
    if seed is None and env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError('{}: expected int, got {!r}'.format(
                SEED_ENV, env)) from None
    if seed is None:
        return cfg
    return apply_overrides(cfg, 'data.seed = {}\n'.format(seed))


def _input_size(text):
    try:
        return PARSERS['int-pair'](text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def load_data(path, input_size, parts=('train', 'val', 'test')):
    """Dataset from a dataset root or a synthetic dataset config file."""
    if os.path.isfile(path):
        dataset = SyntheticDataset(load_synth_config(path))
        if getattr(dataset, 'shape', None) != tuple(input_size):
            dataset = InMemoryDataset({
                part: [resize_pair(s, input_size)
                       for s in dataset.get_samples(part)]
                for part in parts})
        return dataset
    if not os.path.isdir(path):
        raise FileNotFoundError('dataset {} not found'.format(path))
    return FolderDataset(path, input_size=input_size, parts=parts)


def cmd_train(args):
    cfg = _seeded(load_config(args.config), args.seed)
    dtype = np.float64 if args.f64 else np.float32
    with default_dtype(dtype):
        dataset = load_data(args.data, cfg.input_size)
        model = GasTwinFormer(cfg)
        result = train(model, dataset, cfg, out_dir=args.out,
                       rng=RngState(cfg.seed), show_pbar=not args.quiet)
    print('metric log and checkpoints written to {}'.format(args.out))
    if result.checkpoints and result.checkpoints[0][2] is not None:
        print('best checkpoint: {}'.format(result.checkpoints[0][2]))
    return EXIT_OK


def cmd_eval(args):
    model, _ = load_model(args.checkpoint)
    with default_dtype(model_dtype(model)):
        dataset = load_data(args.data, model.cfg.input_size,
                            parts=(args.split,))
        report = evaluate(model, dataset.get_samples(args.split),
                          batch_size=model.cfg.optim.batch_size,
                          show_pbar=not args.quiet)
    if args.json:
        print(report.to_json())
    else:
        print(report)
        print()
        print(report.to_json())
    return EXIT_OK


def model_dtype(model):
    return next(iter(model.parameters())).dtype


def infer_image(model, image):
    """
    Predict the mask and diet of one ``(H, W)`` frame.

    The frame is resized to the network input and the predicted mask back to
    the frame extents by nearest neighbor.

    Returns
    -------
    mask : :class:`numpy.ndarray`
        ``(H, W)`` uint8 classes.
    diet_probs : :class:`numpy.ndarray`
        ``(num_diet_classes,)``.
    """
    h, w = image.shape
    sample = resize_pair(Sample(np.repeat(image[None], model.cfg.in_channels,
                                          axis=0),
                                np.zeros((h, w), dtype=np.uint8), 0),
                         model.cfg.input_size)
    dtype = model_dtype(model)
    with default_dtype(dtype):
        mask, diet_probs = model.predict(sample.image[None].astype(dtype))
    out_h, out_w = mask.shape[1:]
    mask = mask[0][nearest_indices(out_h, h)][:, nearest_indices(out_w, w)]
    return mask.astype(np.uint8), diet_probs[0]


def cmd_infer(args):
    model, _ = load_model(args.checkpoint)
    image = read_image(args.image)
    mask, diet_probs = infer_image(model, image)
    parent = os.path.dirname(args.out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    imsave(args.out, mask, check_contrast=False)
    sidecar = os.path.splitext(args.out)[0] + '.json'
    with open(sidecar, 'w') as f:
        json.dump({'diet_class': DIET_CLASSES[int(np.argmax(diet_probs))],
                   'diet_probs': [float(p) for p in diet_probs]}, f,
                  indent=1)
    if args.figure:
        from gastwin.util.plot import save_prediction_figure
        save_prediction_figure(args.figure, image, mask,
                               diet_probs=diet_probs,
                               title=os.path.basename(args.image))
    print('mask: {}, diet: {}'.format(args.out, sidecar))
    return EXIT_OK


def cmd_profile(args):
    cfg = (load_config(args.config) if args.config
           else ModelConfig().validate())
    size = args.input or cfg.input_size
    if args.ablations:
        table = AblationTable(input_size=size, base=cfg)
        results = table.run()
        print(results.to_json(orient='records', indent=1) if args.json
              else table.to_string())
        return EXIT_OK
    report = count_flops(cfg, *size)
    print(report.to_json() if args.json else report.to_table())
    return EXIT_OK


def cmd_synth(args):
    counts = synth_generate(load_synth_config(args.config), args.out,
                            show_pbar=not args.quiet)
    print('wrote {} to {}'.format(
        ', '.join('{} {}'.format(n, p) for p, n in counts.items()),
        args.out))
    return EXIT_OK


def cmd_selftest(args):
    try:
        results = run_selftest(args.only, show_pbar=not args.quiet)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    print(format_results(results))
    return EXIT_OK if all_passed(results) else EXIT_SELFTEST


def build_parser():
    parser = argparse.ArgumentParser(
        prog='gastwin', description='Methane plume segmentation and diet '
        'classification with a hybrid attention transformer.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('-q', '--quiet', action='store_true',
                        help='hide progress bars')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='train a model')
    p.add_argument('--config', required=True, help='model config file')
    p.add_argument('--data', required=True,
                   help='dataset root or synthetic dataset config')
    p.add_argument('--out', default=CONFIG['runs']['out_path'],
                   help='run directory (checkpoints, metrics.jsonl)')
    p.add_argument('--f64', action='store_true',
                   help='compute in 64 bit precision')
    p.add_argument('--seed', type=int, help='overrides data.seed')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', help='evaluate a checkpoint')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--data', required=True,
                   help='dataset root or synthetic dataset config')
    p.add_argument('--split', default='test',
                   choices=('train', 'val', 'test'))
    p.add_argument('--json', action='store_true',
                   help='print the JSON report only')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('infer', help='predict mask and diet of one frame')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--image', required=True)
    p.add_argument('--out', required=True,
                   help='mask PNG; the JSON sidecar is written next to it')
    p.add_argument('--figure', help='also save a prediction figure')
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser('profile', help='count parameters and operations')
    p.add_argument('--config', help='model config file (default: the '
                   'published model)')
    p.add_argument('--input', type=_input_size,
                   help='input extents HxW (default: data.input)')
    p.add_argument('--json', action='store_true')
    p.add_argument('--ablations', action='store_true',
                   help='profile all ablation rows')
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser('synth', help='generate a synthetic dataset')
    p.add_argument('--config', required=True,
                   help='synthetic dataset config file')
    p.add_argument('--out', default=CONFIG['synthetic_dataset']['data_path'])
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('selftest', help='run the oracle and invariant suite')
    p.add_argument('--only', nargs='+', metavar='NAME',
                   help="checks to run, 'group/' selects a group")
    p.set_defaults(func=cmd_selftest)
    return parser


def run(argv=None):
    """
    Run the command line interface.

    Returns
    -------
    code : int
        Exit code.
    """
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        code, message = EXIT_CONFIG, 'configuration error: {}'.format(e)
    except (DataError, OSError) as e:
        code, message = EXIT_DATA, 'data error: {}'.format(e)
    except NumericalError as e:
        code, message = EXIT_NUMERICAL, 'numerical failure: {}'.format(e)
    print('gastwin {}: {}'.format(args.command, message), file=sys.stderr)
    return code


def main():
    sys.exit(run())

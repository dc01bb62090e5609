# -*- coding: utf-8 -*-
"""
Training: learning rate schedule, AdamW and the optimization loop.

The loop draws batches in a per-epoch shuffled order, minimizes
:func:`gastwin.losses.multi_task_loss` with AdamW under :func:`lr_at`,
validates every ``val_every`` iterations (and after the last one), writes one
JSON line per validation to ``metrics.jsonl`` and keeps the ``keep_top_k``
checkpoints with the highest validation mean IoU. After training the model
holds the weights of the best checkpoint.
"""
from collections import OrderedDict
from functools import partial
import json
import os
import numpy as np
from tqdm import tqdm

from gastwin.checkpoint import save_checkpoint
from gastwin.datasets.transforms import augment
from gastwin.errors import DataError, NumericalError
from gastwin.evaluation import evaluate
from gastwin.losses import multi_task_loss
from gastwin.modelconfig import serialize_config
from gastwin.nn.model import parameter_groups
from gastwin.tensor import RngState, Tensor, get_default_dtype

METRICS_FILENAME = 'metrics.jsonl'
CHECKPOINT_NAME = 'ckpt_iter{:06d}.gtwf'

METRIC_KEYS = ('iter', 'lr', 'loss_total', 'loss_seg', 'loss_cls',
               'val_miou', 'val_mf1', 'val_diet_acc', 'val_fg_iou')


def lr_at(it, cfg):
    """
    Learning rate at iteration `it`.

    Linear warmup from ``warmup_start_lr`` to ``base_lr`` over
    ``warmup_iters`` iterations, then polynomial decay
    ``base_lr * (1 - (it - warmup_iters) / (total_iters - warmup_iters))
    ** poly_power``, reaching 0 at ``total_iters``.

    Parameters
    ----------
    it : int
        Iteration in ``[0, total_iters]``.
    cfg : :class:`gastwin.modelconfig.OptimConfig`
    """
    if not 0 <= it <= cfg.total_iters:
        raise ValueError('iteration {} outside [0, {}]'.format(
            it, cfg.total_iters))
    if it < cfg.warmup_iters:
        return cfg.warmup_start_lr + (cfg.base_lr - cfg.warmup_start_lr) * (
            it / cfg.warmup_iters)
    progress = (it - cfg.warmup_iters) / (cfg.total_iters - cfg.warmup_iters)
    return cfg.base_lr * (1. - progress) ** cfg.poly_power


class OptimizerState:
    """
    AdamW state of a list of parameters.

    Attributes
    ----------
    step : int
        Number of updates performed.
    m, v : list of :class:`numpy.ndarray` or `None`
        First and second moments, created on the first update.
    """
    def __init__(self):
        self.step = 0
        self.m = None
        self.v = None


def adamw_step(params, grads, state, lr, cfg, weight_decay=None):
    """
    One AdamW update of `params` (in place).

    The weight decay is decoupled: parameters are first scaled by
    ``1 - lr * weight_decay``, then moved by the bias-corrected Adam step.

    Parameters
    ----------
    params : list of :class:`numpy.ndarray`
        Updated in place.
    grads : list of :class:`numpy.ndarray`
        Gradients, same shapes.
    state : :class:`OptimizerState`
    lr : float
    cfg : :class:`gastwin.modelconfig.OptimConfig`
        Betas and epsilon (and the default weight decay).
    weight_decay : float, optional
        Overrides ``cfg.weight_decay``.

    Raises
    ------
    gastwin.errors.NumericalError
        If an updated parameter is not finite.
    """
    if len(params) != len(grads) or any(
            p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError('parameter and gradient shapes differ')
    wd = cfg.weight_decay if weight_decay is None else weight_decay
    b1, b2 = cfg.betas
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1. - b1 ** state.step
    c2 = 1. - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if wd:
            p *= 1. - lr * wd
        m *= b1
        m += (1. - b1) * g
        v *= b2
        v += (1. - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
        if not np.all(np.isfinite(p)):
            raise NumericalError('non-finite parameter after AdamW step {}'
                                 .format(state.step))


class ParamGroup:
    """Parameters sharing learning rate scale and weight decay."""
    def __init__(self, name, named_params, lr_scale, weight_decay):
        self.name = name
        self.names = [n for n, _ in named_params]
        self.params = [p for _, p in named_params]
        self.lr_scale = lr_scale
        self.weight_decay = weight_decay
        self.state = OptimizerState()

    def __repr__(self):
        return ('ParamGroup({}, tensors={}, lr_scale={}, weight_decay={})'
                .format(self.name, len(self.params), self.lr_scale,
                        self.weight_decay))


class AdamW:
    """
    AdamW over the parameter groups of :func:`gastwin.nn.parameter_groups`:
    ``'backbone'`` (lr scale 1), ``'head'`` (lr scale
    ``head_lr_multiplier``), ``'norm'`` (lr scale 1, weight decay
    ``norm_weight_decay``).
    """
    def __init__(self, model, cfg):
        self.cfg = cfg
        groups = parameter_groups(model)
        self.groups = [
            ParamGroup('backbone', groups['backbone'], 1., cfg.weight_decay),
            ParamGroup('head', groups['head'], cfg.head_lr_multiplier,
                       cfg.weight_decay),
            ParamGroup('norm', groups['norm'], 1., cfg.norm_weight_decay)]

    @property
    def step_count(self):
        return self.groups[0].state.step

    def zero_grad(self):
        for group in self.groups:
            for p in group.params:
                p.zero_grad()

    def step(self, lr):
        """Update all parameters with base learning rate `lr`."""
        for group in self.groups:
            if not group.params:
                group.state.step += 1
                continue
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                     for p in group.params]
            adamw_step([p.data for p in group.params], grads, group.state,
                       lr * group.lr_scale, self.cfg,
                       weight_decay=group.weight_decay)

    def state_dict(self):
        state = {'step': self.step_count, 'm': OrderedDict(),
                 'v': OrderedDict()}
        for group in self.groups:
            if group.state.m is None:
                continue
            for name, m, v in zip(group.names, group.state.m, group.state.v):
                state['m'][name] = m.copy()
                state['v'][name] = v.copy()
        return state

    def load_state_dict(self, state):
        for group in self.groups:
            group.state.step = int(state['step'])
            if all(n in state['m'] for n in group.names) and group.names:
                group.state.m = [np.array(state['m'][n]) for n in group.names]
                group.state.v = [np.array(state['v'][n]) for n in group.names]


class TrainResult:
    """
    Outcome of :func:`train`.

    Attributes
    ----------
    log : list of dict
        Metric log lines.
    checkpoints : list of (float, int, str or None)
        Retained ``(val_miou, iteration, path)``, best first.
    best_iter : int
    best_miou : float
    """
    def __init__(self, log, checkpoints):
        self.log = log
        self.checkpoints = checkpoints
        self.best_miou, self.best_iter = (
            (checkpoints[0][0], checkpoints[0][1]) if checkpoints
            else (float('nan'), 0))

    def __repr__(self):
        return 'TrainResult(best_iter={}, best_miou={:.2f})'.format(
            self.best_iter, self.best_miou)


def _batch_stream(dataset, batch_size, rng, transform, dtype):
    n = dataset.get_len('train')
    epoch = 0
    while True:
        order = rng.spawn('epoch/{}'.format(epoch)).permutation(n)
        yield from dataset.get_batches('train', batch_size, order=order,
                                       transform=transform, dtype=dtype)
        epoch += 1


def _mean(values):
    return float(np.mean(values)) if values else None


def _fmt(value):
    return 'n/a' if value is None else '{:.6g}'.format(value)


def train(model, dataset, cfg, out_dir=None, rng=None, show_pbar=True,
          lr_fn=None):
    """
    Train `model` on the ``'train'`` part of `dataset`.

    Parameters
    ----------
    model : :class:`gastwin.nn.model.GasTwinFormer`
    dataset : :class:`gastwin.datasets.Dataset`
        Samples at the network input size; needs ``'train'`` and ``'val'``
        samples.
    cfg : :class:`gastwin.modelconfig.ModelConfig`
        Optimizer, loss and augmentation settings are taken from ``cfg.optim``,
        ``cfg.loss`` and ``cfg.data``.
    out_dir : str, optional
        Directory for ``metrics.jsonl``, ``config.cfg`` and the retained
        checkpoints. If `None`, nothing is written.
    rng : :class:`gastwin.tensor.RngState`, optional
        Shuffling and augmentation randomness. Default:
        ``RngState(cfg.seed)``.
    show_pbar : bool, optional
        Whether to show a ``tqdm`` progress bar.
    lr_fn : callable, optional
        Replaces :func:`lr_at` (called with the iteration index).

    Returns
    -------
    result : :class:`TrainResult`

    Raises
    ------
    gastwin.errors.NumericalError
        If a non-finite value occurs; the message names the iteration and the
        loss components computed so far.
    """
    optim = cfg.optim
    if dataset.get_len('train') == 0:
        raise DataError('no training samples')
    if dataset.get_len('val') == 0:
        raise DataError('no validation samples')
    rng = rng or RngState(cfg.seed)
    lr_fn = lr_fn or partial(lr_at, cfg=optim)
    optimizer = AdamW(model, optim)
    transform = (partial(augment, rng=rng.spawn('augment'), cfg=cfg.data)
                 if cfg.data.augment else None)
    batches = _batch_stream(dataset, optim.batch_size, rng.spawn('shuffle'),
                            transform, get_default_dtype())
    val_samples = dataset.get_samples('val')
    log, retained = [], []
    best_state = None
    metrics_file = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, 'config.cfg'), 'w') as f:
            f.write(serialize_config(cfg))
        metrics_file = open(os.path.join(out_dir, METRICS_FILENAME), 'w')

    def validate(it, lr, losses):
        report = evaluate(model, val_samples, batch_size=optim.batch_size)
        line = OrderedDict(zip(METRIC_KEYS, (
            it, lr, _mean(losses['total']), _mean(losses['seg']),
            _mean(losses['cls']), report.miou, report.mf1,
            report.diet_accuracy, report.fg_iou)))
        log.append(line)
        if metrics_file is not None:
            metrics_file.write(json.dumps(line) + '\n')
            metrics_file.flush()
        tqdm.write('iter {}: val mIoU {:.2f}, mF1 {:.2f}, diet acc {:.2f}'
                   .format(it, report.miou, report.mf1,
                           report.diet_accuracy))
        return report.miou

    try:
        validate(0, lr_fn(0), {'total': [], 'seg': [], 'cls': []})
        losses = {'total': [], 'seg': [], 'cls': []}
        with tqdm(range(1, optim.total_iters + 1), desc='train',
                  disable=not show_pbar) as pbar:
            for it in pbar:
                lr = lr_fn(it - 1)
                batch = next(batches)
                model.train()
                optimizer.zero_grad()
                terms = {}
                try:
                    seg_logits, cls_logits = model(Tensor(batch.images))
                    total = multi_task_loss(
                        seg_logits, batch.masks, cls_logits, batch.diets,
                        cfg.loss, record=terms).total
                    total.backward()
                    optimizer.step(lr)
                except NumericalError as e:
                    raise NumericalError(
                        'iteration {}: {} (loss_total={}, loss_seg={}, '
                        'loss_cls={})'.format(
                            it, e, *(_fmt(terms.get(k))
                                     for k in ('total', 'seg', 'cls')))) \
                        from e
                for key, values in losses.items():
                    values.append(terms[key])
                pbar.set_postfix(loss=terms['total'], lr=lr)
                if it % optim.val_every == 0 or it == optim.total_iters:
                    miou = validate(it, lr, losses)
                    losses = {'total': [], 'seg': [], 'cls': []}
                    path = None
                    if out_dir is not None:
                        path = os.path.join(out_dir,
                                            CHECKPOINT_NAME.format(it))
                        save_checkpoint(path, model, iteration=it,
                                        optimizer=optimizer)
                    if best_state is None or miou > retained[0][0]:
                        best_state = model.state_dict()
                    retained.append((miou, it, path))
                    retained.sort(key=lambda r: (-r[0], r[1]))
                    for _, _, old_path in retained[optim.keep_top_k:]:
                        if old_path is not None and os.path.isfile(old_path):
                            os.remove(old_path)
                    del retained[optim.keep_top_k:]
    finally:
        if metrics_file is not None:
            metrics_file.close()
    result = TrainResult(log, retained)
    if best_state is not None:
        model.load_state_dict(best_state)
    print('best val mIoU: {:.2f} at iteration {}'.format(result.best_miou,
                                                         result.best_iter))
    return result

# -*- coding: utf-8 -*-
"""
Oracle and invariant suite of the package.

Each check is a function registered with :func:`check`. It raises
:class:`AssertionError` (via :func:`expect`) on failure and may return a short
message describing what was measured. :func:`run_selftest` runs the checks and
collects a :class:`pandas.DataFrame` with columns ``'name'``, ``'status'``,
``'seconds'`` and ``'message'``.

The suite is available from the command line as ``gastwin selftest``.
"""
from collections import OrderedDict
from time import perf_counter
import numpy as np
import pandas as pd
from tqdm import tqdm

from gastwin.checkpoint import encode_checkpoint, decode_checkpoint, \
    make_checkpoint
from gastwin.datasets.synthetic import SynthConfig, MASK_LEVEL, \
    blob_field, render_frame
from gastwin.losses import (
    gaussian_plume_weights, gpw_dice_loss, dice_loss, focal_loss,
    cross_entropy_loss, multi_task_loss)
from gastwin.modelconfig import (
    ModelConfig, StageConfig, parse_config, serialize_config,
    apply_overrides)
from gastwin.nn.encoder import EfficientAttention, LocallyGroupedAttention
from gastwin.nn.model import GasTwinFormer
from gastwin.profiler import count_flops, count_params, \
    count_params_from_config, relative_deviation
from gastwin.tensor import (
    Tensor, RngState, default_dtype, no_grad, check_gradients)
from gastwin.tensor import functional as F
from gastwin.util.constants import (
    REFERENCE_PARAMS_M, REFERENCE_GFLOPS, PATTERN_REFERENCES,
    WINDOW_REFERENCES, PARAMS_TOLERANCE, FLOPS_TOLERANCE)

CHECKS = OrderedDict()
"""Registered checks, name -> function."""

GRAD_TOLERANCE = 1e-3
LOSS_GRAD_TOLERANCE = 1e-4
ATTENTION_TOLERANCE = 1e-5

TINY_CONFIG = """\
model.channels = 4,8,8,8
model.heads = 1,2,2,2
model.mlp_expansion = 2
decoder.channels = 8
classifier.hidden = 8
classifier.dropout = 0.0
data.input = 32x32
"""
"""Overrides of a network small enough for finite difference checks."""


def check(name):
    """Decorator registering a check function under `name`."""
    def register(fn):
        if name in CHECKS:
            raise ValueError("check '{}' registered twice".format(name))
        CHECKS[name] = fn
        return fn
    return register


def expect(condition, message):
    if not condition:
        raise AssertionError(message)


def tiny_config(extra=''):
    """Configuration of a small network at 32x32 input."""
    return apply_overrides(ModelConfig().validate(), TINY_CONFIG + extra)


def _max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# operation oracles ----------------------------------------------------------

def conv2d_reference(x, weight, bias, stride, padding, groups):
    """Direct loop convolution used as oracle."""
    n, c_in, h, w = x.shape
    c_out, c_g, kh, kw = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, c_out, ho, wo))
    per_group = c_out // groups
    for o in range(c_out):
        g = o // per_group
        for i in range(ho):
            for j in range(wo):
                patch = xp[:, g * c_g:(g + 1) * c_g,
                           i * stride:i * stride + kh,
                           j * stride:j * stride + kw]
                out[:, o, i, j] = (patch * weight[o]).sum(axis=(1, 2, 3)) \
                    + bias[o]
    return out


@check('op/conv2d')
def check_conv2d():
    rng = RngState(1)
    x = rng.normal(size=(2, 4, 7, 6))
    weight = rng.normal(size=(6, 2, 3, 3))
    bias = rng.normal(size=6)
    with default_dtype(np.float64):
        out = F.conv2d(Tensor(x), Tensor(weight), Tensor(bias), stride=2,
                       padding=1, groups=2).data
    err = _max_abs(out, conv2d_reference(x, weight, bias, 2, 1, 2))
    expect(err < 1e-10, 'conv2d deviates from loop oracle by {}'.format(err))
    return 'max abs error {:.1e}'.format(err)


@check('op/softmax_layer_norm')
def check_softmax_layer_norm():
    x = RngState(2).normal(size=(5, 9)) * 4.
    with default_dtype(np.float64):
        p = F.softmax(Tensor(x)).data
        logp = F.log_softmax(Tensor(x)).data
        y = F.layer_norm(Tensor(x), Tensor(np.ones(9)), Tensor(np.zeros(9)),
                         1e-12).data
    e = np.exp(x)
    expect(_max_abs(p, e / e.sum(axis=1, keepdims=True)) < 1e-12,
           'softmax deviates from exp / sum')
    expect(_max_abs(p.sum(axis=1), 1.) < 1e-12, 'softmax rows do not sum '
           'to one')
    expect(_max_abs(logp, np.log(p)) < 1e-10, 'log_softmax != log(softmax)')
    expect(_max_abs(y.mean(axis=1), 0.) < 1e-10 and
           _max_abs(y.var(axis=1), 1.) < 1e-8,
           'layer_norm output not standardized')


@check('op/gelu')
def check_gelu():
    with default_dtype(np.float64):
        y = F.gelu(Tensor(np.array([-1., 0., 1.]))).data
    expect(abs(y[2] - 0.8412) < 1e-4, 'gelu(1) = {}, expected 0.8412'
           .format(y[2]))
    expect(y[1] == 0., 'gelu(0) = {}'.format(y[1]))
    expect(abs(y[0] + 0.1588) < 1e-4, 'gelu(-1) = {}'.format(y[0]))
    return 'gelu(1) = {:.5f}'.format(y[2])


@check('op/bilinear_resize')
def check_bilinear():
    x = np.array([[0., 1.], [2., 3.]]).reshape(1, 1, 2, 2)
    r = np.array([0., 0.25, 0.75, 1.])
    with default_dtype(np.float64):
        up = F.bilinear_resize(Tensor(x), 4, 4).data[0, 0]
        same = F.bilinear_resize(Tensor(x), 2, 2).data
    err = _max_abs(up, 2. * r[:, None] + r[None, :])
    expect(err < 1e-12, '2x2 -> 4x4 resize deviates by {}'.format(err))
    expect(np.array_equal(same, x), 'same-size resize changes values')


# gradients ------------------------------------------------------------------

def _param(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


@check('grad/ops')
def check_op_gradients():
    rng = RngState(3)
    worst = {}
    with default_dtype(np.float64):
        x = _param(rng, 2, 4, 5, 5)
        w = _param(rng, 4, 2, 3, 3)
        b = _param(rng, 4)
        r = rng.normal(size=(2, 4, 3, 3))
        worst['conv2d'] = check_gradients(
            lambda: (F.conv2d(x, w, b, stride=2, padding=1, groups=2) *
                     r).sum(), [x, w, b])
        t = _param(rng, 3, 6)
        g, be = _param(rng, 6), _param(rng, 6)
        r = rng.normal(size=(3, 6))
        worst['layer_norm'] = check_gradients(
            lambda: (F.layer_norm(t, g, be, 1e-6) * r).sum(), [t, g, be])
        worst['softmax'] = check_gradients(
            lambda: (F.softmax(t) * r).sum(), [t])
        worst['log_softmax'] = check_gradients(
            lambda: (F.log_softmax(t) * r).sum(), [t])
        worst['gelu'] = check_gradients(lambda: (F.gelu(t) * r).sum(), [t])
        worst['sigmoid'] = check_gradients(
            lambda: (F.sigmoid(t) * r).sum(), [t])
        m = _param(rng, 6, 2)
        worst['matmul'] = check_gradients(lambda: ((t @ m) ** 2).sum(),
                                          [t, m])
        img = _param(rng, 1, 2, 3, 4)
        r = rng.normal(size=(1, 2, 6, 8))
        worst['bilinear_resize'] = check_gradients(
            lambda: (F.bilinear_resize(img, 6, 8) * r).sum(), [img])
        worst['pool'] = check_gradients(
            lambda: (F.global_avg_pool(img) ** 2).sum(), [img])
    worst = {k: max(v.values()) for k, v in worst.items()}
    bad = {k: v for k, v in worst.items() if not v < GRAD_TOLERANCE}
    expect(not bad, 'relative gradient errors above {}: {}'.format(
        GRAD_TOLERANCE, bad))
    return 'max relative error {:.1e}'.format(max(worst.values()))


@check('grad/heads')
def check_head_gradients():
    cfg = tiny_config('loss.seg = cross_entropy\n')
    rng = RngState(4)
    with default_dtype(np.float64):
        model = GasTwinFormer(cfg).eval()
        images = Tensor(rng.normal(size=(2, 3, 32, 32)))
        masks = (rng.random((2, 32, 32)) > 0.5).astype(np.int64)
        diets = np.array([0, 2])

        def loss_fn():
            seg, cls = model(images)
            return multi_task_loss(seg, masks, cls, diets, cfg.loss).total
        params = dict(model.named_parameters())
        names = ['decoder.cls_conv.weight', 'decoder.pool_conv.weight',
                 'decoder.fuse_convs.0.weight', 'decoder.branch_convs.2.bias',
                 'classifier.fc1.weight', 'classifier.fc2.bias',
                 'encoder.stages.3.blocks.0.attn.q.weight',
                 'encoder.stages.0.blocks.1.attn.qkv.weight']
        errors = check_gradients(loss_fn, {n: params[n] for n in names},
                                 max_elements=4, rng=rng.spawn('elements'))
    bad = {k: v for k, v in errors.items() if not v < GRAD_TOLERANCE}
    expect(not bad, 'relative gradient errors above {}: {}'.format(
        GRAD_TOLERANCE, bad))
    return 'max relative error {:.1e}'.format(max(errors.values()))


@check('grad/losses')
def check_loss_gradients():
    rng = RngState(5)
    errors = {}
    with default_dtype(np.float64):
        logits = _param(rng, 2, 2, 6, 6)
        target = (rng.random((2, 6, 6)) > 0.6).astype(np.int64)
        errors['cross_entropy'] = check_gradients(
            lambda: cross_entropy_loss(logits, target, axis=1), [logits])
        errors['focal'] = check_gradients(
            lambda: focal_loss(logits, target, axis=1), [logits])
        probs = Tensor(rng.uniform(0.05, 0.95, (2, 6, 6)),
                       requires_grad=True)
        weights = np.stack([gaussian_plume_weights(p).weights
                            for p in probs.data])
        errors['gpw_dice'] = check_gradients(
            lambda: gpw_dice_loss(probs, target, weights=weights), [probs])
        errors['dice'] = check_gradients(lambda: dice_loss(probs, target),
                                         [probs])
    worst = {k: max(v.values()) for k, v in errors.items()}
    bad = {k: v for k, v in worst.items() if not v < LOSS_GRAD_TOLERANCE}
    expect(not bad, 'relative gradient errors above {}: {}'.format(
        LOSS_GRAD_TOLERANCE, bad))
    return 'max relative error {:.1e}'.format(max(worst.values()))


# attention oracles ----------------------------------------------------------

def dense_attention_reference(tokens, norm, wq, bq, wk, bk, wv, bv, proj,
                              heads):
    """
    Plain numpy multi-head self-attention over all tokens (pre-norm,
    residual), the reference of both attention modules in their degenerate
    settings.
    """
    x = tokens - tokens.mean(axis=-1, keepdims=True)
    x = x / np.sqrt((x * x).mean(axis=-1, keepdims=True) + norm.eps)
    x = x * norm.weight.data + norm.bias.data
    q, k, v = x @ wq.T + bq, x @ wk.T + bk, x @ wv.T + bv
    n, t, c = q.shape
    d = c // heads
    out = np.zeros_like(q)
    for b in range(n):
        for h in range(heads):
            sl = slice(h * d, (h + 1) * d)
            scores = q[b, :, sl] @ k[b, :, sl].T / np.sqrt(d)
            scores = np.exp(scores - scores.max(axis=1, keepdims=True))
            scores /= scores.sum(axis=1, keepdims=True)
            out[b, :, sl] = scores @ v[b, :, sl]
    return tokens + out @ proj.weight.data.T + proj.bias.data


def _attention_error(kind, trials=10, size=4, channels=8, heads=2):
    rng = RngState(6).spawn(kind)
    stage = StageConfig(out_channels=channels, pattern=kind, heads=heads,
                        reduction_ratio=1, window=(size, size))
    err = 0.
    with default_dtype(np.float64), no_grad():
        for i in range(trials):
            module_rng = rng.spawn('module{}'.format(i))
            if kind == 'L':
                attn = LocallyGroupedAttention(stage, rng=module_rng)
                w, bias = attn.qkv.weight.data, attn.qkv.bias.data
                parts = [(w[j * channels:(j + 1) * channels],
                          bias[j * channels:(j + 1) * channels])
                         for j in range(3)]
            else:
                attn = EfficientAttention(stage, rng=module_rng)
                w, bias = attn.kv.weight.data, attn.kv.bias.data
                parts = [(attn.q.weight.data, attn.q.bias.data),
                         (w[:channels], bias[:channels]),
                         (w[channels:], bias[channels:])]
            attn.proj.bias.data[:] = module_rng.normal(size=channels) * 0.1
            attn.eval()
            tokens = module_rng.normal(size=(1, size * size, channels))
            out = attn(Tensor(tokens), size, size).data
            ref = dense_attention_reference(
                tokens, attn.norm, *parts[0], *parts[1], *parts[2],
                attn.proj, heads)
            err = max(err, _max_abs(out, ref))
    return err


@check('attention/local_full_window')
def check_local_attention():
    err = _attention_error('L')
    expect(err <= ATTENTION_TOLERANCE, 'local attention with full window '
           'deviates from dense attention by {}'.format(err))
    return 'max abs error {:.1e}'.format(err)


@check('attention/efficient_r1')
def check_efficient_attention():
    err = _attention_error('E')
    expect(err <= ATTENTION_TOLERANCE, 'efficient attention with R=1 '
           'deviates from dense attention by {}'.format(err))
    return 'max abs error {:.1e}'.format(err)


# losses ---------------------------------------------------------------------

@check('loss/identities')
def check_loss_identities():
    rng = RngState(7)
    with default_dtype(np.float64):
        probs = Tensor(rng.random((3, 8, 8)))
        target = rng.random((3, 8, 8)) > 0.5
        uniform = gpw_dice_loss(probs, target, weights=np.ones((8, 8))).item()
        plain = dice_loss(probs, target).item()
        expect(abs(uniform - plain) <= 1e-6, 'weighted dice with uniform '
               'weights {} != dice {}'.format(uniform, plain))
        logits = Tensor(rng.normal(size=(4, 2, 5, 5)))
        labels = (rng.random((4, 5, 5)) > 0.5).astype(np.int64)
        focal = focal_loss(logits, labels, gamma=0., alpha=1., axis=1).item()
        ce = cross_entropy_loss(logits, labels, axis=1).item()
        expect(focal == ce, 'focal(gamma=0, alpha=1) {} != cross entropy {}'
               .format(focal, ce))
        empty = np.zeros((8, 8))
        for loss in (dice_loss, gpw_dice_loss):
            value = loss(Tensor(empty), empty).item()
            expect(value == 0., '{} of empty prediction and target is {}'
                   .format(loss.__name__, value))
            perfect = target[0].astype(np.float64)
            value = loss(Tensor(perfect), perfect).item()
            expect(value <= 1e-6, '{} of perfect prediction is {}'.format(
                loss.__name__, value))


@check('loss/plume_weights')
def check_plume_weights(trials=1000, shape=(16, 24)):
    rng = RngState(8)
    h, w = shape
    for i in range(trials):
        # sparse fields exercise the clamping of the spread
        p = rng.random(shape) * (rng.random(shape) < rng.uniform(0.02, 1.))
        field = gaussian_plume_weights(p)
        (sx_lo, sx_hi), (sy_lo, sy_hi) = field.sigma_bounds
        expect((sx_lo, sx_hi, sy_lo, sy_hi) == (w / 20., w / 2., h / 20.,
                                                h / 2.),
               'unexpected bounds {}'.format(field.sigma_bounds))
        expect(sx_lo <= field.sigma[0] <= sx_hi and
               sy_lo <= field.sigma[1] <= sy_hi,
               'field {}: sigma {} outside bounds'.format(i, field.sigma))
        if field.fallback:
            continue
        peak = np.unravel_index(np.argmax(field.weights), shape)
        nearest = (int(np.clip(np.rint(field.mu[1]), 0, h - 1)),
                   int(np.clip(np.rint(field.mu[0]), 0, w - 1)))
        expect(tuple(int(v) for v in peak) == nearest,
               'field {}: weight maximum at {}, nearest pixel to mu {}'
               .format(i, peak, nearest))
    zero = gaussian_plume_weights(np.zeros(shape))
    expect(zero.fallback and zero.sigma == (w / 2., h / 2.),
           'all-zero field does not use the fallback: {}'.format(zero))
    return '{} random fields'.format(trials)


# profiler -------------------------------------------------------------------

def _pattern_config(pattern, window=7):
    return apply_overrides(ModelConfig().validate(),
                           'model.pattern = {}\nmodel.window = {}x{}\n'
                           .format(pattern, window, window))


@check('profile/published')
def check_published_costs():
    report = count_flops(ModelConfig().validate(), 512, 512)
    dp = relative_deviation(report.mparams, REFERENCE_PARAMS_M)
    dm = relative_deviation(report.gmacs, REFERENCE_GFLOPS)
    expect(abs(dp) <= PARAMS_TOLERANCE, 'default params {:.3f} M deviate '
           '{:+.1%}'.format(report.mparams, dp))
    expect(abs(dm) <= FLOPS_TOLERANCE, 'default G operations {:.3f} deviate'
           ' {:+.1%}'.format(report.gmacs, dm))
    reports = {p: count_flops(_pattern_config(p), 512, 512)
               for p in ('LL', 'EL', 'EE')}
    for column in ('params', 'macs', 'flops'):
        values = [reports[p].total(column) for p in ('LL', 'EL', 'EE')]
        expect(values[0] < values[1] < values[2],
               '{} not ordered LL < EL < EE: {}'.format(column, values))
    for p, (params_m, gops) in PATTERN_REFERENCES.items():
        dp = relative_deviation(reports[p].mparams, params_m)
        dm = relative_deviation(reports[p].gmacs, gops)
        expect(abs(dp) <= PARAMS_TOLERANCE and abs(dm) <= FLOPS_TOLERANCE,
               'pattern {}: deviations {:+.1%} params, {:+.1%} operations'
               .format(p, dp, dm))
    windows = {k: count_flops(_pattern_config('EL', k), 512, 512)
               for k in WINDOW_REFERENCES}
    for column in ('macs', 'flops'):
        values = [windows[k].total(column) for k in sorted(windows)]
        expect(values[0] < values[1] < values[2],
               '{} not ordered by window size: {}'.format(column, values))
    return '{:.3f} M params, {:.3f} G MACs'.format(report.mparams,
                                                   report.gmacs)


@check('profile/scaling')
def check_cost_scaling():
    cfg = _pattern_config('L', 5)
    single = count_flops(cfg, 512, 512).total('flops', kind='attn_score',
                                              stage='stage1')
    double = count_flops(cfg, 512, 1024).total('flops', kind='attn_score',
                                               stage='stage1')
    expect(double == 2 * single, 'local score FLOPs {} -> {} when tokens '
           'double'.format(single, double))
    cfg = _pattern_config('E')
    full = apply_overrides(cfg, 'model.reduction = 1,1,1,1\n')
    reduced, dense = count_flops(cfg, 512, 512), count_flops(full, 512, 512)
    for i, st in enumerate(cfg.stages):
        stage = 'stage{}'.format(i + 1)
        a = reduced.total('flops', kind='attn_score', stage=stage)
        b = dense.total('flops', kind='attn_score', stage=stage)
        r2 = st.reduction_ratio ** 2
        expect(a * r2 == b, '{}: score FLOPs {} at R={} vs {} at R=1'
               .format(stage, a, st.reduction_ratio, b))
    cfg = tiny_config()
    with default_dtype(np.float32):
        counted = count_params(GasTwinFormer(cfg))
    expect(counted == count_params_from_config(cfg),
           'analytic parameter count differs from the built model')


# artifacts ------------------------------------------------------------------

@check('artifact/checkpoint_round_trip')
def check_checkpoint_round_trip():
    cfg = tiny_config()
    rng = RngState(9)
    model = GasTwinFormer(cfg).eval()
    images = Tensor(rng.normal(size=(2, 3, 32, 32)).astype(np.float32))
    restored = decode_checkpoint(encode_checkpoint(make_checkpoint(
        model, iteration=7))).build_model().eval()
    with no_grad():
        a, b = model(images), restored(images)
    expect(all(np.array_equal(x.data, y.data) for x, y in zip(a, b)),
           'restored model outputs differ')


@check('artifact/config_round_trip')
def check_config_round_trip():
    expect(parse_config('') == ModelConfig().validate(),
           'empty config differs from the defaults')
    for text in ['', 'model.pattern = LL,LL,LL,LL\n',
                 'model.pattern = LL,LL,EE,EE\nmodel.window = 3x7\n'
                 'decoder.branches = F3\nloss.seg = focal\n',
                 TINY_CONFIG]:
        cfg = parse_config(text)
        expect(parse_config(serialize_config(cfg)) == cfg,
               'config does not survive serialization:\n' + text)


@check('data/synthetic_level_set')
def check_synthetic_masks():
    cfg = SynthConfig(size=(32, 48), frames=12, seed=3).validate()
    for index in range(cfg.frames):
        frame = render_frame(cfg, index, index % 3)
        level = np.zeros(cfg.size, dtype=bool)
        for blob in frame.blobs:
            level |= blob_field(cfg.size, blob) > MASK_LEVEL
        expect(np.array_equal(frame.mask.astype(bool), level),
               '{}: mask is not the plume level set'.format(frame.name))
        expect(frame.image.min() >= 0. and frame.image.max() <= 1.,
               '{}: intensities outside [0, 1]'.format(frame.name))


def run_selftest(names=None, show_pbar=False):
    """
    Run registered checks.

    Parameters
    ----------
    names : sequence of str, optional
        Checks to run; a name ending with ``/`` selects a group. Default: all.
    show_pbar : bool, optional

    Returns
    -------
    results : :class:`pandas.DataFrame`
        One row per check.
    """
    selected = [n for n in CHECKS if names is None or any(
        n == s or (s.endswith('/') and n.startswith(s)) for s in names)]
    if not selected:
        raise ValueError('no checks match {}'.format(names))
    records = []
    for name in tqdm(selected, desc='selftest', disable=not show_pbar):
        start = perf_counter()
        try:
            message = CHECKS[name]() or ''
            status = 'ok'
        except AssertionError as e:
            status, message = 'FAIL', str(e)
        except Exception as e:
            status, message = 'ERROR', '{}: {}'.format(type(e).__name__, e)
        records.append({'name': name, 'status': status,
                        'seconds': perf_counter() - start,
                        'message': message})
    return pd.DataFrame(records, columns=['name', 'status', 'seconds',
                                          'message'])


def format_results(results):
    return results.to_string(index=False, float_format='{:.2f}'.format)


def all_passed(results):
    return bool((results['status'] == 'ok').all())

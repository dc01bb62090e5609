# -*- coding: utf-8 -*-
"""
Training objectives: cross-entropy, Dice, focal, the Gaussian plume
weighted Dice loss and the multi-task combination with the diet
classification cross-entropy.

All functions return scalar :class:`gastwin.tensor.Tensor` objects that can
be backpropagated.
"""
from collections import namedtuple
import numpy as np

from gastwin.errors import DataError
from gastwin.tensor import Tensor
from gastwin.tensor.functional import log_softmax, softmax, one_hot

MASS_THRESHOLD = 1e-8
"""Below this total foreground probability the weight field falls back to
the image center with maximal spread."""

LossTerms = namedtuple('LossTerms', ['total', 'seg', 'cls'])


class PlumeWeightField:
    """
    Gaussian pixel weights around the predicted plume.

    Attributes
    ----------
    weights : :class:`numpy.ndarray`
        ``(H, W)`` float64 weights
        ``exp(-(x - mu_x)**2 / (2 sigma_x**2) - (y - mu_y)**2 /
        (2 sigma_y**2))``.
    mu : (float, float)
        ``(mu_x, mu_y)`` in pixel coordinates (x: column, y: row).
    sigma : (float, float)
        ``(sigma_x, sigma_y)``.
    sigma_bounds : ((float, float), (float, float))
        ``((W / 20, W / 2), (H / 20, H / 2))``.
    fallback : bool
        Whether the low-mass fallback was used.
    """
    def __init__(self, weights, mu, sigma, sigma_bounds, fallback=False):
        self.weights = weights
        self.mu = mu
        self.sigma = sigma
        self.sigma_bounds = sigma_bounds
        self.fallback = fallback

    def __repr__(self):
        return ('PlumeWeightField(mu=({:.3f}, {:.3f}), sigma=({:.3f}, {:.3f})'
                ', fallback={})'.format(*self.mu, *self.sigma, self.fallback))


def gaussian_plume_weights(pred_fg):
    """
    Fit an axis-aligned Gaussian to a foreground probability map.

    The center is the probability-mass centroid, the spread the
    probability-weighted standard deviation per axis, clamped to
    ``[W / 20, W / 2]`` and ``[H / 20, H / 2]``. If the total mass is below
    :data:`MASS_THRESHOLD`, the center is the image center and the spread the
    upper bounds.

    Parameters
    ----------
    pred_fg : :class:`Tensor` or array-like
        ``(H, W)`` foreground probabilities in ``[0, 1]``.

    Returns
    -------
    field : :class:`PlumeWeightField`
    """
    p = np.asarray(pred_fg.data if isinstance(pred_fg, Tensor) else pred_fg,
                   dtype=np.float64)
    h, w = p.shape
    bounds = ((w / 20., w / 2.), (h / 20., h / 2.))
    xs, ys = np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64)
    mass = p.sum()
    if mass < MASS_THRESHOLD:
        mu = ((w - 1) / 2., (h - 1) / 2.)
        sigma = (bounds[0][1], bounds[1][1])
        fallback = True
    else:
        px, py = p.sum(axis=0), p.sum(axis=1)
        mu = (float(px @ xs / mass), float(py @ ys / mass))
        sigma = (
            float(np.clip(np.sqrt(px @ (xs - mu[0])**2 / mass), *bounds[0])),
            float(np.clip(np.sqrt(py @ (ys - mu[1])**2 / mass), *bounds[1])))
        fallback = False
    gx = np.exp(-(xs - mu[0])**2 / (2. * sigma[0]**2))
    gy = np.exp(-(ys - mu[1])**2 / (2. * sigma[1]**2))
    return PlumeWeightField(np.outer(gy, gx), mu, sigma, bounds,
                            fallback=fallback)


def _batched(pred_fg, target):
    target = np.asarray(target)
    if pred_fg.ndim == 2:
        pred_fg = pred_fg.reshape(1, *pred_fg.shape)
        target = target.reshape(1, *target.shape)
    if target.shape != pred_fg.shape:
        raise DataError('target shape {} does not match prediction shape {}'
                        .format(target.shape, pred_fg.shape))
    return pred_fg, target.astype(pred_fg.dtype)


def _weighted_dice(pred_fg, target, weights, eps):
    # per image, then mean over the batch
    wy = weights * target
    inter = (pred_fg * wy).sum(axis=(1, 2))
    pred_mass = (pred_fg * weights).sum(axis=(1, 2))
    ratio = (inter * 2. + eps) / (pred_mass + wy.sum(axis=(1, 2)) + eps)
    return (1. - ratio).mean()


def gpw_dice_loss(pred_fg, target, eps=1e-6, weights=None):
    """
    Gaussian plume weighted Dice loss

    ``1 - (2 sum(w y p) + eps) / (sum(w y) + sum(w p) + eps)``

    with weights ``w`` from :func:`gaussian_plume_weights` of the current
    prediction. The weights are constants for differentiation (no gradient
    flows through their center and spread).

    Parameters
    ----------
    pred_fg : :class:`Tensor`
        Foreground probabilities ``(H, W)`` or ``(N, H, W)``.
    target : array-like
        Binary ground truth of the same shape.
    eps : float, optional
        Smoothing constant.
    weights : array-like, optional
        Fixed weights ``(H, W)`` or ``(N, H, W)`` replacing the fitted
        field.

    Returns
    -------
    loss : :class:`Tensor`
        Scalar, mean over the batch.
    """
    pred_fg, target = _batched(pred_fg, target)
    if weights is None:
        weights = np.stack([gaussian_plume_weights(p).weights
                            for p in pred_fg.data])
    weights = np.broadcast_to(np.asarray(weights, dtype=pred_fg.dtype),
                              pred_fg.shape)
    return _weighted_dice(pred_fg, target, weights, eps)


def dice_loss(pred_fg, target, eps=1e-6):
    """Dice loss, :func:`gpw_dice_loss` with all weights equal to one."""
    pred_fg, target = _batched(pred_fg, target)
    return _weighted_dice(pred_fg, target, np.ones(pred_fg.shape,
                                                   dtype=pred_fg.dtype), eps)


def _target_log_probs(logits, target, ignore_index, axis):
    ndim = logits.ndim
    axis = axis % ndim
    if axis != ndim - 1:
        logits = logits.transpose([i for i in range(ndim) if i != axis] +
                                  [axis])
    k = logits.shape[-1]
    target = np.asarray(target)
    if target.shape != logits.shape[:-1]:
        raise DataError('target shape {} does not match logits shape {} '
                        '(class axis {})'.format(target.shape,
                                                 logits.shape, axis))
    valid = (np.ones(target.shape, dtype=bool) if ignore_index is None
             else target != ignore_index)
    if np.any(valid & ((target < 0) | (target >= k))):
        bad = target[valid & ((target < 0) | (target >= k))]
        raise DataError('target class {} outside [0, {})'.format(
            int(bad.flat[0]), k))
    mask = one_hot(np.where(valid, target, 0), k,
                   dtype=logits.dtype) * valid[..., None]
    return (log_softmax(logits) * mask).sum(axis=-1), valid


def _masked_mean(values, valid):
    count = int(valid.sum())
    if count == 0:
        return (values * 0.).sum()
    return values.sum() * (1. / count)


def cross_entropy_loss(logits, target, ignore_index=None, axis=-1):
    """
    Mean negative log-likelihood of the target classes.

    Parameters
    ----------
    logits : :class:`Tensor`
        Class scores, classes along `axis`.
    target : array-like of int
        Class indices, shape of `logits` without `axis`.
    ignore_index : int, optional
        Target value excluded from the mean.
    axis : int, optional
        Class axis of `logits`. Default: last.

    Raises
    ------
    gastwin.errors.DataError
        If a target lies outside ``[0, K)`` and is not `ignore_index`.
    """
    log_pt, valid = _target_log_probs(logits, target, ignore_index, axis)
    return _masked_mean(-log_pt, valid)


def focal_loss(logits, target, gamma=2., alpha=0.25, ignore_index=None,
               axis=-1):
    """
    Focal loss ``-alpha (1 - p_t)**gamma log(p_t)`` averaged over positions.

    With ``gamma == 0`` and ``alpha == 1`` the result equals
    :func:`cross_entropy_loss` exactly.
    """
    if gamma < 0:
        raise ValueError('gamma must be >= 0, got {}'.format(gamma))
    log_pt, valid = _target_log_probs(logits, target, ignore_index, axis)
    per_position = log_pt * (-alpha)
    if gamma != 0:
        per_position = per_position * (1. - log_pt.exp()) ** gamma
    return _masked_mean(per_position, valid)


def foreground_probability(seg_logits):
    """
    Foreground probability map ``(N, H, W)`` from segmentation logits
    ``(N, K, H, W)``: the class-1 probability for ``K == 2``, else one minus
    the background probability.
    """
    probs = softmax(seg_logits.transpose(0, 2, 3, 1))
    if seg_logits.shape[1] == 2:
        return probs[:, :, :, 1]
    return 1. - probs[:, :, :, 0]


def multi_task_loss(seg_logits, seg_target, cls_logits, cls_target, cfg,
                    record=None):
    """
    Weighted sum of the segmentation loss selected by ``cfg.seg_loss`` and the
    diet classification cross-entropy.

    Parameters
    ----------
    seg_logits : :class:`Tensor`
        ``(N, K, H, W)``.
    seg_target : array-like
        ``(N, H, W)`` class indices.
    cls_logits : :class:`Tensor`
        ``(N, num_diet_classes)``.
    cls_target : array-like
        ``(N,)`` diet indices.
    cfg : :class:`gastwin.modelconfig.LossConfig`
    record : dict, optional
        Receives the float values of ``'seg'``, ``'cls'`` and ``'total'``,
        each as soon as it is computed.

    Returns
    -------
    terms : :class:`LossTerms`
        ``(total, seg, cls)`` scalars,
        ``total = lambda_seg * seg + lambda_cls * cls``.
    """
    seg_target = np.asarray(seg_target)
    cls_target = np.asarray(cls_target)
    if seg_logits.shape[0] != cls_logits.shape[0] or \
            seg_target.shape[0] != cls_target.shape[0]:
        raise DataError('inconsistent batch sizes')
    if cfg.seg_loss == 'cross_entropy':
        seg = cross_entropy_loss(seg_logits, seg_target, axis=1)
    elif cfg.seg_loss == 'focal':
        seg = focal_loss(seg_logits, seg_target, gamma=cfg.focal_gamma,
                         alpha=cfg.focal_alpha, axis=1)
    elif cfg.seg_loss == 'dice':
        seg = dice_loss(foreground_probability(seg_logits), seg_target != 0,
                        eps=cfg.dice_eps)
    elif cfg.seg_loss == 'gaussian_plume':
        seg = gpw_dice_loss(foreground_probability(seg_logits),
                            seg_target != 0, eps=cfg.dice_eps)
    else:
        raise ValueError("unknown segmentation loss '{}'".format(
            cfg.seg_loss))
    if record is not None:
        record['seg'] = seg.item()
    cls = cross_entropy_loss(cls_logits, cls_target)
    if record is not None:
        record['cls'] = cls.item()
    lambda_seg, lambda_cls = cfg.task_weights
    total = seg * lambda_seg + cls * lambda_cls
    if record is not None:
        record['total'] = total.item()
    return LossTerms(total, seg, cls)

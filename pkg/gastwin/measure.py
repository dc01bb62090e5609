# -*- coding: utf-8 -*-
"""
Provides the :class:`ConfusionMatrix` and the segmentation and diet scores
reported by :mod:`~gastwin.evaluation`. All scores are percentages.
"""
import numpy as np
from sklearn.metrics import accuracy_score, f1_score

from gastwin.errors import DataError


class ConfusionMatrix:
    """
    Class confusion counts.

    Matrices of equal size can be merged with ``+``, which is associative
    and order independent.

    Attributes
    ----------
    counts : :class:`numpy.ndarray`
        ``(K, K)`` int64 counts, rows: ground truth, columns: prediction.
    """
    def __init__(self, num_classes, counts=None):
        self.num_classes = num_classes
        if counts is None:
            counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.shape != (num_classes, num_classes):
            raise ValueError('counts must have shape ({0}, {0})'.format(
                num_classes))

    def __repr__(self):
        return 'ConfusionMatrix(num_classes={}, total={})'.format(
            self.num_classes, self.total)

    def __add__(self, other):
        if other.num_classes != self.num_classes:
            raise ValueError('cannot merge confusion matrices of {} and {} '
                             'classes'.format(self.num_classes,
                                              other.num_classes))
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix) and
                np.array_equal(self.counts, other.counts))

    @property
    def total(self):
        return int(self.counts.sum())

    def accumulate(self, pred, gt):
        """
        Add the counts of a prediction/ground truth pair (in place).

        Parameters
        ----------
        pred, gt : array-like of int
            Equal shapes, values in ``[0, K)``.

        Returns
        -------
        self : :class:`ConfusionMatrix`
        """
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise DataError('prediction shape {} does not match ground truth '
                            'shape {}'.format(pred.shape, gt.shape))
        k = self.num_classes
        for name, values in (('prediction', pred), ('ground truth', gt)):
            if values.size and (values.min() < 0 or values.max() >= k):
                raise DataError('{} class outside [0, {})'.format(name, k))
        if pred.size:
            index = gt.astype(np.int64).ravel() * k + pred.astype(
                np.int64).ravel()
            self.counts += np.bincount(index, minlength=k * k).reshape(k, k)
        return self

    def tp_fp_fn(self):
        tp = np.diag(self.counts)
        return tp, self.counts.sum(axis=0) - tp, self.counts.sum(axis=1) - tp

    def present(self):
        """Classes occurring in the ground truth or the prediction."""
        return (self.counts.sum(axis=0) + self.counts.sum(axis=1)) > 0


def accumulate(cm, pred, gt):
    """Functional form of :meth:`ConfusionMatrix.accumulate`."""
    return cm.accumulate(pred, gt)


def miou_mf1(cm):
    """
    Mean intersection over union and mean F1 score.

    Per class ``IoU = TP / (TP + FP + FN)`` and ``F1 = 2 TP / (2 TP + FP +
    FN)``; the means run over the classes present in the ground truth or
    the prediction.

    Parameters
    ----------
    cm : :class:`ConfusionMatrix`
        Non-empty matrix.

    Returns
    -------
    miou, mf1 : float
        Percentages.
    per_class : list of dict
        Entries ``{'class', 'iou', 'f1', 'present'}``; scores of absent
        classes are NaN.
    """
    if cm.total == 0:
        raise ValueError('empty confusion matrix')
    tp, fp, fn = cm.tp_fp_fn()
    present = cm.present()
    with np.errstate(divide='ignore', invalid='ignore'):
        iou = np.where(present, 100. * tp / (tp + fp + fn), np.nan)
        f1 = np.where(present, 200. * tp / (2 * tp + fp + fn), np.nan)
    per_class = [{'class': c, 'iou': float(iou[c]), 'f1': float(f1[c]),
                  'present': bool(present[c])}
                 for c in range(cm.num_classes)]
    return (float(np.mean(iou[present])), float(np.mean(f1[present])),
            per_class)


def diet_metrics(preds, gts, num_classes=3):
    """
    Diet classification accuracy and macro F1 over all `num_classes`
    classes (classes without any sample score 0).

    Returns
    -------
    accuracy, macro_f1 : float
        Percentages.
    """
    preds, gts = np.asarray(preds), np.asarray(gts)
    if preds.shape != gts.shape:
        raise DataError('got {} predictions for {} labels'.format(
            preds.size, gts.size))
    if gts.size == 0:
        raise DataError('no diet labels to evaluate')
    labels = list(range(num_classes))
    return (100. * accuracy_score(gts, preds),
            100. * f1_score(gts, preds, labels=labels, average='macro',
                            zero_division=0))

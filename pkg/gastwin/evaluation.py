# -*- coding: utf-8 -*-
"""Tools for the evaluation of trained models.

:func:`evaluate` runs a model over a list of samples and collects a
:class:`EvaluationReport` with the segmentation confusion matrix, mean IoU,
mean F1 and the diet classification scores.
"""
import json
import numpy as np
import pandas as pd
from tqdm import tqdm

from gastwin.data import Batch, DIET_CLASSES
from gastwin.errors import DataError
from gastwin.measure import (
    ConfusionMatrix, miou_mf1, diet_metrics)
from gastwin.tensor import get_default_dtype

SEG_CLASS_NAMES = ('background', 'methane')


def predict_batches(model, samples, batch_size=8, show_pbar=False):
    """
    Yield ``(batch, mask, diet_probs)`` of :meth:`GasTwinFormer.predict
    <gastwin.nn.model.GasTwinFormer.predict>` over `samples`.
    """
    starts = range(0, len(samples), batch_size)
    for start in tqdm(starts, desc='eval', disable=not show_pbar):
        batch = Batch.from_samples(samples[start:start + batch_size],
                                   dtype=get_default_dtype())
        mask, diet_probs = model.predict(batch.images)
        yield batch, mask, diet_probs


class EvaluationReport:
    """
    Evaluation results.

    Attributes
    ----------
    seg_cm : :class:`gastwin.measure.ConfusionMatrix`
        Pixel confusion counts.
    diet_cm : :class:`gastwin.measure.ConfusionMatrix`
        Sample confusion counts of the diet classes.
    miou, mf1 : float
        Mean IoU and mean F1 over present segmentation classes (%).
    per_class : list of dict
        Per segmentation class ``{'class', 'iou', 'f1', 'present'}``.
    diet_accuracy, diet_macro_f1 : float
        Diet scores (%).
    """
    def __init__(self, seg_cm, diet_cm, diet_preds, diet_gts):
        if seg_cm.total == 0:
            raise DataError('no pixels evaluated')
        self.seg_cm = seg_cm
        self.diet_cm = diet_cm
        self.miou, self.mf1, self.per_class = miou_mf1(seg_cm)
        self.diet_accuracy, self.diet_macro_f1 = diet_metrics(
            diet_preds, diet_gts, num_classes=diet_cm.num_classes)

    @property
    def fg_iou(self):
        """IoU of the methane class (%)."""
        return self.per_class[1]['iou'] if len(self.per_class) > 1 \
            else float('nan')

    @property
    def num_samples(self):
        return self.diet_cm.total

    def summary(self):
        return {'miou': self.miou, 'mf1': self.mf1, 'fg_iou': self.fg_iou,
                'diet_accuracy': self.diet_accuracy,
                'diet_macro_f1': self.diet_macro_f1,
                'samples': self.num_samples}

    def class_table(self):
        """Per segmentation class scores as :class:`pandas.DataFrame`."""
        names = [SEG_CLASS_NAMES[c] if c < len(SEG_CLASS_NAMES) else str(c)
                 for c in range(self.seg_cm.num_classes)]
        return pd.DataFrame(self.per_class, index=names).drop(
            columns='class')

    def diet_table(self):
        """Diet confusion matrix, rows ground truth, columns prediction."""
        names = [DIET_CLASSES[c] if c < len(DIET_CLASSES) else str(c)
                 for c in range(self.diet_cm.num_classes)]
        return pd.DataFrame(self.diet_cm.counts, index=names, columns=names)

    def to_dict(self):
        """Summary, per class scores and diet confusion counts; NaN scores
        (absent classes) become `None`."""
        def clean(value):
            return None if isinstance(value, float) and np.isnan(value) \
                else value
        return dict({k: clean(v) for k, v in self.summary().items()},
                    per_class=[{k: clean(v) for k, v in c.items()}
                               for c in self.per_class],
                    diet_confusion=self.diet_cm.counts.tolist())

    def to_json(self, indent=1):
        return json.dumps(self.to_dict(), indent=indent)

    def to_string(self):
        """Convert to string. Used by :meth:`__str__`."""
        summary = pd.DataFrame(
            [[self.miou, self.mf1, self.diet_accuracy,
              self.diet_macro_f1]],
            columns=['mIoU', 'mF1', 'diet acc', 'diet F1'])
        return '\n\n'.join([
            summary.to_string(index=False, float_format='{:.2f}'.format),
            self.class_table().to_string(float_format='{:.2f}'.format),
            self.diet_table().to_string()])

    def __repr__(self):
        return ('EvaluationReport(miou={:.2f}, mf1={:.2f}, '
                'diet_accuracy={:.2f})'.format(self.miou, self.mf1,
                                               self.diet_accuracy))

    def __str__(self):
        return self.to_string()


def evaluate(model, samples, batch_size=8, show_pbar=False):
    """
    Evaluate `model` on `samples`.

    Parameters
    ----------
    model : :class:`gastwin.nn.model.GasTwinFormer`
    samples : list of :class:`gastwin.data.Sample`
        At the network input size.
    batch_size : int, optional
    show_pbar : bool, optional

    Returns
    -------
    report : :class:`EvaluationReport`
    """
    samples = list(samples)
    if not samples:
        raise DataError('no samples to evaluate')
    seg_cm = ConfusionMatrix(model.cfg.decoder.num_seg_classes)
    diet_cm = ConfusionMatrix(model.cfg.classifier.num_classes)
    preds, gts = [], []
    for batch, mask, diet_probs in predict_batches(model, samples,
                                                   batch_size, show_pbar):
        seg_cm.accumulate(mask, batch.masks)
        pred = np.argmax(diet_probs, axis=1)
        diet_cm.accumulate(pred, batch.diets)
        preds.extend(pred.tolist())
        gts.extend(batch.diets.tolist())
    return EvaluationReport(seg_cm, diet_cm, preds, gts)

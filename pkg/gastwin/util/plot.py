# -*- coding: utf-8 -*-
"""Provides utility functions for visualization."""
from matplotlib.figure import Figure
import matplotlib.pyplot as plt
import numpy as np

from gastwin.data import DIET_CLASSES


def plot_image(x, fig=None, ax=None, **kwargs):
    """Plot image using matplotlib's :meth:`imshow` method.

    Parameters
    ----------
    x : array-like
        ``(H, W)`` or ``(C, H, W)`` image data; of a channel-first image the
        first channel is shown.
    fig : :class:`matplotlib.figure.Figure`, optional
        The figure to plot the image in. If ``fig is None``, but `ax` is given,
        it is retrieved from `ax`. If both ``fig is None`` and ``ax is None``,
        a new figure is created.
    ax : :class:`matplotlib.axes.Axes`, optional
        The axes to plot the image in. If `None`, an axes object is created
        in `fig`.
    kwargs : dict, optional
        Keyword arguments passed to ``ax.imshow``.

    Returns
    -------
    im : :class:`matplotlib.image.AxesImage`
        The image that was plotted.
    ax : :class:`matplotlib.axes.Axes`
        The axes the image was plotted in.
    """
    if fig is None:
        if ax is None:
            fig = plt.figure()
        else:
            fig = ax.get_figure()
    if ax is None:
        ax = fig.add_subplot(111)
    x = np.asarray(x)
    if x.ndim == 3:
        x = x[0]
    kwargs.setdefault('cmap', 'gray')
    im = ax.imshow(x, **kwargs)
    ax.set_xticks([])
    ax.set_yticks([])
    return im, ax


def plot_prediction(image, pred_mask, gt_mask=None, diet_probs=None,
                    title='', fig=None):
    """
    Plot a frame next to its predicted (and optionally ground truth) mask.

    Parameters
    ----------
    image : array-like
        ``(H, W)`` or ``(3, H, W)`` frame.
    pred_mask : array-like
        ``(H, W)`` predicted classes.
    gt_mask : array-like, optional
        ``(H, W)`` ground truth.
    diet_probs : array-like, optional
        Diet class probabilities, shown in the title of the prediction.
    title : str, optional
        Figure title.
    fig : :class:`matplotlib.figure.Figure`, optional
        Figure to draw into. Default: a new figure.

    Returns
    -------
    fig : :class:`matplotlib.figure.Figure`
    """
    panels = [('image', image, {}),
              ('prediction', pred_mask, {'vmin': 0, 'vmax': 1,
                                         'cmap': 'magma'})]
    if gt_mask is not None:
        panels.append(('ground truth', gt_mask, {'vmin': 0, 'vmax': 1,
                                                 'cmap': 'magma'}))
    if fig is None:
        fig = plt.figure(figsize=(3.2 * len(panels), 3.4))
    for i, (name, data, kwargs) in enumerate(panels):
        ax = fig.add_subplot(1, len(panels), i + 1)
        plot_image(data, ax=ax, **kwargs)
        if name == 'prediction' and diet_probs is not None:
            probs = np.asarray(diet_probs)
            name = 'prediction ({} {:.2f})'.format(
                DIET_CLASSES[int(np.argmax(probs))], float(np.max(probs)))
        ax.set_title(name)
    if title:
        fig.suptitle(title)
    return fig


def save_prediction_figure(path, *args, **kwargs):
    """Draw :func:`plot_prediction` into a figure detached from pyplot and
    save it to `path`."""
    fig = plot_prediction(*args, fig=Figure(figsize=(9.6, 3.4)), **kwargs)
    fig.savefig(path, bbox_inches='tight')
    return path

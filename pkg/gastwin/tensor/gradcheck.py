# -*- coding: utf-8 -*-
"""
Finite difference gradient oracle.

The functions here evaluate central differences in 64 bit precision and
compare them to the gradients accumulated by
:meth:`gastwin.tensor.Tensor.backward`.
"""
import numpy as np

from gastwin.tensor.core import Tensor, default_dtype, no_grad


def _scalar(value):
    if isinstance(value, Tensor):
        value = value.data
    return float(np.asarray(value).reshape(-1)[0])


def finite_diff_grad(f, x, h=1e-4, indices=None):
    """
    Central difference gradient of a scalar function.

    Each element is ``(f(x + h e_i) - f(x - h e_i)) / (2 h)``, evaluated with
    64 bit tensors.

    Parameters
    ----------
    f : callable
        Deterministic function mapping a :class:`Tensor` to a scalar
        (:class:`Tensor` or float).
    x : :class:`Tensor` or array-like
        Point of evaluation.
    h : float, optional
        Step size, must be positive.
    indices : sequence of int, optional
        Flat indices of the elements to differentiate. Other entries of the
        result are zero. Default: all elements.

    Returns
    -------
    grad : :class:`Tensor`
        64 bit gradient, same shape as `x`.
    """
    if not h > 0:
        raise ValueError('step size h must be positive, got {}'.format(h))
    values = np.array(x.data if isinstance(x, Tensor) else x,
                      dtype=np.float64)
    grad = np.zeros_like(values)
    indices = range(values.size) if indices is None else indices
    with default_dtype(np.float64), no_grad():
        for i in indices:
            idx = np.unravel_index(int(i), values.shape)
            orig = values[idx]
            values[idx] = orig + h
            f_plus = _scalar(f(Tensor(values, dtype=np.float64)))
            values[idx] = orig - h
            f_minus = _scalar(f(Tensor(values, dtype=np.float64)))
            values[idx] = orig
            grad[idx] = (f_plus - f_minus) / (2. * h)
    return Tensor(grad, dtype=np.float64)


def relative_error(analytic, numeric):
    """
    Maximum absolute deviation divided by the largest gradient magnitude.

    Parameters
    ----------
    analytic, numeric : array-like
        Gradients of equal shape.
    """
    a = np.asarray(analytic.data if isinstance(analytic, Tensor) else
                   analytic, dtype=np.float64)
    n = np.asarray(numeric.data if isinstance(numeric, Tensor) else numeric,
                   dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.), np.abs(n).max(initial=0.), 1e-8)
    return float(np.abs(a - n).max(initial=0.) / scale)


def check_gradients(loss_fn, tensors, h=1e-4, max_elements=None, rng=None):
    """
    Compare backpropagated and central difference gradients of
    ``loss_fn()`` w.r.t. each of `tensors`.

    The tensors are perturbed in place, so `loss_fn` must read them when
    called (e.g. model parameters or closure variables). They should hold
    64 bit values.

    Parameters
    ----------
    loss_fn : callable
        Function without arguments returning a scalar :class:`Tensor`.
    tensors : sequence of :class:`Tensor` or dict
        Tensors with ``requires_grad=True``. A dict maps names to tensors.
    h : float, optional
        Step size.
    max_elements : int, optional
        Check at most this many randomly chosen elements per tensor.
    rng : :class:`gastwin.tensor.RngState`, optional
        Used for choosing the elements, required if `max_elements` is given.

    Returns
    -------
    errors : dict
        Relative error (see :func:`relative_error`) per tensor name (or
        index).
    """
    named = (list(tensors.items()) if isinstance(tensors, dict)
             else list(enumerate(tensors)))
    for _, t in named:
        t.zero_grad()
    loss_fn().backward()
    errors = {}
    for name, t in named:
        analytic = (np.zeros_like(t.data) if t.grad is None
                    else np.array(t.grad, dtype=np.float64))
        if max_elements is not None and t.size > max_elements:
            flat = np.sort(rng.permutation(t.size)[:max_elements])
        else:
            flat = np.arange(t.size)
        numeric = np.zeros(t.size)
        values = t.data.reshape(-1)
        with no_grad():
            for i in flat:
                orig = values[i]
                values[i] = orig + h
                f_plus = _scalar(loss_fn())
                values[i] = orig - h
                f_minus = _scalar(loss_fn())
                values[i] = orig
                numeric[i] = (f_plus - f_minus) / (2. * h)
        errors[name] = relative_error(analytic.reshape(-1)[flat],
                                      numeric[flat])
        t.zero_grad()
    return errors

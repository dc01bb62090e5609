# -*- coding: utf-8 -*-
"""
Dense tensors with reverse-mode gradient recording.

A :class:`Tensor` wraps a :class:`numpy.ndarray` (:attr:`Tensor.data`).
If gradient recording is enabled (see :func:`no_grad`) and any input of an
operation requires gradients, the result remembers its inputs and a function
mapping the output gradient to the input gradients.
:meth:`Tensor.backward` then accumulates gradients in :attr:`Tensor.grad` of
every leaf tensor with ``requires_grad=True``.

Computations run in 32 bit by default. The 64 bit mode used for gradient
checking is selected by :func:`set_default_dtype` or temporarily by the
:func:`default_dtype` context manager.

Every operation checks its result for NaN and Inf values and raises a
:class:`gastwin.errors.NumericalError` if it finds any.
"""
from contextlib import contextmanager
import numpy as np

from gastwin.errors import ConfigError, NumericalError, UsageError

SUPPORTED_DTYPES = (np.float32, np.float64)

_STATE = {'dtype': np.float32, 'grad_enabled': True}


def get_default_dtype():
    """Return the default floating point type (``np.float32`` or
    ``np.float64``)."""
    return _STATE['dtype']


def set_default_dtype(dtype):
    """
    Set the default floating point type of newly created tensors.

    Parameters
    ----------
    dtype : dtype-like
        Either ``np.float32`` or ``np.float64``.
    """
    dtype = np.dtype(dtype).type
    if dtype not in SUPPORTED_DTYPES:
        raise ValueError("unsupported dtype '{}', expected float32 or "
                         "float64".format(np.dtype(dtype).name))
    _STATE['dtype'] = dtype


@contextmanager
def default_dtype(dtype):
    """Context manager temporarily changing the default floating point type.
    """
    previous = _STATE['dtype']
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _STATE['dtype'] = previous


@contextmanager
def no_grad():
    """Context manager disabling gradient recording."""
    previous = _STATE['grad_enabled']
    _STATE['grad_enabled'] = False
    try:
        yield
    finally:
        _STATE['grad_enabled'] = previous


def is_grad_enabled():
    return _STATE['grad_enabled']


def _check_finite(data, op):
    if not np.all(np.isfinite(data)):
        raise NumericalError(
            "operation '{}' produced non-finite values".format(op))


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, reverting numpy broadcasting."""
    shape = tuple(shape)
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape)
                 if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def make_result(data, parents, backward, op):
    """
    Create the output tensor of an operation.

    Parameters
    ----------
    data : :class:`numpy.ndarray`
        Result values.
    parents : sequence of :class:`Tensor`
        Inputs of the operation.
    backward : callable
        Maps the gradient w.r.t. the output to a sequence of gradients w.r.t.
        `parents` (entries may be `None`).
    op : str
        Name of the operation, used in error messages.
    """
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    track = _STATE['grad_enabled'] and any(p.requires_grad for p in parents)
    out.requires_grad = track
    out._parents = tuple(parents) if track else ()
    out._backward = backward if track else None
    return out


def as_tensor(value, like=None):
    """Return `value` if it is a :class:`Tensor`, else wrap it as constant,
    using the dtype of `like` if given."""
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else get_default_dtype()
    return Tensor(value, dtype=dtype)


class Tensor:
    """
    Dense N-dimensional real array with optional gradient tracking.

    Attributes
    ----------
    data : :class:`numpy.ndarray`
        The values.
    grad : :class:`numpy.ndarray` or `None`
        Accumulated gradient, same shape as :attr:`data`.
    requires_grad : bool
        Whether gradients are accumulated for this tensor (leaf) or whether it
        depends on such a tensor (result of an operation).
    """
    __array_priority__ = 100  # let numpy defer to the reflected operators

    def __init__(self, data, requires_grad=False, dtype=None):
        """
        Parameters
        ----------
        data : array-like
            Values, copied.
        requires_grad : bool, optional
            Whether to accumulate gradients for this tensor.
        dtype : dtype-like, optional
            Floating point type. Default: :func:`get_default_dtype`.
        """
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=dtype or get_default_dtype())
        _check_finite(self.data, 'tensor')
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._op = None

    def __repr__(self):
        return 'Tensor(shape={}, dtype={}, requires_grad={})'.format(
            self.shape, self.data.dtype.name, self.requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        """Return a copy of the values."""
        return self.data.copy()

    def item(self):
        return self.data.item()

    def detach(self):
        """Return a tensor sharing :attr:`data` without graph history."""
        return make_result(self.data, (), None, 'detach')

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """
        Accumulate gradients of this tensor w.r.t. all leaf tensors with
        ``requires_grad=True`` it depends on.

        Gradients add up over repeated calls until they are reset by
        :meth:`zero_grad`.

        Parameters
        ----------
        grad : array-like, optional
            Gradient w.r.t. this tensor. Only optional (defaulting to ``1``)
            if the tensor holds a single value.
        """
        if grad is None:
            if self.data.size != 1:
                raise UsageError(
                    'backward() without an explicit gradient requires a '
                    'scalar tensor, got shape {}'.format(self.shape))
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.shape:
                raise UsageError('gradient shape {} does not match tensor '
                                 'shape {}'.format(grad.shape, self.shape))
        if not self.requires_grad:
            raise UsageError('tensor does not require gradients')
        grads = {id(self): grad}
        for node in reversed(self._topological_order()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, parent_grad in zip(node._parents, node._backward(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = (parent_grad if key not in grads
                              else grads[key] + parent_grad)

    def _topological_order(self):
        # iterative post-order, inputs before outputs
        order, visited = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    # arithmetic
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    # shape and reductions
    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


def _binary_operands(a, b):
    if not isinstance(a, Tensor):
        a = as_tensor(a, like=b)
    if not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    return a, b


def add(a, b):
    a, b = _binary_operands(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return make_result(a.data + b.data, (a, b), backward, 'add')


def sub(a, b):
    a, b = _binary_operands(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return make_result(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b):
    a, b = _binary_operands(a, b)

    def backward(g):
        return (_unbroadcast(g * b.data, a.shape),
                _unbroadcast(g * a.data, b.shape))
    return make_result(a.data * b.data, (a, b), backward, 'mul')


def div(a, b):
    a, b = _binary_operands(a, b)

    def backward(g):
        ga = g / b.data
        return (_unbroadcast(ga, a.shape),
                _unbroadcast(-ga * a.data / b.data, b.shape))
    with np.errstate(divide='ignore', invalid='ignore'):
        out = a.data / b.data
    return make_result(out, (a, b), backward, 'div')


def neg(x):
    return make_result(-x.data, (x,), lambda g: (-g,), 'neg')


def power(x, exponent):
    """Elementwise power with a constant real exponent."""
    exponent = float(exponent)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.power(x.data, exponent)

    def backward(g):
        with np.errstate(divide='ignore', invalid='ignore'):
            d = exponent * np.power(x.data, exponent - 1.)
        # derivative at 0 for exponents < 1 is taken as 0
        d = np.where(np.isfinite(d), d, 0.).astype(x.data.dtype)
        return (g * d,)
    return make_result(out.astype(x.data.dtype, copy=False), (x,), backward,
                       'power')


def exp(x):
    with np.errstate(over='ignore'):
        out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,), 'exp')


def log(x):
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.log(x.data)
    return make_result(out, (x,), lambda g: (g / x.data,), 'log')


def tanh(x):
    out = np.tanh(x.data)
    return make_result(out, (x,), lambda g: (g * (1. - out * out),), 'tanh')


def sigmoid(x):
    out = np.exp(-np.logaddexp(0., -x.data)).astype(x.data.dtype,
                                                     copy=False)
    return make_result(out, (x,), lambda g: (g * out * (1. - out),),
                       'sigmoid')


def relu(x):
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,), 'relu')


def tensor_sum(x, axis=None, keepdims=False):
    axes = _normalize_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)
    return make_result(np.asarray(out), (x,), backward, 'sum')


def mean(x, axis=None, keepdims=False):
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes]))
    return tensor_sum(x, axis=axes, keepdims=keepdims) * (1. / count)


def reshape(x, shape):
    out = x.data.reshape(shape)
    return make_result(out, (x,), lambda g: (g.reshape(x.shape),),
                       'reshape')


def transpose(x, axes=None):
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(x.data.transpose(axes), (x,),
                       lambda g: (g.transpose(inverse),), 'transpose')


def getitem(x, index):
    if isinstance(index, Tensor):
        raise UsageError('tensors cannot be used as indices')
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(i, (int, slice, type(None), type(Ellipsis)))
                for i in parts)

    def backward(g):
        grad = np.zeros_like(x.data)
        if basic:
            grad[index] = g
        else:
            np.add.at(grad, index, g)
        return (grad,)
    return make_result(np.array(x.data[index]), (x,), backward, 'getitem')


def pad(x, pad_width):
    """Zero padding, `pad_width` as for :func:`numpy.pad`."""
    pad_width = tuple((int(lo), int(hi)) for lo, hi in pad_width)
    if len(pad_width) != x.ndim:
        raise ConfigError('pad: expected {} (before, after) pairs, got {}'
                          .format(x.ndim, len(pad_width)))
    slices = tuple(slice(lo, lo + n) for (lo, _), n in zip(pad_width,
                                                           x.shape))
    return make_result(np.pad(x.data, pad_width), (x,),
                       lambda g: (g[slices],), 'pad')


def concat(tensors, axis=0):
    tensors = list(tensors)
    axis = axis % tensors[0].ndim
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return make_result(out, tensors, backward, 'concat')


def matmul(a, b):
    """
    Batched matrix product ``a @ b`` of tensors ``[..., M, K]`` and
    ``[..., K, P]``; leading extents broadcast.
    """
    a, b = _binary_operands(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ConfigError('matmul: incompatible shapes {} and {}'.format(
            a.shape, b.shape))
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ConfigError('matmul: batch extents {} and {} do not agree'
                          .format(a.shape[:-2], b.shape[:-2])) from None

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return make_result(np.matmul(a.data, b.data), (a, b), backward, 'matmul')

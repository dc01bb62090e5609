# -*- coding: utf-8 -*-
"""
Base classes for trainable network components.
"""
from collections import OrderedDict
import numpy as np

from gastwin.tensor import Tensor


class Parameter(Tensor):
    """
    Trainable tensor (``requires_grad=True``).

    Attributes
    ----------
    is_norm : bool
        Whether the parameter belongs to a normalization layer (used for the
        optimizer's parameter groups).
    """
    def __init__(self, data, is_norm=False, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.is_norm = is_norm

    def __repr__(self):
        return 'Parameter(shape={}, dtype={})'.format(self.shape,
                                                      self.data.dtype.name)


class Module:
    """
    Network component base class.

    Sub-modules and parameters are discovered from the instance attributes in
    assignment order, which fixes the parameter names (e.g.
    ``'encoder.stages.0.patch_embed.proj.weight'``).

    Attributes
    ----------
    training : bool
        Training mode flag, switches dropout on and off.
    """
    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value

    def named_parameters(self, prefix=''):
        """Yield ``(name, parameter)`` pairs of this module and all
        sub-modules."""
        for name, value in self._children():
            full_name = prefix + name
            if isinstance(value, Parameter):
                yield full_name, value
            else:
                yield from value.named_parameters(prefix=full_name + '.')

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_modules(self, prefix=''):
        yield prefix.rstrip('.'), self
        for name, value in self._children():
            if isinstance(value, Module):
                yield from value.named_modules(prefix=prefix + name + '.')

    def train(self, mode=True):
        for _, module in self.named_modules():
            module.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self):
        """Return an ordered dict of parameter name -> array copy."""
        return OrderedDict((name, p.data.copy())
                           for name, p in self.named_parameters())

    def load_state_dict(self, state_dict, strict=True):
        """
        Copy parameter values from `state_dict`.

        Parameters
        ----------
        state_dict : dict
            Mapping of parameter name to array.
        strict : bool, optional
            Whether missing or unexpected names raise a :class:`KeyError`.
        """
        params = OrderedDict(self.named_parameters())
        if strict:
            missing = [k for k in params if k not in state_dict]
            unexpected = [k for k in state_dict if k not in params]
            if missing or unexpected:
                raise KeyError('state dict mismatch, missing: {}, unexpected: '
                               '{}'.format(missing, unexpected))
        for name, p in params.items():
            if name not in state_dict:
                continue
            value = np.asarray(state_dict[name])
            if value.shape != p.shape:
                raise ValueError("shape mismatch for '{}': {} vs. {}".format(
                    name, value.shape, p.shape))
            p.data = value.astype(p.data.dtype, copy=True)


class ModuleList(Module):
    """Sequence of modules, named by their index."""
    def __init__(self, modules=()):
        super().__init__()
        self._items = list(modules)

    def _children(self):
        for i, module in enumerate(self._items):
            yield str(i), module

    def __getitem__(self, idx):
        return self._items[idx]

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def append(self, module):
        self._items.append(module)

# -*- coding: utf-8 -*-
"""
Minimal dense tensor engine with reverse-mode automatic differentiation.
"""
__all__ = ['Tensor', 'RngState', 'no_grad', 'is_grad_enabled',
           'get_default_dtype', 'set_default_dtype', 'default_dtype',
           'finite_diff_grad', 'check_gradients', 'relative_error',
           'matmul', 'concat', 'pad', 'functional']

from gastwin.tensor.core import (
    Tensor, no_grad, is_grad_enabled, get_default_dtype, set_default_dtype,
    default_dtype, matmul, concat, pad)
from gastwin.tensor.rng import RngState
from gastwin.tensor.gradcheck import (
    finite_diff_grad, check_gradients, relative_error)
from gastwin.tensor import functional

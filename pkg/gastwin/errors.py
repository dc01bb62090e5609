# -*- coding: utf-8 -*-
"""
Exception types of the library.

All of them derive from built-in exception classes, so callers that do not
care about the distinction may catch e.g. :class:`ValueError`.
The command line interface maps them to exit codes, see :mod:`gastwin.cli`.
"""


class ConfigError(ValueError):
    """Invalid configuration: unknown key, wrong type or violated invariant.
    """


class GeometryError(ConfigError):
    """Tensor extents that are incompatible with an operation or a stage.
    """


class DataError(ValueError):
    """Malformed data, e.g. a mask value outside ``{0, 1}`` or an unknown diet
    token. The message names the offending file if there is one.
    """


class NumericalError(ArithmeticError):
    """NaN or Inf values were produced.
    """


class UsageError(RuntimeError):
    """Wrong use of the tensor engine, e.g. calling
    :meth:`gastwin.tensor.Tensor.backward` on a non-scalar tensor.
    """

# -*- coding: utf-8 -*-
"""
Provides published reference values of the default model and the tolerances
the analytic profiler is checked against.
"""

REFERENCE_PARAMS_M = 3.348
"""
Parameters (millions) of the default model (EL pattern in all stages, 5x5
windows).
"""

REFERENCE_GFLOPS = 3.428
"""
Operations (G) of the default model at 512x512 input, as published; counted
as multiply-accumulates.
"""

PATTERN_REFERENCES = {'LL': (3.113, 3.214), 'EL': (3.348, 3.508),
                      'EE': (3.582, 3.802)}
"""
``(params (M), G operations)`` per uniform attention pattern at 512x512 with
7x7 windows.
"""

WINDOW_REFERENCES = {3: 3.367, 5: 3.428, 7: 3.508}
"""G operations per square window extent at 512x512, default pattern."""

PARAMS_TOLERANCE = 0.10
"""Accepted relative deviation of counted parameters."""

FLOPS_TOLERANCE = 0.15
"""Accepted relative deviation of counted operations."""

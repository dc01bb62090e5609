# -*- coding: utf-8 -*-
from .version import __version__

from .config import CONFIG, get_config, set_config
from .errors import (
    ConfigError, GeometryError, DataError, NumericalError, UsageError)
from .modelconfig import ModelConfig, parse_config, load_config
from .data import Sample, Batch, DIET_CLASSES
from .datasets import Dataset
from .nn import GasTwinFormer
from .measure import ConfusionMatrix
from .profiler import count_flops, count_params
from .evaluation import evaluate, EvaluationReport
from .checkpoint import save_checkpoint, load_checkpoint, load_model
from .trainer import train


__all__ = ['CONFIG', 'get_config', 'set_config',
           'ConfigError', 'GeometryError', 'DataError', 'NumericalError',
           'UsageError',
           'ModelConfig', 'parse_config', 'load_config',
           'Sample', 'Batch', 'DIET_CLASSES',
           'Dataset',
           'GasTwinFormer',
           'ConfusionMatrix',
           'count_flops', 'count_params',
           'evaluate', 'EvaluationReport',
           'save_checkpoint', 'load_checkpoint', 'load_model',
           'train']

# -*- coding: utf-8 -*-
"""
Configuration of the library.

The module variable :obj:`CONFIG` holds the current configuration: the
default locations of generated synthetic datasets and of training runs. It is
independent of the experiment configuration, see :mod:`gastwin.modelconfig`.

The library configuration is stored in the file ``~/.gastwin/config.json``.
If the config file does not exist when the library is imported, it is created
using default values. If the home directory is not writable, the default
values are used.
"""
import os
import json

CONFIG = {
 'synthetic_dataset': {
  'data_path': os.path.normpath(
      os.path.expanduser('~/.gastwin/datasets/synthetic'))
 },
 'runs': {
  'out_path': os.path.normpath(os.path.expanduser('~/.gastwin/runs'))
 }
}
"""
Global configuration dict.

Holds the current configuration of the library. On ``import gastwin``, the
configuration is loaded from ``~/.gastwin/config.json``.
"""

CONFIG_FILENAME = os.path.normpath(
    os.path.expanduser('~/.gastwin/config.json'))
"""
Path of the configuration file.
The value is given by ``'~/.gastwin/config.json'``, expanded and normalized.
"""

try:
    if not os.path.isfile(CONFIG_FILENAME):
        os.makedirs(os.path.dirname(CONFIG_FILENAME), exist_ok=True)
        with open(CONFIG_FILENAME, 'w') as config_fp:
            json.dump(CONFIG, config_fp, indent=1)
    with open(CONFIG_FILENAME, 'r') as config_fp:
        CONFIG.update(json.load(config_fp))
except OSError:
    pass


def get_config(key_path='/'):
    """
    Return (sub-)configuration stored in config file.
    Note that values may differ from the current ``CONFIG`` variable if it was
    manipulated directly.

    Parameters
    ----------
    key_path : str, optional
        ``'/'``-separated path to sub-configuration. Default is ``'/'``, which
        returns the full configuration dict.

    Returns
    -------
    sub_config
        (sub-)configuration, either a dict or a value
    """
    keys = [k for k in key_path.split('/') if k != '']
    with open(CONFIG_FILENAME, 'r') as config_fp:
        config = json.load(config_fp)
    sub_config = config
    for k in keys:
        sub_config = sub_config[k]
    return sub_config


def set_config(key_path, value, verbose=True):
    """
    Updates (sub-)configuration both in ``CONFIG`` variable and in config file.

    Parameters
    ----------
    key_path : str
        ``'/'``-separated path to sub-configuration, e.g.
        ``'synthetic_dataset/data_path'``. Pass ``'/'`` to replace the full
        configuration dict.
    value : object
        (sub-)configuration value. Either a dict, which is copied, or a value.
    verbose : bool, optional
        Whether to print the update.
    """
    global CONFIG
    stored = get_config()
    keys = [k for k in key_path.split('/') if k != '']
    if isinstance(value, dict):
        value = value.copy()
    if not keys:
        CONFIG = value
        stored = value
    else:
        current, sub_stored = CONFIG, stored
        for k in keys[:-1]:
            current = current.setdefault(k, {})
            sub_stored = sub_stored.setdefault(k, {})
        current[keys[-1]] = value
        sub_stored[keys[-1]] = value
    with open(CONFIG_FILENAME, 'w') as config_fp:
        json.dump(stored, config_fp, indent=1)
    if verbose:
        print("updated configuration in '{}':".format(CONFIG_FILENAME))
        print("'{}' = {}".format(key_path, value))

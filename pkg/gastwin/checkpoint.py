# -*- coding: utf-8 -*-
"""
Checkpoint files.

A checkpoint is a framed binary container::

    b'GTWF'  magic
    u32      format version
    records  tag (4 ASCII bytes), u64 payload length, payload

All integers are little endian. Records:

``CONF``
    Serialized :class:`gastwin.modelconfig.ModelConfig` (UTF-8 text).
``ITER``
    u64 training iteration.
``PARM``
    One parameter tensor: u32 name length, UTF-8 name, u32 dtype tag length,
    dtype tag (numpy type string such as ``'<f4'``), u32 number of axes, u64
    extent per axis, little-endian raw values.
``OSTP``
    u64 optimizer step.
``MOM1``, ``MOM2``
    First/second moment of one parameter, encoded like ``PARM``.
``END ``
    Empty, terminates the container.

Unknown records are skipped with a warning.
"""
from collections import OrderedDict
import os
import struct
from warnings import warn
import numpy as np

from gastwin.errors import DataError
from gastwin.modelconfig import parse_config, serialize_config
from gastwin.tensor import default_dtype, get_default_dtype

MAGIC = b'GTWF'
VERSION = 1

_HEADER = struct.Struct('<4sI')
_RECORD = struct.Struct('<4sQ')
_U32 = struct.Struct('<I')
_U64 = struct.Struct('<Q')


class Checkpoint:
    """
    Contents of a checkpoint file.

    Attributes
    ----------
    config_text : str
        Serialized model configuration.
    params : OrderedDict
        Parameter name -> :class:`numpy.ndarray`.
    iteration : int
        Training iteration.
    optimizer_state : dict or `None`
        ``{'step': int, 'm': OrderedDict, 'v': OrderedDict}`` with the AdamW
        moments by parameter name.
    version : int
        Format version of the file.
    """
    def __init__(self, config_text, params, iteration=0,
                 optimizer_state=None, version=VERSION):
        self.config_text = config_text
        self.params = params
        self.iteration = iteration
        self.optimizer_state = optimizer_state
        self.version = version

    def __repr__(self):
        return 'Checkpoint(iteration={}, tensors={}, optimizer={})'.format(
            self.iteration, len(self.params),
            self.optimizer_state is not None)

    @property
    def config(self):
        """The parsed :class:`gastwin.modelconfig.ModelConfig`."""
        return parse_config(self.config_text)

    def build_model(self):
        """Construct the model of :attr:`config` and load :attr:`params`,
        keeping their floating point type."""
        from gastwin.nn.model import GasTwinFormer
        dtype = (next(iter(self.params.values())).dtype if self.params
                 else get_default_dtype())
        with default_dtype(dtype):
            model = GasTwinFormer(self.config)
        model.load_state_dict(self.params)
        return model


def _encode_array(name, array):
    array = np.asarray(array)
    little = array.astype(array.dtype.newbyteorder('<'), copy=False)
    name_b = name.encode('utf-8')
    tag_b = little.dtype.str.encode('ascii')
    parts = [_U32.pack(len(name_b)), name_b, _U32.pack(len(tag_b)), tag_b,
             _U32.pack(array.ndim)]
    parts += [_U64.pack(n) for n in array.shape]
    parts.append(np.ascontiguousarray(little).tobytes())
    return b''.join(parts)


class _Reader:
    def __init__(self, data, source):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n):
        if self.pos + n > len(self.data):
            raise DataError('{}: truncated checkpoint'.format(self.source))
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return fmt.unpack(self.take(fmt.size))

    def done(self):
        return self.pos == len(self.data)


def _decode_array(payload, source):
    r = _Reader(payload, source)
    name = r.take(r.unpack(_U32)[0]).decode('utf-8')
    tag = r.take(r.unpack(_U32)[0]).decode('ascii')
    try:
        dtype = np.dtype(tag)
    except TypeError:
        raise DataError("{}: unknown dtype tag '{}' of '{}'".format(
            source, tag, name)) from None
    ndim = r.unpack(_U32)[0]
    shape = tuple(r.unpack(_U64)[0] for _ in range(ndim))
    count = int(np.prod(shape, dtype=np.int64))
    raw = r.take(count * dtype.itemsize)
    if not r.done():
        raise DataError("{}: trailing bytes in tensor '{}'".format(source,
                                                                   name))
    array = np.frombuffer(raw, dtype=dtype).reshape(shape)
    return name, array.astype(dtype.newbyteorder('='))


def encode_checkpoint(ckpt):
    """Return the file contents of `ckpt` as bytes."""
    records = [(b'CONF', ckpt.config_text.encode('utf-8')),
               (b'ITER', _U64.pack(int(ckpt.iteration)))]
    records += [(b'PARM', _encode_array(name, value))
                for name, value in ckpt.params.items()]
    if ckpt.optimizer_state is not None:
        state = ckpt.optimizer_state
        records.append((b'OSTP', _U64.pack(int(state['step']))))
        for tag, key in ((b'MOM1', 'm'), (b'MOM2', 'v')):
            records += [(tag, _encode_array(name, value))
                        for name, value in state[key].items()]
    records.append((b'END ', b''))
    return _HEADER.pack(MAGIC, VERSION) + b''.join(
        _RECORD.pack(tag, len(payload)) + payload
        for tag, payload in records)


def decode_checkpoint(data, source='<bytes>'):
    """Parse checkpoint bytes, see :func:`load_checkpoint`."""
    r = _Reader(data, source)
    magic, version = r.unpack(_HEADER)
    if magic != MAGIC:
        raise DataError('{}: not a checkpoint file (magic {!r})'.format(
            source, magic))
    if version > VERSION:
        raise DataError('{}: checkpoint format version {} is newer than the '
                        'supported version {}'.format(source, version,
                                                      VERSION))
    config_text, iteration = None, 0
    params, step = OrderedDict(), None
    moments = {'m': OrderedDict(), 'v': OrderedDict()}
    while True:
        tag, length = r.unpack(_RECORD)
        payload = r.take(length)
        if tag == b'END ':
            break
        if tag == b'CONF':
            config_text = payload.decode('utf-8')
        elif tag == b'ITER':
            iteration = _U64.unpack(payload)[0]
        elif tag == b'PARM':
            name, value = _decode_array(payload, source)
            params[name] = value
        elif tag == b'OSTP':
            step = _U64.unpack(payload)[0]
        elif tag in (b'MOM1', b'MOM2'):
            name, value = _decode_array(payload, source)
            moments['m' if tag == b'MOM1' else 'v'][name] = value
        else:
            warn('{}: skipping unknown checkpoint record {!r}'.format(source,
                                                                      tag))
    if config_text is None:
        raise DataError('{}: checkpoint without configuration'.format(
            source))
    optimizer_state = (None if step is None else
                       {'step': step, 'm': moments['m'], 'v': moments['v']})
    return Checkpoint(config_text, params, iteration=iteration,
                      optimizer_state=optimizer_state, version=version)


def make_checkpoint(model, iteration=0, optimizer=None):
    """Capture `model` (and optionally the state of an
    :class:`gastwin.trainer.AdamW` `optimizer`) in a :class:`Checkpoint`."""
    return Checkpoint(serialize_config(model.cfg), model.state_dict(),
                      iteration=iteration,
                      optimizer_state=(optimizer.state_dict()
                                       if optimizer is not None else None))


def save_checkpoint(path, model, iteration=0, optimizer=None):
    """
    Write a checkpoint file.

    Parameters
    ----------
    path : str
        Output file, parent directories are created.
    model : :class:`gastwin.nn.model.GasTwinFormer`
    iteration : int, optional
        Training iteration stored with the weights.
    optimizer : :class:`gastwin.trainer.AdamW`, optional
        Optimizer whose moments are stored.
    """
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(encode_checkpoint(make_checkpoint(model, iteration,
                                                  optimizer)))


def load_checkpoint(path):
    """
    Read a checkpoint file.

    Returns
    -------
    ckpt : :class:`Checkpoint`

    Raises
    ------
    gastwin.errors.DataError
        If the file is not a valid checkpoint.
    """
    with open(path, 'rb') as f:
        data = f.read()
    return decode_checkpoint(data, source=path)


def load_model(path):
    """Read a checkpoint file and return ``(model, checkpoint)``."""
    ckpt = load_checkpoint(path)
    return ckpt.build_model(), ckpt

#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

'''
Self-describing binary checkpoints.

Layout, little endian::

    b'GC3C' | uint32 version | uint32 meta length | YAML metadata
    uint32 tensor count
    per tensor: uint16 name length | name | uint8 rank |
                uint32 extent * rank | float64 data

The metadata holds the model configuration under "model" and, for
training checkpoints, the scalar training state under "train_state".
'''

import logging
import os
import struct

import numpy as np
import yaml

from gc3separator.common.exception import CheckpointFormatError
from gc3separator.common.exception import DimensionError
from gc3separator.model_config import ModelConfig
from gc3separator import pipeline
from gc3separator.utils import yamlparser

log = logging.getLogger('gc3')

MAGIC = b'GC3C'
FORMAT_VERSION = 1


def write_checkpoint(path, meta, tensors):
    '''Write metadata and an ordered mapping of name -> array.'''
    chunks = [MAGIC, struct.pack('<I', FORMAT_VERSION)]
    text = yamlparser.dump_yaml(meta).encode('utf-8')
    chunks += [struct.pack('<I', len(text)), text,
               struct.pack('<I', len(tensors))]
    for name, value in tensors.items():
        value = np.ascontiguousarray(value, dtype='<f8')
        encoded = name.encode('utf-8')
        chunks += [struct.pack('<H', len(encoded)), encoded,
                   struct.pack('<B', value.ndim),
                   struct.pack('<%dI' % value.ndim, *value.shape),
                   value.tobytes()]
    partial = path + '.partial'
    with open(partial, 'wb') as f:
        f.write(b''.join(chunks))
    os.replace(partial, path)
    log.debug('Wrote %d tensors to %s', len(tensors), path)


class _Reader(object):

    def __init__(self, path, data):
        self.path = path
        self.data = data
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise CheckpointFormatError(path=self.path,
                                        reason='the file is truncated')
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self, size, what):
        chunk = self.take(size)
        try:
            return chunk.decode('utf-8')
        except UnicodeDecodeError:
            raise CheckpointFormatError(
                path=self.path, reason='%s is not valid UTF-8' % what)


def read_checkpoint(path):
    '''Return (meta, tensors) with tensors in file order.'''
    try:
        with open(path, 'rb') as f:
            reader = _Reader(path, f.read())
    except (IOError, OSError) as e:
        raise CheckpointFormatError(path=path, reason=e.strerror)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError(path=path, reason='bad magic bytes')
    version, = reader.unpack('<I')
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            path=path, reason='unsupported format version %d' % version)
    size, = reader.unpack('<I')
    text = reader.text(size, 'metadata')
    try:
        meta = yaml.load(text, Loader=yamlparser.yaml_loader)
    except yaml.YAMLError as e:
        raise CheckpointFormatError(path=path,
                                    reason='unreadable metadata (%s)' % e)
    if not isinstance(meta, dict):
        raise CheckpointFormatError(path=path,
                                    reason='metadata is not a mapping')
    count, = reader.unpack('<I')
    tensors = {}
    for _i in range(count):
        length, = reader.unpack('<H')
        name = reader.text(length, 'tensor name')
        rank, = reader.unpack('<B')
        shape = reader.unpack('<%dI' % rank)
        n_bytes = 8 * int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(reader.take(n_bytes),
                                      dtype='<f8').reshape(shape).copy()
    if reader.offset != len(reader.data):
        raise CheckpointFormatError(path=path,
                                    reason='trailing bytes after tensors')
    return meta, tensors


def save_model(path, model, extra_meta=None, extra_tensors=None):
    meta = {'model': model.config.to_dict()}
    meta.update(extra_meta or {})
    tensors = dict(model.state_dict())
    tensors.update(extra_tensors or {})
    write_checkpoint(path, meta, tensors)


def load_model(path):
    '''Rebuild a model; returns (model, meta, tensors the model left over).'''
    meta, tensors = read_checkpoint(path)
    if 'model' not in meta:
        raise CheckpointFormatError(path=path,
                                    reason='no model configuration')
    config = ModelConfig.from_dict(meta['model'])
    model = pipeline.build_model(config)
    try:
        model.load_state_dict(tensors)
    except DimensionError as e:
        raise CheckpointFormatError(path=path, reason=e.message)
    names = set(name for name, _t in model.named_parameters())
    rest = dict((k, v) for k, v in tensors.items() if k not in names)
    return model, meta, rest

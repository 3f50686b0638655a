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

import os
import struct

import fixtures
import numpy as np
from numpy import testing

from gc3separator import checkpoint
from gc3separator.common import exception
from gc3separator import pipeline
from gc3separator.tests.base import TestCase
from gc3separator.tests.test_pipeline import tiny_config


class CheckpointTest(TestCase):

    def setUp(self):
        super(CheckpointTest, self).setUp()
        self.path = os.path.join(self.useFixture(fixtures.TempDir()).path,
                                 'model.gc3')

    def test_model_reloads_identically(self):
        model = pipeline.build_model(tiny_config(groupcomm='mhsa'), seed=5)
        checkpoint.save_model(self.path, model)
        loaded, meta, rest = checkpoint.load_model(self.path)
        self.assertEqual(model.config, loaded.config)
        self.assertEqual({}, rest)
        x = self.random(90)
        testing.assert_array_equal(pipeline.separate(model, x).data,
                                   pipeline.separate(loaded, x).data)

    def test_extra_meta_and_tensors(self):
        model = pipeline.build_model(tiny_config(variant='baseline'))
        moment = self.random(2, 3)
        checkpoint.save_model(self.path, model,
                              extra_meta={'train_state': {'epoch': 4}},
                              extra_tensors={'optimizer.m/encoder': moment})
        _model, meta, rest = checkpoint.load_model(self.path)
        self.assertEqual(4, meta['train_state']['epoch'])
        testing.assert_array_equal(moment, rest['optimizer.m/encoder'])

    def test_header_layout(self):
        checkpoint.write_checkpoint(self.path, {'a': 1},
                                    {'w': np.arange(6.).reshape(2, 3)})
        with open(self.path, 'rb') as f:
            data = f.read()
        self.assertEqual(b'GC3C', data[:4])
        self.assertEqual((1,), struct.unpack('<I', data[4:8]))
        meta, tensors = checkpoint.read_checkpoint(self.path)
        self.assertEqual({'a': 1}, meta)
        self.assertEqual(['w'], list(tensors))
        self.assertEqual(5.0, tensors['w'][1, 2])
        # header, name, rank, extents and 6 doubles
        size, = struct.unpack('<I', data[8:12])
        self.assertEqual(12 + size + 4 + 2 + 1 + 1 + 8 + 48, len(data))

    def test_scalar_tensor(self):
        checkpoint.write_checkpoint(self.path, {}, {'slope': np.array(.25)})
        _meta, tensors = checkpoint.read_checkpoint(self.path)
        self.assertEqual((), tensors['slope'].shape)
        self.assertEqual(0.25, float(tensors['slope']))

    def _corrupt(self, data):
        with open(self.path, 'wb') as f:
            f.write(data)

    def _valid_bytes(self):
        checkpoint.write_checkpoint(self.path, {'a': 1},
                                    {'w': np.ones(4)})
        with open(self.path, 'rb') as f:
            return f.read()

    def test_bad_magic(self):
        self._corrupt(b'XXXX' + self._valid_bytes()[4:])
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.read_checkpoint, self.path)
        self.assertIn('bad magic bytes', str(err))

    def test_unsupported_version(self):
        data = self._valid_bytes()
        self._corrupt(data[:4] + struct.pack('<I', 9) + data[8:])
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.read_checkpoint, self.path)
        self.assertIn('version 9', str(err))

    def test_truncated(self):
        self._corrupt(self._valid_bytes()[:-3])
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.read_checkpoint, self.path)
        self.assertIn('truncated', str(err))

    def test_truncated_metadata(self):
        data = self._valid_bytes()
        size, = struct.unpack('<I', data[8:12])
        self._corrupt(data[:12 + size - 1])
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.read_checkpoint, self.path)
        self.assertIn('the file is truncated', str(err))
        self.assertNotIn('unreadable metadata', str(err))

    def test_unreadable_metadata(self):
        data = self._valid_bytes()
        size, = struct.unpack('<I', data[8:12])
        self._corrupt(data[:12] + b'[' * size + data[12 + size:])
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.read_checkpoint, self.path)
        self.assertIn('unreadable metadata', str(err))

    def test_tensor_name_not_utf8(self):
        data = self._valid_bytes()
        size, = struct.unpack('<I', data[8:12])
        name = 12 + size + 4 + 2
        self._corrupt(data[:name] + b'\xff' + data[name + 1:])
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.read_checkpoint, self.path)
        self.assertIn('tensor name is not valid UTF-8', str(err))

    def test_missing_file(self):
        missing = self.path + '.missing'
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.load_model, missing)
        self.assertIn(missing, str(err))

    def test_trailing_bytes(self):
        self._corrupt(self._valid_bytes() + b'\0')
        self.assertRaises(exception.CheckpointFormatError,
                          checkpoint.read_checkpoint, self.path)

    def test_missing_model_section(self):
        checkpoint.write_checkpoint(self.path, {'a': 1}, {})
        err = self.assertRaises(exception.CheckpointFormatError,
                                checkpoint.load_model, self.path)
        self.assertIn('no model configuration', str(err))

    def test_missing_tensor(self):
        model = pipeline.build_model(tiny_config())
        tensors = model.state_dict()
        del tensors['decoder']
        checkpoint.write_checkpoint(
            self.path, {'model': model.config.to_dict()}, tensors)
        self.assertRaises(exception.CheckpointFormatError,
                          checkpoint.load_model, self.path)

    def test_runtime_exit_code(self):
        self.assertEqual(2, exception.CheckpointFormatError(
            path='x', reason='y').exit_code)

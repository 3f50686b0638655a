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

import numpy as np
from numpy import testing

from gc3separator.common import exception
from gc3separator.model_config import ModelConfig
from gc3separator import pipeline
from gc3separator import tensor as tn
from gc3separator.tests.base import TestCase

TINY = dict(N=16, H_i=4, H_o=8, L_s=2, L_c=1, C=8, B=6, sample_rate=8000)


def tiny_config(variant='gc3', separator='dprnn', groupcomm='tac', **extra):
    fields = dict(TINY, variant=variant, separator=separator,
                  groupcomm=groupcomm)
    if variant != 'baseline':
        fields.update(K=4, M=4)
    fields.update(extra)
    return ModelConfig(**fields).validate()


class EncoderTest(TestCase):

    def setUp(self):
        super(EncoderTest, self).setUp()
        self.model = pipeline.build_model(tiny_config())

    def test_frame_count(self):
        self.assertEqual(3999, pipeline.frame_count(self.model.config,
                                                    64000))
        h = pipeline.encode_waveform(self.model, np.zeros(64000))
        self.assertEqual((3999, 16), h.shape)

    def test_right_padding(self):
        self.assertEqual(48, pipeline.padded_length(self.model.config, 40))
        self.assertEqual(32, pipeline.padded_length(self.model.config, 32))

    def test_batch_layout(self):
        h = pipeline.encode_waveform(self.model, self.random(3, 100))
        self.assertEqual((3, 6, 16), h.shape)

    def test_too_short(self):
        self.assertRaises(exception.InputTooShortError,
                          pipeline.encode_waveform, self.model,
                          np.zeros(31))

    def test_decoder_length(self):
        x = self.random(100)
        h = pipeline.encode_waveform(self.model, x)
        masks = np.ones((2,) + h.shape)
        self.assertEqual((2, 100),
                         pipeline.decode_waveforms(self.model, h, masks,
                                                   100).shape)
        self.assertEqual((2, 112),
                         pipeline.decode_waveforms(self.model, h,
                                                   masks).shape)

    def test_decoder_shape_mismatch(self):
        h = np.zeros((6, 16))
        self.assertRaises(exception.DimensionError,
                          pipeline.decode_waveforms, self.model, h,
                          np.zeros((2, 5, 16)))


class SeparationTest(TestCase):

    scenarios = [
        ('baseline_dprnn', dict(variant='baseline', separator='dprnn',
                                groupcomm='tac', overlap=0.0)),
        ('groupcomm_blstm', dict(variant='groupcomm', separator='dprnn',
                                 groupcomm='blstm', overlap=0.0)),
        ('gc3_tac', dict(variant='gc3', separator='dprnn', groupcomm='tac',
                         overlap=0.0)),
        ('gc3_mhsa_overlap', dict(variant='gc3', separator='dprnn',
                                  groupcomm='mhsa', overlap=0.5)),
        ('baseline_tcn', dict(variant='baseline', separator='tcn',
                              groupcomm='tac', overlap=0.0)),
        ('gc3_tcn', dict(variant='gc3', separator='tcn', groupcomm='tac',
                         overlap=0.0)),
    ]

    def _model(self, seed=0):
        return pipeline.build_model(
            tiny_config(self.variant, self.separator, self.groupcomm,
                        group_overlap=self.overlap), seed)

    def test_output_shape(self):
        model = self._model()
        x = self.random(200)
        estimates, h, masks = pipeline.separate_with_masks(model, x)
        self.assertEqual((2, 200), estimates.shape)
        self.assertEqual((2,) + h.shape, masks.shape)
        self.assertTrue(np.all(masks.data >= 0))
        self.assertTrue(np.all(np.isfinite(estimates.data)))

    def test_batch_matches_single(self):
        model = self._model()
        x = self.random(2, 120)
        batch = pipeline.separate(model, x).data
        self.assertEqual((2, 2, 120), batch.shape)
        testing.assert_allclose(batch[1], pipeline.separate(model,
                                                            x[1]).data,
                                rtol=1e-10, atol=1e-12)

    def test_seed_determinism(self):
        x = self.random(80)
        first = pipeline.separate(self._model(seed=7), x).data
        testing.assert_array_equal(
            first, pipeline.separate(self._model(seed=7), x).data)
        self.assertFalse(np.array_equal(
            first, pipeline.separate(self._model(seed=8), x).data))

    def test_build_logs_count(self):
        model = self._model()
        self.assertIn('%d parameters' % model.count(),
                      self.log_fixture.output)

    def test_feature_width_checked(self):
        self.assertRaises(exception.DimensionError,
                          pipeline.separate_features, self._model(),
                          np.zeros((5, 12)))


class ModelGradientTest(TestCase):

    scenarios = [
        ('gc3_tac', dict(variant='gc3', separator='dprnn', epsilon=1e-5)),
        # small steps keep the PReLU kinks out of the differences
        ('gc3_tcn', dict(variant='gc3', separator='tcn', epsilon=1e-7)),
    ]

    def test_end_to_end_gradients(self):
        model = pipeline.build_model(tiny_config(self.variant,
                                                 self.separator), seed=3)
        for name, t in model.named_parameters():
            if name.endswith('norm.gain') or name.endswith('norm_in.gain') \
                    or name.endswith('norm_out.gain'):
                t.data = t.data + 0.3 * self.random(*t.shape)
        x = self.random(64)
        w = self.random(2, 64)
        self.assertGradCheck(
            model, lambda: tn.reduce('sum', pipeline.separate(model, x) * w),
            max_coords=2, epsilon=self.epsilon)


class StateDictTest(TestCase):

    def test_load_state_dict(self):
        source = pipeline.build_model(tiny_config(), seed=1)
        target = pipeline.build_model(tiny_config(), seed=2)
        target.load_state_dict(source.state_dict())
        x = self.random(64)
        testing.assert_array_equal(pipeline.separate(source, x).data,
                                   pipeline.separate(target, x).data)

    def test_shape_mismatch(self):
        model = pipeline.build_model(tiny_config())
        tensors = model.state_dict()
        tensors['encoder'] = np.zeros((3, 3))
        self.assertRaises(exception.DimensionError, model.load_state_dict,
                          tensors)

    def test_missing_tensor(self):
        model = pipeline.build_model(tiny_config())
        tensors = model.state_dict()
        del tensors['decoder']
        self.assertRaises(exception.DimensionError, model.load_state_dict,
                          tensors)

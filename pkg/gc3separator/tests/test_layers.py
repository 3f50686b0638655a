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
from gc3separator.elements import layers
from gc3separator import tensor as tn
from gc3separator.tests.base import TestCase


def _sigmoid(x):
    return 1. / (1. + np.exp(-x))


class LinearTest(TestCase):

    def test_identity(self):
        params = layers.LinearParams(tn.parameter(np.eye(3)),
                                     tn.parameter(np.zeros(3)))
        x = self.random(4, 3)
        testing.assert_array_equal(x, layers.fc(params, x).data)

    def test_hand_arithmetic(self):
        params = layers.LinearParams(tn.parameter([[1., 1.]]),
                                     tn.parameter([1.]))
        testing.assert_array_equal([6.], layers.fc(params, [2., 3.]).data)

    def test_width_mismatch(self):
        params = layers.LinearParams.create(self.rng, 5, 3)
        self.assertRaises(exception.DimensionError, layers.fc, params,
                          np.ones((2, 4)))

    def test_gradients(self):
        params = layers.LinearParams.create(self.rng, 5, 3)
        x = self.random(4, 5)
        w = self.random(4, 3)
        self.assertGradCheck(
            params, lambda: tn.reduce('sum', layers.fc(params, x) * w),
            limit=1e-6)

    def test_initialisation_bound(self):
        params = layers.LinearParams.create(self.rng, 16, 8)
        self.assertLessEqual(np.abs(params.weight.data).max(), 0.25)
        self.assertEqual(16 * 8 + 8, params.count())


class PReLUTest(TestCase):

    def test_default_slope(self):
        out = layers.prelu(layers.PReLUParams.create(), [-4., 2.])
        testing.assert_array_equal([-1., 2.], out.data)

    def test_slope_one_is_identity(self):
        x = self.random(6)
        out = layers.prelu(layers.PReLUParams.create(1.), x)
        testing.assert_allclose(x, out.data, rtol=0, atol=1e-15)

    def test_slope_zero_is_relu(self):
        x = self.random(6)
        out = layers.prelu(layers.PReLUParams.create(0.), x)
        testing.assert_array_equal(np.maximum(x, 0.), out.data)


class LayerNormTest(TestCase):

    def test_standardises(self):
        out = layers.layer_norm(layers.LayerNormParams.create(3),
                                [1., 2., 3.])
        testing.assert_allclose([-1.2247, 0., 1.2247], out.data, atol=1e-4)

    def test_constant_input_gives_bias(self):
        params = layers.LayerNormParams.create(4)
        params.bias.data = np.array([1., 2., 3., 4.])
        out = layers.layer_norm(params, np.full((2, 4), 7.))
        testing.assert_array_equal(np.tile([1., 2., 3., 4.], (2, 1)),
                                   out.data)

    def test_shift_invariance(self):
        params = layers.LayerNormParams.create(5)
        x = self.random(3, 5)
        testing.assert_allclose(layers.layer_norm(params, x).data,
                                layers.layer_norm(params, x + 3.7).data,
                                rtol=0, atol=1e-10)

    def test_moments(self):
        out = layers.layer_norm(layers.LayerNormParams.create(8),
                                self.random(10, 8) * 3. + 1.).data
        self.assertLess(np.abs(out.mean(axis=-1)).max(), 1e-10)
        testing.assert_allclose(np.ones(10), out.var(axis=-1), atol=1e-6)

    def test_gradients(self):
        params = layers.LayerNormParams.create(4)
        params.gain.data = self.random(4)
        x = tn.Tensor(self.random(3, 4))
        w = self.random(3, 4)
        self.assertGradCheck(
            params, lambda: tn.reduce('sum', layers.layer_norm(params, x) * w),
            extra=[('input', x)])


class LSTMTest(TestCase):

    def test_zero_weights_give_zero_output(self):
        fwd = layers.LSTMParams.create(self.rng, 3, 2).fill(0.)
        bwd = layers.LSTMParams.create(self.rng, 3, 2).fill(0.)
        out = layers.blstm(fwd, bwd, self.random(5, 3))
        testing.assert_array_equal(np.zeros((5, 4)), out.data)

    def test_single_step_uses_same_frame(self):
        fwd = layers.LSTMParams.create(self.rng, 3, 2)
        bwd = layers.LSTMParams(*[tn.parameter(t.data.copy())
                                  for t in fwd.parameters()])
        out = layers.blstm(fwd, bwd, self.random(1, 3)).data
        testing.assert_array_equal(out[:, :2], out[:, 2:])

    def test_hand_unrolled_scalar_cell(self):
        half = [[0.5]]
        params = layers.LSTMParams(
            tn.parameter(half * 4), tn.parameter(half * 4),
            tn.parameter([0.5] * 4), tn.parameter([0.] * 4))
        out = layers.lstm(params, [[1.], [2.]]).data

        gate = _sigmoid(1.)
        c1 = gate * np.tanh(1.)
        h1 = gate * np.tanh(c1)
        z = 0.5 * 2. + 0.5 + 0.5 * h1
        c2 = _sigmoid(z) * c1 + _sigmoid(z) * np.tanh(z)
        h2 = _sigmoid(z) * np.tanh(c2)
        testing.assert_allclose([[h1], [h2]], out, rtol=1e-12)

    def test_reverse_direction(self):
        params = layers.LSTMParams.create(self.rng, 2, 3)
        x = self.random(4, 2)
        backward = layers.lstm(params, x, reverse=True).data
        flipped = layers.lstm(params, x[::-1]).data[::-1]
        testing.assert_allclose(flipped, backward, rtol=0, atol=1e-15)

    def test_forget_bias(self):
        params = layers.LSTMParams.create(self.rng, 2, 3)
        testing.assert_array_equal(np.ones(3), params.bias.data[3:6])
        testing.assert_array_equal(np.zeros(12), params.recurrent_bias.data)


class ResidualBLSTMTest(TestCase):

    scenarios = [('length_%d' % n, dict(length=n)) for n in (1, 2, 5)]

    def test_pass_through(self):
        params = layers.ResidualBLSTMParams.create(self.rng, 4, 3).fill(0.)
        x = self.random(self.length, 4)
        testing.assert_array_equal(
            x, layers.residual_blstm(params, x).data)

    def test_shape(self):
        params = layers.ResidualBLSTMParams.create(self.rng, 4, 3)
        out = layers.residual_blstm(params, self.random(2, self.length, 4))
        self.assertEqual((2, self.length, 4), out.shape)

    def test_parameter_count(self):
        params = layers.ResidualBLSTMParams.create(self.rng, 64, 128)
        self.assertEqual(215232, params.count())

    def test_width_mismatch(self):
        params = layers.ResidualBLSTMParams.create(self.rng, 4, 3)
        self.assertRaises(exception.DimensionError, layers.residual_blstm,
                          params, np.ones((self.length, 5)))


class ResidualBLSTMGradientTest(TestCase):

    def test_gradients(self):
        params = layers.ResidualBLSTMParams.create(self.rng, 4, 3)
        params.norm.gain.data = 1. + 0.5 * self.random(4)
        x = tn.Tensor(self.random(3, 4))
        w = self.random(3, 4)
        self.assertGradCheck(
            params,
            lambda: tn.reduce('sum', layers.residual_blstm(params, x) * w),
            extra=[('input', x)])


class DSConvTest(TestCase):

    def test_zero_weights_pass_through(self):
        params = layers.DSConvParams.create(self.rng, 3, 6).fill(0.)
        x = self.random(7, 3)
        out, skip = layers.ds_conv_block(params, x, 2)
        testing.assert_array_equal(x, out.data)
        testing.assert_array_equal(np.zeros((7, 3)), skip.data)

    def test_without_skip(self):
        params = layers.DSConvParams.create(self.rng, 3, 6, skip=False)
        out, skip = layers.ds_conv_block(params, self.random(7, 3), 1)
        self.assertIsNone(skip)
        self.assertEqual((7, 3), out.shape)

    def test_parameter_count(self):
        params = layers.DSConvParams.create(self.rng, 128, 512)
        self.assertEqual(3 * 128 * 512 + 9 * 512 + 2 * 128 + 2,
                         params.count())

    def test_receptive_field_growth(self):
        params = layers.DSConvParams.create(self.rng, 3, 6)
        for dilation in (1, 2, 4):
            x = np.zeros((21, 3))
            x[10] = self.random(3)
            base, _skip = layers.ds_conv_block(params, np.zeros((21, 3)),
                                               dilation)
            out, _skip = layers.ds_conv_block(params, x, dilation)
            changed = np.nonzero(
                np.abs(out.data - base.data).max(axis=-1) > 1e-12)[0]
            self.assertEqual(10 - dilation, changed.min())
            self.assertEqual(10 + dilation, changed.max())

    def test_gradients(self):
        params = layers.DSConvParams.create(self.rng, 3, 4)
        x = tn.Tensor(self.random(5, 3))
        w = self.random(5, 3)
        v = self.random(5, 3)

        def loss():
            out, skip = layers.ds_conv_block(params, x, 2)
            return tn.reduce('sum', out * w) + tn.reduce('sum', skip * v)

        self.assertGradCheck(params, loss, extra=[('input', x)])

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
from gc3separator.elements import dprnn
from gc3separator.elements import tcn
from gc3separator import tensor as tn
from gc3separator.tests.base import TestCase


class DPRNNTest(TestCase):

    scenarios = [
        ('baseline', dict(groupcomm=None, groups=1)),
        ('groupcomm_tac', dict(groupcomm='tac', groups=4)),
    ]

    def _params(self, L_s=2, B=4, width=3, H_o=2):
        return dprnn.DPRNNParams.create(self.rng, width, H_o, L_s, B,
                                        self.groupcomm)

    def test_segment_counts(self):
        self.assertEqual(10, dprnn.dprnn_segment(
            np.zeros((100, 1, 2)), 24).shape[0])
        self.assertEqual(3, dprnn.dprnn_segment(
            np.zeros((24, 1, 2)), 24).shape[0])

    def test_block_identity(self):
        params = self._params().fill(0.)
        blocks = self.random(3, 4, self.groups, 3)
        testing.assert_array_equal(
            blocks, dprnn.dprnn_block(params.blocks[0], blocks).data)

    def test_block_shape(self):
        params = self._params()
        blocks = self.random(2, 5, 6, self.groups, 3)
        self.assertEqual(blocks.shape,
                         dprnn.dprnn_block(params.blocks[1], blocks).shape)

    def test_forward_identity(self):
        params = self._params().fill(0.)
        x = self.random(11, self.groups, 3)
        testing.assert_allclose(x, dprnn.dprnn_forward(params, x).data,
                                rtol=0, atol=1e-12)

    def test_forward_shape(self):
        params = self._params()
        x = self.random(2, 7, self.groups, 3)
        self.assertEqual(x.shape, dprnn.dprnn_forward(params, x).shape)

    def test_width_mismatch(self):
        params = self._params()
        self.assertRaises(exception.DimensionError, dprnn.dprnn_block,
                          params.blocks[0], np.zeros((3, 4, 1, 5)))

    def test_odd_segment_rejected(self):
        self.assertRaises(exception.InvalidConfigError, self._params, B=5)

    def test_block_gradients(self):
        params = self._params(L_s=1)
        block = params.blocks[0]
        for unit in (block.intra, block.inter):
            unit.norm.gain.data = 1. + 0.5 * self.random(3)
        blocks = tn.Tensor(self.random(3, 4, self.groups, 3))
        w = self.random(3, 4, self.groups, 3)
        self.assertGradCheck(
            block,
            lambda: tn.reduce('sum', dprnn.dprnn_block(block, blocks) * w),
            extra=[('blocks', blocks)], max_coords=10)


class DPRNNScaleTest(TestCase):

    def test_baseline_runs_on_full_sequence(self):
        params = dprnn.DPRNNParams.create(self.rng, 64, 128, 6, 100)
        x = self.random(3999, 1, 64)
        out = dprnn.dprnn_forward(params, x)
        self.assertEqual(x.shape, out.shape)
        self.assertTrue(np.all(np.isfinite(out.data)))

    def test_grouped_runs_on_summarised_sequence(self):
        params = dprnn.DPRNNParams.create(self.rng, 8, 16, 8, 24, 'tac')
        x = self.random(251, 16, 8)
        self.assertEqual(x.shape, dprnn.dprnn_forward(params, x).shape)


class TCNTest(TestCase):

    scenarios = [
        ('baseline', dict(groupcomm=None, groups=1)),
        ('groupcomm_mhsa', dict(groupcomm='mhsa', groups=3)),
    ]

    def _params(self, width=2, hidden=4, skip=True):
        return tcn.TCNParams.create(self.rng, width, hidden, 2,
                                    self.groupcomm, skip)

    def test_block_layout(self):
        self.assertEqual(12, len(self._params().blocks))
        self.assertEqual((1, 2, 4, 8, 16, 32) * 2, tcn.DILATIONS)
        self.assertEqual(253, tcn.receptive_field())

    def test_zero_weights_identity(self):
        params = self._params().fill(0.)
        x = self.random(9, self.groups, 2)
        testing.assert_array_equal(x, tcn.tcn_forward(params, x).data)

    def test_shape(self):
        params = self._params(skip=False)
        x = self.random(2, 9, self.groups, 2)
        self.assertEqual(x.shape, tcn.tcn_forward(params, x).shape)

    def test_impulse_support(self):
        params = self._params()
        x = np.zeros((600, self.groups, 2))
        base = tcn.tcn_forward(params, x).data
        x[300] = self.random(self.groups, 2)
        out = tcn.tcn_forward(params, x).data
        changed = np.nonzero(
            np.abs(out - base).reshape(600, -1).max(axis=-1) > 0)[0]
        self.assertEqual(300 - 126, changed.min())
        self.assertEqual(300 + 126, changed.max())

    def test_size_independent_of_group_count(self):
        params = self._params()
        count = params.count()
        for groups in (self.groups, self.groups + 2):
            tcn.tcn_forward(params, self.random(5, groups, 2))
        self.assertEqual(count, params.count())

    def test_width_mismatch(self):
        self.assertRaises(exception.DimensionError, tcn.tcn_forward,
                          self._params(), np.zeros((5, 1, 3)))

    def test_gradients(self):
        params = self._params(width=3)
        x = tn.Tensor(self.random(6, self.groups, 3))
        w = self.random(6, self.groups, 3)
        self.assertGradCheck(
            params, lambda: tn.reduce('sum', tcn.tcn_forward(params, x) * w),
            extra=[('input', x)], max_coords=4)

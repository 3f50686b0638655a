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

import math

import numpy as np
from numpy import testing

from gc3separator.common import exception
from gc3separator import synthetic
from gc3separator.synthetic import SynthMixSpec
from gc3separator.tests.base import TestCase


def _db(a, b):
    return 10.0 * math.log10(np.sum(a ** 2) / np.sum(b ** 2))


class MixtureTest(TestCase):

    scenarios = [
        ('clean', dict(noise=False, sources=2)),
        ('noisy', dict(noise=True, sources=2)),
        ('three_sources', dict(noise=True, sources=3)),
    ]

    def setUp(self):
        super(MixtureTest, self).setUp()
        self.spec = SynthMixSpec(noise=self.noise, sources=self.sources,
                                 seed=7).validate()

    def test_mixture_is_exact_sum(self):
        for i in range(4):
            e = synthetic.make_example(self.spec, i)
            testing.assert_array_equal(np.zeros(4000), e.mixture - (
                e.sources.sum(axis=0) + e.noise))

    def test_shapes(self):
        mixtures, sources = synthetic.make_batch(self.spec, 3, start=5)
        self.assertEqual((3, 4000), mixtures.shape)
        self.assertEqual((3, self.sources, 4000), sources.shape)
        self.assertLessEqual(np.max(np.abs(mixtures)), 0.9 + 1e-12)

    def test_relative_levels(self):
        for i in range(8):
            e = synthetic.make_example(self.spec, i)
            self.assertEqual(self.sources - 1, len(e.snr_db))
            for j, snr in enumerate(e.snr_db):
                realized = _db(e.sources[0], e.sources[j + 1])
                self.assertAlmostEqual(snr, realized, places=9)
                self.assertTrue(0.0 <= realized <= 5.0, realized)
            if self.noise:
                level = _db(e.sources.sum(axis=0), e.noise)
                self.assertTrue(10.0 - 1e-9 <= level <= 20.0 + 1e-9, level)
            else:
                self.assertFalse(np.any(e.noise))

    def test_deterministic(self):
        first = synthetic.make_batch(self.spec, 2, start=3)
        second = synthetic.make_batch(self.spec.replace(), 2, start=3)
        testing.assert_array_equal(first[0], second[0])
        testing.assert_array_equal(first[1], second[1])

    def test_batch_matches_examples(self):
        mixtures, sources = synthetic.make_batch(self.spec, 3, start=2)
        e = synthetic.make_example(self.spec, 3)
        testing.assert_array_equal(e.mixture, mixtures[1])
        testing.assert_array_equal(e.sources, sources[1])


class SourceFamilyTest(TestCase):

    def test_families_occupy_separate_bands(self):
        spec = SynthMixSpec(seed=3).validate()
        e = synthetic.make_example(spec, 0)
        freqs = np.fft.rfftfreq(spec.length, 1.0 / spec.sample_rate)
        low = np.abs(np.fft.rfft(e.sources[0])) ** 2
        high = np.abs(np.fft.rfft(e.sources[1])) ** 2
        self.assertGreater(low[freqs < 1500].sum(), 0.95 * low.sum())
        self.assertGreater(high[freqs > 1500].sum(), 0.95 * high.sum())

    def test_seeds_differ(self):
        a = synthetic.make_example(SynthMixSpec(seed=1), 0)
        b = synthetic.make_example(SynthMixSpec(seed=2), 0)
        self.assertFalse(np.allclose(a.mixture, b.mixture))

    def test_carriers_stay_below_nyquist(self):
        self.assertEqual((2000.0, 3600.0), SynthMixSpec().high_band)
        self.assertEqual((2000.0, 4000.0),
                         SynthMixSpec(sample_rate=16000).high_band)


class SpecTest(TestCase):

    def test_defaults(self):
        spec = SynthMixSpec.from_dict({})
        self.assertEqual(8000, spec.sample_rate)
        self.assertEqual(4000, spec.length)
        self.assertEqual([0.0, 5.0], spec.snr_range)

    def test_invalid(self):
        err = self.assertRaises(exception.ValidationError,
                                SynthMixSpec.from_dict,
                                {'sources': 5, 'snr_range': [5.0, 1.0],
                                 'color': 'pink'})
        message = str(err)
        self.assertIn('mixture contains unknown field "color"', message)
        self.assertIn('Invalid value "5" for field "sources"', message)

    def test_reversed_range(self):
        err = self.assertRaises(exception.ValidationError,
                                SynthMixSpec.from_dict,
                                {'noise_snr_range': [20, 10]})
        self.assertIn('noise_snr_range', str(err))

    def test_low_sample_rate(self):
        err = self.assertRaises(exception.ValidationError,
                                SynthMixSpec.from_dict,
                                {'sample_rate': 4000})
        self.assertIn('sample_rate', str(err))

    def test_empty_batch(self):
        self.assertRaises(exception.EmptyInputError, synthetic.make_batch,
                          SynthMixSpec(), 0)

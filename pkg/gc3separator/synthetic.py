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
Seeded synthetic mixtures for desk-scale training and evaluation.

Sources alternate between two families: sums of three low sinusoids and
amplitude-modulated high carriers. Every extra source is scaled to an
exact relative level below the first one, optional white noise sits a
drawn number of dB below the source sum.
'''

import collections
import math

import numpy as np

from gc3separator.common.exception import EmptyInputError
from gc3separator.common.exception import ExceptionCollector
from gc3separator.common.exception import InvalidConfigError
from gc3separator.model_config import ConfigSection
from gc3separator.utils.gettextutils import _

LOW_BAND = (200.0, 1000.0)
HIGH_BAND = (2000.0, 4000.0)
NYQUIST_MARGIN = 0.45
MODULATION_BAND = (2.0, 8.0)
PEAK = 0.9

Example = collections.namedtuple('Example',
                                 ['mixture', 'sources', 'noise', 'snr_db'])


def _range(minimum=None):
    item = {'type': 'number'}
    if minimum is not None:
        item['minimum'] = minimum
    return {'type': 'array', 'items': item, 'minItems': 2, 'maxItems': 2}


class SynthMixSpec(ConfigSection):
    '''Distribution of the synthetic mixtures.'''

    SECTION = 'mixture'
    WHAT = 'mixture specification'
    DEFAULTS = {
        'sample_rate': 8000,
        'duration': 0.5,
        'sources': 2,
        'snr_range': [0.0, 5.0],
        'noise': False,
        'noise_snr_range': [10.0, 20.0],
        'seed': 0,
    }
    SCHEMA = {
        'type': 'object',
        'additionalProperties': False,
        'properties': {
            'sample_rate': {'type': 'integer', 'minimum': 1},
            'duration': {'type': 'number', 'exclusiveMinimum': 0},
            'sources': {'type': 'integer', 'minimum': 1, 'maximum': 4},
            'snr_range': _range(minimum=0),
            'noise': {'type': 'boolean'},
            'noise_snr_range': _range(),
            'seed': {'type': 'integer', 'minimum': 0},
        },
    }

    @property
    def length(self):
        return int(round(self.sample_rate * self.duration))

    @property
    def high_band(self):
        return (HIGH_BAND[0],
                min(HIGH_BAND[1], NYQUIST_MARGIN * self.sample_rate))

    def check(self):
        validate = ExceptionCollector.appendException
        for field in ('snr_range', 'noise_snr_range'):
            low, high = getattr(self, field)
            if low > high:
                validate(InvalidConfigError(
                    field=field, value=[low, high],
                    reason=_('the lower bound exceeds the upper bound')))
        low, high = self.high_band
        if high <= low:
            validate(InvalidConfigError(
                field='sample_rate', value=self.sample_rate,
                reason=_('carriers from %d Hz need a sample rate above '
                         '%d Hz') % (low, low / NYQUIST_MARGIN)))
        if self.length < 1:
            validate(InvalidConfigError(
                field='duration', value=self.duration,
                reason=_('the mixture holds no samples')))


def _energy(x):
    return float(np.sum(np.square(x)))


def tone_source(rng, t):
    '''Three sinusoids with random frequency, phase and amplitude.'''
    out = np.zeros_like(t)
    for _ in range(3):
        freq = rng.uniform(*LOW_BAND)
        out += rng.uniform(0.3, 1.0) * np.sin(
            2.0 * math.pi * freq * t + rng.uniform(0.0, 2.0 * math.pi))
    return out


def modulated_source(rng, t, band):
    '''Two high carriers under slow raised-sine envelopes.'''
    out = np.zeros_like(t)
    for _ in range(2):
        carrier = rng.uniform(*band)
        rate = rng.uniform(*MODULATION_BAND)
        envelope = 0.55 + 0.45 * np.sin(
            2.0 * math.pi * rate * t + rng.uniform(0.0, 2.0 * math.pi))
        out += rng.uniform(0.3, 1.0) * envelope * np.sin(
            2.0 * math.pi * carrier * t + rng.uniform(0.0, 2.0 * math.pi))
    return out


def make_example(spec, index):
    '''Example number index of the stream defined by spec.'''
    rng = np.random.default_rng([spec.seed, index])
    t = np.arange(spec.length) / float(spec.sample_rate)
    sources = np.stack([
        tone_source(rng, t) if j % 2 == 0
        else modulated_source(rng, t, spec.high_band)
        for j in range(spec.sources)])

    # source j > 0 sits snr_db[j - 1] below source 0
    reference = _energy(sources[0])
    snr_db = []
    for j in range(1, spec.sources):
        snr = rng.uniform(*spec.snr_range)
        sources[j] *= math.sqrt(reference / (_energy(sources[j])
                                             * 10.0 ** (snr / 10.0)))
        snr_db.append(snr)

    noise = np.zeros(spec.length)
    if spec.noise:
        noise = rng.standard_normal(spec.length)
        level = rng.uniform(*spec.noise_snr_range)
        noise *= math.sqrt(_energy(sources.sum(axis=0))
                           / (_energy(noise) * 10.0 ** (level / 10.0)))

    scale = PEAK / max(np.max(np.abs(sources.sum(axis=0) + noise)), 1e-12)
    sources *= scale
    noise *= scale
    mixture = sources.sum(axis=0) + noise
    return Example(mixture, sources, noise, snr_db)


def make_batch(spec, n, start=0):
    '''Examples start .. start+n-1 as ([n, L] mixtures, [n, X, L] sources).'''
    if n < 1:
        raise EmptyInputError(what='make_batch')
    examples = [make_example(spec, start + i) for i in range(n)]
    return (np.stack([e.mixture for e in examples]),
            np.stack([e.sources for e in examples]))

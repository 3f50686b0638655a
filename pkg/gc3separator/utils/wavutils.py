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

import logging

import numpy as np
import soundfile as sf

from gc3separator.common.exception import AudioFormatError

log = logging.getLogger('gc3')

SUBTYPE = 'PCM_16'
FORMAT = 'WAV'
FULL_SCALE = 32767.0 / 32768.0


def read_wav(path, sample_rate=None):
    '''Samples of a mono 16-bit PCM WAV file as float64 in [-1, 1).'''
    try:
        info = sf.info(path)
    except RuntimeError as e:
        raise AudioFormatError(path=path, what='format', actual=e,
                               expected='%s %s' % (FORMAT, SUBTYPE))
    if info.format != FORMAT or info.subtype != SUBTYPE:
        raise AudioFormatError(path=path, what='format',
                               actual='%s %s' % (info.format, info.subtype),
                               expected='%s %s' % (FORMAT, SUBTYPE))
    if info.channels != 1:
        raise AudioFormatError(path=path, what='channel count',
                               actual=info.channels, expected=1)
    if sample_rate is not None and info.samplerate != sample_rate:
        raise AudioFormatError(path=path, what='sample rate',
                               actual=info.samplerate, expected=sample_rate)
    data, _sr = sf.read(path, dtype='float64')
    return data


def write_wav(path, data, sample_rate):
    '''Write mono 16-bit PCM; peak-normalize only if samples would clip.

    Returns True when the signal was rescaled.
    '''
    data = np.asarray(data, dtype=np.float64)
    peak = float(np.max(np.abs(data))) if data.size else 0.0
    scaled = peak > FULL_SCALE
    if scaled:
        log.warning('Peak %.3f would clip in %s; normalizing', peak, path)
        data = data * (FULL_SCALE / peak)
    sf.write(path, data, sample_rate, subtype=SUBTYPE, format=FORMAT)
    return scaled

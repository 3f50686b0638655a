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
Complete separation models: encoder, separator, mask head and decoder.

Waveforms are [L] or [batch, L]. Encoded features are time-major,
[..., T, N]; masks are [..., X, T, N]; estimates are [..., X, L].
'''

import logging
import math

import numpy as np

from gc3separator.common.exception import DimensionError
from gc3separator.common.exception import InputTooShortError
from gc3separator.elements import codec
from gc3separator.elements import dprnn
from gc3separator.elements import groupcomm as gc
from gc3separator.elements import layers
from gc3separator.elements.layers import LinearParams
from gc3separator.elements.layers import Params
from gc3separator.elements.layers import PReLUParams
from gc3separator.elements import tcn
from gc3separator import model_config
from gc3separator import tensor as tn
from gc3separator.tensor import parameter

log = logging.getLogger('gc3.model')


class SeparationModel(Params):
    '''All trainable tensors of one model plus its configuration.'''

    def __init__(self, config, encoder, separator, mask_act, mask, decoder,
                 bottleneck=None, codec_params=None):
        self.config = config
        self.encoder = encoder
        self.bottleneck = bottleneck
        self.codec = codec_params
        self.separator = separator
        self.mask_act = mask_act
        self.mask = mask
        self.decoder = decoder

    def state_dict(self):
        return dict((name, t.data) for name, t in self.named_parameters())

    def load_state_dict(self, tensors):
        for name, t in self.named_parameters():
            if name not in tensors:
                raise DimensionError(op='load_state_dict', lhs=name,
                                     rhs='missing tensor')
            value = np.asarray(tensors[name], dtype=np.float64)
            if value.shape != t.shape:
                raise DimensionError(op='load_state_dict %s' % name,
                                     lhs=value.shape, rhs=t.shape)
            t.data = value.copy()


def _create_separator(rng, config):
    groupcomm = config.groupcomm if config.grouped else None
    if config.separator == model_config.TCN:
        return tcn.TCNParams.create(
            rng, config.width, config.hidden_cnn, config.H_o, groupcomm,
            config.tcn_skip, config.mhsa_heads, config.mhsa_hidden)
    return dprnn.DPRNNParams.create(
        rng, config.width, config.H_o, config.L_s, config.B, groupcomm,
        config.mhsa_heads, config.mhsa_hidden)


def build_model(config, seed=0):
    '''Initialise every parameter from one seeded generator.'''
    config.validate()
    rng = np.random.default_rng(seed)
    window = config.window
    encoder = parameter(rng.uniform(-1.0, 1.0, (config.N, 1, window))
                        / math.sqrt(window))
    bottleneck = codec_params = None
    if not config.grouped:
        bottleneck = LinearParams.create(rng, config.N, config.H_i)
    elif config.variant == model_config.GC3:
        codec_params = codec.ContextCodecParams.create(
            rng, config.groupcomm, config.M, config.H_o, config.L_c,
            config.C, config.mhsa_heads, config.mhsa_hidden)
    separator = _create_separator(rng, config)
    out_width = config.N if not config.grouped else config.M
    mask = LinearParams.create(rng, config.width,
                               config.sources * out_width)
    decoder = parameter(rng.uniform(-1.0, 1.0, (config.N, 1, window))
                        / math.sqrt(window))
    model = SeparationModel(config, encoder, separator, PReLUParams.create(),
                            mask, decoder, bottleneck, codec_params)
    log.info('Built %s-%s model with %d parameters', config.variant,
             config.separator, model.count())
    return model


def padded_length(config, length):
    '''Input length after right zero padding to whole encoder strides.'''
    steps = int(math.ceil((length - config.window) / float(config.stride)))
    return config.window + steps * config.stride


def frame_count(config, length):
    return (padded_length(config, length) - config.window) // \
        config.stride + 1


def encode_waveform(model, x):
    '''Linear strided convolution: [..., L] -> [..., T, N].'''
    config = model.config
    x = tn.as_tensor(x)
    length = x.shape[-1]
    if length < config.window:
        raise InputTooShortError(what='encode_waveform',
                                 required=config.window, length=length)
    x = tn.pad(x, 0, padded_length(config, length) - length, axis=-1)
    x = tn.reshape(x, x.shape[:-1] + (1, x.shape[-1]))
    h = tn.conv1d(x, model.encoder, stride=config.stride)
    return tn.swapaxes(h, -1, -2)


def _run_separator(model, sequence):
    if model.config.separator == model_config.TCN:
        return tcn.tcn_forward(model.separator, sequence)
    return dprnn.dprnn_forward(model.separator, sequence)


def _mask_head(model, features):
    # [..., T, K', W] -> [..., T, K', X, W'] with a shared FC per group
    y = layers.fc(model.mask, layers.prelu(model.mask_act, features))
    y = tn.relu(y)
    return tn.reshape(y, y.shape[:-1] + (model.config.sources, -1))


def separate_features(model, h):
    '''Nonnegative masks [..., X, T, N] for encoded features [..., T, N].'''
    config = model.config
    h = tn.as_tensor(h)
    if h.ndim < 2 or h.shape[-1] != config.N:
        raise DimensionError(op='separate_features', lhs=h.shape,
                             rhs='[..., T, %d]' % config.N)
    length = h.shape[-2]
    if not config.grouped:
        y = layers.fc(model.bottleneck, h)
        y = tn.reshape(y, y.shape[:-1] + (1, config.H_i))
        masks = _mask_head(model, _run_separator(model, y))
        # [..., T, 1, X, N] -> [..., X, T, N]
        masks = tn.reshape(masks, masks.shape[:-3] + masks.shape[-2:])
        return tn.swapaxes(masks, -3, -2)

    spec = config.group_spec
    groups = gc.group_split(h, spec, axis=-1)
    if config.variant == model_config.GC3:
        blocks = codec.context_segment(groups, config.C)
        summary = codec.context_encode(model.codec, blocks)
        summary = _run_separator(model, summary)
        features = codec.context_decode(model.codec, summary, blocks, length)
    else:
        features = _run_separator(model, groups)
    masks = _mask_head(model, features)
    # [..., T, K', X, M] -> [..., X, T, K', M]
    lead = tuple(range(masks.ndim - 4))
    n = masks.ndim - 4
    masks = tn.transpose(masks, lead + (n + 2, n, n + 1, n + 3))
    return gc.group_merge(masks, spec, axis=-2)


def decode_waveforms(model, h, masks, length=None):
    '''Transposed convolution of every masked representation.'''
    h, masks = tn.as_tensor(h), tn.as_tensor(masks)
    if masks.shape[-2:] != h.shape[-2:]:
        raise DimensionError(op='decode_waveforms', lhs=h.shape,
                             rhs=masks.shape)
    expanded = tn.reshape(h, h.shape[:-2] + (1,) + h.shape[-2:])
    return decode_masked(model, masks * expanded, length)


def decode_masked(model, masked, length=None):
    '''Decode masked representations [..., T, N] to [..., L].'''
    masked = tn.swapaxes(tn.as_tensor(masked), -1, -2)
    out = tn.conv_transpose1d(masked, model.decoder,
                              stride=model.config.stride)
    out = tn.reshape(out, out.shape[:-2] + (out.shape[-1],))
    if length is not None:
        out = tn.slice_axis(out, 0, length, axis=-1)
    return out


def separate_with_masks(model, x):
    '''Estimates [..., X, L] together with the features and masks.'''
    x = tn.as_tensor(x)
    h = encode_waveform(model, x)
    masks = separate_features(model, h)
    return decode_waveforms(model, h, masks, x.shape[-1]), h, masks


def separate(model, x):
    return separate_with_masks(model, x)[0]

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
Context codec: learnable temporal down- and upsampling of grouped features.

Grouped sequences are time-major, [..., T, K', M]. Segmentation turns the
time axis into (R, C) blocks with 50% overlap; each real frame lands in
exactly two blocks.
'''

import math

from gc3separator.common.exception import DimensionError
from gc3separator.common.exception import InvalidConfigError
from gc3separator.elements import groupcomm as gc
from gc3separator.elements import layers
from gc3separator.elements.layers import Params
from gc3separator.elements.layers import ResidualBLSTMParams
from gc3separator import tensor as tn
from gc3separator.utils.gettextutils import _


def block_count(length, size):
    '''Blocks of `size` frames, hop size/2, needed to cover `length`.'''
    return int(math.ceil(length / float(size // 2))) + 1


def segment(x, size, axis=-2):
    '''Zero-pad and cut axis into 50%-overlapped blocks: (R, size).'''
    if size < 2 or size % 2:
        raise InvalidConfigError(field='block size', value=size,
                                 reason=_('an even size >= 2 is required'))
    x = tn.as_tensor(x)
    axis = axis % x.ndim
    length = x.shape[axis]
    if length < 1:
        raise DimensionError(op='segment', lhs=x.shape,
                             rhs='at least one frame on axis %d' % axis)
    hop = size // 2
    count = block_count(length, size)
    padded = tn.pad(x, hop, (count + 1) * hop - length - hop, axis=axis)
    return tn.frame(padded, size, hop, axis=axis)


def overlap_add_segments(blocks, length, axis=-3):
    '''Inverse of segment; axis names the block axis.'''
    blocks = tn.as_tensor(blocks)
    axis = axis % blocks.ndim
    size = blocks.shape[axis + 1]
    hop = size // 2
    if blocks.shape[axis] != block_count(length, size):
        raise DimensionError(op='overlap_add_segments', lhs=blocks.shape,
                             rhs='%d blocks for %d frames'
                             % (block_count(length, size), length))
    summed = tn.overlap_add(blocks, hop, axis=axis)
    # every real frame is covered by exactly two blocks
    return tn.slice_axis(summed, hop, hop + length, axis=axis) * 0.5


class CodecLayerParams(Params):

    def __init__(self, groupcomm, blstm):
        self.groupcomm = groupcomm
        self.blstm = blstm

    @classmethod
    def create(cls, rng, kind, M, H_o, heads=gc.MHSA_HEADS,
               mhsa_hidden=None):
        return cls(gc.create_groupcomm(rng, kind, M, H_o, heads,
                                       mhsa_hidden),
                   ResidualBLSTMParams.create(rng, M, H_o))


class ContextCodecParams(Params):
    '''Encoder and decoder stacks; they do not share weights.'''

    def __init__(self, context, encoder_layers, decoder_layers):
        self.context = context
        self.encoder_layers = encoder_layers
        self.decoder_layers = decoder_layers

    @classmethod
    def create(cls, rng, kind, M, H_o, L_c, C, heads=gc.MHSA_HEADS,
               mhsa_hidden=None):
        if L_c < 1:
            raise InvalidConfigError(field='L_c', value=L_c,
                                     reason=_('at least one layer'))

        def stack():
            return [CodecLayerParams.create(rng, kind, M, H_o, heads,
                                            mhsa_hidden)
                    for _i in range(L_c)]

        encoder = stack()
        return cls(C, encoder, stack())

    @property
    def hop(self):
        return self.context // 2


def _codec_layer(params, blocks):
    # blocks: [..., R, C, K', M]
    mixed = gc.groupcomm(params.groupcomm, blocks)
    per_group = tn.swapaxes(mixed, -3, -2)
    return tn.swapaxes(layers.residual_blstm(params.blstm, per_group),
                       -3, -2)


def context_segment(h, C, axis=-3):
    '''Cut the time axis of h into R blocks of C frames.'''
    return segment(h, C, axis=axis)


def context_encode(params, blocks, spec=None):
    '''Mean-pool every refined block into one summary vector.

    Blocks are [..., R, C, K', M] and the summary [..., R, K', M].

    With a GroupSpec, blocks arrive ungrouped as [..., R, C, N] and the
    summary leaves as [..., R, N].
    '''
    if spec is not None:
        blocks = gc.group_split(blocks, spec, axis=-1)
    for layer in params.encoder_layers:
        blocks = _codec_layer(layer, blocks)
    summary = tn.reduce('mean', blocks, axis=-3)
    if spec is not None:
        summary = gc.group_merge(summary, spec, axis=-2)
    return summary


def context_decode(params, summary, blocks, length, spec=None):
    '''Add each summary to its block, refine, overlap-add back to length.

    summary is [..., R, K', M], blocks [..., R, C, K', M]; the result is
    [..., length, K', M]. The skip input is the raw segmented features.
    '''
    if spec is not None:
        summary = gc.group_split(summary, spec, axis=-1)
        blocks = gc.group_split(blocks, spec, axis=-1)
    summary = tn.as_tensor(summary)
    blocks = tn.as_tensor(blocks)
    if summary.shape[-3] != blocks.shape[-4]:
        raise DimensionError(op='context_decode', lhs=summary.shape,
                             rhs=blocks.shape)
    expanded = tn.reshape(summary, summary.shape[:-2] + (1,)
                          + summary.shape[-2:])
    blocks = blocks + expanded
    for layer in params.decoder_layers:
        blocks = _codec_layer(layer, blocks)
    out = overlap_add_segments(blocks, length, axis=-4)
    if spec is not None:
        out = gc.group_merge(out, spec, axis=-2)
    return out

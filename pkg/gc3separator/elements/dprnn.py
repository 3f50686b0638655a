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
Dual-path RNN separator.

Sequences are [..., S, K', W]; the baseline uses K' = 1 and no GroupComm.
Each block optionally starts with a GroupComm module, then runs an
intra-block and an inter-block residual BLSTM whose weights are shared by
all groups.
'''

from gc3separator.common.exception import DimensionError
from gc3separator.common.exception import InvalidConfigError
from gc3separator.elements import codec
from gc3separator.elements import groupcomm as gc
from gc3separator.elements import layers
from gc3separator.elements.layers import Params
from gc3separator.elements.layers import ResidualBLSTMParams
from gc3separator import tensor as tn
from gc3separator.utils.gettextutils import _

# [..., blocks, B, K', W] <-> [..., B, K', blocks, W]
_INTER = (1, 2, 0, 3)
_INTER_BACK = (2, 0, 1, 3)


class DPRNNBlockParams(Params):

    def __init__(self, intra, inter, groupcomm=None):
        self.groupcomm = groupcomm
        self.intra = intra
        self.inter = inter

    @classmethod
    def create(cls, rng, width, H_o, groupcomm=None, heads=gc.MHSA_HEADS,
               mhsa_hidden=None):
        comm = None
        if groupcomm:
            comm = gc.create_groupcomm(rng, groupcomm, width, H_o, heads,
                                       mhsa_hidden)
        intra = ResidualBLSTMParams.create(rng, width, H_o)
        return cls(intra, ResidualBLSTMParams.create(rng, width, H_o), comm)

    @property
    def width(self):
        return self.intra.width


class DPRNNParams(Params):

    def __init__(self, segment_size, blocks):
        self.segment_size = segment_size
        self.blocks = blocks

    @classmethod
    def create(cls, rng, width, H_o, L_s, B, groupcomm=None,
               heads=gc.MHSA_HEADS, mhsa_hidden=None):
        if L_s < 1:
            raise InvalidConfigError(field='L_s', value=L_s,
                                     reason=_('at least one block'))
        if B < 2 or B % 2:
            raise InvalidConfigError(field='B', value=B,
                                     reason=_('the value must be even'))
        return cls(B, [DPRNNBlockParams.create(rng, width, H_o, groupcomm,
                                               heads, mhsa_hidden)
                       for _i in range(L_s)])


def dprnn_segment(x, B, axis=-3):
    '''50%-overlapped blocks of B frames, same scheme as the codec.'''
    return codec.segment(x, B, axis=axis)


def _permute_tail(x, tail):
    lead = tuple(range(x.ndim - 4))
    return tn.transpose(x, lead + tuple(x.ndim - 4 + i for i in tail))


def dprnn_block(params, blocks):
    '''One dual-path block on [..., blocks, B, K', W], shape preserving.'''
    blocks = tn.as_tensor(blocks)
    if blocks.ndim < 4 or blocks.shape[-1] != params.width:
        raise DimensionError(op='dprnn_block', lhs=blocks.shape,
                             rhs='[..., blocks, B, K\', %d]' % params.width)
    if params.groupcomm is not None:
        blocks = gc.groupcomm(params.groupcomm, blocks)
    intra = tn.swapaxes(blocks, -3, -2)
    intra = layers.residual_blstm(params.intra, intra)
    blocks = tn.swapaxes(intra, -3, -2)
    inter = _permute_tail(blocks, _INTER)
    inter = layers.residual_blstm(params.inter, inter)
    return _permute_tail(inter, _INTER_BACK)


def dprnn_forward(params, x):
    '''Segment, run every block, overlap-add back to [..., S, K', W].'''
    x = tn.as_tensor(x)
    if x.ndim < 3:
        raise DimensionError(op='dprnn_forward', lhs=x.shape,
                             rhs='[..., S, K\', W]')
    length = x.shape[-3]
    blocks = dprnn_segment(x, params.segment_size)
    for block in params.blocks:
        blocks = dprnn_block(block, blocks)
    return codec.overlap_add_segments(blocks, length, axis=-4)

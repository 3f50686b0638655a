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
Temporal convolutional separator: two stacks of six dilated blocks.
'''

from gc3separator.common.exception import DimensionError
from gc3separator.elements import groupcomm as gc
from gc3separator.elements import layers
from gc3separator.elements.layers import DSConvParams
from gc3separator.elements.layers import Params
from gc3separator import tensor as tn

TCN_STACKS = 2
TCN_BLOCKS = 6
DILATIONS = tuple(2 ** i for i in range(TCN_BLOCKS)) * TCN_STACKS


def receptive_field(kernel=layers.TCN_KERNEL, dilations=DILATIONS):
    return 1 + (kernel - 1) * sum(dilations)


class TCNBlockParams(Params):

    def __init__(self, conv, groupcomm=None):
        self.groupcomm = groupcomm
        self.conv = conv

    @classmethod
    def create(cls, rng, width, hidden, H_o=None, groupcomm=None, skip=True,
               heads=gc.MHSA_HEADS, mhsa_hidden=None):
        comm = None
        if groupcomm:
            comm = gc.create_groupcomm(rng, groupcomm, width, H_o, heads,
                                       mhsa_hidden)
        return cls(DSConvParams.create(rng, width, hidden, skip), comm)


class TCNParams(Params):

    def __init__(self, blocks):
        self.blocks = blocks

    @classmethod
    def create(cls, rng, width, hidden, H_o=None, groupcomm=None, skip=True,
               heads=gc.MHSA_HEADS, mhsa_hidden=None):
        return cls([TCNBlockParams.create(rng, width, hidden, H_o, groupcomm,
                                          skip, heads, mhsa_hidden)
                    for _d in DILATIONS])

    @property
    def width(self):
        return self.blocks[0].conv.width


def tcn_forward(params, x):
    '''[..., S, K', W] -> same shape: residual stream plus summed skips.'''
    x = tn.as_tensor(x)
    if x.ndim < 3 or x.shape[-1] != params.width:
        raise DimensionError(op='tcn_forward', lhs=x.shape,
                             rhs='[..., S, K\', %d]' % params.width)
    # convolutions run over axis -2, so keep time there between blocks
    out = tn.swapaxes(x, -3, -2)
    skips = None
    for block, dilation in zip(params.blocks, DILATIONS):
        if block.groupcomm is not None:
            out = tn.swapaxes(gc.groupcomm(block.groupcomm,
                                           tn.swapaxes(out, -3, -2)),
                              -3, -2)
        out, skip = layers.ds_conv_block(block.conv, out, dilation)
        if skip is not None:
            skips = skip if skips is None else skips + skip
    if skips is not None:
        out = out + skips
    return tn.swapaxes(out, -3, -2)

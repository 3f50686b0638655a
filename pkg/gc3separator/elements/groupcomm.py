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
Feature groups and the modules that exchange information between them.

Groups are laid out as [..., K', M]: the group axis is -2 and the feature
axis -1. Leading axes (time, batch) are independent, so a module applies
frame by frame with one shared parameter set for all groups.
'''

import numpy as np

from gc3separator.common.exception import DimensionError
from gc3separator.common.exception import InvalidConfigError
from gc3separator.elements import layers
from gc3separator.elements.layers import LinearParams
from gc3separator.elements.layers import Params
from gc3separator.elements.layers import PReLUParams
from gc3separator.elements.layers import ResidualBLSTMParams
from gc3separator import tensor as tn
from gc3separator.tensor import parameter
from gc3separator.utils.gettextutils import _

GROUPCOMM_KINDS = (BLSTM, TAC, MHSA) = ('blstm', 'tac', 'mhsa')
OVERLAP_RATIOS = (0.0, 0.25, 0.5)
MHSA_HEADS = 4


class GroupSpec(object):
    '''K groups of width M tiling N features, optionally overlapped.'''

    def __init__(self, K, M, N, overlap_ratio=0.0):
        self.K = K
        self.M = M
        self.N = N
        self.overlap_ratio = overlap_ratio
        self.hop = M if not overlap_ratio else \
            int(round(M * (1.0 - overlap_ratio)))
        self.validate()

    def validate(self):
        if self.overlap_ratio not in OVERLAP_RATIOS:
            raise InvalidConfigError(
                field='group_overlap', value=self.overlap_ratio,
                reason=_('expected one of %s') % (OVERLAP_RATIOS,))
        if self.M < 1 or self.hop < 1:
            raise InvalidConfigError(field='M', value=self.M,
                                     reason=_('the group hop must be >= 1'))
        if not self.overlap_ratio and self.K * self.M != self.N:
            raise InvalidConfigError(
                field='M', value=self.M,
                reason=_('groups without overlap need N = K * M '
                         '(N=%(N)d, K=%(K)d)') % {'N': self.N, 'K': self.K})
        if self.N < self.M or (self.N - self.M) % self.hop:
            raise InvalidConfigError(
                field='group_overlap', value=self.overlap_ratio,
                reason=_('groups of width %(M)d with hop %(hop)d do not '
                         'tile %(N)d features')
                % {'M': self.M, 'hop': self.hop, 'N': self.N})

    @property
    def count(self):
        '''Number of groups K'.'''
        return (self.N - self.M) // self.hop + 1

    def coverage(self):
        '''How many groups cover each feature index.'''
        counts = np.zeros(self.N)
        for i in range(self.count):
            counts[i * self.hop:i * self.hop + self.M] += 1.0
        return counts

    def __eq__(self, other):
        return isinstance(other, GroupSpec) and \
            (self.M, self.N, self.hop) == (other.M, other.N, other.hop)

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'GroupSpec(K=%d, M=%d, N=%d, overlap=%s)' % (
            self.K, self.M, self.N, self.overlap_ratio)


def group_split(h, spec, axis=0):
    '''Replace the N-wide axis by (K', M).'''
    h = tn.as_tensor(h)
    axis = axis % h.ndim
    if h.shape[axis] != spec.N:
        raise DimensionError(op='group_split', lhs=h.shape,
                             rhs='%d features on axis %d' % (spec.N, axis))
    if spec.hop == spec.M:
        shape = h.shape[:axis] + (spec.count, spec.M) + h.shape[axis + 1:]
        return tn.reshape(h, shape)
    return tn.frame(h, spec.M, spec.hop, axis=axis)


def group_merge(groups, spec, axis=0):
    '''Inverse of group_split; axis names the group axis.

    Overlapping groups are summed and divided by each feature's coverage.
    '''
    groups = tn.as_tensor(groups)
    axis = axis % groups.ndim
    if groups.shape[axis:axis + 2] != (spec.count, spec.M):
        raise DimensionError(op='group_merge', lhs=groups.shape, rhs=spec)
    if spec.hop == spec.M:
        shape = groups.shape[:axis] + (spec.N,) + groups.shape[axis + 2:]
        return tn.reshape(groups, shape)
    merged = tn.overlap_add(groups, spec.hop, axis=axis)
    trailing = (1,) * (groups.ndim - axis - 2)
    return merged / spec.coverage().reshape((spec.N,) + trailing)


class BLSTMCommParams(Params):
    kind = BLSTM

    def __init__(self, unit):
        self.unit = unit

    @classmethod
    def create(cls, rng, M, H_o):
        return cls(ResidualBLSTMParams.create(rng, M, H_o))

    @property
    def width(self):
        return self.unit.width


class TACParams(Params):
    '''Transform (M -> D), average (D -> D) and concatenate (2D -> M).'''
    kind = TAC

    def __init__(self, transform, average, concat, transform_act,
                 average_act, concat_act):
        self.transform = transform
        self.average = average
        self.concat = concat
        self.transform_act = transform_act
        self.average_act = average_act
        self.concat_act = concat_act

    @classmethod
    def create(cls, rng, M, H_o):
        hidden = 3 * H_o
        return cls(LinearParams.create(rng, M, hidden),
                   LinearParams.create(rng, hidden, hidden),
                   LinearParams.create(rng, 2 * hidden, M),
                   PReLUParams.create(), PReLUParams.create(),
                   PReLUParams.create())

    @property
    def width(self):
        return self.transform.n_in

    @property
    def hidden(self):
        return self.transform.n_out


def mhsa_hidden_width(M, H_o, heads=MHSA_HEADS):
    '''Post-attention width closest in size to the BLSTM module.'''
    target = 2 * (4 * H_o * (M + H_o) + 8 * H_o) + 2 * H_o * M + 3 * M
    fixed = 4 * heads * M * M + 1 + M
    return max(1, int(round((target - fixed) / float(2 * M + 1))))


class MHSAParams(Params):
    '''Per-head query/key/value maps (no bias), output map, post FC pair.'''
    kind = MHSA

    def __init__(self, query, key, value, output, hidden, hidden_act,
                 project):
        self.query = query
        self.key = key
        self.value = value
        self.output = output
        self.hidden = hidden
        self.hidden_act = hidden_act
        self.project = project

    @classmethod
    def create(cls, rng, M, H_o, heads=MHSA_HEADS, hidden=None):
        if hidden is None:
            hidden = mhsa_hidden_width(M, H_o, heads)
        bound = 1.0 / np.sqrt(M)

        def qkv():
            return parameter(rng.uniform(-bound, bound, (heads, M, M)))

        return cls(qkv(), qkv(), qkv(),
                   LinearParams.create(rng, heads * M, M, bias=False),
                   LinearParams.create(rng, M, hidden),
                   PReLUParams.create(),
                   LinearParams.create(rng, hidden, M))

    @property
    def heads(self):
        return self.query.shape[0]

    @property
    def width(self):
        return self.query.shape[1]


def create_groupcomm(rng, kind, M, H_o, heads=MHSA_HEADS, mhsa_hidden=None):
    if kind == BLSTM:
        return BLSTMCommParams.create(rng, M, H_o)
    if kind == TAC:
        return TACParams.create(rng, M, H_o)
    if kind == MHSA:
        return MHSAParams.create(rng, M, H_o, heads, mhsa_hidden)
    raise InvalidConfigError(field='groupcomm', value=kind,
                             reason=_('expected one of %s')
                             % ', '.join(GROUPCOMM_KINDS))


def _check(op, params, groups):
    groups = tn.as_tensor(groups)
    if groups.ndim < 2 or groups.shape[-1] != params.width:
        raise DimensionError(op=op, lhs=groups.shape,
                             rhs='[..., K\', %d]' % params.width)
    return groups


def groupcomm_blstm(params, groups):
    '''Residual BLSTM across the group axis, in ascending group order.'''
    groups = _check('groupcomm_blstm', params, groups)
    return layers.residual_blstm(params.unit, groups)


def groupcomm_tac(params, groups):
    groups = _check('groupcomm_tac', params, groups)
    hidden = params.hidden
    f = layers.prelu(params.transform_act, layers.fc(params.transform,
                                                     groups))
    pooled = tn.reduce('mean', f, axis=-2, keepdims=True)
    f_avg = layers.prelu(params.average_act, layers.fc(params.average,
                                                       pooled))
    weight = params.concat.weight
    own = LinearParams(tn.slice_axis(weight, 0, hidden, axis=1),
                       params.concat.bias)
    shared = LinearParams(tn.slice_axis(weight, hidden, 2 * hidden, axis=1))
    joined = layers.fc(own, f) + layers.fc(shared, f_avg)
    return layers.prelu(params.concat_act, joined) + groups


def mhsa_attention(params, groups):
    '''Attention weights [..., heads, K', K'] and values per head.'''
    groups = _check('groupcomm_mhsa', params, groups)
    stacked = tn.reshape(groups, groups.shape[:-2] + (1,) + groups.shape[-2:])
    query = tn.matmul(stacked, params.query)
    key = tn.matmul(stacked, params.key)
    value = tn.matmul(stacked, params.value)
    scores = tn.matmul(query, tn.swapaxes(key, -1, -2))
    weights = tn.softmax(scores / np.sqrt(params.query.shape[-1]), axis=-1)
    return weights, value


def groupcomm_mhsa(params, groups):
    groups = tn.as_tensor(groups)
    weights, value = mhsa_attention(params, groups)
    heads = tn.swapaxes(tn.matmul(weights, value), -3, -2)
    joined = tn.reshape(heads, groups.shape[:-1] + (-1,))
    attended = layers.fc(params.output, joined)
    hidden = layers.prelu(params.hidden_act, layers.fc(params.hidden,
                                                       attended))
    return layers.fc(params.project, hidden) + groups


_DISPATCH = {BLSTM: groupcomm_blstm, TAC: groupcomm_tac, MHSA: groupcomm_mhsa}


def groupcomm(params, groups):
    '''Apply whichever communication module params describes.'''
    return _DISPATCH[params.kind](params, groups)

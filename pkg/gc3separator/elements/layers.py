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
Parameterised building blocks.

Every layer works on the last axis as its feature axis; sequence layers
read the time axis at position -2, so inputs look like [..., T, features].
'''

import numpy as np

from gc3separator.common.exception import DimensionError
from gc3separator import tensor as tn
from gc3separator.tensor import parameter

LAYER_NORM_EPS = 1e-8
PRELU_INIT = 0.25
TCN_KERNEL = 3


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _check_width(op, x, width):
    if x.shape[-1] != width:
        raise DimensionError(op=op, lhs=x.shape, rhs='[..., %d]' % width)


class Params(object):
    '''Record of named trainable tensors.

    Attributes holding a requires_grad Tensor, another record or a list of
    records are parameters; their names follow attribute assignment order.
    '''

    def named_parameters(self, prefix=''):
        for key, value in vars(self).items():
            if isinstance(value, tn.Tensor):
                if value.requires_grad:
                    yield prefix + key, value
            elif isinstance(value, Params):
                for item in value.named_parameters(prefix + key + '.'):
                    yield item
            elif isinstance(value, (list, tuple)):
                for i, child in enumerate(value):
                    if isinstance(child, Params):
                        for item in child.named_parameters(
                                '%s%s.%d.' % (prefix, key, i)):
                            yield item

    def parameters(self):
        return [t for _name, t in self.named_parameters()]

    def count(self):
        return sum(t.size for t in self.parameters())

    def fill(self, value):
        for t in self.parameters():
            t.data = np.full(t.shape, float(value))
        return self


class LinearParams(Params):

    def __init__(self, weight, bias=None):
        self.weight = weight
        self.bias = bias

    @classmethod
    def create(cls, rng, n_in, n_out, bias=True):
        weight = parameter(_uniform(rng, (n_out, n_in), n_in))
        if bias:
            return cls(weight, parameter(_uniform(rng, (n_out,), n_in)))
        return cls(weight)

    @property
    def n_in(self):
        return self.weight.shape[1]

    @property
    def n_out(self):
        return self.weight.shape[0]


class PReLUParams(Params):

    def __init__(self, slope):
        self.slope = slope

    @classmethod
    def create(cls, slope=PRELU_INIT):
        return cls(parameter(slope))


class LayerNormParams(Params):

    def __init__(self, gain, bias, eps=LAYER_NORM_EPS):
        self.gain = gain
        self.bias = bias
        self.eps = eps

    @classmethod
    def create(cls, dim):
        return cls(parameter(np.ones(dim)), parameter(np.zeros(dim)))


class LSTMParams(Params):
    '''Gate order along the 4H axis: input, forget, cell, output.'''

    def __init__(self, input_weights, recurrent_weights, bias,
                 recurrent_bias):
        self.input_weights = input_weights
        self.recurrent_weights = recurrent_weights
        self.bias = bias
        self.recurrent_bias = recurrent_bias

    @classmethod
    def create(cls, rng, n_in, hidden):
        bias = _uniform(rng, (4 * hidden,), hidden)
        bias[hidden:2 * hidden] = 1.0
        return cls(parameter(_uniform(rng, (4 * hidden, n_in), hidden)),
                   parameter(_uniform(rng, (4 * hidden, hidden), hidden)),
                   parameter(bias),
                   parameter(np.zeros(4 * hidden)))

    @property
    def hidden(self):
        return self.recurrent_weights.shape[1]

    @property
    def n_in(self):
        return self.input_weights.shape[1]


class ResidualBLSTMParams(Params):

    def __init__(self, forward_lstm, backward_lstm, projection, norm):
        self.forward_lstm = forward_lstm
        self.backward_lstm = backward_lstm
        self.projection = projection
        self.norm = norm

    @classmethod
    def create(cls, rng, h_in, h_out):
        return cls(LSTMParams.create(rng, h_in, h_out),
                   LSTMParams.create(rng, h_in, h_out),
                   LinearParams.create(rng, 2 * h_out, h_in),
                   LayerNormParams.create(h_in))

    @property
    def width(self):
        return self.projection.n_out


class DSConvParams(Params):
    '''Depthwise-separable convolution block with an optional skip head.'''

    def __init__(self, expand, prelu_in, norm_in, depthwise, depthwise_bias,
                 prelu_out, norm_out, project, skip=None):
        self.expand = expand
        self.prelu_in = prelu_in
        self.norm_in = norm_in
        self.depthwise = depthwise
        self.depthwise_bias = depthwise_bias
        self.prelu_out = prelu_out
        self.norm_out = norm_out
        self.project = project
        self.skip = skip

    @classmethod
    def create(cls, rng, width, hidden, skip=True):
        return cls(
            LinearParams.create(rng, width, hidden),
            PReLUParams.create(),
            LayerNormParams.create(hidden),
            parameter(_uniform(rng, (hidden, TCN_KERNEL), TCN_KERNEL)),
            parameter(_uniform(rng, (hidden,), TCN_KERNEL)),
            PReLUParams.create(),
            LayerNormParams.create(hidden),
            LinearParams.create(rng, hidden, width),
            LinearParams.create(rng, hidden, width) if skip else None)

    @property
    def width(self):
        return self.expand.n_in


def fc(params, x):
    x = tn.as_tensor(x)
    _check_width('fc', x, params.n_in)
    flat = tn.reshape(x, (-1, params.n_in))
    y = tn.matmul(flat, tn.transpose(params.weight, (1, 0)))
    if params.bias is not None:
        y = y + params.bias
    return tn.reshape(y, x.shape[:-1] + (params.n_out,))


def prelu(params, x):
    positive = tn.relu(x)
    return positive + params.slope * (x - positive)


def layer_norm(params, x):
    x = tn.as_tensor(x)
    _check_width('layer_norm', x, params.gain.shape[0])
    centred = x - tn.reduce('mean', x, axis=-1, keepdims=True)
    variance = tn.reduce('mean', tn.square(centred), axis=-1, keepdims=True)
    normed = centred / tn.sqrt(variance + params.eps)
    return normed * params.gain + params.bias


def lstm(params, x, reverse=False):
    '''Unidirectional LSTM over axis -2 from zero initial states.'''
    x = tn.as_tensor(x)
    hidden = params.hidden
    gates_in = fc(LinearParams(params.input_weights,
                               params.bias + params.recurrent_bias), x)
    recurrent = tn.transpose(params.recurrent_weights, (1, 0))
    batch = x.shape[:-2]
    h = tn.Tensor(np.zeros(batch + (hidden,)))
    c = tn.Tensor(np.zeros(batch + (hidden,)))
    steps = range(x.shape[-2])
    outputs = []
    for t in (reversed(steps) if reverse else steps):
        z = tn.select(gates_in, t, axis=-2) + _recur(h, recurrent, hidden)
        i = tn.sigmoid(tn.slice_axis(z, 0, hidden))
        f = tn.sigmoid(tn.slice_axis(z, hidden, 2 * hidden))
        g = tn.tanh(tn.slice_axis(z, 2 * hidden, 3 * hidden))
        o = tn.sigmoid(tn.slice_axis(z, 3 * hidden, 4 * hidden))
        c = f * c + i * g
        h = o * tn.tanh(c)
        outputs.append(h)
    if reverse:
        outputs.reverse()
    return tn.stack(outputs, axis=-2)


def _recur(h, recurrent, hidden):
    flat = tn.reshape(h, (-1, hidden))
    return tn.reshape(tn.matmul(flat, recurrent),
                      h.shape[:-1] + (4 * hidden,))


def blstm(forward, backward, x):
    x = tn.as_tensor(x)
    if x.ndim < 2 or x.shape[-2] < 1:
        raise DimensionError(op='blstm', lhs=x.shape, rhs='[..., T, I]')
    _check_width('blstm', x, forward.n_in)
    return tn.concat([lstm(forward, x), lstm(backward, x, reverse=True)],
                     axis=-1)


def residual_blstm(params, x):
    '''x + LayerNorm(Linear(BLSTM(x))), shape preserving.'''
    x = tn.as_tensor(x)
    _check_width('residual_blstm', x, params.width)
    state = blstm(params.forward_lstm, params.backward_lstm, x)
    return x + layer_norm(params.norm, fc(params.projection, state))


def depthwise_conv(kernel, bias, x, dilation):
    '''Per-channel dilated convolution over axis -2, length preserving.'''
    length = x.shape[-2]
    padded = tn.pad(x, dilation, dilation, axis=-2)
    out = bias
    for j in range(kernel.shape[1]):
        tap = tn.slice_axis(padded, j * dilation, j * dilation + length,
                            axis=-2)
        out = out + tap * tn.select(kernel, j, axis=1)
    return out


def ds_conv_block(params, x, dilation):
    '''Returns (x + residual branch, skip branch or None).'''
    x = tn.as_tensor(x)
    if dilation < 1:
        raise DimensionError(op='ds_conv_block', lhs=x.shape,
                             rhs='dilation %s' % dilation)
    _check_width('ds_conv_block', x, params.width)
    y = layer_norm(params.norm_in, prelu(params.prelu_in,
                                         fc(params.expand, x)))
    y = depthwise_conv(params.depthwise, params.depthwise_bias, y, dilation)
    y = layer_norm(params.norm_out, prelu(params.prelu_out, y))
    skip = fc(params.skip, y) if params.skip is not None else None
    return x + fc(params.project, y), skip

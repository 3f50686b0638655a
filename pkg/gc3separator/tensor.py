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
Dense double precision tensors with tape based reverse-mode gradients.

Every operation returns a new Tensor. While a Tape is active and at least
one operand requires gradients, the operation is appended to that tape
together with a closure mapping the output gradient to operand gradients.
backward() replays the tape in exact reverse order.

Broadcasting: binary pointwise operations follow numpy broadcasting and
sum the gradient of a broadcast operand back to its own shape. matmul
multiplies the last two axes and broadcasts the leading ones.
'''

import collections
import contextlib
import logging
import threading

import numpy as np

from gc3separator.common.exception import DimensionError
from gc3separator.common.exception import EmptyInputError
from gc3separator.common.exception import EmptyTapeError
from gc3separator.common.exception import InputTooShortError
from gc3separator.common.exception import InvalidConfigError
from gc3separator.common.exception import NonScalarLossError
from gc3separator.utils.gettextutils import _

LOG = logging.getLogger('gc3')

Operation = collections.namedtuple('Operation',
                                   ['name', 'inputs', 'output', 'backward'])

_state = threading.local()


def _tape_stack():
    if not hasattr(_state, 'tapes'):
        _state.tapes = []
    return _state.tapes


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor(object):
    '''Dense real array with an optional gradient.'''

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return 'Tensor(shape=%s%s)' % (
            self.shape, ', requires_grad=True' if self.requires_grad else '')

    def __add__(self, other):
        return pointwise('add', self, other)

    def __radd__(self, other):
        return pointwise('add', other, self)

    def __sub__(self, other):
        return pointwise('sub', self, other)

    def __rsub__(self, other):
        return pointwise('sub', other, self)

    def __mul__(self, other):
        return pointwise('mul', self, other)

    def __rmul__(self, other):
        return pointwise('mul', other, self)

    def __truediv__(self, other):
        return pointwise('div', self, other)

    def __neg__(self):
        return pointwise('mul', self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(data, name=None):
    return Tensor(data, requires_grad=True, name=name)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Tape(object):
    '''Ordered record of executed operations.'''

    def __init__(self):
        self.operations = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc_value, tb):
        _tape_stack().pop()
        return False

    def __len__(self):
        return len(self.operations)

    def record(self, name, inputs, output, backward_fn):
        self.operations.append(Operation(name, inputs, output, backward_fn))
        output._tape = self


@contextlib.contextmanager
def no_record():
    '''Evaluate without recording, even inside an active tape.'''
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


def _result(name, data, inputs, backward_fn):
    out = Tensor(data)
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(name, inputs, out, backward_fn)
    return out


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape)
                 if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_check(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op=op, lhs=a.shape, rhs=b.shape)


def _norm_axis(axis, ndim):
    if axis < -ndim or axis >= ndim:
        raise DimensionError(op='axis %s' % axis, lhs=ndim, rhs='axes')
    return axis % ndim


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# name -> (forward(x), backward(x, y, g))
UNARY_OPS = {
    'sigmoid': (_sigmoid, lambda x, y, g: g * y * (1.0 - y)),
    'tanh': (np.tanh, lambda x, y, g: g * (1.0 - y * y)),
    'relu': (lambda x: np.maximum(x, 0.0), lambda x, y, g: g * (x > 0)),
    'exp': (np.exp, lambda x, y, g: g * y),
    'log': (np.log, lambda x, y, g: g / x),
    'sqrt': (np.sqrt, lambda x, y, g: g * 0.5 / y),
    'square': (np.square, lambda x, y, g: 2.0 * x * g),
}

# name -> (forward(a, b), backward(a, b, y, g) -> (ga, gb))
BINARY_OPS = {
    'add': (np.add, lambda a, b, y, g: (g, g)),
    'sub': (np.subtract, lambda a, b, y, g: (g, -g)),
    'mul': (np.multiply, lambda a, b, y, g: (g * b, g * a)),
    'div': (np.divide, lambda a, b, y, g: (g / b, -g * y / b)),
}


def pointwise(op, *operands):
    '''Apply an elementwise operation from UNARY_OPS or BINARY_OPS.'''
    if op in UNARY_OPS and len(operands) == 1:
        x = as_tensor(operands[0])
        forward, derivative = UNARY_OPS[op]
        y = forward(x.data)

        def grad(g):
            return (derivative(x.data, y, g),)

        return _result(op, y, (x,), grad)

    if op in BINARY_OPS and len(operands) == 2:
        a, b = as_tensor(operands[0]), as_tensor(operands[1])
        _broadcast_check(op, a, b)
        forward, derivative = BINARY_OPS[op]
        y = forward(a.data, b.data)

        def grad(g):
            ga, gb = derivative(a.data, b.data, y, g)
            return (_unbroadcast(ga, a.shape) if a.requires_grad else None,
                    _unbroadcast(gb, b.shape) if b.requires_grad else None)

        return _result(op, y, (a, b), grad)

    raise ValueError(_('Unknown pointwise operation "%(op)s" with '
                       '%(count)d operand(s).')
                     % {'op': op, 'count': len(operands)})


def add(a, b):
    return pointwise('add', a, b)


def sub(a, b):
    return pointwise('sub', a, b)


def mul(a, b):
    return pointwise('mul', a, b)


def div(a, b):
    return pointwise('div', a, b)


def sigmoid(x):
    return pointwise('sigmoid', x)


def tanh(x):
    return pointwise('tanh', x)


def relu(x):
    return pointwise('relu', x)


def exp(x):
    return pointwise('exp', x)


def log(x):
    return pointwise('log', x)


def sqrt(x):
    return pointwise('sqrt', x)


def square(x):
    return pointwise('square', x)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(op='matmul', lhs=a.shape, rhs=b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(op='matmul', lhs=a.shape, rhs=b.shape)
    y = np.matmul(a.data, b.data)

    def grad(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)),
                              a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g),
                              b.shape)
        return ga, gb

    return _result('matmul', y, (a, b), grad)


def _windows(x, width, stride):
    # [..., T] -> [..., (T - width) // stride + 1, width], read-only view
    view = np.lib.stride_tricks.sliding_window_view(x, width, axis=-1)
    return view[..., ::stride, :]


def _scatter(frames, stride, length):
    # adjoint of _windows: [..., T', W] -> [..., length]
    count, width = frames.shape[-2], frames.shape[-1]
    out = np.zeros(frames.shape[:-2] + (length,))
    last = stride * (count - 1) + 1
    for w in range(width):
        out[..., w:w + last:stride] += frames[..., w]
    return out


def _flat_batch(array, keep):
    return array.reshape((-1,) + array.shape[array.ndim - keep:])


def _check_stride(stride):
    if not isinstance(stride, int) or stride < 1:
        raise InvalidConfigError(field='stride', value=stride,
                                 reason=_('a positive integer is required'))


def conv1d(x, kernels, stride=1):
    '''Valid cross-correlation of [..., Cin, T] with [Cout, Cin, W].'''
    x, kernels = as_tensor(x), as_tensor(kernels)
    _check_stride(stride)
    if x.ndim < 2 or kernels.ndim != 3 or x.shape[-2] != kernels.shape[1]:
        raise DimensionError(op='conv1d', lhs=x.shape, rhs=kernels.shape)
    length, width = x.shape[-1], kernels.shape[-1]
    if length < width:
        raise InputTooShortError(what='conv1d', required=width,
                                 length=length)
    frames = _windows(x.data, width, stride)
    flat = _flat_batch(frames, 3)
    y = np.einsum('bctw,ocw->bot', flat, kernels.data)
    y = y.reshape(x.shape[:-2] + y.shape[1:])

    def grad(g):
        gflat = _flat_batch(g, 2)
        gx = gk = None
        if x.requires_grad:
            gframes = np.einsum('bot,ocw->bctw', gflat, kernels.data)
            gx = _scatter(gframes, stride, length).reshape(x.shape)
        if kernels.requires_grad:
            gk = np.einsum('bot,bctw->ocw', gflat, flat)
        return gx, gk

    return _result('conv1d', y, (x, kernels), grad)


def conv_transpose1d(x, kernels, stride=1):
    '''Adjoint of conv1d: [..., Cout, T'] -> [..., Cin, (T'-1)*stride + W].

    The kernel layout is the conv1d one, [Cout, Cin, W].
    '''
    x, kernels = as_tensor(x), as_tensor(kernels)
    _check_stride(stride)
    if x.size == 0 or x.ndim < 2 or x.shape[-1] == 0:
        raise EmptyInputError(what='conv_transpose1d')
    if kernels.ndim != 3 or x.shape[-2] != kernels.shape[0]:
        raise DimensionError(op='conv_transpose1d', lhs=x.shape,
                             rhs=kernels.shape)
    count, width = x.shape[-1], kernels.shape[-1]
    length = (count - 1) * stride + width
    xflat = _flat_batch(x.data, 2)
    frames = np.einsum('bot,ocw->bctw', xflat, kernels.data)
    y = _scatter(frames, stride, length)
    y = y.reshape(x.shape[:-2] + y.shape[1:])

    def grad(g):
        gframes = _flat_batch(_windows(g, width, stride), 3)
        gx = gk = None
        if x.requires_grad:
            gx = np.einsum('bctw,ocw->bot', gframes,
                           kernels.data).reshape(x.shape)
        if kernels.requires_grad:
            gk = np.einsum('bot,bctw->ocw', xflat, gframes)
        return gx, gk

    return _result('conv_transpose1d', y, (x, kernels), grad)


def softmax(x, axis=-1):
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def grad(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _result('softmax', y, (x,), grad)


REDUCTIONS = (MEAN, SUM) = ('mean', 'sum')


def reduce(op, x, axis=None, keepdims=False):
    '''Sum or mean over one axis, a tuple of axes, or everything.'''
    if op not in REDUCTIONS:
        raise ValueError(_('Unknown reduction "%s".') % op)
    x = as_tensor(x)
    if axis is None:
        axes = tuple(range(x.ndim))
    elif isinstance(axis, tuple):
        axes = tuple(_norm_axis(a, x.ndim) for a in axis)
    else:
        axes = (_norm_axis(axis, x.ndim),)
    count = 1
    for a in axes:
        count *= x.shape[a]
    y = np.sum(x.data, axis=axes, keepdims=keepdims)
    if op == MEAN:
        y = y / count

    def grad(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        if op == MEAN:
            g = g / count
        return (np.broadcast_to(g, x.shape),)

    return _result(op, y, (x,), grad)


def reshape(x, shape):
    x = as_tensor(x)
    y = x.data.reshape(shape)
    return _result('reshape', y, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes):
    x = as_tensor(x)
    axes = tuple(_norm_axis(a, x.ndim) for a in axes)
    inverse = tuple(np.argsort(axes))
    y = np.transpose(x.data, axes)
    return _result('transpose', y, (x,),
                   lambda g: (np.transpose(g, inverse),))


def swapaxes(x, first, second):
    x = as_tensor(x)
    axes = list(range(x.ndim))
    first, second = _norm_axis(first, x.ndim), _norm_axis(second, x.ndim)
    axes[first], axes[second] = axes[second], axes[first]
    return transpose(x, axes)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    axis = _norm_axis(axis, tensors[0].ndim)
    try:
        y = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(op='concat', lhs=tensors[0].shape,
                             rhs=[t.shape for t in tensors[1:]])
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result('concat', y, tuple(tensors), grad)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    axis = _norm_axis(axis, tensors[0].ndim + 1)
    try:
        y = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(op='stack', lhs=tensors[0].shape,
                             rhs=[t.shape for t in tensors[1:]])

    def grad(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _result('stack', y, tuple(tensors), grad)


def select(x, index, axis):
    '''Pick one index along axis and drop that axis.'''
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    y = np.take(x.data, index, axis=axis)

    def grad(g):
        full = np.zeros(x.shape)
        where = [slice(None)] * x.ndim
        where[axis] = index
        full[tuple(where)] = g
        return (full,)

    return _result('select', y, (x,), grad)


def slice_axis(x, start, stop, axis=-1):
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    where = [slice(None)] * x.ndim
    where[axis] = slice(start, stop)
    where = tuple(where)
    y = x.data[where]

    def grad(g):
        full = np.zeros(x.shape)
        full[where] = g
        return (full,)

    return _result('slice', y, (x,), grad)


def pad(x, before, after, axis=-1):
    '''Zero padding along one axis.'''
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    widths = [(0, 0)] * x.ndim
    widths[axis] = (before, after)
    y = np.pad(x.data, widths)
    where = [slice(None)] * x.ndim
    where[axis] = slice(before, before + x.shape[axis])
    where = tuple(where)
    return _result('pad', y, (x,), lambda g: (g[where],))


def _ola(frames, hop):
    # [..., R, size] -> [..., (R - 1) * hop + size]
    count, size = frames.shape[-2], frames.shape[-1]
    length = (count - 1) * hop + size
    out = np.zeros(frames.shape[:-2] + (length,))
    if size % hop == 0:
        n = size // hop
        rows = out.reshape(out.shape[:-1] + (count + n - 1, hop))
        parts = frames.reshape(frames.shape[:-1] + (n, hop))
        for j in range(n):
            rows[..., j:j + count, :] += parts[..., :, j, :]
    else:
        for r in range(count):
            out[..., r * hop:r * hop + size] += frames[..., r, :]
    return out


def frame(x, size, hop, axis=-1):
    '''Cut an axis of length (R - 1) * hop + size into R windows.

    The axis is replaced by two axes (R, size).
    '''
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    length = x.shape[axis]
    if length < size or (length - size) % hop:
        raise DimensionError(op='frame', lhs=x.shape,
                             rhs='size %d, hop %d' % (size, hop))
    moved = np.moveaxis(x.data, axis, -1)
    windows = _windows(moved, size, hop)
    y = np.ascontiguousarray(
        np.moveaxis(windows, (-2, -1), (axis, axis + 1)))

    def grad(g):
        gm = np.moveaxis(g, (axis, axis + 1), (-2, -1))
        return (np.moveaxis(_ola(gm, hop), -1, axis),)

    return _result('frame', y, (x,), grad)


def overlap_add(frames, hop, axis=-2):
    '''Sum hop-spaced windows back into one axis; adjoint of frame.

    axis names the window-count axis; the window axis follows it.
    '''
    frames = as_tensor(frames)
    axis = _norm_axis(axis, frames.ndim)
    if axis == frames.ndim - 1:
        raise DimensionError(op='overlap_add', lhs=frames.shape,
                             rhs='axis %d' % axis)
    size = frames.shape[axis + 1]
    fm = np.moveaxis(frames.data, (axis, axis + 1), (-2, -1))
    y = np.moveaxis(_ola(fm, hop), -1, axis)

    def grad(g):
        gm = np.moveaxis(g, axis, -1)
        windows = _windows(gm, size, hop)
        return (np.moveaxis(windows, (-2, -1), (axis, axis + 1)),)

    return _result('overlap_add', y, (frames,), grad)


def backward(loss):
    '''Populate gradients of every requires_grad tensor reaching loss.'''
    if loss.size != 1:
        raise NonScalarLossError(shape=loss.shape)
    tape = loss._tape
    if tape is None or not tape.operations:
        raise EmptyTapeError()
    produced = set(id(op.output) for op in tape.operations)
    pending = {id(loss): np.ones(loss.shape)}
    for op in reversed(tape.operations):
        g = pending.pop(id(op.output), None)
        if g is None:
            continue
        op.output.grad = g
        for t, gi in zip(op.inputs, op.backward(g)):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in produced:
                pending[key] = gi if key not in pending else pending[key] + gi
            elif t.grad is None:
                t.grad = np.array(gi, dtype=np.float64)
            else:
                t.grad = t.grad + gi


def grad_check(function, point, epsilon=1e-5, max_coords=None, seed=0):
    '''Largest relative gap between tape and central-difference gradients.

    The relative error of a coordinate is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    With max_coords, a seeded random subset of coordinates is checked.
    '''
    if not point.data.flags.c_contiguous:
        point.data = np.ascontiguousarray(point.data)
    saved = point.grad, point.requires_grad
    point.grad, point.requires_grad = None, True
    try:
        with Tape():
            loss = function(point)
        if loss._tape is None:
            analytic = np.zeros(point.shape)
        else:
            backward(loss)
            analytic = (point.grad if point.grad is not None
                        else np.zeros(point.shape))
    finally:
        point.grad, point.requires_grad = saved

    flat = point.data.reshape(-1)
    coords = np.arange(flat.size)
    if max_coords is not None and max_coords < flat.size:
        rng = np.random.default_rng(seed)
        coords = np.sort(rng.choice(flat.size, max_coords, replace=False))
    analytic = analytic.reshape(-1)
    worst = 0.0
    with no_record():
        for i in coords:
            original = flat[i]
            flat[i] = original + epsilon
            upper = function(point).item()
            flat[i] = original - epsilon
            lower = function(point).item()
            flat[i] = original
            numeric = (upper - lower) / (2.0 * epsilon)
            scale = max(abs(analytic[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic[i] - numeric) / scale)
    LOG.debug('grad_check over %d coordinates: %.3e', len(coords), worst)
    return worst

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
Training loop: PIT negative SNR plus the auxiliary autoencoding term,
Adam with global-norm clipping, a stepped learning-rate decay and early
stopping on the validation loss.
'''

import csv
import logging
import math
import os

import numpy as np

from gc3separator import checkpoint
from gc3separator.common.exception import DivergenceError
from gc3separator import losses
from gc3separator.model_config import ConfigSection
from gc3separator import pipeline
from gc3separator import synthetic
from gc3separator import tensor as tn

log = logging.getLogger('gc3.train')

BEST_CHECKPOINT = 'best.gc3'
LAST_CHECKPOINT = 'last.gc3'
METRICS_FILE = 'metrics.csv'
METRICS_FIELDS = ['epoch', 'step', 'train_loss', 'valid_loss', 'si_sdr',
                  'lr']
MOMENT_PREFIXES = ('optimizer.m/', 'optimizer.v/')


def _positive(kind='integer'):
    return {'type': kind, 'exclusiveMinimum': 0}


class TrainConfig(ConfigSection):
    '''Optimizer, schedule and stopping rule of one training run.'''

    SECTION = 'train'
    WHAT = 'training configuration'
    DEFAULTS = {
        'epochs': 20,
        'steps_per_epoch': 50,
        'batch_size': 4,
        'learning_rate': 1e-3,
        'decay': 0.98,
        'decay_every': 2,
        'clip_norm': 5.0,
        'betas': [0.9, 0.999],
        'adam_eps': 1e-8,
        'a2t_weight': 0.0,
        'a2t_threshold': 20.0,
        'patience': 10,
        'seed': 0,
        'valid_size': 8,
        'log_every': 10,
    }
    SCHEMA = {
        'type': 'object',
        'additionalProperties': False,
        'properties': {
            'epochs': _positive(),
            'steps_per_epoch': _positive(),
            'batch_size': _positive(),
            'learning_rate': _positive('number'),
            'decay': {'type': 'number', 'exclusiveMinimum': 0,
                      'maximum': 1},
            'decay_every': _positive(),
            'clip_norm': _positive('number'),
            'betas': {'type': 'array', 'minItems': 2, 'maxItems': 2,
                      'items': {'type': 'number', 'minimum': 0,
                                'exclusiveMaximum': 1}},
            'adam_eps': _positive('number'),
            'a2t_weight': {'type': 'number', 'minimum': 0},
            'a2t_threshold': {'type': ['number', 'null'],
                              'exclusiveMinimum': 0},
            'patience': _positive(),
            'seed': {'type': 'integer', 'minimum': 0},
            'valid_size': _positive(),
            'log_every': _positive(),
        },
    }


def learning_rate(config, epoch):
    '''Rate used during epoch (0-based): decayed every decay_every epochs.'''
    return config.learning_rate * config.decay ** (epoch // config.decay_every)


def clip_gradients(params, max_norm):
    '''Scale all gradients so their global norm is at most max_norm.

    Returns the norm before clipping.
    '''
    grads = [p.grad for p in params if p.grad is not None]
    norm = math.sqrt(sum(float(np.sum(np.square(g))) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class Adam(object):
    '''Adam with bias correction over named parameter tensors.'''

    def __init__(self, named_params, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(named_params)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.steps = 0
        self.m = dict((name, np.zeros(p.shape)) for name, p in self.params)
        self.v = dict((name, np.zeros(p.shape)) for name, p in self.params)

    def step(self, lr):
        self.steps += 1
        correct1 = 1.0 - self.beta1 ** self.steps
        correct2 = 1.0 - self.beta2 ** self.steps
        for name, p in self.params:
            if p.grad is None:
                continue
            m = self.m[name] = self.beta1 * self.m[name] + \
                (1.0 - self.beta1) * p.grad
            v = self.v[name] = self.beta2 * self.v[name] + \
                (1.0 - self.beta2) * np.square(p.grad)
            update = (m / correct1) / (np.sqrt(v / correct2) + self.eps)
            p.data = p.data - lr * update

    def state_tensors(self):
        tensors = {}
        for name, _p in self.params:
            tensors[MOMENT_PREFIXES[0] + name] = self.m[name]
            tensors[MOMENT_PREFIXES[1] + name] = self.v[name]
        return tensors

    def load_state_tensors(self, tensors, steps):
        for name, _p in self.params:
            self.m[name] = np.array(tensors[MOMENT_PREFIXES[0] + name])
            self.v[name] = np.array(tensors[MOMENT_PREFIXES[1] + name])
        self.steps = steps


class TrainState(object):
    '''Progress of a run; everything needed to resume it exactly.'''

    SCALARS = ('step', 'epoch', 'best_valid', 'bad_epochs', 'stopped')

    def __init__(self, step=0, epoch=0, best_valid=None, bad_epochs=0,
                 stopped=False, history=None, moments=None):
        self.step = step
        self.epoch = epoch
        self.best_valid = best_valid
        self.bad_epochs = bad_epochs
        self.stopped = stopped
        self.history = history or []
        self.moments = moments or {}

    def to_meta(self):
        meta = dict((name, getattr(self, name)) for name in self.SCALARS)
        meta['history'] = [dict(r) for r in self.history]
        return meta

    @classmethod
    def from_meta(cls, meta, tensors=None):
        moments = dict((k, v) for k, v in (tensors or {}).items()
                       if k.startswith(MOMENT_PREFIXES))
        fields = dict((name, meta[name]) for name in cls.SCALARS
                      if name in meta)
        return cls(history=list(meta.get('history') or []),
                   moments=moments, **fields)

    def record_validation(self, loss, sdr, patience):
        '''Update the best loss and patience; True for a new best.'''
        row = self.history[-1]
        row['valid_loss'], row['si_sdr'] = loss, sdr
        if self.best_valid is None or loss < self.best_valid:
            self.best_valid = loss
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        if self.bad_epochs >= patience:
            self.stopped = True
        return False


def training_loss(model, mixtures, sources, a2t_weight, a2t_threshold=None):
    '''PIT negative SNR plus the weighted, thresholded auxiliary loss.'''
    estimates, _h, masks = pipeline.separate_with_masks(model, mixtures)
    loss, permutations = losses.pit_loss(estimates, sources)
    if a2t_weight:
        loss = loss + a2t_weight * losses.a2t_loss(
            model, sources, masks, permutations, a2t_threshold)
    return loss


def validation_scores(model, mixtures, sources):
    '''Validation PIT loss and mean SI-SDR under the chosen assignment.'''
    estimates = pipeline.separate(model, mixtures).data
    loss, permutations = losses.pit_loss(estimates, sources)
    ordered = np.stack([e[list(p)] for e, p in zip(estimates,
                                                   permutations)])
    return loss.item(), float(np.mean(losses.si_sdr(ordered, sources)))


def train_step(model, optimizer, config, spec, step, lr):
    '''One optimizer step on batch number step of the training stream.'''
    mixtures, sources = synthetic.make_batch(
        spec, config.batch_size, start=step * config.batch_size)
    params = model.parameters()
    for p in params:
        p.zero_grad()
    with tn.Tape():
        loss = training_loss(model, mixtures, sources, config.a2t_weight,
                             config.a2t_threshold)
        value = loss.item()
        if not math.isfinite(value):
            return value
        tn.backward(loss)
    clip_gradients(params, config.clip_norm)
    optimizer.step(lr)
    return value


def write_metrics(path, history):
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=METRICS_FIELDS,
                                restval='')
        writer.writeheader()
        for row in history:
            writer.writerow(row)


def _save(out_dir, name, model, state, optimizer):
    if out_dir is None:
        return
    checkpoint.save_model(os.path.join(out_dir, name), model,
                          extra_meta={'train_state': state.to_meta()},
                          extra_tensors=optimizer.state_tensors())


def train(model, config, train_spec, valid_spec=None, state=None,
          out_dir=None):
    '''Train model in place and return the final TrainState.

    With out_dir, best.gc3, last.gc3 and metrics.csv are kept there; a
    divergent step leaves the files of the last completed epoch alone.
    '''
    state = state or TrainState()
    optimizer = Adam(model.named_parameters(), config.betas,
                     config.adam_eps)
    if state.moments:
        optimizer.load_state_tensors(state.moments, state.step)
    if valid_spec is None:
        valid_spec = train_spec.replace(seed=train_spec.seed + 1)
    valid = synthetic.make_batch(valid_spec, config.valid_size)
    if out_dir is not None and not os.path.isdir(out_dir):
        os.makedirs(out_dir)

    while state.epoch < config.epochs and not state.stopped:
        lr = learning_rate(config, state.epoch)
        for _ in range(config.steps_per_epoch):
            value = train_step(model, optimizer, config, train_spec,
                               state.step, lr)
            if not math.isfinite(value):
                log.error('Loss became %s at epoch %d, step %d',
                          value, state.epoch, state.step)
                raise DivergenceError(epoch=state.epoch, step=state.step,
                                      loss=value)
            state.step += 1
            state.history.append({'epoch': state.epoch, 'step': state.step,
                                  'train_loss': value, 'lr': lr})
            if state.step % config.log_every == 0:
                log.info('Epoch %d step %d: train loss %.3f dB, lr %.3e',
                         state.epoch, state.step, value, lr)

        valid_loss, sdr = validation_scores(model, *valid)
        improved = state.record_validation(valid_loss, sdr, config.patience)
        log.info('Epoch %d done at step %d: train loss %.3f dB, valid loss '
                 '%.3f dB, SI-SDR %.2f dB, lr %.3e', state.epoch, state.step,
                 state.history[-1]['train_loss'], valid_loss, sdr, lr)
        state.epoch += 1
        state.moments = optimizer.state_tensors()
        if improved:
            _save(out_dir, BEST_CHECKPOINT, model, state, optimizer)
        _save(out_dir, LAST_CHECKPOINT, model, state, optimizer)
        if out_dir is not None:
            write_metrics(os.path.join(out_dir, METRICS_FILE), state.history)
        if state.stopped:
            log.warning('Early stop after epoch %d: no better validation '
                        'loss for %d epochs', state.epoch - 1,
                        state.bad_epochs)
    return state


def resume(path):
    '''Model and TrainState of a training checkpoint.'''
    model, meta, rest = checkpoint.load_model(path)
    return model, TrainState.from_meta(meta.get('train_state') or {}, rest)

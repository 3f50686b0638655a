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
Training objectives and the SI-SDR metric.

Signals are [..., L]; the last axis is time. Losses are tensors on the
active tape, metrics are plain numpy values.
'''

import itertools
import math

import numpy as np

from gc3separator.common.exception import DimensionError
from gc3separator.common.exception import ZeroSignalError
from gc3separator import pipeline
from gc3separator import tensor as tn

EPS = 1e-8
MAX_PIT_SOURCES = 4

_DB = 10.0 / math.log(10.0)


def _check_pair(op, estimate, reference):
    if estimate.shape[-1] != reference.shape[-1]:
        raise DimensionError(op=op, lhs=estimate.shape, rhs=reference.shape)


def neg_snr(estimate, reference):
    '''-10 log10(|s|^2 / (|s - e|^2 + eps |s|^2)) per signal, in dB.'''
    estimate = tn.as_tensor(estimate)
    reference = tn.as_tensor(reference)
    _check_pair('neg_snr', estimate, reference)
    energy = np.sum(np.square(reference.data), axis=-1)
    if np.any(energy == 0):
        raise ZeroSignalError(what='The reference signal')
    error = tn.reduce('sum', tn.square(reference - estimate), axis=-1)
    ratio = tn.as_tensor(energy) / (error + EPS * energy)
    return tn.log(ratio) * -_DB


def si_sdr(estimate, reference):
    '''Scale-invariant SDR in dB over the last axis, zero-mean inputs.'''
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    _check_pair('si_sdr', estimate, reference)
    estimate = estimate - estimate.mean(axis=-1, keepdims=True)
    reference = reference - reference.mean(axis=-1, keepdims=True)
    ref_energy = np.sum(reference ** 2, axis=-1, keepdims=True)
    if np.any(ref_energy == 0):
        raise ZeroSignalError(what='The reference signal')
    if np.any(np.sum(estimate ** 2, axis=-1) == 0):
        raise ZeroSignalError(what='The estimated signal')
    alpha = np.sum(estimate * reference, axis=-1, keepdims=True) / ref_energy
    target = alpha * reference
    target_energy = np.sum(target ** 2, axis=-1)
    residual = np.sum((target - estimate) ** 2, axis=-1)
    return 10.0 * np.log10(target_energy / (residual + EPS * target_energy))


def pairwise_losses(estimates, references, base_loss=neg_snr):
    '''[..., X, X] matrix; entry (i, j) scores estimate i on reference j.'''
    estimates = tn.as_tensor(estimates)
    references = tn.as_tensor(references)
    if estimates.shape[-2:] != references.shape[-2:]:
        raise DimensionError(op='pit_loss', lhs=estimates.shape,
                             rhs=references.shape)
    est = tn.reshape(estimates, estimates.shape[:-1] + (1,)
                     + estimates.shape[-1:])
    ref = tn.reshape(references, references.shape[:-2] + (1,)
                     + references.shape[-2:])
    return base_loss(est, ref)


def best_permutations(pairs):
    '''Per utterance, the assignment p minimising mean_j pairs[p[j], j].'''
    sources = pairs.shape[-1]
    if sources > MAX_PIT_SOURCES:
        raise DimensionError(op='pit_loss', lhs=pairs.shape,
                             rhs='at most %d sources' % MAX_PIT_SOURCES)
    candidates = list(itertools.permutations(range(sources)))
    columns = np.arange(sources)
    flat = pairs.reshape((-1, sources, sources))
    chosen = []
    for matrix in flat:
        scores = [matrix[list(p), columns].mean() for p in candidates]
        chosen.append(candidates[int(np.argmin(scores))])
    return chosen


def permutation_matrices(permutations, sources):
    '''One-hot [n, X, X] with row j selecting estimate p[j].'''
    out = np.zeros((len(permutations), sources, sources))
    for n, p in enumerate(permutations):
        out[n, np.arange(sources), list(p)] = 1.0
    return out


def pit_loss(estimates, references, base_loss=neg_snr):
    '''Batch-mean loss under the best assignment and that assignment.

    Permutation p pairs estimate p[j] with reference j. For [X, L] input a
    single permutation is returned, for [batch, X, L] one per utterance.
    '''
    pairs = pairwise_losses(estimates, references, base_loss)
    sources = pairs.shape[-1]
    chosen = best_permutations(pairs.data)
    # mask[i, j] = 1 / (X * batch) where i == p[j]
    mask = permutation_matrices(chosen, sources).transpose(0, 2, 1)
    mask = mask.reshape(pairs.shape) / (sources * len(chosen))
    loss = tn.reduce('sum', pairs * mask)
    if pairs.ndim == 2:
        return loss, chosen[0]
    return loss, chosen


def reorder(signals, permutations, axis=-2):
    '''Differentiable gather along the source axis.

    Output j of utterance n is input p_n[j].
    '''
    signals = tn.as_tensor(signals)
    axis = axis % signals.ndim
    batch = signals.shape[:axis]
    sources = signals.shape[axis]
    if not batch:
        permutations = [permutations]
    select = permutation_matrices(permutations, sources)
    select = select.reshape(batch + (sources, sources))
    flat = tn.reshape(signals, batch + (sources, -1))
    return tn.reshape(tn.matmul(tn.Tensor(select), flat), signals.shape)


def a2t_loss(model, sources, masks, permutations, threshold=None):
    '''Auxiliary autoencoding loss.

    Each reference's assigned mask is applied to the encoding of that
    clean reference; the decoded result is scored with neg_snr. With a
    threshold (dB), a reference restored better than threshold adds
    -threshold and no gradient.
    '''
    sources = tn.as_tensor(sources)
    clean = pipeline.encode_waveform(model, sources)
    ordered = reorder(masks, permutations, axis=-3)
    restored = pipeline.decode_masked(model, ordered * clean,
                                      sources.shape[-1])
    scores = neg_snr(restored, sources)
    if threshold is not None:
        scores = tn.relu(scores + threshold) - threshold
    return tn.reduce('mean', scores)

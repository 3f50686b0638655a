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
Analytic parameter and multiply-accumulate counts.

Counts are computed from a ModelConfig and an input length; no weights
are allocated. MAC convention per application:

  fully connected in -> out          in * out
  encoder                            N * W * T
  decoder, per source                L_pad * N * W
  LSTM step, per direction           4H(I + H) + 16H
  residual BLSTM step                2 LSTM steps + 2 * H_o * H_i
  TAC, per frame                     K'MD + D^2 + 2K'DM
  MHSA, per frame                    projections, QK^T, AV, post FCs
  depthwise-separable block          W*Hc + 3*Hc + Hc*W (+ Hc*W skip)
  mask application                   X * N * T

Normalisations, activations, softmax, means and residual additions are
not counted.
'''

import csv
import io
import logging

from gc3separator.common.exception import InputTooShortError
from gc3separator.elements import codec
from gc3separator.elements import groupcomm as gc
from gc3separator.elements import layers
from gc3separator.elements import tcn
from gc3separator import model_config
from gc3separator import pipeline
from gc3separator.utils import yamlparser

log = logging.getLogger('gc3')


def linear_params(n_in, n_out, bias=True):
    return n_in * n_out + (n_out if bias else 0)


def lstm_params(n_in, hidden):
    return 4 * hidden * (n_in + hidden) + 8 * hidden


def residual_blstm_params(h_in, h_out):
    return 2 * lstm_params(h_in, h_out) + linear_params(2 * h_out, h_in) \
        + 2 * h_in


def tac_params(M, H_o):
    hidden = 3 * H_o
    return linear_params(M, hidden) + linear_params(hidden, hidden) + \
        linear_params(2 * hidden, M) + 3


def mhsa_params(M, heads, hidden):
    return 4 * heads * M * M + linear_params(M, hidden) + 1 + \
        linear_params(hidden, M)


def ds_conv_params(width, hidden, skip=True):
    per_norm = 2 * hidden
    count = linear_params(width, hidden) + 1 + per_norm + \
        layers.TCN_KERNEL * hidden + hidden + 1 + per_norm + \
        linear_params(hidden, width)
    return count + (linear_params(hidden, width) if skip else 0)


def lstm_step_macs(n_in, hidden):
    return 4 * hidden * (n_in + hidden) + 16 * hidden


def residual_blstm_step_macs(h_in, h_out):
    return 2 * lstm_step_macs(h_in, h_out) + 2 * h_out * h_in


def tac_macs(groups, M, H_o):
    hidden = 3 * H_o
    return groups * M * hidden + hidden * hidden + \
        groups * 2 * hidden * M


def mhsa_macs(groups, M, heads, hidden):
    projections = 3 * heads * groups * M * M + groups * heads * M * M
    attention = 2 * heads * groups * groups * M
    return projections + attention + 2 * groups * M * hidden


def ds_conv_macs(width, hidden, skip=True):
    macs = width * hidden + layers.TCN_KERNEL * hidden + hidden * width
    return macs + (hidden * width if skip else 0)


class LayerCost(object):

    def __init__(self, name, params, macs=None):
        self.name = name
        self.params = params
        self.macs = macs

    def __repr__(self):
        return 'LayerCost(%s, params=%s, macs=%s)' % (self.name, self.params,
                                                      self.macs)


class ComplexityReport(object):
    '''Per-layer costs of one model; totals are sums over the entries.'''

    def __init__(self, name, entries=(), input_length=None, reference=None):
        self.name = name
        self.entries = list(entries)
        self.input_length = input_length
        self.reference = reference

    @property
    def params(self):
        return sum(e.params for e in self.entries)

    @property
    def macs(self):
        if self.input_length is None:
            return None
        return sum(e.macs for e in self.entries)

    def entry(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def params_ratio(self):
        if self.reference is None or not self.reference.params:
            return None
        return self.params / float(self.reference.params)

    def macs_ratio(self):
        if self.reference is None or not self.reference.macs \
                or self.macs is None:
            return None
        return self.macs / float(self.reference.macs)

    def with_reference(self, reference):
        return ComplexityReport(self.name, self.entries, self.input_length,
                                reference)

    def to_records(self):
        totals = {'params': self.params, 'macs': self.macs}
        if self.reference is not None:
            totals['reference'] = self.reference.name
            totals['params_percent'] = _percent(self.params_ratio())
            totals['macs_percent'] = _percent(self.macs_ratio())
        return {'name': self.name,
                'input_length': self.input_length,
                'layers': [{'name': e.name, 'params': e.params,
                            'macs': e.macs} for e in self.entries],
                'totals': totals}

    def dump(self, path=None):
        return yamlparser.dump_yaml(self.to_records(), path)

    def to_csv(self, path=None):
        stream = io.StringIO()
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['name', 'params', 'macs'])
        for e in self.entries:
            writer.writerow([e.name, e.params, _blank(e.macs)])
        writer.writerow(['total', self.params, _blank(self.macs)])
        text = stream.getvalue()
        if path is not None:
            with open(path, 'w') as f:
                f.write(text)
        return text

    def to_table(self):
        rows = [('layer', 'params', 'MACs')]
        rows += [(e.name, format_count(e.params), format_count(e.macs))
                 for e in self.entries]
        rows.append(('total', format_count(self.params),
                     format_count(self.macs)))
        if self.reference is not None:
            rows.append(('vs %s' % self.reference.name,
                         _format_percent(self.params_ratio()),
                         _format_percent(self.macs_ratio())))
        widths = [max(len(row[i]) for row in rows) for i in range(3)]
        lines = ['%s  %s  %s' % (row[0].ljust(widths[0]),
                                 row[1].rjust(widths[1]),
                                 row[2].rjust(widths[2])) for row in rows]
        lines.insert(1, '-' * len(lines[0]))
        return '\n'.join(lines)


def _blank(value):
    return '' if value is None else value


def _percent(ratio):
    return None if ratio is None else round(100.0 * ratio, 2)


def _format_percent(ratio):
    return '-' if ratio is None else '%.1f%%' % (100.0 * ratio)


def format_count(value):
    '''Human readable count: 2.6M, 123.3K, 3.8G.'''
    if value is None:
        return '-'
    for scale, suffix in ((1e9, 'G'), (1e6, 'M'), (1e3, 'K')):
        if value >= scale:
            return '%.1f%s' % (value / scale, suffix)
    return str(value)


class _Counter(object):
    '''Accumulates entries; macs are None when no length is given.'''

    def __init__(self, config, length):
        self.config = config
        self.counting = length is not None
        self.entries = []

    def add(self, name, params, macs=0):
        self.entries.append(LayerCost(name, params,
                                      macs if self.counting else None))


def _groupcomm_costs(config, groups):
    M, H_o = config.M, config.H_o
    kind = config.groupcomm
    if kind == gc.BLSTM:
        return (residual_blstm_params(M, H_o),
                groups * residual_blstm_step_macs(M, H_o))
    if kind == gc.TAC:
        return tac_params(M, H_o), tac_macs(groups, M, H_o)
    hidden = config.mhsa_hidden or gc.mhsa_hidden_width(M, H_o,
                                                        config.mhsa_heads)
    return (mhsa_params(M, config.mhsa_heads, hidden),
            mhsa_macs(groups, M, config.mhsa_heads, hidden))


def _analyze(config, length=None, name=None):
    config.validate()
    if length is not None and length < config.window:
        raise InputTooShortError(what='count_macs', required=config.window,
                                 length=length)
    counter = _Counter(config, length)
    N, W, X = config.N, config.window, config.sources
    frames = pipeline.frame_count(config, length) if length else 0
    groups = config.group_count
    width = config.width

    counter.add('encoder', N * W, N * W * frames)
    sequence = frames
    if not config.grouped:
        counter.add('bottleneck', linear_params(N, config.H_i),
                    N * config.H_i * frames)
    comm_params = comm_macs = 0
    if config.grouped:
        comm_params, comm_macs = _groupcomm_costs(config, groups)
    if config.variant == model_config.GC3:
        sequence = codec.block_count(frames, config.C) if frames else 0
        codec_frames = sequence * config.C
        blstm_params = residual_blstm_params(config.M, config.H_o)
        blstm_macs = groups * residual_blstm_step_macs(config.M, config.H_o)
        for side in ('encoder', 'decoder'):
            for i in range(config.L_c):
                prefix = 'codec.%s.%d' % (side, i)
                counter.add(prefix + '.groupcomm', comm_params,
                            comm_macs * codec_frames)
                counter.add(prefix + '.blstm', blstm_params,
                            blstm_macs * codec_frames)

    if config.separator == model_config.TCN:
        hidden = config.hidden_cnn
        for i in range(len(tcn.DILATIONS)):
            if config.grouped:
                counter.add('separator.%d.groupcomm' % i, comm_params,
                            comm_macs * sequence)
            counter.add('separator.%d.conv' % i,
                        ds_conv_params(width, hidden, config.tcn_skip),
                        groups * sequence *
                        ds_conv_macs(width, hidden, config.tcn_skip))
    else:
        passes = codec.block_count(sequence, config.B) * config.B \
            if sequence else 0
        unit_params = residual_blstm_params(width, config.H_o)
        unit_macs = groups * passes * \
            residual_blstm_step_macs(width, config.H_o)
        for i in range(config.L_s):
            if config.grouped:
                counter.add('separator.%d.groupcomm' % i, comm_params,
                            comm_macs * passes)
            counter.add('separator.%d.intra' % i, unit_params, unit_macs)
            counter.add('separator.%d.inter' % i, unit_params, unit_macs)

    out_width = config.M if config.grouped else N
    counter.add('mask', 1 + linear_params(width, X * out_width),
                groups * width * X * out_width * frames)
    counter.add('mask_apply', 0, X * N * frames)
    padded = pipeline.padded_length(config, length) if length else 0
    counter.add('decoder', N * W, X * padded * N * W)
    report = ComplexityReport(name or _describe(config), counter.entries,
                              length)
    log.debug('%s: %d parameters, %s MACs', report.name, report.params,
              report.macs)
    return report


def _describe(config):
    if not config.grouped:
        return '%s-%s' % (config.variant, config.separator)
    return '%s-%s-%s-K%d' % (config.variant, config.separator,
                             config.groupcomm, config.K)


def _config_of(model):
    return getattr(model, 'config', model)


def count_params(model, name=None):
    '''Parameter report for a SeparationModel or a ModelConfig.'''
    return _analyze(_config_of(model), None, name)


def count_macs(model, input_length, name=None):
    '''Parameter and MAC report for input_length samples.'''
    return _analyze(_config_of(model), input_length, name)


def compare(models, input_length=None, reference=None):
    '''Reports for named models, each relative to the reference name.'''
    reports = dict((name, _analyze(_config_of(model), input_length, name))
                   for name, model in models.items())
    if reference is not None:
        base = reports[reference]
        reports = dict((name, report.with_reference(base))
                       for name, report in reports.items())
    return reports

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
SI-SDR evaluation on synthetic mixtures.
'''

from concurrent import futures
import csv
import io
import logging
import os

import numpy as np

from gc3separator.common.exception import EmptyInputError
from gc3separator import losses
from gc3separator import pipeline
from gc3separator import synthetic
from gc3separator.utils import yamlparser

log = logging.getLogger('gc3')

WORKERS_ENV = 'GC3_WORKERS'
METRIC_FIELDS = ('neg_snr_db', 'si_sdr_db', 'si_sdr_improvement_db')


class Metrics(object):
    '''Per-utterance scores in utterance order, plus their means.'''

    def __init__(self, rows):
        self.rows = list(rows)

    def __len__(self):
        return len(self.rows)

    def means(self):
        return dict((name, float(np.mean([r[name] for r in self.rows])))
                    for name in METRIC_FIELDS)

    def summary(self):
        summary = {'utterances': len(self.rows)}
        summary.update(self.means())
        return summary

    def to_csv(self, path=None):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(('index',) + METRIC_FIELDS)
        for row in self.rows:
            writer.writerow([row['index']] + [repr(row[name])
                                              for name in METRIC_FIELDS])
        text = out.getvalue()
        if path:
            with open(path, 'w') as f:
                f.write(text)
        return text

    def dump_summary(self, path=None):
        return yamlparser.dump_yaml(self.summary(), path)


def score(estimates, sources, mixture):
    '''Scores of one utterance; estimates and sources are [X, L].'''
    estimates = np.asarray(estimates, dtype=np.float64)
    sources = np.asarray(sources, dtype=np.float64)
    loss, permutation = losses.pit_loss(estimates, sources)
    ordered = estimates[list(permutation)]
    sdr = losses.si_sdr(ordered, sources)
    base = losses.si_sdr(np.broadcast_to(mixture, sources.shape), sources)
    return {'neg_snr_db': loss.item(),
            'si_sdr_db': float(np.mean(sdr)),
            'si_sdr_improvement_db': float(np.mean(sdr - base))}


def worker_count():
    value = os.environ.get(WORKERS_ENV, '1')
    try:
        workers = int(value)
    except ValueError:
        workers = 0
    if workers < 1:
        log.warning('Ignoring %s=%r, using one worker', WORKERS_ENV, value)
        return 1
    return workers


def evaluate(model, spec, n, workers=None):
    '''Score n examples of spec.

    model is a SeparationModel or any callable mapping a mixture [L] to
    estimates [X, L]. Utterances fan out over worker threads; rows keep
    the example order.
    '''
    if n < 1:
        raise EmptyInputError(what='evaluate')
    if isinstance(model, pipeline.SeparationModel):
        def separator(mixture):
            return pipeline.separate(model, mixture).data
    else:
        separator = model
    workers = workers or worker_count()

    def run(index):
        example = synthetic.make_example(spec, index)
        row = score(separator(example.mixture), example.sources,
                    example.mixture)
        row['index'] = index
        return row

    log.debug('Evaluating %d utterances on %d workers', n, workers)
    with futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return Metrics(pool.map(run, range(n)))

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


import argparse
import logging
import os
import sys

import numpy as np

from gc3separator import checkpoint
from gc3separator.common.exception import GC3Exception
from gc3separator.common.exception import GradientCheckError
from gc3separator.common.exception import InputFileError
from gc3separator.common.exception import InvalidConfigError
from gc3separator.common.exception import MissingRequiredFieldError
from gc3separator import complexity
from gc3separator import evaluation
from gc3separator.extensions.exttools import ExtTools
from gc3separator.model_config import ModelConfig
from gc3separator import pipeline
from gc3separator.synthetic import SynthMixSpec
from gc3separator import tensor as tn
from gc3separator import training
from gc3separator.utils.gettextutils import _
from gc3separator.utils import wavutils

"""
Command line entry point of the separator library.

It can be used as,
#gc3-separator analyze --config study/gc3-dprnn-tac-k16 --seconds 4
    --reference study/dprnn-baseline
#gc3-separator gradcheck --config study/tiny-gc3-dprnn --seed 0
#gc3-separator train --config study/tiny-gc3-dprnn
    --train-config train.yaml --out runs/tiny
#gc3-separator separate --checkpoint runs/tiny/best.gc3
    --input mixture.wav --out estimates
#gc3-separator eval --checkpoint runs/tiny/best.gc3 --n 32
#gc3-separator presets

A --config value is a YAML file or a pack/preset name listed by presets.
"""

USAGE_EXIT = 1
GRADCHECK_LIMIT = 1e-4
GRADCHECK_MAX_PARAMS = 50000
LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _preset_name(value):
    return os.path.splitext(os.path.basename(value))[0]


def _input_file(path):
    if not os.path.isfile(path):
        raise InputFileError(path=path)
    return path


def _ensure_dir(path):
    if not os.path.isdir(path):
        os.makedirs(path)
    return path


class SeparatorShell(object):

    def __init__(self):
        self._tools = None

    @property
    def tools(self):
        if self._tools is None:
            self._tools = ExtTools()
        return self._tools

    def get_parser(self):
        parser = argparse.ArgumentParser(
            prog='gc3-separator',
            description=_('Lightweight speech separation with group '
                          'communication and context codecs.'))
        parser.add_argument('-v', '--verbose', action='count', default=0,
                            help=_('More logging; repeat for debug output.'))
        commands = parser.add_subparsers(dest='command', metavar='<command>')
        commands.required = True

        analyze = commands.add_parser(
            'analyze', help=_('Parameter and MAC counts of a model.'))
        analyze.add_argument('--config', required=True, metavar='<config>')
        analyze.add_argument('--seconds', type=float, default=4.0,
                             help=_('Input length for the MAC count.'))
        analyze.add_argument('--reference', metavar='<config>',
                             help=_('Model to report percentages against.'))
        analyze.add_argument('--out', metavar='<dir>',
                             help=_('Write complexity.csv and '
                                    'complexity.yaml here.'))

        gradcheck = commands.add_parser(
            'gradcheck', help=_('Finite-difference check of every '
                                'parameter block.'))
        gradcheck.add_argument('--config', required=True, metavar='<config>')
        gradcheck.add_argument('--seed', type=int, default=0)
        gradcheck.add_argument('--coords', type=int, default=4,
                               help=_('Coordinates checked per block.'))
        gradcheck.add_argument('--samples', type=int,
                               help=_('Input length; four encoder windows '
                                      'by default.'))
        gradcheck.add_argument('--force', action='store_true',
                               help=_('Allow models above %d parameters.')
                               % GRADCHECK_MAX_PARAMS)

        train = commands.add_parser('train', help=_('Train on synthetic '
                                                    'mixtures.'))
        train.add_argument('--config', metavar='<config>')
        train.add_argument('--train-config', metavar='<file>')
        train.add_argument('--mixture', metavar='<file>',
                           help=_('Mixture specification; defaults at the '
                                  'model sample rate otherwise.'))
        train.add_argument('--out', required=True, metavar='<dir>')
        train.add_argument('--resume', metavar='<checkpoint>')

        separate = commands.add_parser('separate', help=_('Separate a WAV '
                                                          'file.'))
        separate.add_argument('--checkpoint', required=True)
        separate.add_argument('--input', required=True, metavar='<wav>')
        separate.add_argument('--out', required=True, metavar='<dir>')

        evaluate = commands.add_parser('eval', help=_('SI-SDR on synthetic '
                                                      'mixtures.'))
        evaluate.add_argument('--checkpoint', required=True)
        evaluate.add_argument('--spec', metavar='<file>')
        evaluate.add_argument('--n', type=int, default=32)
        evaluate.add_argument('--out', metavar='<dir>')

        commands.add_parser('presets', help=_('List the preset packs.'))
        return parser

    def main(self, argv):
        parser = self.get_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return USAGE_EXIT if e.code else 0
        logging.basicConfig(
            level=LOG_LEVELS[min(args.verbose, len(LOG_LEVELS) - 1)],
            format='%(levelname)s %(name)s: %(message)s')
        handler = getattr(self, 'do_' + args.command)
        try:
            handler(args)
        except GC3Exception as e:
            sys.stderr.write('%s\n' % e)
            return e.exit_code
        return 0

    def load_config(self, value):
        return ModelConfig.load(self.tools.resolve(value))

    def do_analyze(self, args):
        config = self.load_config(args.config)
        report = complexity.count_macs(
            config, int(round(args.seconds * config.sample_rate)),
            name=_preset_name(args.config))
        if args.reference:
            base = self.load_config(args.reference)
            report = report.with_reference(complexity.count_macs(
                base, int(round(args.seconds * base.sample_rate)),
                name=_preset_name(args.reference)))
        print(report.to_table())
        if args.out:
            out = _ensure_dir(args.out)
            report.to_csv(os.path.join(out, 'complexity.csv'))
            report.dump(os.path.join(out, 'complexity.yaml'))

    def do_gradcheck(self, args):
        config = self.load_config(args.config)
        model = pipeline.build_model(config, seed=args.seed)
        if model.count() > GRADCHECK_MAX_PARAMS and not args.force:
            raise InvalidConfigError(
                field='config', value=args.config,
                reason=_('%d parameters exceed the gradient check limit of '
                         '%d; pass --force') % (model.count(),
                                                GRADCHECK_MAX_PARAMS))
        rng = np.random.default_rng(args.seed)
        x = rng.standard_normal(args.samples or 4 * config.window)
        weights = rng.standard_normal((config.sources, x.size))

        def loss():
            return tn.reduce('sum', pipeline.separate(model, x) * weights)

        failed = []
        for name, block in model.named_parameters():
            error = tn.grad_check(lambda _point: loss(), block,
                                  max_coords=args.coords, seed=args.seed)
            block.zero_grad()
            ok = error < GRADCHECK_LIMIT
            if not ok:
                failed.append(name)
            print('%-44s %.3e  %s' % (name, error, 'ok' if ok else 'FAIL'))
        if failed:
            raise GradientCheckError(blocks=', '.join(failed))

    def _mixture_spec(self, path, config):
        if path:
            spec = SynthMixSpec.load(path)
        else:
            spec = SynthMixSpec(sample_rate=config.sample_rate).validate()
        if spec.sample_rate != config.sample_rate:
            raise InvalidConfigError(
                field='sample_rate', value=spec.sample_rate,
                reason=_('the model runs at %d Hz') % config.sample_rate)
        return spec

    def do_train(self, args):
        train_config = training.TrainConfig.load(args.train_config) \
            if args.train_config else training.TrainConfig().validate()
        if args.resume:
            model, state = training.resume(_input_file(args.resume))
        elif args.config:
            model = pipeline.build_model(self.load_config(args.config),
                                         seed=train_config.seed)
            state = None
        else:
            raise MissingRequiredFieldError(what='train',
                                            required='--config')
        spec = self._mixture_spec(args.mixture, model.config)
        out = _ensure_dir(args.out)
        state = training.train(model, train_config, spec, state=state,
                               out_dir=out)
        print(_('Trained %(steps)d steps over %(epochs)d epochs; best '
                'validation loss %(best).3f dB.')
              % {'steps': state.step, 'epochs': state.epoch,
                 'best': state.best_valid})
        print(os.path.join(out, training.BEST_CHECKPOINT))

    def do_separate(self, args):
        model, _meta, _rest = checkpoint.load_model(
            _input_file(args.checkpoint))
        rate = model.config.sample_rate
        mixture = wavutils.read_wav(_input_file(args.input), rate)
        estimates = pipeline.separate(model, mixture).data
        out = _ensure_dir(args.out)
        stem = _preset_name(args.input)
        for j, estimate in enumerate(estimates):
            path = os.path.join(out, '%s_s%d.wav' % (stem, j + 1))
            wavutils.write_wav(path, estimate, rate)
            print(path)

    def do_eval(self, args):
        model, _meta, _rest = checkpoint.load_model(
            _input_file(args.checkpoint))
        spec = self._mixture_spec(args.spec, model.config)
        metrics = evaluation.evaluate(model, spec, args.n)
        print(metrics.dump_summary(), end='')
        if args.out:
            out = _ensure_dir(args.out)
            metrics.to_csv(os.path.join(out, 'metrics.csv'))
            metrics.dump_summary(os.path.join(out, 'summary.yaml'))

    def do_presets(self, args):
        for pack in self.tools.get_packs():
            print('%s: %s' % (pack, self.tools.get_description(pack)))
            for name in self.tools.get_presets(pack):
                print('  %s/%s' % (pack, name))


def main(args=None):
    if args is None:
        args = sys.argv[1:]
    return SeparatorShell().main(args)


if __name__ == '__main__':
    sys.exit(main())

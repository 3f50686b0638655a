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
Versioned YAML configuration documents.

A document carries the version key and exactly one section::

    gc3_config_version: 1.0
    model:
      variant: gc3
      ...

Loading validates the section against a JSON schema, then runs the
semantic checks of the section class. Every problem is collected and
reported in a single ValidationError.
'''

import copy
import logging

from gc3separator.common.exception import ExceptionCollector
from gc3separator.common.exception import InvalidConfigError
from gc3separator.common.exception import InvalidConfigVersion
from gc3separator.common.exception import MissingRequiredFieldError
from gc3separator.common.exception import TypeMismatchError
from gc3separator.common.exception import UnknownFieldError
from gc3separator.elements import groupcomm as gc
from gc3separator.elements import tcn
from gc3separator.utils.gettextutils import _
from gc3separator.utils import validateutils
from gc3separator.utils import yamlparser

log = logging.getLogger('gc3.model')

DEFINITION_VERSION = 'gc3_config_version'
VALID_CONFIG_VERSIONS = ['1.0']

VARIANTS = (BASELINE, GROUPCOMM, GC3) = ('baseline', 'groupcomm', 'gc3')
SEPARATORS = (DPRNN, TCN) = ('dprnn', 'tcn')


def _integer(minimum=1, maximum=None, nullable=False):
    schema = {'type': ['integer', 'null'] if nullable else 'integer',
              'minimum': minimum}
    if maximum is not None:
        schema['maximum'] = maximum
    return schema


def _number(minimum=None, exclusive=False):
    schema = {'type': 'number'}
    if minimum is not None:
        schema['exclusiveMinimum' if exclusive else 'minimum'] = minimum
    return schema


def _pair(minimum=None):
    return {'type': 'array', 'items': _number(minimum), 'minItems': 2,
            'maxItems': 2}


class ConfigSection(object):
    '''One section of a configuration document.

    Subclasses declare SECTION, WHAT, SCHEMA and DEFAULTS and may extend
    check() with semantic rules.
    '''

    SECTION = None
    WHAT = None
    SCHEMA = None
    DEFAULTS = {}

    def __init__(self, **fields):
        values = copy.deepcopy(self.DEFAULTS)
        values.update(fields)
        for name, value in values.items():
            setattr(self, name, value)

    @classmethod
    def load(cls, source):
        '''Read a document from a path, or take an already parsed dict.'''
        path = None if isinstance(source, dict) else source
        ExceptionCollector.start()
        try:
            document = source if path is None \
                else yamlparser.load_yaml(path)
            body = cls._read_section(document)
            config = None
            if not ExceptionCollector.exceptionsCaught():
                config = cls(**body)
                config.check()
        finally:
            ExceptionCollector.stop()
        validateutils.verify(cls.WHAT, path)
        return config

    @classmethod
    def from_dict(cls, body):
        return cls.load({DEFINITION_VERSION: VALID_CONFIG_VERSIONS[-1],
                         cls.SECTION: body})

    @classmethod
    def _read_section(cls, document):
        if not isinstance(document, dict):
            ExceptionCollector.appendException(
                TypeMismatchError(what=cls.WHAT, type='mapping'))
            return {}
        version = document.get(DEFINITION_VERSION)
        if version is None:
            ExceptionCollector.appendException(
                MissingRequiredFieldError(what=cls.WHAT,
                                          required=DEFINITION_VERSION))
        elif str(version) not in VALID_CONFIG_VERSIONS:
            ExceptionCollector.appendException(
                InvalidConfigVersion(
                    what=version,
                    valid_versions='", "'.join(VALID_CONFIG_VERSIONS)))
        for name in document:
            if name not in (DEFINITION_VERSION, cls.SECTION):
                ExceptionCollector.appendException(
                    UnknownFieldError(what=cls.WHAT, field=name))
        body = document.get(cls.SECTION)
        if body is None:
            ExceptionCollector.appendException(
                MissingRequiredFieldError(what=cls.WHAT,
                                          required=cls.SECTION))
            return {}
        if not isinstance(body, dict):
            ExceptionCollector.appendException(
                TypeMismatchError(what=cls.SECTION, type='mapping'))
            return {}
        return validateutils.validate_json(body, cls.SCHEMA, cls.SECTION)

    def check(self):
        pass

    def validate(self):
        '''Run the semantic checks on a programmatically built section.'''
        ExceptionCollector.start()
        try:
            validateutils.validate_json(self.to_dict(), self.SCHEMA,
                                        self.SECTION)
            if not ExceptionCollector.exceptionsCaught():
                self.check()
        finally:
            ExceptionCollector.stop()
        validateutils.verify(self.WHAT)
        return self

    def to_dict(self):
        return dict((name, copy.deepcopy(getattr(self, name)))
                    for name in self.DEFAULTS)

    def to_document(self):
        return {DEFINITION_VERSION: float(VALID_CONFIG_VERSIONS[-1]),
                self.SECTION: self.to_dict()}

    def dump(self, path=None):
        return yamlparser.dump_yaml(self.to_document(), path)

    def replace(self, **fields):
        values = self.to_dict()
        values.update(fields)
        return type(self)(**values)

    def __eq__(self, other):
        return type(self) is type(other) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return '%s(%s)' % (type(self).__name__, ', '.join(
            '%s=%r' % item for item in sorted(self.to_dict().items())))


class ModelConfig(ConfigSection):
    '''Hyperparameters of one separation model.

    Field names follow the usual notation: N encoder filters, K groups of
    width M, H_i/H_o BLSTM input and hidden widths, L_s separator blocks,
    L_c codec layers, C context size and B DPRNN block size in frames.
    '''

    SECTION = 'model'
    WHAT = 'model configuration'
    DEFAULTS = {
        'variant': BASELINE,
        'separator': DPRNN,
        'groupcomm': gc.TAC,
        'K': 1,
        'M': None,
        'N': 128,
        'H_i': 64,
        'H_o': 128,
        'L_s': 6,
        'L_c': 2,
        'C': 32,
        'B': 100,
        'group_overlap': 0.0,
        'sources': 2,
        'sample_rate': 16000,
        'window': 32,
        'stride': 16,
        'H_cnn': None,
        'tcn_skip': True,
        'mhsa_heads': gc.MHSA_HEADS,
        'mhsa_hidden': None,
    }
    SCHEMA = {
        'type': 'object',
        'additionalProperties': False,
        'required': ['variant', 'separator', 'N'],
        'properties': {
            'variant': {'enum': list(VARIANTS)},
            'separator': {'enum': list(SEPARATORS)},
            'groupcomm': {'enum': list(gc.GROUPCOMM_KINDS)},
            'K': _integer(),
            'M': _integer(nullable=True),
            'N': _integer(),
            'H_i': _integer(),
            'H_o': _integer(),
            'L_s': _integer(),
            'L_c': _integer(minimum=0),
            'C': _integer(minimum=2),
            'B': _integer(minimum=2),
            'group_overlap': {'enum': list(gc.OVERLAP_RATIOS)},
            'sources': _integer(maximum=4),
            'sample_rate': _integer(),
            'window': _integer(),
            'stride': _integer(),
            'H_cnn': _integer(nullable=True),
            'tcn_skip': {'type': 'boolean'},
            'mhsa_heads': _integer(),
            'mhsa_hidden': _integer(nullable=True),
        },
    }

    def __init__(self, **fields):
        super(ModelConfig, self).__init__(**fields)
        if self.M is None:
            self.M = self.N // self.K if self.K else None
        self.group_overlap = float(self.group_overlap)

    @property
    def grouped(self):
        return self.variant != BASELINE

    @property
    def group_spec(self):
        if not self.grouped:
            return None
        return gc.GroupSpec(self.K, self.M, self.N, self.group_overlap)

    @property
    def group_count(self):
        return self.group_spec.count if self.grouped else 1

    @property
    def width(self):
        '''Feature width the separator works at.'''
        return self.M if self.grouped else self.H_i

    @property
    def hidden_cnn(self):
        return self.H_cnn or 4 * self.width

    def check(self):
        validate = ExceptionCollector.appendException
        if self.stride > self.window:
            validate(InvalidConfigError(
                field='stride', value=self.stride,
                reason=_('the stride may not exceed the window')))
        if self.separator == DPRNN:
            validateutils.validate_even(self.B, 'B')
        if not self.grouped:
            if self.K != 1:
                validate(InvalidConfigError(
                    field='K', value=self.K,
                    reason=_('baseline models use a single group')))
            return
        if self.K < 2:
            validate(InvalidConfigError(
                field='K', value=self.K,
                reason=_('grouped models need at least two groups')))
        if self.H_i != self.M:
            validate(InvalidConfigError(
                field='H_i', value=self.H_i,
                reason=_('grouped models run the separator at the group '
                         'width M=%d') % self.M))
        try:
            self.group_spec
        except InvalidConfigError as error:
            validate(error)
        if self.variant == GC3:
            if self.L_c < 1:
                validate(InvalidConfigError(
                    field='L_c', value=self.L_c,
                    reason=_('the context codec needs at least one layer')))
            validateutils.validate_even(self.C, 'C')

    def derive_grouped(self, K, variant=GC3, groupcomm=None, **overrides):
        '''Grouped configuration from a baseline by the linear width rule.

        M = N / K; the separator runs at H_i = M and H_o keeps the
        baseline's H_o / H_i ratio.
        '''
        M = self.N // K
        fields = dict(variant=variant, K=K, M=M, H_i=M,
                      H_o=self.H_o * M // self.H_i,
                      groupcomm=groupcomm or self.groupcomm)
        if self.H_cnn is not None:
            fields['H_cnn'] = self.H_cnn * M // self.H_i
        fields.update(overrides)
        return self.replace(**fields)


def receptive_field(config):
    '''Receptive field of the separator.

    Returns separator frames, encoder frames and seconds; DPRNN sees the
    whole sequence, reported as None.
    '''
    if config.separator != TCN:
        return {'separator_frames': None, 'encoder_frames': None,
                'seconds': None}
    frames = tcn.receptive_field()
    encoder_frames = frames * (config.C // 2) if config.variant == GC3 \
        else frames
    return {'separator_frames': frames,
            'encoder_frames': encoder_frames,
            'seconds': encoder_frames * config.stride /
            float(config.sample_rate)}

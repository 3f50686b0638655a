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

import logging

from jsonschema import Draft7Validator

from gc3separator.common.exception import ExceptionCollector
from gc3separator.common.exception import InvalidConfigError
from gc3separator.common.exception import MissingRequiredFieldError
from gc3separator.common.exception import UnknownFieldError
from gc3separator.common.exception import ValidationError
from gc3separator.utils.gettextutils import _

log = logging.getLogger('gc3')


def validate_json(value, schema, what='Configuration'):
    '''Check value against a JSON schema, collecting one error per issue.

    Missing and unknown fields are reported with their own exception types
    so that messages always name the offending field.
    '''
    validator = Draft7Validator(schema)
    errors = sorted(validator.iter_errors(value),
                    key=lambda e: [str(p) for p in e.absolute_path])
    for error in errors:
        field = '.'.join(str(p) for p in error.absolute_path) or what
        if error.validator == 'required':
            missing = [r for r in error.validator_value
                       if r not in (error.instance or {})]
            for name in missing:
                ExceptionCollector.appendException(
                    MissingRequiredFieldError(what=field, required=name))
        elif error.validator == 'additionalProperties':
            allowed = set(error.schema.get('properties', {}))
            for name in sorted(set(error.instance) - allowed):
                ExceptionCollector.appendException(
                    UnknownFieldError(what=field, field=name))
        else:
            ExceptionCollector.appendException(
                InvalidConfigError(field=field, value=error.instance,
                                   reason=error.message))
    return value


def validate_even(value, field):
    if isinstance(value, int) and value % 2:
        ExceptionCollector.appendException(
            InvalidConfigError(field=field, value=value,
                               reason=_('the value must be even')))
    return value


def verify(what, source=None):
    '''Raise one ValidationError listing everything collected so far.'''
    if not ExceptionCollector.exceptionsCaught():
        return
    if source:
        header = (_('\nThe %(what)s "%(path)s" failed validation with the '
                    'following error(s): \n\n\t')
                  % {'what': what, 'path': source})
    else:
        header = (_('\nThe %(what)s failed validation with the following '
                    'error(s): \n\n\t') % {'what': what})
    report = ExceptionCollector.getExceptionsReport(full=False)
    ExceptionCollector.clear()
    raise ValidationError(message=header + '\n\t'.join(report))

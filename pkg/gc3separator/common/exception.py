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
GC3 separator exception classes
'''
import logging
import sys
import traceback

from gc3separator.utils.gettextutils import _


log = logging.getLogger(__name__)


class GC3Exception(Exception):
    '''Base exception class for the separator library

    To correctly use this class, inherit from it and define
    a 'msg_fmt' property.

    '''

    _FATAL_EXCEPTION_FORMAT_ERRORS = False

    message = _('An unknown exception occurred.')

    # exit status reported by the command line shell
    exit_code = 2

    def __init__(self, **kwargs):
        self.kwargs = kwargs
        try:
            self.message = self.msg_fmt % kwargs
        except KeyError:
            exc_info = sys.exc_info()
            log.exception('Exception in string format operation: %s'
                          % exc_info[1])

            if GC3Exception._FATAL_EXCEPTION_FORMAT_ERRORS:
                raise exc_info[0]

    def __str__(self):
        return self.message

    @staticmethod
    def set_fatal_format_exception(flag):
        if isinstance(flag, bool):
            GC3Exception._FATAL_EXCEPTION_FORMAT_ERRORS = flag


class ConfigurationError(GC3Exception):
    '''Errors caused by user input rather than by computation.'''
    exit_code = 1
    msg_fmt = _('%(message)s')


class InvalidConfigError(ConfigurationError):
    msg_fmt = _('Invalid value "%(value)s" for field "%(field)s": '
                '%(reason)s.')


class MissingRequiredFieldError(ConfigurationError):
    msg_fmt = _('%(what)s is missing required field "%(required)s".')


class UnknownFieldError(ConfigurationError):
    msg_fmt = _('%(what)s contains unknown field "%(field)s". Refer to the '
                'definition to verify valid values.')


class TypeMismatchError(ConfigurationError):
    msg_fmt = _('%(what)s must be of type "%(type)s".')


class ValidationError(ConfigurationError):
    msg_fmt = _('%(message)s')


class InvalidConfigVersion(ConfigurationError):
    msg_fmt = _('The configuration version "%(what)s" is invalid. '
                'Valid versions are "%(valid_versions)s".')


class UnknownPresetError(ConfigurationError):
    msg_fmt = _('"%(name)s" is neither a configuration file nor a known '
                'preset. Known presets: %(known)s.')


class InputFileError(ConfigurationError):
    msg_fmt = _('"%(path)s" is not a valid file.')


class AudioFormatError(ConfigurationError):
    msg_fmt = _('"%(path)s" has %(what)s "%(actual)s", expected '
                '"%(expected)s".')


class PresetExtImportError(ConfigurationError):
    msg_fmt = _('Unable to import preset pack "%(ext_name)s". '
                'Check to see that it exists and has no '
                'language definition errors.')


class PresetExtAttributeError(ConfigurationError):
    msg_fmt = _('Missing attribute in preset pack "%(ext_name)s". '
                'Check to see that it has required attributes '
                '"%(attrs)s" defined.')


class DimensionError(GC3Exception):
    msg_fmt = _('Shape mismatch in %(op)s: %(lhs)s and %(rhs)s.')


class InputTooShortError(GC3Exception):
    msg_fmt = _('%(what)s needs at least %(required)s samples along the '
                'processed axis, got %(length)s.')


class EmptyInputError(GC3Exception):
    msg_fmt = _('%(what)s received an empty input.')


class NonScalarLossError(GC3Exception):
    msg_fmt = _('Gradients need a loss with exactly one element, got shape '
                '%(shape)s.')


class EmptyTapeError(GC3Exception):
    msg_fmt = _('The loss was not computed under a recording tape.')


class ZeroSignalError(GC3Exception):
    msg_fmt = _('%(what)s has zero energy.')


class CheckpointFormatError(GC3Exception):
    msg_fmt = _('"%(path)s" is not a valid checkpoint: %(reason)s.')


class DivergenceError(GC3Exception):
    msg_fmt = _('Training diverged at epoch %(epoch)s, step %(step)s: the '
                'loss is %(loss)s.')


class GradientCheckError(GC3Exception):
    msg_fmt = _('Gradient check failed for %(blocks)s.')


class ExceptionCollector(object):

    exceptions = []
    collecting = False

    @staticmethod
    def clear():
        del ExceptionCollector.exceptions[:]

    @staticmethod
    def start():
        ExceptionCollector.clear()
        ExceptionCollector.collecting = True

    @staticmethod
    def stop():
        ExceptionCollector.collecting = False

    @staticmethod
    def contains(exception):
        for ex in ExceptionCollector.exceptions:
            if str(ex) == str(exception):
                return True
        return False

    @staticmethod
    def appendException(exception):
        if ExceptionCollector.collecting:
            if not ExceptionCollector.contains(exception):
                exception.trace = traceback.extract_stack()[:-1]
                ExceptionCollector.exceptions.append(exception)
        else:
            raise exception

    @staticmethod
    def exceptionsCaught():
        return len(ExceptionCollector.exceptions) > 0

    @staticmethod
    def getTraceString(traceList):
        traceString = ''
        for entry in traceList:
            f, l, m, c = entry[0], entry[1], entry[2], entry[3]
            traceString += (_('\t\tFile %(file)s, line %(line)s, in '
                              '%(method)s\n\t\t\t%(call)s\n')
                            % {'file': f, 'line': l, 'method': m, 'call': c})
        return traceString

    @staticmethod
    def getExceptionReportEntry(exception, full=True):
        entry = exception.__class__.__name__ + ': ' + str(exception)
        if full:
            entry += '\n' + ExceptionCollector.getTraceString(exception.trace)
        return entry

    @staticmethod
    def getExceptionsReport(full=True):
        report = []
        for exception in ExceptionCollector.exceptions:
            report.append(
                ExceptionCollector.getExceptionReportEntry(exception, full))
        return report

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

from gc3separator.common import exception
from gc3separator.common.exception import ExceptionCollector
from gc3separator.tests.base import TestCase
from gc3separator.utils.gettextutils import _


class ExceptionTest(TestCase):

    def setUp(self):
        super(ExceptionTest, self).setUp()
        exception.GC3Exception.set_fatal_format_exception(False)
        self.addCleanup(exception.GC3Exception.set_fatal_format_exception,
                        False)

    def test_message(self):
        ex = exception.MissingRequiredFieldError(what='model configuration',
                                                 required='model')
        self.assertEqual(_('model configuration is missing required field '
                           '"model".'), ex.__str__())

    def test_set_flag(self):
        exception.GC3Exception.set_fatal_format_exception('True')
        self.assertFalse(
            exception.GC3Exception._FATAL_EXCEPTION_FORMAT_ERRORS)

    def test_format_error(self):
        ex = exception.UnknownFieldError(what='model')
        self.assertEqual(_('An unknown exception occurred.'), ex.__str__())
        self.assertIn('Exception in string format operation',
                      self.log_fixture.output)
        self.assertRaises(KeyError, self._format_exception)

    def _format_exception(self):
        exception.UnknownFieldError.set_fatal_format_exception(True)
        raise exception.UnknownFieldError(what='model')

    def test_exit_codes(self):
        self.assertEqual(1, exception.InvalidConfigError(
            field='K', value=3, reason='odd').exit_code)
        self.assertEqual(1, exception.AudioFormatError(
            path='a.wav', what='sample rate', actual=1, expected=2).exit_code)
        self.assertEqual(1, exception.InputFileError(path='x.gc3').exit_code)
        self.assertEqual(2, exception.DimensionError(
            op='matmul', lhs=(2, 3), rhs=(4, 5)).exit_code)
        self.assertEqual(2, exception.DivergenceError(
            epoch=1, step=7, loss='nan').exit_code)

    def test_dimension_message(self):
        ex = exception.DimensionError(op='matmul', lhs=(2, 3), rhs=(4, 5))
        self.assertEqual('Shape mismatch in matmul: (2, 3) and (4, 5).',
                         str(ex))


class CollectorTest(TestCase):

    def setUp(self):
        super(CollectorTest, self).setUp()
        self.addCleanup(ExceptionCollector.stop)
        self.addCleanup(ExceptionCollector.clear)

    def test_collects_unique(self):
        ExceptionCollector.start()
        error = exception.UnknownFieldError(what='model', field='x')
        ExceptionCollector.appendException(error)
        ExceptionCollector.appendException(
            exception.UnknownFieldError(what='model', field='x'))
        ExceptionCollector.appendException(
            exception.UnknownFieldError(what='model', field='y'))
        self.assertTrue(ExceptionCollector.exceptionsCaught())
        report = ExceptionCollector.getExceptionsReport(full=False)
        self.assertEqual(2, len(report))
        self.assertTrue(report[0].startswith('UnknownFieldError: model '
                                             'contains unknown field "x"'))

    def test_raises_when_not_collecting(self):
        ExceptionCollector.stop()
        self.assertRaises(exception.EmptyTapeError,
                          ExceptionCollector.appendException,
                          exception.EmptyTapeError())

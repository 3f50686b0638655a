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

'''Expand testscenarios scenarios when the suite is collected by pytest.

stestr/unittest multiply scenario tests through testscenarios; pytest does
not, so each class with ``scenarios`` is replaced by one subclass per
scenario carrying that scenario's attributes.
'''

import inspect
import unittest

from _pytest.unittest import UnitTestCase


def pytest_pycollect_makeitem(collector, name, obj):
    if not (inspect.isclass(obj) and issubclass(obj, unittest.TestCase)):
        return None
    scenarios = getattr(obj, 'scenarios', None)
    if not scenarios:
        return None
    items = []
    for scenario_name, attrs in scenarios:
        attrs = dict(attrs)
        attrs['scenarios'] = None
        attrs['__module__'] = obj.__module__
        cls = type('%s[%s]' % (name, scenario_name), (obj,), attrs)
        item = UnitTestCase.from_parent(collector, name=cls.__name__)
        item._obj = cls
        items.append(item)
    return items

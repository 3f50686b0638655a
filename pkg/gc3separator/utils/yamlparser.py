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

import codecs
import yaml

from gc3separator.common.exception import ExceptionCollector
from gc3separator.common.exception import ValidationError
from gc3separator.utils.gettextutils import _


if hasattr(yaml, 'CSafeLoader'):
    yaml_loader = yaml.CSafeLoader
else:
    yaml_loader = yaml.SafeLoader

if hasattr(yaml, 'CSafeDumper'):
    yaml_dumper = yaml.CSafeDumper
else:
    yaml_dumper = yaml.SafeDumper


def load_yaml(path):
    try:
        with codecs.open(path, encoding='utf-8', errors='strict') as f:
            contents = f.read()
    except (IOError, OSError) as e:
        ExceptionCollector.appendException(
            ValidationError(message=_('Failed to read "%(path)s": '
                                      '%(reason)s.')
                            % {'path': path, 'reason': e.strerror}))
        return {}
    return simple_parse(contents, path)


def simple_parse(tmpl_str, source='<string>'):
    tpl = {}
    try:
        tpl = yaml.load(tmpl_str, Loader=yaml_loader)
    except yaml.YAMLError as yea:
        ExceptionCollector.appendException(
            ValidationError(message=_('"%(source)s" is not valid YAML: '
                                      '%(reason)s')
                            % {'source': source, 'reason': yea}))
    if tpl is None:
        tpl = {}
    return tpl


def dump_yaml(data, path=None):
    '''Serialise plain data; write it to path when given.'''
    text = yaml.dump(_plain(data), Dumper=yaml_dumper,
                     default_flow_style=False, sort_keys=False)
    if path is not None:
        with codecs.open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    return text


def _plain(data):
    # numpy scalars are not representable by SafeDumper
    if isinstance(data, dict):
        return {str(k): _plain(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_plain(v) for v in data]
    if hasattr(data, 'item') and callable(data.item):
        return data.item()
    return data

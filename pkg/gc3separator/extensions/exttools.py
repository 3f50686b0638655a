#
# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.

import collections
import importlib
import logging
import os

from stevedore import extension

from gc3separator.common.exception import PresetExtAttributeError
from gc3separator.common.exception import PresetExtImportError
from gc3separator.common.exception import UnknownPresetError

log = logging.getLogger('gc3')

NAMESPACE = 'gc3separator.presets'
REQUIRED_ATTRIBUTES = ['NAME', 'PRESETS_DIR']
PRESET_SUFFIX = '.yaml'


class ExtTools(object):
    def __init__(self):
        self.EXTENSION_INFO = self._load_extensions()

    def _load_extensions(self):
        '''Dynamically load all the preset packs.'''
        extensions = collections.OrderedDict()

        extns = extension.ExtensionManager(namespace=NAMESPACE,
                                           invoke_on_load=True).extensions

        for e in extns:
            try:
                extinfo = importlib.import_module(e.plugin.__module__)
                base_path = os.path.dirname(extinfo.__file__)
                name = e.plugin().NAME
                presets_dir = os.path.join(base_path, e.plugin().PRESETS_DIR)

                # DESCRIPTION is an optional attribute
                description = getattr(e.plugin(), 'DESCRIPTION', '')

                extensions[name] = {'description': description,
                                    'presets_dir': presets_dir}
            except ImportError:
                raise PresetExtImportError(ext_name=e.name)
            except AttributeError:
                attrs = ', '.join(REQUIRED_ATTRIBUTES)
                raise PresetExtAttributeError(ext_name=e.name, attrs=attrs)

        return extensions

    def get_packs(self):
        return sorted(self.EXTENSION_INFO.keys())

    def get_description(self, pack):
        packdata = self.EXTENSION_INFO.get(pack)
        return packdata.get('description') if packdata else None

    def get_presets(self, pack):
        packdata = self.EXTENSION_INFO.get(pack)
        if not packdata:
            return []
        return sorted(f[:-len(PRESET_SUFFIX)]
                      for f in os.listdir(packdata['presets_dir'])
                      if f.endswith(PRESET_SUFFIX))

    def get_preset_file(self, pack, preset):
        packdata = self.EXTENSION_INFO.get(pack)

        if packdata and preset in self.get_presets(pack):
            return os.path.join(packdata['presets_dir'],
                                preset + PRESET_SUFFIX)
        else:
            return None

    def resolve(self, value):
        '''Map a file path or "pack/preset" to a configuration file.'''
        if os.path.isfile(value):
            return value
        pack, _sep, preset = value.partition('/')
        path = self.get_preset_file(pack, preset)
        if path is None:
            known = ', '.join('%s/%s' % (p, n) for p in self.get_packs()
                              for n in self.get_presets(p))
            raise UnknownPresetError(name=value, known=known)
        log.debug('Preset %s resolved to %s', value, path)
        return path

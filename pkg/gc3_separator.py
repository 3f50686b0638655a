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

import sys

from gc3separator import shell as separator_shell

"""
Run the command line tool from a source checkout

It can be used as,
#python gc3_separator.py analyze --config <path to the YAML config>
#python gc3_separator.py analyze --config study/gc3-dprnn-tac-k16

e.g.
#python gc3_separator.py analyze
--config gc3separator/tests/data/tiny-gc3.yaml --seconds 1
"""

if __name__ == '__main__':
    sys.exit(separator_shell.main())

"""
Copyright (C) 2026 ccopf developers

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program.  If not, see <https://www.gnu.org/licenses/>.
"""
import json

from ccopf.report_engines import plain

FLOAT_FORMAT = '%.17g'


def _decimal(obj):
    if isinstance(obj, dict):
        return {k: _decimal(v) for k, v in obj.items()}
    elif isinstance(obj, list):
        return [_decimal(v) for v in obj]
    elif isinstance(obj, float):
        return FLOAT_FORMAT % obj
    return obj


def write(f, obj):
    """ Sorted keys, floats as decimal strings: identical inputs give identical bytes """
    text = json.dumps(_decimal(plain(obj)), sort_keys=True, indent=1)
    f.write(bytes(text + '\n', 'utf-8'))


def read(f):
    return json.loads(str(f.read(), 'utf-8'))

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
import os
import gzip
import shutil
import numbers
import tempfile
from lru import LRU

from ccopf import report_engines
from ccopf.errors import ArchiveError

from typing import Union, Optional, Any, Iterator, Tuple

ITEM_TYPING = Union[str, float, tuple, list]

DEFAULT_CACHE_SIZE = 128
TEMP_PREFIX = '.'


class ReportArchive:
    """
    Reports stored in a directory tree: a key (axis, value, ...) is a nested path and every leaf
    file holds one report written by a report engine.
    The read cache is validated against the file stat, so several archives may share a folder.
    """
    __slots__ = 'data_path', 'mode', 'writable', 'engine', 'write_method', 'read_method', 'compress_level', 'cache'

    def __init__(self, data_path: Union[str, 'ReportArchive'], mode: str = 'r',
                 cache_size: Optional[int] = None, shared_cache: Optional[LRU] = None,
                 engine: report_engines.ENGINE_TYPING = None, compress_level: int = 9):
        """
        :param data_path: The archive folder, or an existing archive to share its settings and cache.
        :param mode: 'r' for read only, 'w' to write, 'c' to also create the folder (lazily).
        :param cache_size: Read cache entries. Defaults to 128.
        :param shared_cache: Cache object of another archive (ignores cache_size).
        :param engine: Report engine name or a (write, read) pair. The archive does not record the engine;
            readers must use the one the writer used.
        :param compress_level: gzip level, 0 writes plain files.
        """
        if isinstance(data_path, self.__class__):
            parent = data_path
            data_path = parent.data_path
            shared_cache = parent.cache
            engine = parent.engine
            compress_level = parent.compress_level
        if not isinstance(data_path, str):
            raise TypeError(
                f"data_path must be a string or a {self.__class__.__name__} object. Not a {type(data_path)}.")

        self.data_path = os.path.abspath(os.path.realpath(data_path))
        self.mode = mode
        self.writable = any(k in mode for k in 'wc')
        self.engine = engine
        self.write_method, self.read_method = report_engines.get_report_engine(engine)
        self.compress_level = compress_level
        self.cache = shared_cache if shared_cache is not None else LRU(cache_size or DEFAULT_CACHE_SIZE)

        if os.path.isfile(self.data_path):
            raise ValueError(f"Archive path {self.data_path} must be a folder, but it is a file.")
        if not os.path.isdir(self.data_path) and 'c' not in mode:
            raise ValueError(f"Archive path {self.data_path} does not exist.")

    def __str__(self):
        return f"{self.__class__.__name__}({self.data_path}, {self.mode})"

    def __repr__(self):
        return str(self)

    ######################################################################################################
    # Keys and paths
    ######################################################################################################

    @staticmethod
    def key_part(k) -> str:
        """ Sweep values become stable folder names: 0.1 -> '0.1', 2.0 -> '2' """
        if isinstance(k, numbers.Real) and not isinstance(k, (bool, numbers.Integral)):
            return '%.12g' % k
        return str(k)

    def _verify_item(self, item: ITEM_TYPING) -> Tuple[str, ...]:
        if type(item) not in (list, tuple):
            item = (item,)
        item = tuple(self.key_part(k) for k in item)
        if len(item) == 0:
            raise ArchiveError(self, ArchiveError.Type.INVALID_KEY, item)
        for k in item:
            if k == '' or k.startswith(TEMP_PREFIX) or os.path.sep in k:
                raise ArchiveError(self, ArchiveError.Type.INVALID_KEY, item)

        for i in range(1, len(item)):
            sub_item = item[:i]
            if os.path.isfile(os.path.join(self.data_path, *sub_item)):
                raise ArchiveError(self, ArchiveError.Type.DATA_SUB_ITEM, item, sub_item)
        return item

    def key_path(self, item: ITEM_TYPING) -> str:
        return os.path.join(self.data_path, *self._verify_item(item))

    def path_key(self, path: str) -> Tuple[str, ...]:
        return tuple(os.path.relpath(path, self.data_path).split(os.path.sep))

    ######################################################################################################
    # File access
    ######################################################################################################

    def _open(self, filepath: str, mode: str = 'rb'):
        if self.compress_level == 0:
            return open(filepath, mode)
        return gzip.open(filepath, mode, compresslevel=self.compress_level)

    def _read(self, filepath: str) -> Any:
        with self._open(filepath, 'rb') as f:
            return self.read_method(f)

    def _read_cached(self, filepath: str) -> Any:
        cur_stat = os.stat(filepath)
        cached_stat, value = self.cache.get(filepath, (None, None))
        if cached_stat == cur_stat:
            return value
        value = self._read(filepath)
        self.cache[filepath] = (cur_stat, value)
        return value

    ######################################################################################################
    # Dict like interface
    ######################################################################################################

    def put(self, item: ITEM_TYPING, report: Any):
        if not self.writable:
            raise ArchiveError(self, ArchiveError.Type.READ_ONLY, item)
        item_path = self.key_path(item)
        if os.path.isdir(item_path):
            shutil.rmtree(item_path)
        os.makedirs(os.path.dirname(item_path), exist_ok=True)
        if item_path in self.cache:
            del self.cache[item_path]
        # Readers see the old report or the new one, never a partial file
        fd, temp_path = tempfile.mkstemp(prefix=TEMP_PREFIX, dir=os.path.dirname(item_path))
        os.close(fd)
        try:
            with self._open(temp_path, 'wb') as f:
                self.write_method(f, report)
            os.replace(temp_path, item_path)
        except BaseException:
            os.remove(temp_path)
            raise

    def get(self, item: ITEM_TYPING, default_value: Any = None) -> Any:
        """ A report, a sub-archive for a folder, or `default_value` """
        item_path = self.key_path(item)
        if os.path.isdir(item_path):
            return self.child(item)
        if os.path.isfile(item_path):
            return self._read_cached(item_path)
        return default_value

    def child(self, item: ITEM_TYPING) -> 'ReportArchive':
        item_path = self.key_path(item)
        if not os.path.isdir(item_path) and not self.writable:
            raise ArchiveError(self, ArchiveError.Type.NO_SUCH_KEY, item)
        return self.__class__(item_path, mode=self.mode if os.path.isdir(item_path) else 'c',
                              shared_cache=self.cache, engine=self.engine, compress_level=self.compress_level)

    def delete(self, item: ITEM_TYPING, ignore_errors: bool = False):
        if not self.writable:
            raise ArchiveError(self, ArchiveError.Type.READ_ONLY, item)
        item_path = self.key_path(item)
        if os.path.isdir(item_path):
            shutil.rmtree(item_path)
        elif os.path.isfile(item_path):
            os.remove(item_path)
        elif not ignore_errors:
            raise ArchiveError(self, ArchiveError.Type.NO_SUCH_KEY, item)

    def exists(self, item: ITEM_TYPING) -> bool:
        return os.path.exists(self.key_path(item))

    def keys(self) -> list:
        if not os.path.isdir(self.data_path):
            return []
        return sorted(k for k in os.listdir(self.data_path) if not k.startswith(TEMP_PREFIX))

    def walk(self) -> Iterator[Tuple[Tuple[str, ...], Any]]:
        """ Every report below this archive as (key, report), in sorted key order """
        for root, dirs, files in os.walk(self.data_path):
            dirs.sort()
            for name in sorted(f for f in files if not f.startswith(TEMP_PREFIX)):
                filepath = os.path.join(root, name)
                yield self.path_key(filepath), self._read_cached(filepath)

    def clear_cache(self):
        self.cache.clear()

    def __getitem__(self, item: ITEM_TYPING):
        value = self.get(item, default_value=KeyError)
        if value is KeyError:
            raise ArchiveError(self, ArchiveError.Type.NO_SUCH_KEY, item)
        return value

    def __setitem__(self, item: ITEM_TYPING, report: Any):
        self.put(item, report)

    def __delitem__(self, item: ITEM_TYPING):
        self.delete(item)

    def __contains__(self, item: ITEM_TYPING):
        return self.exists(item)

    def __iter__(self):
        return iter(self.keys())

    def __len__(self):
        return len(self.keys())

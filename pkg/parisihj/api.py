"""
Result cache - :mod:`parisihj.api`
==================================

Hopf-Lax solves and finite-N Monte Carlo runs can take minutes. Their
results are deterministic for fixed inputs and seeds, so they can be stored
on disk and reused.

The cache is disabled by default. Enable it at the beginning of a script:

    >>> import parisihj
    >>> parisihj.Cache.enable_cache('path/to/cache')  # doctest: +SKIP

Cached results are pickled to
``<cache_dir>/<function name>/<fingerprint>.phjpkl`` where the fingerprint is
a SHA-256 hash of the JSON representation of all arguments. Loading a cached
result gives exactly the value a new computation would give.

.. autosummary::
   :nosignatures:

   Cache

"""
import functools
import hashlib
import json
import logging
import os
import pickle

import numpy as np


CACHE_SUFFIX = '.phjpkl'


class Cache:
    """Pickle based result cache.

    The configuration is stored on the class; there is one cache per
    process.
    """
    _CACHE_DIR = ''
    _CACHE_CORE_VERSION = 1  # version of the cached data layout (unrelated to release version number)
    _IGNORE_VERSION = False
    _FORCE_RENEW = False

    _tmp_disabled = False

    @classmethod
    def enable_cache(cls, cache_dir, ignore_version=False, force_renew=False):
        """Enables the result cache.

        Args:
            cache_dir (str): Path to the directory which should be used to store cached data. Path needs to exist.
            ignore_version (bool): Ignore if cached data was created with a different version of the cache layout
                (not recommended: incompatible data may be loaded)
            force_renew (bool): Ignore existing cached data. Recompute results and update the cache instead.
        """
        if not os.path.isdir(cache_dir):
            raise NotADirectoryError("Cache directory does not exist! Please check for typos or create it first.")
        cls._CACHE_DIR = cache_dir
        cls._IGNORE_VERSION = ignore_version
        cls._FORCE_RENEW = force_renew

    @classmethod
    def clear_cache(cls, cache_dir):
        """Clear all cached data.

        This deletes all cache files in the provided cache directory. Other
        files are left untouched.

        Can be called without enabling the cache first.

        Args:
            cache_dir (str): Path to the directory which is used to store cached data.
        """
        if not os.path.isdir(cache_dir):
            raise NotADirectoryError("Cache directory does not exist!")

        for dirpath, dirnames, filenames in os.walk(cache_dir):
            for filename in filenames:
                if filename.endswith(CACHE_SUFFIX):
                    os.remove(os.path.join(dirpath, filename))

    @classmethod
    def is_enabled(cls):
        return bool(cls._CACHE_DIR) and not cls._tmp_disabled

    @classmethod
    def cached(cls, func):
        """Decorator that adds result caching to a function.

        All arguments of the wrapped function must be JSON serializable,
        numpy arrays, or objects with a ``to_dict()`` method.

        Args:
            func: function to be wrapped

        Returns:
            The wrapped function
        """
        @functools.wraps(func)
        def _cached_call(*args, **kwargs):
            if not cls.is_enabled():
                return func(*args, **kwargs)

            func_name = str(func.__name__)
            cache_file_path = cls._get_cache_file_path(func_name, args, kwargs)

            if os.path.isfile(cache_file_path):
                # file exists already, try to load it
                try:
                    with open(cache_file_path, 'rb') as cache_file_obj:
                        cached = pickle.load(cache_file_obj)
                except (OSError, pickle.UnpicklingError, EOFError,
                        AttributeError, ImportError):
                    cached = None

                if cached is not None and cls._data_ok_for_use(cached):
                    logging.info(f"Using cached data for {func_name}")
                    return cached['data']

                logging.info(f"Updating cache for {func_name}...")
            else:
                logging.info(f"No cached data found for {func_name}. "
                             f"Computing...")

            data = func(*args, **kwargs)
            cls._write_cache(data, cache_file_path)
            logging.info("Data has been written to cache!")
            return data

        return _cached_call

    @classmethod
    def _get_cache_file_path(cls, name, args, kwargs):
        cache_dir_path = os.path.join(cls._CACHE_DIR, name)
        if not os.path.exists(cache_dir_path):
            # create subfolders if they don't yet exist
            os.makedirs(cache_dir_path)
        file_name = fingerprint(args, kwargs) + CACHE_SUFFIX
        return os.path.join(cache_dir_path, file_name)

    @classmethod
    def _data_ok_for_use(cls, cached):
        # check if cached data is ok or needs to be computed again
        if cls._FORCE_RENEW:
            return False
        elif cls._IGNORE_VERSION:
            return True
        elif cached.get('version') == cls._CACHE_CORE_VERSION:
            return True
        return False

    @classmethod
    def _write_cache(cls, data, cache_file_path, **kwargs):
        new_cached = dict(
            **{'version': cls._CACHE_CORE_VERSION, 'data': data},
            **kwargs
        )
        with open(cache_file_path, 'wb') as cache_file_obj:
            pickle.dump(new_cached, cache_file_obj)

    @classmethod
    def disabled(cls):
        """Returns a context manager object that creates a context within
        which the cache is temporarily disabled.

        Example::

            with Cache.disabled():
                # no caching takes place here
                ...

        .. note::
            The context manager is not multithreading-safe
        """
        return _NoCacheContext()

    @classmethod
    def set_disabled(cls):
        """Disable the cache while keeping the configuration intact.

        You can enable the cache at any time using :func:`set_enabled`

        .. note::
            This function is not multithreading-safe
        """
        cls._tmp_disabled = True

    @classmethod
    def set_enabled(cls):
        """Enable the cache after it has been disabled with
        :func:`set_disabled`.

        .. warning::
            To enable the cache it needs to be configured properly. You need
            to call :func:`enable_cache` once to enable the cache initially.

        .. note::
            This function is not multithreading-safe
        """
        cls._tmp_disabled = False


class _NoCacheContext:
    def __enter__(self):
        Cache.set_disabled()

    def __exit__(self, exc_type, exc_val, exc_tb):
        Cache.set_enabled()


def _to_jsonable(obj):
    if hasattr(obj, 'to_dict'):
        return {'__type__': type(obj).__name__, **obj.to_dict()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating, np.bool_)):
        return obj.item()
    raise TypeError(f"Cannot fingerprint an object of type "
                    f"{type(obj).__name__}")


def fingerprint(args, kwargs):
    """SHA-256 hash of the JSON representation of call arguments."""
    text = json.dumps([list(args), kwargs], default=_to_jsonable,
                      sort_keys=True)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()

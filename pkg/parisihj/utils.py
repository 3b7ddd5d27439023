"""
Utils module - :mod:`parisihj.utils`
====================================

Helpers shared by the numerical modules and the command line interface.

.. autosummary::
    load_json_arg
    format_value
    parallel_map

Exceptions
----------

.. autosummary::
    NumericalError
    AccuracyError
    UnsupportedSizeError
"""
import json
import os
from concurrent.futures import ThreadPoolExecutor


def load_json_arg(value):
    """Load a JSON object given either as a file path or inline.

    The command line accepts structured inputs (mixtures, measures, single
    site laws) as paths to JSON files. For convenience, a string that is not
    an existing file is parsed as inline JSON.

    Args:
        value (str or dict): file path, JSON text or an already parsed object

    Returns:
        dict or list: the parsed JSON content

    Raises:
        ValueError: if the value is neither a readable file nor valid JSON
    """
    if isinstance(value, (dict, list)):
        return value
    if os.path.isfile(value):
        with open(value, 'r') as fobj:
            return json.load(fobj)
    try:
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise ValueError(f"'{value}' is neither an existing file nor valid "
                         f"JSON ({exc})")


def format_value(x):
    """Format a number with 12 significant digits."""
    return f"{x:.12g}"


def parallel_map(func, items, threads=None):
    """Apply ``func`` to all items, optionally on a thread pool.

    Results are returned in input order, independent of the order in which
    the workers finish.

    Args:
        func (callable): function of one argument
        items (iterable): work items
        threads (int or None): maximum number of worker threads; ``None``
            uses the executor default, ``1`` runs everything in the calling
            thread

    Returns:
        list: ``[func(item) for item in items]``
    """
    items = list(items)
    if threads == 1 or len(items) <= 1:
        return [func(item) for item in items]
    if threads is not None and threads < 1:
        raise ValueError(f"threads must be a positive integer, got {threads}")
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))


class NumericalError(Exception):
    """Raised if a numerical procedure fails, for example when a root
    bracket cannot be found or a solver produces non-finite values."""
    pass


class AccuracyError(NumericalError):
    """Raised if a discretization cannot reach the requested accuracy with
    the given settings."""
    pass


class UnsupportedSizeError(ValueError):
    """Raised if a problem is too large for an exact method."""

    def __init__(self, *args):
        if not args:
            args = ("The problem is too large for exact quadrature. Use the "
                    "Monte Carlo estimator `parisihj.finite_n."
                    "free_energy_plain` instead.", )
        super(UnsupportedSizeError, self).__init__(*args)

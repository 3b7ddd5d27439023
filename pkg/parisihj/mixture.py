"""
Mixture functions - :mod:`parisihj.mixture`
===========================================

The covariance structure of a mixed p-spin model is described by the mixture
function

.. math::

    \\xi(r) = \\sum_{p \\geq 2} \\beta_p r^p, \\qquad \\beta_p \\geq 0,

with finitely many nonzero coefficients. The Hamiltonian of the model at
size N has covariance :math:`N \\xi(\\sigma \\cdot \\tau / N)`.

This module provides :class:`MixtureSpec`, the evaluation of the mixture and
its first two derivatives, and the convex dual

.. math::

    \\xi^*(s) = \\sup_{r \\geq 0} (rs - \\xi(r)).

.. autosummary::
    MixtureSpec
    evaluate
    normalize
    dual


Example::

    >>> from parisihj.mixture import MixtureSpec, dual
    >>> sk = MixtureSpec({2: 1.0})
    >>> dual(sk, 2.0)
    1.0

"""
import json
import logging

import numpy as np
from numpy.polynomial import Polynomial

from parisihj.utils import NumericalError


DUAL_RTOL = 1e-12
DUAL_MAX_ITER = 200


class MixtureSpec:
    """Mixture function as a sparse polynomial with nonnegative coefficients.

    Instances are immutable. Degrees can be given as integers or as decimal
    strings (the JSON representation uses string keys). Zero coefficients are
    accepted and dropped.

    Args:
        coeffs (dict): mapping from integer degree ``p >= 2`` to the
            coefficient ``beta_p >= 0``; at least one coefficient must be
            positive

    Raises:
        ValueError: for invalid degrees or coefficients

    Example::

        >>> MixtureSpec({'2': 0.5, '4': 0.5}).to_dict()
        {'2': 0.5, '4': 0.5}
    """
    def __init__(self, coeffs):
        if isinstance(coeffs, MixtureSpec):
            coeffs = coeffs.coeffs
        parsed = dict()
        for key, beta in dict(coeffs).items():
            degree = _parse_degree(key)
            beta = float(beta)
            if not np.isfinite(beta) or beta < 0:
                raise ValueError(f"Coefficient of degree {degree} must be a "
                                 f"finite number >= 0, got {beta}")
            if degree in parsed:
                raise ValueError(f"Degree {degree} is given more than once")
            if beta > 0:
                parsed[degree] = beta

        if not parsed:
            raise ValueError("At least one mixture coefficient must be "
                             "positive")

        self._coeffs = dict(sorted(parsed.items()))
        dense = np.zeros(max(self._coeffs) + 1)
        for degree, beta in self._coeffs.items():
            dense[degree] = beta
        poly = Polynomial(dense)
        self._derivatives = (poly, poly.deriv(1), poly.deriv(2))

    @property
    def coeffs(self):
        """dict: degree to coefficient mapping (a copy)"""
        return dict(self._coeffs)

    @property
    def degrees(self):
        """list: degrees with a positive coefficient, ascending"""
        return list(self._coeffs)

    @property
    def is_even(self):
        """bool: True if all degrees are even, i.e. xi(-r) = xi(r)"""
        return all(degree % 2 == 0 for degree in self._coeffs)

    @property
    def is_normalized(self):
        """bool: True if xi(1) = 1 up to round-off"""
        return abs(sum(self._coeffs.values()) - 1.0) <= 1e-12

    def __call__(self, r, order=0):
        return evaluate(self, r, order)

    def __eq__(self, other):
        if not isinstance(other, MixtureSpec):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        return hash(tuple(self._coeffs.items()))

    def __repr__(self):
        terms = ', '.join(f"{p}: {beta!r}" for p, beta in self._coeffs.items())
        return f"MixtureSpec({{{terms}}})"

    def to_dict(self):
        """Return the JSON representation ``{"p": beta_p, ...}``."""
        return {str(p): beta for p, beta in self._coeffs.items()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, obj):
        """Create a mixture from JSON text or an already parsed dict."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict):
            raise ValueError("A mixture must be given as a JSON object "
                             "mapping degrees to coefficients")
        return cls(obj)


def _parse_degree(key):
    if isinstance(key, (bool, np.bool_)):
        raise ValueError(f"Invalid mixture degree {key!r}")
    if isinstance(key, str):
        if not key.strip().isdigit():
            raise ValueError(f"Invalid mixture degree {key!r}")
        degree = int(key)
    elif isinstance(key, (int, np.integer)):
        degree = int(key)
    else:
        raise ValueError(f"Invalid mixture degree {key!r}")
    if degree < 2:
        raise ValueError(f"Mixture degrees must be >= 2, got {degree}")
    return degree


def evaluate(m, r, order=0):
    """Evaluate the mixture function or one of its derivatives.

    Args:
        m (MixtureSpec): the mixture
        r (float or array-like): evaluation point(s); the polynomial is
            defined on the whole real line
        order (int): 0 for xi, 1 for xi', 2 for xi''

    Returns:
        float or np.ndarray

    Raises:
        ValueError: if ``order`` is not 0, 1 or 2
    """
    if order not in (0, 1, 2) or isinstance(order, bool):
        raise ValueError(f"Derivative order must be 0, 1 or 2, got {order!r}")
    value = m._derivatives[order](np.asarray(r, dtype=float))
    if np.ndim(value) == 0:
        return float(value)
    return value


def normalize(m):
    """Scale a mixture so that xi(1) = 1.

    Args:
        m (MixtureSpec): the mixture

    Returns:
        MixtureSpec: the scaled mixture; normalizing twice gives the same
        result as normalizing once

    Raises:
        ValueError: if xi(1) is not positive
    """
    total = evaluate(m, 1.0)
    if not total > 0:
        raise ValueError("Cannot normalize a mixture with xi(1) = 0")
    return MixtureSpec({p: beta / total for p, beta in m.coeffs.items()})


def dual(m, s):
    """Convex dual ``xi*(s) = sup_{r >= 0} (rs - xi(r))``.

    For ``s <= 0`` the supremum is attained at ``r = 0`` and the dual is 0.
    For ``s > 0`` the maximizer is the unique ``r > 0`` with ``xi'(r) = s``.
    It is found with a Newton iteration that falls back to bisection whenever
    a step leaves the current bracket. The bracket starts as ``[0, 1]`` and
    its upper end is doubled until ``xi'(r_max) >= s``.

    Args:
        m (MixtureSpec): the mixture
        s (float or array-like): argument(s)

    Returns:
        float or np.ndarray: values ``>= 0``, convex and nondecreasing in s

    Raises:
        NumericalError: if the iteration does not converge
    """
    s_arr = np.asarray(s, dtype=float)
    flat = np.atleast_1d(s_arr).astype(float).ravel()
    out = np.zeros_like(flat)
    pos = flat > 0
    if np.any(pos):
        r = dual_argmax(m, flat[pos])
        out[pos] = np.maximum(r * flat[pos] - m._derivatives[0](r), 0.0)
    if s_arr.ndim == 0:
        return float(out[0])
    return out.reshape(s_arr.shape)


def dual_argmax(m, s):
    """Maximizer ``r >= 0`` of ``rs - xi(r)`` for positive ``s``.

    Args:
        m (MixtureSpec): the mixture
        s (np.ndarray): strictly positive arguments

    Returns:
        np.ndarray: the solutions of ``xi'(r) = s``
    """
    s = np.asarray(s, dtype=float)
    d1, d2 = m._derivatives[1], m._derivatives[2]

    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    for _ in range(DUAL_MAX_ITER):
        short = d1(hi) < s
        if not np.any(short):
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise NumericalError(f"Could not bracket the maximizer of the convex "
                             f"dual for s up to {np.max(s)}")

    r = 0.5 * (lo + hi)
    for n_iter in range(DUAL_MAX_ITER):
        g = d1(r) - s
        lo = np.where(g < 0, r, lo)
        hi = np.where(g > 0, r, hi)
        with np.errstate(divide='ignore', invalid='ignore'):
            r_new = r - g / d2(r)
        outside = ~np.isfinite(r_new) | (r_new < lo) | (r_new > hi)
        r_new = np.where(outside & (g != 0), 0.5 * (lo + hi), r_new)
        r_new = np.where(g == 0, r, r_new)
        done = np.abs(r_new - r) <= DUAL_RTOL * np.abs(r_new)
        r = r_new
        if np.all(done):
            return r

    logging.debug(f"Convex dual iteration stalled after {n_iter + 1} "
                  f"iterations (max residual "
                  f"{np.max(np.abs(d1(r) - s)):.3e})")
    raise NumericalError(f"Convex dual did not converge within "
                         f"{DUAL_MAX_ITER} iterations")

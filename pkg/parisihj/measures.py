"""
Measures - :mod:`parisihj.measures`
===================================

Finitely supported probability measures on the nonnegative half-line and
the one-dimensional optimal transport between them.

On the half-line, the optimal coupling of two measures for any convex cost
is given by their quantile functions evaluated at a common uniform random
variable. For finitely supported measures both quantile functions are step
functions, so the coupling is described by a finite partition of [0, 1]
into intervals on which both quantiles are constant (the
:class:`CommonRefinement`).

Measures
--------

.. autosummary::
    DiscreteMeasure
    MeasureCDF
    canonicalize
    to_cdf
    truncate
    pushforward_txiprime


Couplings and transport
-----------------------

.. autosummary::
    CommonRefinement
    quantile
    refine
    w1
    transport_cost

"""
import json

import numpy as np
import pandas as pd

from parisihj.mixture import dual, evaluate


WEIGHT_TOL = 1e-12
LEVEL_TOL = 1e-13


class DiscreteMeasure:
    """A finitely supported probability measure on [0, inf).

    The constructor canonicalizes its input: atoms are sorted, repeated atoms
    are merged by summing their weights, zero weights are dropped and the
    weights are renormalized to sum to one. All derived quantities of a
    measure are unchanged by these operations, so every measure in this
    package is stored in canonical form.

    For a measure with atoms ``q_0 < ... < q_k``, the cumulative weights
    define the levels ``0 = zeta_0 < zeta_1 < ... < zeta_{k+1} = 1``; the
    weight of atom ``q_l`` is ``zeta_{l+1} - zeta_l``.

    Args:
        atoms (array-like): nonnegative atom locations
        weights (array-like): nonnegative weights with positive sum

    Raises:
        ValueError: for empty input, mismatched lengths, negative or
            non-finite values or an all-zero weight vector
    """
    def __init__(self, atoms, weights):
        atoms, weights = _canonical_arrays(atoms, weights)
        atoms.setflags(write=False)
        weights.setflags(write=False)
        self._atoms = atoms
        self._weights = weights

    @classmethod
    def dirac(cls, q):
        """Point mass at ``q``."""
        return cls([q], [1.0])

    @classmethod
    def empirical(cls, points):
        """Empirical measure with weight 1/k on each of the k points."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        return cls(points, np.full(points.shape, 1.0 / max(points.size, 1)))

    @property
    def atoms(self):
        """np.ndarray: strictly ascending atom locations (read-only)"""
        return self._atoms

    @property
    def weights(self):
        """np.ndarray: positive weights summing to one (read-only)"""
        return self._weights

    @property
    def k(self):
        """int: number of atoms minus one"""
        return self._atoms.size - 1

    @property
    def max_atom(self):
        """float: the largest atom"""
        return float(self._atoms[-1])

    def cumulative_weights(self):
        """Cumulative weights ``mu([0, q_l])``; the last entry is exactly 1."""
        cum = np.cumsum(self._weights)
        cum[-1] = 1.0
        return cum

    def zeta_levels(self):
        """Levels ``zeta_0 = 0, zeta_1, ..., zeta_{k+1} = 1``."""
        return np.concatenate([[0.0], self.cumulative_weights()])

    def mean(self):
        return float(np.dot(self._atoms, self._weights))

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (np.array_equal(self._atoms, other._atoms)
                and np.array_equal(self._weights, other._weights))

    def __hash__(self):
        return hash((self._atoms.tobytes(), self._weights.tobytes()))

    def __repr__(self):
        return (f"DiscreteMeasure(atoms={self._atoms.tolist()}, "
                f"weights={self._weights.tolist()})")

    def to_dict(self):
        return {'atoms': self._atoms.tolist(),
                'weights': self._weights.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, obj):
        """Create a measure from ``{"atoms": [...], "weights": [...]}``.

        ``obj`` may be JSON text or an already parsed dict.
        """
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(obj['atoms'], obj['weights'])
        except (KeyError, TypeError):
            raise ValueError("A measure must be given as a JSON object with "
                             "the keys 'atoms' and 'weights'")


def _canonical_arrays(atoms, weights):
    atoms = np.atleast_1d(np.asarray(atoms, dtype=float)).ravel()
    weights = np.atleast_1d(np.asarray(weights, dtype=float)).ravel()
    if atoms.size == 0:
        raise ValueError("A measure needs at least one atom")
    if atoms.size != weights.size:
        raise ValueError(f"Got {atoms.size} atoms but {weights.size} weights")
    if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
        raise ValueError("Atoms and weights must be finite")
    if np.any(atoms < 0):
        raise ValueError(f"Atoms must be >= 0, got {atoms.min()}")
    if np.any(weights < 0):
        raise ValueError(f"Weights must be >= 0, got {weights.min()}")
    total = weights.sum()
    if not total > 0:
        raise ValueError("The sum of the weights must be positive")

    unique, inverse = np.unique(atoms, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=weights,
                         minlength=unique.size)
    keep = merged > 0
    unique, merged = unique[keep], merged[keep]
    total = merged.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        merged = merged / total
    return unique, merged


def canonicalize(atoms, weights):
    """Create a canonical :class:`DiscreteMeasure` from raw atoms and weights.

    Atoms are sorted, duplicates merged by summing weights, zero weights
    dropped and the weights renormalized to sum to one.

    Args:
        atoms (array-like): atom locations ``>= 0``
        weights (array-like): weights ``>= 0`` with positive sum

    Returns:
        DiscreteMeasure

    Example::

        >>> canonicalize([2, 1, 1], [0.25, 0.25, 0.5])
        DiscreteMeasure(atoms=[1.0, 2.0], weights=[0.75, 0.25])
    """
    return DiscreteMeasure(atoms, weights)


def quantile(mu, r):
    """Quantile function ``inf{s >= 0 : mu([0, s]) > r}``.

    The inequality is strict: at a level equal to a cumulative weight the
    quantile jumps to the next atom.

    Args:
        mu (DiscreteMeasure): the measure
        r (float or array-like): levels in [0, 1)

    Returns:
        float or np.ndarray

    Raises:
        ValueError: if a level is outside [0, 1)
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(~(r_arr >= 0)) or np.any(~(r_arr < 1)):
        raise ValueError(f"Quantile levels must be in [0, 1), got {r}")
    idx = np.searchsorted(mu.cumulative_weights(), r_arr, side='right')
    values = mu.atoms[np.minimum(idx, mu.k)]
    if r_arr.ndim == 0:
        return float(values)
    return values


class CommonRefinement:
    """Joint quantile coupling of two measures.

    The coupling ``(X_mu, X_nu) = (F_mu^{-1}(U), F_nu^{-1}(U))`` with a
    uniform ``U`` is represented by breakpoints ``0 = r_0 < ... < r_m = 1``
    and the constant quantile values on each interval ``(r_i, r_{i+1})``.

    Args:
        levels (array-like): breakpoints, ascending from 0 to 1
        left (array-like): quantiles of the first measure per interval
        right (array-like): quantiles of the second measure per interval
    """
    def __init__(self, levels, left, right):
        self.levels = np.asarray(levels, dtype=float)
        self.left = np.asarray(left, dtype=float)
        self.right = np.asarray(right, dtype=float)
        if not (self.left.size == self.right.size == self.levels.size - 1):
            raise ValueError("A refinement with m intervals needs m + 1 "
                             "levels and m quantile pairs")

    @property
    def lengths(self):
        """np.ndarray: probability mass of each interval"""
        return np.diff(self.levels)

    def __len__(self):
        return self.left.size

    def marginal(self, side):
        """Reconstruct one of the coupled measures.

        Args:
            side (str): ``'left'`` or ``'right'``

        Returns:
            DiscreteMeasure
        """
        if side not in ('left', 'right'):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        values = self.left if side == 'left' else self.right
        return canonicalize(values, self.lengths)

    def to_frame(self):
        """The coupling as a table with one row per interval."""
        return pd.DataFrame({'r_lo': self.levels[:-1],
                             'r_hi': self.levels[1:],
                             'left': self.left,
                             'right': self.right})


def refine(mu, nu):
    """Common refinement of the quantile functions of two measures.

    Args:
        mu (DiscreteMeasure): first measure
        nu (DiscreteMeasure): second measure

    Returns:
        CommonRefinement

    Example::

        >>> ref = refine(DiscreteMeasure([1, 3], [0.5, 0.5]),
        ...              DiscreteMeasure.dirac(2))
        >>> ref.levels.tolist(), ref.left.tolist(), ref.right.tolist()
        ([0.0, 0.5, 1.0], [1.0, 3.0], [2.0, 2.0])
    """
    candidates = np.sort(np.concatenate([[0.0], mu.cumulative_weights(),
                                         nu.cumulative_weights()]))
    levels = [candidates[0]]
    for level in candidates[1:]:
        if level - levels[-1] > LEVEL_TOL:
            levels.append(level)
    levels = np.asarray(levels)
    levels[-1] = 1.0
    mids = 0.5 * (levels[:-1] + levels[1:])
    return CommonRefinement(levels, quantile(mu, mids), quantile(nu, mids))


def w1(mu, nu):
    """L1-Wasserstein distance ``E|X_mu - X_nu|`` under the quantile
    coupling."""
    ref = refine(mu, nu)
    return float(np.dot(ref.lengths, np.abs(ref.left - ref.right)))


def transport_cost(m, mu, nu, t):
    """Expected transport cost ``E[xi*((X_nu - X_mu) / t)]``.

    The caller multiplies by ``t`` where the Hopf-Lax penalty requires it.

    Args:
        m (MixtureSpec): the mixture defining the cost through its dual
        mu (DiscreteMeasure): source measure
        nu (DiscreteMeasure): target measure
        t (float): time, ``t > 0``

    Returns:
        float

    Raises:
        ValueError: if ``t <= 0``
    """
    if not t > 0:
        raise ValueError(f"The transport cost needs t > 0, got {t}")
    ref = refine(mu, nu)
    return float(np.dot(ref.lengths, dual(m, (ref.right - ref.left) / t)))


def pushforward_txiprime(m, nu, t):
    """Image of ``nu`` under the map ``r -> t * xi'(r)``.

    Args:
        m (MixtureSpec): the mixture
        nu (DiscreteMeasure): measure supported in [0, 1]
        t (float): time, ``t > 0``

    Returns:
        DiscreteMeasure

    Raises:
        ValueError: if ``t <= 0`` or an atom of ``nu`` exceeds 1
    """
    if not t > 0:
        raise ValueError(f"The pushforward needs t > 0, got {t}")
    if nu.max_atom > 1.0 + WEIGHT_TOL:
        raise ValueError(f"The measure must be supported in [0, 1], found an "
                         f"atom at {nu.max_atom}")
    atoms = np.minimum(nu.atoms, 1.0)
    return canonicalize(t * evaluate(m, atoms, 1), nu.weights)


def truncate(mu, c):
    """Image of ``mu`` under ``r -> min(r, c)``.

    Raises:
        ValueError: if ``c < 0``
    """
    if not c >= 0:
        raise ValueError(f"The truncation level must be >= 0, got {c}")
    return canonicalize(np.minimum(mu.atoms, c), mu.weights)


class MeasureCDF:
    """Right-continuous distribution function ``s -> mu([0, s])``.

    Two interpolation conventions are supported. With ``kind='step'`` the
    function is constant between breakpoints and jumps at each breakpoint
    (this is the distribution function of a discrete measure). With
    ``kind='linear'`` it is interpolated linearly between breakpoints, which
    represents measures with a piecewise constant density. In both cases the
    function is 0 left of the first breakpoint and equal to the last value
    right of the last breakpoint.

    Args:
        breakpoints (array-like): strictly ascending nonnegative reals
        values (array-like): nondecreasing values in [0, 1], the last one 1
        kind (str): ``'step'`` or ``'linear'``
    """
    def __init__(self, breakpoints, values, kind='step'):
        bp = np.atleast_1d(np.array(breakpoints, dtype=float))
        vals = np.atleast_1d(np.array(values, dtype=float))
        if kind not in ('step', 'linear'):
            raise ValueError(f"kind must be 'step' or 'linear', got {kind!r}")
        if bp.size == 0 or bp.size != vals.size:
            raise ValueError("Breakpoints and values must be non-empty and of "
                             "equal length")
        if np.any(bp < 0) or np.any(np.diff(bp) <= 0):
            raise ValueError("Breakpoints must be nonnegative and strictly "
                             "ascending")
        if np.any(vals < 0) or np.any(np.diff(vals) < 0):
            raise ValueError("CDF values must be nonnegative and "
                             "nondecreasing")
        if abs(vals[-1] - 1.0) > WEIGHT_TOL:
            raise ValueError(f"The last CDF value must be 1, got {vals[-1]}")
        vals[-1] = 1.0
        bp.setflags(write=False)
        vals.setflags(write=False)
        self.breakpoints = bp
        self.values = vals
        self.kind = kind

    @classmethod
    def uniform(cls, a, b):
        """Distribution function of the uniform law on ``[a, b]``."""
        if not 0 <= a <= b:
            raise ValueError(f"Need 0 <= a <= b, got a={a}, b={b}")
        if a == b:
            return cls([a], [1.0], kind='step')
        return cls([a, b], [0.0, 1.0], kind='linear')

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        if self.kind == 'step':
            idx = np.searchsorted(self.breakpoints, s_arr, side='right') - 1
            out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
        else:
            out = np.interp(s_arr, self.breakpoints, self.values,
                            left=0.0, right=1.0)
        if s_arr.ndim == 0:
            return float(out)
        return out

    @property
    def support_end(self):
        """float: the smallest breakpoint at which the CDF reaches 1"""
        idx = np.argmax(self.values >= 1.0 - WEIGHT_TOL)
        return float(self.breakpoints[idx])

    def to_frame(self):
        """Breakpoints and values as a table, e.g. for plotting."""
        return pd.DataFrame({'breakpoint': self.breakpoints,
                             'value': self.values})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.12g')

    def to_dict(self):
        return {'breakpoints': self.breakpoints.tolist(),
                'values': self.values.tolist(),
                'kind': self.kind}

    @classmethod
    def from_json(cls, obj):
        """Create a CDF from ``{"breakpoints": [...], "values": [...]}``.

        An optional ``"kind"`` entry selects the interpolation convention.
        """
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(obj['breakpoints'], obj['values'],
                       kind=obj.get('kind', 'step'))
        except (KeyError, TypeError, AttributeError):
            raise ValueError("A CDF must be given as a JSON object with the "
                             "keys 'breakpoints' and 'values'")


def to_cdf(mu):
    """Step distribution function of a discrete measure."""
    return MeasureCDF(mu.atoms, mu.cumulative_weights(), kind='step')

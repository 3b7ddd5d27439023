"""
Hopf-Lax solutions - :mod:`parisihj.hopflax`
============================================

Finite-dimensional Hopf-Lax evaluation of the Hamilton-Jacobi solution

.. math::

    f^{(k)}(t, x) = \\sup_{y \\in \\mathbb{R}_+^k} \\left( \\psi^{(k)}(y)
    - \\frac{t}{k} \\sum_{\\ell=1}^k \\xi^*\\left(\\frac{y_\\ell - x_\\ell}{t}
    \\right) \\right)

where ``psi^(k)(y)`` is the initial condition at the empirical measure
``k^-1 sum_l delta_{y_l}``. The value ``f^(k)(t, 0)`` approximates the Parisi
formula from below and increases along k = 1, 2, 4, ...

Besides the solver this module provides the classical form of the Parisi
functional, which serves as an independent oracle, and a finite difference
check of the finite-dimensional Hamilton-Jacobi equation.

Example::

    >>> from parisihj import MixtureSpec, PsiKind
    >>> from parisihj.hopflax import parisi_value
    >>> parisi_value(MixtureSpec({2: 1.0}), 0.1, 1, PsiKind.spherical())  # doctest: +SKIP
    0.0

.. autosummary::
    HopfLaxProblem
    HopfLaxResult
    SolverOptions
    objective
    solve
    parisi_value
    parisi_sweep
    classical_functional
    measure_objective
    localization_gain
    hj_residual

"""
import logging
import math
import threading
from itertools import combinations_with_replacement

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from parisihj.api import Cache
from parisihj.initial_condition import FieldGrid, PsiKind
from parisihj.measures import (DiscreteMeasure, pushforward_txiprime,
                               transport_cost, truncate)
from parisihj.mixture import MixtureSpec, dual, evaluate
from parisihj.utils import parallel_map


DEFAULT_SEED = 0x5A17C0DE2B1DF00D
RESTART_SPREAD_TOL = 1e-6
MONOTONICITY_TOL = 1e-8


class HopfLaxProblem:
    """A point ``(t, x)`` at which ``f^(k)`` is to be evaluated.

    Args:
        mixture (MixtureSpec): normalized mixture, ``xi(1) = 1``
        t (float): time, ``t >= 0``
        base (array-like): the ``k >= 1`` atoms ``x_l >= 0`` of the base
            measure
        psi_kind (PsiKind): initial condition, Ising by default
        grid (FieldGrid): field grid of the initial condition; by default it
            is chosen for the search box ``[0, max(base) + t xi'(1)]`` and
            then kept fixed for all evaluations of this problem

    Raises:
        ValueError: for invalid arguments
    """
    def __init__(self, mixture, t, base, psi_kind=None, grid=None):
        mixture = MixtureSpec(mixture)
        if not mixture.is_normalized:
            raise ValueError(f"The mixture must be normalized to xi(1) = 1, "
                             f"got xi(1) = {evaluate(mixture, 1.0)}")
        t = float(t)
        if not (np.isfinite(t) and t >= 0):
            raise ValueError(f"t must be a finite number >= 0, got {t}")
        base = np.atleast_1d(np.array(base, dtype=float))
        if base.ndim != 1 or base.size < 1:
            raise ValueError("The base point needs at least one coordinate")
        if not np.all(np.isfinite(base)) or np.any(base < 0):
            raise ValueError(f"Base coordinates must be finite and >= 0, got "
                             f"{base.tolist()}")
        base.setflags(write=False)

        self.mixture = mixture
        self.t = t
        self.base = base
        self.psi_kind = psi_kind if psi_kind is not None else PsiKind.ising()
        self.grid = (grid if grid is not None
                     else self.psi_kind.default_grid(self.box_hi))

    @property
    def k(self):
        return self.base.size

    @property
    def box_hi(self):
        """float: upper end of the search box, ``max(base) + t xi'(1)``"""
        return float(self.base.max() + self.t * evaluate(self.mixture, 1.0, 1))

    def replace(self, t=None, base=None):
        """Copy of the problem at another point, sharing the field grid."""
        return HopfLaxProblem(self.mixture,
                              self.t if t is None else t,
                              self.base if base is None else base,
                              self.psi_kind, self.grid)

    def __repr__(self):
        return (f"HopfLaxProblem(mixture={self.mixture!r}, t={self.t!r}, "
                f"base={self.base.tolist()}, psi_kind={self.psi_kind!r})")

    def to_dict(self):
        return {'mixture': self.mixture.to_dict(), 't': self.t,
                'base': self.base.tolist(),
                'psi_kind': self.psi_kind.to_dict(),
                'grid': None if self.grid is None else self.grid.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        grid = obj.get('grid')
        psi_kind = obj.get('psi_kind')
        return cls(MixtureSpec.from_json(obj['mixture']), obj['t'],
                   obj['base'],
                   None if psi_kind is None else PsiKind.from_dict(psi_kind),
                   None if grid is None else FieldGrid.from_dict(grid))


class SolverOptions:
    """Settings of :func:`solve`.

    Args:
        grid_points (int): grid resolution per coordinate of the global grid
            stage (used for ``k <= 3``)
        max_grid_evals (int): evaluation budget of the grid stage; the
            resolution is reduced until the number of ascending grid points
            fits
        n_seeds (int): number of best grid points used as restart seeds
        n_random (int): number of random ascending restart seeds
        sweep_tol (float): a restart stops when a full coordinate sweep
            improves the objective by less than this
        xatol (float): absolute tolerance of the one-dimensional searches
        max_sweeps (int): maximum number of sweeps per restart
        max_evals (int): maximum number of objective evaluations per restart;
            a restart that hits the limit is flagged as not converged
        seed (int): 64-bit seed of the random restart seeds
        threads (int): worker threads (None for the executor default)
        box_scale (float): factor applied to the search box
    """
    def __init__(self, grid_points=201, max_grid_evals=25000, n_seeds=4,
                 n_random=4, sweep_tol=1e-9, xatol=1e-8, max_sweeps=100,
                 max_evals=20000, seed=DEFAULT_SEED, threads=None,
                 box_scale=1.0):
        if grid_points < 2 or max_grid_evals < 1:
            raise ValueError("The grid stage needs grid_points >= 2 and a "
                             "positive evaluation budget")
        if n_seeds < 0 or n_random < 0:
            raise ValueError("Seed counts must be >= 0")
        if not box_scale > 0:
            raise ValueError(f"box_scale must be positive, got {box_scale}")
        self.grid_points = int(grid_points)
        self.max_grid_evals = int(max_grid_evals)
        self.n_seeds = int(n_seeds)
        self.n_random = int(n_random)
        self.sweep_tol = float(sweep_tol)
        self.xatol = float(xatol)
        self.max_sweeps = int(max_sweeps)
        self.max_evals = int(max_evals)
        self.seed = int(seed)
        self.threads = threads
        self.box_scale = float(box_scale)

    def grid_resolution(self, k):
        """Largest resolution ``n <= grid_points`` whose number of ascending
        grid points ``C(n + k - 1, k)`` fits the evaluation budget."""
        n = self.grid_points
        while n > 1 and math.comb(n + k - 1, k) > self.max_grid_evals:
            n -= 1
        return n

    def to_dict(self):
        return dict(vars(self))


class HopfLaxResult:
    """Outcome of :func:`solve`.

    Attributes:
        value (float): the best objective value found
        maximizer (np.ndarray): ascending maximizer
        n_restarts (int): number of local ascents
        n_evals (int): total number of objective evaluations
        converged (bool): False if the best restart hit its evaluation limit
        seed (int): seed of the random restarts
        restart_values (np.ndarray): best value of every restart
        restart_converged (np.ndarray): convergence flag of every restart
        spread (float): max - min of the values of converged restarts
    """
    def __init__(self, value, maximizer, n_restarts, n_evals, converged,
                 seed, restart_values=(), restart_converged=None):
        self.value = float(value)
        self.maximizer = np.sort(np.asarray(maximizer, dtype=float))
        self.n_restarts = int(n_restarts)
        self.n_evals = int(n_evals)
        self.converged = bool(converged)
        self.seed = int(seed)
        self.restart_values = np.asarray(restart_values, dtype=float)
        if restart_converged is None:
            restart_converged = np.ones(self.restart_values.size, dtype=bool)
        self.restart_converged = np.asarray(restart_converged, dtype=bool)

    @property
    def spread(self):
        values = self.restart_values[self.restart_converged]
        if values.size == 0:
            return 0.0
        return float(values.max() - values.min())

    def __repr__(self):
        return (f"HopfLaxResult(value={self.value!r}, "
                f"maximizer={self.maximizer.tolist()}, "
                f"converged={self.converged})")

    def to_dict(self):
        return {'value': self.value, 'maximizer': self.maximizer.tolist(),
                'n_restarts': self.n_restarts, 'n_evals': self.n_evals,
                'converged': self.converged, 'seed': self.seed,
                'restart_values': self.restart_values.tolist(),
                'restart_converged': self.restart_converged.tolist(),
                'spread': self.spread}


def objective(prob, y, matched=True):
    """Hopf-Lax objective ``psi^(k)(y) - (t/k) sum_l xi*((y_l - x_l) / t)``.

    Args:
        prob (HopfLaxProblem): the problem
        y (array-like): candidate with ``k`` nonnegative entries
        matched (bool): if True (default), ``y`` and the base are both
            sorted before pairing, which makes the objective invariant under
            permutations of ``y``; if False, the coordinates are paired in
            the given order

    Returns:
        float

    Raises:
        ValueError: for a length mismatch or negative entries
    """
    y = np.atleast_1d(np.array(y, dtype=float))
    if y.shape != prob.base.shape:
        raise ValueError(f"Expected {prob.k} coordinates, got {y.size}")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise ValueError(f"Coordinates must be finite and >= 0, got "
                         f"{y.tolist()}")
    base = prob.base
    if matched:
        y = np.sort(y)
        base = np.sort(base)

    psi = prob.psi_kind.evaluate(DiscreteMeasure.empirical(y), prob.grid)
    if prob.t == 0:
        return psi if np.array_equal(y, base) else -np.inf
    cost = np.mean(dual(prob.mixture, (y - base) / prob.t))
    return float(psi - prob.t * cost)


class _Evaluator:
    # objective with a thread-safe evaluation counter
    def __init__(self, prob):
        self.prob = prob
        self.n_evals = 0
        self._lock = threading.Lock()

    def __call__(self, y):
        with self._lock:
            self.n_evals += 1
        return objective(self.prob, y)


def _ascend(func, y0, box, opts):
    # coordinate-wise ascent within the ascending cone of [0, box]^k
    y = np.sort(np.clip(np.asarray(y0, dtype=float), 0.0, box))
    value = func(y)
    n_evals = 1
    k = y.size
    for _ in range(opts.max_sweeps):
        start = value
        for i in range(k):
            lo = y[i - 1] if i > 0 else 0.0
            hi = y[i + 1] if i < k - 1 else box
            if hi <= lo:
                continue

            def neg(v):
                z = y.copy()
                z[i] = v
                return -func(z)

            res = minimize_scalar(neg, bounds=(lo, hi), method='bounded',
                                  options={'xatol': opts.xatol})
            candidates = [(-res.fun, res.x), (-neg(lo), lo), (-neg(hi), hi)]
            n_evals += res.nfev + 2
            best, arg = max(candidates, key=lambda c: c[0])
            if best > value:
                value = best
                y[i] = arg
            if n_evals >= opts.max_evals:
                return value, y, False, n_evals
        if value - start < opts.sweep_tol:
            return value, y, True, n_evals
    return value, y, False, n_evals


def _grid_stage(func, k, box, opts):
    n = opts.grid_resolution(k)
    nodes = np.linspace(0.0, box, n)
    points = [nodes[list(idx)]
              for idx in combinations_with_replacement(range(n), k)]
    values = np.asarray(parallel_map(func, points, opts.threads))
    order = np.argsort(-values, kind='stable')[:opts.n_seeds]
    logging.debug(f"Grid stage: {len(points)} points, resolution {n}, best "
                  f"value {values.max():.12g}")
    return [points[i] for i in order]


@Cache.cached
def solve(prob, opts=None, extra_seeds=None):
    """Maximize the Hopf-Lax objective.

    The search runs over the ascending cone of the box
    ``[0, box_scale * (max(base) + t xi'(1))]^k``. For ``k <= 3`` a global
    grid stage evaluates all ascending grid points and supplies the best of
    them as seeds. Every seed (grid seeds, random ascending seeds, the base
    point and ``extra_seeds``) starts a local ascent by coordinate-wise
    bounded searches; the restarts run concurrently and the best result is
    returned. The base point is always a seed, so the value is at least the
    objective at the base.

    For ``t = 0`` the value is ``psi^(k)(base)``.

    Args:
        prob (HopfLaxProblem): the problem
        opts (SolverOptions): solver settings
        extra_seeds (list): additional starting points

    Returns:
        HopfLaxResult
    """
    if opts is None:
        opts = SolverOptions()
    if prob.t == 0:
        value = objective(prob, prob.base)
        return HopfLaxResult(value, prob.base, 0, 1, True, opts.seed,
                             [value])

    k = prob.k
    box = opts.box_scale * prob.box_hi
    func = _Evaluator(prob)
    logging.info(f"Solving Hopf-Lax problem with k={k}, t={prob.t:.6g} "
                 f"on [0, {box:.6g}]")

    seeds = []
    if k <= 3:
        seeds.extend(_grid_stage(func, k, box, opts))
    rng = np.random.default_rng(opts.seed)
    seeds.extend(np.sort(rng.uniform(0.0, box, size=(opts.n_random, k)),
                         axis=1))
    seeds.append(np.sort(prob.base))
    for seed in (extra_seeds or []):
        seed = np.asarray(seed, dtype=float)
        if seed.shape != (k, ):
            raise ValueError(f"Seeds need {k} coordinates, got {seed.size}")
        seeds.append(seed)

    restarts = parallel_map(lambda y0: _ascend(func, y0, box, opts), seeds,
                            opts.threads)
    values = np.array([r[0] for r in restarts])
    best = int(np.argmax(values))
    value, maximizer, converged, _ = restarts[best]
    result = HopfLaxResult(value, maximizer, len(seeds), func.n_evals,
                           converged, opts.seed, values,
                           [r[2] for r in restarts])
    for i, r in enumerate(restarts):
        logging.debug(f"Restart {i}: value {r[0]:.12g}, converged {r[2]}")

    if not converged:
        logging.warning(f"Hopf-Lax ascent did not converge within "
                        f"{opts.max_evals} evaluations; returning the best "
                        f"value found ({value:.12g})")
    if k > 3 and result.spread > RESTART_SPREAD_TOL:
        logging.warning(f"Restarts disagree by {result.spread:.3e}; the "
                        f"maximum may not be global")
    logging.info(f"Hopf-Lax value {value:.12g} after {func.n_evals} "
                 f"evaluations")
    return result


def parisi_result(m, t, k, psi_kind=None, opts=None, grid=None):
    """Solve for ``f^(k)(t, 0)``; see :func:`parisi_value`.

    Returns:
        HopfLaxResult
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)
    prob = HopfLaxProblem(m, t, np.zeros(k), psi_kind, grid)
    extra_seeds = None
    if k > 1 and prob.t > 0:
        single = solve(prob.replace(base=np.zeros(1)), opts)
        extra_seeds = [np.repeat(single.maximizer, k)]
        if k % 2 == 0 and k > 2:
            half = parisi_result(m, t, k // 2, prob.psi_kind, opts, prob.grid)
            extra_seeds.append(np.repeat(half.maximizer, 2))
    return solve(prob, opts, extra_seeds)


def parisi_value(m, t, k, psi_kind=None, opts=None, grid=None):
    """The Parisi value ``f^(k)(t, delta_0)`` at resolution k.

    For ``k > 1`` the one-atom maximizer, repeated k times, is added as a
    seed so that the value does not fall below the one-atom value. For even
    ``k > 2`` the maximizer at ``k // 2`` with every coordinate repeated
    twice is a seed as well, so doubling k never lowers the value.

    Args:
        m (MixtureSpec): normalized mixture
        t (float): time
        k (int): number of atoms, ``k >= 1``
        psi_kind (PsiKind): initial condition, Ising by default
        opts (SolverOptions): solver settings
        grid (FieldGrid): field grid

    Returns:
        float
    """
    return parisi_result(m, t, k, psi_kind, opts, grid).value


def parisi_sweep(m, t, k_max, psi_kind=None, opts=None, grid=None):
    """Parisi values along k = 1, 2, 4, ... up to ``k_max``.

    Every solve is seeded with the previous maximizer with each coordinate
    repeated twice. The candidate sets are nested, so the values are
    nondecreasing in k.

    Returns:
        pandas.DataFrame: columns ``k``, ``value``, ``maximizer``,
        ``converged``, ``n_evals``
    """
    if int(k_max) != k_max or k_max < 1:
        raise ValueError(f"k_max must be a positive integer, got {k_max}")
    prob = HopfLaxProblem(m, t, [0.0], psi_kind, grid)
    rows = list()
    previous = None
    k = 1
    while k <= k_max:
        extra_seeds = None if previous is None else [np.repeat(previous, 2)]
        res = solve(prob.replace(base=np.zeros(k)), opts, extra_seeds)
        rows.append({'k': k, 'value': res.value,
                     'maximizer': res.maximizer.tolist(),
                     'converged': res.converged, 'n_evals': res.n_evals})
        previous = res.maximizer
        k *= 2
    return pd.DataFrame(rows, columns=['k', 'value', 'maximizer',
                                       'converged', 'n_evals'])


def _require_normalized(m):
    m = MixtureSpec(m)
    if not m.is_normalized:
        raise ValueError(f"The mixture must be normalized to xi(1) = 1, "
                         f"got xi(1) = {evaluate(m, 1.0)}")
    return m


def measure_objective(m, t, base, mu, psi_kind=None, grid=None):
    """Hopf-Lax functional ``psi(mu) - t E[xi*((X_mu - X_base) / t)]`` at
    measure level, with the quantile coupling of ``base`` and ``mu``.

    Args:
        m (MixtureSpec): the mixture
        t (float): time, ``t > 0``
        base (DiscreteMeasure): base measure
        mu (DiscreteMeasure): candidate measure
        psi_kind (PsiKind): initial condition, Ising by default
        grid (FieldGrid): field grid

    Returns:
        float
    """
    psi_kind = psi_kind if psi_kind is not None else PsiKind.ising()
    cost = transport_cost(m, base, mu, t)
    return float(psi_kind.evaluate(mu, grid) - t * cost)


def classical_functional(m, t, nu, psi_kind=None, grid=None):
    """Classical form of the Parisi functional at ``nu``.

    .. math::

        t + \\psi((t\\xi')(\\nu)) - t\\xi'(1)
        + t \\left(\\xi'(1) - 1 - \\int (r\\xi'(r) - \\xi(r)) d\\nu(r)\\right)

    where the last term is the closed form of
    ``int_0^1 s xi''(s) nu([0, s]) ds`` and ``(t xi')(nu)`` is the image of
    ``nu`` under ``r -> t xi'(r)``.

    Args:
        m (MixtureSpec): normalized mixture
        t (float): time, ``t >= 0``
        nu (DiscreteMeasure): measure supported in [0, 1]
        psi_kind (PsiKind): initial condition, Ising by default
        grid (FieldGrid): field grid

    Returns:
        float

    Raises:
        ValueError: if ``nu`` has an atom outside [0, 1] or the mixture is
            not normalized
    """
    m = _require_normalized(m)
    psi_kind = psi_kind if psi_kind is not None else PsiKind.ising()
    if nu.max_atom > 1.0:
        raise ValueError(f"nu must be supported in [0, 1], found an atom at "
                         f"{nu.max_atom}")
    if not t >= 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return psi_kind.evaluate(DiscreteMeasure.dirac(0.0), grid)

    mu = pushforward_txiprime(m, nu, t)
    r = nu.atoms
    gap = np.dot(nu.weights, r * evaluate(m, r, 1) - evaluate(m, r))
    d1 = evaluate(m, 1.0, 1)
    return float(t + psi_kind.evaluate(mu, grid) - t * d1
                 + t * (d1 - 1.0 - gap))


def localization_gain(m, t, mu, psi_kind=None, grid=None):
    """Gain of truncating a candidate measure at ``t xi'(1)``.

    Returns the Hopf-Lax functional (base ``delta_0``) at
    ``truncate(mu, t xi'(1))`` minus its value at ``mu``. The gain is
    nonnegative, which is why the search box of :func:`solve` can be
    restricted.

    Returns:
        float
    """
    m = _require_normalized(m)
    psi_kind = psi_kind if psi_kind is not None else PsiKind.ising()
    if grid is None:
        grid = psi_kind.default_grid(mu.max_atom)
    base = DiscreteMeasure.dirac(0.0)
    cut = truncate(mu, t * evaluate(m, 1.0, 1))
    return (measure_objective(m, t, base, cut, psi_kind, grid)
            - measure_objective(m, t, base, mu, psi_kind, grid))


def hj_residual(prob, h, opts=None):
    """Finite difference residual of the finite-dimensional HJ equation
    ``d_t f - (1/k) sum_l xi(k d_{x_l} f) = 0``.

    All derivatives are central differences of :func:`solve` with step h on
    the field grid of ``prob``. Gradient components are clipped at 0 from
    below before ``xi`` is applied. A warning is logged if the solved values
    are not nondecreasing in t.

    Args:
        prob (HopfLaxProblem): interior point, ``t > h`` and all base
            coordinates ``> h``
        h (float): step, ``h > 0``
        opts (SolverOptions): solver settings

    Returns:
        float

    Raises:
        ValueError: if the point is not interior
    """
    if not h > 0:
        raise ValueError(f"The step must be positive, got {h}")
    if not prob.t > h:
        raise ValueError(f"Need t > h, got t={prob.t}, h={h}")
    if not np.all(prob.base > h):
        raise ValueError(f"All base coordinates must exceed h={h}, got "
                         f"{prob.base.tolist()}")

    def value(t, base):
        return solve(prob.replace(t=t, base=base), opts).value

    center = value(prob.t, prob.base)
    f_up = value(prob.t + h, prob.base)
    f_down = value(prob.t - h, prob.base)
    d_t = (f_up - f_down) / (2.0 * h)
    if f_up < center - MONOTONICITY_TOL or center < f_down - MONOTONICITY_TOL:
        logging.warning(f"Solved values are not nondecreasing in t around "
                        f"t={prob.t}: {f_down:.12g}, {center:.12g}, "
                        f"{f_up:.12g}")

    k = prob.k
    grad = np.empty(k)
    for i in range(k):
        step = np.zeros(k)
        step[i] = h
        grad[i] = (value(prob.t, prob.base + step)
                   - value(prob.t, prob.base - step)) / (2.0 * h)
    logging.debug(f"HJ residual: d_t f = {d_t:.12g}, grad = {grad.tolist()}")
    return float(d_t - np.mean(evaluate(prob.mixture,
                                        k * np.maximum(grad, 0.0))))

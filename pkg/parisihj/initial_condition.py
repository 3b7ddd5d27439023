"""
Initial conditions - :mod:`parisihj.initial_condition`
======================================================

Evaluation of the initial condition ``psi(mu)`` of the Hamilton-Jacobi
equation for a finitely supported measure ``mu`` on [0, inf).

Three settings are covered:

- product reference measures ``P_N = P_1^N`` with a finitely supported
  single site law ``P_1`` (the Ising case is ``P_1`` uniform on {-1, 1}),
  evaluated with the cascade recursion on a field grid
  (:func:`psi_product`),
- the Ising case through the associated Parisi PDE, which also accepts
  measures given only by their distribution function (:func:`psi_ising_pde`),
- the spherical reference measure through its closed variational formula
  (:func:`psi_spherical`).

In all cases ``psi`` is nonnegative and 1-Lipschitz with respect to the
L1-Wasserstein distance.

.. autosummary::
    SingleSiteLaw
    FieldGrid
    PsiKind
    psi_product
    psi_ising_pde
    psi_spherical
    spherical_objective

"""
import functools
import json
import logging

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from parisihj.measures import to_cdf
from parisihj.utils import AccuracyError, NumericalError


KERNEL_SDS = 8.0
GOLDEN_TOL = 1e-10
BRACKET_START = 1e-9
MAX_DOUBLINGS = 60


class SingleSiteLaw:
    """Finitely supported law ``P_1`` of a single spin.

    Args:
        atoms (array-like): spin values ``x_j`` with ``|x_j| <= 1``
        probs (array-like): positive probabilities summing to one

    Raises:
        ValueError: if the law is invalid
    """
    def __init__(self, atoms, probs):
        atoms = np.atleast_1d(np.array(atoms, dtype=float))
        probs = np.atleast_1d(np.array(probs, dtype=float))
        if atoms.size == 0 or atoms.size != probs.size:
            raise ValueError("A single site law needs the same positive "
                             "number of atoms and probabilities")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(probs))):
            raise ValueError("Atoms and probabilities must be finite")
        if np.any(probs <= 0):
            raise ValueError("All probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"Probabilities must sum to 1, got "
                             f"{probs.sum()}")
        if np.any(np.abs(atoms) > 1.0 + 1e-12):
            raise ValueError("Spin values must lie in [-1, 1]")
        if np.unique(atoms).size != atoms.size:
            raise ValueError("Spin values must be distinct")
        order = np.argsort(atoms)
        self.atoms = atoms[order]
        self.probs = probs[order]
        self.atoms.setflags(write=False)
        self.probs.setflags(write=False)

    @classmethod
    def ising(cls):
        """Uniform law on {-1, 1}."""
        return cls([-1.0, 1.0], [0.5, 0.5])

    @property
    def is_ising(self):
        return (self.atoms.tolist() == [-1.0, 1.0]
                and self.probs.tolist() == [0.5, 0.5])

    @property
    def min_gap(self):
        """float: smallest distance between two spin values (inf for a
        single value)"""
        if self.atoms.size < 2:
            return np.inf
        return float(np.min(np.diff(self.atoms)))

    def terminal(self, x, q):
        """Terminal profile ``log sum_j p_j exp(x x_j - q x_j^2)``."""
        x = np.asarray(x, dtype=float)
        exponents = np.multiply.outer(x, self.atoms) - q * self.atoms ** 2
        return logsumexp(exponents, axis=-1, b=self.probs)

    def __eq__(self, other):
        if not isinstance(other, SingleSiteLaw):
            return NotImplemented
        return (np.array_equal(self.atoms, other.atoms)
                and np.array_equal(self.probs, other.probs))

    def __repr__(self):
        return (f"SingleSiteLaw(atoms={self.atoms.tolist()}, "
                f"probs={self.probs.tolist()})")

    def to_dict(self):
        return {'atoms': self.atoms.tolist(), 'probs': self.probs.tolist()}

    @classmethod
    def from_json(cls, obj):
        """Create a law from ``{"atoms": [...], "probs": [...]}``."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(obj['atoms'], obj['probs'])
        except (KeyError, TypeError):
            raise ValueError("A single site law must be given as a JSON "
                             "object with the keys 'atoms' and 'probs'")


class FieldGrid:
    """Discretization of the field variable x and of the PDE time.

    The grid has ``n_x`` equidistant nodes on ``[-L, L]``; ``n_x`` is odd so
    that ``x = 0`` is a node.

    Args:
        half_width (float): ``L > 0``
        n_x (int): odd number of nodes, at least 3
        ds (float): time step of the PDE solver
        scheme (str): ``'semi-implicit'`` (default) or ``'explicit'``; the
            explicit scheme requires ``ds <= dx**2 / 2``
        slope_tol (float): tolerance of the boundary slope check of
            :func:`psi_product`
    """
    def __init__(self, half_width, n_x=2049, ds=1e-3, scheme='semi-implicit',
                 slope_tol=1e-6):
        if not half_width > 0:
            raise ValueError(f"The half-width must be positive, got "
                             f"{half_width}")
        if int(n_x) != n_x or n_x < 3 or n_x % 2 == 0:
            raise ValueError(f"n_x must be an odd integer >= 3, got {n_x}")
        if not ds > 0:
            raise ValueError(f"The time step must be positive, got {ds}")
        if scheme not in ('semi-implicit', 'explicit'):
            raise ValueError(f"Unknown scheme {scheme!r}")
        self.half_width = float(half_width)
        self.n_x = int(n_x)
        self.ds = float(ds)
        self.scheme = scheme
        self.slope_tol = float(slope_tol)
        if scheme == 'explicit' and self.ds > self.dx ** 2 / 2:
            raise ValueError(f"The explicit scheme needs ds <= dx^2 / 2 = "
                             f"{self.dx ** 2 / 2:.3e}, got ds = {self.ds}")

    @classmethod
    def default(cls, q_max, p1=None, **kwargs):
        """Default grid for measures supported in ``[0, q_max]``.

        The half-width is ``8 + q_max + 6 sqrt(2 q_max)``. For single site
        laws whose spin values are closer than 2, the profile approaches
        its linear asymptote more slowly and the half-width is scaled by
        ``2 / min_gap``.
        """
        q_max = max(float(q_max), 0.0)
        half_width = 8.0 + q_max + 6.0 * np.sqrt(2.0 * q_max)
        if p1 is not None and p1.min_gap < 2.0:
            half_width *= 2.0 / p1.min_gap
        return cls(half_width, **kwargs)

    @property
    def dx(self):
        return 2.0 * self.half_width / (self.n_x - 1)

    @property
    def center(self):
        """int: index of the node x = 0"""
        return (self.n_x - 1) // 2

    @property
    def nodes(self):
        return np.linspace(-self.half_width, self.half_width, self.n_x)

    def __eq__(self, other):
        if not isinstance(other, FieldGrid):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return (f"FieldGrid(half_width={self.half_width!r}, n_x={self.n_x}, "
                f"ds={self.ds!r}, scheme={self.scheme!r})")

    def to_dict(self):
        return {'half_width': self.half_width, 'n_x': self.n_x,
                'ds': self.ds, 'scheme': self.scheme,
                'slope_tol': self.slope_tol}

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


@functools.lru_cache(maxsize=2048)
def _gaussian_kernel(variance, dx):
    # normalized weights of a centered Gaussian sampled on the grid; kernels
    # narrower than one grid spacing are replaced by the three-point kernel
    # with the same variance
    if variance <= 0:
        kernel = np.ones(1)
    elif variance < dx * dx:
        a = variance / (2.0 * dx * dx)
        kernel = np.array([a, 1.0 - 2.0 * a, a])
    else:
        sd = np.sqrt(variance)
        half = int(np.ceil(KERNEL_SDS * sd / dx))
        offsets = dx * np.arange(-half, half + 1)
        kernel = np.exp(-offsets ** 2 / (2.0 * variance))
        kernel /= kernel.sum()
    kernel.setflags(write=False)
    return kernel


def _smooth(f, kernel, zeta):
    # zeta^{-1} log E exp(zeta f(x + g)) for a Gaussian g, or E f(x + g)
    # for zeta = 0; returns the len(f) - len(kernel) + 1 interior values
    if kernel.size == 1:
        return f.copy()
    if zeta == 0:
        return np.convolve(f, kernel, mode='valid')
    h = zeta * f
    shift = h.max()
    conv = np.convolve(np.exp(h - shift), kernel, mode='valid')
    if np.any(conv <= 0):
        raise NumericalError("Underflow in the log-domain convolution")
    return (np.log(conv) + shift) / zeta


def _extend_linear(f, pad, dx, slopes, slope_tol):
    # extend a profile by `pad` nodes on both sides with its boundary slopes
    left = (f[1] - f[0]) / dx
    right = (f[-1] - f[-2]) / dx
    deviation = max(abs(left - slopes[0]), abs(right - slopes[1]))
    if deviation > slope_tol:
        raise AccuracyError(f"The field grid is too small: the boundary "
                            f"slope deviates from its asymptote by "
                            f"{deviation:.2e}. Use a larger half-width L.")
    steps = dx * np.arange(1, pad + 1)
    return np.concatenate([f[0] - left * steps[::-1], f,
                           f[-1] + right * steps])


def psi_product(p1, mu, grid=None):
    """Initial condition for a product reference measure.

    With atoms ``q_0 < ... < q_k`` of ``mu`` and levels ``zeta_l``, the
    terminal profile ``g(x) = log sum_j p_j exp(x x_j - q_k x_j^2)`` is
    propagated down the levels ``l = k, ..., 0``: a Gaussian convolution with
    variance ``2 (q_l - q_{l-1})`` (``q_{-1} = 0``) followed by
    ``zeta_l^{-1} log E exp(zeta_l .)``, where ``zeta_0 = 0`` means a plain
    expectation. The result is minus the value at ``x = 0``.

    Each level is evaluated only on the window of nodes the levels below
    need around ``x = 0``. Windows reaching beyond ``[-L, L]`` are continued
    linearly; this is only done if the profile slope at the boundary agrees
    with its asymptote (the extreme spin values) to ``grid.slope_tol``.

    Args:
        p1 (SingleSiteLaw): the single site law
        mu (DiscreteMeasure): the measure
        grid (FieldGrid): field grid; defaults to
            :meth:`FieldGrid.default` for the largest atom of ``mu``

    Returns:
        float: ``psi(mu) >= 0``

    Raises:
        AccuracyError: if the grid is too small
    """
    if grid is None:
        grid = FieldGrid.default(mu.max_atom, p1)
    dx = grid.dx
    c = grid.center
    q = mu.atoms
    zetas = mu.zeta_levels()
    variances = 2.0 * np.diff(np.concatenate([[0.0], q]))
    kernels = [_gaussian_kernel(float(v), dx) for v in variances]
    widths = [(kern.size - 1) // 2 for kern in kernels]
    reach = np.concatenate([[0], np.cumsum(widths)])
    slopes = (p1.atoms[0], p1.atoms[-1])

    k = mu.k
    half = min(reach[k], c) + widths[k]
    f = p1.terminal(dx * np.arange(-half, half + 1), q[k])
    for level in range(k, -1, -1):
        have = (f.size - 1) // 2
        out_half = min(reach[level], c)
        start = have - out_half - widths[level]
        f_in = f[start:start + 2 * (out_half + widths[level]) + 1]
        f = _smooth(f_in, kernels[level], zetas[level])
        if out_half < reach[level]:
            logging.debug(f"Continuing level {level} linearly beyond the "
                          f"field grid by {reach[level] - out_half} nodes")
            f = _extend_linear(f, reach[level] - out_half, dx, slopes,
                               grid.slope_tol)
    return float(-f[0])


def psi_ising_pde(cdf, q_max, grid=None):
    """Ising initial condition through the Parisi PDE.

    Solves ``d_s u + d_xx u - mu([0, s]) (d_x u)^2 + 1 = 0`` backwards from
    ``u(q_max, x) = -log cosh(x)`` and returns ``u(0, 0)``.

    The Laplacian is treated implicitly (Crank-Nicolson, tridiagonal solve)
    and the gradient term explicitly with a predictor-corrector average.
    Time steps are aligned with the breakpoints of the distribution function
    so that ``mu([0, s])`` is smooth within every step. The boundary
    conditions are ``d_x u(-L) = 1`` and ``d_x u(L) = -1``, the far-field
    slopes of ``-log cosh``. With ``grid.scheme == 'explicit'`` both terms
    are explicit.

    Args:
        cdf (MeasureCDF): distribution function of ``mu``
        q_max (float): terminal time, with ``cdf(q_max) = 1``
        grid (FieldGrid): field grid; defaults to :meth:`FieldGrid.default`

    Returns:
        float

    Raises:
        ValueError: if ``q_max < 0`` or ``cdf(q_max) < 1``
        NumericalError: if the gradient term violates its step bound or
            the solution becomes non-finite
    """
    if not q_max >= 0:
        raise ValueError(f"q_max must be >= 0, got {q_max}")
    if cdf(q_max) < 1.0 - 1e-12:
        raise ValueError(f"The distribution function must reach 1 at q_max = "
                         f"{q_max}, got {cdf(q_max)}")
    if grid is None:
        grid = FieldGrid.default(q_max)
    dx = grid.dx
    if 2.0 * grid.ds > dx:
        raise NumericalError(f"Time step {grid.ds} violates the bound "
                             f"ds <= dx / 2 = {dx / 2:.3e} of the explicit "
                             f"gradient term")

    x = grid.nodes
    u = -(np.logaddexp(x, -x) - np.log(2.0))
    if q_max == 0:
        return float(u[grid.center])

    n_steps = int(np.ceil(q_max / grid.ds))
    inner = cdf.breakpoints[(cdf.breakpoints > 0) & (cdf.breakpoints < q_max)]
    s_nodes = np.unique(np.concatenate([np.linspace(0.0, q_max, n_steps + 1),
                                        inner]))
    theta = 0.5 if grid.scheme == 'semi-implicit' else 0.0
    boundary = np.zeros_like(u)
    boundary[0] = boundary[-1] = -2.0 / dx

    for i in range(s_nodes.size - 1, 0, -1):
        tau = s_nodes[i] - s_nodes[i - 1]
        m = cdf(0.5 * (s_nodes[i] + s_nodes[i - 1]))
        forcing = 1.0 - m * _gradient_squared(u, dx)
        u_pred = _pde_step(u, forcing, tau, theta, dx, boundary)
        if theta > 0:
            forcing = 0.5 * (forcing + 1.0 - m * _gradient_squared(u_pred, dx))
            u_pred = _pde_step(u, forcing, tau, theta, dx, boundary)
        u = u_pred
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"The PDE solution became non-finite at "
                                 f"s = {s_nodes[i - 1]}")
    return float(u[grid.center])


def _laplacian(u, dx):
    # second differences with the Neumann ghost nodes folded in (the
    # constant boundary contribution is added separately)
    out = np.empty_like(u)
    out[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    out[0] = 2.0 * (u[1] - u[0])
    out[-1] = 2.0 * (u[-2] - u[-1])
    return out / dx ** 2


def _gradient_squared(u, dx):
    grad = np.empty_like(u)
    grad[1:-1] = (u[2:] - u[:-2]) / (2.0 * dx)
    grad[0] = 1.0
    grad[-1] = -1.0
    return grad ** 2


def _pde_step(u, forcing, tau, theta, dx, boundary):
    rhs = u + tau * ((1.0 - theta) * _laplacian(u, dx) + boundary + forcing)
    if theta == 0:
        return rhs
    r = theta * tau / dx ** 2
    n = u.size
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :] = -r
    ab[0, 1] = -2.0 * r
    ab[2, n - 2] = -2.0 * r
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _spherical_pieces(mu, q):
    # breakpoints 0 = p_0 < ... < p_m = q, the constant value of
    # mu([0, .]) on each [p_i, p_{i+1}) and c(p_i) = 2 int_{p_i}^q mu([0, r]) dr
    points = np.unique(np.concatenate([[0.0], mu.atoms, [q]]))
    cdf = to_cdf(mu)
    levels = cdf(points[:-1])
    lengths = np.diff(points)
    c = np.zeros_like(points)
    c[:-1] = np.cumsum((2.0 * levels * lengths)[::-1])[::-1]
    return lengths, levels, c


def _spherical_value(pieces, q, b):
    lengths, levels, c = pieces
    integral = 0.0
    for length, level, c_lo, c_hi in zip(lengths, levels, c[:-1], c[1:]):
        if level > 0:
            integral += np.log1p((c_lo - c_hi) / (b - c_lo)) / (2.0 * level)
        else:
            integral += length / (b - c_hi)
    return float(integral + 0.5 * (b - 1.0 - np.log(b)) - q)


def spherical_objective(mu, q, b):
    """The objective ``int_0^q ds / (b - c(s)) + (b - 1 - log b) / 2 - q``.

    Here ``c(s) = 2 int_s^q mu([0, r]) dr``. The integral is evaluated in
    closed form on the pieces where ``mu([0, .])`` is constant.

    Args:
        mu (DiscreteMeasure): the measure
        q (float): upper integration limit with ``mu([0, q]) = 1``
        b (float): ``b > c(0)``

    Returns:
        float

    Raises:
        ValueError: if ``q`` is below the support or ``b <= c(0)``
    """
    if q < mu.max_atom:
        raise ValueError(f"q = {q} must be at least the largest atom "
                         f"{mu.max_atom}")
    pieces = _spherical_pieces(mu, q)
    c0 = pieces[2][0]
    if not b > c0:
        raise ValueError(f"b = {b} must exceed c(0) = {c0}")
    return _spherical_value(pieces, q, b)


def psi_spherical(mu, q=None):
    """Spherical initial condition, the infimum over ``b > c(0)`` of
    :func:`spherical_objective`.

    The objective is convex in ``b`` and tends to infinity at both ends of
    its domain. The minimum is bracketed by doubling the distance from
    ``c(0)`` and located by golden-section search.

    Args:
        mu (DiscreteMeasure): the measure
        q (float): upper integration limit; defaults to the largest atom.
            The value does not depend on this choice.

    Returns:
        float

    Raises:
        NumericalError: if no bracket is found within 60 doublings
    """
    if q is None:
        q = mu.max_atom
    if q < mu.max_atom:
        raise ValueError(f"q = {q} must be at least the largest atom "
                         f"{mu.max_atom}")
    pieces = _spherical_pieces(mu, q)
    c0 = pieces[2][0]

    def func(b):
        return _spherical_value(pieces, q, b)

    lo = c0 + BRACKET_START
    mid, hi = c0 + 1.0, c0 + 2.0
    f_lo, f_mid, f_hi = func(lo), func(mid), func(hi)
    for _ in range(MAX_DOUBLINGS):
        if f_hi >= f_mid:
            break
        mid, f_mid = hi, f_hi
        hi = c0 + 2.0 * (hi - c0)
        f_hi = func(hi)
    else:
        raise NumericalError("Could not bracket the minimum of the spherical "
                             "objective")
    for _ in range(MAX_DOUBLINGS):
        if f_mid < f_lo:
            break
        hi, f_hi = mid, f_mid
        mid = c0 + 0.5 * (mid - c0)
        if mid <= lo:
            break
        f_mid = func(mid)
    if not (lo < mid and f_mid < f_lo):
        raise NumericalError("Could not bracket the minimum of the spherical "
                             "objective")
    if f_hi == f_mid:
        mid = 0.5 * (mid + hi)
        f_mid = func(mid)

    res = minimize_scalar(func, bracket=(lo, mid, hi), method='golden',
                          options={'xtol': GOLDEN_TOL})
    return float(min(res.fun, f_mid))


class PsiKind:
    """Selects the initial condition evaluator.

    Use the constructors :meth:`ising`, :meth:`spherical` and
    :meth:`product`, or :meth:`from_name`.

    Args:
        name (str): ``'ising'``, ``'spherical'`` or ``'product'``
        p1 (SingleSiteLaw): single site law, required for ``'product'``
        method (str): ``'cascade'`` (default) or ``'pde'``; the PDE is only
            available for the Ising law
    """
    NAMES = ('ising', 'spherical', 'product')

    def __init__(self, name, p1=None, method='cascade'):
        if name not in self.NAMES:
            raise ValueError(f"Unknown initial condition {name!r}, expected "
                             f"one of {', '.join(self.NAMES)}")
        if method not in ('cascade', 'pde'):
            raise ValueError(f"Unknown evaluation method {method!r}")
        if name == 'ising':
            p1 = SingleSiteLaw.ising()
        elif name == 'product' and p1 is None:
            raise ValueError("A product initial condition needs a single site "
                             "law")
        elif name == 'spherical':
            p1 = None
        if method == 'pde' and (p1 is None or not p1.is_ising):
            raise ValueError("The PDE evaluation is only available for the "
                             "Ising law")
        self.name = name
        self.p1 = p1
        self.method = method

    @classmethod
    def ising(cls, method='cascade'):
        return cls('ising', method=method)

    @classmethod
    def spherical(cls):
        return cls('spherical')

    @classmethod
    def product(cls, p1):
        return cls('product', p1=p1)

    @classmethod
    def from_name(cls, name, p1=None, method='cascade'):
        return cls(name, p1=p1, method=method)

    def default_grid(self, q_max):
        """Field grid for measures supported in ``[0, q_max]``, or None for
        the spherical case."""
        if self.p1 is None:
            return None
        return FieldGrid.default(q_max, self.p1)

    def evaluate(self, mu, grid=None):
        """Evaluate ``psi(mu)``.

        Args:
            mu (DiscreteMeasure): the measure
            grid (FieldGrid): field grid (ignored in the spherical case)

        Returns:
            float
        """
        if self.name == 'spherical':
            return psi_spherical(mu)
        if self.method == 'pde':
            return psi_ising_pde(to_cdf(mu), mu.max_atom, grid)
        return psi_product(self.p1, mu, grid)

    def __call__(self, mu, grid=None):
        return self.evaluate(mu, grid)

    def __eq__(self, other):
        if not isinstance(other, PsiKind):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        if self.name == 'product':
            return f"PsiKind.product({self.p1!r})"
        return f"PsiKind({self.name!r}, method={self.method!r})"

    def to_dict(self):
        out = {'name': self.name, 'method': self.method}
        if self.name == 'product':
            out['p1'] = self.p1.to_dict()
        return out

    @classmethod
    def from_dict(cls, obj):
        p1 = obj.get('p1')
        if p1 is not None:
            p1 = SingleSiteLaw.from_json(p1)
        return cls(obj['name'], p1=p1, method=obj.get('method', 'cascade'))

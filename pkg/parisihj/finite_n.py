"""
Finite-N reference values - :mod:`parisihj.finite_n`
====================================================

Ground truth at finite system size for the Ising mixed p-spin model:

- Monte Carlo over the disorder of the free energy
  ``-(1/N) E log 2^-N sum_sigma exp(sqrt(2t) H_N(sigma) - N t)`` with exact
  enumeration of all ``2^N`` spin configurations (:func:`free_energy_plain`),
- the enriched free energy at ``N = 1`` by tensor Gauss-Hermite quadrature
  (:func:`enriched_free_energy_n1`),
- sampling of Poisson-Dirichlet cascades and their overlap statistics
  (:func:`sample_cascade`, :func:`overlap_statistic`).

The Hamiltonian is built from independent standard Gaussian couplings,

.. math::

    H_N(\\sigma) = \\sum_p \\sqrt{\\beta_p} N^{-(p-1)/2}
    \\sum_{i_1, \\ldots, i_p} J_{i_1 \\ldots i_p}
    \\sigma_{i_1} \\cdots \\sigma_{i_p},

so that ``E H_N(sigma) H_N(tau) = N xi(sigma . tau / N)``.

.. autosummary::
    DisorderSample
    CascadeSample
    hamiltonian
    free_energy_samples
    free_energy_plain
    n_sweep
    sample_cascade
    sample_cascades
    overlap_statistic
    overlap_table
    enriched_free_energy_n1

"""
import logging

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from parisihj.api import Cache
from parisihj.mixture import MixtureSpec, evaluate
from parisihj.utils import UnsupportedSizeError, parallel_map


MAX_N = 22
MAX_LOW_SPINS = 10
BLOCK_BUDGET = 1 << 24
MAX_CASCADE_LEAVES = 1 << 24
TRUNCATION_WARN = 1e-6
MAX_QUADRATURE_DIMS = 4


class DisorderSample:
    """Gaussian couplings of one disorder realization.

    Args:
        mixture (MixtureSpec): the mixture
        N (int): number of spins
        couplings (dict): degree ``p`` to an array of shape ``(N,) * p``
        seed: the seed the couplings were generated from, if any
    """
    def __init__(self, mixture, N, couplings, seed=None):
        self.mixture = MixtureSpec(mixture)
        self.N = int(N)
        for p in self.mixture.degrees:
            if couplings[p].shape != (self.N, ) * p:
                raise ValueError(f"Couplings of degree {p} must have shape "
                                 f"{(self.N, ) * p}")
        self.couplings = {p: couplings[p] for p in self.mixture.degrees}
        self.seed = seed

    @classmethod
    def generate(cls, mixture, N, seed):
        """Draw the couplings; the same seed gives bit-identical couplings.

        Args:
            mixture (MixtureSpec): the mixture
            N (int): number of spins, ``N >= 1``
            seed (int or numpy.random.SeedSequence): seed

        Returns:
            DisorderSample
        """
        if int(N) != N or N < 1:
            raise ValueError(f"N must be a positive integer, got {N}")
        mixture = MixtureSpec(mixture)
        rng = np.random.default_rng(seed)
        couplings = {p: rng.standard_normal((int(N), ) * p)
                     for p in mixture.degrees}
        return cls(mixture, N, couplings, seed)

    def coefficient(self, p):
        """Prefactor ``sqrt(beta_p) N^(-(p-1)/2)`` of degree p."""
        return np.sqrt(self.mixture.coeffs[p]) * self.N ** (-(p - 1) / 2)

    def hamiltonian(self, sigma):
        return hamiltonian(self, sigma)


def hamiltonian(d, sigma):
    """Energy ``H_N(sigma)`` of a spin configuration.

    Args:
        d (DisorderSample): the couplings
        sigma (array-like): spins in {-1, 1}, length N

    Returns:
        float

    Raises:
        ValueError: for a length mismatch or spins other than +-1
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (d.N, ):
        raise ValueError(f"Expected {d.N} spins, got shape {sigma.shape}")
    if not np.all(np.abs(sigma) == 1):
        raise ValueError("Spins must be -1 or 1")
    energy = 0.0
    for p, couplings in d.couplings.items():
        value = couplings
        for _ in range(p):
            value = value @ sigma
        energy += d.coefficient(p) * value
    return float(energy)


def _low_block_size(N, p_max):
    b = min(N, MAX_LOW_SPINS)
    while b > 1 and N ** (p_max - 1) * (1 << b) > BLOCK_BUDGET:
        b -= 1
    return b


def _contract(acc, spins, N, p):
    # contract the remaining p - 1 spin axes of acc (N^(p-1), n_conf)
    for _ in range(p - 1):
        acc = np.einsum('mic,ic->mc', acc.reshape(-1, N, acc.shape[-1]),
                        spins)
    return acc[0]


def log_partition(d, t):
    """``log sum_sigma exp(sqrt(2t) H_N(sigma))`` by exhaustive enumeration.

    The configurations are split into blocks: the first ``b <= 10`` spins
    take all ``2^b`` values at once, the remaining spins are enumerated in
    Gray code order. For every degree, the partial contraction of the
    couplings with the last spin index is updated by a single column when a
    high spin flips, which makes the cost per configuration ``O(N^(p-1))``.

    Args:
        d (DisorderSample): the couplings
        t (float): time, ``t >= 0``

    Returns:
        float
    """
    N = d.N
    b = _low_block_size(N, max(d.couplings))
    n_low = 1 << b
    n_high = N - b
    low = 1.0 - 2.0 * ((np.arange(n_low)[:, None] >> np.arange(b)) & 1)
    scale = np.sqrt(2.0 * t)

    spins = np.empty((N, n_low))
    spins[:b] = low.T
    s_high = np.ones(n_high)
    terms = list()
    for p, couplings in d.couplings.items():
        flat = couplings.reshape(-1, N)
        acc_low = flat[:, :b] @ low.T
        j_high = flat[:, b:]
        terms.append((p, d.coefficient(p), acc_low, j_high, j_high @ s_high))

    block_lse = np.empty(1 << n_high)
    for j in range(1 << n_high):
        if j > 0:
            flip = (j & -j).bit_length() - 1
            for term in terms:
                term[4][:] -= 2.0 * s_high[flip] * term[3][:, flip]
            s_high[flip] = -s_high[flip]
        spins[b:] = s_high[:, None]
        energy = np.zeros(n_low)
        for p, coef, acc_low, _, acc_high in terms:
            energy += coef * _contract(acc_low + acc_high[:, None], spins, N, p)
        block_lse[j] = logsumexp(scale * energy)
    return float(logsumexp(block_lse))


def _check_plain_args(N, t, n_samples):
    if int(N) != N or not 1 <= N <= MAX_N:
        raise ValueError(f"N must be an integer in [1, {MAX_N}] for exact "
                         f"enumeration, got {N}")
    if not t >= 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError(f"n_samples must be a positive integer, got "
                         f"{n_samples}")


def free_energy_samples(m, N, t, n_samples, seed, threads=None):
    """Free energy of every disorder sample.

    Each sample gives
    ``-(1/N) [log sum_sigma exp(sqrt(2t) H_N(sigma)) - N t - N log 2]``.
    The seeds of the samples are spawned deterministically from ``seed``.

    Args:
        m (MixtureSpec): the mixture
        N (int): number of spins, ``1 <= N <= 22``
        t (float): time, ``t >= 0``
        n_samples (int): number of disorder samples
        seed (int): seed
        threads (int): worker threads

    Returns:
        np.ndarray: one value per sample
    """
    _check_plain_args(N, t, n_samples)
    N = int(N)
    if t == 0:
        return np.zeros(int(n_samples))
    m = MixtureSpec(m)
    children = np.random.SeedSequence(seed).spawn(int(n_samples))

    def _one(child):
        d = DisorderSample.generate(m, N, child)
        return -(log_partition(d, t) - N * t - N * np.log(2.0)) / N

    logging.info(f"Enumerating {2 ** N} configurations for "
                 f"{n_samples} disorder samples (N={N}, t={t})")
    return np.asarray(parallel_map(_one, children, threads))


def _mean_and_error(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), np.nan
    return (float(values.mean()),
            float(values.std(ddof=1) / np.sqrt(values.size)))


@Cache.cached
def free_energy_plain(m, N, t, n_samples, seed, threads=None):
    """Disorder average of the finite-N free energy.

    See :func:`free_energy_samples` for the arguments.

    Returns:
        tuple: ``(mean, std_error)``; the standard error is the sample
        standard deviation over ``sqrt(n_samples)`` (nan for one sample)
    """
    return _mean_and_error(free_energy_samples(m, N, t, n_samples, seed,
                                               threads))


def n_sweep(m, Ns, t, n_samples, seed, threads=None):
    """Free energies for several system sizes.

    Returns:
        pandas.DataFrame: columns ``N``, ``mean``, ``std_error``,
        ``n_samples``
    """
    rows = list()
    for N in Ns:
        mean, std_error = free_energy_plain(m, N, t, n_samples, seed, threads)
        rows.append({'N': int(N), 'mean': mean, 'std_error': std_error,
                     'n_samples': int(n_samples)})
    return pd.DataFrame(rows, columns=['N', 'mean', 'std_error', 'n_samples'])


class CascadeSample:
    """Truncated Poisson-Dirichlet cascade.

    Vertices at depth ``d`` are indexed by arrays of shape ``(M,) * d``;
    children of a vertex are ordered by decreasing decoration.

    Attributes:
        levels (np.ndarray): ``zeta_1 < ... < zeta_k``
        M (int): retained children per vertex
        weights (np.ndarray): normalized leaf weights, shape ``(M,) * k``
        masses (list): normalized subtree masses per depth ``0, ..., k``,
            including the mass of unretained descendants
        dust (float): mass of the unretained points,
            ``weights.sum() + dust == 1``
        truncation_ratio (float): largest ratio of the M-th to the largest
            decoration of a vertex
        seed: the seed of the sample
    """
    def __init__(self, levels, M, masses, truncation_ratio, seed=None):
        self.levels = np.asarray(levels, dtype=float)
        self.M = int(M)
        self.masses = masses
        self.weights = masses[-1]
        self.dust = float(1.0 - self.weights.sum())
        self.truncation_ratio = float(truncation_ratio)
        self.seed = seed

    @property
    def k(self):
        return self.levels.size

    def overlap_probability(self, level):
        """Probability that two leaves drawn with the weights agree to
        exactly the given depth."""
        same = [float(np.sum(mass ** 2)) for mass in self.masses]
        same.append(0.0)
        if level == self.k:
            return same[level]
        return same[level] - same[level + 1]


def _check_levels(levels):
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    if levels.ndim != 1:
        raise ValueError("Levels must be a flat list")
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError(f"Cascade levels must lie in (0, 1), got "
                         f"{levels.tolist()}")
    if np.any(np.diff(levels) <= 0):
        raise ValueError(f"Cascade levels must be strictly ascending, got "
                         f"{levels.tolist()}")
    return levels


def sample_cascade(levels, M=2048, seed=None):
    """Sample a Poisson-Dirichlet cascade truncated to M children per vertex.

    The decorations of the children of a depth ``d`` vertex are the M
    largest points ``a_i^(-1/zeta)`` of a Poisson process with intensity
    ``zeta x^(-1-zeta) dx``, ``zeta = zeta_{d+1}``, where ``a_1 < a_2 < ...``
    are the arrival times of a unit rate Poisson process. Leaf weights are
    products of decorations along the path. The unretained points beyond
    ``a_M`` are accounted for by their conditional expected mass
    ``zeta a_M^(1 - 1/zeta) / (1 - zeta)``, scaled by the mean subtree mass
    of the retained children; after normalization this mass is reported as
    :attr:`CascadeSample.dust`. All products are formed in log space.

    Args:
        levels (array-like): ``zeta_1 < ... < zeta_k`` in (0, 1); empty for
            the trivial cascade with a single leaf of weight 1
        M (int): retained children per vertex, ``M >= 2``
        seed: seed

    Returns:
        CascadeSample
    """
    levels = _check_levels(levels) if np.size(levels) else np.zeros(0)
    if int(M) != M or M < 2:
        raise ValueError(f"M must be an integer >= 2, got {M}")
    M = int(M)
    k = levels.size
    if M ** k > MAX_CASCADE_LEAVES:
        raise ValueError(f"{M}^{k} leaves exceed the supported cascade size; "
                         f"reduce M")
    if k == 0:
        return CascadeSample(levels, M, [np.ones(())], 0.0, seed)

    rng = np.random.default_rng(seed)
    log_arrivals = [np.log(np.cumsum(rng.standard_exponential((M, ) * (d + 1)),
                                     axis=-1))
                    for d in range(k)]
    log_deco = [-log_a / zeta for log_a, zeta in zip(log_arrivals, levels)]

    # log subtree masses from the leaves up
    log_mass = [None] * (k + 1)
    log_mass[k] = np.zeros((M, ) * k)
    for d in range(k - 1, -1, -1):
        zeta = levels[d]
        retained = logsumexp(log_deco[d] + log_mass[d + 1], axis=-1)
        mean_child = logsumexp(log_mass[d + 1], axis=-1) - np.log(M)
        dust = (np.log(zeta / (1.0 - zeta))
                + (1.0 - 1.0 / zeta) * log_arrivals[d][..., -1] + mean_child)
        log_mass[d] = np.logaddexp(retained, dust)

    log_root = log_mass[0]
    masses = [np.ones(())]
    path = np.zeros(())
    for d in range(k):
        path = path[..., None] + log_deco[d]
        masses.append(np.exp(path + log_mass[d + 1] - log_root))

    ratio = max(float(np.max(np.exp((log_a[..., 0] - log_a[..., -1]) / zeta)))
                for log_a, zeta in zip(log_arrivals, levels))
    if ratio > TRUNCATION_WARN:
        logging.debug(f"Cascade truncation ratio {ratio:.2e} above "
                      f"{TRUNCATION_WARN:.0e}")
    return CascadeSample(levels, M, masses, ratio, seed)


def sample_cascades(levels, M=2048, n_replicas=1, seed=None, threads=None):
    """Independent cascade replicas with seeds spawned from ``seed``."""
    if int(n_replicas) != n_replicas or n_replicas < 1:
        raise ValueError(f"n_replicas must be a positive integer, got "
                         f"{n_replicas}")
    children = np.random.SeedSequence(seed).spawn(int(n_replicas))
    logging.info(f"Sampling {n_replicas} cascades with levels "
                 f"{np.atleast_1d(levels).tolist()} and M={M}")
    samples = parallel_map(lambda child: sample_cascade(levels, M, child),
                           children, threads)
    worst = max(s.truncation_ratio for s in samples)
    if worst > TRUNCATION_WARN:
        logging.warning(f"Cascade truncation ratio up to {worst:.2e}; "
                        f"increase M to reduce the truncated mass")
    return samples


def _check_samples(samples):
    samples = list(samples)
    if not samples:
        raise ValueError("At least one cascade sample is required")
    first = samples[0]
    for s in samples[1:]:
        if not np.array_equal(s.levels, first.levels):
            raise ValueError("All cascade samples must have the same levels")
    return samples


def overlap_statistic(samples, level):
    """Estimate the probability that two leaves drawn independently with the
    cascade weights agree to exactly the given depth.

    The target value is ``zeta_{level+1} - zeta_level`` with
    ``zeta_0 = 0`` and ``zeta_{k+1} = 1``.

    Args:
        samples (list): CascadeSample objects with identical levels
        level (int): ``0 <= level <= k``

    Returns:
        tuple: ``(estimate, std_error)``
    """
    samples = _check_samples(samples)
    k = samples[0].k
    if int(level) != level or not 0 <= level <= k:
        raise ValueError(f"level must be an integer in [0, {k}], got {level}")
    values = [s.overlap_probability(int(level)) for s in samples]
    mean, std_error = _mean_and_error(values)
    if len(values) < 2:
        std_error = 0.0
    return mean, std_error


def overlap_targets(levels):
    """Target overlap probabilities ``zeta_{l+1} - zeta_l``, l = 0..k."""
    zetas = np.concatenate([[0.0], np.atleast_1d(levels), [1.0]])
    return np.diff(zetas)


def overlap_table(samples):
    """Overlap estimates at all depths.

    Returns:
        pandas.DataFrame: columns ``level``, ``estimate``, ``std_error``,
        ``target``
    """
    samples = _check_samples(samples)
    targets = overlap_targets(samples[0].levels)
    rows = list()
    for level, target in enumerate(targets):
        estimate, std_error = overlap_statistic(samples, level)
        rows.append({'level': level, 'estimate': estimate,
                     'std_error': std_error, 'target': target})
    return pd.DataFrame(rows, columns=['level', 'estimate', 'std_error',
                                       'target'])


def _disorder_factor(m, tol=1e-14):
    # columns map independent standard Gaussians to (H_1(1), H_1(-1))
    cov = np.array([[evaluate(m, 1.0), evaluate(m, -1.0)],
                    [evaluate(m, -1.0), evaluate(m, 1.0)]])
    eigval, eigvec = np.linalg.eigh(cov)
    keep = eigval > tol * eigval.max()
    return eigvec[:, keep] * np.sqrt(eigval[keep])


def enriched_free_energy_n1(m, t, mu, n_nodes=80):
    """Enriched free energy of the Ising model at ``N = 1``.

    Evaluates the cascade recursion
    ``X_k = log E_sigma exp(sqrt(2t) H_1(sigma) - t xi(1) + s sigma - q_k)``,
    ``X_{l-1} = zeta_l^-1 log E exp(zeta_l X_l)`` with the Gaussian field
    ``s = sum_l sqrt(2 (q_l - q_{l-1})) y_l`` and returns
    ``-E X_0``, the plain expectation over ``y_0`` and the disorder pair
    ``(H_1(1), H_1(-1))``. All expectations use Gauss-Hermite quadrature with
    ``n_nodes`` nodes per dimension; the disorder pair is factorized by an
    eigendecomposition of its covariance (one dimension for even or purely
    odd mixtures, two otherwise).

    For even mixtures the value is ``t xi(1) + psi(mu)``.

    Args:
        m (MixtureSpec): the mixture
        t (float): time, ``t >= 0``
        mu (DiscreteMeasure): the measure
        n_nodes (int): quadrature nodes per dimension

    Returns:
        float

    Raises:
        UnsupportedSizeError: if more than four quadrature dimensions are
            needed
    """
    if not t >= 0:
        raise ValueError(f"t must be >= 0, got {t}")
    m = MixtureSpec(m)
    factor = _disorder_factor(m)
    k = mu.k
    if (k + 1) + factor.shape[1] > MAX_QUADRATURE_DIMS:
        raise UnsupportedSizeError()

    x, w = np.polynomial.hermite.hermgauss(int(n_nodes))
    nodes = np.sqrt(2.0) * x
    weights = w / np.sqrt(np.pi)
    log_weights = np.log(weights)

    q = mu.atoms
    zetas = mu.zeta_levels()
    scales = np.sqrt(2.0 * np.diff(np.concatenate([[0.0], q])))
    field = np.zeros((int(n_nodes), ) * (k + 1))
    for level in range(k + 1):
        shape = [1] * (k + 1)
        shape[level] = -1
        field = field + scales[level] * nodes.reshape(shape)
    offset = -np.log(2.0) - t * evaluate(m, 1.0) - q[-1]

    def _expected_x0(a, b):
        x_level = np.logaddexp(a + field, b - field) + offset
        for level in range(k, 0, -1):
            zeta = zetas[level]
            x_level = logsumexp(zeta * x_level + log_weights, axis=-1) / zeta
        return float(np.dot(weights, x_level))

    if t == 0:
        return -_expected_x0(0.0, 0.0)

    # disorder quadrature over the independent directions
    n_dis = factor.shape[1]
    grids = np.meshgrid(*([nodes] * n_dis), indexing='ij')
    dis_weights = np.ones_like(grids[0])
    for g in np.meshgrid(*([weights] * n_dis), indexing='ij'):
        dis_weights = dis_weights * g
    points = np.stack([g.ravel() for g in grids])
    pairs = np.sqrt(2.0 * t) * (factor @ points)

    total = 0.0
    for (a, b), weight in zip(pairs.T, dis_weights.ravel()):
        total += weight * _expected_x0(a, b)
    return float(-total)

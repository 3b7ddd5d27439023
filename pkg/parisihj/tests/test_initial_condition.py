import numpy as np
import pytest

from parisihj.initial_condition import (FieldGrid, PsiKind, SingleSiteLaw,
                                        psi_ising_pde, psi_product,
                                        psi_spherical, spherical_objective)
from parisihj.measures import DiscreteMeasure, MeasureCDF, to_cdf, w1
from parisihj.testing import random_measure
from parisihj.testing.reference_values import (direct_psi_ising,
                                               psi_ising_delta,
                                               spherical_grid_search)
from parisihj.utils import AccuracyError, NumericalError


ISING = SingleSiteLaw.ising()


def test_single_site_law():
    assert ISING.is_ising
    assert ISING.min_gap == 2.0
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(ISING.terminal(x, 0.4),
                               np.log(np.cosh(x)) - 0.4, atol=1e-14)
    law = SingleSiteLaw([1.0, 0.0, -1.0], [0.25, 0.5, 0.25])
    assert law.atoms.tolist() == [-1.0, 0.0, 1.0]
    assert law.probs.tolist() == [0.25, 0.5, 0.25]
    assert not law.is_ising
    assert law.min_gap == 1.0
    assert SingleSiteLaw([0.5], [1.0]).min_gap == np.inf
    assert SingleSiteLaw.from_json(law.to_dict()) == law
    assert repr(ISING) == "SingleSiteLaw(atoms=[-1.0, 1.0], probs=[0.5, 0.5])"


@pytest.mark.parametrize('atoms, probs', [
    ([], []),
    ([-1, 1], [0.5]),
    ([-1, 1], [0.6, 0.6]),
    ([-1, 1], [1.0, 0.0]),
    ([-2, 1], [0.5, 0.5]),
    ([1, 1], [0.5, 0.5]),
])
def test_invalid_single_site_laws(atoms, probs):
    with pytest.raises(ValueError):
        SingleSiteLaw(atoms, probs)


def test_field_grid():
    grid = FieldGrid(2.0, n_x=5)
    assert grid.dx == 1.0
    assert grid.center == 2
    assert grid.nodes.tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert FieldGrid.from_dict(grid.to_dict()) == grid

    assert FieldGrid.default(0.0).half_width == 8.0
    assert FieldGrid.default(2.0).half_width == pytest.approx(22.0)
    law = SingleSiteLaw([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    assert FieldGrid.default(2.0, law).half_width == pytest.approx(44.0)
    assert FieldGrid.default(2.0, n_x=513).n_x == 513


@pytest.mark.parametrize('kwargs', [
    {'half_width': 0.0},
    {'half_width': 1.0, 'n_x': 4},
    {'half_width': 1.0, 'n_x': 1},
    {'half_width': 1.0, 'ds': 0.0},
    {'half_width': 1.0, 'scheme': 'implicit'},
    # explicit scheme needs ds <= dx^2 / 2
    {'half_width': 1.0, 'n_x': 201, 'ds': 1e-3, 'scheme': 'explicit'},
])
def test_invalid_field_grids(kwargs):
    with pytest.raises(ValueError):
        FieldGrid(**kwargs)


def test_psi_product_dirac_zero():
    assert psi_product(ISING, DiscreteMeasure.dirac(0.0)) == 0.0


@pytest.mark.parametrize('q', [0.1, 0.5, 1.0])
def test_psi_product_single_atom(q):
    value = psi_product(ISING, DiscreteMeasure.dirac(q))
    assert value == pytest.approx(psi_ising_delta(q), abs=1e-7)


def test_psi_product_two_atoms():
    mu = DiscreteMeasure([0.2, 0.6], [0.5, 0.5])
    assert psi_product(ISING, mu) \
        == pytest.approx(direct_psi_ising(mu), abs=1e-5)


def test_psi_product_three_atoms():
    mu = DiscreteMeasure([0.1, 0.4, 0.8], [0.3, 0.3, 0.4])
    assert psi_product(ISING, mu) \
        == pytest.approx(direct_psi_ising(mu, n_nodes=100), abs=1e-5)


def test_psi_product_three_point_law():
    law = SingleSiteLaw([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    q = 0.5
    x, w = np.polynomial.hermite.hermgauss(200)
    z = np.sqrt(2.0) * x
    w = w / np.sqrt(np.pi)
    expected = -np.dot(w, law.terminal(np.sqrt(2.0 * q) * z, q))
    assert psi_product(law, DiscreteMeasure.dirac(q)) \
        == pytest.approx(expected, abs=1e-7)


def test_psi_product_repeated_atoms():
    split = DiscreteMeasure([0.3, 0.3], [0.4, 0.6])
    assert psi_product(ISING, split) \
        == psi_product(ISING, DiscreteMeasure.dirac(0.3))


def test_psi_product_nonnegative_and_monotone():
    grid = FieldGrid.default(1.2)
    rng = np.random.default_rng(5)
    for _ in range(5):
        mu = random_measure(rng)
        value = psi_product(ISING, mu, grid)
        assert value >= -1e-8
        for i in range(mu.k + 1):
            atoms = mu.atoms.copy()
            atoms[i] += 1e-4
            raised = DiscreteMeasure(atoms, mu.weights)
            assert psi_product(ISING, raised, grid) >= value - 1e-8


def test_psi_product_lipschitz():
    rng = np.random.default_rng(11)
    for _ in range(8):
        mu = random_measure(rng, max_atoms=4)
        nu = random_measure(rng, max_atoms=4)
        diff = abs(psi_product(ISING, mu) - psi_product(ISING, nu))
        assert diff <= w1(mu, nu) + 1e-6


def test_psi_product_grid_too_small():
    mu = DiscreteMeasure([0.5, 1.0], [0.5, 0.5])
    with pytest.raises(AccuracyError, match="larger half-width"):
        psi_product(ISING, mu, FieldGrid(1.0, n_x=101))


def test_psi_ising_pde_trivial():
    cdf = to_cdf(DiscreteMeasure.dirac(0.0))
    assert psi_ising_pde(cdf, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_psi_ising_pde_single_atom():
    mu = DiscreteMeasure.dirac(0.5)
    assert psi_ising_pde(to_cdf(mu), 0.5) \
        == pytest.approx(psi_product(ISING, mu), abs=1e-3)


@pytest.mark.parametrize('n_measures', [
    5,
    pytest.param(20, marks=pytest.mark.slow),
])
def test_psi_ising_pde_matches_cascade(n_measures):
    rng = np.random.default_rng(21)
    for _ in range(n_measures):
        mu = random_measure(rng)
        pde = psi_ising_pde(to_cdf(mu), mu.max_atom)
        assert pde == pytest.approx(psi_product(ISING, mu), abs=1e-3)


def test_psi_ising_pde_larger_terminal_time():
    # extending the distribution function by 1 beyond the support does not
    # change the value
    mu = DiscreteMeasure([0.2, 0.5], [0.5, 0.5])
    grid = FieldGrid.default(1.0)
    assert psi_ising_pde(to_cdf(mu), 1.0, grid) \
        == pytest.approx(psi_ising_pde(to_cdf(mu), 0.5, grid), abs=1e-3)


def test_psi_ising_pde_uniform_law():
    uniform = MeasureCDF.uniform(0.0, 0.5)
    grid = FieldGrid.default(0.5)
    value = psi_ising_pde(uniform, 0.5, grid)
    assert np.isfinite(value)
    # 64 equal weight atoms at the midpoints of the quantile intervals
    atoms = 0.5 * (np.arange(64) + 0.5) / 64
    discrete = DiscreteMeasure.empirical(atoms)
    distance = 0.5 / (4 * 64)
    assert abs(value - psi_ising_pde(to_cdf(discrete), 0.5, grid)) \
        <= distance + 5e-3


def test_psi_ising_pde_explicit_scheme():
    mu = DiscreteMeasure.dirac(0.5)
    implicit = FieldGrid.default(0.5, n_x=257, ds=1e-3)
    explicit = FieldGrid.default(0.5, n_x=257, ds=1e-3, scheme='explicit')
    assert psi_ising_pde(to_cdf(mu), 0.5, explicit) \
        == pytest.approx(psi_ising_pde(to_cdf(mu), 0.5, implicit), abs=1e-3)


def test_psi_ising_pde_errors():
    cdf = to_cdf(DiscreteMeasure.dirac(0.5))
    with pytest.raises(ValueError):
        psi_ising_pde(cdf, 0.3)
    with pytest.raises(ValueError):
        psi_ising_pde(cdf, -1.0)
    with pytest.raises(NumericalError):
        psi_ising_pde(cdf, 0.5, FieldGrid(1.0, n_x=11, ds=0.5))


def test_spherical_objective_closed_forms():
    delta0 = DiscreteMeasure.dirac(0.0)
    assert spherical_objective(delta0, 0.0, 1.0) == 0.0
    assert spherical_objective(delta0, 0.0, np.e) \
        == pytest.approx(0.5 * (np.e - 2.0), abs=1e-15)
    # c(s) = 2 (1 - s): log(3) / 2 + (2 - log 3) / 2 - 1
    assert spherical_objective(delta0, 1.0, 3.0) == pytest.approx(0.0,
                                                                  abs=1e-14)
    with pytest.raises(ValueError):
        spherical_objective(delta0, 1.0, 2.0)
    with pytest.raises(ValueError):
        spherical_objective(DiscreteMeasure.dirac(0.5), 0.2, 3.0)


def test_psi_spherical_dirac():
    assert psi_spherical(DiscreteMeasure.dirac(0.0)) == pytest.approx(
        0.0, abs=1e-12)
    q = 0.5
    b = 0.5 * (1.0 + np.sqrt(1.0 + 8.0 * q))
    expected = q / b + 0.5 * (b - 1.0 - np.log(b)) - q
    assert psi_spherical(DiscreteMeasure.dirac(q)) \
        == pytest.approx(expected, abs=1e-10)


def test_psi_spherical_grid_search():
    mu = DiscreteMeasure([0.2, 0.7], [0.4, 0.6])
    assert psi_spherical(mu) \
        == pytest.approx(spherical_grid_search(mu), abs=1e-9)


def test_psi_spherical_terminal_invariance():
    rng = np.random.default_rng(2)
    for _ in range(5):
        mu = random_measure(rng)
        assert psi_spherical(mu, mu.max_atom + 1.0) \
            == pytest.approx(psi_spherical(mu), abs=1e-8)


def test_psi_spherical_lipschitz():
    rng = np.random.default_rng(8)
    for _ in range(20):
        mu = random_measure(rng, max_atoms=4)
        nu = random_measure(rng, max_atoms=4)
        assert psi_spherical(mu) >= -1e-8
        diff = abs(psi_spherical(mu) - psi_spherical(nu))
        assert diff <= w1(mu, nu) + 1e-6


def test_psi_kind():
    assert PsiKind.ising() == PsiKind.from_name('ising')
    assert PsiKind.ising().p1 == ISING
    assert PsiKind.spherical().default_grid(1.0) is None
    assert PsiKind.ising().default_grid(2.0) == FieldGrid.default(2.0)
    law = SingleSiteLaw([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    kind = PsiKind.product(law)
    assert PsiKind.from_dict(kind.to_dict()) == kind
    assert PsiKind.from_dict(PsiKind.ising('pde').to_dict()).method == 'pde'
    assert repr(PsiKind.spherical()) \
        == "PsiKind('spherical', method='cascade')"

    with pytest.raises(ValueError):
        PsiKind('gaussian')
    with pytest.raises(ValueError):
        PsiKind('product')
    with pytest.raises(ValueError):
        PsiKind('product', p1=law, method='pde')
    with pytest.raises(ValueError):
        PsiKind('ising', method='quadrature')


def test_psi_kind_dispatch():
    mu = DiscreteMeasure([0.2, 0.6], [0.5, 0.5])
    assert PsiKind.ising()(mu) == psi_product(ISING, mu)
    assert PsiKind.spherical()(mu) == psi_spherical(mu)
    assert PsiKind.ising('pde').evaluate(mu) \
        == psi_ising_pde(to_cdf(mu), 0.6)

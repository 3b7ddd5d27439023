"""
.. _GeneralFunctions:

General Functions - :mod:`parisihj`
===================================

.. currentmodule:: parisihj

Parisi free energies of mixed p-spin models, computed through the
Hopf-Lax formula of a Hamilton-Jacobi equation on the space of probability
measures on the half-line.

The most commonly used objects are available directly from the package:

.. autosummary::
    MixtureSpec
    DiscreteMeasure
    PsiKind
    SingleSiteLaw
    FieldGrid
    HopfLaxProblem
    SolverOptions
    solve
    parisi_value
    classical_functional
    free_energy_plain


Caching
-------

Hopf-Lax solves and Monte Carlo runs can be cached on disk. The following
class-level functions are used to setup, enable and (temporarily) disable
caching.

.. autosummary::
    parisihj.Cache.enable_cache
    parisihj.Cache.clear_cache
    parisihj.Cache.disabled
    parisihj.Cache.set_disabled
    parisihj.Cache.set_enabled


Cache API
.........

.. autoclass:: Cache
    :members: enable_cache, clear_cache, disabled, set_disabled, set_enabled
    :autosummary:

"""
import logging

logging.basicConfig(level=logging.INFO, style='{',
                    format="{module: <8} {levelname: >10} \t{message}")

from parisihj.api import Cache  # noqa: F401,E402
from parisihj.mixture import MixtureSpec  # noqa: F401,E402
from parisihj.measures import DiscreteMeasure, MeasureCDF  # noqa: F401,E402
from parisihj.initial_condition import (FieldGrid,  # noqa: F401,E402
                                        PsiKind,
                                        SingleSiteLaw)
from parisihj.hopflax import (HopfLaxProblem,  # noqa: F401,E402
                              SolverOptions,
                              classical_functional,
                              parisi_value,
                              solve)
from parisihj.finite_n import free_energy_plain  # noqa: F401,E402
from parisihj.version import __version__  # noqa: F401,E402

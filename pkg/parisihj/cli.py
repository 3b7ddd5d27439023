"""
Command line interface - :mod:`parisihj.cli`
============================================

Every computation of the package is available as a subcommand::

    parisihj xi --mixture '{"2": 1.0}' --s 2
    parisihj psi --kind ising --measure mu.json
    parisihj hopflax --mixture sk.json --t 0.5 --base '[0.1, 0.4]' --kind ising
    parisihj parisi --mixture sk.json --t 0.1 --k 2 --kind ising --k-sweep
    parisihj classical --mixture sk.json --t 0.5 --nu nu.json --kind ising
    parisihj residual --mixture sk.json --t 0.6 --base '[0.3]' --h 1e-3
    parisihj finite-n --mixture sk.json --N 12 --t 0.5 --samples 200 --seed 7
    parisihj cascade --zeta 0.5 --M 2048 --replicas 5000 --seed 7

Structured inputs (mixtures, measures, single site laws, base points) are
given as paths to JSON files or as inline JSON. Results are printed with 12
significant digits. Every run writes ``<command>_manifest.json`` with the
full parameter set, the seed, the package version, the wall time and the
outputs into the output directory (``--out``, default ``$PARISIHJ_OUT`` or
the current directory); sweeps additionally write CSV tables.

Exit codes are 0 on success, 1 for numerical failures and 2 for usage
errors.
"""
import argparse
import json
import logging
import os
import sys
import time

import numpy as np
import pandas as pd

from parisihj import finite_n, hopflax
from parisihj.api import Cache
from parisihj.initial_condition import (FieldGrid, PsiKind, SingleSiteLaw,
                                        psi_ising_pde)
from parisihj.measures import DiscreteMeasure, MeasureCDF
from parisihj.mixture import MixtureSpec, dual, evaluate
from parisihj.utils import NumericalError, format_value, load_json_arg
from parisihj.version import __version__


ENV_OUT = 'PARISIHJ_OUT'
ENV_CACHE = 'PARISIHJ_CACHE'


class RunManifest:
    """Record of one command line run.

    Args:
        command (str): subcommand name
        argv (list): the full argument list
        parameters (dict): parsed parameters
        seed (int): seed used by the run, if any
    """
    def __init__(self, command, argv, parameters, seed=None):
        self.command = command
        self.argv = list(argv)
        self.parameters = parameters
        self.seed = seed
        self.version = __version__
        self.wall_time = None
        self.outputs = dict()
        self.files = list()

    def to_dict(self):
        return {'command': self.command, 'argv': self.argv,
                'parameters': self.parameters, 'seed': self.seed,
                'version': self.version, 'wall_time': self.wall_time,
                'outputs': self.outputs, 'files': self.files}

    def write(self, out_dir):
        path = os.path.join(out_dir, f"{self.command}_manifest.json")
        with open(path, 'w') as fobj:
            json.dump(self.to_dict(), fobj, indent=2)
        return path


def _print(name, value):
    print(f"{name:<12}{format_value(value)}")


def _print_list(name, values):
    print(f"{name:<12}" + ' '.join(format_value(v) for v in values))


def _mixture(value):
    return MixtureSpec.from_json(load_json_arg(value))


def _measure(value):
    return DiscreteMeasure.from_json(load_json_arg(value))


def _base(value):
    base = load_json_arg(value)
    if not isinstance(base, list):
        raise ValueError("The base point must be a JSON list of numbers")
    return base


def _psi_kind(args):
    p1 = None
    if getattr(args, 'p1', None) is not None:
        p1 = SingleSiteLaw.from_json(load_json_arg(args.p1))
    return PsiKind.from_name(args.kind, p1=p1,
                             method=getattr(args, 'method', 'cascade'))


def _grid(args, kind, q_max):
    if kind.p1 is None:
        return None
    kwargs = dict()
    if args.n_x is not None:
        kwargs['n_x'] = args.n_x
    if args.half_width is not None:
        return FieldGrid(args.half_width, **kwargs)
    return FieldGrid.default(q_max, kind.p1, **kwargs)


def _custom_grid(args, kind, q_max):
    # None selects the default grid of the problem
    if args.n_x is None and args.half_width is None:
        return None
    return _grid(args, kind, q_max)


def _problem(args):
    kind = _psi_kind(args)
    m = _mixture(args.mixture)
    prob = hopflax.HopfLaxProblem(m, args.t, _base(args.base), kind)
    grid = _custom_grid(args, kind, prob.box_hi)
    if grid is not None:
        prob = hopflax.HopfLaxProblem(m, args.t, prob.base, kind, grid)
    return prob


def _solver_options(args):
    return hopflax.SolverOptions(grid_points=args.grid_points,
                                 n_random=args.restarts,
                                 max_evals=args.max_evals,
                                 seed=args.seed, threads=args.threads)


def _write_table(manifest, args, name, table):
    path = os.path.join(args.out, f"{name}.csv")
    table.to_csv(path, index=False, float_format='%.12g')
    manifest.files.append(path)
    return path


def cmd_xi(args, manifest):
    m = _mixture(args.mixture)
    values = {'xi': evaluate(m, args.s), 'xi_prime': evaluate(m, args.s, 1),
              'xi_second': evaluate(m, args.s, 2), 'xi_dual': dual(m, args.s)}
    for name, value in values.items():
        _print(name, value)
    manifest.outputs.update(values)


def cmd_psi(args, manifest):
    kind = _psi_kind(args)
    if args.cdf is not None:
        if kind.method != 'pde':
            raise ValueError("--cdf requires --method pde")
        cdf = MeasureCDF.from_json(load_json_arg(args.cdf))
        q_max = cdf.support_end
        value = psi_ising_pde(cdf, q_max, _grid(args, kind, q_max))
    else:
        if args.measure is None:
            raise ValueError("Either --measure or --cdf is required")
        mu = _measure(args.measure)
        value = kind.evaluate(mu, _grid(args, kind, mu.max_atom))
    _print('psi', value)
    manifest.outputs['psi'] = value


def _result_row(t, result):
    row = {'t': t, 'k': result.maximizer.size, 'value': result.value,
           'converged': result.converged}
    for i, y in enumerate(result.maximizer, start=1):
        row[f"y{i}"] = y
    return row


def cmd_hopflax(args, manifest):
    prob = _problem(args)
    result = hopflax.solve(prob, _solver_options(args))
    _print('value', result.value)
    _print_list('maximizer', result.maximizer)
    manifest.outputs.update(result.to_dict())
    _write_table(manifest, args, 'hopflax',
                 pd.DataFrame([_result_row(args.t, result)]))


def cmd_parisi(args, manifest):
    kind = _psi_kind(args)
    m = _mixture(args.mixture)
    opts = _solver_options(args)
    grid = _custom_grid(args, kind, args.t * evaluate(m, 1.0, 1))
    if args.k_sweep:
        table = hopflax.parisi_sweep(m, args.t, args.k, kind, opts, grid)
        for _, row in table.iterrows():
            _print(f"k={row['k']}", row['value'])
        manifest.outputs['sweep'] = table.to_dict(orient='records')
        manifest.outputs['value'] = float(table['value'].iloc[-1])
        table = table.assign(maximizer=table['maximizer'].map(
            lambda y: ' '.join(format_value(v) for v in y)))
        _write_table(manifest, args, 'parisi_sweep', table)
    else:
        result = hopflax.parisi_result(m, args.t, args.k, kind, opts, grid)
        _print('value', result.value)
        _print_list('maximizer', result.maximizer)
        manifest.outputs.update(result.to_dict())
        _write_table(manifest, args, 'parisi',
                     pd.DataFrame([_result_row(args.t, result)]))


def cmd_classical(args, manifest):
    kind = _psi_kind(args)
    m = _mixture(args.mixture)
    grid = _custom_grid(args, kind, args.t * evaluate(m, 1.0, 1))
    value = hopflax.classical_functional(m, args.t, _measure(args.nu), kind,
                                         grid)
    _print('value', value)
    manifest.outputs['value'] = value


def cmd_residual(args, manifest):
    prob = _problem(args)
    value = hopflax.hj_residual(prob, args.h, _solver_options(args))
    _print('residual', value)
    manifest.outputs['residual'] = value


def cmd_finite_n(args, manifest):
    m = _mixture(args.mixture)
    if args.n_sweep:
        table = finite_n.n_sweep(m, args.n_sweep, args.t, args.samples,
                                 args.seed, args.threads)
        for _, row in table.iterrows():
            print(f"N={int(row['N']):<10}{format_value(row['mean'])} +- "
                  f"{format_value(row['std_error'])}")
        manifest.outputs['sweep'] = table.to_dict(orient='records')
        _write_table(manifest, args, 'finite_n_sweep', table)
    else:
        if args.N is None:
            raise ValueError("Either --N or --n-sweep is required")
        mean, std_error = finite_n.free_energy_plain(
            m, args.N, args.t, args.samples, args.seed, args.threads)
        print(f"{'mean':<12}{format_value(mean)} +- {format_value(std_error)}")
        manifest.outputs.update({'mean': mean, 'std_error': std_error})


def cmd_cascade(args, manifest):
    samples = finite_n.sample_cascades(args.zeta, args.M, args.replicas,
                                       args.seed, args.threads)
    table = finite_n.overlap_table(samples)
    for _, row in table.iterrows():
        print(f"level={int(row['level']):<6}{format_value(row['estimate'])} "
              f"+- {format_value(row['std_error'])}  "
              f"target {format_value(row['target'])}")
    worst = max(s.truncation_ratio for s in samples)
    manifest.outputs['overlaps'] = table.to_dict(orient='records')
    manifest.outputs['truncation_ratio'] = worst
    _write_table(manifest, args, 'cascade_overlaps', table)


def build_parser():
    """Create the argument parser with all subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', type=str,
                        default=os.environ.get(ENV_OUT, os.getcwd()),
                        help=f"Output directory (default from ${ENV_OUT})")
    common.add_argument('--threads', type=int, default=None,
                        help='Maximum number of worker threads')
    common.add_argument('--seed', type=int, default=hopflax.DEFAULT_SEED,
                        help='Seed of all random choices')
    common.add_argument('--cache', type=str,
                        default=os.environ.get(ENV_CACHE),
                        help=f"Cache directory (default from ${ENV_CACHE})")
    common.add_argument('--debug', action='store_true', default=False,
                        help='Enable debug logging')
    common.add_argument('--quiet', action='store_true', default=False,
                        help='Only log warnings and errors')

    kind_args = argparse.ArgumentParser(add_help=False)
    kind_args.add_argument('--kind', choices=PsiKind.NAMES, default='ising',
                           help='Initial condition')
    kind_args.add_argument('--p1', type=str, default=None,
                           help='Single site law (JSON) for --kind product')
    kind_args.add_argument('--n-x', type=int, default=None,
                           help='Number of field grid nodes (odd)')
    kind_args.add_argument('--half-width', type=float, default=None,
                           help='Half-width of the field grid')

    solver_args = argparse.ArgumentParser(add_help=False)
    solver_args.add_argument('--grid-points', type=int, default=201,
                             help='Grid stage resolution per coordinate')
    solver_args.add_argument('--restarts', type=int, default=4,
                             help='Number of random restarts')
    solver_args.add_argument('--max-evals', type=int, default=20000,
                             help='Objective evaluations per restart')

    parser = argparse.ArgumentParser(
        prog="parisihj",
        description="Parisi free energies through Hamilton-Jacobi equations",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    parser.add_argument('--version', action='version',
                        version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest='command')

    def add(name, func, help_text, parents=()):
        sub = subparsers.add_parser(
            name, help=help_text, parents=[common, *parents],
            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sub.set_defaults(func=func)
        return sub

    xi_parser = add('xi', cmd_xi, 'Mixture function, derivatives and dual')
    xi_parser.add_argument('--mixture', type=str, required=True,
                           help='Mixture (JSON)')
    xi_parser.add_argument('--s', type=float, required=True,
                           help='Evaluation point')

    psi_parser = add('psi', cmd_psi, 'Initial condition psi(mu)',
                     [kind_args])
    psi_parser.add_argument('--measure', type=str, default=None,
                            help='Measure (JSON)')
    psi_parser.add_argument('--method', choices=('cascade', 'pde'),
                            default='cascade',
                            help='Evaluation method (pde: Ising only)')
    psi_parser.add_argument('--cdf', type=str, default=None,
                            help='Distribution function (JSON) for the PDE')

    hl_parser = add('hopflax', cmd_hopflax, 'Hopf-Lax value f^(k)(t, x)',
                    [kind_args, solver_args])
    hl_parser.add_argument('--mixture', type=str, required=True)
    hl_parser.add_argument('--t', type=float, required=True)
    hl_parser.add_argument('--base', type=str, required=True,
                           help='Base point (JSON list)')

    parisi_parser = add('parisi', cmd_parisi, 'Parisi value f^(k)(t, 0)',
                        [kind_args, solver_args])
    parisi_parser.add_argument('--mixture', type=str, required=True)
    parisi_parser.add_argument('--t', type=float, required=True)
    parisi_parser.add_argument('--k', type=int, default=1,
                               help='Number of atoms (largest k of a sweep)')
    parisi_parser.add_argument('--k-sweep', action='store_true',
                               default=False,
                               help='Tabulate k = 1, 2, 4, ... up to --k')

    cl_parser = add('classical', cmd_classical,
                    'Classical Parisi functional at nu', [kind_args])
    cl_parser.add_argument('--mixture', type=str, required=True)
    cl_parser.add_argument('--t', type=float, required=True)
    cl_parser.add_argument('--nu', type=str, required=True,
                           help='Measure on [0, 1] (JSON)')

    res_parser = add('residual', cmd_residual,
                     'Finite difference Hamilton-Jacobi residual',
                     [kind_args, solver_args])
    res_parser.add_argument('--mixture', type=str, required=True)
    res_parser.add_argument('--t', type=float, required=True)
    res_parser.add_argument('--base', type=str, required=True)
    res_parser.add_argument('--h', type=float, default=1e-3,
                            help='Finite difference step')

    fn_parser = add('finite-n', cmd_finite_n,
                    'Finite-N free energy by exact enumeration')
    fn_parser.add_argument('--mixture', type=str, required=True)
    fn_parser.add_argument('--N', type=int, default=None,
                           help='Number of spins')
    fn_parser.add_argument('--n-sweep', type=int, nargs='+', default=None,
                           help='Several numbers of spins')
    fn_parser.add_argument('--t', type=float, required=True)
    fn_parser.add_argument('--samples', type=int, default=100,
                           help='Number of disorder samples')

    cas_parser = add('cascade', cmd_cascade,
                     'Poisson-Dirichlet cascade overlaps')
    cas_parser.add_argument('--zeta', type=float, nargs='+', required=True,
                            help='Levels zeta_1 < ... < zeta_k')
    cas_parser.add_argument('--M', type=int, default=2048,
                            help='Retained children per vertex')
    cas_parser.add_argument('--replicas', type=int, default=1000,
                            help='Number of cascade replicas')
    return parser


def _configure_logging(args):
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)


def run(argv=None):
    """Run the command line interface.

    Args:
        argv (list): arguments without the program name; defaults to
            ``sys.argv[1:]``

    Returns:
        int: exit code
    """
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code

    if getattr(args, 'func', None) is None:
        # user did not provide a subcommand
        parser.print_help(sys.stderr)
        return 2

    _configure_logging(args)
    parameters = {key: value for key, value in vars(args).items()
                  if key != 'func'}
    manifest = RunManifest(args.command, argv, parameters, args.seed)
    start = time.perf_counter()
    try:
        os.makedirs(args.out, exist_ok=True)
        if args.cache:
            Cache.enable_cache(args.cache)
        args.func(args, manifest)
    except NumericalError as exc:
        print(f"parisihj: numerical error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"parisihj: error: {exc}", file=sys.stderr)
        return 2

    manifest.wall_time = time.perf_counter() - start
    manifest.outputs = _jsonable(manifest.outputs)
    path = manifest.write(args.out)
    logging.info(f"Manifest written to {path}")
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(key): _jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(value) for value in obj]
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    return obj


def main():
    sys.exit(run())

import json
import os

import pandas as pd
import pytest

from parisihj.cli import run
from parisihj.finite_n import free_energy_plain
from parisihj.mixture import MixtureSpec


SK_JSON = '{"2": 1.0}'
DELTA0_JSON = '{"atoms": [0.0], "weights": [1.0]}'


def _manifest(out, command):
    with open(os.path.join(str(out), f"{command}_manifest.json")) as fobj:
        return json.load(fobj)


def test_xi(tmpdir, capsys):
    assert run(['xi', '--mixture', SK_JSON, '--s', '2',
                '--out', str(tmpdir)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ['xi          4', 'xi_prime    4', 'xi_second   2',
                     'xi_dual     1']
    manifest = _manifest(tmpdir, 'xi')
    assert manifest['command'] == 'xi'
    assert manifest['outputs'] == pytest.approx(
        {'xi': 4.0, 'xi_prime': 4.0, 'xi_second': 2.0, 'xi_dual': 1.0},
        rel=1e-12)
    assert manifest['parameters']['s'] == 2.0
    assert manifest['version']
    assert manifest['wall_time'] >= 0


def test_mixture_from_file(tmpdir, capsys):
    path = tmpdir.join('mixture.json')
    path.write('{"2": 0.5, "4": 0.5}')
    assert run(['xi', '--mixture', str(path), '--s', '0.5',
                '--out', str(tmpdir)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == 'xi          0.15625'


def test_output_directory_from_environment(tmpdir, monkeypatch):
    monkeypatch.setenv('PARISIHJ_OUT', str(tmpdir.join('runs')))
    assert run(['xi', '--mixture', SK_JSON, '--s', '1']) == 0
    assert os.path.isfile(str(tmpdir.join('runs', 'xi_manifest.json')))


def test_usage_errors(tmpdir, capsys):
    assert run([]) == 2
    assert run(['xi', '--mixture', SK_JSON]) == 2
    assert run(['no-such-command']) == 2
    assert run(['xi', '--mixture', '{"1": 1.0}', '--s', '1',
                '--out', str(tmpdir)]) == 2
    assert "parisihj: error" in capsys.readouterr().err
    assert run(['psi', '--kind', 'spherical', '--out', str(tmpdir)]) == 2
    assert run(['psi', '--cdf', '{"breakpoints": [0.5], "values": [1.0]}',
                '--out', str(tmpdir)]) == 2
    assert run(['finite-n', '--mixture', SK_JSON, '--t', '0.5',
                '--out', str(tmpdir)]) == 2
    assert run(['finite-n', '--mixture', SK_JSON, '--t', '0.5', '--N', '30',
                '--out', str(tmpdir)]) == 2
    # failed runs do not write a manifest
    assert not os.path.exists(str(tmpdir.join('finite-n_manifest.json')))


def test_numerical_error(tmpdir, capsys):
    assert run(['psi', '--measure', '{"atoms": [0.5, 1.0], '
                '"weights": [0.5, 0.5]}', '--half-width', '1.0',
                '--n-x', '101', '--out', str(tmpdir)]) == 1
    assert "parisihj: numerical error" in capsys.readouterr().err


def test_psi(tmpdir, capsys):
    assert run(['psi', '--kind', 'spherical', '--measure', DELTA0_JSON,
                '--out', str(tmpdir)]) == 0
    assert capsys.readouterr().out.startswith('psi')
    assert _manifest(tmpdir, 'psi')['outputs']['psi'] \
        == pytest.approx(0.0, abs=1e-12)


def test_hopflax(tmpdir, capsys):
    assert run(['hopflax', '--mixture', SK_JSON, '--t', '0.5',
                '--base', '[0.1]', '--kind', 'spherical',
                '--grid-points', '11', '--restarts', '1', '--seed', '3',
                '--out', str(tmpdir)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith('value')
    assert out[1].startswith('maximizer')
    table = pd.read_csv(str(tmpdir.join('hopflax.csv')))
    assert list(table.columns) == ['t', 'k', 'value', 'converged', 'y1']
    manifest = _manifest(tmpdir, 'hopflax')
    assert manifest['seed'] == 3
    assert manifest['outputs']['value'] == pytest.approx(table['value'][0],
                                                         rel=1e-11)
    assert manifest['files'] == [str(tmpdir.join('hopflax.csv'))]


def test_parisi_sweep(tmpdir, capsys):
    assert run(['parisi', '--mixture', SK_JSON, '--t', '0.5', '--k', '2',
                '--k-sweep', '--kind', 'spherical', '--grid-points', '11',
                '--restarts', '1', '--out', str(tmpdir)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in out] == ['k=1', 'k=2']
    table = pd.read_csv(str(tmpdir.join('parisi_sweep.csv')))
    assert table['k'].tolist() == [1, 2]
    assert len(_manifest(tmpdir, 'parisi')['outputs']['sweep']) == 2


def test_parisi_single_writes_row(tmpdir, capsys):
    assert run(['parisi', '--mixture', SK_JSON, '--t', '0.5', '--k', '2',
                '--kind', 'spherical', '--grid-points', '11',
                '--restarts', '1', '--out', str(tmpdir)]) == 0
    assert capsys.readouterr().out.startswith('value')
    assert tmpdir.join('parisi.csv').check(file=1)
    table = pd.read_csv(str(tmpdir.join('parisi.csv')))
    assert list(table.columns) == ['t', 'k', 'value', 'converged',
                                   'y1', 'y2']
    manifest = _manifest(tmpdir, 'parisi')
    assert manifest['outputs']['value'] == pytest.approx(table['value'][0],
                                                         abs=1e-11)
    assert manifest['files'] == [str(tmpdir.join('parisi.csv'))]


def test_finite_n(tmpdir, capsys):
    assert run(['finite-n', '--mixture', SK_JSON, '--N', '4', '--t', '0.5',
                '--samples', '5', '--seed', '7', '--out', str(tmpdir)]) == 0
    assert capsys.readouterr().out.startswith('mean')
    mean, std_error = free_energy_plain(MixtureSpec({2: 1.0}), 4, 0.5, 5, 7)
    outputs = _manifest(tmpdir, 'finite-n')['outputs']
    assert outputs['mean'] == pytest.approx(mean, rel=1e-12)
    assert outputs['std_error'] == pytest.approx(std_error, rel=1e-12)


def test_finite_n_sweep(tmpdir):
    assert run(['finite-n', '--mixture', SK_JSON, '--n-sweep', '2', '3',
                '--t', '0.5', '--samples', '4', '--out', str(tmpdir)]) == 0
    table = pd.read_csv(str(tmpdir.join('finite_n_sweep.csv')))
    assert table['N'].tolist() == [2, 3]
    assert list(table.columns) == ['N', 'mean', 'std_error', 'n_samples']


def test_cascade(tmpdir, capsys):
    assert run(['cascade', '--zeta', '0.5', '--M', '64', '--replicas', '20',
                '--seed', '7', '--out', str(tmpdir)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2
    assert out[0].startswith('level=0')
    table = pd.read_csv(str(tmpdir.join('cascade_overlaps.csv')))
    assert table['target'].tolist() == [0.5, 0.5]
    assert _manifest(tmpdir, 'cascade')['outputs']['truncation_ratio'] > 0

import app
from jumplab.scenario.runner import EXIT_CONFIG, EXIT_EXPECTATION, EXIT_OK

GOOD = """
scenario:
  id: cli-exit
operator:
  dimension: 2
simulation:
  dt: 0.002
  horizon: 20.0
experiment:
  estimator: exit_moment
  params:
    x0: [0.0, 0.0]
    domain: {shape: ball, center: [0.0, 0.0], radius: 1.0}
run:
  n_paths: 200
validation:
  expect:
    - {label: exit_moment, min: 0.3, max: 0.8}
"""


def test_list_builtins(capsys):
    assert app.main(['list-builtins']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'kernels: ' in out
    assert 'counterexample-s7' in out
    assert 'estimators: ' in out


def test_validate_echoes_the_canonical_document(tmp_path, capsys):
    path = tmp_path / 'good.yaml'
    path.write_text(GOOD)
    assert app.main(['validate', str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert 'id: cli-exit' in out
    assert 'meyer_rate_cap' in out


def test_validate_reports_config_errors_on_stderr(tmp_path, capsys):
    path = tmp_path / 'bad.yaml'
    path.write_text(GOOD.replace('  dimension: 2', '  dimension: 2\n  kernel: {name: nope}'))
    assert app.main(['validate', str(path)]) == EXIT_CONFIG
    assert "config error: unknown kernel at operator.kernel.name" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    assert app.main(['validate', str(tmp_path / 'absent.yaml')]) == EXIT_CONFIG
    assert capsys.readouterr().err.startswith('error: ')


def test_run_writes_reports(tmp_path, capsys):
    path = tmp_path / 'good.yaml'
    path.write_text(GOOD)
    out_dir = tmp_path / 'reports'
    assert app.main(['run', str(path), '--out', str(out_dir), '--threads', '1', '--dump-paths', '2']) == EXIT_OK
    assert 'status: ok' in capsys.readouterr().out
    assert (out_dir / 'cli-exit.csv').exists()
    assert (out_dir / 'cli-exit.summary.yaml').exists()
    assert (out_dir / 'cli-exit.path-1.csv').read_text().startswith('t,x_1,x_2,jump_tag\n')


def test_run_all_returns_the_worst_exit_code(tmp_path, capsys):
    scenarios = tmp_path / 'scenarios'
    scenarios.mkdir()
    (scenarios / 'good.yaml').write_text(GOOD)
    (scenarios / 'strict.yaml').write_text(GOOD.replace('cli-exit', 'cli-tight').replace('max: 0.8', 'max: 0.01'))
    code = app.main(['run-all', str(scenarios), '--out', str(tmp_path / 'reports')])
    assert code == EXIT_EXPECTATION
    out = capsys.readouterr().out
    assert 'cli-exit: ok (exit 0)' in out
    assert 'cli-tight: failed (exit 4)' in out

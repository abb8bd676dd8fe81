from pathlib import Path

import yaml

from jumplab.scenario.assembly import RunContext
from jumplab.scenario.config import parse_config
from jumplab.scenario.runner import (
    CSV_COLUMNS,
    RunReport,
    EXIT_CONFIG,
    EXIT_EXPECTATION,
    EXIT_FAILED,
    EXIT_OK,
    EXIT_STRICT,
    check_expectations,
    output_dir,
    run_all,
    run_scenario,
)

SMALL = """
scenario:
  id: small-exit
operator:
  dimension: 2
simulation:
  dt: 0.001
  horizon: 20.0
experiment:
  estimator: exit_moment
  params:
    x0: [0.0, 0.0]
    domain: {shape: ball, center: [0.0, 0.0], radius: 1.0}
run:
  n_paths: 400
  block_size: 200
validation:
  points: 32
  directions: 8
  expect:
    - {label: exit_moment, min: 0.4, max: 0.65}
"""


def small(**changes):
    doc = yaml.safe_load(SMALL)
    for block, values in changes.items():
        doc[block].update(values)
    return parse_config(yaml.safe_dump(doc))


def test_run_writes_csv_and_summary(tmp_path):
    report = run_scenario(small(), out_dir=tmp_path)
    assert report.exit_code == EXIT_OK
    assert [row['label'] for row in report.rows] == ['exit_moment']
    assert [v['check'] for v in report.validation] == ['ellipticity', 'drift_bound', 'kernel_mass']

    lines = (tmp_path / 'small-exit.csv').read_text().splitlines()
    header = next(i for i, line in enumerate(lines) if not line.startswith('#'))
    assert lines[0].startswith('# ')
    assert lines[header] == ','.join(CSV_COLUMNS)
    assert lines[header + 1].startswith('small-exit,exit_moment,')

    summary = yaml.safe_load((tmp_path / 'small-exit.summary.yaml').read_text())
    assert summary['status'] == 'ok'
    assert summary['expectations'][0]['passed'] is True
    assert summary['params_hash'] == report.params_hash


def test_reruns_are_byte_identical(tmp_path):
    run_scenario(small(), out_dir=tmp_path / 'first')
    run_scenario(small(), RunContext(workers=2), out_dir=tmp_path / 'second')
    for name in ('small-exit.csv', 'small-exit.summary.yaml'):
        assert (tmp_path / 'first' / name).read_bytes() == (tmp_path / 'second' / name).read_bytes()


def test_failed_expectation(tmp_path):
    config = small(validation={'expect': [{'label': 'exit_moment', 'max': 0.1}]})
    report = run_scenario(config, out_dir=tmp_path)
    assert report.exit_code == EXIT_EXPECTATION
    assert report.failure == {'stage': 'expectations', 'failed': ['exit_moment']}
    assert yaml.safe_load(report.summary())['status'] == 'failed'


def test_strict_mode_rejects_uncertified_estimates():
    config = small(simulation={'horizon': 0.05}, validation={'expect': []})
    assert run_scenario(config).exit_code == EXIT_OK
    report = run_scenario(config, RunContext(strict=True))
    assert report.exit_code == EXIT_STRICT
    assert report.failure['uncertified'] == ['exit_moment']


def test_estimator_errors_fail_the_scenario():
    report = run_scenario(small(experiment={'params': {'x0': [2.0, 0.0],
                                                      'domain': {'shape': 'ball', 'center': [0.0, 0.0],
                                                                 'radius': 1.0}}}))
    assert report.exit_code == EXIT_FAILED
    assert report.failure['stage'] == 'estimator'
    assert report.failure['type'] == 'PreconditionError'


def test_expectations_can_read_detail_fields():
    config = small(validation={'expect': [{'label': 'x', 'field': 'z', 'max': 1.0},
                                          {'label': 'missing', 'min': 0.0}]})
    results = check_expectations(config, [{'label': 'x', 'value': 9.0, 'detail': {'z': 0.5}}])
    assert [r['passed'] for r in results] == [True, False]
    assert results[0]['observed'] == 0.5
    assert results[1]['observed'] is None


def test_run_all_isolates_broken_files(tmp_path):
    scenarios = tmp_path / 'scenarios'
    scenarios.mkdir()
    (scenarios / 'a-broken.yaml').write_text("scenario: {id: a-broken}\noperator: {dimension: 2}\n")
    (scenarios / 'b-small.yaml').write_text(SMALL)
    (scenarios / 'notes.txt').write_text("not a scenario")
    reports = run_all(scenarios, out_dir=tmp_path / 'out')
    assert [r.scenario_id for r in reports] == ['a-broken', 'small-exit']
    assert [r.exit_code for r in reports] == [EXIT_CONFIG, EXIT_OK]
    assert reports[0].failure['stage'] == 'config'
    assert (tmp_path / 'out' / 'small-exit.csv').exists()


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv('JUMPLAB_OUTPUT_DIR', raising=False)
    assert output_dir(small()) == Path('reports')
    monkeypatch.setenv('JUMPLAB_OUTPUT_DIR', str(tmp_path / 'env'))
    assert output_dir(small()) == tmp_path / 'env'
    configured = small(run={'output': str(tmp_path / 'configured')})
    assert output_dir(configured) == tmp_path / 'configured'
    assert output_dir(configured, tmp_path / 'flag') == tmp_path / 'flag'


def test_run_all_writes_to_the_configured_output(tmp_path, monkeypatch):
    monkeypatch.setenv('JUMPLAB_OUTPUT_DIR', str(tmp_path / 'env'))
    scenarios = tmp_path / 'scenarios'
    scenarios.mkdir()
    doc = yaml.safe_load(SMALL)
    doc['run']['output'] = str(tmp_path / 'configured')
    (scenarios / 'small.yaml').write_text(yaml.safe_dump(doc))
    [report] = run_all(scenarios)
    assert report.exit_code == EXIT_OK
    assert (tmp_path / 'configured' / 'small-exit.csv').exists()
    assert not (tmp_path / 'env').exists()


def test_summary_shows_predictions_next_to_results():
    report = RunReport('growth', 'counterexample_ratio', 'abc', 1, 'scenario: {id: growth}\n')
    report.rows = [
        {'label': 'growth:m=8/m=4', 'value': 1.6, 'stderr': 0.1, 'ci_low': 1.3, 'ci_high': 1.9, 'n': 100,
         'flags': '', 'detail': {'predicted': 1.45}},
        {'label': 'u_x:m=4:occupation', 'value': 0.2, 'stderr': 0.01, 'ci_low': 0.18, 'ci_high': 0.22,
         'n': 100, 'flags': '', 'detail': {}},
    ]
    results = yaml.safe_load(report.summary())['results']
    assert results[0]['predicted'] == 1.45
    assert results[0]['ci'] == [1.3, 1.9]
    assert 'predicted' not in results[1]

"""
Runs scenarios end to end and writes their reports.

For a scenario with id S the runner writes S.csv (config echo as '#' comment header, then one
row per reported quantity) and S.summary.yaml (status, validation, expectations, failure).
Both are byte-identical across reruns of the same config unless timing is requested.
"""

import csv
import io
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from jumplab import __version__
from jumplab.errors import ConfigError, InputError, JumpLabError
from jumplab.handlers import HANDLERS
from jumplab.operator_model import (
    drift_bound_check,
    kernel_mass_check,
    sample_directions,
    sample_points,
    validate_ellipticity,
)
from jumplab.path_simulator import simulate_skeletons
from jumplab.rng import RngStream
from jumplab.scenario.assembly import RunContext, build_operator, build_sim_params
from jumplab.scenario.config import load_config

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    'scenario_id', 'estimator', 'params_hash', 'label', 'value', 'stderr', 'ci_low', 'ci_high',
    'n', 'seed', 'wall_time', 'flags', 'detail',
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_STRICT = 3
EXIT_EXPECTATION = 4

KERNEL_MASS_POINTS = 16


@dataclass
class RunReport:
    scenario_id: str
    estimator: str
    params_hash: str
    seed: int
    config_text: str
    rows: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    expectations: list = field(default_factory=list)
    failure: dict = None
    exit_code: int = EXIT_OK
    wall_time: float = None
    version: str = __version__

    @property
    def status(self):
        return 'ok' if self.exit_code == EXIT_OK else 'failed'

    def csv_text(self):
        out = io.StringIO()
        for line in self.config_text.splitlines():
            out.write(f"# {line}\n")
        out.write(f"# jumplab {self.version}\n")
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        wall = _cell(self.wall_time)
        for row in self.rows:
            writer.writerow([
                self.scenario_id, self.estimator, self.params_hash, row['label'],
                _cell(row['value']), _cell(row['stderr']), _cell(row['ci_low']), _cell(row['ci_high']),
                _cell(row['n']), self.seed, wall, row.get('flags', ''),
                json.dumps(row.get('detail', {}), sort_keys=True, default=str),
            ])
        return out.getvalue()

    def summary(self):
        doc = {
            'scenario': self.scenario_id,
            'estimator': self.estimator,
            'version': self.version,
            'status': self.status,
            'exit_code': self.exit_code,
            'params_hash': self.params_hash,
            'validation': self.validation,
            'expectations': self.expectations,
            'results': [_summary_result(row) for row in self.rows],
        }
        if self.failure is not None:
            doc['failure'] = self.failure
        if self.wall_time is not None:
            doc['wall_time'] = self.wall_time
        return yaml.safe_dump(_plain(doc), sort_keys=False, default_flow_style=False)

    def write(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{self.scenario_id}.csv"
        csv_path.write_text(self.csv_text(), encoding='utf-8')
        (out_dir / f"{self.scenario_id}.summary.yaml").write_text(self.summary(), encoding='utf-8')
        logger.info("scenario %s: report written to %s", self.scenario_id, csv_path)
        return csv_path


def _summary_result(row):
    result = {'label': row['label'], 'value': row['value'], 'ci': [row['ci_low'], row['ci_high']],
              'flags': row.get('flags', '')}
    if 'predicted' in row.get('detail', {}):
        result['predicted'] = row['detail']['predicted']
    return result


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return value


def _plain(value):
    """YAML-safe copy with numpy scalars and non-finite floats made explicit."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def run_validators(config, op):
    """Ellipticity, drift and (when K is asserted) kernel-mass checks on a Sobol sample."""
    block = config.document['validation']
    if not block['enabled']:
        return []
    d = op.dimension
    box = block['box']
    points = sample_points(-box * np.ones(d), box * np.ones(d), block['points'], block['seed'])
    directions = sample_directions(d, block['directions'], block['seed'])
    reports = [validate_ellipticity(op.diffusion, points, directions), drift_bound_check(op.drift, points)]
    rows = [_plain(r.as_row()) for r in reports]
    if block['kernel_mass'] and op.K > 0:
        rows.append(_plain(kernel_mass_check(op, points[:KERNEL_MASS_POINTS]).as_row()))
    else:
        rows.append({'check': 'kernel_mass', 'passed': True, 'skipped': 'K not asserted'})
    return rows


def check_expectations(config, rows):
    results = []
    by_label = {row['label']: row for row in rows}
    for item in config.document['validation']['expect']:
        row = by_label.get(item['label'])
        value = None
        if row is not None:
            value = row[item['field']] if item['field'] in row else row.get('detail', {}).get(item['field'])
        if value is None:
            ok = False
        else:
            ok = (item['min'] is None or value >= item['min']) and (item['max'] is None or value <= item['max'])
        results.append(_plain({**item, 'observed': value, 'passed': ok}))
        if not ok:
            logger.warning("scenario %s: expectation on %s.%s failed (observed %s)",
                           config.id, item['label'], item['field'], value)
    return results


def dump_paths(config, op, count, out_dir):
    """First `count` skeletons from the experiment's start point, one CSV each."""
    settings = config.document['experiment']['params']
    start = next((settings[k] for k in ('x0', 'x', 'z0', 'center') if k in settings), None)
    if start is None and 'anchor' in settings:
        start = settings['anchor']['points'][0]
    start = np.asarray(start if start is not None else np.zeros(op.dimension), dtype=float)
    params = build_sim_params(config.document['simulation'])
    stream = RngStream(config.document['run']['seed'], 0)
    skeletons = simulate_skeletons(op, np.repeat(start[None, :], count, axis=0), params, stream)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, skeleton in enumerate(skeletons):
        with open(out_dir / f"{config.id}.path-{i}.csv", 'w', encoding='utf-8', newline='') as handle:
            skeleton.write_csv(handle)
    logger.info("scenario %s: dumped %d paths", config.id, count)


def run_scenario(config, context=None, out_dir=None):
    """Validators, then the estimator; the report is written when out_dir is given."""
    context = context or RunContext()
    strict = context.strict or config.strict
    report = RunReport(config.id, config.estimator, config.params_hash(), config.document['run']['seed'],
                       config.canonical_text())
    started = time.perf_counter()
    logger.info("scenario %s: start (%s)", config.id, config.estimator)

    # 1. validators
    try:
        op = build_operator(config.document['operator'])
        report.validation = run_validators(config, op)
    except JumpLabError as e:
        report.failure = {'stage': 'validation', 'type': type(e).__name__, 'error': str(e), 'witness': _plain(e.witness)}
        report.exit_code = EXIT_FAILED
        return _finish(report, context, started, out_dir)
    failed_checks = [v['check'] for v in report.validation if not v['passed']]
    if failed_checks:
        logger.warning("scenario %s: validators failed: %s", config.id, ', '.join(failed_checks))

    # 2. estimator
    response = HANDLERS[config.estimator](config.as_dict(), context)
    body = json.loads(response['body'])
    if response['statusCode'] != 200:
        report.failure = {'stage': 'estimator', 'status': response['statusCode'], **body}
        report.exit_code = EXIT_FAILED
        return _finish(report, context, started, out_dir)
    report.rows = body['rows']

    if out_dir is not None and context.dump_paths:
        dump_paths(config, op, context.dump_paths, out_dir)

    # 3. expectations and strict mode
    report.expectations = check_expectations(config, report.rows)
    uncertified = [row['label'] for row in report.rows if 'uncertified' in row.get('flags', '').split(';')]
    if strict and (uncertified or failed_checks):
        report.failure = {'stage': 'strict', 'uncertified': uncertified, 'failed_checks': failed_checks}
        report.exit_code = EXIT_STRICT
    elif not all(item['passed'] for item in report.expectations):
        report.failure = {'stage': 'expectations',
                          'failed': [item['label'] for item in report.expectations if not item['passed']]}
        report.exit_code = EXIT_EXPECTATION
    return _finish(report, context, started, out_dir)


def _finish(report, context, started, out_dir):
    elapsed = time.perf_counter() - started
    if context.timing:
        report.wall_time = round(elapsed, 3)
    logger.info("scenario %s: %s in %.1fs", report.scenario_id, report.status, elapsed)
    if out_dir is not None:
        report.write(out_dir)
    return report


def scenario_files(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix in ('.yaml', '.yml'))


def run_all(directory, context=None, out_dir=None):
    """Every scenario file in directory, in name order; a broken file fails alone.

    Reports go to output_dir(config, out_dir) for each scenario.
    """
    reports = []
    for path in scenario_files(directory):
        try:
            config = load_config(path)
        except ConfigError as e:
            logger.error("%s: %s", path.name, e)
            reports.append(RunReport(path.stem, '', '', 0, '', failure={'stage': 'config', 'error': str(e)},
                                     exit_code=EXIT_CONFIG))
            continue
        reports.append(run_scenario(config, context, output_dir(config, out_dir)))
    return reports


def default_output_dir():
    return os.environ.get('JUMPLAB_OUTPUT_DIR', 'reports')


def output_dir(config, override=None):
    """--out, then run.output, then $JUMPLAB_OUTPUT_DIR, then ./reports."""
    return Path(override or config.document['run']['output'] or default_output_dir())

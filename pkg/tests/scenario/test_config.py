from pathlib import Path

import pytest
import yaml

from jumplab.errors import ConfigError
from jumplab.scenario.config import load_config, parse_config, serialize_config

SCENARIOS = Path(__file__).resolve().parents[2] / 'scenarios'

BASE = """
scenario:
  id: small-exit
operator:
  dimension: 2
experiment:
  estimator: exit_moment
  params:
    x0: [0.0, 0.0]
    domain: {shape: ball, center: [0.0, 0.0], radius: 1.0}
run:
  n_paths: 100
"""


def document(**overrides):
    doc = yaml.safe_load(BASE)
    for path, value in overrides.items():
        node = doc
        keys = path.split('__')
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return yaml.safe_dump(doc)


def problems_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.problems


def test_defaults_are_filled_in():
    config = parse_config(BASE)
    doc = config.document
    assert config.id == 'small-exit'
    assert config.estimator == 'exit_moment'
    assert doc['simulation'] == {'dt': 0.001, 'delta': 0.05, 'horizon': 1.0, 'safety': 1.0,
                                 'dt_ratio': 1.0, 'meyer_rate_cap': 1e7}
    assert doc['run']['seed'] == 20240601
    assert doc['run']['confidence'] == 0.99
    assert doc['operator']['kernel'] == {'name': 'zero', 'params': {}}
    assert doc['experiment']['params']['p'] == 1.0
    assert doc['experiment']['params']['refine'] is False
    assert doc['validation']['enabled'] is True
    assert not config.strict


def test_every_problem_is_reported_with_its_key_path():
    problems = problems_of(document(operator__colour='red', bogus=1, run__n_paths='many'))
    assert ('operator.colour', "unknown key") in problems
    assert ('bogus', "unknown key") in problems
    assert ('run.n_paths', "expected integer, got string") in problems


def test_missing_required_keys():
    doc = yaml.safe_load(BASE)
    del doc['run']['n_paths']
    del doc['experiment']['params']['domain']
    problems = problems_of(yaml.safe_dump(doc))
    assert ('run.n_paths', "missing required integer") in problems
    assert ('experiment.params.domain', "missing required parameter") in problems


def test_unknown_names():
    assert ('experiment.estimator', "unknown estimator") in problems_of(document(experiment__estimator='guess'))
    with pytest.raises(ConfigError) as info:
        parse_config(document(operator__kernel={'name': 'nope'}))
    assert "unknown kernel at operator.kernel.name" in str(info.value)


def test_unknown_experiment_parameter():
    assert ('experiment.params.colour', "unknown parameter") in problems_of(
        document(experiment__params__colour='blue'))


def test_time_step_must_fit_the_truncation_level():
    problems = problems_of(document(simulation={'dt': 0.01, 'delta': 0.05}))
    assert [path for path, _ in problems] == ['simulation.dt']


def test_run_block_ranges():
    problems = problems_of(document(run__confidence=1.5, run__block_size=0))
    assert ('run.confidence', "must lie in (0, 1)") in problems
    assert ('run.block_size', "must be a positive integer") in problems


def test_yaml_errors_and_non_mappings():
    assert problems_of("scenario: [")[0][0] == ''
    assert problems_of("- just\n- a list\n") == [('', "scenario document must be a mapping")]


def test_canonical_text_round_trips():
    config = parse_config(BASE)
    text = serialize_config(config)
    again = parse_config(text)
    assert serialize_config(again) == text
    assert again.params_hash() == config.params_hash()


def test_params_hash_tracks_what_determines_the_estimate():
    config = parse_config(BASE)
    assert parse_config(document(run__output='elsewhere')).params_hash() == config.params_hash()
    assert parse_config(document(run__seed=7)).params_hash() != config.params_hash()
    assert parse_config(document(simulation__dt=0.0005)).params_hash() != config.params_hash()


@pytest.mark.parametrize('path', sorted(SCENARIOS.glob('*.yaml')), ids=lambda p: p.stem)
def test_shipped_scenarios_are_valid(path):
    config = load_config(path)
    assert config.id == path.stem
    assert config.document['validation']['expect']

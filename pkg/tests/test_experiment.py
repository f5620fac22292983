import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from core.errors import CatalogKeyError, ConfigError, UnknownCheckError
from core.labs.workflow import REPORT_FILE, TIMING_FILE, VERDICTS_FILE, file_stem, run_experiment
from core.models.experiment import ExperimentConfig
from core.models.verdicts import VerdictStatus


def _config(tmp_path: Path, **overrides) -> ExperimentConfig:
    values = {
        'keys': ['linear:n=2', 'monomial:k=1'],
        'samples': 5_000,
        'seed': 7,
        'checks': ['upper_gaussian', 'small_deviation'],
        'output_dir': tmp_path
    }
    values.update(overrides)
    return ExperimentConfig.model_validate(values)


def test_defaults():
    config = ExperimentConfig(keys=['linf:n=16'])
    assert config.samples == 200_000
    assert config.checks == ['all']
    assert config.epsilon_grid == []


@pytest.mark.parametrize('overrides', [
    {'samples': 10},
    {'keys': []},
    {'t_grid': [0.0, 2.0, 1.0]},
    {'t_grid': [-1.0, 1.0]},
    {'p_list': [0.5, 2.0]},
    {'epsilon_grid': [0.3, 0.1]},
    {'epsilon_grid': [0.1, 1.5]},
    {'trials': 5},
    {'directions': 10},
])
def test_invalid_values(tmp_path, overrides):
    with pytest.raises(ValidationError):
        _config(tmp_path, **overrides)


def test_references_keep_their_own_errors(tmp_path):
    with pytest.raises(CatalogKeyError):
        _config(tmp_path, keys=['nosuch:n=3'])
    with pytest.raises(UnknownCheckError):
        _config(tmp_path, checks=['nosuch'])


def test_validated_wraps_validation_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.validated({'keys': ['linf:n=16'], 'samples': 1})


def test_toml_folds_sections(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text(
        'keys = ["linf:n=16"]\n'
        'samples = 2000\n'
        '[grids]\n'
        't_grid = [0.0, 0.5, 1.0]\n'
        '[dvoretzky]\n'
        'epsilon_grid = [0.2, 0.3]\n'
        'trials = 40\n',
        encoding='utf-8'
    )
    config = ExperimentConfig.from_toml(path)
    assert config.t_grid == [0.0, 0.5, 1.0]
    assert config.epsilon_grid == [0.2, 0.3]
    assert config.trials == 40


@pytest.mark.parametrize('text', [
    'keys = [',
    'keys = ["linf:n=16"]\ngrids = 3\n',
    'keys = ["linf:n=16"]\nsamples = 2000\n[grids]\nsamples = 3000\n',
    'keys = ["linf:n=16"]\nsamples = 1\n',
])
def test_bad_toml(tmp_path, text):
    path = tmp_path / 'bad.toml'
    path.write_text(text, encoding='utf-8')
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(path)


def test_missing_toml(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(tmp_path / 'absent.toml')


def test_file_stem():
    assert file_stem('tilted:linf:n=256:t=4') == 'tilted_linf_n-256_t-4'


def test_workflow_writes_report_and_side_files(tmp_path):
    report = run_experiment(_config(tmp_path), threads=2)

    statuses = {(verdict.function_key, verdict.name): verdict.status for verdict in report.verdicts}
    assert statuses[('linear:n=2', 'upper_gaussian')] == VerdictStatus.PASSED
    assert statuses[('monomial:k=1', 'upper_gaussian')] == VerdictStatus.HYPOTHESIS_NOT_MET
    assert statuses[('monomial:k=1', 'small_deviation')] == VerdictStatus.FAILED
    assert not report.passed
    assert [summary.function_key for summary in report.summaries] == ['linear:n=2', 'monomial:k=1']
    assert report.summaries[1].constants is None

    body = json.loads((tmp_path / REPORT_FILE).read_text())
    assert body['seed'] == 7
    assert body['passed'] is False
    assert 'conclab' in body['versions']
    assert (tmp_path / VERDICTS_FILE).read_text().count('\n') == 5
    assert set(json.loads((tmp_path / TIMING_FILE).read_text())['seconds']) >= {'sample', 'run_checks'}
    assert (tmp_path / 'linear_n-2_tails.csv').exists()
    assert (tmp_path / 'linear_n-2_upper_gaussian.csv').exists()
    assert not (tmp_path / 'dvoretzky_success.csv').exists()


def test_report_body_does_not_depend_on_threads(tmp_path):
    config = _config(tmp_path / 'one', keys=['linf:n=16'], checks=['kwapien', 'skewness'], plots=False)
    run_experiment(config, threads=1)
    run_experiment(config.model_copy(update={'output_dir': tmp_path / 'four'}), threads=4)

    def body(directory: Path) -> dict:
        data = json.loads((directory / REPORT_FILE).read_text())
        data['config'].pop('output_dir')
        return data

    assert body(tmp_path / 'one') == body(tmp_path / 'four')


def test_workflow_runs_dvoretzky_and_keeps_samples(tmp_path):
    config = _config(tmp_path, keys=['tilted:linf:n=64:t=4'], checks=['kwapien'], epsilon_grid=[0.2, 0.3],
                     trials=40, directions=1000, polish=False, keep_samples=True, plots=False)
    report = run_experiment(config, threads=2)
    assert len(report.dvoretzky) == 1
    assert report.dvoretzky[0].t == 4.0
    assert (tmp_path / 'dvoretzky_success.csv').exists()
    assert (tmp_path / 'tilted_linf_n-64_t-4.samples').exists()

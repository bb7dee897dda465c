"""
End-to-end tests of the command line through app.cli.main
"""
import json
import os

import numpy as np
import pandas as pd
import pytest

from app.cli import main
from app.config import config_from_env
from app.manifest import manifest_path
from forest import load_forest

FAST = ['--trees', '8', '--threads', '1']


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """Run in tmp_path with no LORF_* settings leaking in or out"""
    monkeypatch.chdir(tmp_path)
    for key in [k for k in os.environ if k.startswith('LORF_')]:
        monkeypatch.delenv(key)
    yield
    for key in [k for k in os.environ if k.startswith('LORF_')]:
        del os.environ[key]


def _frame(n, shift, seed, with_response=True):
    rng = np.random.default_rng(seed)
    X = rng.normal(shift, 1.0, size=(n, 3))
    frame = pd.DataFrame(X, columns=['x1', 'x2', 'x3'])
    if with_response:
        frame['y'] = 2.0 * X[:, 0] + np.sin(X[:, 1]) + rng.normal(0.0, 0.2, size=n)
    return frame


@pytest.fixture
def files(tmp_path):
    train = tmp_path / 'train.csv'
    test = tmp_path / 'test.csv'
    _frame(120, 0.0, 1).to_csv(train, index=False)
    _frame(60, 0.7, 2).to_csv(test, index=False)
    return train, test


def _weights(train, test):
    assert main(['density-ratio', '--train', str(train), '--test', str(test), '--out', 'w.csv',
                 '--bandwidths', '0.5,1,2', '--ridges', '0.01,0.1', '--seed', '4'] + FAST) == 0
    return 'w.csv'


def test_density_ratio_writes_weights(files):
    weights = pd.read_csv(_weights(*files))
    assert list(weights.columns) == ['row', 'raw_weight', 'weight']
    assert len(weights) == 120
    assert (weights['weight'] >= 0).all()


def test_fit_twice_gives_identical_bytes(files):
    train, test = files
    w = _weights(train, test)
    for out in ('a.json', 'b.json'):
        assert main(['fit', '--train', str(train), '--weights', w, '--out', out, '--seed', '7'] + FAST) == 0
    with open('a.json', 'rb') as a, open('b.json', 'rb') as b:
        assert a.read() == b.read()


def test_fit_with_test_sample_estimates_weights(files, capsys):
    train, test = files
    assert main(['fit', '--train', str(train), '--test', str(test), '--out', 'model.json',
                 '--bandwidths', '1.0', '--ridges', '0.1'] + FAST) == 0
    assert os.path.exists('model.weights.csv')
    assert '[OK]' in capsys.readouterr().out
    assert load_forest('model.json').n_trees == 8


def test_predict_then_eval(files):
    train, test = files
    assert main(['fit', '--train', str(train), '--out', 'model.json'] + FAST) == 0
    assert main(['predict', '--model', 'model.json', '--data', str(test), '--out', 'preds.csv',
                 '--quantiles', '0.1,0.5,0.9'] + FAST) == 0
    preds = pd.read_csv('preds.csv')
    assert list(preds.columns) == ['mean', 'q0.1', 'q0.5', 'q0.9']
    assert len(preds) == 60

    assert main(['eval', '--predictions', 'preds.csv', '--data', str(test), '--out', 'metrics.json']) == 0
    metrics = json.loads(open('metrics.json').read())
    assert set(metrics) == {'rmse', 'mae', 'coverage', 'interval_width', 'score', 'alpha_level'}
    assert 0.0 <= metrics['coverage'] <= 1.0


def test_manifest_is_written(files):
    train, _ = files
    assert main(['fit', '--train', str(train), '--out', 'model.json', '--seed', '5'] + FAST) == 0
    manifest = json.loads(manifest_path('model.json').read_text())
    assert manifest['command'] == 'fit'
    assert manifest['seed'] == 5
    assert manifest['config']['n_trees'] == 8
    assert 'numpy' in manifest['versions']
    assert manifest['outputs'] == ['model.json']


def test_tune(files):
    train, _ = files
    assert main(['tune', '--train', str(train), '--mtry-grid', '1,3', '--out', 'tune.csv'] + FAST) == 0
    table = pd.read_csv('tune.csv')
    assert table['mtry'].tolist() == [1, 3]


def test_impute_writes_report(tmp_path):
    frame = _frame(80, 0.0, 3)
    frame.loc[::7, 'x2'] = np.nan
    frame.to_csv('gaps.csv', index=False)
    assert main(['impute', '--in', 'gaps.csv', '--out', 'filled.csv', '--seed', '1'] + FAST) == 0
    filled = pd.read_csv('filled.csv')
    assert not filled[['x1', 'x2', 'x3']].isna().any().any()
    report = json.loads(open('filled.csv.report.json').read())
    assert report['missing_by_column'] == {'x2': 12}


def test_simulate_rows():
    assert main(['simulate', '--models', '1', '--lambdas', '1.0,1.5', '--reps', '2', '--seed', '3',
                 '--n-train', '100', '--n-test', '50', '--out', 'results.csv'] + FAST) == 0
    results = pd.read_csv('results.csv')
    assert len(results) == 4


def test_config_file_and_flag_precedence(files, monkeypatch):
    train, _ = files
    with open('custom.env', 'w') as fh:
        fh.write('LORF_TREES=6\nLORF_NODESIZE=8\n')
    assert main(['fit', '--train', str(train), '--out', 'm1.json', '--config', 'custom.env',
                 '--threads', '1']) == 0
    first = load_forest('m1.json')
    assert first.n_trees == 6
    assert first.controls.nodesize == 8

    monkeypatch.setenv('LORF_TREES', '4')
    assert main(['fit', '--train', str(train), '--out', 'm2.json', '--trees', '3', '--threads', '1']) == 0
    assert load_forest('m2.json').n_trees == 3


def test_unknown_flag_is_a_usage_error(files):
    train, _ = files
    assert main(['fit', '--train', str(train), '--out', 'm.json', '--bogus']) == 2


def test_missing_input_fails_cleanly(capsys):
    assert main(['fit', '--train', 'nowhere.csv', '--out', 'm.json'] + FAST) == 1
    assert '[ERROR]' in capsys.readouterr().err


def test_domain_error_exit_code(files, capsys):
    train, _ = files
    assert main(['fit', '--train', str(train), '--out', 'm.json', '--mtry', '9'] + FAST) == 1
    assert 'mtry' in capsys.readouterr().err


def test_simulate_univariate_study():
    assert main(['simulate', '--study', 'univariate', '--reps', '2', '--seed', '1',
                 '--n-train', '120', '--n-test', '60', '--out', 'uni.csv'] + FAST) == 0
    frame = pd.read_csv('uni.csv')
    assert list(frame.columns) == ['unweighted', 'learned', 'oracle']
    assert len(frame) == 2
    assert (frame > 0).all().all()


def test_simulate_oob_study(capsys):
    assert main(['simulate', '--study', 'oob', '--models', '3', '--reps', '2', '--mtry-grid', '2,11',
                 '--n-train', '150', '--n-test', '50', '--out', 'oob.csv'] + FAST) == 0
    frame = pd.read_csv('oob.csv')
    assert set(frame['mtry']) == {2, 11}
    assert set(frame['method']) == {'weighted', 'unweighted'}
    assert (frame['lambda'] == 1.29).all()
    assert len(frame) == 2 * 2 * 2
    assert 'rank correlation' in capsys.readouterr().out


def test_simulate_oob_rejects_oversized_mtry(capsys):
    assert main(['simulate', '--study', 'oob', '--reps', '1', '--mtry-grid', '40',
                 '--n-train', '100', '--n-test', '50', '--out', 'oob.csv'] + FAST) == 1
    assert '[ERROR]' in capsys.readouterr().err


def test_classifier_ratio_uses_forest_flags(files, capsys):
    train, test = files
    assert main(['density-ratio', '--train', str(train), '--test', str(test), '--out', 'w.csv',
                 '--method', 'classifier', '--mtry', '9'] + FAST) == 1
    assert 'mtry' in capsys.readouterr().err


def test_classifier_ratio_with_nodesize(files):
    train, test = files
    assert main(['density-ratio', '--train', str(train), '--test', str(test), '--out', 'w.csv',
                 '--method', 'classifier', '--classifier-nodesize', '4', '--mtry', '2'] + FAST) == 0
    manifest = json.loads(manifest_path('w.csv').read_text())
    assert manifest['config']['classifier_nodesize'] == 4
    assert (pd.read_csv('w.csv')['raw_weight'] > 0).all()


def _predictions(files):
    train, test = files
    assert main(['fit', '--train', str(train), '--out', 'model.json'] + FAST) == 0
    assert main(['predict', '--model', 'model.json', '--data', str(test), '--out', 'preds.csv'] + FAST) == 0
    return test


def test_eval_rejects_ragged_predictions(files, capsys):
    test = _predictions(files)
    lines = open('preds.csv').read().splitlines()
    lines[3] += ',7,8'
    open('preds.csv', 'w').write('\n'.join(lines) + '\n')
    assert main(['eval', '--predictions', 'preds.csv', '--data', str(test), '--out', 'm.json']) == 1
    err = capsys.readouterr().err
    assert '[ERROR]' in err
    assert 'row 3' in err


def test_eval_rejects_non_numeric_predictions(files, capsys):
    test = _predictions(files)
    preds = pd.read_csv('preds.csv').astype(object)
    preds.loc[5, 'q0.9'] = 'high'
    preds.to_csv('preds.csv', index=False)
    assert main(['eval', '--predictions', 'preds.csv', '--data', str(test), '--out', 'm.json']) == 1
    err = capsys.readouterr().err
    assert '[ERROR]' in err
    assert "column 'q0.9'" in err


def test_eval_rejects_missing_quantile_column(files, capsys):
    test = _predictions(files)
    pd.read_csv('preds.csv').drop(columns='q0.1').to_csv('preds.csv', index=False)
    assert main(['eval', '--predictions', 'preds.csv', '--data', str(test), '--out', 'm.json']) == 1
    assert 'q0.1' in capsys.readouterr().err


def test_classifier_ratio_config_follows_run_config():
    config = config_from_env({'LORF_CLASSIFIER_NODESIZE': '7', 'LORF_MTRY': '2', 'LORF_TREES': '30'})
    clf = config.classifier_ratio_config()
    assert (clf.n_trees, clf.mtry, clf.nodesize) == (30, 2, 7)
    assert clf.sample_fraction == config.sample_fraction
    assert config.forest_controls().nodesize == 5

"""
Command-line entry point for the locally optimized random forest pipeline

Subcommands: simulate, density-ratio, fit, predict, tune, impute, eval.
Exit codes: 0 success, 1 failed run, 2 usage error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from analysis.metrics import compute_metrics
from analysis.simulation_study import (
    LAMBDA_GRID,
    OOB_STUDY_LAMBDA,
    run_oob_study,
    run_simulation_study,
    run_univariate_study,
    summarize_oob_study,
    write_results_csv,
)
from density_ratio.classifier_ratio import classifier_ratio_fit
from density_ratio.effective_sample import regularize_weights
from density_ratio.ulsif import ulsif_fit, ulsif_predict
from forest.forest import fit_forest, predict_mean, predict_quantiles
from forest.oob import tune_by_oob
from forest.persistence import load_forest, save_forest
from imputation.quantile_imputer import imputation_report, impute, make_imputation_plan
from input_parsers.csv_parser import (
    CsvDatasetParser,
    load_dataset,
    quantile_column_name,
    read_csv_strict,
    read_predictions,
    read_weights,
    write_dataset,
    write_predictions,
    write_weights,
)
from input_parsers.errors import ConfigurationError, LocalForestError
from input_parsers.models import Dataset

from .config import RATIO_METHODS, RunConfig, config_from_env, load_config_file, parse_float_list, parse_int_list
from .manifest import RunManifest

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

STUDIES = ('dirichlet', 'univariate', 'oob')
# study -> (n_train, n_test) defaults
STUDY_SIZES = {'dirichlet': (1000, 200), 'univariate': (500, 250), 'oob': (1000, 200)}

EPILOG = """
Examples:
  python local_forest.py simulate --models 1 --lambdas 1.0,1.5 --reps 5 --seed 3 --out results.csv
  python local_forest.py simulate --study univariate --reps 30 --out univariate.csv
  python local_forest.py simulate --study oob --models 3 --reps 20 --mtry-grid 2,11,31 --out oob.csv
  python local_forest.py density-ratio --train train.csv --test test.csv --method ulsif --out weights.csv
  python local_forest.py fit --train train.csv --weights weights.csv --out model.json --seed 7
  python local_forest.py fit --train train.csv --test test.csv --out model.json
  python local_forest.py predict --model model.json --data test.csv --quantiles 0.1,0.5,0.9 --out preds.csv
  python local_forest.py tune --train train.csv --weights weights.csv --mtry-grid 2,5,10 --out tuning.csv
  python local_forest.py impute --in data.csv --out imputed.csv --seed 1
  python local_forest.py eval --predictions preds.csv --data test.csv --out metrics.json
"""


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--seed', type=int, help='Master seed (default: LORF_SEED or 0)')
    parser.add_argument('--threads', type=int, help='Worker count, -1 for every core (default: LORF_THREADS or -1)')
    parser.add_argument('--config', type=str, help='dotenv file with LORF_* settings (default: lorf_config.env)')
    parser.add_argument('--response', type=str, help="Response column name (default: LORF_RESPONSE_COLUMN or 'y')")
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')


def _add_forest_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--trees', type=int, dest='n_trees', help='Number of trees (default: 500)')
    parser.add_argument('--mtry', type=int, help='Features tried per split (default: ceil(p/3))')
    parser.add_argument('--nodesize', type=int, help='Minimum rows per leaf (default: 5)')
    parser.add_argument('--max-nodes', type=int, dest='max_terminal_nodes', help='Leaf cap per tree (default: unlimited)')
    parser.add_argument('--sample-fraction', type=float, help='Resample size as a fraction of n (default: 0.6)')
    parser.add_argument('--replace', action='store_const', const=True, dest='with_replacement',
                        help='Resample with replacement')


def _add_ratio_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--method', choices=RATIO_METHODS, dest='ratio_method', help='Ratio estimator (default: ulsif)')
    parser.add_argument('--n0-fraction', type=float, help='Target n_eff / n for weight smoothing (default: 0.75)')
    parser.add_argument('--bandwidths', type=str, help='Comma-separated uLSIF bandwidth grid')
    parser.add_argument('--ridges', type=str, help='Comma-separated uLSIF ridge grid')
    parser.add_argument('--max-centroids', type=int, help='uLSIF kernel centre cap (default: 100)')
    parser.add_argument('--classifier-nodesize', type=int,
                        help='Minimum rows per leaf of the classifier-ratio forest (default: 10)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='local_forest',
        description='Locally optimized random forests for covariate shift',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='Run a covariate-shift simulation study')
    p.add_argument('--study', choices=STUDIES, default='dirichlet',
                   help='dirichlet benchmark, univariate shift, or oob-vs-holdout (default: dirichlet)')
    p.add_argument('--models', type=str, default='1', help='Comma-separated model ids 1-5 (default: 1)')
    p.add_argument('--lambdas', type=str,
                   help='Comma-separated shift strengths (default: the 8-point grid 1..1.5; oob: 1.29)')
    p.add_argument('--reps', type=int, default=30, help='Replications per cell (default: 30)')
    p.add_argument('--n-train', type=int, help='Training rows per draw (default: 1000; univariate: 500)')
    p.add_argument('--n-test', type=int, help='Test rows per draw (default: 200; univariate: 250)')
    p.add_argument('--mtry-grid', type=str, default='2,6,11,21,31', help='oob study: mtry values (default: 2,6,11,21,31)')
    p.add_argument('--baseline-mtry', type=int, help='dirichlet study: mtry of the unweighted arm (default: --mtry)')
    p.add_argument('--alpha', type=float, dest='alpha_level', help='Interval is (alpha, 1-alpha) (default: 0.1)')
    p.add_argument('--n0-fraction', type=float, help='Target n_eff / n (default: 0.75)')
    p.add_argument('--summary', type=str, help='Optional JSON summary path')
    p.add_argument('--out', type=str, required=True, help='Results CSV')
    _add_forest_flags(p)
    _add_common(p)

    p = sub.add_parser('density-ratio', help='Estimate importance weights for training rows')
    p.add_argument('--train', type=str, required=True, help='Training CSV')
    p.add_argument('--test', type=str, required=True, help='Test CSV (covariates)')
    p.add_argument('--out', type=str, required=True, help='Weights CSV (row, raw_weight, weight)')
    _add_ratio_flags(p)
    _add_forest_flags(p)
    _add_common(p)

    p = sub.add_parser('fit', help='Fit a (weighted) forest and save it as JSON')
    p.add_argument('--train', type=str, required=True, help='Training CSV with response')
    p.add_argument('--weights', type=str, help='Weights CSV from density-ratio')
    p.add_argument('--test', type=str, help='Test CSV; estimates weights first when --weights is absent')
    p.add_argument('--out', type=str, required=True, help='Model JSON')
    _add_forest_flags(p)
    _add_ratio_flags(p)
    _add_common(p)

    p = sub.add_parser('predict', help='Mean and quantile predictions from a saved model')
    p.add_argument('--model', type=str, required=True, help='Model JSON')
    p.add_argument('--data', type=str, required=True, help='Query CSV')
    p.add_argument('--quantiles', type=str, help='Comma-separated levels (default: 0.1,0.5,0.9)')
    p.add_argument('--out', type=str, required=True, help='Predictions CSV')
    _add_common(p)

    p = sub.add_parser('tune', help='Choose mtry by weighted out-of-bag error')
    p.add_argument('--train', type=str, required=True, help='Training CSV with response')
    p.add_argument('--weights', type=str, help='Weights CSV (default: uniform)')
    p.add_argument('--mtry-grid', type=str, required=True, help='Comma-separated mtry values')
    p.add_argument('--out', type=str, required=True, help='Tuning table CSV')
    _add_forest_flags(p)
    _add_common(p)

    p = sub.add_parser('impute', help='Fill missing covariates with quantile-forest draws')
    p.add_argument('--in', type=str, required=True, dest='input', help='CSV with missing cells')
    p.add_argument('--out', type=str, required=True, help='Imputed CSV')
    p.add_argument('--report', type=str, help='Sidecar JSON report (default: <out>.report.json)')
    p.add_argument('--use-imputed-predictors', action='store_true',
                   help='Also predict from columns imputed earlier in the order')
    _add_forest_flags(p)
    _add_common(p)

    p = sub.add_parser('eval', help='Score predictions against observed responses')
    p.add_argument('--predictions', type=str, required=True, help='Predictions CSV from predict')
    p.add_argument('--data', type=str, required=True, help='CSV holding the observed response')
    p.add_argument('--alpha', type=float, dest='alpha_level', help='Interval is (alpha, 1-alpha) (default: 0.1)')
    p.add_argument('--out', type=str, required=True, help='Metrics JSON')
    _add_common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < environment < flags"""
    load_config_file(Path(args.config) if args.config else None)
    config = config_from_env()
    flags = vars(args)
    overrides = {name: flags.get(name) for name in (
        'seed', 'threads', 'n_trees', 'mtry', 'nodesize', 'max_terminal_nodes', 'sample_fraction',
        'with_replacement', 'n0_fraction', 'ratio_method', 'max_centroids', 'classifier_nodesize', 'alpha_level',
    )}
    overrides['response_column'] = flags.get('response')
    if flags.get('quantiles'):
        overrides['quantiles'] = parse_float_list(flags['quantiles'])
    if flags.get('bandwidths'):
        overrides['bandwidth_grid'] = parse_float_list(flags['bandwidths'])
    if flags.get('ridges'):
        overrides['ridge_grid'] = parse_float_list(flags['ridges'])
    if args.verbose:
        overrides['log_level'] = 'DEBUG' if args.verbose > 1 else 'INFO'

    path_keys = ('train', 'test', 'weights', 'model', 'data', 'input', 'out', 'report', 'predictions', 'summary')
    paths = {k: flags[k] for k in path_keys if flags.get(k) is not None}
    options = {k: flags[k] for k in ('models', 'lambdas', 'reps', 'n_train', 'n_test', 'mtry_grid', 'study',
                                     'baseline_mtry', 'use_imputed_predictors') if k in flags}
    return config.with_overrides(command=args.command, paths=paths, options=options, **overrides)


def _configure_logging(level_name: str) -> None:
    level = getattr(logging, level_name.upper(), logging.WARNING)
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def _has_column(path: str, name: str) -> bool:
    if not Path(path).exists():
        raise FileNotFoundError(f"File not found: {path}")
    header = list(read_csv_strict(path, nrows=0).columns)
    return CsvDatasetParser().find_column(header, name) is not None


def _load_covariates(path: str, response_column: str) -> Dataset:
    """Dataset with the response split off when the file has one"""
    return load_dataset(path, response_column if _has_column(path, response_column) else None)


def _aligned_features(dataset: Dataset, names: List[str], label: str) -> np.ndarray:
    try:
        return dataset.select_features(names).features
    except ConfigurationError as e:
        raise ConfigurationError(f"{label} lacks training feature columns: {e}") from e


def estimate_weights(config: RunConfig, train: Dataset, test: Dataset):
    """Raw ratio estimates on the training rows smoothed to the n_eff target"""
    test_X = _aligned_features(test, train.feature_names, 'test data')
    if config.ratio_method == 'ulsif':
        model = ulsif_fit(train.features, test_X, bandwidth_grid=config.bandwidth_grid,
                          ridge_grid=config.ridge_grid, max_centroids=config.max_centroids,
                          seed=config.seed, n_jobs=config.threads)
        raw = ulsif_predict(model, train.features)
    else:
        raw = classifier_ratio_fit(train.features, test_X, config.classifier_ratio_config(),
                                   seed=config.seed, n_jobs=config.threads)
    return regularize_weights(raw, n0_fraction=config.n0_fraction)


def _study_sizes(opts: dict) -> tuple:
    """Per-study default training and test sizes"""
    n_train, n_test = STUDY_SIZES[opts.get('study') or 'dirichlet']
    return opts.get('n_train') or n_train, opts.get('n_test') or n_test


def _write_frame(frame: pd.DataFrame, path: str, manifest: RunManifest) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format='%.17g')
    manifest.add_output(out)
    return out


def _simulate_dirichlet(config: RunConfig, manifest: RunManifest) -> str:
    opts = config.options
    models = parse_int_list(opts['models'])
    lambdas = parse_float_list(opts['lambdas']) if opts.get('lambdas') else list(LAMBDA_GRID)
    n_train, n_test = _study_sizes(opts)
    baseline = None
    if opts.get('baseline_mtry') is not None:
        baseline = config.forest_controls().with_changes(mtry=opts['baseline_mtry'])
    results = run_simulation_study(
        models, lambdas, replications=opts['reps'], controls=config.forest_controls(),
        n0_fraction=config.n0_fraction, seed=config.seed, alpha_level=config.alpha_level,
        n_train=n_train, n_test=n_test, n_jobs=config.threads, baseline_controls=baseline,
    )
    out = write_results_csv(results, config.paths['out'])
    manifest.add_output(out)
    summary = config.paths.get('summary')
    if summary:
        Path(summary).write_text(json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True) + '\n')
        manifest.add_output(summary)
    failed = sum(r.failed for r in results)
    if failed:
        print(f"[WARNING] {failed} replication(s) failed and were excluded")
    print(f"[OK] {len(results)} cell(s) written to {out}")
    return config.paths['out']


def _simulate_univariate(config: RunConfig, manifest: RunManifest) -> str:
    n_train, n_test = _study_sizes(config.options)
    frame = run_univariate_study(
        replications=config.options['reps'], controls=config.forest_controls(), seed=config.seed,
        n_train=n_train, n_test=n_test, n_jobs=config.threads,
    )
    out = _write_frame(frame, config.paths['out'], manifest)
    means = frame.mean()
    print(f"[OK] Mean RMSE unweighted={means['unweighted']:.4f} learned={means['learned']:.4f} "
          f"oracle={means['oracle']:.4f}; {len(frame)} replication(s) written to {out}")
    return str(out)


def _simulate_oob(config: RunConfig, manifest: RunManifest) -> str:
    opts = config.options
    lambdas = parse_float_list(opts['lambdas']) if opts.get('lambdas') else [OOB_STUDY_LAMBDA]
    grid = parse_int_list(opts.get('mtry_grid') or '2,6,11,21,31')
    n_train, n_test = _study_sizes(opts)
    frames = [
        run_oob_study(model_id, lam, mtry_grid=grid, replications=opts['reps'],
                      controls=config.forest_controls(), n0_fraction=config.n0_fraction,
                      seed=config.seed, n_train=n_train, n_test=n_test, n_jobs=config.threads)
        for model_id in parse_int_list(opts['models'])
        for lam in lambdas
    ]
    frame = pd.concat(frames, ignore_index=True)
    out = _write_frame(frame, config.paths['out'], manifest)
    summary = summarize_oob_study(frame)
    print(f"[OK] Weighted OOB closer to test MSE in {summary['weighted_closer']:.0%} of fits; "
          f"mean rank correlation {summary['rank_correlation']:.3f}; written to {out}")
    return str(out)


SIMULATIONS = {
    'dirichlet': _simulate_dirichlet,
    'univariate': _simulate_univariate,
    'oob': _simulate_oob,
}


def cmd_simulate(config: RunConfig, manifest: RunManifest) -> str:
    return SIMULATIONS[config.options.get('study') or 'dirichlet'](config, manifest)


def cmd_density_ratio(config: RunConfig, manifest: RunManifest) -> str:
    train = _load_covariates(config.paths['train'], config.response_column)
    test = _load_covariates(config.paths['test'], config.response_column)
    weights = estimate_weights(config, train, test)
    out = write_weights(config.paths['out'], weights.raw, weights.effective)
    manifest.add_output(out)
    if not weights.target_reached:
        print(f"[WARNING] n_eff target unreachable; smoothing exponent set to {weights.smoothing_exponent:g}")
    print(f"[OK] Weights for {len(weights)} rows written to {out} "
          f"(lambda={weights.smoothing_exponent:.4f}, n_eff={weights.n_eff:.1f})")
    return config.paths['out']


def _load_training(config: RunConfig) -> Dataset:
    return load_dataset(config.paths['train'], config.response_column)


def cmd_fit(config: RunConfig, manifest: RunManifest) -> str:
    train = _load_training(config)
    out = Path(config.paths['out'])
    weights = None
    if config.paths.get('weights'):
        weights = read_weights(config.paths['weights'])
    elif config.paths.get('test'):
        test = _load_covariates(config.paths['test'], config.response_column)
        estimated = estimate_weights(config, train, test)
        weights_path = write_weights(out.with_name(out.stem + '.weights.csv'), estimated.raw, estimated.effective)
        manifest.add_output(weights_path)
        print(f"[OK] Estimated weights written to {weights_path} (n_eff={estimated.n_eff:.1f})")
        weights = estimated

    forest = fit_forest(train, weights, config.forest_controls(), n_jobs=config.threads)
    save_forest(forest, out)
    manifest.add_output(out)
    print(f"[OK] Forest with {forest.n_trees} trees saved to {out}")
    return str(out)


def cmd_predict(config: RunConfig, manifest: RunManifest) -> str:
    forest = load_forest(config.paths['model'])
    data = _load_covariates(config.paths['data'], config.response_column)
    X = _aligned_features(data, forest.feature_names, 'query data')
    mean = predict_mean(forest, X)
    quantiles = predict_quantiles(forest, X, config.quantiles) if config.quantiles else {}
    out = write_predictions(config.paths['out'], mean, quantiles)
    manifest.add_output(out)
    print(f"[OK] Predictions for {X.shape[0]} rows written to {out}")
    return config.paths['out']


def cmd_tune(config: RunConfig, manifest: RunManifest) -> str:
    train = _load_training(config)
    weights = read_weights(config.paths['weights']) if config.paths.get('weights') else None
    grid = parse_int_list(config.options['mtry_grid'])
    best, table = tune_by_oob(train, weights, grid, config.forest_controls(), n_jobs=config.threads)
    out = Path(config.paths['out'])
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False, float_format='%.17g')
    manifest.add_output(out)
    print(f"[OK] Best mtry={best.mtry}; table written to {out}")
    return str(out)


def cmd_impute(config: RunConfig, manifest: RunManifest) -> str:
    dataset = _load_covariates(config.paths['input'], config.response_column)
    plan = make_imputation_plan(dataset, config.forest_controls(), seed=config.seed,
                                use_imputed_predictors=bool(config.options.get('use_imputed_predictors')))
    imputed = impute(dataset, plan, n_jobs=config.threads)
    out = write_dataset(imputed, config.paths['out'])
    report_path = Path(config.paths.get('report') or str(out) + '.report.json')
    report_path.write_text(json.dumps(imputation_report(dataset, plan), indent=2, sort_keys=True) + '\n')
    manifest.add_output(out)
    manifest.add_output(report_path)
    print(f"[OK] Imputed {int(dataset.missing_mask.sum())} cell(s); written to {out}")
    return str(out)


def cmd_eval(config: RunConfig, manifest: RunManifest) -> str:
    alpha = config.alpha_level
    lo_col, hi_col = quantile_column_name(alpha), quantile_column_name(1.0 - alpha)
    predictions = read_predictions(config.paths['predictions'], ('mean', lo_col, hi_col))
    data = load_dataset(config.paths['data'], config.response_column)
    n_predictions = len(predictions['mean'])
    if n_predictions != data.n_rows:
        raise ConfigurationError(f"{n_predictions} predictions for {data.n_rows} observed rows")
    report = compute_metrics(data.response, predictions['mean'], predictions[lo_col], predictions[hi_col], alpha)
    out = Path(config.paths['out'])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n')
    manifest.add_output(out)
    print(f"[OK] RMSE={report.rmse:.4f} MAE={report.mae:.4f} coverage={report.coverage:.4f} "
          f"width={report.interval_width:.4f} score={report.score:.4f}")
    return str(out)


COMMANDS = {
    'simulate': cmd_simulate,
    'density-ratio': cmd_density_ratio,
    'fit': cmd_fit,
    'predict': cmd_predict,
    'tune': cmd_tune,
    'impute': cmd_impute,
    'eval': cmd_eval,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0

    try:
        config = resolve_config(args)
        _configure_logging(config.log_level)
        with RunManifest(config) as manifest:
            primary = COMMANDS[args.command](config, manifest)
        manifest.write(primary)
    except (LocalForestError, FileNotFoundError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return 1
    return 0

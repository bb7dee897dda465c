"""
Monte Carlo studies of weighted against unweighted forests under covariate shift

Dirichlet benchmark: per (model, lambda, replication) draw train/test data,
estimate uLSIF weights on the covariates, smooth them to n_eff = n0_fraction * n,
fit weighted and unweighted forests and score both on the test sample.

Univariate study: the one-dimensional shift with unweighted, learned and
oracle-weighted forests, scored by RMSE against the noise-free signal.

OOB study: weighted and uniform out-of-bag errors against held-out error on
the shifted test sample, over an mtry grid.

Ratio comparison: uLSIF against the classifier baseline on two Gaussians.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import spearmanr

from density_ratio.classifier_ratio import ClassifierRatioConfig, ClassifierRatioEstimator
from density_ratio.effective_sample import regularize_weights
from density_ratio.ulsif import ulsif_fit, ulsif_predict
from forest.controls import ForestControls
from forest.forest import fit_forest, predict_mean, predict_quantiles
from forest.oob import oob_error
from input_parsers.errors import ConfigurationError, LocalForestError
from simulation.shift_models import (
    N_DIRICHLET,
    N_UNIFORM,
    ShiftBenchmarkSpec,
    gaussian_ratio_true,
    generate_dirichlet_shift,
    generate_gaussian_ratio_pair,
    generate_univariate_shift,
    univariate_signal,
)

from .metrics import DEFAULT_ALPHA, MetricsReport, compute_metrics

logger = logging.getLogger(__name__)

LAMBDA_GRID = (1.0, 1.07, 1.14, 1.21, 1.29, 1.36, 1.43, 1.5)
DEFAULT_REPLICATIONS = 30
DEFAULT_N0_FRACTION = 0.75
# Terminal nodes per tree (m_n) in the one-dimensional study
UNIVARIATE_LEAF_BUDGET = 4
METHODS = ('weighted', 'unweighted')
RESULT_COLUMNS = ['model', 'lambda', 'method', 'rmse', 'mae', 'covg', 'int_width', 'score']
OOB_STUDY_LAMBDA = 1.29
OOB_STUDY_MTRY_GRID = (2, 6, 11, 21, 31)
OOB_COLUMNS = ['model', 'lambda', 'replication', 'mtry', 'method',
               'oob_weighted', 'oob_uniform', 'test_mse', 'test_rmse']


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def replication_seed(seed: int, model_id: int, lambda_index: int, replication: int) -> np.random.SeedSequence:
    """Seed stream of one replication; independent of scheduling"""
    return np.random.SeedSequence(seed, spawn_key=(model_id, lambda_index, replication))


@dataclass
class SimulationResult:
    """Per-method metrics averaged over the successful replications of one cell"""
    model_id: int
    lambda_shift: float
    replications: int
    failed: int = 0
    methods: Dict[str, MetricsReport] = field(default_factory=dict)

    def to_rows(self) -> List[dict]:
        return [
            {
                'model': self.model_id,
                'lambda': self.lambda_shift,
                'method': method,
                'rmse': report.rmse,
                'mae': report.mae,
                'covg': report.coverage,
                'int_width': report.interval_width,
                'score': report.score,
            }
            for method, report in self.methods.items()
        ]

    def to_dict(self) -> dict:
        return {
            'model': self.model_id,
            'lambda': self.lambda_shift,
            'replications': self.replications,
            'failed': self.failed,
            'methods': {m: r.to_dict() for m, r in self.methods.items()},
        }


def aggregate_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Average the four components; the score is recomputed from the averages"""
    if not reports:
        raise ConfigurationError("nothing to aggregate")
    return MetricsReport.from_components(
        rmse=float(np.mean([r.rmse for r in reports])),
        mae=float(np.mean([r.mae for r in reports])),
        coverage=float(np.mean([r.coverage for r in reports])),
        interval_width=float(np.mean([r.interval_width for r in reports])),
        alpha_level=reports[0].alpha_level,
    )


def _draw_benchmark(model_id: int, lambda_shift: float, data_seq: np.random.SeedSequence,
                    ratio_seq: np.random.SeedSequence, n0_fraction: float, n_train: int,
                    n_test: int, noise_sd: float = 0.5):
    """Training and test draws plus smoothed uLSIF weights on the training rows"""
    spec = ShiftBenchmarkSpec(lambda_shift=lambda_shift, n_train=n_train, n_test=n_test,
                              model_id=model_id, noise_sd=noise_sd, seed=_seed_int(data_seq))
    train = generate_dirichlet_shift(spec, 'train')
    test = generate_dirichlet_shift(spec, 'test')
    ratio_model = ulsif_fit(train.features, test.features, seed=_seed_int(ratio_seq))
    weights = regularize_weights(ulsif_predict(ratio_model, train.features), n0_fraction=n0_fraction)
    return train, test, weights


def run_replication(model_id: int, lambda_shift: float, seq: np.random.SeedSequence,
                    controls: ForestControls, n0_fraction: float = DEFAULT_N0_FRACTION,
                    alpha_level: float = DEFAULT_ALPHA, n_train: int = 1000, n_test: int = 200,
                    noise_sd: float = 0.5, n_jobs: int = 1,
                    baseline_controls: Optional[ForestControls] = None) -> Dict[str, MetricsReport]:
    """One draw of the Dirichlet benchmark scored for both methods

    The unweighted arm is grown with `baseline_controls` when given, else with
    `controls`. Both arms share the replication's forest seed.
    """
    data_seq, ratio_seq, forest_seq = seq.spawn(3)
    train, test, weights = _draw_benchmark(model_id, lambda_shift, data_seq, ratio_seq,
                                           n0_fraction, n_train, n_test, noise_sd)

    forest_seed = _seed_int(forest_seq)
    arms = (
        ('weighted', weights, controls),
        ('unweighted', None, baseline_controls or controls),
    )
    levels = (alpha_level, 1.0 - alpha_level)
    reports = {}
    for method, w, arm_controls in arms:
        forest = fit_forest(train, w, arm_controls.with_changes(seed=forest_seed), n_jobs=n_jobs)
        mean = predict_mean(forest, test.features)
        bounds = predict_quantiles(forest, test.features, levels)
        reports[method] = compute_metrics(test.response, mean, bounds[levels[0]], bounds[levels[1]], alpha_level)
    return reports


def _guarded_replication(*args, **kwargs):
    try:
        return run_replication(*args, **kwargs), None
    except (LocalForestError, ArithmeticError) as e:
        return None, str(e)


def run_simulation_study(model_ids: Sequence[int], lambda_grid: Sequence[float] = LAMBDA_GRID,
                         replications: int = DEFAULT_REPLICATIONS,
                         controls: Optional[ForestControls] = None,
                         n0_fraction: float = DEFAULT_N0_FRACTION, seed: int = 0,
                         alpha_level: float = DEFAULT_ALPHA, n_train: int = 1000,
                         n_test: int = 200, n_jobs: int = 1,
                         baseline_controls: Optional[ForestControls] = None) -> List[SimulationResult]:
    """
    Run the Dirichlet covariate-shift benchmark

    Args:
        model_ids: Response models (1-5)
        lambda_grid: Shift strengths
        replications: Draws per (model, lambda) cell
        controls: Forest controls of the weighted arm (and of the unweighted
            arm unless baseline_controls is given)
        n0_fraction: Target effective sample size as a fraction of n_train
        seed: Master seed
        alpha_level: Interval is (alpha, 1 - alpha)
        n_train: Training sample size
        n_test: Test sample size
        n_jobs: joblib workers over replications
        baseline_controls: Forest controls of the unweighted arm, e.g. a
            smaller mtry than the weighted arm's every-feature search

    Returns:
        One SimulationResult per (model, lambda) cell with at least one successful replication
    """
    if replications < 1:
        raise ConfigurationError(f"replications must be >= 1, got {replications}")
    controls = controls or ForestControls()

    results = []
    for model_id in model_ids:
        for lambda_index, lambda_shift in enumerate(lambda_grid):
            outcomes = Parallel(n_jobs=n_jobs)(
                delayed(_guarded_replication)(
                    model_id, float(lambda_shift), replication_seed(seed, model_id, lambda_index, r),
                    controls, n0_fraction, alpha_level, n_train, n_test,
                    baseline_controls=baseline_controls,
                )
                for r in range(replications)
            )
            succeeded = [reports for reports, _ in outcomes if reports is not None]
            errors = [err for _, err in outcomes if err is not None]
            for err in errors:
                logger.warning("Model %d, lambda=%g: replication failed: %s", model_id, lambda_shift, err)
            if not succeeded:
                logger.error("Model %d, lambda=%g: every replication failed", model_id, lambda_shift)
                continue

            result = SimulationResult(
                model_id=model_id,
                lambda_shift=float(lambda_shift),
                replications=len(succeeded),
                failed=len(errors),
                methods={m: aggregate_reports([r[m] for r in succeeded]) for m in METHODS},
            )
            logger.info(
                "Model %d, lambda=%g: RMSE weighted %.4f, unweighted %.4f (%d reps)",
                model_id, lambda_shift, result.methods['weighted'].rmse,
                result.methods['unweighted'].rmse, result.replications,
            )
            results.append(result)
    return results


def results_frame(results: Sequence[SimulationResult]) -> pd.DataFrame:
    rows = [row for result in results for row in result.to_rows()]
    return pd.DataFrame.from_records(rows, columns=RESULT_COLUMNS)


def write_results_csv(results: Sequence[SimulationResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results_frame(results).to_csv(path, index=False, float_format='%.17g')
    return path


def read_results_csv(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    frame = pd.read_csv(path)
    absent = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if absent:
        raise ConfigurationError(f"results file {path.name} lacks columns: {', '.join(absent)}")
    return frame


def _univariate_replication(seq: np.random.SeedSequence, controls: ForestControls,
                            n_train: int, n_test: int, n0_fraction: Optional[float],
                            noise_variance: float) -> Dict[str, float]:
    data_seq, ratio_seq, forest_seq = seq.spawn(3)
    train, test, oracle_ratio = generate_univariate_shift(n_train, n_test, _seed_int(data_seq),
                                                           noise_variance=noise_variance)
    ratio_model = ulsif_fit(train.features, test.features, seed=_seed_int(ratio_seq))
    learned = ulsif_predict(ratio_model, train.features)
    oracle = oracle_ratio(train.features[:, 0])
    if n0_fraction is not None:
        learned = regularize_weights(learned, n0_fraction=n0_fraction)
        oracle = regularize_weights(oracle, n0_fraction=n0_fraction)

    truth = univariate_signal(test.features[:, 0])
    forest_controls = controls.with_changes(seed=_seed_int(forest_seq))
    rmse = {}
    for method, w in (('unweighted', None), ('learned', learned), ('oracle', oracle)):
        prediction = predict_mean(fit_forest(train, w, forest_controls), test.features)
        rmse[method] = float(np.sqrt(np.mean((prediction - truth) ** 2)))
    return rmse


def run_univariate_study(replications: int = DEFAULT_REPLICATIONS,
                         controls: Optional[ForestControls] = None, seed: int = 0,
                         n_train: int = 500, n_test: int = 250,
                         n0_fraction: Optional[float] = None, noise_variance: float = 0.5,
                         n_jobs: int = 1,
                         leaf_budget: Optional[int] = UNIVARIATE_LEAF_BUDGET) -> pd.DataFrame:
    """
    Repeat the one-dimensional shift example

    All three forests share the same controls. Their trees stop at
    `leaf_budget` terminal nodes unless the controls set their own cap, so the
    weights decide which region the few splits resolve. Without a budget the
    sparse test region ends up in the same few nodesize-bound leaves under
    every weighting.

    Args:
        replications: Independent draws
        controls: Forest controls shared by the three arms
        seed: Master seed
        n_train: Training sample size
        n_test: Test sample size
        n0_fraction: Smooth both weight vectors to this n_eff / n; None keeps raw ratios
        noise_variance: Variance of Y around phi(X)
        n_jobs: joblib workers over replications
        leaf_budget: Terminal nodes per tree when the controls set none; None grows to nodesize

    Returns:
        DataFrame with one row per replication and columns unweighted, learned, oracle
        holding test RMSE against the noise-free signal
    """
    if replications < 1:
        raise ConfigurationError(f"replications must be >= 1, got {replications}")
    controls = controls or ForestControls()
    if leaf_budget is not None and controls.max_terminal_nodes is None:
        controls = controls.with_changes(max_terminal_nodes=leaf_budget)
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_univariate_replication)(
            np.random.SeedSequence(seed, spawn_key=(r,)), controls, n_train, n_test,
            n0_fraction, noise_variance,
        )
        for r in range(replications)
    )
    frame = pd.DataFrame.from_records(rows, columns=['unweighted', 'learned', 'oracle'])
    logger.info("Univariate study mean RMSE: %s", frame.mean().round(4).to_dict())
    return frame


def _oob_replication(model_id: int, lambda_shift: float, seq: np.random.SeedSequence,
                     mtry_grid: Sequence[int], controls: ForestControls, n0_fraction: float,
                     n_train: int, n_test: int) -> List[dict]:
    data_seq, ratio_seq, forest_seq = seq.spawn(3)
    train, test, weights = _draw_benchmark(model_id, lambda_shift, data_seq, ratio_seq,
                                           n0_fraction, n_train, n_test)
    forest_seed = _seed_int(forest_seq)
    rows = []
    for mtry in mtry_grid:
        arm_controls = controls.with_changes(mtry=mtry, seed=forest_seed)
        for method, w in (('weighted', weights), ('unweighted', None)):
            forest = fit_forest(train, w, arm_controls)
            residuals = predict_mean(forest, test.features) - test.response
            test_mse = float(np.mean(residuals ** 2))
            rows.append({
                'mtry': int(mtry),
                'method': method,
                'oob_weighted': oob_error(forest, train, mode='weighted', weights=weights).value,
                'oob_uniform': oob_error(forest, train, mode='uniform').value,
                'test_mse': test_mse,
                'test_rmse': float(np.sqrt(test_mse)),
            })
    return rows


def run_oob_study(model_id: int = 3, lambda_shift: float = OOB_STUDY_LAMBDA,
                  mtry_grid: Sequence[int] = OOB_STUDY_MTRY_GRID,
                  replications: int = 20, controls: Optional[ForestControls] = None,
                  n0_fraction: float = DEFAULT_N0_FRACTION, seed: int = 0,
                  n_train: int = 1000, n_test: int = 200, n_jobs: int = 1) -> pd.DataFrame:
    """
    Out-of-bag error against held-out error under the test distribution, over an mtry grid

    Per replication one Dirichlet draw is made and its uLSIF weights are
    smoothed to n0_fraction. For every mtry a weighted and an unweighted forest
    are fitted. Both OOB errors are computed with the same smoothed weights and
    compared with the mean squared error on the shifted test sample.

    Returns:
        DataFrame with columns OOB_COLUMNS, one row per (replication, mtry, method)
    """
    if replications < 1:
        raise ConfigurationError(f"replications must be >= 1, got {replications}")
    grid = sorted(set(int(m) for m in mtry_grid))
    n_features = N_DIRICHLET + N_UNIFORM
    if not grid or grid[0] < 1 or grid[-1] > n_features:
        raise ConfigurationError(f"mtry_grid must hold values in 1..{n_features}, got {list(mtry_grid)}")
    controls = controls or ForestControls()

    per_replication = Parallel(n_jobs=n_jobs)(
        delayed(_oob_replication)(
            model_id, float(lambda_shift), np.random.SeedSequence(seed, spawn_key=(model_id, r)),
            grid, controls, n0_fraction, n_train, n_test,
        )
        for r in range(replications)
    )
    records = [
        {'model': model_id, 'lambda': float(lambda_shift), 'replication': r, **row}
        for r, rows in enumerate(per_replication)
        for row in rows
    ]
    frame = pd.DataFrame.from_records(records, columns=OOB_COLUMNS)
    logger.info("OOB study, model %d, lambda=%g: %d forests", model_id, lambda_shift, len(frame))
    return frame


def summarize_oob_study(frame: pd.DataFrame) -> Dict[str, float]:
    """
    Agreement of the weighted forests' OOB errors with their held-out error

    Returns:
        weighted_closer: share of (replication, mtry) cells where the weighted
            OOB error is at least as close to the test MSE as the uniform one;
        rank_correlation: mean over replications of the Spearman correlation
            between weighted OOB error and test RMSE across the mtry grid
            (NaN when the grid has a single value)
    """
    weighted = frame[frame['method'] == 'weighted']
    if weighted.empty:
        raise ConfigurationError("no weighted forests in the OOB study frame")
    closer = ((weighted['oob_weighted'] - weighted['test_mse']).abs()
              <= (weighted['oob_uniform'] - weighted['test_mse']).abs())
    correlations = [
        spearmanr(group['oob_weighted'], group['test_rmse']).correlation
        for _, group in weighted.groupby('replication')
        if group['mtry'].nunique() > 1
    ]
    return {
        'weighted_closer': float(closer.mean()),
        'rank_correlation': float(np.nanmean(correlations)) if correlations else float('nan'),
    }


def compare_ratio_estimators(n: int = 1500, seed: int = 0, grid: Optional[np.ndarray] = None,
                             classifier_config: Optional[ClassifierRatioConfig] = None,
                             n_jobs: int = 1) -> Dict[str, float]:
    """
    RMSE of uLSIF and the classifier baseline against the true two-Gaussian ratio

    The classifier's ratio is evaluated on the grid through its fitted forest,
    uLSIF through its kernel expansion.
    """
    grid = np.linspace(-8.0, 8.0, 512) if grid is None else np.asarray(grid, dtype=np.float64)
    data_seq, ulsif_seq, clf_seq = np.random.SeedSequence(seed).spawn(3)
    train_X, test_X = generate_gaussian_ratio_pair(n, n, _seed_int(data_seq))
    truth = gaussian_ratio_true(grid)

    ulsif = ulsif_fit(train_X, test_X, seed=_seed_int(ulsif_seq), n_jobs=n_jobs)
    ulsif_estimate = ulsif_predict(ulsif, grid.reshape(-1, 1))
    classifier = ClassifierRatioEstimator(classifier_config, seed=_seed_int(clf_seq), n_jobs=n_jobs)
    classifier_estimate = classifier.fit(train_X, test_X).ratio(grid.reshape(-1, 1))

    return {
        'ulsif_rmse': float(np.sqrt(np.mean((ulsif_estimate - truth) ** 2))),
        'classifier_rmse': float(np.sqrt(np.mean((classifier_estimate - truth) ** 2))),
    }

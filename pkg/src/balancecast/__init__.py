"""Interpretable forecasting toolkit for balancing-market activation prices.

Four model families over a shared gap-free quarter-hour dataset: a naive
persistence baseline, gradient-boosted trees, a cyclic-boosting additive
model with exportable shape functions, and a stacked combination of the
latter two. An expanding-window harness evaluates them with MAE/RMSE/R2,
both overall and restricted to deviation events.
"""

from .baseline import NaiveModel, naive_forecast, naive_forecast_series
from .data import (
    CONTINUOUS,
    CYCLICAL,
    DEFAULT_HORIZON_STEPS,
    Dataset,
    FeatureSchema,
    SyntheticConfig,
    SyntheticTruth,
    align_horizon,
    encode_cyclical,
    generate_synthetic,
    hour_of_day,
    load_csv,
    month_index,
    save_csv,
    save_truth_json,
    synthetic_schema,
    truth_table,
)
from .ebm import (
    BinMap,
    EbmConfig,
    EbmModel,
    ShapeFunction,
    apply_shape_table,
    bin_centers,
    build_bins,
    ebm_from_dict,
    ebm_predict,
    ebm_predict_batch,
    ebm_to_dict,
    ebm_train,
    explain_local,
    export_shapes,
    global_importance,
)
from .errors import (
    BalancecastError,
    DegenerateLeafError,
    GridError,
    IngestError,
    InsufficientHistoryError,
    InvalidArgumentError,
    SchemaError,
    UnsupportedModelError,
)
from .evaluation import (
    EvalReport,
    EvalRow,
    FoldSpec,
    Metrics,
    ModelSpec,
    compute_metrics,
    ebm_spec,
    evaluate,
    expanding_window_folds,
    filter_deviation_events,
    gbt_spec,
    naive_spec,
    stacked_spec,
)
from .gbt import (
    GbtConfig,
    GbtModel,
    GradHess,
    TreeNode,
    fit_tree,
    gbt_from_dict,
    gbt_predict,
    gbt_predict_batch,
    gbt_to_dict,
    gbt_train,
    grad_hess_squared_loss,
    leaf_weight,
    split_gain,
    tree_predict,
)
from .persistence import load_model, save_model
from .stacking import (
    StackedModel,
    stacked_from_dict,
    stacked_predict,
    stacked_predict_batch,
    stacked_to_dict,
    stacked_train,
)

__all__ = [name for name in dir() if not name.startswith("_")]

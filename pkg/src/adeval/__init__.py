"""Anomaly-detection evaluation: ranking measures, decision-volume
estimates, reference detectors and a reproducible benchmark harness."""

from adeval.curves import (
    LabeledScores,
    RocCurve,
    auc,
    auc_at,
    auc_weighted,
    build_roc,
    read_labeled_scores,
    threshold_at_fpr,
    tpr_at,
    write_labeled_scores,
)
from adeval.thresholded import (
    ConfusionCounts,
    PrecisionAtPConfig,
    confusion_at,
    f1_at_fpr,
    f1_score,
    precision_at_p,
)
from adeval.volume import (
    SamplingBox,
    VolumeEstimate,
    bounding_box,
    cvol_at_fpr,
    mc_volume_at_fpr,
)
from adeval.detectors import (
    ExternalScores,
    IsolationForestModel,
    KnnModel,
    LofModel,
    external_scores_load,
    iforest_fit,
    iforest_score,
    knn_fit,
    knn_score,
    lof_fit,
    lof_score,
)
from adeval.datasets import (
    BenchmarkDataset,
    RawTable,
    SplitSpec,
    TrainTestSplit,
    make_benchmarks,
    read_raw_table,
    split,
    synth_gaussian,
    synth_multiclass_table,
    write_raw_table,
)
from adeval.experiments import (
    ExperimentRecord,
    GridConfig,
    MeasureId,
    RecordStore,
    kendall_matrix,
    kendall_tau,
    loss_matrix,
    mean_rank_table,
    multiclass_sensitivity,
    roc_band,
    run_grid,
)

__version__ = "0.1.0"

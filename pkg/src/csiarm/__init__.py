"""Robotic-arm motion classification from WiFi channel state information."""

from .core import (
    ALL_ACTIONS,
    ActionClass,
    CsiArmError,
    CsiFrame,
    CsiRecording,
)
from .csir import decode_recording, encode_recording, read_recording, write_recording
from .ingest import IngestResult, ingest_stream
from .pipeline import (
    KEPT_POSITIONS,
    REMOVED_TONES,
    AmplitudeMatrix,
    LabeledDataset,
    NormStats,
    SampleTensor,
    amplitude,
    apply_normalization,
    assemble,
    export_csv,
    filter_subcarriers,
    load_dataset,
    matrixize,
    normalize,
    save_dataset,
    tensorize,
)
from .synth import (
    CorpusPlan,
    SceneConfig,
    default_scene,
    generate_corpus,
    generate_recording,
)
from .nn import (
    CnnModel,
    ModelConfig,
    TrainConfig,
    build_model,
    grid_search,
    load_checkpoint,
    make_optimizer,
    save_checkpoint,
    train,
)
from .evaluation import (
    ConfusionMatrix,
    FoldAggregate,
    MetricsReport,
    aggregate_folds,
    compute_metrics,
    leave_one_scenario_out,
    run_case_study,
    stratified_kfold,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_ACTIONS",
    "ActionClass",
    "AmplitudeMatrix",
    "CnnModel",
    "ConfusionMatrix",
    "CorpusPlan",
    "CsiArmError",
    "CsiFrame",
    "CsiRecording",
    "FoldAggregate",
    "IngestResult",
    "KEPT_POSITIONS",
    "LabeledDataset",
    "MetricsReport",
    "ModelConfig",
    "NormStats",
    "REMOVED_TONES",
    "SampleTensor",
    "SceneConfig",
    "TrainConfig",
    "aggregate_folds",
    "amplitude",
    "apply_normalization",
    "assemble",
    "build_model",
    "compute_metrics",
    "decode_recording",
    "default_scene",
    "encode_recording",
    "export_csv",
    "filter_subcarriers",
    "generate_corpus",
    "generate_recording",
    "grid_search",
    "ingest_stream",
    "leave_one_scenario_out",
    "load_checkpoint",
    "load_dataset",
    "make_optimizer",
    "matrixize",
    "normalize",
    "read_recording",
    "run_case_study",
    "save_checkpoint",
    "save_dataset",
    "stratified_kfold",
    "tensorize",
    "train",
    "write_recording",
    "__version__",
]

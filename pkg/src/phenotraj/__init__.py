"""Phenotype discovery from irregular vital-sign series."""

from .cluster import (
    NOISE,
    ClusterAssignment,
    GmmModel,
    adjusted_rand_index,
    gmm,
    gmm_em,
    hdbscan,
    kmeans,
    mutual_reachability,
    silhouette,
    spectral,
)
from .data import (
    CONTINUOUS_FEATURES,
    N_FEATURES,
    Dataset,
    Demographics,
    FeatureKind,
    FeatureStats,
    Triplet,
    VitalSeries,
    WardVocab,
)
from .encoder import EncoderConfig, TripletEncoder
from .errors import (
    ConfigError,
    DataError,
    NumericalError,
    ParseError,
    PhenotrajError,
    SchemaError,
    ShapeError,
)
from .linalg import jacobi_eigh
from .pipeline import (
    ExperimentConfig,
    ReportRow,
    baseline_descriptors,
    descriptor_matrix,
    encode_all,
    export_scatter,
    load_experiment_config,
    merge_reports,
    reduce_points,
    run_baseline,
    run_strats,
)
from .preprocess import (
    build_dataset,
    demographic_width,
    encode_demographics,
    parse_demographics,
    parse_observations,
)
from .reduce import (
    PcaModel,
    TsneConfig,
    pca_fit,
    pca_inverse,
    pca_transform,
    tsne,
)
from .synth import GeneratorConfig, SynthCorpus, generate_corpus
from .trainer import TrainConfig, Trainer, TrainResult, fit

__version__ = "0.1.0"

__all__ = [
    "CONTINUOUS_FEATURES",
    "N_FEATURES",
    "NOISE",
    "ClusterAssignment",
    "ConfigError",
    "DataError",
    "Dataset",
    "Demographics",
    "EncoderConfig",
    "ExperimentConfig",
    "FeatureKind",
    "FeatureStats",
    "GeneratorConfig",
    "GmmModel",
    "NumericalError",
    "ParseError",
    "PcaModel",
    "PhenotrajError",
    "ReportRow",
    "SchemaError",
    "ShapeError",
    "SynthCorpus",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "Triplet",
    "TripletEncoder",
    "TsneConfig",
    "VitalSeries",
    "WardVocab",
    "adjusted_rand_index",
    "baseline_descriptors",
    "build_dataset",
    "demographic_width",
    "descriptor_matrix",
    "encode_all",
    "encode_demographics",
    "export_scatter",
    "fit",
    "generate_corpus",
    "gmm",
    "gmm_em",
    "hdbscan",
    "jacobi_eigh",
    "kmeans",
    "load_experiment_config",
    "merge_reports",
    "mutual_reachability",
    "parse_demographics",
    "parse_observations",
    "pca_fit",
    "pca_inverse",
    "pca_transform",
    "reduce_points",
    "run_baseline",
    "run_strats",
    "silhouette",
    "spectral",
    "tsne",
    "__version__",
]

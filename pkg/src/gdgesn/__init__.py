"""Grouped dynamical graph echo state networks for temporal graph classification."""

from .evaluation import CVProtocol, RunReport, SweepGrid, accuracy, make_folds, run_cv, run_sweep
from .graph import (
    Dataset,
    DatasetError,
    DatasetStats,
    Snapshot,
    TemporalGraph,
    compute_stats,
    filter_dataset,
    filter_empty_snapshots,
    load_dataset,
    save_dataset,
)
from .merging import MergedTemporalGraph, WindowSchedule, merge, merge_all_groups, pad_sequence
from .model import GDGESN, load_model, save_model
from .readout import ReadoutModel, build_embedding, fit, predict, sum_pool
from .reservoir import (
    EncoderConfig,
    ReservoirStack,
    encode_batch,
    encode_graph,
    init_stack,
    load_stack,
    save_stack,
    spectral_radius,
    step,
)
from .si import SIConfig, generate_contact_sequence, generate_dataset, run_si

__version__ = "0.1.0"

"""psyframe: synthetic motor-imagery EEG decoding driving a simulated robot.

The pipeline mirrors a desk-scale brain-computer control rig: generated
EEG windows are filtered, normalized, and featurized; a small transformer
classifies the imagery class; a leaky integrator debounces posteriors into
discrete fighting-game moves (with combo upgrades); and a simulated
nine-joint robot plays the corresponding trajectory. A line-delimited
message service streams telemetry to the operator cockpit.
"""

from .signal_core import (
    BANDS,
    CHANNELS,
    FS_HZ,
    EegWindow,
    apply_filter,
    design_bandpass,
    gate_artifacts,
    preprocess,
    zscore_normalize,
)
from .features import FEATURE_DIM, FEATURE_LAYOUT_ID, assemble_features
from .synth import CLASS_NAMES, build_dataset, noise_window, split_dataset, synth_window
from .model import ModelConfig, Weights, evaluate, forward, init_weights, load_weights, save_weights, train
from .command import BASE_MOVES, COMBO_RULES, IntegratorState, Move, class_to_move, integrate
from .robot import JOINTS, RobotState, dispatch, step, trajectory_for
from .pipeline import DecodeLoop, PipelineConfig, replay_session, run_decode_loop, run_train

__version__ = "0.1.0"

__all__ = [
    "BANDS",
    "BASE_MOVES",
    "CHANNELS",
    "CLASS_NAMES",
    "COMBO_RULES",
    "DecodeLoop",
    "EegWindow",
    "FEATURE_DIM",
    "FEATURE_LAYOUT_ID",
    "FS_HZ",
    "IntegratorState",
    "JOINTS",
    "ModelConfig",
    "Move",
    "PipelineConfig",
    "RobotState",
    "Weights",
    "apply_filter",
    "assemble_features",
    "build_dataset",
    "class_to_move",
    "design_bandpass",
    "dispatch",
    "evaluate",
    "forward",
    "gate_artifacts",
    "init_weights",
    "integrate",
    "load_weights",
    "noise_window",
    "preprocess",
    "replay_session",
    "run_decode_loop",
    "run_train",
    "save_weights",
    "split_dataset",
    "step",
    "synth_window",
    "train",
    "trajectory_for",
    "zscore_normalize",
    "__version__",
]

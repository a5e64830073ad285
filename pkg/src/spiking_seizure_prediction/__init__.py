from .spike_encoder import EncoderConfig, SpikeTrain, encode, encode_batch, expected_rate, rate_transform, spike_rate
from .cnn_reference import (
    Conv1D,
    FullyConnected,
    MaxPool1D,
    NetworkSpec,
    Relu,
    TrainingConfig,
    WeightContainer,
    default_network_spec,
    forward,
    train_sgd,
)
from .snn_engine import IfConfig, MembraneState, PoolMode, ResetMode, SpikeCounts, decide, if_step, run_network, score
from .conversion import SnnModel, calibrate_thresholds, map_weights
from .complexity import OpCountReport, fom, reduction_percent, static_op_counts, t_cnn, t_scnn
from .eeg_data import (
    EegRecording,
    IntervalParams,
    IntervalPlan,
    SeizureAnnotations,
    SynthConfig,
    WindowSample,
    extract_windows,
    label_intervals,
    split_train_test,
    synth_generate,
)
from .evaluation import Metrics, auc, confusion, metrics, roc, threshold_sweep
from .instrumentation import OpCounter

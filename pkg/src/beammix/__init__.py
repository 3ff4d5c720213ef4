"""beammix: self-supervised mmWave MISO beamforming and data-mixing theory.

A numpy workbench that trains a small self-supervised beamforming network
on synthetic geometric channel scenes, compares it against analytic
baselines, and evaluates the Hessian-based mixture curve C(q) that
predicts the best proportion when training data is pooled from several
environments.
"""

from .channel import (
    ArrayGeometry,
    ChannelSample,
    PathComponent,
    SceneFamily,
    array_response,
    channel_from_paths,
    default_scene_families,
    estimate_channel,
    generate_channel,
    sample_paths,
)
from .config import ConfigError, ExperimentConfig, default_config, load_config, parse_config
from .data import (
    ChannelDataset,
    MixSpec,
    generate_dataset,
    largest_remainder_counts,
    load_dataset,
    mix_datasets,
    save_dataset,
    split_dataset,
)
from .baselines import Codebook, codebook_search, dft_codebook, mrt_beamformer, mrt_rate
from .net import (
    Beamformer,
    DegenerateBeamformerError,
    NetConfig,
    NetParams,
    TrainSchedule,
    TrainingDivergedError,
    backward,
    batch_loss,
    batch_rates,
    decode_csi,
    encode_csi,
    forward,
    init_params,
    load_checkpoint,
    normalize_power,
    save_checkpoint,
    train,
    user_rate,
)
from .theory import (
    HessianEstimate,
    LambdaMatrix,
    MixtureCurve,
    ScalingFit,
    SingularMixtureError,
    c_of_q_direct,
    c_of_q_rational,
    diagonalize_pair,
    expected_input_hessian,
    extra_loss_empirical,
    fit_scaling_law,
    lambda_matrix,
    load_hessian,
    save_hessian,
    sweep_q,
    u_shape_violations,
)
from .experiments import (
    RunResult,
    emit_results,
    run_mixed,
    run_pure,
    run_scaling,
    run_sweep,
)

__version__ = "0.1.0"

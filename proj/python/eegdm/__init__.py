"""Self-supervised EEG representation learning with a conditional latent diffusion model."""

from ._core import (  # noqa: F401
    AugmentSpec,
    Checkpoint,
    ConfigError,
    IoError,
    MetricsReport,
    NoiseSchedule,
    NumericError,
    PcaBasis,
    Recording,
    Sample,
    __version__,
    apply_augment,
    collect_windows,
    export_embeddings,
    fit_pca,
    forward_sample,
    load_checkpoint,
    load_recording,
    make_views,
    run_evaluate,
    run_finetune,
    run_loso,
    run_pretrain,
    save_recording,
    segment,
    synth_generate,
)

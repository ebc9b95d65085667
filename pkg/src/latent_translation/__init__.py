"""Semi-supervised image-to-image translation via latent-space mapping.

Two independently trained per-domain VAE-GANs provide latent spaces; a
feature translator learned on a small paired subset maps between them.
Includes a synthetic paired-domain benchmark, a segmentation-score
evaluation protocol, and an ablation harness.
"""

from .config import DataConfig, RunConfig, TrainConfig, config_hash, resolve_config
from .data import (
    CLASS_COLORS,
    DatasetBundle,
    LabelMap,
    PairedSample,
    build_dataset,
    generate_label_map,
    label_to_image,
    read_dataset,
    render_photo,
    write_dataset,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .evaluation import MetricsReport, evaluate_pipeline, fcn_scores, oracle_segment
from .infer import (
    TranslationPipeline,
    build_pipeline,
    translate_image,
    translate_image_stochastic,
)
from .nets import (
    Arch,
    ModelParams,
    build_model,
    decode,
    discriminate,
    encode,
    perceptual_features,
    sample_latent,
    translate_features,
)
from .losses import (
    LossBreakdown,
    feature_l1_loss,
    feature_matching_loss,
    kl_unit_gaussian,
    lsgan_discriminator_loss,
    lsgan_generator_loss,
    reconstruction_loss,
    translation_objective,
    vaegan_objective,
)
from .train import train_image_translator, train_translator, train_vaegan
from .ablation import AblationReport, AblationSpec, run_ablation

__version__ = "0.1.0"

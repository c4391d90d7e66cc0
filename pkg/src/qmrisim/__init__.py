"""qmrisim: physics-based MRI contrast synthesis from quantitative maps.

Simulates FSE/GRE/FLAIR/MPRAGE contrasts voxelwise from PD/R1/R2*/MT/B1
maps, corrupts them with Rician noise, builds seeded augmented view pairs
(Base / SeqAug / SeqInv) with replayable manifests, and provides reference
implementations of the contrastive + L1 objective and of PSNR/Dice/HD95.
"""

from .augment import (
    AugmentationConfig,
    AugmentationPlan,
    apply_plan,
    bias_field,
    cuboid_dropout,
    gibbs_truncate,
    make_plan,
)
from .losses import (
    EmbeddingBatch,
    combined_loss,
    cosine_similarity,
    l1_loss,
    nt_xent_grad,
    nt_xent_loss,
)
from .metrics import MetricResult, dice, hd95, multiclass_dice, psnr
from .nifti import VolumeHeader, read_header, read_nifti, read_qmri_set, write_nifti
from .pipeline import (
    PairMode,
    ViewPair,
    generate_batch,
    generate_pair,
    regenerate_from_manifest,
)
from .rng import RngState, derive_seed
from .sampler import (
    SamplerConfig,
    sample_loguniform,
    sample_reflected_normal,
    sample_sequence,
)
from .signal import (
    NoiseParams,
    SequenceKind,
    SequenceParams,
    add_rician,
    signal_flair,
    signal_fse,
    signal_gre,
    signal_mprage,
    simulate_volume,
)
from .volume import (
    Grid3D,
    QMRIMaps,
    Volume3D,
    extract_patch,
    new_volume,
    validate_maps,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig",
    "AugmentationPlan",
    "EmbeddingBatch",
    "Grid3D",
    "MetricResult",
    "NoiseParams",
    "PairMode",
    "QMRIMaps",
    "RngState",
    "SamplerConfig",
    "SequenceKind",
    "SequenceParams",
    "ViewPair",
    "Volume3D",
    "VolumeHeader",
    "add_rician",
    "apply_plan",
    "bias_field",
    "combined_loss",
    "cosine_similarity",
    "cuboid_dropout",
    "derive_seed",
    "dice",
    "extract_patch",
    "generate_batch",
    "generate_pair",
    "gibbs_truncate",
    "hd95",
    "l1_loss",
    "make_plan",
    "multiclass_dice",
    "new_volume",
    "nt_xent_grad",
    "nt_xent_loss",
    "psnr",
    "read_header",
    "read_nifti",
    "read_qmri_set",
    "regenerate_from_manifest",
    "sample_loguniform",
    "sample_reflected_normal",
    "sample_sequence",
    "signal_flair",
    "signal_fse",
    "signal_gre",
    "signal_mprage",
    "simulate_volume",
    "validate_maps",
    "write_nifti",
]

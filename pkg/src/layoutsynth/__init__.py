"""Few-shot semantic image synthesis against a frozen style-based generator.

Workflow: train (or load) a generator on unlabeled images, pool class
prototypes from a handful of labeled pairs, pseudo-label unlimited generator
samples by cosine matching, train a layout encoder with a latent L2 loss,
then synthesize images from drawn layouts with optional style mixing.
"""

from .errors import (
    ConfigError,
    InputError,
    LayoutSynthError,
    MissingClassError,
    OptimizationError,
    ProvenanceError,
    UndefinedMetricError,
    UnsupportedBackendError,
)
from .generator import (
    AnalyticShapeGenerator,
    GeneratorMetadata,
    GeneratorSample,
    LatentStack,
    StyleToyGenerator,
    ToyGanConfig,
    load_generator,
    train_toy_generator,
)
from .labeling import (
    SparseLabelerConfig,
    cosine_similarity,
    label_dense,
    label_sparse,
    upscale_mask,
)
from .masks import UNKNOWN, AnnotationDocument, SemanticMask, load_mask, save_mask
from .metrics import (
    ConfusionMatrix,
    LandmarkSet,
    accumulate_confusion,
    fwiou,
    landmark_rmse,
    miou,
    pixel_accuracy,
)
from .prototypes import (
    DenseVectorSet,
    LabeledPair,
    SparseVectorSet,
    dense_prototypes,
    invert_image,
    load_prototypes,
    mean_latent,
    resize_mask_to_feature_grid,
    save_prototypes,
    sparse_prototypes,
)
from .encoder import (
    EncoderConfig,
    LayoutEncoder,
    TrainConfig,
    latent_l2_loss,
    load_encoder,
    save_encoder,
    train,
    training_step,
)
from .synthesis import (
    SynthesisRequest,
    SynthesisResult,
    layout_fidelity_probe,
    synthesize_from_mask,
    variant_seed,
)

__version__ = "0.1.0"

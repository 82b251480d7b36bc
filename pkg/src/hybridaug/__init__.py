"""Context-preserving cut-paste data augmentation for grayscale images.

The engine cuts a circular region of interest (the "donor") out of one
image, leaves a cavity in another (the "acceptor"), and pastes resized,
rotated donors into cavities to synthesize labeled hybrid training
images — offline as a materialized dataset or online as a deterministic
batch stream.
"""

from .corpus import (
    CLASS_LABELS,
    NT_LABEL,
    TARGET_LABELS,
    ImageRecord,
    Manifest,
    balanced_subsample,
    class_histogram,
    load_manifest,
    per_patient_sample,
    save_manifest,
)
from .geometry import (
    CircleFit,
    HullPolygon,
    ShapeStats,
    convex_hull,
    fill_holes,
    fit_circle,
    largest_component,
    rasterize_circle,
    shape_stats,
)
from .metrics import (
    PredictionSet,
    SummaryStat,
    confusion,
    report,
    student_t_cdf,
    t_test_one_sample,
    t_test_two_sample,
)
from .phantom import PhantomConfig, generate_corpus, render_phantom
from .sampler import (
    BatchEntry,
    EpochSchedule,
    Form,
    OfflinePlan,
    Strategy,
    build_epoch_schedule,
    materialize_offline,
    plan_offline,
    realize_batch,
)
from .synthesis import (
    AcceptorTemplate,
    DonorTemplate,
    EligibilityReport,
    HybridImage,
    QCConfig,
    TemplatePool,
    eligibility_report,
    extract_templates,
    random_hybrid,
    synthesize,
    unique_pair_count,
)
from .tradaug import (
    AugRecord,
    TradAugConfig,
    apply_traditional,
    gaussian_blur,
    percentile_rescale,
    random_affine,
)

__version__ = "0.1.0"

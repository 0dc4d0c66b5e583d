"""Sequential metamorphic-group testing harness for steering-angle models."""

from .core_types import (
    AngleDifference,
    MGConfig,
    MGKind,
    MetricKind,
    ModelStats,
    SMGSpec,
    SmartError,
    SourceFrame,
    SteeringAngle,
    UBRecord,
    ValidationError,
)
from .metrics import (
    ViolationParams,
    angle_difference,
    determine_ub,
    metric_leftward,
    metric_rightward,
    metric_unchange,
    model_stats,
    mr_violated,
)
from .pipeline import RunReport, run_testing, save_report, load_report, mask_curved, aggregate
from .smg import generate_smg, load_default_specs, load_smg_specs
from .sut import SutDescriptor, execute, parse_descriptor, register_stub
from .transform import (
    InsertionGeometry,
    Sprite,
    SpriteLibrary,
    TransformContext,
    apply_snow,
    generate_mg,
    insert_object,
)

__version__ = "0.1.0"

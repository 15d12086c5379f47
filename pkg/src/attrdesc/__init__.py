"""attrdesc: coordinate-search optimization of rendering-attribute
distributions against target image sets, with a built-in procedural
renderer, Frechet-distance objective, dataset generation and content
analysis tooling."""

from .attributes import (
    AttributeKind,
    AttributeVector,
    AttributeDistribution,
    GaussianComponent,
    SearchSpace,
    UniformAttributeDistribution,
    default_distribution,
    normalize,
)
from .camera import (
    CameraIntrinsics,
    CameraExtrinsics,
    PlacementMapping,
    extrinsics,
    projection_matrix,
    project,
)
from .render import (
    ObjectModel,
    BoxPrimitive,
    EllipsoidPrimitive,
    RenderMode,
    RenderOptions,
    RenderResult,
    render,
    render_batch,
    composite,
)
from .metric import (
    GaussianStats,
    GrayDownsample,
    RandomProjection,
    ColorGradHist,
    default_extractor,
    extract,
    fit_stats,
    sqrtm_psd,
    frechet_distance,
)
from .optimizer import (
    ObjectiveContext,
    OptimizationTrace,
    evaluate,
    attribute_descent,
    random_search,
    random_attributes,
)
from .pipeline import (
    TargetGroup,
    DatasetManifest,
    ManifestRecord,
    GroupResult,
    ingest_target,
    optimize_groups,
    generate,
)
from .analysis import (
    ViewpointSample,
    HistogramTable,
    viewpoint_cloud,
    attribute_histogram,
    export_viewpoints,
    export_histogram,
)
from .closedloop import (
    ClosedLoopBenchmark,
    make_benchmark,
    recovery_report,
    run_method_comparison,
)

__version__ = "0.1.0"

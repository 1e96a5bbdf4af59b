"""Representative-class selection and multi-layer CAM fusion toolkit."""

from .cam import (
    LayerDump,
    PairDump,
    fuse_classes,
    fuse_layers,
    generate_pair_map,
    grad_cam_layer,
    read_pair_dump,
    write_pair_dump,
)
from .evaluate import (
    EvalReport,
    PairMatrix,
    iou,
    miou_per_class,
    threshold_map,
    top1_report,
    topk_fused_eval,
    topk_select_from_matrix,
)
from .pipeline import PipelineConfig, run_pipeline
from .scenario import SyntheticScenario, generate_scenario
from .selection import (
    RANK_A_POSITIONS,
    RANK_B_POSITIONS,
    Clustering,
    RepresentativeSet,
    cluster_classes,
    select_by_rank,
    select_from_clusters,
    select_random,
)
from .similarity import (
    ClassRanking,
    ProbabilityRecord,
    SimilarityMatrix,
    build_similarity,
    rank_classes,
    symmetrize,
)
from .tensorio import (
    ActivationMap,
    BinaryMask,
    Tensor,
    read_mask_pgm,
    read_tensor,
    resize_bilinear,
    write_map_pgm,
    write_tensor,
)

__version__ = "0.1.0"

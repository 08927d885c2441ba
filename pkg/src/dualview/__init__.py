"""Dual-view instance-segmentation post-processing and evaluation engine."""

__version__ = "0.1.0"

from .errors import EngineError, InputError, ValidationError
from .masks import (
    BBox,
    BinaryMask,
    PlacedMask,
    RleMask,
    bbox_iou,
    bbox_of_mask,
    connected_components,
    fill_holes,
    mask_area,
    mask_iou,
    rle_decode,
    rle_encode,
)
from .geometry import (
    AffineTransform,
    Raster,
    compose,
    map_box,
    rotation_transform,
    warp_mask,
    warp_placed,
    warp_raster,
)
from .fusion import (
    Detection,
    DvsConfig,
    backmap,
    dvs_fuse,
    generate_views,
    nms,
    simply_connected_filter,
)
from .selection import (
    MsConfig,
    MsLabel,
    Scorer,
    SpotCluster,
    build_ms_labels,
    candidate_features,
    load_scorer,
    save_scorer,
    score_candidates,
    select,
    spot_dedup,
    spots,
    train_logistic_scorer,
)
from .losses import (
    RoISample,
    box_loss,
    cls_loss,
    loss_gradients,
    mask_loss,
    smooth_l1,
    total_loss,
)
from .evaluation import (
    ApReport,
    EvalConfig,
    EvalSummary,
    GtInstance,
    average_precision,
    dataset_split,
    evaluate,
    evaluate_both,
    match_detections,
)
from .synth import (
    OracleSpec,
    SceneSpec,
    gen_scene,
    oracle_detect,
    run_end_to_end,
    run_modes,
)

"""camcal: dense pseudo-spherical encoding of pinhole intrinsics, robust
recovery by per-axis RANSAC line fitting, and the evaluation stack around it
(calibration errors, depth metrics, similarity alignment, metrology, and
diffusion scheduler math)."""

from .camera import (
    ImageDims,
    Intrinsics,
    ResizePadPlan,
    fov_degrees,
    intrinsics_after_crop,
    intrinsics_after_hflip,
    intrinsics_after_pad,
    intrinsics_after_resize,
    plan_resize_pad,
    ray_direction,
)
from .camera_image import (
    CameraImage,
    ChannelVariant,
    IncidenceMap,
    denormalize,
    dequantize_u8,
    encode,
    encode_incidence,
    encode_variant,
    normalize,
    quantize_u8,
    ray_to_theta_phi,
    read_cami,
    rgb_to_gray,
    theta_phi_to_ray,
    write_cami,
)
from .depth import (
    AffineAlignment,
    DepthMap,
    DepthMetrics,
    abs_rel,
    align_affine,
    align_scale,
    apply_scene_scale,
    compute_metrics,
    delta_threshold,
    masked_loss,
    si_log,
)
from .diffusion import (
    NoiseSchedule,
    forward_diffuse,
    make_schedule,
    multires_noise,
    sample,
    v_target,
    v_to_clean,
    v_to_eps,
)
from .geometry import (
    PointCloud,
    PoseError,
    SimilarityTransform,
    mean_relative_distance,
    metrology_distance,
    pose_error,
    procrustes,
    project,
    read_ply,
    unproject,
    write_ply,
)
from .manifest import ManifestRecord, read_manifest, write_manifest
from .recovery import (
    CalibError,
    RansacConfig,
    RansacFailureError,
    RansacReport,
    calib_error,
    ensemble,
    pixel_abscissas,
    ransac_line,
    recover_intrinsics,
    solve_two_point,
)

__version__ = "0.1.0"

"""Bilateral teleoperation control core with a deterministic simulator.

Layers, bottom up: rigid-body algebra (``se3``), sliding-window filters
(``filters``), the stylus-to-tool motion mapping (``eye_hand``), the
follower admittance and safety pipeline (``admittance``), virtualized
haptic feedback (``haptic_feedback``), the simulated world and session loop
(``world``), scenario configuration (``config``), the experiment harness
and statistics (``harness``, ``stats``), and the live WebSocket service
(``service``, ``protocol``).
"""

from .admittance import (
    AdmittanceModel,
    AdmittanceParams,
    AdmittanceState,
    ControlOutput,
    InteractionController,
    SafetyConfig,
    SafetyEvents,
    TrackingError,
    admittance_step,
    apply_safety,
    compose_compliant_pose,
    reference_in_tool_frame,
    scale_reference,
)
from .config import (
    ConfigError,
    ScenarioConfig,
    build_script,
    build_session,
    dental_standin_config,
    eyehand_assessment_config,
    load_config,
    parse_config,
)
from .eye_hand import (
    EyeHandController,
    FrameConfig,
    ScalingMatrix,
    engagement_aligned,
    engagement_target,
    integrate_reference,
    map_twist,
    stylus_twist,
    viewing_angle,
)
from .filters import FilteredPose, PoseWindow, QuaternionWindow, VectorWindow, dominant_eigenvector_sym4
from .haptic_feedback import HapticFeedbackController, HapticFeedbackParams, dead_band, feedback_force, saturate
from .harness import (
    AssessmentReport,
    compare_scenarios,
    read_log,
    replay_poses,
    run_eyehand_assessment,
    run_scenario,
    scripted_pose_stream,
    write_log,
)
from .se3 import (
    AxisAngle,
    Pose,
    Rotation3,
    Transform,
    Twist,
    UnitQuaternion,
    Wrench,
    axis_angle_from_rotation,
    compose,
    elementary_rotation,
    inverse,
    quat_conjugate,
    quat_multiply,
    rotate_twist,
    rotation_from_axis_angle,
    swing_twist_about_z,
)
from .stats import (
    BinStats,
    CohenResult,
    DegenerateSampleError,
    LeveneResult,
    WelchResult,
    bin_conditional_stats,
    cohens_d,
    levene_test,
    welch_t,
)
from .world import (
    FollowerModel,
    LeaderScript,
    LogRecord,
    PlaneSurface,
    SphereSurface,
    TeleopSession,
    TremorComponent,
    TremorSpec,
    Waypoint,
    contact_wrench,
    leader_sample,
)

__version__ = "0.1.0"

"""Static collision probability of theta-phi fiber positioner arrays.

Library layout:

* :mod:`fieldsim.geometry` - 2R arm kinematics and segment kernels
* :mod:`fieldsim.hexgrid` - hexagonal arrays and neighbor indexing
* :mod:`fieldsim.analytic` - closed-form probability model
* :mod:`fieldsim.montecarlo` - simulation pipeline with Wilson summary
* :mod:`fieldsim.batch` - high-throughput pair-distance evaluation
* :mod:`fieldsim.regression` - quadratic surrogate fit
* :mod:`fieldsim.sweep` / :mod:`fieldsim.report` - sweeps, CSV, heatmaps
* :mod:`fieldsim.cli` - the ``fieldsim`` command
"""

__version__ = "0.1.0"

from fieldsim.analytic import (
    AnalyticAreas,
    AnalyticResult,
    CoverMode,
    collision_probability_analytic,
)
from fieldsim.batch import (
    DistanceReport,
    Kernel,
    SegmentBatch,
    batch_pair_distances,
    early_exit_pair_distance,
    segment_batch,
)
from fieldsim.geometry import (
    ArmGeometry,
    Elbow,
    Pose,
    SafetyModel,
    Segment,
    eccentric_arm_segment,
    forward_kinematics,
    inverse_kinematics,
    max_displacement,
    min_safe_distance,
    segment_min_distance_discrete,
    segment_min_distance_exact,
)
from fieldsim.hexgrid import (
    HexArray,
    InteractionType,
    NeighborIndex,
    build_hex_array,
    classify_interaction,
    coverage_multiplicity,
    hex_count,
    lattice_neighbor_classes,
    neighbor_pairs,
)
from fieldsim.montecarlo import (
    Assignment,
    CollisionStats,
    Distribution,
    FinalChoice,
    SimConfig,
    TargetField,
    allocate_targets,
    assign_poses,
    count_collisions,
    derive_seed,
    gen_targets,
    run_simulation,
    wilson_interval,
)
from fieldsim.regression import (
    RegressionModel,
    RegressionSample,
    design_row,
    fit_ridge,
    load_model,
    predict,
    r_squared,
    save_model,
)
from fieldsim.sweep import (
    SimSettings,
    SweepRow,
    SweepSpec,
    ValidationReport,
    compute_validation,
    run_sweep,
    sweep_points,
)

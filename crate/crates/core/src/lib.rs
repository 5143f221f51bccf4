//! Hybrid distance-angle rigidity with signed constraints.
//!
//! The crate models frameworks whose constraint sets mix distances, unsigned
//! angles, signed angles (2-D) and signed volumes (3-D), assembles the
//! corresponding rigidity matrices, decides infinitesimal rigidity by
//! numerical rank, generates and validates signed-Henneberg constructions,
//! and integrates the gradient-flow formation controllers built on those
//! matrices.

pub mod framework;
pub mod henneberg;
pub mod oracle;
pub mod output;
pub mod rigidity;
pub mod scenario;
pub mod sim;

pub use framework::{
    constraint_values, incidence_matrix, relative_positions, signed_sine, signed_volume,
    ConstraintTargets, ConstraintValues, Dim, Framework, FrameworkError, Graph,
};
pub use henneberg::{
    henneberg_extend, validate_signed_henneberg, AnchorFamily, HennebergCertificate,
    HennebergError, HennebergStep,
};
pub use oracle::{
    brute_force_nullspace, check_rows_against_fd, finite_difference_jacobian, FrameworkSampler,
    JacobianCheckResult, OracleError, RowFamily,
};
pub use rigidity::{
    assemble_rigidity_matrix, classify, numerical_rank, rank_with_threshold,
    trivial_motion_basis, RankPolicy, RigidityError, RigidityKind, RigidityMatrix, RigidityReport,
};
pub use output::{
    write_report, write_trajectory_csv, write_trajectory_svg, HennebergReport, OutputError,
    RunReport, SimulationReport,
};
pub use scenario::{parse_scenario, Scenario, ScenarioError, ScenarioFile};
pub use sim::{
    ambiguity_metrics, control_velocity, formation_error, perturbed_realization, simulate,
    AmbiguityReport, ControllerKind, IntegratorSettings, SimError, SimulationConfig,
    TerminalStatus, Trajectory,
};

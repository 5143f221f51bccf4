//! Gradient-flow formation controllers and their fixed-step integration.
//!
//! Four controllers are provided: the distance-only and weak-rigidity
//! baselines, and the signed controllers u = -R^T e built on the hybrid
//! rigidity matrices, where the signed error entries and the signed matrix
//! rows both carry the gain k. Simulation is classical RK4 with an early
//! stop on convergence and a divergence guard.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{constraint_values, ConstraintTargets, Dim, Framework};
use crate::rigidity::{assemble_rigidity_matrix, RigidityError, RigidityKind};

/// Abort threshold: error growth beyond this factor of the initial error is
/// reported as divergence instead of crashing on non-finite state.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    DistanceOnlyBaseline,
    WeakBaseline,
    DistanceSigned,
    AngleSigned,
}

impl ControllerKind {
    /// Matrix kind backing this controller at the given dimension.
    pub fn rigidity_kind(self, dim: Dim) -> RigidityKind {
        match (self, dim) {
            (ControllerKind::DistanceOnlyBaseline, _) => RigidityKind::DistanceOnly,
            (ControllerKind::WeakBaseline, _) => RigidityKind::WeakDistanceAngle,
            (ControllerKind::DistanceSigned, Dim::Two) => RigidityKind::DistanceSign2D,
            (ControllerKind::DistanceSigned, Dim::Three) => RigidityKind::DistanceVolume3D,
            (ControllerKind::AngleSigned, Dim::Two) => RigidityKind::AngleSign2D,
            (ControllerKind::AngleSigned, Dim::Three) => RigidityKind::AngleVolume3D,
        }
    }

    fn uses_signed(self) -> bool {
        matches!(self, ControllerKind::DistanceSigned | ControllerKind::AngleSigned)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("target list for {family} has length {got}, graph expects {expected}")]
    TargetMismatch {
        family: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("integrator step must be positive, got {0}")]
    BadStep(f64),
    #[error("horizon {horizon} shorter than step {step}")]
    BadHorizon { horizon: f64, step: f64 },
    #[error("stop tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Rigidity(#[from] RigidityError),
}

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub step: f64,
    pub horizon: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            step: 1e-3,
            horizon: 30.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub framework: Framework,
    pub targets: ConstraintTargets,
    pub controller: ControllerKind,
    pub integrator: IntegratorSettings,
    pub stop_tolerance: f64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let step_ok = self.integrator.step.is_finite() && self.integrator.step > 0.0;
        if !step_ok {
            return Err(SimError::BadStep(self.integrator.step));
        }
        if self.integrator.horizon < self.integrator.step {
            return Err(SimError::BadHorizon {
                horizon: self.integrator.horizon,
                step: self.integrator.step,
            });
        }
        let tol_ok = self.stop_tolerance.is_finite() && self.stop_tolerance > 0.0;
        if !tol_ok {
            return Err(SimError::BadTolerance(self.stop_tolerance));
        }
        // Fail early on malformed targets rather than mid-flight.
        formation_error(&self.framework, &self.targets, self.controller).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    Converged,
    HorizonReached,
    Diverged,
}

/// One recorded integrator state.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub realization: DVector<f64>,
    pub error: DVector<f64>,
    pub error_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub terminal_status: TerminalStatus,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    /// Is phi = 0.5 |e|^2 non-increasing between consecutive samples, up to
    /// the given slack per step?
    pub fn energy_monotone(&self, slack: f64) -> bool {
        self.samples.windows(2).all(|w| {
            let phi0 = 0.5 * w[0].error_norm * w[0].error_norm;
            let phi1 = 0.5 * w[1].error_norm * w[1].error_norm;
            phi1 <= phi0 + slack
        })
    }

    /// Least-squares slope of log |e| against t over the last half of the
    /// samples; `None` when the tail has too few positive norms to fit.
    pub fn tail_log_slope(&self) -> Option<f64> {
        let half = self.samples.len() / 2;
        let pts: Vec<(f64, f64)> = self.samples[half..]
            .iter()
            .filter(|s| s.error_norm > 0.0)
            .map(|s| (s.t, s.error_norm.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < f64::EPSILON {
            return None;
        }
        Some((n * sxy - sx * sy) / denom)
    }
}

fn check_lengths(framework: &Framework, targets: &ConstraintTargets) -> Result<(), SimError> {
    let g = framework.graph();
    let checks: [(&'static str, usize, usize); 4] = [
        ("distance", targets.distance_sq_half.len(), g.edges().len()),
        ("cosine", targets.cosines.len(), g.angles().len()),
        (
            "signed_sine",
            targets.signed_sines.len(),
            g.signed_angles().len(),
        ),
        (
            "signed_volume",
            targets.signed_volumes.len(),
            g.signed_volumes().len(),
        ),
    ];
    for (family, got, expected) in checks {
        if got != expected {
            return Err(SimError::TargetMismatch {
                family,
                expected,
                got,
            });
        }
    }
    Ok(())
}

/// Error vector e(p), ordered like the controller's rigidity-matrix rows.
/// Signed entries carry the gain k in both current and target values.
pub fn formation_error(
    framework: &Framework,
    targets: &ConstraintTargets,
    controller: ControllerKind,
) -> Result<DVector<f64>, SimError> {
    check_lengths(framework, targets)?;
    let values = constraint_values(framework);
    let k = targets.gain_k;
    let mut entries: Vec<f64> = Vec::new();

    let distance_scale = match controller {
        ControllerKind::DistanceOnlyBaseline | ControllerKind::DistanceSigned => Some(1.0),
        ControllerKind::WeakBaseline | ControllerKind::AngleSigned => Some(2.0),
    };
    if let Some(scale) = distance_scale {
        for (v, t) in values
            .distance_sq_half
            .iter()
            .zip(&targets.distance_sq_half)
        {
            entries.push(scale * (v - t));
        }
    }
    if matches!(
        controller,
        ControllerKind::WeakBaseline | ControllerKind::AngleSigned
    ) {
        for (v, t) in values.cosines.iter().zip(&targets.cosines) {
            entries.push(v - t);
        }
    }
    if controller.uses_signed() {
        match framework.dim() {
            Dim::Two => {
                for (v, t) in values.signed_sines.iter().zip(&targets.signed_sines) {
                    entries.push(k * (v - t));
                }
            }
            Dim::Three => {
                for (v, t) in values.signed_volumes.iter().zip(&targets.signed_volumes) {
                    entries.push(k * (v - t));
                }
            }
        }
    }
    Ok(DVector::from_vec(entries))
}

/// Gradient-flow velocity u = -R^T e for the controller's matrix kind.
pub fn control_velocity(
    framework: &Framework,
    targets: &ConstraintTargets,
    controller: ControllerKind,
) -> Result<DVector<f64>, SimError> {
    let e = formation_error(framework, targets, controller)?;
    let kind = controller.rigidity_kind(framework.dim());
    let gain = if controller.uses_signed() {
        targets.gain_k
    } else {
        1.0
    };
    let matrix = assemble_rigidity_matrix(framework, kind, gain)?;
    Ok(-(matrix.rows.transpose() * e))
}

/// Integrate the flow with fixed-step RK4, stopping early on convergence,
/// divergence, or a non-finite state.
pub fn simulate(config: &SimulationConfig) -> Result<Trajectory, SimError> {
    config.validate()?;
    let h = config.integrator.step;
    let steps = (config.integrator.horizon / h).round() as usize;
    let fw0 = &config.framework;

    let velocity = |p: &DVector<f64>| -> Result<DVector<f64>, SimError> {
        let fw = fw0.with_realization_unchecked(p.clone());
        control_velocity(&fw, &config.targets, config.controller)
    };
    let error_at = |p: &DVector<f64>| -> Result<DVector<f64>, SimError> {
        let fw = fw0.with_realization_unchecked(p.clone());
        formation_error(&fw, &config.targets, config.controller)
    };

    let mut p = fw0.realization().clone();
    let e0 = error_at(&p)?;
    let e0_norm = e0.norm();
    let mut samples = vec![Sample {
        t: 0.0,
        realization: p.clone(),
        error: e0.clone(),
        error_norm: e0_norm,
    }];
    if e0_norm <= config.stop_tolerance {
        return Ok(Trajectory {
            samples,
            terminal_status: TerminalStatus::Converged,
        });
    }
    let guard = DIVERGENCE_FACTOR * e0_norm;

    for step_idx in 1..=steps {
        let k1 = velocity(&p)?;
        let k2 = velocity(&(&p + &k1 * (h / 2.0)))?;
        let k3 = velocity(&(&p + &k2 * (h / 2.0)))?;
        let k4 = velocity(&(&p + &k3 * h))?;
        let next = &p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);

        if next.iter().any(|x| !x.is_finite()) {
            return Ok(Trajectory {
                samples,
                terminal_status: TerminalStatus::Diverged,
            });
        }
        p = next;
        let e = error_at(&p)?;
        let norm = e.norm();
        samples.push(Sample {
            t: step_idx as f64 * h,
            realization: p.clone(),
            error: e,
            error_norm: norm,
        });
        if !norm.is_finite() || norm > guard {
            return Ok(Trajectory {
                samples,
                terminal_status: TerminalStatus::Diverged,
            });
        }
        if norm <= config.stop_tolerance {
            return Ok(Trajectory {
                samples,
                terminal_status: TerminalStatus::Converged,
            });
        }
    }
    Ok(Trajectory {
        samples,
        terminal_status: TerminalStatus::HorizonReached,
    })
}

/// Reference realization plus a seeded per-agent perturbation bounded by
/// `fraction` of the formation diameter.
pub fn perturbed_realization(reference: &Framework, fraction: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = reference.dim().as_usize();
    let radius = fraction * reference.diameter();
    let mut p = reference.realization().clone();
    for v in 0..reference.n() {
        // Uniform in the d-ball by rejection.
        let offset: Vec<f64> = loop {
            let candidate: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if candidate.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                break candidate;
            }
        };
        for a in 0..d {
            p[d * v + a] += radius * offset[a];
        }
    }
    p
}

/// Final-state diagnostics: per-constraint residuals, signed-sign agreement
/// and shape comparison against a reference realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub residual_tol: f64,
    /// (label, |value - target|) per constraint, graph order.
    pub per_constraint_residuals: Vec<(String, f64)>,
    pub unsigned_residual_max: f64,
    pub signed_residual_max: f64,
    /// Per signed constraint: does the realized sign match the target sign?
    pub sign_agreement: Vec<bool>,
    /// Full pairwise-distance congruence to the reference (when given).
    pub congruent_to_reference: Option<bool>,
    /// Scale-free variant used for the angle controllers.
    pub similar_to_reference: Option<bool>,
    /// All unsigned constraints met, but some signed quantity has the wrong
    /// sign.
    pub flip_flagged: bool,
    /// All constraint residuals met, but the shape disagrees with the
    /// reference.
    pub flex_flagged: bool,
}

fn pairwise_distances(fw: &Framework, p: &DVector<f64>) -> Vec<f64> {
    let d = fw.dim().as_usize();
    let n = fw.n();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist2: f64 = (0..d)
                .map(|a| (p[d * i + a] - p[d * j + a]).powi(2))
                .sum();
            out.push(dist2.sqrt());
        }
    }
    out
}

/// Compare full distance matrices at relative tolerance `tol`; `scale_free`
/// first fits the least-squares scale between the two.
fn shapes_agree(ref_d: &[f64], got_d: &[f64], tol: f64, scale_free: bool) -> bool {
    let scale = if scale_free {
        let num: f64 = ref_d.iter().zip(got_d).map(|(r, g)| r * g).sum();
        let den: f64 = ref_d.iter().map(|r| r * r).sum();
        if den == 0.0 {
            return false;
        }
        num / den
    } else {
        1.0
    };
    ref_d.iter().zip(got_d).all(|(r, g)| {
        let want = scale * r;
        (g - want).abs() <= tol * want.abs().max(1e-12)
    })
}

/// Evaluate the flip / flex diagnostics at a trajectory's terminal state.
pub fn ambiguity_metrics(
    trajectory: &Trajectory,
    framework: &Framework,
    targets: &ConstraintTargets,
    controller: ControllerKind,
    reference: Option<&Framework>,
    residual_tol: f64,
) -> AmbiguityReport {
    let final_p = &trajectory.last().realization;
    let fw = framework.with_realization_unchecked(final_p.clone());
    let values = constraint_values(&fw);
    let g = fw.graph();

    let mut residuals: Vec<(String, f64)> = Vec::new();
    let mut unsigned_max: f64 = 0.0;
    let mut signed_max: f64 = 0.0;
    for (&(i, j), (v, t)) in g.edges().iter().zip(
        values
            .distance_sq_half
            .iter()
            .zip(&targets.distance_sq_half),
    ) {
        let r = (v - t).abs();
        unsigned_max = unsigned_max.max(r);
        residuals.push((format!("d({},{})", i + 1, j + 1), r));
    }
    for (&(i, j, k), (v, t)) in g.angles().iter().zip(values.cosines.iter().zip(&targets.cosines)) {
        let r = (v - t).abs();
        unsigned_max = unsigned_max.max(r);
        residuals.push((format!("cos({};{},{})", i + 1, j + 1, k + 1), r));
    }
    let mut sign_agreement = Vec::new();
    for (&(i, j, k), (v, t)) in g
        .signed_angles()
        .iter()
        .zip(values.signed_sines.iter().zip(&targets.signed_sines))
    {
        let r = (v - t).abs();
        signed_max = signed_max.max(r);
        residuals.push((format!("sin({};{},{})", i + 1, j + 1, k + 1), r));
        if t.abs() > 1e-9 {
            sign_agreement.push(v.signum() == t.signum());
        } else {
            sign_agreement.push(true);
        }
    }
    for (&(i, j, k, l), (v, t)) in g
        .signed_volumes()
        .iter()
        .zip(values.signed_volumes.iter().zip(&targets.signed_volumes))
    {
        let r = (v - t).abs();
        signed_max = signed_max.max(r);
        residuals.push((
            format!("vol({};{},{},{})", i + 1, j + 1, k + 1, l + 1),
            r,
        ));
        if t.abs() > 1e-9 {
            sign_agreement.push(v.signum() == t.signum());
        } else {
            sign_agreement.push(true);
        }
    }

    let scale_free = matches!(controller, ControllerKind::AngleSigned)
        || matches!(controller, ControllerKind::WeakBaseline if !g.has_edges());
    let (congruent, similar) = match reference {
        Some(r) => {
            let ref_d = pairwise_distances(r, r.realization());
            let got_d = pairwise_distances(&fw, final_p);
            let congruent = shapes_agree(&ref_d, &got_d, 1e-6, false);
            let similar = shapes_agree(&ref_d, &got_d, 1e-6, true);
            (Some(congruent), Some(similar))
        }
        None => (None, None),
    };

    let unsigned_met = unsigned_max <= residual_tol;
    let signed_met = signed_max <= residual_tol;
    let any_sign_wrong = sign_agreement.iter().any(|ok| !ok);
    let shape_ok = if scale_free { similar } else { congruent };
    let flip_flagged = unsigned_met && any_sign_wrong;
    let flex_flagged = unsigned_met && signed_met && shape_ok == Some(false);

    AmbiguityReport {
        residual_tol,
        per_constraint_residuals: residuals,
        unsigned_residual_max: unsigned_max,
        signed_residual_max: signed_max,
        sign_agreement,
        congruent_to_reference: congruent,
        similar_to_reference: similar,
        flip_flagged,
        flex_flagged,
    }
}

//! Scenario files: the JSON surface that binds a framework, its targets, an
//! optional simulation and an optional Henneberg script into one run.
//!
//! Vertex indices in files are 1-based to match the usual figure labelling;
//! everything is converted to 0-based at this boundary. The schema is strict:
//! unknown fields are rejected so a typo in a constraint name fails loudly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{ConstraintTargets, Dim, Framework, FrameworkError, Graph};
use crate::henneberg::{AnchorFamily, HennebergStep, SignedConstraint};
use crate::sim::{
    perturbed_realization, ControllerKind, IntegratorSettings, SimError, SimulationConfig,
};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scenario version {0}; this build reads version 1")]
    Version(u32),
    #[error("indices are 1-based; found 0 in {0}")]
    ZeroIndex(&'static str),
    #[error("{0}")]
    Semantic(String),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A desired signed value: either the raw sine / volume, or an angle in
/// degrees converted through the sine. Raw numbers are canonical on output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignedValue {
    Raw(f64),
    Degrees { deg: f64 },
}

impl SignedValue {
    pub fn resolve(self) -> f64 {
        match self {
            SignedValue::Raw(v) => v,
            SignedValue::Degrees { deg } => deg.to_radians().sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSpec {
    pub gain_k: f64,
    /// Read every desired value off the scenario's positions.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub from_positions: bool,
    /// Desired squared edge lengths |z*|^2 (the file uses the squared norm;
    /// the library stores half of it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_sq: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosines: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_sines: Option<Vec<SignedValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_volumes: Option<Vec<SignedValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_step() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    30.0
}
fn default_stop_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub controller: ControllerKind,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_stop_tolerance")]
    pub stop_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<StartSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub new_vertex: usize,
    pub anchors: Vec<usize>,
    pub family: AnchorFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_angle: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_volume: Option<[usize; 4]>,
    pub placement: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

/// Raw scenario file, all indices 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    pub n: usize,
    pub positions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signed_angles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signed_volumes: Vec<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<TargetsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub henneberg_steps: Vec<StepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Parsed, validated scenario: the semantic view the CLI works from.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Normalized raw file (canonical edges and raw signed values).
    pub file: ScenarioFile,
    /// Reference framework at the scenario's positions.
    pub framework: Framework,
    pub targets: Option<ConstraintTargets>,
    /// Ready-to-run configuration when the file declares a simulation.
    pub sim_config: Option<SimulationConfig>,
    /// Henneberg script, 0-based, paired with placements.
    pub steps: Vec<(HennebergStep, Vec<f64>)>,
}

fn to_zero_based(v: usize, what: &'static str) -> Result<usize, ScenarioError> {
    if v == 0 {
        Err(ScenarioError::ZeroIndex(what))
    } else {
        Ok(v - 1)
    }
}

fn build_graph(file: &ScenarioFile) -> Result<Graph, ScenarioError> {
    let mut edges = Vec::with_capacity(file.edges.len());
    for &[i, j] in &file.edges {
        edges.push((to_zero_based(i, "edges")?, to_zero_based(j, "edges")?));
    }
    let triple = |t: &[usize; 3], what: &'static str| -> Result<(usize, usize, usize), ScenarioError> {
        Ok((
            to_zero_based(t[0], what)?,
            to_zero_based(t[1], what)?,
            to_zero_based(t[2], what)?,
        ))
    };
    let mut angles = Vec::new();
    for t in &file.angles {
        angles.push(triple(t, "angles")?);
    }
    let mut signed_angles = Vec::new();
    for t in &file.signed_angles {
        signed_angles.push(triple(t, "signed_angles")?);
    }
    let mut signed_volumes = Vec::new();
    for q in &file.signed_volumes {
        signed_volumes.push((
            to_zero_based(q[0], "signed_volumes")?,
            to_zero_based(q[1], "signed_volumes")?,
            to_zero_based(q[2], "signed_volumes")?,
            to_zero_based(q[3], "signed_volumes")?,
        ));
    }
    Ok(Graph::new(file.n, edges, angles, signed_angles, signed_volumes)?)
}

fn resolve_targets(
    spec: &TargetsSpec,
    framework: &Framework,
) -> Result<ConstraintTargets, ScenarioError> {
    let g = framework.graph();
    let explicit = spec.distance_sq.is_some()
        || spec.cosines.is_some()
        || spec.signed_sines.is_some()
        || spec.signed_volumes.is_some();
    if spec.from_positions && explicit {
        return Err(ScenarioError::Semantic(
            "targets: from_positions excludes explicit target lists".into(),
        ));
    }
    if spec.from_positions {
        return Ok(ConstraintTargets::from_framework(framework, spec.gain_k)?);
    }
    let need = |opt: &Option<Vec<f64>>, len: usize, family: &str| -> Result<Vec<f64>, ScenarioError> {
        match opt {
            Some(v) => Ok(v.clone()),
            None if len == 0 => Ok(vec![]),
            None => Err(ScenarioError::Semantic(format!(
                "targets: {family} list required ({len} constraints declared)"
            ))),
        }
    };
    let distance_sq = need(&spec.distance_sq, g.edges().len(), "distance_sq")?;
    let cosines = need(&spec.cosines, g.angles().len(), "cosines")?;
    let signed = |opt: &Option<Vec<SignedValue>>, len: usize, family: &str| -> Result<Vec<f64>, ScenarioError> {
        match opt {
            Some(v) => Ok(v.iter().map(|s| s.resolve()).collect()),
            None if len == 0 => Ok(vec![]),
            None => Err(ScenarioError::Semantic(format!(
                "targets: {family} list required ({len} constraints declared)"
            ))),
        }
    };
    let signed_sines = signed(&spec.signed_sines, g.signed_angles().len(), "signed_sines")?;
    let signed_volumes = signed(
        &spec.signed_volumes,
        g.signed_volumes().len(),
        "signed_volumes",
    )?;
    Ok(ConstraintTargets::new(
        g,
        distance_sq.iter().map(|d| 0.5 * d).collect(),
        cosines,
        signed_sines,
        signed_volumes,
        spec.gain_k,
    )?)
}

fn resolve_steps(file: &ScenarioFile, dim: Dim) -> Result<Vec<(HennebergStep, Vec<f64>)>, ScenarioError> {
    let mut out = Vec::new();
    for s in &file.henneberg_steps {
        let new_vertex = to_zero_based(s.new_vertex, "henneberg_steps.new_vertex")?;
        let mut anchors = Vec::new();
        for &a in &s.anchors {
            anchors.push(to_zero_based(a, "henneberg_steps.anchors")?);
        }
        let signed = match (dim, s.signed_angle, s.signed_volume) {
            (Dim::Two, Some([i, j, k]), None) => SignedConstraint::Angle(
                to_zero_based(i, "signed_angle")?,
                to_zero_based(j, "signed_angle")?,
                to_zero_based(k, "signed_angle")?,
            ),
            (Dim::Three, None, Some([i, j, k, l])) => SignedConstraint::Volume(
                to_zero_based(i, "signed_volume")?,
                to_zero_based(j, "signed_volume")?,
                to_zero_based(k, "signed_volume")?,
                to_zero_based(l, "signed_volume")?,
            ),
            _ => {
                return Err(ScenarioError::Semantic(
                    "henneberg step needs exactly one signed constraint matching the dimension"
                        .into(),
                ))
            }
        };
        out.push((
            HennebergStep {
                new_vertex,
                anchors,
                family: s.family,
                signed,
            },
            s.placement.clone(),
        ));
    }
    Ok(out)
}

/// Parse and validate a scenario from JSON text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if file.version != SCENARIO_VERSION {
        return Err(ScenarioError::Version(file.version));
    }
    let dim = Dim::from_usize(file.dim)?;
    let graph = build_graph(&file)?;
    let framework = Framework::new(graph, dim, &file.positions)?;

    let targets = match &file.targets {
        Some(spec) => Some(resolve_targets(spec, &framework)?),
        None => None,
    };

    let sim_config = match &file.simulation {
        Some(spec) => {
            let targets = targets.clone().ok_or_else(|| {
                ScenarioError::Semantic("simulation requires a targets block".into())
            })?;
            let start_realization = match &spec.start {
                None => framework.realization().clone(),
                Some(start) => match (&start.positions, start.perturb_fraction) {
                    (Some(pos), None) => {
                        let fw = Framework::new(framework.graph().clone(), dim, pos)?;
                        fw.realization().clone()
                    }
                    (None, Some(fraction)) => {
                        let seed = start.seed.or(file.seed).unwrap_or(0);
                        perturbed_realization(&framework, fraction, seed)
                    }
                    (None, None) => framework.realization().clone(),
                    (Some(_), Some(_)) => {
                        return Err(ScenarioError::Semantic(
                            "start: positions and perturb_fraction are mutually exclusive".into(),
                        ))
                    }
                },
            };
            let config = SimulationConfig {
                framework: framework.with_realization_unchecked(start_realization),
                targets,
                controller: spec.controller,
                integrator: IntegratorSettings {
                    step: spec.step,
                    horizon: spec.horizon,
                },
                stop_tolerance: spec.stop_tolerance,
            };
            config.validate()?;
            Some(config)
        }
        None => None,
    };

    let steps = resolve_steps(&file, dim)?;
    let normalized = normalize(&file, targets.as_ref());

    Ok(Scenario {
        file: normalized,
        framework,
        targets,
        sim_config,
        steps,
    })
}

/// Canonical form: edges smaller-index-first, signed targets as raw numbers,
/// integrator defaults spelled out. `parse(emit(parse(x)))` is stable.
fn normalize(file: &ScenarioFile, targets: Option<&ConstraintTargets>) -> ScenarioFile {
    let mut out = file.clone();
    for e in &mut out.edges {
        let (i, j) = (e[0].min(e[1]), e[0].max(e[1]));
        *e = [i, j];
    }
    if let (Some(spec), Some(resolved)) = (&mut out.targets, targets) {
        if !spec.from_positions {
            spec.distance_sq = Some(resolved.distance_sq_half.iter().map(|d| 2.0 * d).collect());
            if !resolved.cosines.is_empty() {
                spec.cosines = Some(resolved.cosines.clone());
            }
            if !resolved.signed_sines.is_empty() {
                spec.signed_sines = Some(
                    resolved
                        .signed_sines
                        .iter()
                        .map(|&v| SignedValue::Raw(v))
                        .collect(),
                );
            }
            if !resolved.signed_volumes.is_empty() {
                spec.signed_volumes = Some(
                    resolved
                        .signed_volumes
                        .iter()
                        .map(|&v| SignedValue::Raw(v))
                        .collect(),
                );
            }
            if spec.distance_sq.as_ref().is_some_and(|v| v.is_empty()) {
                spec.distance_sq = None;
            }
        }
    }
    out
}

impl Scenario {
    /// Canonical JSON for the normalized scenario.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_analysis_scenario() -> String {
        r#"{
            "version": 1,
            "dim": 2,
            "n": 3,
            "positions": [[0.0, 3.0], [-2.0, 0.0], [2.0, 0.0]],
            "edges": [[1, 2], [2, 3], [1, 3]],
            "signed_angles": [[2, 1, 3]]
        }"#
        .to_string()
    }

    #[test]
    fn parses_minimal_analysis_scenario() {
        let sc = parse_scenario(&minimal_analysis_scenario()).unwrap();
        assert_eq!(sc.framework.n(), 3);
        assert!(sc.targets.is_none());
        assert!(sc.sim_config.is_none());
    }

    #[test]
    fn empty_constraint_lists_are_valid() {
        let sc = parse_scenario(
            r#"{"version":1,"dim":2,"n":2,"positions":[[0,0],[1,0]]}"#,
        )
        .unwrap();
        assert!(sc.framework.graph().edges().is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse_scenario(
            r#"{"version":1,"dim":2,"n":2,"positions":[[0,0],[1,0]],"edgez":[[1,2]]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::Json(_)));
    }

    #[test]
    fn duplicate_undirected_edge_is_rejected() {
        let err = parse_scenario(
            r#"{"version":1,"dim":2,"n":2,"positions":[[0,0],[1,0]],"edges":[[1,2],[2,1]]}"#,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ScenarioError::Framework(FrameworkError::DuplicateEdge(0, 1))
        ));
    }

    #[test]
    fn zero_index_is_rejected() {
        let err = parse_scenario(
            r#"{"version":1,"dim":2,"n":2,"positions":[[0,0],[1,0]],"edges":[[0,1]]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::ZeroIndex(_)));
    }

    #[test]
    fn degrees_resolve_through_sine() {
        let text = r#"{
            "version": 1, "dim": 2, "n": 3,
            "positions": [[0,0],[1,0],[0,1]],
            "edges": [[1,2],[1,3]],
            "signed_angles": [[1,2,3]],
            "targets": {"gain_k": 2.0, "distance_sq": [1.0, 1.0], "signed_sines": [{"deg": 90.0}]}
        }"#;
        let sc = parse_scenario(text).unwrap();
        let t = sc.targets.unwrap();
        assert!((t.signed_sines[0] - 1.0).abs() < 1e-12);
        assert_eq!(t.distance_sq_half, vec![0.5, 0.5]);
    }

    #[test]
    fn simulation_requires_targets() {
        let text = r#"{
            "version": 1, "dim": 2, "n": 2,
            "positions": [[0,0],[1,0]],
            "edges": [[1,2]],
            "simulation": {"controller": "distance_only_baseline"}
        }"#;
        let err = parse_scenario(text).unwrap_err();
        assert!(matches!(err, ScenarioError::Semantic(_)));
    }

    #[test]
    fn round_trip_is_stable() {
        let text = r#"{
            "version": 1, "dim": 2, "n": 3,
            "positions": [[0,0],[1,0],[0,1]],
            "edges": [[2,1],[1,3]],
            "signed_angles": [[1,2,3]],
            "targets": {"gain_k": 2.0, "distance_sq": [1.0, 1.0], "signed_sines": [{"deg": 90.0}]},
            "simulation": {"controller": "distance_signed", "start": {"perturb_fraction": 0.05, "seed": 9}}
        }"#;
        let once = parse_scenario(text).unwrap().to_json();
        let twice = parse_scenario(&once).unwrap().to_json();
        assert_eq!(once, twice);
    }

    #[test]
    fn from_positions_targets_match_reference() {
        let text = r#"{
            "version": 1, "dim": 2, "n": 3,
            "positions": [[0,0],[3,0],[0,4]],
            "edges": [[1,2],[1,3]],
            "signed_angles": [[1,2,3]],
            "targets": {"gain_k": 10.0, "from_positions": true}
        }"#;
        let sc = parse_scenario(text).unwrap();
        let t = sc.targets.unwrap();
        assert_eq!(t.distance_sq_half, vec![4.5, 8.0]);
        assert!((t.signed_sines[0] - 1.0).abs() < 1e-12);
    }
}

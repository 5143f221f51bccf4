//! Framework model: a constraint graph together with a realization in the plane
//! or in space.
//!
//! A graph carries four constraint families — distance edges, unsigned angle
//! triples, signed angle triples (2-D) and signed volume quadruples (3-D) —
//! and a framework pairs the graph with agent positions. All vertex indices
//! are 0-based here; file formats use 1-based indices and convert at the I/O
//! boundary.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two constrained vertices closer than this are treated as coincident and
/// rejected: every bearing divides by the pair distance.
pub const COINCIDENT_TOL: f64 = 1e-12;

/// Spatial dimension of a framework.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn from_usize(d: usize) -> Result<Self, FrameworkError> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            other => Err(FrameworkError::UnsupportedDimension(other)),
        }
    }
}

/// Validation errors for graphs, frameworks and constraint targets.
#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("vertex index {0} out of range for {1} vertices")]
    IndexOutOfRange(usize, usize),
    #[error("self-loop edge at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate undirected edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("repeated vertex in constraint tuple {0:?}")]
    RepeatedVertex(Vec<usize>),
    #[error("signed angle constraints require dimension 2")]
    SignedAnglesIn3d,
    #[error("signed volume constraints require dimension 3")]
    SignedVolumesIn2d,
    #[error("unsupported dimension {0}; expected 2 or 3")]
    UnsupportedDimension(usize),
    #[error("position {index} has {got} coordinates; expected {expected}")]
    PositionArity {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("expected {expected} positions, got {got}")]
    PositionCount { expected: usize, got: usize },
    #[error("coincident constrained vertices {0} and {1}")]
    CoincidentVertices(usize, usize),
    #[error("target list for {family} has length {got}; graph expects {expected}")]
    TargetLength {
        family: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("target value {value} for {family} outside [-1, 1]")]
    TargetRange { family: &'static str, value: f64 },
    #[error("gain k must be positive, got {0}")]
    NonPositiveGain(f64),
}

/// Constraint graph: vertex count plus the four constraint families.
///
/// Edges are stored normalized with the smaller index first. Angle triples
/// `(i, j, k)` denote the unsigned angle at vertex `i` between the rays to
/// `j` and `k`; signed triples are ordered (from ray `i -> j` to ray
/// `i -> k`), so `(i, j, k)` and `(i, k, j)` are distinct constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    angles: Vec<(usize, usize, usize)>,
    signed_angles: Vec<(usize, usize, usize)>,
    signed_volumes: Vec<(usize, usize, usize, usize)>,
}

impl Graph {
    pub fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        angles: Vec<(usize, usize, usize)>,
        signed_angles: Vec<(usize, usize, usize)>,
        signed_volumes: Vec<(usize, usize, usize, usize)>,
    ) -> Result<Self, FrameworkError> {
        let check = |v: usize| -> Result<(), FrameworkError> {
            if v >= n {
                Err(FrameworkError::IndexOutOfRange(v, n))
            } else {
                Ok(())
            }
        };

        let mut normalized = Vec::with_capacity(edges.len());
        for &(i, j) in &edges {
            check(i)?;
            check(j)?;
            if i == j {
                return Err(FrameworkError::SelfLoop(i));
            }
            let e = (i.min(j), i.max(j));
            if normalized.contains(&e) {
                return Err(FrameworkError::DuplicateEdge(e.0, e.1));
            }
            normalized.push(e);
        }

        for &(i, j, k) in angles.iter().chain(signed_angles.iter()) {
            check(i)?;
            check(j)?;
            check(k)?;
            if i == j || i == k || j == k {
                return Err(FrameworkError::RepeatedVertex(vec![i, j, k]));
            }
        }
        for &(i, j, k, l) in &signed_volumes {
            for v in [i, j, k, l] {
                check(v)?;
            }
            if [i, j, k, l].iter().collect::<std::collections::HashSet<_>>().len() != 4 {
                return Err(FrameworkError::RepeatedVertex(vec![i, j, k, l]));
            }
        }

        Ok(Graph {
            n,
            edges: normalized,
            angles,
            signed_angles,
            signed_volumes,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn angles(&self) -> &[(usize, usize, usize)] {
        &self.angles
    }

    pub fn signed_angles(&self) -> &[(usize, usize, usize)] {
        &self.signed_angles
    }

    pub fn signed_volumes(&self) -> &[(usize, usize, usize, usize)] {
        &self.signed_volumes
    }

    /// All vertex pairs constrained together (each bearing denominator).
    ///
    /// For an angle or signed-angle triple `(i, j, k)` these are `(i, j)` and
    /// `(i, k)`; for a volume quadruple additionally `(i, l)`. Deduplicated,
    /// smaller index first, in first-appearance order.
    pub fn constrained_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut push = |a: usize, b: usize| {
            let p = (a.min(b), a.max(b));
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        };
        for &(i, j) in &self.edges {
            push(i, j);
        }
        for &(i, j, k) in self.angles.iter().chain(self.signed_angles.iter()) {
            push(i, j);
            push(i, k);
        }
        for &(i, j, k, l) in &self.signed_volumes {
            push(i, j);
            push(i, k);
            push(i, l);
        }
        pairs
    }

    /// Sensing topology induced by the constraint set: every pair of agents
    /// that must measure each other under the gradient controllers. Triples
    /// contribute all three pairs, quadruples all six.
    pub fn sensing_topology(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut push = |a: usize, b: usize| {
            let p = (a.min(b), a.max(b));
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        };
        for &(i, j) in &self.edges {
            push(i, j);
        }
        for &(i, j, k) in self.angles.iter().chain(self.signed_angles.iter()) {
            push(i, j);
            push(i, k);
            push(j, k);
        }
        for &(i, j, k, l) in &self.signed_volumes {
            for (a, b) in [(i, j), (i, k), (i, l), (j, k), (j, l), (k, l)] {
                push(a, b);
            }
        }
        pairs
    }

    pub fn has_edges(&self) -> bool {
        !self.edges.is_empty()
    }
}

/// Oriented incidence matrix of an ordered pair list over `n` vertices.
///
/// Row `s` for the pair `(i, j)` with `i < j` has `+1` in column `i` and `-1`
/// in column `j`; the orientation of an undirected graph is arbitrary, so we
/// fix it this way for reproducible output.
pub fn incidence_matrix(graph: &Graph, edge_list: &[(usize, usize)]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(edge_list.len(), graph.n());
    for (s, &(i, j)) in edge_list.iter().enumerate() {
        let (a, b) = (i.min(j), i.max(j));
        h[(s, a)] = 1.0;
        h[(s, b)] = -1.0;
    }
    h
}

/// A graph together with a realization `p` in `R^{dn}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Framework {
    graph: Graph,
    dim: Dim,
    realization: DVector<f64>,
}

impl Framework {
    /// Build and validate a framework. Positions are given per vertex.
    pub fn new(graph: Graph, dim: Dim, positions: &[Vec<f64>]) -> Result<Self, FrameworkError> {
        match dim {
            Dim::Two if !graph.signed_volumes.is_empty() => {
                return Err(FrameworkError::SignedVolumesIn2d)
            }
            Dim::Three if !graph.signed_angles.is_empty() => {
                return Err(FrameworkError::SignedAnglesIn3d)
            }
            _ => {}
        }
        if positions.len() != graph.n() {
            return Err(FrameworkError::PositionCount {
                expected: graph.n(),
                got: positions.len(),
            });
        }
        let d = dim.as_usize();
        let mut realization = DVector::zeros(d * graph.n());
        for (i, pos) in positions.iter().enumerate() {
            if pos.len() != d {
                return Err(FrameworkError::PositionArity {
                    index: i,
                    got: pos.len(),
                    expected: d,
                });
            }
            for (a, &x) in pos.iter().enumerate() {
                realization[d * i + a] = x;
            }
        }
        let fw = Framework {
            graph,
            dim,
            realization,
        };
        fw.check_coincidence()?;
        Ok(fw)
    }

    fn check_coincidence(&self) -> Result<(), FrameworkError> {
        for (i, j) in self.graph.constrained_pairs() {
            if self.diff(i, j).norm() < COINCIDENT_TOL {
                return Err(FrameworkError::CoincidentVertices(i, j));
            }
        }
        Ok(())
    }

    /// Same graph at a different realization, skipping the coincidence check.
    ///
    /// Used on integrator-internal states, where a momentary near-coincidence
    /// surfaces as a non-finite velocity and is handled by the divergence
    /// guard rather than as a validation error.
    pub fn with_realization_unchecked(&self, p: DVector<f64>) -> Framework {
        debug_assert_eq!(p.len(), self.realization.len());
        Framework {
            graph: self.graph.clone(),
            dim: self.dim,
            realization: p,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Ambient degrees of freedom `d * n`.
    pub fn dof(&self) -> usize {
        self.dim.as_usize() * self.graph.n()
    }

    /// The stacked realization vector `p`.
    pub fn realization(&self) -> &DVector<f64> {
        &self.realization
    }

    /// Position of vertex `i` as a `d`-vector slice.
    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.dim.as_usize();
        &self.realization.as_slice()[d * i..d * (i + 1)]
    }

    pub fn pos2(&self, i: usize) -> Vector2<f64> {
        let p = self.position(i);
        Vector2::new(p[0], p[1])
    }

    pub fn pos3(&self, i: usize) -> Vector3<f64> {
        let p = self.position(i);
        Vector3::new(p[0], p[1], p[2])
    }

    /// Relative position `z_ij = p_i - p_j`.
    pub fn diff(&self, i: usize, j: usize) -> DVector<f64> {
        let d = self.dim.as_usize();
        let mut z = DVector::zeros(d);
        for a in 0..d {
            z[a] = self.realization[d * i + a] - self.realization[d * j + a];
        }
        z
    }

    /// Largest inter-vertex distance; 0 for a single vertex.
    pub fn diameter(&self) -> f64 {
        let n = self.n();
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.diff(i, j).norm());
            }
        }
        best
    }

    /// Positions as per-vertex rows, for serialization.
    pub fn positions(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.position(i).to_vec()).collect()
    }
}

/// Ordered relative positions `z'_s = p_i - p_j` for an explicit pair list,
/// consistent with the incidence orientation (smaller index first).
pub fn relative_positions(framework: &Framework, edge_list: &[(usize, usize)]) -> Vec<DVector<f64>> {
    edge_list
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (i.min(j), i.max(j));
            framework.diff(a, b)
        })
        .collect()
}

/// Current values of every constraint in graph order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintValues {
    /// Half squared distance per edge.
    pub distance_sq_half: Vec<f64>,
    /// Cosine of each unsigned angle triple.
    pub cosines: Vec<f64>,
    /// Signed sine (unit-bearing determinant) per signed triple.
    pub signed_sines: Vec<f64>,
    /// Unit-bearing scalar triple product per signed quadruple.
    pub signed_volumes: Vec<f64>,
}

/// Signed sine at vertex `i` from the ray to `j` to the ray to `k`:
/// the determinant of the two unit bearings, equal to `sin` of the signed
/// angle.
pub fn signed_sine(pi: Vector2<f64>, pj: Vector2<f64>, pk: Vector2<f64>) -> f64 {
    let u = (pj - pi).normalize();
    let v = (pk - pi).normalize();
    u.x * v.y - u.y * v.x
}

/// Normalized signed volume at vertex `i`: the scalar triple product of the
/// unit bearings to `j`, `k`, `l`.
pub fn signed_volume(pi: Vector3<f64>, pj: Vector3<f64>, pk: Vector3<f64>, pl: Vector3<f64>) -> f64 {
    let u = (pj - pi).normalize();
    let v = (pk - pi).normalize();
    let w = (pl - pi).normalize();
    u.dot(&v.cross(&w))
}

/// Cosine of the unsigned angle at `i` between the rays to `j` and `k`.
fn cosine_at(framework: &Framework, i: usize, j: usize, k: usize) -> f64 {
    let zji = framework.diff(j, i);
    let zki = framework.diff(k, i);
    zji.dot(&zki) / (zji.norm() * zki.norm())
}

/// Evaluate all rigidity-function entries at the framework's realization.
pub fn constraint_values(framework: &Framework) -> ConstraintValues {
    let g = framework.graph();
    let distance_sq_half = g
        .edges()
        .iter()
        .map(|&(i, j)| 0.5 * framework.diff(i, j).norm_squared())
        .collect();
    let cosines = g
        .angles()
        .iter()
        .map(|&(i, j, k)| cosine_at(framework, i, j, k))
        .collect();
    let signed_sines = g
        .signed_angles()
        .iter()
        .map(|&(i, j, k)| signed_sine(framework.pos2(i), framework.pos2(j), framework.pos2(k)))
        .collect();
    let signed_volumes = g
        .signed_volumes()
        .iter()
        .map(|&(i, j, k, l)| {
            signed_volume(
                framework.pos3(i),
                framework.pos3(j),
                framework.pos3(k),
                framework.pos3(l),
            )
        })
        .collect();
    ConstraintValues {
        distance_sq_half,
        cosines,
        signed_sines,
        signed_volumes,
    }
}

/// Desired constraint values plus the signed-constraint gain `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTargets {
    pub distance_sq_half: Vec<f64>,
    pub cosines: Vec<f64>,
    pub signed_sines: Vec<f64>,
    pub signed_volumes: Vec<f64>,
    pub gain_k: f64,
}

impl ConstraintTargets {
    pub fn new(
        graph: &Graph,
        distance_sq_half: Vec<f64>,
        cosines: Vec<f64>,
        signed_sines: Vec<f64>,
        signed_volumes: Vec<f64>,
        gain_k: f64,
    ) -> Result<Self, FrameworkError> {
        let expect = |family: &'static str, got: usize, expected: usize| {
            if got != expected {
                Err(FrameworkError::TargetLength {
                    family,
                    got,
                    expected,
                })
            } else {
                Ok(())
            }
        };
        expect("distance", distance_sq_half.len(), graph.edges().len())?;
        expect("cosine", cosines.len(), graph.angles().len())?;
        expect("signed_sine", signed_sines.len(), graph.signed_angles().len())?;
        expect(
            "signed_volume",
            signed_volumes.len(),
            graph.signed_volumes().len(),
        )?;
        let unit = |family: &'static str, vals: &[f64]| {
            for &v in vals {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(FrameworkError::TargetRange { family, value: v });
                }
            }
            Ok(())
        };
        unit("cosine", &cosines)?;
        unit("signed_sine", &signed_sines)?;
        unit("signed_volume", &signed_volumes)?;
        let gain_ok = gain_k.is_finite() && gain_k > 0.0;
        if !gain_ok {
            return Err(FrameworkError::NonPositiveGain(gain_k));
        }
        Ok(ConstraintTargets {
            distance_sq_half,
            cosines,
            signed_sines,
            signed_volumes,
            gain_k,
        })
    }

    /// Read the desired values off a reference realization.
    pub fn from_framework(reference: &Framework, gain_k: f64) -> Result<Self, FrameworkError> {
        let v = constraint_values(reference);
        ConstraintTargets::new(
            reference.graph(),
            v.distance_sq_half,
            v.cosines,
            v.signed_sines,
            v.signed_volumes,
            gain_k,
        )
    }
}

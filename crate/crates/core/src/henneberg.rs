//! Signed Henneberg construction: grow formations one vertex at a time with
//! two (2-D) or three (3-D) anchor links plus one signed constraint, and
//! certify ingested frameworks by reverse peeling.
//!
//! Constructed formations are globally unique shapes; the validator only
//! certifies membership in the construction, so a negative certificate means
//! "unknown", not "ambiguous".

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{signed_sine, signed_volume, Dim, Framework, FrameworkError, Graph};

/// Placements closer to degenerate than this signed area / volume are
/// rejected by [`henneberg_extend`].
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Which family the anchor links of a step use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorFamily {
    Distance,
    Angle,
}

/// The single signed constraint a step adds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignedConstraint {
    Angle(usize, usize, usize),
    Volume(usize, usize, usize, usize),
}

impl SignedConstraint {
    fn vertices(&self) -> Vec<usize> {
        match *self {
            SignedConstraint::Angle(i, j, k) => vec![i, j, k],
            SignedConstraint::Volume(i, j, k, l) => vec![i, j, k, l],
        }
    }
}

/// One growth step: a new vertex, its anchors, the anchor-link family and
/// the added signed constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HennebergStep {
    pub new_vertex: usize,
    pub anchors: Vec<usize>,
    pub family: AnchorFamily,
    pub signed: SignedConstraint,
}

#[derive(Debug, Error)]
pub enum HennebergError {
    #[error("new vertex index must be {expected}, got {got}")]
    BadNewVertex { expected: usize, got: usize },
    #[error("anchor {0} not in base framework")]
    AnchorNotInBase(usize),
    #[error("expected {expected} distinct anchors, got {got:?}")]
    BadAnchors { expected: usize, got: Vec<usize> },
    #[error("signed constraint must reference exactly the new vertex and its anchors")]
    SignedOutsideStep,
    #[error("signed constraint family does not match dimension")]
    SignedFamilyMismatch,
    #[error("degenerate placement: signed value {0:.3e}")]
    DegeneratePlacement(f64),
    #[error("placement has {got} coordinates, expected {expected}")]
    PlacementArity { expected: usize, got: usize },
    #[error(transparent)]
    Framework(#[from] FrameworkError),
}

/// Append one signed-Henneberg step to a framework.
///
/// The new constraints' desired values are whatever the placement realizes;
/// callers read them off with `ConstraintTargets::from_framework`.
pub fn henneberg_extend(
    framework: &Framework,
    step: &HennebergStep,
    placement: &[f64],
) -> Result<Framework, HennebergError> {
    let n = framework.n();
    let d = framework.dim().as_usize();
    if step.new_vertex != n {
        return Err(HennebergError::BadNewVertex {
            expected: n,
            got: step.new_vertex,
        });
    }
    let want_anchors = d;
    let mut seen = std::collections::HashSet::new();
    for &a in &step.anchors {
        if a >= n {
            return Err(HennebergError::AnchorNotInBase(a));
        }
        seen.insert(a);
    }
    if step.anchors.len() != want_anchors || seen.len() != want_anchors {
        return Err(HennebergError::BadAnchors {
            expected: want_anchors,
            got: step.anchors.clone(),
        });
    }
    if placement.len() != d {
        return Err(HennebergError::PlacementArity {
            expected: d,
            got: placement.len(),
        });
    }
    let mut step_vertices: Vec<usize> = step.anchors.clone();
    step_vertices.push(step.new_vertex);
    step_vertices.sort_unstable();
    let mut signed_vertices = step.signed.vertices();
    signed_vertices.sort_unstable();
    if signed_vertices != step_vertices {
        return Err(HennebergError::SignedOutsideStep);
    }

    let mut positions = framework.positions();
    positions.push(placement.to_vec());

    // Degeneracy check on the realized signed value.
    let value = match (framework.dim(), &step.signed) {
        (Dim::Two, SignedConstraint::Angle(i, j, k)) => {
            let at = |v: usize| nalgebra::Vector2::new(positions[v][0], positions[v][1]);
            signed_sine(at(*i), at(*j), at(*k))
        }
        (Dim::Three, SignedConstraint::Volume(i, j, k, l)) => {
            let at = |v: usize| Vector3::new(positions[v][0], positions[v][1], positions[v][2]);
            signed_volume(at(*i), at(*j), at(*k), at(*l))
        }
        _ => return Err(HennebergError::SignedFamilyMismatch),
    };
    if !value.is_finite() || value.abs() < DEGENERACY_TOL {
        return Err(HennebergError::DegeneratePlacement(value));
    }

    let g = framework.graph();
    let mut edges = g.edges().to_vec();
    let mut angles = g.angles().to_vec();
    let mut signed_angles = g.signed_angles().to_vec();
    let mut signed_volumes = g.signed_volumes().to_vec();
    let v = step.new_vertex;
    match step.family {
        AnchorFamily::Distance => {
            for &a in &step.anchors {
                edges.push((a.min(v), a.max(v)));
            }
        }
        AnchorFamily::Angle => {
            // One unsigned angle at each anchor, subtending the new vertex
            // and the next anchor around: (a, v, b), (b, v, a) for two
            // anchors, the 3-cycle for three.
            let k = step.anchors.len();
            for idx in 0..k {
                let a = step.anchors[idx];
                let b = step.anchors[(idx + 1) % k];
                angles.push((a, v, b));
            }
        }
    }
    match step.signed {
        SignedConstraint::Angle(i, j, k) => signed_angles.push((i, j, k)),
        SignedConstraint::Volume(i, j, k, l) => signed_volumes.push((i, j, k, l)),
    }

    let graph = Graph::new(n + 1, edges, angles, signed_angles, signed_volumes)?;
    Ok(Framework::new(graph, framework.dim(), &positions)?)
}

/// Structural certificate from reverse peeling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HennebergCertificate {
    pub is_henneberg: bool,
    /// Vertices in removal order (base vertices are not listed).
    pub peel_order: Vec<usize>,
    /// Steps mixing distance- and angle-anchored families are accepted but
    /// flagged: the global-uniqueness corollary treats the families
    /// separately.
    pub mixed_families: bool,
}

#[derive(Debug, Clone)]
struct PeelState {
    alive: Vec<bool>,
    edges: Vec<(usize, usize)>,
    angles: Vec<(usize, usize, usize)>,
    signed_angles: Vec<(usize, usize, usize)>,
    signed_volumes: Vec<(usize, usize, usize, usize)>,
}

impl PeelState {
    fn from_graph(g: &Graph) -> Self {
        PeelState {
            alive: vec![true; g.n()],
            edges: g.edges().to_vec(),
            angles: g.angles().to_vec(),
            signed_angles: g.signed_angles().to_vec(),
            signed_volumes: g.signed_volumes().to_vec(),
        }
    }

    fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    fn remove(&mut self, v: usize) {
        self.alive[v] = false;
        self.edges.retain(|&(i, j)| i != v && j != v);
        self.angles.retain(|&(i, j, k)| i != v && j != v && k != v);
        self.signed_angles.retain(|&(i, j, k)| i != v && j != v && k != v);
        self.signed_volumes
            .retain(|&(i, j, k, l)| i != v && j != v && k != v && l != v);
    }
}

fn set_of(vs: impl IntoIterator<Item = usize>) -> std::collections::BTreeSet<usize> {
    vs.into_iter().collect()
}

/// If `v` matches a legal reverse step, return the step family.
fn legal_peel(state: &PeelState, v: usize, dim: Dim) -> Option<AnchorFamily> {
    let edges_v: Vec<_> = state
        .edges
        .iter()
        .filter(|&&(i, j)| i == v || j == v)
        .copied()
        .collect();
    let angles_v: Vec<_> = state
        .angles
        .iter()
        .filter(|&&(i, j, k)| i == v || j == v || k == v)
        .copied()
        .collect();
    let signed_v: Vec<Vec<usize>> = match dim {
        Dim::Two => state
            .signed_angles
            .iter()
            .filter(|&&(i, j, k)| i == v || j == v || k == v)
            .map(|&(i, j, k)| vec![i, j, k])
            .collect(),
        Dim::Three => state
            .signed_volumes
            .iter()
            .filter(|&&(i, j, k, l)| [i, j, k, l].contains(&v))
            .map(|&(i, j, k, l)| vec![i, j, k, l])
            .collect(),
    };
    if signed_v.len() != 1 {
        return None;
    }
    let anchor_count = dim.as_usize();

    // Distance-anchored: exactly `d` edges at v, no angles touching v.
    if edges_v.len() == anchor_count && angles_v.is_empty() {
        let anchors = set_of(
            edges_v
                .iter()
                .map(|&(i, j)| if i == v { j } else { i }),
        );
        if anchors.len() != anchor_count {
            return None;
        }
        let mut expect = anchors.clone();
        expect.insert(v);
        if set_of(signed_v[0].iter().copied()) == expect {
            return Some(AnchorFamily::Distance);
        }
        return None;
    }

    // Angle-anchored: exactly `d` unsigned angles touching v, no edges at v,
    // and everything confined to v plus `d` anchors.
    if edges_v.is_empty() && angles_v.len() == anchor_count {
        let mut others = std::collections::BTreeSet::new();
        for &(i, j, k) in &angles_v {
            for u in [i, j, k] {
                if u != v {
                    others.insert(u);
                }
            }
        }
        for u in signed_v[0].iter().copied() {
            if u != v {
                others.insert(u);
            }
        }
        if others.len() != anchor_count {
            return None;
        }
        let mut expect = others.clone();
        expect.insert(v);
        if set_of(signed_v[0].iter().copied()) == expect {
            return Some(AnchorFamily::Angle);
        }
    }
    None
}

/// Base acceptance: a triangle (2-D) or tetrahedron (3-D) of one family
/// carrying exactly one signed constraint over all base vertices.
fn base_family(state: &PeelState, dim: Dim) -> Option<AnchorFamily> {
    let alive: Vec<usize> = (0..state.alive.len()).filter(|&v| state.alive[v]).collect();
    let within = |vs: &[usize]| vs.iter().all(|u| alive.contains(u));
    match dim {
        Dim::Two => {
            if alive.len() != 3 || !state.signed_volumes.is_empty() {
                return None;
            }
            if state.signed_angles.len() != 1 {
                return None;
            }
            let (i, j, k) = state.signed_angles[0];
            if set_of([i, j, k]) != set_of(alive.iter().copied()) {
                return None;
            }
            if state.angles.is_empty() && state.edges.len() == 3 {
                let pairs: std::collections::BTreeSet<_> = state.edges.iter().copied().collect();
                let want: std::collections::BTreeSet<_> = [
                    (alive[0], alive[1]),
                    (alive[0], alive[2]),
                    (alive[1], alive[2]),
                ]
                .into_iter()
                .collect();
                if pairs == want {
                    return Some(AnchorFamily::Distance);
                }
            }
            if state.edges.is_empty()
                && state.angles.len() == 2
                && state.angles.iter().all(|&(i, j, k)| within(&[i, j, k]))
            {
                return Some(AnchorFamily::Angle);
            }
            None
        }
        Dim::Three => {
            if alive.len() != 4 || !state.signed_angles.is_empty() {
                return None;
            }
            if state.signed_volumes.len() != 1 {
                return None;
            }
            let (i, j, k, l) = state.signed_volumes[0];
            if set_of([i, j, k, l]) != set_of(alive.iter().copied()) {
                return None;
            }
            if state.angles.is_empty() && state.edges.len() == 6 {
                let pairs: std::collections::BTreeSet<_> = state.edges.iter().copied().collect();
                let mut want = std::collections::BTreeSet::new();
                for a in 0..4 {
                    for b in (a + 1)..4 {
                        want.insert((alive[a].min(alive[b]), alive[a].max(alive[b])));
                    }
                }
                if pairs == want {
                    return Some(AnchorFamily::Distance);
                }
            }
            if state.edges.is_empty()
                && state.angles.len() == 5
                && state.angles.iter().all(|&(i, j, k)| within(&[i, j, k]))
            {
                return Some(AnchorFamily::Angle);
            }
            None
        }
    }
}

fn greedy_peel(mut state: PeelState, dim: Dim) -> Option<(Vec<usize>, Vec<AnchorFamily>)> {
    let base_size = dim.as_usize() + 1;
    let mut order = Vec::new();
    let mut families = Vec::new();
    while state.alive_count() > base_size {
        let candidate = (0..state.alive.len())
            .filter(|&v| state.alive[v])
            .find_map(|v| legal_peel(&state, v, dim).map(|fam| (v, fam)));
        match candidate {
            Some((v, fam)) => {
                state.remove(v);
                order.push(v);
                families.push(fam);
            }
            None => return None,
        }
    }
    base_family(&state, dim).map(|fam| {
        families.push(fam);
        (order, families)
    })
}

fn exhaustive_peel(state: &PeelState, dim: Dim, order: &mut Vec<usize>) -> Option<Vec<AnchorFamily>> {
    let base_size = dim.as_usize() + 1;
    if state.alive_count() == base_size {
        return base_family(state, dim).map(|fam| vec![fam]);
    }
    for v in 0..state.alive.len() {
        if !state.alive[v] {
            continue;
        }
        if let Some(fam) = legal_peel(state, v, dim) {
            let mut next = state.clone();
            next.remove(v);
            order.push(v);
            if let Some(mut fams) = exhaustive_peel(&next, dim, order) {
                fams.insert(0, fam);
                return Some(fams);
            }
            order.pop();
        }
    }
    None
}

/// Decide whether a framework is reachable by the signed Henneberg
/// construction. Greedy peeling first; for small frameworks (n <= 7) a full
/// peel-order search backs it up.
pub fn validate_signed_henneberg(framework: &Framework) -> HennebergCertificate {
    let dim = framework.dim();
    let state = PeelState::from_graph(framework.graph());
    let base_size = dim.as_usize() + 1;
    if framework.n() < base_size {
        return HennebergCertificate {
            is_henneberg: false,
            peel_order: vec![],
            mixed_families: false,
        };
    }
    let outcome = greedy_peel(state.clone(), dim).or_else(|| {
        if framework.n() <= 7 {
            let mut order = Vec::new();
            exhaustive_peel(&state, dim, &mut order).map(|fams| (order, fams))
        } else {
            None
        }
    });
    match outcome {
        Some((order, families)) => {
            let mixed = families.windows(2).any(|w| w[0] != w[1]);
            HennebergCertificate {
                is_henneberg: true,
                peel_order: order,
                mixed_families: mixed,
            }
        }
        None => HennebergCertificate {
            is_henneberg: false,
            peel_order: vec![],
            mixed_families: false,
        },
    }
}

/// Exhaustive peel search (n <= 7); diagnostic counterpart used to check
/// order-insensitivity of the greedy rule.
pub fn exhaustive_peel_succeeds(framework: &Framework) -> bool {
    let dim = framework.dim();
    let base_size = dim.as_usize() + 1;
    if framework.n() < base_size {
        return false;
    }
    let state = PeelState::from_graph(framework.graph());
    let mut order = Vec::new();
    exhaustive_peel(&state, dim, &mut order).is_some()
}

/// Grow a random signed-Henneberg formation of `n_target` vertices.
///
/// Placements are rejection-sampled for separation and signed-value margin,
/// so the realization stays comfortably non-degenerate.
pub fn random_construction(
    dim: Dim,
    family: AnchorFamily,
    n_target: usize,
    seed: u64,
) -> Framework {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_size = dim.as_usize() + 1;
    assert!(n_target >= base_size, "target below base size");

    let mut fw = loop {
        if let Some(fw) = sample_base(dim, family, &mut rng) {
            break fw;
        }
    };
    while fw.n() < n_target {
        let n = fw.n();
        let d = dim.as_usize();
        // Random distinct anchors.
        let mut anchors = Vec::new();
        while anchors.len() < d {
            let a = rng.gen_range(0..n);
            if !anchors.contains(&a) {
                anchors.push(a);
            }
        }
        let signed = match dim {
            Dim::Two => SignedConstraint::Angle(n, anchors[0], anchors[1]),
            Dim::Three => SignedConstraint::Volume(n, anchors[0], anchors[1], anchors[2]),
        };
        let step = HennebergStep {
            new_vertex: n,
            anchors: anchors.clone(),
            family,
            signed,
        };
        // Rejection-sample a well-separated, non-degenerate placement near
        // the anchor centroid.
        let centroid: Vec<f64> = (0..d)
            .map(|a| anchors.iter().map(|&v| fw.position(v)[a]).sum::<f64>() / d as f64)
            .collect();
        let extended = loop {
            let placement: Vec<f64> = (0..d)
                .map(|a| centroid[a] + rng.gen_range(-3.0..3.0))
                .collect();
            let far_enough = (0..n).all(|v| {
                let dist2: f64 = (0..d)
                    .map(|a| (fw.position(v)[a] - placement[a]).powi(2))
                    .sum();
                dist2 > 0.25
            });
            if !far_enough {
                continue;
            }
            match henneberg_extend(&fw, &step, &placement) {
                Ok(ext) => {
                    if placement_margin_ok(&ext, &step) {
                        break ext;
                    }
                }
                Err(_) => continue,
            }
        };
        fw = extended;
    }
    fw
}

fn placement_margin_ok(fw: &Framework, step: &HennebergStep) -> bool {
    let values = crate::framework::constraint_values(fw);
    let margin = match step.signed {
        SignedConstraint::Angle(..) => values.signed_sines.last().map(|s| s.abs() >= 0.2),
        SignedConstraint::Volume(..) => values.signed_volumes.last().map(|v| v.abs() >= 0.15),
    };
    if margin != Some(true) {
        return false;
    }
    // Angle-anchored steps also keep the new cosine rows away from collinear.
    if step.family == AnchorFamily::Angle {
        let count = fw.dim().as_usize();
        let m = values.cosines.len();
        if values.cosines[m - count..].iter().any(|c| c.abs() > 0.95) {
            return false;
        }
    }
    true
}

fn sample_base(dim: Dim, family: AnchorFamily, rng: &mut ChaCha8Rng) -> Option<Framework> {
    let d = dim.as_usize();
    let n = d + 1;
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let dist2: f64 = (0..d).map(|a| (pts[i][a] - pts[j][a]).powi(2)).sum();
            if dist2 < 0.25 {
                return None;
            }
        }
    }
    let graph = match (dim, family) {
        (Dim::Two, AnchorFamily::Distance) => Graph::new(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![],
            vec![(0, 1, 2)],
            vec![],
        ),
        (Dim::Two, AnchorFamily::Angle) => Graph::new(
            3,
            vec![],
            vec![(0, 1, 2), (2, 0, 1)],
            vec![(1, 0, 2)],
            vec![],
        ),
        (Dim::Three, AnchorFamily::Distance) => Graph::new(
            4,
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            vec![],
            vec![],
            vec![(0, 1, 2, 3)],
        ),
        (Dim::Three, AnchorFamily::Angle) => Graph::new(
            4,
            vec![],
            vec![(0, 1, 2), (2, 0, 1), (1, 3, 0), (3, 0, 1), (3, 1, 2)],
            vec![],
            vec![(3, 0, 1, 2)],
        ),
    }
    .ok()?;
    let fw = Framework::new(graph, dim, &pts).ok()?;
    let values = crate::framework::constraint_values(&fw);
    let signed_ok = values
        .signed_sines
        .iter()
        .all(|s| s.abs() >= 0.2)
        && values.signed_volumes.iter().all(|v| v.abs() >= 0.15);
    let cos_ok = values.cosines.iter().all(|c| c.abs() <= 0.95);
    if signed_ok && cos_ok {
        Some(fw)
    } else {
        None
    }
}

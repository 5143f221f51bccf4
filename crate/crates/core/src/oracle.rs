//! Independent brute-force verification utilities: central finite differences
//! against the analytic rigidity rows, SVD null spaces, and seeded random
//! framework sampling for property checks.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{Dim, Framework, Graph};
use crate::rigidity::{assemble_rigidity_matrix, RigidityKind};

/// Default central-difference step: balances truncation against roundoff for
/// unit-scale frameworks.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Entries smaller than this are compared absolutely instead of relatively,
/// so true zeros do not blow up the relative error.
pub const REL_ABS_SWITCH: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("non-finite evaluation while perturbing coordinate {coordinate}")]
    NonFinite { coordinate: usize },
    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// Central finite-difference gradient of a scalar field over the realization.
pub fn finite_difference_jacobian<F>(
    scalar_field: F,
    p: &DVector<f64>,
    h: f64,
) -> Result<RowDVector<f64>, OracleError>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let step_ok = h.is_finite() && h > 0.0;
    if !step_ok {
        return Err(OracleError::NonPositiveStep(h));
    }
    let mut row = RowDVector::zeros(p.len());
    let mut work = p.clone();
    for q in 0..p.len() {
        work[q] = p[q] + h;
        let plus = scalar_field(&work);
        work[q] = p[q] - h;
        let minus = scalar_field(&work);
        work[q] = p[q];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(OracleError::NonFinite { coordinate: q });
        }
        row[q] = (plus - minus) / (2.0 * h);
    }
    Ok(row)
}

/// Orthonormal basis of the numerical null space: right singular vectors with
/// singular value at most `tol`.
///
/// The matrix is padded with zero rows up to a square shape when it has fewer
/// rows than columns, so the thin SVD still exposes the full right basis.
pub fn brute_force_nullspace(matrix: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let q = matrix.ncols();
    if matrix.nrows() == 0 || q == 0 {
        return DMatrix::identity(q, q);
    }
    let padded = if matrix.nrows() < q {
        let mut m = DMatrix::zeros(q, q);
        m.rows_mut(0, matrix.nrows()).copy_from(matrix);
        m
    } else {
        matrix.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut cols: Vec<usize> = Vec::new();
    for (idx, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= tol {
            cols.push(idx);
        }
    }
    // Rows of V^T beyond the singular-value count also span the null space.
    for idx in svd.singular_values.len()..v_t.nrows() {
        cols.push(idx);
    }
    let mut basis = DMatrix::zeros(q, cols.len());
    for (c, &idx) in cols.iter().enumerate() {
        basis.set_column(c, &v_t.row(idx).transpose());
    }
    basis
}

/// Outcome of comparing one analytic Jacobian against finite differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobianCheckResult {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// (row, column) of the worst relative mismatch.
    pub worst_entry: (usize, usize),
    pub step_used: f64,
}

/// Which analytic row family a check targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    Distance,
    Cosine,
    SignedAngle,
    SignedVolume,
}

impl RowFamily {
    pub fn all() -> [RowFamily; 4] {
        [
            RowFamily::Distance,
            RowFamily::Cosine,
            RowFamily::SignedAngle,
            RowFamily::SignedVolume,
        ]
    }

    /// The single-family rigidity kind used to pull out analytic rows.
    fn kind(self) -> RigidityKind {
        match self {
            RowFamily::Distance => RigidityKind::DistanceOnly,
            RowFamily::Cosine => RigidityKind::WeakDistanceAngle,
            RowFamily::SignedAngle => RigidityKind::DistanceSign2D,
            RowFamily::SignedVolume => RigidityKind::DistanceVolume3D,
        }
    }
}

fn family_entry_count(graph: &Graph, family: RowFamily) -> usize {
    match family {
        RowFamily::Distance => graph.edges().len(),
        RowFamily::Cosine => graph.angles().len(),
        RowFamily::SignedAngle => graph.signed_angles().len(),
        RowFamily::SignedVolume => graph.signed_volumes().len(),
    }
}

fn family_scalar(framework: &Framework, family: RowFamily, w: usize, p: &DVector<f64>) -> f64 {
    let moved = framework.with_realization_unchecked(p.clone());
    let values = crate::framework::constraint_values(&moved);
    match family {
        RowFamily::Distance => values.distance_sq_half[w],
        RowFamily::Cosine => values.cosines[w],
        RowFamily::SignedAngle => values.signed_sines[w],
        RowFamily::SignedVolume => values.signed_volumes[w],
    }
}

/// Compare every analytic row of one family against central differences of
/// the corresponding rigidity-function entry.
pub fn check_rows_against_fd(
    framework: &Framework,
    family: RowFamily,
    h: f64,
) -> Result<JacobianCheckResult, OracleError> {
    let graph = framework.graph();
    let m = family_entry_count(graph, family);
    let matrix = assemble_rigidity_matrix(framework, family.kind(), 1.0)
        .expect("family compatible with framework");
    // Rows of the requested family sit at the bottom of the stacked matrix
    // for signed kinds and after the (scaled) distance block for cosines.
    let row_offset = matrix.rows.nrows() - m;
    let mut result = JacobianCheckResult {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst_entry: (0, 0),
        step_used: h,
    };
    for w in 0..m {
        let analytic = matrix.rows.row(row_offset + w);
        let fd = finite_difference_jacobian(
            |p| family_scalar(framework, family, w, p),
            framework.realization(),
            h,
        )?;
        for q in 0..fd.len() {
            let a = analytic[q];
            let b = fd[q];
            let abs = (a - b).abs();
            let denom = a.abs().max(b.abs());
            result.max_abs_error = result.max_abs_error.max(abs);
            let rel = if denom < REL_ABS_SWITCH { abs } else { abs / denom };
            if rel > result.max_rel_error {
                result.max_rel_error = rel;
                result.worst_entry = (w, q);
            }
        }
    }
    Ok(result)
}

/// Seeded sampler for non-degenerate random frameworks.
///
/// Positions land in a box with a minimum pairwise separation, and sampled
/// angle triples / volume quadruples keep a margin away from collinear and
/// coplanar so finite differences stay well-conditioned.
pub struct FrameworkSampler {
    rng: ChaCha8Rng,
}

impl FrameworkSampler {
    pub fn new(seed: u64) -> Self {
        FrameworkSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn positions(&mut self, dim: Dim, n: usize) -> Vec<Vec<f64>> {
        let d = dim.as_usize();
        loop {
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| self.rng.gen_range(-4.0..4.0)).collect())
                .collect();
            let mut ok = true;
            'sep: for i in 0..n {
                for j in (i + 1)..n {
                    let dist2: f64 = (0..d).map(|a| (pts[i][a] - pts[j][a]).powi(2)).sum();
                    if dist2 < 0.36 {
                        ok = false;
                        break 'sep;
                    }
                }
            }
            if ok {
                return pts;
            }
        }
    }

    fn distinct(&mut self, n: usize, count: usize) -> Vec<usize> {
        let mut picked = Vec::with_capacity(count);
        while picked.len() < count {
            let v = self.rng.gen_range(0..n);
            if !picked.contains(&v) {
                picked.push(v);
            }
        }
        picked
    }

    /// Random framework with the families relevant to `kind`.
    pub fn framework(&mut self, kind: RigidityKind) -> Framework {
        let dim = match kind {
            RigidityKind::DistanceSign2D | RigidityKind::AngleSign2D => Dim::Two,
            RigidityKind::DistanceVolume3D | RigidityKind::AngleVolume3D => Dim::Three,
            _ => {
                if self.rng.gen_bool(0.5) {
                    Dim::Two
                } else {
                    Dim::Three
                }
            }
        };
        let n = self.rng.gen_range(4..=8);
        'resample: loop {
            let pts = self.positions(dim, n);
            let want_edges = matches!(
                kind,
                RigidityKind::DistanceOnly
                    | RigidityKind::WeakDistanceAngle
                    | RigidityKind::DistanceSign2D
                    | RigidityKind::DistanceVolume3D
            );
            let want_angles = matches!(
                kind,
                RigidityKind::WeakDistanceAngle
                    | RigidityKind::AngleSign2D
                    | RigidityKind::AngleVolume3D
            );

            let mut edges = Vec::new();
            if want_edges {
                // Spanning tree plus a few extras keeps the graph connected.
                for v in 1..n {
                    let u = self.rng.gen_range(0..v);
                    edges.push((u, v));
                }
                for _ in 0..self.rng.gen_range(0..n) {
                    let pair = self.distinct(n, 2);
                    let e = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                    if !edges.contains(&e) {
                        edges.push(e);
                    }
                }
            }

            let mut angles = Vec::new();
            if want_angles {
                for _ in 0..self.rng.gen_range(2..=n) {
                    let t = self.distinct(n, 3);
                    angles.push((t[0], t[1], t[2]));
                }
            }

            let mut signed_angles = Vec::new();
            let mut signed_volumes = Vec::new();
            match dim {
                Dim::Two => {
                    for _ in 0..self.rng.gen_range(1..=3) {
                        let t = self.distinct(n, 3);
                        signed_angles.push((t[0], t[1], t[2]));
                    }
                }
                Dim::Three => {
                    for _ in 0..self.rng.gen_range(1..=3) {
                        let q = self.distinct(n, 4);
                        signed_volumes.push((q[0], q[1], q[2], q[3]));
                    }
                }
            }
            if !matches!(
                kind,
                RigidityKind::DistanceSign2D
                    | RigidityKind::AngleSign2D
                    | RigidityKind::DistanceVolume3D
                    | RigidityKind::AngleVolume3D
            ) {
                signed_angles.clear();
                signed_volumes.clear();
            }

            let graph = Graph::new(n, edges, angles, signed_angles, signed_volumes)
                .expect("sampler indices valid");
            let fw = match Framework::new(graph, dim, &pts) {
                Ok(fw) => fw,
                Err(_) => continue 'resample,
            };
            if framework_is_degenerate(&fw) {
                continue 'resample;
            }
            return fw;
        }
    }
}

/// Degeneracy screen: near-collinear triples or near-coplanar quadruples.
fn framework_is_degenerate(fw: &Framework) -> bool {
    let values = crate::framework::constraint_values(fw);
    for (idx, &(i, j, k)) in fw.graph().angles().iter().enumerate() {
        let _ = (i, j, k);
        if values.cosines[idx].abs() > 0.98 {
            return true;
        }
    }
    for &(i, j, k) in fw.graph().signed_angles() {
        let s = crate::framework::signed_sine(fw.pos2(i), fw.pos2(j), fw.pos2(k));
        if s.abs() < 0.2 {
            return true;
        }
    }
    for &v in &values.signed_volumes {
        if v.abs() < 0.15 {
            return true;
        }
    }
    false
}

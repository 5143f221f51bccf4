//! Rigidity matrices, numerical rank, trivial-motion bases and the
//! IRDS / IRAS classification.
//!
//! Six matrix kinds are exposed: the classical distance rigidity matrix, the
//! weak (distance + cosine) rigidity matrix, and the four hybrid stacks that
//! append signed-sine rows (2-D) or signed-volume rows (3-D). Every row is
//! the analytic gradient of one rigidity-function entry; the `i`-blocks are
//! always the negated sum of the partner blocks, so rows annihilate rigid
//! translations exactly.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, RowDVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{Dim, Framework, Graph};

/// The perpendicular matrix J = [[0, 1], [-1, 0]].
pub fn perp() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// Rotation generators in 3-D; `rot3(s) * x == e_s x x`.
pub fn rot3(sigma: usize) -> Matrix3<f64> {
    match sigma {
        0 => Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        1 => Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        2 => Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        _ => panic!("rotation generator index {sigma} out of range"),
    }
}

fn proj2(x: Vector2<f64>) -> Matrix2<f64> {
    Matrix2::identity() - x * x.transpose() / x.norm_squared()
}

fn proj3(x: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - x * x.transpose() / x.norm_squared()
}

/// Which rigidity function a matrix is the Jacobian of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RigidityKind {
    /// Distance rows only.
    #[serde(rename = "distance_only")]
    DistanceOnly,
    /// Weak rigidity: doubled distance rows stacked over cosine rows
    /// (cosine rows alone when the edge set is empty).
    #[serde(rename = "weak_distance_angle")]
    WeakDistanceAngle,
    /// Distance rows over signed-sine rows (2-D).
    #[serde(rename = "distance_sign_2d")]
    DistanceSign2D,
    /// Weak block over signed-sine rows (2-D).
    #[serde(rename = "angle_sign_2d")]
    AngleSign2D,
    /// Distance rows over signed-volume rows (3-D).
    #[serde(rename = "distance_volume_3d")]
    DistanceVolume3D,
    /// Weak block over signed-volume rows (3-D).
    #[serde(rename = "angle_volume_3d")]
    AngleVolume3D,
}

impl RigidityKind {
    pub fn all() -> [RigidityKind; 6] {
        [
            RigidityKind::DistanceOnly,
            RigidityKind::WeakDistanceAngle,
            RigidityKind::DistanceSign2D,
            RigidityKind::AngleSign2D,
            RigidityKind::DistanceVolume3D,
            RigidityKind::AngleVolume3D,
        ]
    }

    pub fn required_dim(self) -> Option<Dim> {
        match self {
            RigidityKind::DistanceSign2D | RigidityKind::AngleSign2D => Some(Dim::Two),
            RigidityKind::DistanceVolume3D | RigidityKind::AngleVolume3D => Some(Dim::Three),
            _ => None,
        }
    }

    pub fn compatible_with(self, framework: &Framework) -> bool {
        match self.required_dim() {
            Some(d) => d == framework.dim(),
            None => true,
        }
    }

    /// Whether uniform scaling counts as a trivial motion for this kind.
    ///
    /// Sine, cosine and volume rows all annihilate `p`; distance rows do not.
    /// The angle kinds treat scaling as trivial by definition, and the weak
    /// baseline only in its edge-free case.
    pub fn includes_scaling(self, graph: &Graph) -> bool {
        match self {
            RigidityKind::DistanceOnly | RigidityKind::DistanceSign2D
            | RigidityKind::DistanceVolume3D => false,
            RigidityKind::AngleSign2D | RigidityKind::AngleVolume3D => true,
            RigidityKind::WeakDistanceAngle => !graph.has_edges(),
        }
    }

    /// Rank of the matrix when every infinitesimal motion is trivial.
    pub fn target_rank(self, framework: &Framework) -> usize {
        let d = framework.dim().as_usize() as isize;
        let n = framework.n() as isize;
        let trivial = if self.includes_scaling(framework.graph()) {
            d * (d + 1) / 2 + 1
        } else {
            d * (d + 1) / 2
        };
        (d * n - trivial).max(0) as usize
    }

    /// Number of constraints contributing rows.
    pub fn constraint_count(self, graph: &Graph) -> usize {
        let m_d = graph.edges().len();
        let m_a = graph.angles().len();
        let m_s = graph.signed_angles().len();
        let m_v = graph.signed_volumes().len();
        match self {
            RigidityKind::DistanceOnly => m_d,
            RigidityKind::WeakDistanceAngle => m_d + m_a,
            RigidityKind::DistanceSign2D => m_d + m_s,
            RigidityKind::AngleSign2D => m_d + m_a + m_s,
            RigidityKind::DistanceVolume3D => m_d + m_v,
            RigidityKind::AngleVolume3D => m_d + m_a + m_v,
        }
    }
}

#[derive(Debug, Error)]
pub enum RigidityError {
    #[error("kind {kind:?} requires dimension {required:?}, framework is {actual:?}")]
    KindMismatch {
        kind: RigidityKind,
        required: Dim,
        actual: Dim,
    },
    #[error("gain k must be positive, got {0}")]
    NonPositiveGain(f64),
}

/// Assembled Jacobian of a rigidity function, with labelled rows.
#[derive(Debug, Clone)]
pub struct RigidityMatrix {
    pub kind: RigidityKind,
    pub rows: DMatrix<f64>,
    pub row_labels: Vec<String>,
}

fn set_block(row: &mut RowDVector<f64>, d: usize, vertex: usize, block: &[f64]) {
    for (a, &v) in block.iter().enumerate() {
        row[d * vertex + a] = v;
    }
}

/// Gradient of half the squared edge length, one row per edge.
pub fn distance_rows(framework: &Framework) -> Vec<RowDVector<f64>> {
    let d = framework.dim().as_usize();
    let dof = framework.dof();
    framework
        .graph()
        .edges()
        .iter()
        .map(|&(i, j)| {
            let z = framework.diff(i, j);
            let mut row = RowDVector::zeros(dof);
            set_block(&mut row, d, i, z.as_slice());
            set_block(&mut row, d, j, (-&z).as_slice());
            row
        })
        .collect()
}

/// Gradient of the cosine at vertex `i` subtended by `j` and `k`.
pub fn cosine_rows(framework: &Framework) -> Vec<RowDVector<f64>> {
    let d = framework.dim().as_usize();
    let dof = framework.dof();
    framework
        .graph()
        .angles()
        .iter()
        .map(|&(i, j, k)| {
            let mut row = RowDVector::zeros(dof);
            match framework.dim() {
                Dim::Two => {
                    let zji = framework.pos2(j) - framework.pos2(i);
                    let zki = framework.pos2(k) - framework.pos2(i);
                    let bj = (proj2(zji) * zki.normalize() / zji.norm()).transpose();
                    let bk = (proj2(zki) * zji.normalize() / zki.norm()).transpose();
                    let bi = -(bj + bk);
                    set_block(&mut row, d, j, bj.as_slice());
                    set_block(&mut row, d, k, bk.as_slice());
                    set_block(&mut row, d, i, bi.as_slice());
                }
                Dim::Three => {
                    let zji = framework.pos3(j) - framework.pos3(i);
                    let zki = framework.pos3(k) - framework.pos3(i);
                    let bj = (proj3(zji) * zki.normalize() / zji.norm()).transpose();
                    let bk = (proj3(zki) * zji.normalize() / zki.norm()).transpose();
                    let bi = -(bj + bk);
                    set_block(&mut row, d, j, bj.as_slice());
                    set_block(&mut row, d, k, bk.as_slice());
                    set_block(&mut row, d, i, bi.as_slice());
                }
            }
            row
        })
        .collect()
}

/// Gradient of the signed sine at `i` from ray `i -> j` to ray `i -> k`
/// (2-D frameworks only).
pub fn signed_angle_rows(framework: &Framework) -> Vec<RowDVector<f64>> {
    debug_assert_eq!(framework.dim(), Dim::Two);
    let d = 2;
    let dof = framework.dof();
    let jmat = perp();
    framework
        .graph()
        .signed_angles()
        .iter()
        .map(|&(i, j, k)| {
            let zji = framework.pos2(j) - framework.pos2(i);
            let zki = framework.pos2(k) - framework.pos2(i);
            // d/dp_k: (z_ji/|z_ji|)^T J P_ki / |z_ki|
            let bk = zji.normalize().transpose() * jmat * proj2(zki) / zki.norm();
            // d/dp_j: (z_ki/|z_ki|)^T J^T P_ji / |z_ji|
            let bj = zki.normalize().transpose() * jmat.transpose() * proj2(zji) / zji.norm();
            let bi = -(bj + bk);
            let mut row = RowDVector::zeros(dof);
            set_block(&mut row, d, j, bj.as_slice());
            set_block(&mut row, d, k, bk.as_slice());
            set_block(&mut row, d, i, bi.as_slice());
            row
        })
        .collect()
}

/// Gradient of the normalized signed volume at `i` over the bearings to
/// `j`, `k`, `l` (3-D frameworks only).
pub fn signed_volume_rows(framework: &Framework) -> Vec<RowDVector<f64>> {
    debug_assert_eq!(framework.dim(), Dim::Three);
    let d = 3;
    let dof = framework.dof();
    framework
        .graph()
        .signed_volumes()
        .iter()
        .map(|&(i, j, k, l)| {
            let zji = framework.pos3(j) - framework.pos3(i);
            let zki = framework.pos3(k) - framework.pos3(i);
            let zli = framework.pos3(l) - framework.pos3(i);
            let uj = zji.normalize();
            let uk = zki.normalize();
            let ul = zli.normalize();
            let bj = uk.cross(&ul).transpose() * proj3(zji) / zji.norm();
            // V = u_j . (u_k x u_l); the cross product is -xi(u_l) u_k in u_k
            // and xi(u_k) u_l in u_l.
            let bk = -(uj.transpose() * ul.cross_matrix() * proj3(zki)) / zki.norm();
            let bl = uj.transpose() * uk.cross_matrix() * proj3(zli) / zli.norm();
            let bi = -(bj + bk + bl);
            let mut row = RowDVector::zeros(dof);
            set_block(&mut row, d, j, bj.as_slice());
            set_block(&mut row, d, k, bk.as_slice());
            set_block(&mut row, d, l, bl.as_slice());
            set_block(&mut row, d, i, bi.as_slice());
            row
        })
        .collect()
}

fn edge_label(prefix: &str, i: usize, j: usize) -> String {
    format!("{prefix}({},{})", i + 1, j + 1)
}

fn triple_label(prefix: &str, t: (usize, usize, usize)) -> String {
    format!("{prefix}({};{},{})", t.0 + 1, t.1 + 1, t.2 + 1)
}

/// Stack the rows of the requested kind. Distance / angle rows come first in
/// constraint-list order; signed rows are scaled by `gain_k` and come last.
/// `gain_k = 1` reproduces the unscaled theory matrices.
pub fn assemble_rigidity_matrix(
    framework: &Framework,
    kind: RigidityKind,
    gain_k: f64,
) -> Result<RigidityMatrix, RigidityError> {
    if let Some(required) = kind.required_dim() {
        if required != framework.dim() {
            return Err(RigidityError::KindMismatch {
                kind,
                required,
                actual: framework.dim(),
            });
        }
    }
    let gain_ok = gain_k.is_finite() && gain_k > 0.0;
    if !gain_ok {
        return Err(RigidityError::NonPositiveGain(gain_k));
    }

    let graph = framework.graph();
    let mut rows: Vec<RowDVector<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();

    let push_distance = |rows: &mut Vec<RowDVector<f64>>, labels: &mut Vec<String>, scale: f64| {
        for (row, &(i, j)) in distance_rows(framework).into_iter().zip(graph.edges()) {
            rows.push(row * scale);
            labels.push(edge_label("d", i, j));
        }
    };
    let push_cosines = |rows: &mut Vec<RowDVector<f64>>, labels: &mut Vec<String>| {
        for (row, &t) in cosine_rows(framework).into_iter().zip(graph.angles()) {
            rows.push(row);
            labels.push(triple_label("cos", t));
        }
    };
    let push_signed = |rows: &mut Vec<RowDVector<f64>>, labels: &mut Vec<String>| {
        match framework.dim() {
            Dim::Two => {
                for (row, &t) in signed_angle_rows(framework)
                    .into_iter()
                    .zip(graph.signed_angles())
                {
                    rows.push(row * gain_k);
                    labels.push(triple_label("sin", t));
                }
            }
            Dim::Three => {
                for (row, &(i, j, k, l)) in signed_volume_rows(framework)
                    .into_iter()
                    .zip(graph.signed_volumes())
                {
                    rows.push(row * gain_k);
                    labels.push(format!("vol({};{},{},{})", i + 1, j + 1, k + 1, l + 1));
                }
            }
        }
    };

    match kind {
        RigidityKind::DistanceOnly => push_distance(&mut rows, &mut labels, 1.0),
        RigidityKind::WeakDistanceAngle => {
            // e_w carries 2 d(p), so distance rows enter doubled.
            push_distance(&mut rows, &mut labels, 2.0);
            push_cosines(&mut rows, &mut labels);
        }
        RigidityKind::DistanceSign2D | RigidityKind::DistanceVolume3D => {
            push_distance(&mut rows, &mut labels, 1.0);
            push_signed(&mut rows, &mut labels);
        }
        RigidityKind::AngleSign2D | RigidityKind::AngleVolume3D => {
            push_distance(&mut rows, &mut labels, 2.0);
            push_cosines(&mut rows, &mut labels);
            push_signed(&mut rows, &mut labels);
        }
    }

    let dof = framework.dof();
    let mut matrix = DMatrix::zeros(rows.len(), dof);
    for (r, row) in rows.iter().enumerate() {
        matrix.row_mut(r).copy_from(row);
    }
    Ok(RigidityMatrix {
        kind,
        rows: matrix,
        row_labels: labels,
    })
}

/// Relative singular-value threshold for declaring rank.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RankPolicy {
    pub rel_tol: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy { rel_tol: 1e-10 }
    }
}

impl RankPolicy {
    pub fn threshold(&self, sigma_max: f64, nrows: usize, ncols: usize) -> f64 {
        self.rel_tol * sigma_max * nrows.max(ncols) as f64
    }
}

/// Count of singular values above the policy threshold, plus the threshold
/// actually used.
pub fn rank_with_threshold(matrix: &DMatrix<f64>, policy: &RankPolicy) -> (usize, f64) {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return (0, 0.0);
    }
    let singular = matrix.clone().singular_values();
    let sigma_max = singular.max();
    let tau = policy.threshold(sigma_max, matrix.nrows(), matrix.ncols());
    let rank = singular.iter().filter(|&&s| s > tau).count();
    (rank, tau)
}

pub fn numerical_rank(matrix: &DMatrix<f64>, policy: &RankPolicy) -> usize {
    rank_with_threshold(matrix, policy).0
}

/// Orthonormal columns spanning the kind's trivial motions: translations,
/// rotations, and uniform scaling for the angle kinds.
pub fn trivial_motion_basis(framework: &Framework, kind: RigidityKind) -> DMatrix<f64> {
    let d = framework.dim().as_usize();
    let n = framework.n();
    let dof = framework.dof();
    let p = framework.realization();
    let mut cols: Vec<DVector<f64>> = Vec::new();

    for a in 0..d {
        let mut t = DVector::zeros(dof);
        for v in 0..n {
            t[d * v + a] = 1.0;
        }
        cols.push(t);
    }
    match framework.dim() {
        Dim::Two => {
            let jmat = perp();
            let mut r = DVector::zeros(dof);
            for v in 0..n {
                let pv = framework.pos2(v);
                let rv = jmat * pv;
                r[2 * v] = rv.x;
                r[2 * v + 1] = rv.y;
            }
            cols.push(r);
        }
        Dim::Three => {
            for sigma in 0..3 {
                let gen = rot3(sigma);
                let mut r = DVector::zeros(dof);
                for v in 0..n {
                    let rv = gen * framework.pos3(v);
                    r[3 * v] = rv.x;
                    r[3 * v + 1] = rv.y;
                    r[3 * v + 2] = rv.z;
                }
                cols.push(r);
            }
        }
    }
    if kind.includes_scaling(framework.graph()) {
        cols.push(p.clone());
    }

    let mut raw = DMatrix::zeros(dof, cols.len());
    for (c, col) in cols.iter().enumerate() {
        raw.set_column(c, col);
    }
    // Orthonormalize; non-degenerate realizations give full column rank.
    let qr = raw.qr();
    qr.q()
}

/// Classification outcome for one framework and matrix kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidityReport {
    pub kind: RigidityKind,
    pub numerical_rank: usize,
    pub rank_threshold: f64,
    pub nullity: usize,
    /// max over trivial basis columns v of the residual |R v|_inf.
    pub trivial_residuals: f64,
    pub is_rigid: bool,
    pub is_minimal: bool,
    /// Hybrid-kind verdict combined with the classical rigidity test
    /// (distance rigidity for the distance kinds, weak rigidity for the
    /// angle kinds); `None` for the two baseline kinds.
    pub proposition_check: Option<bool>,
    pub target_rank: usize,
    pub constraint_count: usize,
    /// Unsigned-angle triples at a collinear configuration, where the cosine
    /// row degenerates (indices into the angle list).
    pub degenerate_angles: Vec<usize>,
    /// Signed targets strictly inside (-1, 1) on a minimally rigid framework
    /// without the classical-rigidity backup admit two angles with the same
    /// sine.
    pub sine_ambiguity_warning: bool,
}

/// Rank test plus the verdict bookkeeping for the chosen matrix kind.
pub fn classify(
    framework: &Framework,
    kind: RigidityKind,
    policy: &RankPolicy,
) -> Result<RigidityReport, RigidityError> {
    let matrix = assemble_rigidity_matrix(framework, kind, 1.0)?;
    let (rank, tau) = rank_with_threshold(&matrix.rows, policy);
    let dof = framework.dof();
    let target = kind.target_rank(framework);
    let is_rigid = rank == target;
    let count = kind.constraint_count(framework.graph());
    let is_minimal = is_rigid && count == target;

    let basis = trivial_motion_basis(framework, kind);
    let trivial_residuals = if matrix.rows.nrows() == 0 {
        0.0
    } else {
        (&matrix.rows * &basis).amax()
    };

    let classical_rigid = match kind {
        RigidityKind::DistanceSign2D | RigidityKind::DistanceVolume3D => {
            let rd = assemble_rigidity_matrix(framework, RigidityKind::DistanceOnly, 1.0)?;
            let target_d = RigidityKind::DistanceOnly.target_rank(framework);
            Some(numerical_rank(&rd.rows, policy) == target_d)
        }
        RigidityKind::AngleSign2D | RigidityKind::AngleVolume3D => {
            let rw = assemble_rigidity_matrix(framework, RigidityKind::WeakDistanceAngle, 1.0)?;
            let target_w = RigidityKind::WeakDistanceAngle.target_rank(framework);
            Some(numerical_rank(&rw.rows, policy) == target_w)
        }
        _ => None,
    };
    let proposition_check = classical_rigid.map(|c| c && is_rigid);

    let values = crate::framework::constraint_values(framework);
    let degenerate_angles = values
        .cosines
        .iter()
        .enumerate()
        .filter(|(_, a)| 1.0 - *a * *a < 1e-12)
        .map(|(idx, _)| idx)
        .collect();
    let any_open_sine = values
        .signed_sines
        .iter()
        .chain(values.signed_volumes.iter())
        .any(|s| s.abs() < 1.0 - 1e-9);
    let sine_ambiguity_warning =
        is_rigid && is_minimal && classical_rigid == Some(false) && any_open_sine;

    Ok(RigidityReport {
        kind,
        numerical_rank: rank,
        rank_threshold: tau,
        nullity: dof - rank,
        trivial_residuals,
        is_rigid,
        is_minimal,
        proposition_check,
        target_rank: target,
        constraint_count: count,
        degenerate_angles,
        sine_ambiguity_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{Dim, Framework, Graph};
    use approx::assert_abs_diff_eq;

    /// The 4-agent example used for the rank illustrations:
    /// p1 = (0,3), p2 = (-2,0), p3 = (2,0), p4 = (4,3).
    fn four_agent_positions() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 3.0],
            vec![-2.0, 0.0],
            vec![2.0, 0.0],
            vec![4.0, 3.0],
        ]
    }

    fn rigid_variant() -> Framework {
        let g = Graph::new(
            4,
            vec![(0, 1), (1, 2), (0, 3)],
            vec![],
            vec![(0, 1, 2), (3, 0, 2)],
            vec![],
        )
        .unwrap();
        Framework::new(g, Dim::Two, &four_agent_positions()).unwrap()
    }

    fn flexible_variant() -> Framework {
        let g = Graph::new(
            4,
            vec![(0, 1), (1, 2)],
            vec![],
            vec![(0, 1, 2), (3, 0, 2)],
            vec![],
        )
        .unwrap();
        Framework::new(g, Dim::Two, &four_agent_positions()).unwrap()
    }

    #[test]
    fn two_agent_distance_row() {
        let g = Graph::new(2, vec![(0, 1)], vec![], vec![], vec![]).unwrap();
        let fw = Framework::new(g, Dim::Two, &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let rows = distance_rows(&fw);
        let expected = [-1.0, 0.0, 1.0, 0.0];
        for (got, want) in rows[0].iter().zip(expected) {
            assert_abs_diff_eq!(*got, want);
        }
    }

    #[test]
    fn rows_annihilate_translations() {
        let fw = rigid_variant();
        let m = assemble_rigidity_matrix(&fw, RigidityKind::DistanceSign2D, 1.0).unwrap();
        for a in 0..2 {
            let mut t = DVector::zeros(fw.dof());
            for v in 0..fw.n() {
                t[2 * v + a] = 1.0;
            }
            assert!((&m.rows * t).amax() < 1e-14);
        }
    }

    #[test]
    fn rank_five_with_three_edges_two_signed() {
        let fw = rigid_variant();
        let m = assemble_rigidity_matrix(&fw, RigidityKind::DistanceSign2D, 1.0).unwrap();
        assert_eq!(m.rows.nrows(), 5);
        assert_eq!(m.rows.ncols(), 8);
        assert_eq!(numerical_rank(&m.rows, &RankPolicy::default()), 5);
    }

    #[test]
    fn rank_four_after_removing_edge() {
        let fw = flexible_variant();
        let m = assemble_rigidity_matrix(&fw, RigidityKind::DistanceSign2D, 1.0).unwrap();
        assert_eq!(numerical_rank(&m.rows, &RankPolicy::default()), 4);
    }

    #[test]
    fn zero_matrix_rank_zero() {
        let m = DMatrix::<f64>::zeros(3, 4);
        assert_eq!(numerical_rank(&m, &RankPolicy::default()), 0);
        let empty = DMatrix::<f64>::zeros(0, 4);
        assert_eq!(numerical_rank(&empty, &RankPolicy::default()), 0);
    }

    #[test]
    fn gain_scaling_preserves_null_space() {
        let fw = rigid_variant();
        let policy = RankPolicy::default();
        let base = assemble_rigidity_matrix(&fw, RigidityKind::DistanceSign2D, 1.0).unwrap();
        let scaled = assemble_rigidity_matrix(&fw, RigidityKind::DistanceSign2D, 10.0).unwrap();
        let (rank_base, tau) = rank_with_threshold(&base.rows, &policy);
        let (rank_scaled, _) = rank_with_threshold(&scaled.rows, &policy);
        assert_eq!(rank_base, rank_scaled);
        // Null vectors of the unscaled matrix stay null after scaling.
        let basis = crate::oracle::brute_force_nullspace(&base.rows, tau);
        assert!((scaled.rows * basis).amax() < 1e-10);
    }

    #[test]
    fn unit_axis_signed_row_annihilates_scaling() {
        let g = Graph::new(3, vec![], vec![], vec![(0, 1, 2)], vec![]).unwrap();
        let fw = Framework::new(
            g,
            Dim::Two,
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let rows = signed_angle_rows(&fw);
        let s = crate::framework::signed_sine(fw.pos2(0), fw.pos2(1), fw.pos2(2));
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        let residual: f64 = rows[0]
            .iter()
            .zip(fw.realization().iter())
            .map(|(r, p)| r * p)
            .sum();
        assert_abs_diff_eq!(residual, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trivial_basis_counts_match_kind() {
        let fw = rigid_variant();
        let b = trivial_motion_basis(&fw, RigidityKind::DistanceSign2D);
        assert_eq!(b.ncols(), 3);
        assert_eq!(
            b.ncols(),
            fw.dof() - RigidityKind::DistanceSign2D.target_rank(&fw)
        );
        let b = trivial_motion_basis(&fw, RigidityKind::AngleSign2D);
        assert_eq!(b.ncols(), 4);
        // Orthonormal.
        let gram = b.transpose() * &b;
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn trivial_basis_counts_in_3d() {
        let g = Graph::new(4, vec![(0, 1)], vec![], vec![], vec![(0, 1, 2, 3)]).unwrap();
        let fw = Framework::new(
            g,
            Dim::Three,
            &[
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.2, 0.0],
                vec![0.1, 1.3, 0.2],
                vec![0.4, 0.2, 1.7],
            ],
        )
        .unwrap();
        for (kind, want) in [
            (RigidityKind::DistanceVolume3D, 6),
            (RigidityKind::AngleVolume3D, 7),
        ] {
            let b = trivial_motion_basis(&fw, kind);
            assert_eq!(b.ncols(), want);
            assert_eq!(b.ncols(), fw.dof() - kind.target_rank(&fw));
        }
    }

    #[test]
    fn classify_rigid_and_flexible_variants() {
        let policy = RankPolicy::default();
        let report = classify(&rigid_variant(), RigidityKind::DistanceSign2D, &policy).unwrap();
        assert!(report.is_rigid);
        assert!(report.is_minimal); // 5 constraints = 2n - 3
        assert!(report.trivial_residuals < 1e-10);
        assert_eq!(report.numerical_rank + report.nullity, 8);

        let report = classify(&flexible_variant(), RigidityKind::DistanceSign2D, &policy).unwrap();
        assert!(!report.is_rigid);
        assert_eq!(report.nullity, 4);
    }

    #[test]
    fn equilateral_with_signed_angle_is_rigid_not_minimal() {
        // 3 edges + 1 signed angle: rank hits 2n - 3 = 3 but count is 4.
        let g = Graph::new(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![],
            vec![(1, 0, 2)],
            vec![],
        )
        .unwrap();
        let h = 3.0_f64.sqrt() / 2.0;
        let fw = Framework::new(
            g,
            Dim::Two,
            &[vec![0.0, 0.0], vec![0.5, h], vec![1.0, 0.0]],
        )
        .unwrap();
        let report = classify(&fw, RigidityKind::DistanceSign2D, &RankPolicy::default()).unwrap();
        assert!(report.is_rigid);
        assert!(!report.is_minimal);
        assert_eq!(report.constraint_count, 4);
    }

    #[test]
    fn cosine_row_at_right_angle_annihilates_scaling() {
        // Unsigned angles never see the formation scale: row . p = 0.
        let g = Graph::new(3, vec![], vec![(0, 1, 2)], vec![], vec![]).unwrap();
        let fw = Framework::new(
            g,
            Dim::Two,
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let rows = cosine_rows(&fw);
        let residual: f64 = rows[0]
            .iter()
            .zip(fw.realization().iter())
            .map(|(r, p)| r * p)
            .sum();
        assert_abs_diff_eq!(residual, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_angle_triple_is_flagged_degenerate() {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], vec![(0, 1, 2)], vec![], vec![]).unwrap();
        let fw = Framework::new(
            g,
            Dim::Two,
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
        )
        .unwrap();
        let report = classify(&fw, RigidityKind::WeakDistanceAngle, &RankPolicy::default()).unwrap();
        assert_eq!(report.degenerate_angles, vec![0]);
    }

    #[test]
    fn minimal_framework_without_classical_backup_warns_on_sine_ambiguity() {
        // Two distances plus one signed angle away from +-90 degrees:
        // minimally rigid, not distance-rigid, sine strictly inside (-1, 1).
        let g = Graph::new(3, vec![(0, 1), (1, 2)], vec![], vec![(1, 0, 2)], vec![]).unwrap();
        let fw = Framework::new(
            g,
            Dim::Two,
            &[vec![-1.0, 0.0], vec![0.0, 1.8], vec![1.0, 0.0]],
        )
        .unwrap();
        let report = classify(&fw, RigidityKind::DistanceSign2D, &RankPolicy::default()).unwrap();
        assert!(report.is_rigid);
        assert!(report.is_minimal);
        assert_eq!(report.proposition_check, Some(false));
        assert!(report.sine_ambiguity_warning);

        // Adding the third edge restores the classical backup; no warning.
        let g = Graph::new(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![],
            vec![(1, 0, 2)],
            vec![],
        )
        .unwrap();
        let fw = Framework::new(
            g,
            Dim::Two,
            &[vec![-1.0, 0.0], vec![0.0, 1.8], vec![1.0, 0.0]],
        )
        .unwrap();
        let report = classify(&fw, RigidityKind::DistanceSign2D, &RankPolicy::default()).unwrap();
        assert!(report.is_rigid);
        assert_eq!(report.proposition_check, Some(true));
        assert!(!report.sine_ambiguity_warning);
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let g = Graph::new(3, vec![(0, 1)], vec![], vec![], vec![]).unwrap();
        let fw = Framework::new(
            g,
            Dim::Three,
            &[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        )
        .unwrap();
        assert!(matches!(
            assemble_rigidity_matrix(&fw, RigidityKind::DistanceSign2D, 1.0),
            Err(RigidityError::KindMismatch { .. })
        ));
    }

    #[test]
    fn volume_rows_annihilate_3d_rotations() {
        let g = Graph::new(4, vec![], vec![], vec![], vec![(0, 1, 2, 3)]).unwrap();
        let fw = Framework::new(
            g,
            Dim::Three,
            &[
                vec![0.3, -0.2, 0.1],
                vec![1.7, 0.4, -0.3],
                vec![-0.5, 1.9, 0.8],
                vec![0.2, 0.6, 2.1],
            ],
        )
        .unwrap();
        let rows = signed_volume_rows(&fw);
        for sigma in 0..3 {
            let gen = rot3(sigma);
            let mut v = DVector::zeros(fw.dof());
            for vertex in 0..fw.n() {
                let rv = gen * fw.pos3(vertex);
                v[3 * vertex] = rv.x;
                v[3 * vertex + 1] = rv.y;
                v[3 * vertex + 2] = rv.z;
            }
            let residual: f64 = rows[0]
                .iter()
                .zip(v.iter())
                .map(|(r, x)| r * x)
                .sum();
            assert_abs_diff_eq!(residual, 0.0, epsilon = 1e-12);
        }
    }
}

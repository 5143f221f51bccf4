//! Controller-level integration checks beyond the acceptance scenarios:
//! the weak baseline, and scale-freedom of the angle-signed flow.

use formation_rigidity::*;
use nalgebra::DVector;

/// Angle-family triangle: two cosines plus one signed sine, no edges.
fn angle_triangle() -> Framework {
    let g = Graph::new(
        3,
        vec![],
        vec![(0, 1, 2), (2, 0, 1)],
        vec![(1, 0, 2)],
        vec![],
    )
    .unwrap();
    Framework::new(
        g,
        Dim::Two,
        &[vec![-1.0, 0.0], vec![0.2, 1.7], vec![1.1, -0.1]],
    )
    .unwrap()
}

#[test]
fn angle_signed_flow_is_scale_free() {
    let reference = angle_triangle();
    let report = classify(&reference, RigidityKind::AngleSign2D, &RankPolicy::default()).unwrap();
    assert!(report.is_rigid, "rank {} of {}", report.numerical_rank, report.target_rank);

    let targets = ConstraintTargets::from_framework(&reference, 2.0).unwrap();
    // Start scaled up by 1.3 plus a small perturbation: the angle targets say
    // nothing about scale, so the flow should settle at a similar (not
    // congruent) shape.
    let mut start: DVector<f64> = reference.realization() * 1.3;
    let bump = perturbed_realization(&reference, 0.03, 5);
    for i in 0..start.len() {
        start[i] += bump[i] - reference.realization()[i];
    }
    let config = SimulationConfig {
        framework: reference.with_realization_unchecked(start),
        targets: targets.clone(),
        controller: ControllerKind::AngleSigned,
        integrator: IntegratorSettings {
            step: 1e-3,
            horizon: 60.0,
        },
        stop_tolerance: 1e-8,
    };
    let traj = simulate(&config).unwrap();
    assert_eq!(traj.terminal_status, TerminalStatus::Converged);
    assert!(traj.energy_monotone(1e-9));
    assert!(traj.tail_log_slope().unwrap() < 0.0);

    let amb = ambiguity_metrics(
        &traj,
        &config.framework,
        &targets,
        ControllerKind::AngleSigned,
        Some(&reference),
        1e-6,
    );
    assert_eq!(amb.similar_to_reference, Some(true));
    assert_eq!(amb.congruent_to_reference, Some(false), "scale stayed off 1");
    assert!(!amb.flip_flagged);
    assert!(!amb.flex_flagged);

    // Centroid pinned here too: angle rows are translation-free.
    let first = &traj.samples[0].realization;
    let last = &traj.last().realization;
    for a in 0..2 {
        let c0: f64 = (0..3).map(|v| first[2 * v + a]).sum::<f64>() / 3.0;
        let c1: f64 = (0..3).map(|v| last[2 * v + a]).sum::<f64>() / 3.0;
        assert!((c0 - c1).abs() <= 1e-9, "axis {a}: {c0} vs {c1}");
    }
}

#[test]
fn weak_and_angle_velocities_match_energy_gradient() {
    // u = -grad(phi) must hold for the weak baseline (doubled distance
    // entries) and the angle-signed controller too.
    let weak_fw = weak_fixture();
    let angle_fw = angle_triangle();
    let cases = [
        (ControllerKind::WeakBaseline, &weak_fw, 1.0),
        (ControllerKind::AngleSigned, &angle_fw, 2.0),
    ];
    for (controller, reference, k) in cases {
        let targets = ConstraintTargets::from_framework(reference, k).unwrap();
        let start = reference
            .with_realization_unchecked(perturbed_realization(reference, 0.04, 29));
        let u = control_velocity(&start, &targets, controller).unwrap();
        let phi = |p: &DVector<f64>| {
            let moved = reference.with_realization_unchecked(p.clone());
            let e = formation_error(&moved, &targets, controller).unwrap();
            0.5 * e.norm_squared()
        };
        let grad =
            oracle::finite_difference_jacobian(phi, start.realization(), 1e-6).unwrap();
        for q in 0..u.len() {
            let want = -grad[q];
            let denom = want.abs().max(u[q].abs()).max(1e-8);
            assert!(
                (u[q] - want).abs() / denom <= 1e-5,
                "{controller:?} component {q}: {} vs {}",
                u[q],
                want
            );
        }
    }
}

fn weak_fixture() -> Framework {
    let g = Graph::new(
        4,
        vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)],
        vec![(0, 1, 3)],
        vec![],
        vec![],
    )
    .unwrap();
    Framework::new(
        g,
        Dim::Two,
        &[
            vec![0.0, 1.2],
            vec![-1.0, 0.0],
            vec![0.1, -1.1],
            vec![1.8, 0.2],
        ],
    )
    .unwrap()
}

#[test]
fn weak_baseline_converges_locally() {
    // Distances plus one unsigned angle, integrated under the weak-rigidity
    // baseline.
    let reference = weak_fixture();
    let targets = ConstraintTargets::from_framework(&reference, 1.0).unwrap();
    let config = SimulationConfig {
        framework: reference.with_realization_unchecked(perturbed_realization(&reference, 0.04, 13)),
        targets,
        controller: ControllerKind::WeakBaseline,
        integrator: IntegratorSettings::default(),
        stop_tolerance: 1e-8,
    };
    let traj = simulate(&config).unwrap();
    assert_eq!(traj.terminal_status, TerminalStatus::Converged);
    assert!(traj.energy_monotone(1e-9));
}

#[test]
fn angle_volume_flow_converges_in_3d() {
    // Tetrahedral angle base: five cosines and one signed volume. Kept at
    // unit scale: cosine-row magnitudes go as 1/edge-length, so the slow
    // Hessian mode of a larger tetrahedron would drag the tail out for
    // minutes of simulated time.
    let g = Graph::new(
        4,
        vec![],
        vec![(0, 1, 2), (2, 0, 1), (1, 3, 0), (3, 0, 1), (3, 1, 2)],
        vec![],
        vec![(3, 0, 1, 2)],
    )
    .unwrap();
    let reference = Framework::new(
        g,
        Dim::Three,
        &[
            vec![0.0, 0.0, 0.05],
            vec![1.0, 0.1, -0.05],
            vec![0.5, 0.95, 0.0],
            vec![0.45, 0.35, 0.9],
        ],
    )
    .unwrap();
    let report = classify(&reference, RigidityKind::AngleVolume3D, &RankPolicy::default()).unwrap();
    assert!(report.is_rigid, "rank {} of {}", report.numerical_rank, report.target_rank);

    let targets = ConstraintTargets::from_framework(&reference, 2.0).unwrap();
    let config = SimulationConfig {
        framework: reference
            .with_realization_unchecked(perturbed_realization(&reference, 0.03, 19)),
        targets: targets.clone(),
        controller: ControllerKind::AngleSigned,
        integrator: IntegratorSettings {
            step: 2e-3,
            horizon: 250.0,
        },
        stop_tolerance: 1e-8,
    };
    let traj = simulate(&config).unwrap();
    assert_eq!(traj.terminal_status, TerminalStatus::Converged);
    let amb = ambiguity_metrics(
        &traj,
        &config.framework,
        &targets,
        ControllerKind::AngleSigned,
        Some(&reference),
        1e-6,
    );
    assert_eq!(amb.similar_to_reference, Some(true));
    assert!(amb.sign_agreement.iter().all(|ok| *ok));
}

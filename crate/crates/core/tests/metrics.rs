use std::f64::consts::PI;

use bingham_core::metrics::*;
use bingham_core::mixture::PoseHypothesis;
use bingham_core::quaternion::rot_z;
use bingham_core::scene::Pose;
use bingham_core::UnitQuaternion;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pose(angle_deg: f64, t: [f64; 3]) -> Pose {
    Pose {
        rotation: rot_z(angle_deg.to_radians()),
        translation: t,
    }
}

fn hyp(p: Pose, weight: f64, entropy: f64) -> PoseHypothesis {
    PoseHypothesis {
        rotation: p.rotation,
        translation: p.translation,
        weight,
        rot_entropy: entropy,
        trans_entropy: 0.0,
        combined_uncertainty: 0.0,
    }
}

#[test]
fn recall_counts() {
    let spec = RecallSpec::new(10.0, 0.1).unwrap();
    let truth = vec![pose(0.0, [0.0; 3]); 4];
    assert_eq!(recall(&truth, &truth, &spec).unwrap(), 1.0);

    // two inside, one off in rotation, one off in translation
    let preds = vec![
        pose(5.0, [0.0; 3]),
        pose(0.0, [0.05, 0.0, 0.0]),
        pose(30.0, [0.0; 3]),
        pose(0.0, [0.5, 0.0, 0.0]),
    ];
    assert_eq!(recall(&preds, &truth, &spec).unwrap(), 0.5);

    assert_eq!(recall(&[], &[], &spec), Err(MetricsError::EmptyInput));
    assert!(matches!(
        recall(&preds[..2], &truth, &spec),
        Err(MetricsError::LengthMismatch { .. })
    ));
    assert_eq!(
        RecallSpec::new(0.0, 1.0),
        Err(MetricsError::InvalidThreshold)
    );
}

#[test]
fn oracle_picks_the_closest_hypothesis() {
    let truth = [pose(0.0, [0.0; 3])];
    let single = oracle_error(&[vec![pose(20.0, [0.0; 3])]], &truth).unwrap();
    assert!((single[0].rot_deg - 20.0).abs() < 1e-9);

    let sets = [vec![
        pose(20.0, [0.0; 3]),
        pose(-3.0, [0.0; 3]),
        pose(90.0, [0.0; 3]),
    ]];
    let e = oracle_error(&sets, &truth).unwrap();
    assert!((e[0].rot_deg - 3.0).abs() < 1e-9);

    // a nearer rotation with a far translation loses to a balanced one
    let sets = [vec![
        pose(1.0, [1.0, 0.0, 0.0]),
        pose(10.0, [0.1, 0.0, 0.0]),
    ]];
    let e = oracle_error(&sets, &truth).unwrap();
    assert!((e[0].rot_deg - 10.0).abs() < 1e-9);
    assert!((e[0].trans - 0.1).abs() < 1e-12);

    assert_eq!(
        oracle_error(&[vec![]], &truth),
        Err(MetricsError::EmptyInput)
    );
}

#[test]
fn semd_closed_form() {
    let q = UnitQuaternion::IDENTITY;
    assert_eq!(semd(&[q], &[1.0]).unwrap(), 0.0);
    assert_eq!(semd(&[q, q, q], &[0.2, 0.5, 0.3]).unwrap(), 0.0);

    // equal weights, π/2 apart: half the mass travels π/2
    let r = rot_z(PI / 2.0);
    assert!((semd(&[q, r], &[0.5, 0.5]).unwrap() - 0.25 * PI).abs() < 1e-12);

    // the heaviest hypothesis is the reference
    let v = semd(&[q, r], &[0.2, 0.8]).unwrap();
    assert!((v - 0.2 * PI / 2.0).abs() < 1e-12);
}

#[test]
fn chamfer_examples() {
    let p = [[0.0, 0.0, 0.0]];
    let q = [[1.0, 0.0, 0.0]];
    assert_eq!(chamfer(&p, &q).unwrap(), 1.0);
    let cloud = [[0.0, 1.0, 2.0], [1.0, -1.0, 0.5], [3.0, 0.0, 0.0]];
    assert_eq!(chamfer(&cloud, &cloud).unwrap(), 0.0);
    let moved = [
        [0.1, 1.0, 2.0],
        [1.0, -1.0, 0.0],
        [3.0, 0.3, 0.0],
        [0.0, 0.0, 0.0],
    ];
    assert_eq!(
        chamfer(&cloud, &moved).unwrap(),
        chamfer(&moved, &cloud).unwrap()
    );
    assert_eq!(chamfer(&[], &q), Err(MetricsError::EmptyInput));
}

#[test]
fn mode_detection_examples() {
    let spec = RecallSpec::rotation_only(5.0).unwrap();
    let modes: Vec<Pose> = (0..4).map(|j| pose(90.0 * j as f64, [0.0; 3])).collect();
    assert_eq!(
        mode_detection_rate(&[modes.clone()], &[modes.clone()], &spec).unwrap(),
        1.0
    );

    // one hypothesis cannot cover modes further apart than the threshold
    let one = vec![pose(2.0, [0.0; 3])];
    assert_eq!(
        mode_detection_rate(&[one], &[modes.clone()], &spec).unwrap(),
        0.25
    );

    // cyclic_4 enumeration: three hypotheses near three of the four modes,
    // one of them outside 5°, over two samples
    let hs = vec![
        pose(1.0, [0.0; 3]),
        pose(93.0, [0.0; 3]),
        pose(172.0, [0.0; 3]),
    ];
    let rate =
        mode_detection_rate(&[hs.clone(), modes.clone()], &[modes.clone(), modes], &spec).unwrap();
    assert_eq!(rate, (2.0 + 4.0) / 8.0);

    let with_t = RecallSpec::new(5.0, 0.1).unwrap();
    let far = vec![pose(0.0, [1.0, 0.0, 0.0])];
    assert_eq!(
        mode_detection_rate(&[far], &[vec![pose(0.0, [0.0; 3])]], &with_t).unwrap(),
        0.0
    );
}

#[test]
fn pruning_curve_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let errors: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..10.0)).collect();
    let fractions = default_fractions(10);
    assert_eq!(fractions.len(), 10);
    assert_eq!(fractions[0], 1.0);

    let exact = pruning_curve(&errors, &errors, &fractions).unwrap();
    for w in exact.windows(2) {
        assert!(w[1].mean_error <= w[0].mean_error);
    }
    assert!(exact.windows(2).all(|w| w[1].threshold <= w[0].threshold));

    let overall = errors.iter().sum::<f64>() / errors.len() as f64;
    let flat = pruning_curve(&errors, &vec![1.0; errors.len()], &fractions).unwrap();
    assert!((flat[0].mean_error - overall).abs() < 1e-12);

    // unrelated uncertainty: the curve stays within sampling noise of the mean
    let mut perm: Vec<f64> = (0..errors.len()).map(|i| i as f64).collect();
    perm.shuffle(&mut rng);
    let noise = pruning_curve(&errors, &perm, &fractions).unwrap();
    for p in &noise {
        // standard error of a mean of uniform[0,10] draws is 2.89/√n
        let se = 10.0 / 12f64.sqrt() / (p.kept as f64).sqrt();
        assert!((p.mean_error - overall).abs() < 4.0 * se, "{p:?}");
    }

    assert_eq!(
        pruning_curve(&errors, &errors, &[0.0]),
        Err(MetricsError::InvalidFraction)
    );
    assert_eq!(
        pruning_curve(&[], &[], &fractions),
        Err(MetricsError::EmptyInput)
    );
}

#[test]
fn threshold_table_counts() {
    let errors = [1.0, 2.0, 3.0, 4.0];
    let unc = [0.1, 0.2, 0.3, 0.4];
    let rows = threshold_table(&errors, &unc, &[0.05, 0.25, 1.0]).unwrap();
    assert_eq!(rows[0].count, 0);
    assert_eq!(rows[0].mean_error, None);
    assert_eq!(rows[1].count, 2);
    assert_eq!(rows[1].mean_error, Some(1.5));
    assert_eq!(rows[2].mean_error, Some(2.5));
}

#[test]
fn evaluate_perfect_predictions() {
    let modes: Vec<Pose> = (0..2)
        .map(|j| pose(180.0 * j as f64 + 10.0, [0.2, 0.0, 0.0]))
        .collect();
    let samples: Vec<EvalSample> = (0..5)
        .map(|_| EvalSample {
            hypotheses: vec![hyp(modes[0], 0.6, -1.0), hyp(modes[1], 0.4, -1.0)],
            truth: modes[0],
            modes: modes.clone(),
        })
        .collect();
    let specs = [
        RecallSpec::new(10.0, 0.1).unwrap(),
        RecallSpec::new(20.0, 0.3).unwrap(),
    ];
    let fractions = default_fractions(4);
    let template = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.7]];
    let r = evaluate(
        &samples,
        &EvalOptions {
            recall_specs: &specs,
            detection_spec: RecallSpec::new(5.0, 0.1).unwrap(),
            fractions: &fractions,
            uncertainty_thresholds: &[],
            template: Some(&template),
        },
    )
    .unwrap();
    assert!(r
        .recall
        .iter()
        .all(|e| e.recall == 1.0 && e.oracle_recall == 1.0));
    assert_eq!(r.mode_detection_rate, 1.0);
    assert!(r.median_rot_deg < 1e-6);
    assert_eq!(r.oracle.len(), 2);
    assert!((r.semd - 0.4 * PI).abs() < 1e-9);
    assert!(r.chamfer.unwrap().mean < 1e-9);
    assert_eq!(r.pruning.len(), 4);
}

use bingham_core::bingham::{LogNormalizer, Normalizer};
use bingham_core::losses::Scheme;
use bingham_core::orientation::{orthonormality_residual, VStrategy};
use bingham_core::quaternion::{geodesic_distance, rot_z};
use bingham_core::scene::{generate_scene, sorted_features, SceneKind};
use bingham_core::trainer::*;
use bingham_core::{NormalizationTable, Quadrature, TableSpec};

fn small_table() -> NormalizationTable {
    NormalizationTable::build(TableSpec::cube(-60.0, 0.0, 8), &Quadrature::new(16)).unwrap()
}

fn small_cfg(scheme: Scheme, m: usize) -> TrainConfig {
    TrainConfig {
        epochs: 12,
        batch_size: 16,
        scheme,
        components: m,
        hidden: vec![16, 16],
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn forward_examples() {
    let table = small_table();
    let scene = generate_scene(SceneKind::Cyclic(3), 4, 1).unwrap();
    let x = &scene.samples[0].input;

    let ubn = ToyNetwork::new(scene.input_len(), &small_cfg(Scheme::Ubn, 1), false).unwrap();
    let p = ubn.forward(x, &table).unwrap();
    let d = p.as_distribution().expect("one component");
    assert!(orthonormality_residual(d.v().matrix()) < 1e-10);
    let l = d.lambda().lambdas();
    assert!(l[0] <= 0.0 && l[1] <= l[0] && l[2] <= l[1]);

    let mbn = ToyNetwork::new(scene.input_len(), &small_cfg(Scheme::Mbn, 5), false).unwrap();
    let a = mbn.forward(x, &table).unwrap();
    let b = mbn.forward(x, &table).unwrap();
    assert_eq!(a.rotation, b.rotation);
    assert!(a.as_distribution().is_none());
    assert!((a.rotation.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);

    assert!(mbn.forward(&x[1..], &table).is_err());
}

#[test]
fn head_size_follows_strategy_and_components() {
    for (s, m, t, len) in [
        (VStrategy::Birdal, 1, false, 8),
        (VStrategy::Birdal, 10, false, 80),
        (VStrategy::GramSchmidt, 2, false, 40),
        (VStrategy::Cayley, 3, true, 42),
    ] {
        let cfg = TrainConfig {
            strategy: s,
            components: m,
            scheme: if m == 1 { Scheme::Ubn } else { Scheme::Mbn },
            ..TrainConfig::default()
        };
        let net = ToyNetwork::new(9, &cfg, t).unwrap();
        assert_eq!(net.mlp().output_len(), len);
        assert_eq!(net.mlp().sizes(), &[9, 64, 128, 128, len]);
    }
}

#[test]
fn hypotheses_are_sorted_and_delegate_entropy() {
    let table = small_table();
    let scene = generate_scene(SceneKind::Cyclic(4), 3, 2).unwrap();
    let net = ToyNetwork::new(scene.input_len(), &small_cfg(Scheme::Mbn, 6), false).unwrap();
    let x = &scene.samples[1].input;
    let hs = predict_hypotheses(&net, x, &table).unwrap();
    assert_eq!(hs.len(), 6);
    assert!(hs.windows(2).all(|w| w[0].weight >= w[1].weight));
    let mix = net.forward(x, &table).unwrap().rotation;
    for h in &hs {
        let c = mix
            .components()
            .iter()
            .find(|c| c.mode() == h.rotation)
            .unwrap();
        assert_eq!(c.entropy(), h.rot_entropy);
    }

    let one = ToyNetwork::new(scene.input_len(), &small_cfg(Scheme::Ubn, 1), false).unwrap();
    let hs = predict_hypotheses(&one, x, &table).unwrap();
    assert_eq!(hs.len(), 1);
    assert_eq!(hs[0].weight, 1.0);
}

#[test]
fn training_is_reproducible_and_loss_falls() {
    let table = small_table();
    let scene = generate_scene(SceneKind::Cyclic(2), 256, 3).unwrap();
    for scheme in Scheme::ALL {
        let m = if scheme == Scheme::Ubn { 1 } else { 3 };
        let cfg = small_cfg(scheme, m);
        let mut a = ToyNetwork::new(scene.input_len(), &cfg, false).unwrap();
        let mut b = a.clone();
        let ra = train(&mut a, &scene, &cfg, &table).unwrap();
        let rb = train(&mut b, &scene, &cfg, &table).unwrap();
        let bits = |r: &TrainReport| r.loss_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ra), bits(&rb), "{scheme:?}");
        assert_eq!(a, b);
        assert_eq!(ra.loss_trace.len(), 12);
        let (first, last) = ra.trend(3);
        assert!(last < first, "{scheme:?}: {first} -> {last}");
    }
}

#[test]
fn staged_training_with_translation() {
    let table = small_table();
    let scene = generate_scene(SceneKind::AmbiguousViews(2), 256, 4).unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        ..small_cfg(Scheme::Mbn, 2)
    };
    let mut net = ToyNetwork::new(scene.input_len(), &cfg, true).unwrap();
    let rep = train(&mut net, &scene, &cfg, &table).unwrap();
    let (first, last) = rep.trend(2);
    assert!(last < first);
    let p = net.forward(&scene.samples[0].input, &table).unwrap();
    assert_eq!(p.translation.unwrap().components().len(), 2);

    // a translation head needs translation labels
    let cloud = generate_scene(SceneKind::Cyclic(2), 8, 4).unwrap();
    let mut other = ToyNetwork::new(cloud.input_len(), &cfg, true).unwrap();
    assert!(matches!(
        train(&mut other, &cloud, &cfg, &table),
        Err(TrainError::Config(_))
    ));
}

struct Broken;

impl Normalizer for Broken {
    fn log_normalizer(&self, _: [f64; 3]) -> LogNormalizer {
        LogNormalizer {
            log_f: f64::NAN,
            grad: [0.0; 3],
            clamped: [false; 3],
        }
    }
}

#[test]
fn non_finite_loss_aborts() {
    let scene = generate_scene(SceneKind::Cyclic(1), 16, 1).unwrap();
    let cfg = small_cfg(Scheme::Ubn, 1);
    let mut net = ToyNetwork::new(scene.input_len(), &cfg, false).unwrap();
    let err = train(&mut net, &scene, &cfg, &Broken).unwrap_err();
    assert!(
        matches!(
            err,
            TrainError::DivergenceDetected {
                epoch: 0,
                batch: 0,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn mismatched_inputs_are_rejected() {
    let table = small_table();
    let scene = generate_scene(SceneKind::Cyclic(3), 8, 1).unwrap();
    let cfg = small_cfg(Scheme::Mbn, 2);
    let mut net = ToyNetwork::new(scene.input_len() + 3, &cfg, false).unwrap();
    assert!(matches!(
        train(&mut net, &scene, &cfg, &table),
        Err(TrainError::SceneMismatch { .. })
    ));
    let other = TrainConfig {
        components: 4,
        ..cfg.clone()
    };
    let mut net = ToyNetwork::new(scene.input_len(), &cfg, false).unwrap();
    assert!(matches!(
        train(&mut net, &scene, &other, &table),
        Err(TrainError::Config(_))
    ));
}

#[test]
fn scene_examples() {
    let c1 = generate_scene(SceneKind::Cyclic(1), 50, 1).unwrap();
    assert!(c1.samples.iter().all(|s| s.modes.len() == 1));

    let k4 = SceneKind::Cyclic(4);
    let tmpl = k4.template();
    let turned: Vec<[f64; 3]> = tmpl
        .iter()
        .map(|p| rot_z(std::f64::consts::FRAC_PI_2).rotate(*p))
        .collect();
    for (a, b) in sorted_features(turned).iter().zip(&sorted_features(tmpl)) {
        assert!((a - b).abs() < 1e-12);
    }

    let c2 = generate_scene(SceneKind::Cyclic(2), 50, 2).unwrap();
    for s in &c2.samples {
        let flipped = s.pose.rotation.compose(&rot_z(std::f64::consts::PI));
        assert_eq!(s.modes.len(), 2);
        assert!(s
            .modes
            .iter()
            .any(|m| geodesic_distance(&m.rotation, &flipped).radians() < 1e-6));
        assert!(geodesic_distance(&s.modes[0].rotation, &s.modes[1].rotation).degrees() > 179.0);
    }
}

#[test]
fn mode_sets_are_closed_under_symmetry() {
    for kind in [
        SceneKind::Cyclic(3),
        SceneKind::Cyclic(4),
        SceneKind::AmbiguousViews(2),
    ] {
        let scene = generate_scene(kind, 20, 8).unwrap();
        for s in &scene.samples {
            assert_eq!(s.modes.len(), kind.order());
            for m in &s.modes {
                for g in kind.symmetries() {
                    let image = if kind.has_translation() {
                        g.compose(&m.rotation)
                    } else {
                        m.rotation.compose(&g)
                    };
                    assert!(s
                        .modes
                        .iter()
                        .any(|n| geodesic_distance(&n.rotation, &image).radians() < 1e-6));
                }
            }
        }
    }
}

//! Central finite-difference checks of every loss gradient.

use bingham_core::bingham::Quadrature;
use bingham_core::losses::*;
use bingham_core::quaternion::UnitQuaternion;
use bingham_core::VStrategy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
// absorbs rounding in the difference quotient for near-zero components
const ABS_FLOOR: f64 = 1e-8;
const POINTS: usize = 100;

fn check(name: &str, raw: &[f64], f: &dyn Fn(&[f64]) -> (f64, Vec<f64>)) {
    let (_, analytic) = f(raw);
    assert_eq!(analytic.len(), raw.len(), "{name}: gradient length");
    let mut x = raw.to_vec();
    for k in 0..raw.len() {
        x[k] = raw[k] + STEP;
        let up = f(&x).0;
        x[k] = raw[k] - STEP;
        let down = f(&x).0;
        x[k] = raw[k];
        let fd = (up - down) / (2.0 * STEP);
        let a = analytic[k];
        assert!(a.is_finite(), "{name}: non-finite gradient at {k}");
        let tol = REL_TOL * a.abs().max(fd.abs()) + ABS_FLOOR;
        assert!(
            (a - fd).abs() <= tol,
            "{name}: component {k}: analytic {a} vs fd {fd} (raw {raw:?})"
        );
    }
}

fn random_raw(layout: HeadLayout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut raw: Vec<f64> = (0..layout.len())
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    for i in 0..layout.components {
        for k in layout.lambda_range(i) {
            raw[k] = rng.random_range(-3.0..2.5);
        }
        raw[layout.logit_index(i)] = rng.random_range(-2.0..2.0);
    }
    raw
}

fn quad() -> Quadrature {
    Quadrature::new(20)
}

fn head_check(
    name: &str,
    layout: HeadLayout,
    seed: u64,
    loss: &dyn Fn(&Head, &UnitQuaternion, [f64; 3]) -> LossValue,
) {
    let q = quad();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..POINTS {
        let raw = random_raw(layout, &mut rng);
        let target = UnitQuaternion::random(&mut rng);
        let t: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        check(name, &raw, &|r| {
            let head = Head::decode(layout, r, &q).unwrap();
            let l = loss(&head, &target, t);
            (l.value, l.grad)
        });
    }
}

#[test]
fn bingham_nll_all_strategies() {
    for (s, strategy) in [VStrategy::Birdal, VStrategy::Cayley, VStrategy::GramSchmidt]
        .into_iter()
        .enumerate()
    {
        head_check(
            strategy.name(),
            HeadLayout::new(1, strategy, false),
            10 + s as u64,
            &|h, q, _| bingham_nll(h, q).unwrap(),
        );
    }
}

#[test]
fn mixture_bingham_nll_gradient() {
    head_check(
        "mixture",
        HeadLayout::new(3, VStrategy::Birdal, false),
        20,
        &|h, q, _| mixture_bingham_nll(h, q).unwrap(),
    );
    head_check(
        "mixture-cayley",
        HeadLayout::new(2, VStrategy::Cayley, false),
        21,
        &|h, q, _| mixture_bingham_nll(h, q).unwrap(),
    );
}

#[test]
fn wta_family_gradients() {
    let layout = HeadLayout::new(4, VStrategy::Birdal, false);
    for (v, variant) in [WtaVariant::Wta, WtaVariant::Rwta, WtaVariant::Ewta]
        .into_iter()
        .enumerate()
    {
        for selection in [Selection::L1, Selection::Probability] {
            let cfg = RwtaConfig {
                variant,
                selection,
                ewta_k: 2,
                ..RwtaConfig::default()
            };
            head_check("rwta", layout, 30 + v as u64, &|h, q, _| {
                rwta_loss(h, q, &cfg).unwrap()
            });
        }
    }
}

#[test]
fn cross_entropy_gradient() {
    let layout = HeadLayout::new(5, VStrategy::Birdal, false);
    head_check("ce", layout, 40, &|h, q, _| {
        cross_entropy_loss(h, q, Selection::Probability)
    });
}

#[test]
fn combined_scheme_gradients() {
    let layout = HeadLayout::new(3, VStrategy::Birdal, false);
    let cfg = RwtaConfig {
        ewta_k: 2,
        ..RwtaConfig::default()
    };
    for scheme in [
        Scheme::MbnCe,
        Scheme::Mbn,
        Scheme::MbOnly,
        Scheme::Wta,
        Scheme::Ewta,
    ] {
        head_check(scheme.name(), layout, 50, &|h, q, _| {
            scheme_loss(h, q, scheme, &cfg).unwrap()
        });
    }
    head_check(
        "ubn",
        HeadLayout::new(1, VStrategy::Birdal, false),
        51,
        &|h, q, _| scheme_loss(h, q, Scheme::Ubn, &cfg).unwrap(),
    );
}

#[test]
fn gaussian_nll_gradients() {
    for m in [1, 3] {
        head_check(
            "gaussian",
            HeadLayout::new(m, VStrategy::Birdal, true),
            60 + m as u64,
            &|h, _, t| gaussian_nll(h, t).unwrap(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..POINTS {
        let raw: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
        let t: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        check("gaussian-component", &raw, &|r| {
            let (v, g) = gaussian_component_nll([r[0], r[1], r[2]], [r[3], r[4], r[5]], t);
            (v, g.to_vec())
        });
    }
}

#[test]
fn baseline_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let points: Vec<[f64; 3]> = (0..6)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    for _ in 0..POINTS {
        let raw: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = UnitQuaternion::random(&mut rng);
        let arr = |r: &[f64]| [r[0], r[1], r[2], r[3]];
        check("l1", &raw, &|r| {
            let (v, g) = l1_baseline(arr(r), &q);
            (v, g.to_vec())
        });
        check("cosine", &raw, &|r| {
            let (v, g) = cosine_baseline(arr(r), &q);
            (v, g.to_vec())
        });
        check("ploss", &raw, &|r| {
            let (v, g) = ploss_baseline(arr(r), &q, &points);
            (v, g.to_vec())
        });
    }
}

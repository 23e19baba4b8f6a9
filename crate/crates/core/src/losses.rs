//! Training objectives with gradients with respect to the raw head outputs.
//!
//! A head of `M` components is laid out component by component. Each block
//! holds three `Λ` raws, the raws of the chosen `V` construction, one weight
//! logit and, when translation is modeled, three mean and three raw variance
//! values:
//!
//! ```text
//! [ λ-raw ×3 | V-raw ×(4 or 16) | logit | (mean ×3 | var-raw ×3) ] × M
//! ```
//!
//! Every loss returns a [`LossValue`] whose gradient is aligned with that
//! layout.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::{Matrix4, Vector4};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::bingham::{BinghamDistribution, LogNormalizer, Normalizer};
use crate::mixture::{
    argmax_first, log_sum_exp, BinghamMixture, GaussianComponent, GaussianMixture, WEIGHT_FLOOR,
};
use crate::orientation::{
    lambda_backward, sigmoid, ConcentrationMatrix, OrientationError, VStrategy,
};
use crate::quaternion::{quaternion_l1, rotation_matrix, rotation_matrix_jacobian, QuatCoords};

/// Probabilities entering the cross-entropy are kept inside `[1e-12, 1 − 1e-12]`.
pub const PROB_CLAMP: f64 = 1e-12;
pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("head has {actual} raw values, layout expects {expected}")]
    HeadSize { expected: usize, actual: usize },
    #[error(transparent)]
    Orientation(#[from] OrientationError),
    #[error("layout has no translation outputs")]
    NoTranslation,
    #[error("scheme {scheme} needs {needs} component(s), head has {actual}")]
    ComponentCount {
        scheme: &'static str,
        needs: &'static str,
        actual: usize,
    },
    #[error("invalid loss configuration: {0}")]
    Config(&'static str),
}

/// Shape of the raw output vector of a mixture head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadLayout {
    pub components: usize,
    pub strategy: VStrategy,
    pub translation: bool,
}

impl HeadLayout {
    pub fn new(components: usize, strategy: VStrategy, translation: bool) -> Self {
        Self {
            components,
            strategy,
            translation,
        }
    }

    pub fn component_len(&self) -> usize {
        3 + self.strategy.raw_len() + 1 + if self.translation { 6 } else { 0 }
    }

    pub fn len(&self) -> usize {
        self.components * self.component_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn start(&self, i: usize) -> usize {
        i * self.component_len()
    }

    pub fn lambda_range(&self, i: usize) -> Range<usize> {
        let s = self.start(i);
        s..s + 3
    }

    pub fn v_range(&self, i: usize) -> Range<usize> {
        let s = self.start(i) + 3;
        s..s + self.strategy.raw_len()
    }

    pub fn logit_index(&self, i: usize) -> usize {
        self.start(i) + 3 + self.strategy.raw_len()
    }

    pub fn mean_range(&self, i: usize) -> Range<usize> {
        let s = self.logit_index(i) + 1;
        s..s + 3
    }

    pub fn variance_range(&self, i: usize) -> Range<usize> {
        let s = self.logit_index(i) + 4;
        s..s + 3
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn arr3(s: &[f64]) -> [f64; 3] {
    [s[0], s[1], s[2]]
}

/// Raw head outputs decoded into distributions.
#[derive(Debug, Clone)]
pub struct Head<'a> {
    layout: HeadLayout,
    raw: &'a [f64],
    components: Vec<BinghamDistribution>,
    clamped: Vec<[bool; 3]>,
    weights: Vec<f64>,
    gaussians: Vec<GaussianComponent>,
}

impl<'a> Head<'a> {
    pub fn decode(
        layout: HeadLayout,
        raw: &'a [f64],
        normalizer: &impl Normalizer,
    ) -> Result<Self, LossError> {
        if raw.len() != layout.len() || layout.components == 0 {
            return Err(LossError::HeadSize {
                expected: layout.len(),
                actual: raw.len(),
            });
        }
        let m = layout.components;
        let mut components = Vec::with_capacity(m);
        let mut clamped = Vec::with_capacity(m);
        for i in 0..m {
            let lambda = ConcentrationMatrix::from_raw(arr3(&raw[layout.lambda_range(i)]));
            let v = layout.strategy.build(&raw[layout.v_range(i)])?;
            let n: LogNormalizer = normalizer.log_normalizer(lambda.lambdas());
            clamped.push(n.clamped);
            components.push(BinghamDistribution::from_parts(v, lambda, n));
        }
        let logits: Vec<f64> = (0..m).map(|i| raw[layout.logit_index(i)]).collect();
        let gaussians = if layout.translation {
            (0..m)
                .map(|i| {
                    GaussianComponent::from_raw(
                        arr3(&raw[layout.mean_range(i)]),
                        arr3(&raw[layout.variance_range(i)]),
                    )
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            layout,
            raw,
            components,
            clamped,
            weights: softmax(&logits),
            gaussians,
        })
    }

    pub fn layout(&self) -> HeadLayout {
        self.layout
    }

    pub fn components(&self) -> &[BinghamDistribution] {
        &self.components
    }

    /// Softmax of the weight logits.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gaussians(&self) -> &[GaussianComponent] {
        &self.gaussians
    }

    /// Number of `λ` values that fell outside the normalizer's range.
    pub fn clamped_count(&self) -> usize {
        self.clamped.iter().flatten().filter(|c| **c).count()
    }

    pub fn mixture(&self) -> BinghamMixture {
        BinghamMixture::new(self.components.clone(), self.weights.clone())
            .expect("softmax weights are valid")
    }

    pub fn gaussian_mixture(&self) -> Option<GaussianMixture> {
        if !self.layout.translation {
            return None;
        }
        Some(
            GaussianMixture::new(self.gaussians.clone(), self.weights.clone())
                .expect("softmax weights are valid"),
        )
    }

    fn zero_grad(&self) -> Vec<f64> {
        vec![0.0; self.raw.len()]
    }

    /// Bingham NLL of component `i`; adds `scale · ∂/∂raw` into `grad`.
    fn component_nll(
        &self,
        i: usize,
        q: &impl QuatCoords,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64, LossError> {
        let d = &self.components[i];
        let x = Vector4::from(q.coords());
        let l = d.lambda().lambdas();
        let g = d.grad_log_f();
        let mut value = d.log_f();
        let mut grad_lambda = [0.0; 3];
        let mut grad_v = Matrix4::zeros();
        for j in 0..3 {
            let col = d.v().column(j + 1);
            let p = col.dot(&x);
            value -= l[j] * p * p;
            grad_lambda[j] = g[j] - p * p;
            grad_v.set_column(j + 1, &(x * (-2.0 * l[j] * p)));
        }
        if scale != 0.0 {
            let lr = self.layout.lambda_range(i);
            let gl = lambda_backward(arr3(&self.raw[lr.clone()]), grad_lambda);
            for (k, idx) in lr.enumerate() {
                grad[idx] += scale * gl[k];
            }
            let vr = self.layout.v_range(i);
            let gv = self
                .layout
                .strategy
                .backward(&self.raw[vr.clone()], &grad_v)?;
            for (k, idx) in vr.enumerate() {
                grad[idx] += scale * gv[k];
            }
        }
        Ok(value)
    }

    /// Component log densities at `q`.
    fn log_pdfs(&self, q: &impl QuatCoords) -> Vec<f64> {
        self.components.iter().map(|c| c.log_pdf(q)).collect()
    }

    /// Adds `∂L/∂logits` given `∂L/∂wᵢ` through the softmax.
    fn softmax_backward(&self, grad_w: &[f64], scale: f64, grad: &mut [f64]) {
        let dot: f64 = self.weights.iter().zip(grad_w).map(|(w, g)| w * g).sum();
        for k in 0..self.layout.components {
            grad[self.layout.logit_index(k)] += scale * self.weights[k] * (grad_w[k] - dot);
        }
    }

    /// `∂/∂logits` of `−log Σᵢ max(wᵢ, floor)·pᵢ` given responsibilities.
    fn mixture_logit_grad(&self, resp: &[f64], grad: &mut [f64]) {
        let live: Vec<bool> = self.weights.iter().map(|w| *w > WEIGHT_FLOOR).collect();
        let live_resp: f64 = resp
            .iter()
            .zip(&live)
            .filter(|(_, l)| **l)
            .map(|(r, _)| r)
            .sum();
        for k in 0..self.layout.components {
            let own = if live[k] { resp[k] } else { 0.0 };
            grad[self.layout.logit_index(k)] += self.weights[k] * live_resp - own;
        }
    }
}

/// A loss value and its gradient with respect to the raw head.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossValue {
    fn add(&mut self, other: LossValue) {
        self.value += other.value;
        for (a, b) in self.grad.iter_mut().zip(other.grad) {
            *a += b;
        }
    }
}

/// `log F(Λ) − qᵀVΛVᵀq` for the first component of `head`.
pub fn bingham_nll(head: &Head, q: &impl QuatCoords) -> Result<LossValue, LossError> {
    let mut grad = head.zero_grad();
    let value = head.component_nll(0, q, 1.0, &mut grad)?;
    Ok(LossValue { value, grad })
}

/// Negative log-likelihood of the whole mixture, with weights from the
/// softmax of the logits.
pub fn mixture_bingham_nll(head: &Head, q: &impl QuatCoords) -> Result<LossValue, LossError> {
    let lp = head.log_pdfs(q);
    let terms: Vec<f64> = head
        .weights
        .iter()
        .zip(&lp)
        .map(|(w, l)| w.max(WEIGHT_FLOOR).ln() + l)
        .collect();
    let total = log_sum_exp(terms.iter().copied());
    let resp: Vec<f64> = terms.iter().map(|t| (t - total).exp()).collect();
    let mut grad = head.zero_grad();
    for (i, r) in resp.iter().enumerate() {
        // ∂(−log p)/∂θ = r · ∂NLLᵢ/∂θ
        head.component_nll(i, q, *r, &mut grad)?;
    }
    head.mixture_logit_grad(&resp, &mut grad);
    Ok(LossValue {
        value: -total,
        grad,
    })
}

/// Criterion for picking the branch closest to the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// Smallest antipodal-aware ℓ₁ distance between `q` and the mode.
    L1,
    /// Largest component density at `q`.
    #[default]
    Probability,
}

impl Selection {
    pub fn name(self) -> &'static str {
        match self {
            Selection::L1 => "l1",
            Selection::Probability => "probability",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "l1" => Some(Selection::L1),
            "probability" => Some(Selection::Probability),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WtaVariant {
    Wta,
    #[default]
    Rwta,
    Ewta,
}

/// Branch weighting for the winner-takes-all family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwtaConfig {
    pub epsilon: f64,
    pub selection: Selection,
    pub variant: WtaVariant,
    /// Number of branches sharing the update under EWTA.
    pub ewta_k: usize,
}

impl Default for RwtaConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            selection: Selection::default(),
            variant: WtaVariant::Rwta,
            ewta_k: 1,
        }
    }
}

impl RwtaConfig {
    pub fn validate(&self, m: usize) -> Result<(), LossError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(LossError::Config("epsilon must lie in (0, 1)"));
        }
        if self.variant == WtaVariant::Ewta && !(1..=m).contains(&self.ewta_k) {
            return Err(LossError::Config("ewta_k must lie in [1, M]"));
        }
        Ok(())
    }
}

/// EWTA schedule: `k` starts at `m` and halves every `interval` epochs,
/// never dropping below 1.
pub fn ewta_k(m: usize, epoch: usize, interval: usize) -> usize {
    let halvings = epoch / interval.max(1);
    if halvings >= usize::BITS as usize {
        return 1;
    }
    (m >> halvings).max(1)
}

/// Branch ranking by the selection criterion, best first; ties keep index
/// order.
fn rank_branches(head: &Head, q: &impl QuatCoords, selection: Selection) -> Vec<usize> {
    let m = head.layout.components;
    let score: Vec<f64> = match selection {
        Selection::L1 => head
            .components
            .iter()
            .map(|c| -quaternion_l1(q, &c.mode()))
            .collect(),
        Selection::Probability => head.log_pdfs(q),
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| score[*b].total_cmp(&score[*a]).then(a.cmp(b)));
    order
}

/// Index of the best-matching branch; ties go to the lowest index.
pub fn select_branch(head: &Head, q: &impl QuatCoords, selection: Selection) -> usize {
    match selection {
        Selection::L1 => {
            let neg: Vec<f64> = head
                .components
                .iter()
                .map(|c| -quaternion_l1(q, &c.mode()))
                .collect();
            argmax_first(&neg)
        }
        Selection::Probability => argmax_first(&head.log_pdfs(q)),
    }
}

/// Per-branch weights `π` of the WTA family for ground truth `q`.
pub fn branch_weights(head: &Head, q: &impl QuatCoords, cfg: &RwtaConfig) -> Vec<f64> {
    let m = head.layout.components;
    let mut pi = vec![0.0; m];
    if m == 1 {
        pi[0] = 1.0;
        return pi;
    }
    match cfg.variant {
        WtaVariant::Wta => pi[select_branch(head, q, cfg.selection)] = 1.0,
        WtaVariant::Rwta => {
            pi.fill(cfg.epsilon / (m - 1) as f64);
            pi[select_branch(head, q, cfg.selection)] = 1.0 - cfg.epsilon;
        }
        WtaVariant::Ewta => {
            let k = cfg.ewta_k.clamp(1, m);
            for i in rank_branches(head, q, cfg.selection).into_iter().take(k) {
                pi[i] = 1.0 / k as f64;
            }
        }
    }
    pi
}

/// `Σᵢ πᵢ · NLLᵢ`. The selection is treated as constant and the mixture
/// weights receive no gradient.
pub fn rwta_loss(
    head: &Head,
    q: &impl QuatCoords,
    cfg: &RwtaConfig,
) -> Result<LossValue, LossError> {
    let pi = branch_weights(head, q, cfg);
    let mut grad = head.zero_grad();
    let mut value = 0.0;
    for (i, p) in pi.iter().enumerate() {
        if *p != 0.0 {
            value += p * head.component_nll(i, q, *p, &mut grad)?;
        }
    }
    Ok(LossValue { value, grad })
}

/// Binary cross-entropy of each weight against `one_hot(target)`.
/// Returns the value and `∂/∂wᵢ`; clamped entries get a zero derivative.
pub fn cross_entropy_weights(weights: &[f64], target: usize) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (i, w) in weights.iter().enumerate() {
        let c = w.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let inside = c == *w;
        if i == target {
            value -= c.ln();
            if inside {
                grad[i] = -1.0 / c;
            }
        } else {
            value -= (1.0 - c).ln();
            if inside {
                grad[i] = 1.0 / (1.0 - c);
            }
        }
    }
    (value, grad)
}

/// Cross-entropy on the head's softmax weights against the selected branch.
pub fn cross_entropy_loss(head: &Head, q: &impl QuatCoords, selection: Selection) -> LossValue {
    let target = select_branch(head, q, selection);
    let (value, gw) = cross_entropy_weights(&head.weights, target);
    let mut grad = head.zero_grad();
    head.softmax_backward(&gw, 1.0, &mut grad);
    LossValue { value, grad }
}

/// Training objective for the rotation part of a head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Single Bingham, negative log-likelihood.
    Ubn,
    /// RWTA + cross-entropy on the weights.
    MbnCe,
    /// Mixture likelihood + RWTA.
    #[default]
    Mbn,
    /// Mixture likelihood alone.
    MbOnly,
    /// Mixture likelihood + hard WTA.
    Wta,
    /// Mixture likelihood + evolving WTA.
    Ewta,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Ubn,
        Scheme::MbnCe,
        Scheme::Mbn,
        Scheme::MbOnly,
        Scheme::Wta,
        Scheme::Ewta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ubn => "ubn",
            Scheme::MbnCe => "mbn-ce",
            Scheme::Mbn => "mbn",
            Scheme::MbOnly => "mb-only",
            Scheme::Wta => "wta",
            Scheme::Ewta => "ewta",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn check_components(self, m: usize) -> Result<(), LossError> {
        match (self, m) {
            (_, 0) => Err(LossError::ComponentCount {
                scheme: self.name(),
                needs: "at least 1",
                actual: m,
            }),
            (Scheme::Ubn, m) if m != 1 => Err(LossError::ComponentCount {
                scheme: self.name(),
                needs: "exactly 1",
                actual: m,
            }),
            _ => Ok(()),
        }
    }
}

/// Evaluates `scheme` on `head` for ground truth `q`.
pub fn scheme_loss(
    head: &Head,
    q: &impl QuatCoords,
    scheme: Scheme,
    cfg: &RwtaConfig,
) -> Result<LossValue, LossError> {
    scheme.check_components(head.layout.components)?;
    let with = |variant| RwtaConfig { variant, ..*cfg };
    match scheme {
        Scheme::Ubn => bingham_nll(head, q),
        Scheme::MbnCe => {
            let mut l = rwta_loss(head, q, cfg)?;
            l.add(cross_entropy_loss(head, q, cfg.selection));
            Ok(l)
        }
        Scheme::Mbn => mbn_mb_rwta_loss(head, q, &with(WtaVariant::Rwta)),
        Scheme::MbOnly => mixture_bingham_nll(head, q),
        Scheme::Wta => mbn_mb_rwta_loss(head, q, &with(WtaVariant::Wta)),
        Scheme::Ewta => mbn_mb_rwta_loss(head, q, &with(WtaVariant::Ewta)),
    }
}

/// `L_CE + L_RWTA`.
pub fn mbn_ce_loss(
    head: &Head,
    q: &impl QuatCoords,
    cfg: &RwtaConfig,
) -> Result<LossValue, LossError> {
    scheme_loss(head, q, Scheme::MbnCe, cfg)
}

/// `L_MB + L_RWTA` (or whichever WTA variant `cfg` names).
pub fn mbn_mb_rwta_loss(
    head: &Head,
    q: &impl QuatCoords,
    cfg: &RwtaConfig,
) -> Result<LossValue, LossError> {
    let mut l = mixture_bingham_nll(head, q)?;
    l.add(rwta_loss(head, q, cfg)?);
    Ok(l)
}

/// `−log Σᵢ wᵢ N(t; μᵢ, Σᵢ)` over the translation outputs, sharing the
/// rotation weights. With one component this is the plain Gaussian NLL.
pub fn gaussian_nll(head: &Head, t: [f64; 3]) -> Result<LossValue, LossError> {
    if !head.layout.translation {
        return Err(LossError::NoTranslation);
    }
    let lp: Vec<f64> = head.gaussians.iter().map(|g| g.log_pdf(t)).collect();
    let terms: Vec<f64> = head
        .weights
        .iter()
        .zip(&lp)
        .map(|(w, l)| w.max(WEIGHT_FLOOR).ln() + l)
        .collect();
    let total = log_sum_exp(terms.iter().copied());
    let resp: Vec<f64> = terms.iter().map(|x| (x - total).exp()).collect();
    let mut grad = head.zero_grad();
    for (i, g) in head.gaussians.iter().enumerate() {
        let mean = g.mean();
        let s2 = g.sigma2();
        let raw_var = &head.raw[head.layout.variance_range(i)];
        for a in 0..3 {
            let d = t[a] - mean[a];
            grad[head.layout.mean_range(i).start + a] += -resp[i] * d / s2[a];
            let ds2 = 0.5 * (1.0 / s2[a] - d * d / (s2[a] * s2[a]));
            grad[head.layout.variance_range(i).start + a] += resp[i] * ds2 * sigmoid(raw_var[a]);
        }
    }
    head.mixture_logit_grad(&resp, &mut grad);
    Ok(LossValue {
        value: -total,
        grad,
    })
}

/// Gaussian NLL of a single component given its raw mean and variance
/// outputs; gradient is `[∂/∂mean ×3, ∂/∂var-raw ×3]`.
pub fn gaussian_component_nll(
    mean: [f64; 3],
    raw_variance: [f64; 3],
    t: [f64; 3],
) -> (f64, [f64; 6]) {
    let g = GaussianComponent::from_raw(mean, raw_variance);
    let s2 = g.sigma2();
    let mut grad = [0.0; 6];
    for a in 0..3 {
        let d = t[a] - mean[a];
        grad[a] = -d / s2[a];
        grad[3 + a] = 0.5 * (1.0 / s2[a] - d * d / (s2[a] * s2[a])) * sigmoid(raw_variance[a]);
    }
    (-g.log_pdf(t), grad)
}

/// Normalizes a raw 4-vector; returns the unit vector and its norm.
fn unit(raw: [f64; 4]) -> ([f64; 4], f64) {
    let n = raw.iter().map(|r| r * r).sum::<f64>().sqrt();
    (raw.map(|r| r / n), n)
}

/// Chain rule through `q̂ = raw/‖raw‖`.
fn unit_backward(q: [f64; 4], norm: f64, g: [f64; 4]) -> [f64; 4] {
    let proj: f64 = (0..4).map(|k| q[k] * g[k]).sum();
    core::array::from_fn(|k| (g[k] - q[k] * proj) / norm)
}

/// Baseline `min(‖q − q̂‖₁, ‖q + q̂‖₁)` with `q̂ = raw/‖raw‖`.
pub fn l1_baseline(raw: [f64; 4], q: &impl QuatCoords) -> (f64, [f64; 4]) {
    let (p, n) = unit(raw);
    let q = q.coords();
    let minus: f64 = (0..4).map(|k| (q[k] - p[k]).abs()).sum();
    let plus: f64 = (0..4).map(|k| (q[k] + p[k]).abs()).sum();
    let g: [f64; 4] = if minus <= plus {
        core::array::from_fn(|k| -(q[k] - p[k]).signum())
    } else {
        core::array::from_fn(|k| (q[k] + p[k]).signum())
    };
    (minus.min(plus), unit_backward(p, n, g))
}

/// Baseline `1 − |q · q̂|` with `q̂ = raw/‖raw‖`.
pub fn cosine_baseline(raw: [f64; 4], q: &impl QuatCoords) -> (f64, [f64; 4]) {
    let (p, n) = unit(raw);
    let q = q.coords();
    let dot: f64 = (0..4).map(|k| q[k] * p[k]).sum();
    let g: [f64; 4] = core::array::from_fn(|k| -dot.signum() * q[k]);
    (1.0 - dot.abs(), unit_backward(p, n, g))
}

/// Baseline point-matching loss: mean over `points` of `‖R(q)x − R(q̂)x‖₂`.
pub fn ploss_baseline(raw: [f64; 4], q: &impl QuatCoords, points: &[[f64; 3]]) -> (f64, [f64; 4]) {
    if points.is_empty() {
        return (0.0, [0.0; 4]);
    }
    let (p, n) = unit(raw);
    let r_true = rotation_matrix(q.coords());
    let r_hat = rotation_matrix(p);
    let jac = rotation_matrix_jacobian(p);
    let mut value = 0.0;
    let mut g = [0.0; 4];
    for x in points {
        let x = nalgebra::Vector3::from(*x);
        let diff = r_hat * x - r_true * x;
        let norm = diff.norm();
        value += norm;
        if norm > 0.0 {
            for k in 0..4 {
                g[k] += diff.dot(&(jac[k] * x)) / norm;
            }
        }
    }
    let count = points.len() as f64;
    (value / count, unit_backward(p, n, g.map(|v| v / count)))
}

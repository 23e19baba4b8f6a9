//! Fully connected network with tanh hidden layers, hand-written
//! backpropagation and the Adam optimizer.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("a network needs at least an input and an output layer")]
    TooFewLayers,
    #[error("layer sizes must be positive")]
    EmptyLayer,
    #[error("expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
}

/// Multilayer perceptron. Every layer but the last applies `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    // weights[l] is (sizes[l+1] × sizes[l])
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

/// Layer outputs kept from a batched forward pass; column `b` is sample `b`.
#[derive(Debug, Clone)]
pub struct Activations {
    layers: Vec<DMatrix<f64>>,
}

impl Activations {
    pub fn output(&self) -> &DMatrix<f64> {
        self.layers.last().expect("at least the input is stored")
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        let w: f64 = self.weights.iter().map(|m| m.norm_squared()).sum();
        let b: f64 = self.biases.iter().map(|v| v.norm_squared()).sum();
        (w + b).sqrt()
    }

    /// Flattened in the same order as [`Mlp::params`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.transpose().iter());
            out.extend(b.iter());
        }
        out
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .flat_map(|m| m.iter())
            .chain(self.biases.iter().flat_map(|v| v.iter()))
    }
}

impl Mlp {
    /// Initializes every layer uniformly in `±1/√fan_in`, weights and biases
    /// alike.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, NetworkError> {
        if sizes.len() < 2 {
            return Err(NetworkError::TooFewLayers);
        }
        if sizes.contains(&0) {
            return Err(NetworkError::EmptyLayer);
        }
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            // row-major draw order so the stream does not depend on storage
            let w = DMatrix::from_row_iterator(
                fan_out,
                fan_in,
                (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)),
            );
            let b = DVector::from_iterator(
                fan_out,
                (0..fan_out).map(|_| rng.random_range(-bound..bound)),
            );
            weights.push(w);
            biases.push(b);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("validated on construction")
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.transpose().iter());
            out.extend(b.iter());
        }
        out
    }

    /// Inverse of [`params`](Self::params).
    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetworkError> {
        if params.len() != self.param_count() {
            return Err(NetworkError::ShapeMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut pos = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let (r, c) = w.shape();
            *w = DMatrix::from_row_slice(r, c, &params[pos..pos + r * c]);
            pos += r * c;
            b.copy_from_slice(&params[pos..pos + r]);
            pos += r;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetworkError> {
        let x = DMatrix::from_column_slice(input.len(), 1, input);
        Ok(self.forward_batch(&x)?.output().as_slice().to_vec())
    }

    /// Forward pass over the columns of `inputs`.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> Result<Activations, NetworkError> {
        if inputs.nrows() != self.input_len() {
            return Err(NetworkError::ShapeMismatch {
                expected: self.input_len(),
                actual: inputs.nrows(),
            });
        }
        let last = self.weights.len() - 1;
        let mut layers = Vec::with_capacity(self.weights.len() + 1);
        layers.push(inputs.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * layers.last().expect("non-empty");
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l < last {
                z.apply(|v| *v = v.tanh());
            }
            layers.push(z);
        }
        Ok(Activations { layers })
    }

    /// Gradients of a loss given `∂L/∂output` for each column.
    pub fn backward(&self, acts: &Activations, grad_output: &DMatrix<f64>) -> Gradients {
        let n = self.weights.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut delta = grad_output.clone();
        for l in (0..n).rev() {
            let input = &acts.layers[l];
            gw.push(&delta * input.transpose());
            gb.push(DVector::from_iterator(
                delta.nrows(),
                delta.row_iter().map(|r| r.sum()),
            ));
            if l > 0 {
                let mut next = self.weights[l].transpose() * &delta;
                // input to layer l is tanh output h, with tanh' = 1 − h²
                next.zip_apply(input, |d, h| *d *= 1.0 - h * h);
                delta = next;
            }
        }
        gw.reverse();
        gb.reverse();
        Gradients {
            weights: gw,
            biases: gb,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: alloc::vec![0.0; param_count],
            v: alloc::vec![0.0; param_count],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of `net` with learning rate `lr`.
    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let params = net
            .weights
            .iter_mut()
            .flat_map(|m| m.iter_mut())
            .chain(net.biases.iter_mut().flat_map(|v| v.iter_mut()));
        for (((p, g), m), v) in params.zip(grads.values()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> Mlp {
        Mlp::new(&[3, 5, 4, 2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut n = net();
        let x = DMatrix::from_column_slice(3, 2, &[0.3, -0.2, 0.8, -1.0, 0.5, 0.1]);
        // L = Σ out²/2, so ∂L/∂out = out
        let loss = |n: &Mlp| n.forward_batch(&x).unwrap().output().norm_squared() / 2.0;
        let acts = n.forward_batch(&x).unwrap();
        let g = n.backward(&acts, acts.output());
        let analytic = g.to_vec();
        let mut p = n.params();
        let mut fd = Vec::new();
        for k in 0..p.len() {
            let orig = p[k];
            p[k] = orig + 1e-6;
            n.set_params(&p).unwrap();
            let up = loss(&n);
            p[k] = orig - 1e-6;
            n.set_params(&p).unwrap();
            let down = loss(&n);
            p[k] = orig;
            fd.push((up - down) / 2e-6);
        }
        n.set_params(&p).unwrap();
        for (a, f) in analytic.iter().zip(&fd) {
            assert!((a - f).abs() < 1e-7, "{a} vs {f}");
        }
    }

    #[test]
    fn params_round_trip() {
        let mut n = net();
        let p = n.params();
        assert_eq!(p.len(), n.param_count());
        assert_eq!(p.len(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
        let before = n.clone();
        n.set_params(&p).unwrap();
        assert_eq!(n, before);
        assert!(n.set_params(&p[1..]).is_err());
    }

    #[test]
    fn batch_and_single_agree() {
        let n = net();
        let x = [0.1, 0.2, -0.3];
        let single = n.forward(&x).unwrap();
        let batch = n
            .forward_batch(&DMatrix::from_column_slice(3, 1, &x))
            .unwrap();
        assert_eq!(single, batch.output().as_slice());
        assert!(matches!(
            n.forward(&[1.0]),
            Err(NetworkError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        let mut n = Mlp::new(&[2, 1], &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut opt = Adam::new(n.param_count());
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let target = 3.0;
        for _ in 0..2000 {
            let acts = n.forward_batch(&x).unwrap();
            let err = acts.output().map(|o| o - target);
            let g = n.backward(&acts, &err);
            opt.update(&mut n, &g, 1e-2);
        }
        assert!((n.forward(&[1.0, -1.0]).unwrap()[0] - target).abs() < 1e-3);
        assert_eq!(opt.steps(), 2000);
    }
}

//! Fully connected ReLU networks with hand-written backprop, and Adam.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

/// A multilayer perceptron `sizes[0] → … → sizes[last]` with ReLU hidden
/// layers and a linear output. Parameters live in one flat vector, layer by
/// layer, each layer stored as a row-major `in × out` weight block followed by
/// its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Array2<f64>>,
}

impl Tape {
    /// The network output (pre-activation of the last layer).
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("tape holds at least the input")
    }
}

impl DenseNet {
    /// Uniform fan-in initialisation, `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes");
        let mut params = Vec::with_capacity(Self::count(sizes));
        for pair in sizes.windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            for _ in 0..(pair[0] + 1) * pair[1] {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    /// Rebuilds a network from its layer sizes and flat parameters.
    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == Self::count(&sizes)).then_some(Self { sizes, params })
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.sizes.windows(2).scan(0, |off, p| {
            let start = *off;
            *off += (p[0] + 1) * p[1];
            Some((start, p[0], p[1]))
        })
    }

    fn layer(&self, start: usize, n_in: usize, n_out: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let w = &self.params[start..start + n_in * n_out];
        let b = &self.params[start + n_in * n_out..start + (n_in + 1) * n_out];
        (
            ArrayView2::from_shape((n_in, n_out), w).unwrap(),
            ArrayView1::from(b),
        )
    }

    /// Forward pass over a batch (one row per example).
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.sizes.len() - 2;
        let mut a = x.to_owned();
        for (i, (start, n_in, n_out)) in self.offsets().enumerate() {
            let (w, b) = self.layer(start, n_in, n_out);
            let mut z = a.dot(&w);
            z += &b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Forward pass that keeps every activation for a later backward pass.
    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Tape {
        let last = self.sizes.len() - 2;
        let mut acts = vec![x.to_owned()];
        for (i, (start, n_in, n_out)) in self.offsets().enumerate() {
            let (w, b) = self.layer(start, n_in, n_out);
            let mut z = acts[i].dot(&w);
            z += &b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        Tape { acts }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `d_out = ∂L/∂output`. Returns
    /// `∂L/∂input` when `want_input` is set.
    pub fn backward(&self, tape: &Tape, d_out: Array2<f64>, grad: &mut [f64], want_input: bool) -> Option<Array2<f64>> {
        assert_eq!(grad.len(), self.params.len());
        let layers: Vec<_> = self.offsets().collect();
        let mut dz = d_out;
        for (i, &(start, n_in, n_out)) in layers.iter().enumerate().rev() {
            let a_prev = &tape.acts[i];
            let (gw, gb) = grad[start..start + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            let mut gw = ArrayViewMut2::from_shape((n_in, n_out), gw).unwrap();
            general_mat_mul(1.0, &a_prev.t(), &dz, 1.0, &mut gw);
            let mut gb = ArrayViewMut1::from(gb);
            gb += &dz.sum_axis(Axis(0));

            if i == 0 && !want_input {
                return None;
            }
            let (w, _) = self.layer(start, n_in, n_out);
            let mut da = dz.dot(&w.t());
            if i == 0 {
                return Some(da);
            }
            ndarray::Zip::from(&mut da).and(a_prev).for_each(|d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            dz = da;
        }
        unreachable!("loop returns at the input layer")
    }

    /// `∂L/∂input` given `d_out = ∂L/∂output`, without parameter gradients.
    pub fn input_gradient(&self, tape: &Tape, d_out: Array2<f64>) -> Array2<f64> {
        let layers: Vec<_> = self.offsets().collect();
        let mut dz = d_out;
        for (i, &(start, n_in, n_out)) in layers.iter().enumerate().rev() {
            let (w, _) = self.layer(start, n_in, n_out);
            let mut da = dz.dot(&w.t());
            if i > 0 {
                ndarray::Zip::from(&mut da).and(&tape.acts[i]).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            dz = da;
        }
        dz
    }

    /// `self ← τ·self + (1 − τ)·online`.
    pub fn polyak_from(&mut self, online: &DenseNet, tau: f64) {
        assert_eq!(self.sizes, online.sizes, "polyak between mismatched shapes");
        for (t, &o) in self.params.iter_mut().zip(&online.params) {
            *t += (1.0 - tau) * (o - *t);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

//! Small dense networks with hand-written backprop.
//!
//! The training loop needs analytic parameter gradients (they are checked
//! against finite differences), per-array gradient clipping, L2 decay, Adam
//! updates, and Polyak-averaged target copies, so the whole thing is spelled
//! out here on top of `ndarray` matrix products.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-layer nonlinearity applied to the affine output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
    /// `mid + half * tanh(z)`: a tanh squashed into an arbitrary box.
    TanhAffine { mid: f64, half: f64 },
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
            Activation::TanhAffine { mid, half } => mid + half * z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
            Activation::TanhAffine { half, .. } => {
                let t = z.tanh();
                half * (1.0 - t * t)
            }
        }
    }
}

/// One affine layer `y = act(x w + b)` with `w: (in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

/// A fully-connected stack of [`Layer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Forward-pass intermediates needed by [`Mlp::backward`].
pub struct Cache {
    /// Input to each layer, `(batch, in_i)`.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer, `(batch, out_i)`.
    pre: Vec<Array2<f64>>,
}

/// Parameter gradients, one `(dW, db)` pair per layer.
#[derive(Debug, Clone)]
pub struct Grads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Mlp {
    /// Builds a network with the given layer widths and activations.
    ///
    /// Hidden weights use He-style scaling; the final layer starts in
    /// `[-3e-3, 3e-3]` so the initial outputs sit near the middle of their
    /// range.
    pub fn new<R: Rng>(dims: &[usize], acts: &[Activation], rng: &mut R) -> Self {
        assert_eq!(dims.len(), acts.len() + 1, "one activation per layer");
        let last = acts.len() - 1;
        let layers = acts
            .iter()
            .enumerate()
            .map(|(i, &act)| {
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let scale = if i == last {
                    3e-3
                } else {
                    (2.0 / fan_in as f64).sqrt()
                };
                let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                    rng.gen_range(-1.0..1.0) * scale
                });
                let b = Array1::zeros(fan_out);
                Layer { w, b, act }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    /// Forward pass keeping the per-layer intermediates.
    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Cache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            inputs.push(cur.clone());
            let z = cur.dot(&layer.w) + &layer.b;
            cur = z.mapv(|v| layer.act.apply(v));
            pre.push(z);
        }
        (cur, Cache { inputs, pre })
    }

    /// Forward pass without caching.
    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut cur = x.clone();
        for layer in &self.layers {
            let z = cur.dot(&layer.w) + &layer.b;
            cur = z.mapv(|v| layer.act.apply(v));
        }
        cur
    }

    /// Backprop of `d_out = dL/dy` through the cached pass; returns the
    /// parameter gradients and `dL/dx`.
    pub fn backward(&self, cache: &Cache, d_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let dz = &delta * &cache.pre[i].mapv(|z| layer.act.derivative(z));
            let dw = cache.inputs[i].t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            delta = dz.dot(&layer.w.t());
            grads.push((dw, db));
        }
        grads.reverse();
        (Grads { layers: grads }, delta)
    }

    /// `dL/dx` only, skipping the parameter gradients.
    pub fn backward_input(&self, cache: &Cache, d_out: &Array2<f64>) -> Array2<f64> {
        let mut delta = d_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let dz = &delta * &cache.pre[i].mapv(|z| layer.act.derivative(z));
            delta = dz.dot(&layer.w.t());
        }
        delta
    }

    /// Sum of squared weights (biases excluded), for L2 loss terms.
    pub fn weight_squared_sum(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.w.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    /// Polyak update `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            dst.w.zip_mut_with(&src.w, |d, &s| *d += tau * (s - *d));
            dst.b.zip_mut_with(&src.b, |d, &s| *d += tau * (s - *d));
        }
    }
}

impl Grads {
    /// Adds the L2 decay term `lambda * w` (weights only).
    pub fn add_l2(&mut self, mlp: &Mlp, lambda: f64) {
        for ((dw, _), layer) in self.layers.iter_mut().zip(&mlp.layers) {
            dw.zip_mut_with(&layer.w, |g, &w| *g += lambda * w);
        }
    }

    /// Clips each parameter array to the given L2 norm, independently per
    /// array (the threshold applies per learnable, not globally).
    pub fn clip_per_array(&mut self, max_norm: f64) {
        for (dw, db) in &mut self.layers {
            let wn = dw.iter().map(|g| g * g).sum::<f64>().sqrt();
            if wn > max_norm {
                dw.mapv_inplace(|g| g * max_norm / wn);
            }
            let bn = db.iter().map(|g| g * g).sum::<f64>().sqrt();
            if bn > max_norm {
                db.mapv_inplace(|g| g * max_norm / bn);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(dw, db)| dw.iter().all(|g| g.is_finite()) && db.iter().all(|g| g.is_finite()))
    }
}

/// Adam optimizer state for one network.
pub struct Adam {
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new_for(mlp: &Mlp) -> Self {
        let zeros = |l: &Layer| {
            (
                Array2::zeros(l.w.raw_dim()),
                Array1::zeros(l.b.raw_dim()),
            )
        };
        Self {
            m: mlp.layers.iter().map(zeros).collect(),
            v: mlp.layers.iter().map(zeros).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &Grads, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..mlp.layers.len() {
            let (dw, db) = &grads.layers[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            mw.zip_mut_with(dw, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            vw.zip_mut_with(dw, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            mb.zip_mut_with(db, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            vb.zip_mut_with(db, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let layer = &mut mlp.layers[i];
            ndarray::Zip::from(&mut layer.w)
                .and(&*mw)
                .and(&*vw)
                .for_each(|w, &m, &v| {
                    *w -= lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
                });
            ndarray::Zip::from(&mut layer.b)
                .and(&*mb)
                .and(&*vb)
                .for_each(|b, &m, &v| {
                    *b -= lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
                });
        }
    }
}

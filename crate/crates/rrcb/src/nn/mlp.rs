use crate::error::{Error, Result};
use crate::rng::next_gaussian;
use rand_chacha::ChaCha8Rng;

/// Feed-forward network with rectified-linear hidden layers and an identity
/// output layer. Parameters live in one flat vector (per layer: the
/// row-major out x in weight matrix, then the bias), which keeps the
/// optimizer and finite-difference checks trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Cached activations of one forward pass, needed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Layer inputs: activations[0] is the network input, activations[l]
    /// the rectified output of layer l-1.
    activations: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
}

/// Flat parameter gradients, same layout as [`Mlp::params`].
pub type MlpGrads = Vec<f64>;

impl Mlp {
    /// Network with the given layer dimensions (input, hidden..., output),
    /// He-initialized weights and zero biases.
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut params = Vec::with_capacity(Self::param_count_for(dims));
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(scale * next_gaussian(rng));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Mlp { dims: dims.to_vec(), params }
    }

    pub fn zeros(dims: &[usize]) -> Mlp {
        Mlp { dims: dims.to_vec(), params: vec![0.0; Self::param_count_for(dims)] }
    }

    pub fn param_count_for(dims: &[usize]) -> usize {
        let mut n = 0;
        for l in 0..dims.len() - 1 {
            n += dims[l] * dims[l + 1] + dims[l + 1];
        }
        n
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Mlp> {
        let expected = Self::param_count_for(dims);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        Ok(Mlp { dims: dims.to_vec(), params })
    }

    fn layer_offset(&self, layer: usize) -> usize {
        let mut off = 0;
        for l in 0..layer {
            off += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        off
    }

    /// Forward pass returning output only.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.1)
    }

    /// Forward pass keeping the per-layer activations for [`backward`].
    pub fn forward_cached(&self, input: &[f64]) -> Result<(MlpCache, Vec<f64>)> {
        if input.len() != self.dims[0] {
            return Err(Error::DimensionMismatch { expected: self.dims[0], got: input.len() });
        }
        let n_layers = self.dims.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        activations.push(input.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (nin, nout) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + nin * nout];
            let b = &self.params[off + nin * nout..off + nin * nout + nout];
            off += nin * nout + nout;
            let x = &activations[l];
            let mut z = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * nin..(o + 1) * nin];
                let mut acc = 0.0;
                for i in 0..nin {
                    acc += row[i] * x[i];
                }
                *zo += acc;
            }
            let out = if l + 1 < n_layers {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            activations.push(out);
        }
        let output = activations.last().unwrap().clone();
        Ok((MlpCache { activations, pre }, output))
    }

    /// Reverse-mode pass: accumulates parameter gradients into `grads`
    /// (same flat layout as the parameters) and returns the gradient with
    /// respect to the input.
    pub fn backward(&self, cache: &MlpCache, output_grad: &[f64], grads: &mut MlpGrads) -> Result<Vec<f64>> {
        let n_layers = self.dims.len() - 1;
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), got: output_grad.len() });
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), got: grads.len() });
        }
        let mut delta = output_grad.to_vec();
        for l in (0..n_layers).rev() {
            let (nin, nout) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            // Hidden layers: gradient through the rectifier.
            if l + 1 < n_layers {
                for (d, &z) in delta.iter_mut().zip(&cache.pre[l]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &cache.activations[l];
            let (gw, gb) = grads[off..off + nin * nout + nout].split_at_mut(nin * nout);
            for o in 0..nout {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut gw[o * nin..(o + 1) * nin];
                    for i in 0..nin {
                        row[i] += d * x[i];
                    }
                }
                gb[o] += d;
            }
            let w = &self.params[off..off + nin * nout];
            let mut prev = vec![0.0; nin];
            for o in 0..nout {
                let d = delta[o];
                if d != 0.0 {
                    let row = &w[o * nin..(o + 1) * nin];
                    for i in 0..nin {
                        prev[i] += d * row[i];
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }
}

/// Cached activations of one batched forward pass.
#[derive(Debug, Clone)]
pub struct BatchCache {
    batch: usize,
    /// activations[l] is row-major [batch x dims[l]].
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl BatchCache {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Dot product with four independent accumulators; the fixed combination
/// order keeps results bit-deterministic while letting the compiler
/// vectorize.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(acc: &mut [f64], scale: f64, v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += scale * b;
    }
}

impl Mlp {
    /// Batched forward pass over `batch` row-major input vectors.
    pub fn forward_batch(&self, xs: &[f64], batch: usize) -> Result<(BatchCache, Vec<f64>)> {
        if xs.len() != batch * self.dims[0] {
            return Err(Error::DimensionMismatch { expected: batch * self.dims[0], got: xs.len() });
        }
        let n_layers = self.dims.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        activations.push(xs.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (nin, nout) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + nin * nout];
            let b = &self.params[off + nin * nout..off + nin * nout + nout];
            off += nin * nout + nout;
            let x = &activations[l];
            let mut z = vec![0.0; batch * nout];
            for s in 0..batch {
                let xrow = &x[s * nin..(s + 1) * nin];
                let zrow = &mut z[s * nout..(s + 1) * nout];
                for o in 0..nout {
                    zrow[o] = b[o] + dot(&w[o * nin..(o + 1) * nin], xrow);
                }
            }
            let out = if l + 1 < n_layers {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            activations.push(out);
        }
        let output = activations.last().unwrap().clone();
        Ok((BatchCache { batch, activations, pre }, output))
    }

    /// Batched reverse pass; accumulates into `grads` and returns the
    /// row-major input gradients.
    pub fn backward_batch(
        &self,
        cache: &BatchCache,
        output_grad: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        let n_layers = self.dims.len() - 1;
        let batch = cache.batch;
        if output_grad.len() != batch * self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: batch * self.output_dim(),
                got: output_grad.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), got: grads.len() });
        }
        let mut delta = output_grad.to_vec();
        for l in (0..n_layers).rev() {
            let (nin, nout) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            if l + 1 < n_layers {
                for (d, &z) in delta.iter_mut().zip(&cache.pre[l]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &cache.activations[l];
            let (gw, gb) = grads[off..off + nin * nout + nout].split_at_mut(nin * nout);
            for s in 0..batch {
                let drow = &delta[s * nout..(s + 1) * nout];
                let xrow = &x[s * nin..(s + 1) * nin];
                for o in 0..nout {
                    let d = drow[o];
                    if d != 0.0 {
                        axpy(&mut gw[o * nin..(o + 1) * nin], d, xrow);
                    }
                    gb[o] += d;
                }
            }
            let w = &self.params[off..off + nin * nout];
            let mut prev = vec![0.0; batch * nin];
            for s in 0..batch {
                let drow = &delta[s * nout..(s + 1) * nout];
                let prow = &mut prev[s * nin..(s + 1) * nin];
                for o in 0..nout {
                    let d = drow[o];
                    if d != 0.0 {
                        axpy(prow, d, &w[o * nin..(o + 1) * nin]);
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }
}

/// Central finite-difference gradient of `f` at `params`; the independent
/// oracle for every analytic gradient in the crate.
pub fn finite_difference_grad<F: FnMut(&[f64]) -> f64>(params: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut p = params.to_vec();
    let mut out = vec![0.0; params.len()];
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let down = f(&p);
        p[i] = orig;
        out[i] = (up - down) / (2.0 * h);
    }
    out
}

/// Max relative error between analytic and reference gradients, with an
/// absolute floor to avoid blowing up tiny components.
pub fn max_relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(&a, &r)| (a - r).abs() / a.abs().max(r.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::NnError;
use crate::math::Scalar;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_layers: usize, hidden_units: usize) -> Result<Self, NnError> {
        if input_dim == 0 || hidden_layers == 0 || hidden_units == 0 {
            return Err(NnError::InvalidConfig("all MLP sizes must be positive"));
        }
        Ok(MlpConfig { input_dim, hidden_layers, hidden_units })
    }
}

/// How the output layer is initialized. Hidden layers always use
/// fan-in-scaled uniform weights and zero biases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Zero output layer: uniform policies and zero values.
    ZeroOutput,
    /// Output layer drawn like the hidden layers, scaled by the factor.
    RandomOutput(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Dense<T> {
    in_dim: usize,
    out_dim: usize,
    /// Input-major: row `i` holds the weights from input `i` to every output.
    w: Vec<T>,
    b: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn uniform(in_dim: usize, out_dim: usize, scale: f64, rng: &mut Rng) -> Self {
        let bound = scale / libm::sqrt(in_dim as f64);
        let w = (0..in_dim * out_dim).map(|_| T::of(rng.random_range(-bound..=bound))).collect();
        Dense { in_dim, out_dim, w, b: vec![T::zero(); out_dim] }
    }
}

/// Multi-layer perceptron with ELU hidden activations and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

/// Per-layer gradients with the same layout as [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T> {
    pub(crate) w: Vec<Vec<T>>,
    pub(crate) b: Vec<Vec<T>>,
}

/// Stored layer outputs of the last batched forward pass.
#[derive(Debug, Clone, Default)]
pub struct Activations<T> {
    batch: usize,
    input: Vec<T>,
    outputs: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Scalar> Activations<T> {
    pub fn new() -> Self {
        Activations { batch: 0, input: Vec::new(), outputs: Vec::new(), delta: Vec::new(), delta_prev: Vec::new() }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Output of the last layer, `batch x output_dim` row-major.
    pub fn output(&self) -> &[T] {
        self.outputs.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

#[inline]
fn elu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of ELU written in terms of its output.
#[inline]
fn elu_grad_from_output<T: Scalar>(y: T) -> T {
    if y > T::zero() {
        T::one()
    } else {
        y + T::one()
    }
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yo, &xo) in y.iter_mut().zip(x) {
        *yo += alpha * xo;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (pa, pb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for j in 0..8 {
            acc[j] += pa[j] * pb[j];
        }
    }
    let mut tail = T::zero();
    for j in chunks * 8..a.len() {
        tail += a[j] * b[j];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

impl<T: Scalar> Mlp<T> {
    pub fn new(config: MlpConfig, output_dim: usize, init: Init, rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(config.hidden_layers + 1);
        let mut in_dim = config.input_dim;
        for _ in 0..config.hidden_layers {
            layers.push(Dense::uniform(in_dim, config.hidden_units, 1.0, rng));
            in_dim = config.hidden_units;
        }
        let out = match init {
            Init::ZeroOutput => Dense { in_dim, out_dim: output_dim, w: vec![T::zero(); in_dim * output_dim], b: vec![T::zero(); output_dim] },
            Init::RandomOutput(scale) => {
                let mut d = Dense::uniform(in_dim, output_dim, scale, rng);
                d.b.iter_mut().for_each(|b| *b = T::of(rng.random_range(-scale..=scale) * 0.1));
                d
            }
        };
        layers.push(out);
        Mlp { layers }
    }

    /// Rebuilds a network from `(in_dim, out_dim, weights, biases)` per layer.
    pub fn from_parts(parts: Vec<(usize, usize, Vec<T>, Vec<T>)>) -> Result<Self, NnError> {
        if parts.is_empty() {
            return Err(NnError::InvalidConfig("network needs at least one layer"));
        }
        let mut layers = Vec::with_capacity(parts.len());
        let mut prev = parts[0].0;
        for (in_dim, out_dim, w, b) in parts {
            if in_dim != prev {
                return Err(NnError::DimensionMismatch { expected: prev, got: in_dim });
            }
            if w.len() != in_dim * out_dim {
                return Err(NnError::DimensionMismatch { expected: in_dim * out_dim, got: w.len() });
            }
            if b.len() != out_dim {
                return Err(NnError::DimensionMismatch { expected: out_dim, got: b.len() });
            }
            layers.push(Dense { in_dim, out_dim, w, b });
            prev = out_dim;
        }
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `(in_dim, out_dim)` of every layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect()
    }

    /// Weight and bias slices of layer `i`.
    pub fn layer_params(&self, i: usize) -> (&[T], &[T]) {
        (&self.layers[i].w, &self.layers[i].b)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All parameters in declaration order (per layer: weights then biases).
    pub fn params(&self) -> impl Iterator<Item = T> + '_ {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
    }

    /// Mutable access to parameter `i` in declaration order.
    pub fn param_mut(&mut self, mut i: usize) -> Option<&mut T> {
        for l in &mut self.layers {
            if i < l.w.len() {
                return Some(&mut l.w[i]);
            }
            i -= l.w.len();
            if i < l.b.len() {
                return Some(&mut l.b[i]);
            }
            i -= l.b.len();
        }
        None
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    w: l.w.iter().map(|x| U::of(x.f64())).collect(),
                    b: l.b.iter().map(|x| U::of(x.f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn zero_grads(&self) -> MlpGrads<T> {
        MlpGrads {
            w: self.layers.iter().map(|l| vec![T::zero(); l.w.len()]).collect(),
            b: self.layers.iter().map(|l| vec![T::zero(); l.b.len()]).collect(),
        }
    }

    /// Batched forward pass over `input` (`batch x input_dim`, row-major).
    /// Returns the `batch x output_dim` output.
    pub fn forward<'a>(&self, input: &[T], batch: usize, acts: &'a mut Activations<T>) -> Result<&'a [T], NnError> {
        let in_dim = self.input_dim();
        if input.len() != batch * in_dim {
            return Err(NnError::DimensionMismatch { expected: batch * in_dim, got: input.len() });
        }
        acts.batch = batch;
        acts.input.clear();
        acts.input.extend_from_slice(input);
        acts.outputs.resize_with(self.layers.len(), Vec::new);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, rest) = acts.outputs.split_at_mut(l);
            let x: &[T] = if l == 0 { &acts.input } else { &before[l - 1] };
            let y = &mut rest[0];
            y.clear();
            y.resize(batch * layer.out_dim, T::zero());
            for b in 0..batch {
                let xr = &x[b * layer.in_dim..(b + 1) * layer.in_dim];
                let yr = &mut y[b * layer.out_dim..(b + 1) * layer.out_dim];
                yr.copy_from_slice(&layer.b);
                for (i, &xi) in xr.iter().enumerate() {
                    if xi != T::zero() {
                        axpy(xi, &layer.w[i * layer.out_dim..(i + 1) * layer.out_dim], yr);
                    }
                }
                if l != last {
                    yr.iter_mut().for_each(|v| *v = elu(*v));
                }
            }
        }
        Ok(acts.output())
    }

    /// Accumulates into `grads` the parameter gradient of a scalar whose
    /// derivative with respect to the last forward output is `d_output`.
    pub fn backward(&self, acts: &mut Activations<T>, d_output: &[T], grads: &mut MlpGrads<T>) -> Result<(), NnError> {
        let batch = acts.batch;
        let expected = batch * self.output_dim();
        if d_output.len() != expected {
            return Err(NnError::DimensionMismatch { expected, got: d_output.len() });
        }
        let mut delta = core::mem::take(&mut acts.delta);
        let mut delta_prev = core::mem::take(&mut acts.delta_prev);
        delta.clear();
        delta.extend_from_slice(d_output);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x: &[T] = if l == 0 { &acts.input } else { &acts.outputs[l - 1] };
            let gw = &mut grads.w[l];
            let gb = &mut grads.b[l];
            for b in 0..batch {
                let dr = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
                let xr = &x[b * layer.in_dim..(b + 1) * layer.in_dim];
                for (g, &d) in gb.iter_mut().zip(dr) {
                    *g += d;
                }
                for (i, &xi) in xr.iter().enumerate() {
                    if xi != T::zero() {
                        axpy(xi, dr, &mut gw[i * layer.out_dim..(i + 1) * layer.out_dim]);
                    }
                }
            }
            if l == 0 {
                break;
            }
            delta_prev.clear();
            delta_prev.resize(batch * layer.in_dim, T::zero());
            for b in 0..batch {
                let dr = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
                let xr = &x[b * layer.in_dim..(b + 1) * layer.in_dim];
                let pr = &mut delta_prev[b * layer.in_dim..(b + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    let s = dot(&layer.w[i * layer.out_dim..(i + 1) * layer.out_dim], dr);
                    pr[i] = s * elu_grad_from_output(xr[i]);
                }
            }
            core::mem::swap(&mut delta, &mut delta_prev);
        }
        acts.delta = delta;
        acts.delta_prev = delta_prev;
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> impl Iterator<Item = (&mut Vec<T>, &mut Vec<T>)> {
        self.layers.iter_mut().map(|l| (&mut l.w, &mut l.b))
    }
}

impl<T: Scalar> MlpGrads<T> {
    pub fn fill_zero(&mut self) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|v| v.iter_mut().for_each(|x| *x = T::zero()));
    }

    pub fn scale(&mut self, s: T) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|v| v.iter_mut().for_each(|x| *x *= s));
    }

    pub fn add_assign(&mut self, other: &MlpGrads<T>) {
        for (a, b) in self.w.iter_mut().zip(&other.w).chain(self.b.iter_mut().zip(&other.b)) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    /// Values in the same order as [`Mlp::params`].
    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.w.iter().zip(&self.b).flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values().map(|x| x.f64() * x.f64()).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().map(|x| libm::fabs(x.f64())).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn reference_forward(mlp: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let n = mlp.layers.len();
        for (l, layer) in mlp.layers.iter().enumerate() {
            let mut y = layer.b.clone();
            for o in 0..layer.out_dim {
                for i in 0..layer.in_dim {
                    y[o] += layer.w[i * layer.out_dim + o] * h[i];
                }
                if l + 1 != n {
                    y[o] = if y[o] > 0.0 { y[o] } else { libm::exp(y[o]) - 1.0 };
                }
            }
            h = y;
        }
        h
    }

    #[test]
    fn batched_forward_matches_reference() {
        let mut rng = StreamKey::root(5).rng();
        let mlp: Mlp<f64> = Mlp::new(MlpConfig::new(13, 2, 11).unwrap(), 7, Init::RandomOutput(1.0), &mut rng);
        let batch = 4;
        let x: Vec<f64> = (0..batch * 13).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut acts = Activations::new();
        let y = mlp.forward(&x, batch, &mut acts).unwrap().to_vec();
        for b in 0..batch {
            let r = reference_forward(&mlp, &x[b * 13..(b + 1) * 13]);
            for o in 0..7 {
                assert!((r[o] - y[b * 7 + o]).abs() < 1e-12);
            }
        }
        assert!(mlp.forward(&x[1..], batch, &mut acts).is_err());
    }

    #[test]
    fn zero_output_layer_gives_zero_output() {
        let mut rng = StreamKey::root(6).rng();
        let mlp: Mlp<f32> = Mlp::new(MlpConfig::new(5, 3, 8).unwrap(), 3, Init::ZeroOutput, &mut rng);
        let mut acts = Activations::new();
        assert!(mlp.forward(&[1.0; 10], 2, &mut acts).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn cast_roundtrip_preserves_shapes() {
        let mut rng = StreamKey::root(7).rng();
        let mlp: Mlp<f32> = Mlp::new(MlpConfig::new(4, 2, 6).unwrap(), 2, Init::RandomOutput(1.0), &mut rng);
        let back: Mlp<f32> = mlp.cast::<f64>().cast();
        assert_eq!(back, mlp);
        assert_eq!(mlp.param_count(), 4 * 6 + 6 + 6 * 6 + 6 + 6 * 2 + 2);
        assert_eq!(mlp.params().count(), mlp.param_count());
    }
}

use super::mlp::{Mlp, MlpGrads};
use crate::math::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { beta1: 0.9, beta2: 0.99, eps: 1e-5, weight_decay: 1e-6 }
    }
}

/// Adam with decoupled weight decay. One instance per parameter group; the
/// step size is supplied per call.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    m: MlpGrads<T>,
    v: MlpGrads<T>,
    steps: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(params: &Mlp<T>, config: AdamWConfig) -> Self {
        AdamW { config, m: params.zero_grads(), v: params.zero_grads(), steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut Mlp<T>, grads: &MlpGrads<T>, step_size: f64) {
        self.steps += 1;
        let c = self.config;
        let t = self.steps as i32;
        let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, t as f64);
        let decay = T::of(1.0 - step_size * c.weight_decay);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (ob1, ob2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let lr_hat = T::of(step_size / bc1);
        let inv_sqrt_bc2 = T::of(1.0 / libm::sqrt(bc2));
        let eps = T::of(c.eps);
        for (l, (w, b)) in params.layers_mut().enumerate() {
            for (p, (g, (m, v))) in w
                .iter_mut()
                .zip(grads.w[l].iter().zip(self.m.w[l].iter_mut().zip(self.v.w[l].iter_mut())))
                .chain(b.iter_mut().zip(grads.b[l].iter().zip(self.m.b[l].iter_mut().zip(self.v.b[l].iter_mut()))))
            {
                *m = b1 * *m + ob1 * *g;
                *v = b2 * *v + ob2 * *g * *g;
                *p *= decay;
                *p -= lr_hat * *m / (v.sqrt() * inv_sqrt_bc2 + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activations, Init, MlpConfig};
    use crate::rng::StreamKey;

    fn net() -> Mlp<f64> {
        Mlp::new(MlpConfig::new(3, 1, 4).unwrap(), 1, Init::RandomOutput(1.0), &mut StreamKey::root(0).rng())
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut p = net();
        let before = p.clone();
        let mut opt = AdamW::new(&p, AdamWConfig { weight_decay: 0.0, ..Default::default() });
        let g = p.zero_grads();
        for _ in 0..10 {
            opt.step(&mut p, &g, 1e-2);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn decay_only_shrinks_geometrically() {
        let mut p = net();
        let before: Vec<f64> = p.params().collect();
        let mut opt = AdamW::new(&p, AdamWConfig { weight_decay: 0.5, ..Default::default() });
        let g = p.zero_grads();
        opt.step(&mut p, &g, 0.1);
        opt.step(&mut p, &g, 0.1);
        for (a, b) in p.params().zip(before) {
            assert!((a - b * 0.95 * 0.95).abs() < 1e-15);
        }
    }

    #[test]
    fn minimizes_a_quadratic_bowl() {
        // single bias parameter x with loss x^2, starting at x = 1
        let mut p = Mlp::<f64>::from_parts(vec![(1, 1, vec![0.0], vec![1.0])]).unwrap();
        let mut opt = AdamW::new(&p, AdamWConfig::default());
        let mut acts = Activations::new();
        let mut reached = None;
        for step in 0..10_000 {
            let x = p.forward(&[0.0], 1, &mut acts).unwrap()[0];
            if x.abs() < 1e-3 {
                reached = Some(step);
                break;
            }
            let mut g = p.zero_grads();
            p.backward(&mut acts, &[2.0 * x], &mut g).unwrap();
            opt.step(&mut p, &g, 1e-3);
        }
        assert!(reached.is_some());
    }
}

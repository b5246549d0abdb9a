//! Dense feed-forward network with ELU hidden activations and hand-derived
//! reverse-mode gradients.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::distributions::Open01;
use rand::Rng;

use crate::error::{Error, Result};

/// An `m × width` matrix; each row is one input or output vector.
pub type SampleBatch = Array2<f64>;

/// Exponential linear unit with α = 1.
#[inline]
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of [`elu`]; 1 at the origin where both one-sided limits agree.
#[inline]
pub fn elu_grad(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Glorot-uniform matrix of shape `fan_out × fan_in`, entries in `(-L, L)` with
/// `L = √(6 / (fan_in + fan_out))`.
pub fn glorot_uniform_init<R: Rng + ?Sized>(
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid(format!(
            "glorot init needs nonzero fans, got fan_in={fan_in} fan_out={fan_out}"
        )));
    }
    let limit = glorot_limit(fan_in, fan_out);
    Ok(Array2::from_shape_simple_fn((fan_out, fan_in), || {
        let u: f64 = rng.sample(Open01);
        limit * (2.0 * u - 1.0)
    }))
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out_units × in_units`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl DenseLayer {
    pub fn in_units(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_units(&self) -> usize {
        self.weights.nrows()
    }

    pub fn zeros(in_units: usize, out_units: usize) -> Self {
        Self {
            weights: Array2::zeros((out_units, in_units)),
            biases: Array1::zeros(out_units),
        }
    }
}

/// Layer sizes of an [`Mlp`]. `layers` counts dense layers including the
/// linear output layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub units: usize,
    pub layers: usize,
    pub output_dim: usize,
}

impl Architecture {
    /// `n` units per layer, `n` in and out.
    pub fn square(n: usize, layers: usize) -> Self {
        Self {
            input_dim: n,
            units: n,
            layers,
            output_dim: n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.units == 0 || self.layers == 0 || self.output_dim == 0 {
            return Err(Error::invalid(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|l| {
                let fan_in = if l == 0 { self.input_dim } else { self.units };
                let fan_out = if l + 1 == self.layers { self.output_dim } else { self.units };
                (fan_in, fan_out)
            })
            .collect()
    }
}

/// Feed-forward network; every layer but the last applies ELU.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    revision: u64,
}

/// Per-layer inputs and pre-activations recorded by [`Mlp::forward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    revision: u64,
}

impl ForwardCache {
    pub fn batch_rows(&self) -> usize {
        self.inputs.first().map_or(0, |a| a.nrows())
    }
}

/// Gradients with the same layout as the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

impl Mlp {
    /// Builds a network from explicit layers, checking that shapes compose.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].out_units() != pair[1].in_units() {
                return Err(Error::shape(format!(
                    "layer {l} has {} outputs but layer {} expects {} inputs",
                    pair[0].out_units(),
                    l + 1,
                    pair[1].in_units()
                )));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.biases.len() != layer.out_units() {
                return Err(Error::shape(format!(
                    "layer {l}: {} biases for {} outputs",
                    layer.biases.len(),
                    layer.out_units()
                )));
            }
            if layer.weights.iter().chain(layer.biases.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow {
                    context: format!("layer {l} parameters"),
                });
            }
        }
        Ok(Self { layers, revision: 0 })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new_glorot<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                Ok(DenseLayer {
                    weights: glorot_uniform_init(fan_in, fan_out, rng)?,
                    biases: Array1::zeros(fan_out),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_units()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_units()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Weights (row-major) then biases, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.biases.iter().copied());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = params[offset];
                offset += 1;
            }
        }
        self.revision += 1;
        Ok(())
    }

    pub fn forward(&self, inputs: &SampleBatch) -> Result<(SampleBatch, ForwardCache)> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "input width {} does not match model input dim {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                context: "network inputs".into(),
            });
        }
        let last = self.layers.len() - 1;
        let mut cache_inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = inputs.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weights.t());
            z += &layer.biases;
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow {
                    context: format!("pre-activation of layer {l}"),
                });
            }
            let next = if l == last { z.clone() } else { z.mapv(elu) };
            cache_inputs.push(std::mem::replace(&mut act, next));
            pre.push(z);
        }
        Ok((
            act,
            ForwardCache {
                inputs: cache_inputs,
                pre_activations: pre,
                revision: self.revision,
            },
        ))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, inputs: &SampleBatch) -> Result<SampleBatch> {
        self.forward(inputs).map(|(out, _)| out)
    }

    /// Reverse-mode gradients of a scalar loss given its gradient w.r.t. the outputs.
    pub fn backward(&self, cache: &ForwardCache, d_outputs: &SampleBatch) -> Result<Gradients> {
        if cache.revision != self.revision || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache(format!(
                "cache from revision {} used with model revision {}",
                cache.revision, self.revision
            )));
        }
        let rows = cache.batch_rows();
        if d_outputs.dim() != (rows, self.output_dim()) {
            return Err(Error::shape(format!(
                "output gradient is {:?}, expected {:?}",
                d_outputs.dim(),
                (rows, self.output_dim())
            )));
        }
        let n = self.layers.len();
        let mut gw = vec![Array2::zeros((0, 0)); n];
        let mut gb = vec![Array1::zeros(0); n];
        let mut delta = d_outputs.clone();
        for l in (0..n).rev() {
            if l != n - 1 {
                Zip::from(&mut delta)
                    .and(&cache.pre_activations[l])
                    .for_each(|d, &z| *d *= elu_grad(z));
            }
            gw[l] = delta.t().dot(&cache.inputs[l]);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.layers[l].weights);
            }
        }
        Ok(Gradients {
            weights: gw,
            biases: gb,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu(2.0), 2.0);
        assert_abs_diff_eq!(elu(-1.0), -0.63212, epsilon = 1e-5);
        assert_eq!(elu_grad(3.0), 1.0);
        assert_eq!(elu_grad(0.0), 1.0);
        assert_abs_diff_eq!(elu_grad(-1.0), 0.36788, epsilon = 1e-5);
    }

    #[test]
    fn elu_grad_matches_central_difference() {
        let h = 1e-5;
        let x = -0.5;
        let fd = (elu(x + h) - elu(x - h)) / (2.0 * h);
        assert_abs_diff_eq!(elu_grad(x), fd, epsilon = 1e-8);
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = glorot_uniform_init(500, 500, &mut rng).unwrap();
        assert_eq!(w.dim(), (500, 500));
        let l = glorot_limit(500, 500);
        assert_abs_diff_eq!(l, 0.07746, epsilon = 1e-5);
        assert!(w.iter().all(|v| v.abs() < l));
        let a = glorot_uniform_init(7, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = glorot_uniform_init(7, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(glorot_uniform_init(0, 3, &mut rng).is_err());
    }

    #[test]
    fn glorot_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = glorot_uniform_init(1000, 1000, &mut rng).unwrap();
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = glorot_limit(1000, 1000).powi(2) / 3.0;
        assert!((var / expected - 1.0).abs() < 0.02, "var {var} vs {expected}");
    }

    #[test]
    fn fresh_biases_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Mlp::new_glorot(Architecture::square(5, 3), &mut rng).unwrap();
        assert!(model.layers().iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
        assert_eq!(model.input_dim(), 5);
        assert_eq!(model.output_dim(), 5);
    }

    #[test]
    fn zero_model_outputs_zero() {
        let model = Mlp::from_layers(vec![DenseLayer::zeros(3, 4), DenseLayer::zeros(4, 2)]).unwrap();
        let out = model.predict(&array![[0.3, -0.2, 0.9], [1.0, 1.0, 1.0]]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer() {
        let layer = DenseLayer {
            weights: array![[2.5]],
            biases: array![0.0],
        };
        let model = Mlp::from_layers(vec![layer]).unwrap();
        let out = model.predict(&array![[0.4], [-2.0]]).unwrap();
        assert_eq!(out, array![[1.0], [-5.0]]);
    }

    /// Straight-line re-implementation with plain loops.
    fn oracle_forward(model: &Mlp, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut act: Vec<Vec<f64>> = x.to_vec();
        let n = model.layers().len();
        for (l, layer) in model.layers().iter().enumerate() {
            act = act
                .iter()
                .map(|row| {
                    (0..layer.out_units())
                        .map(|o| {
                            let mut z = layer.biases[o];
                            for i in 0..layer.in_units() {
                                z += layer.weights[[o, i]] * row[i];
                            }
                            if l + 1 == n {
                                z
                            } else if z > 0.0 {
                                z
                            } else {
                                z.exp() - 1.0
                            }
                        })
                        .collect()
                })
                .collect();
        }
        act
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = Mlp::new_glorot(
            Architecture {
                input_dim: 4,
                units: 6,
                layers: 2,
                output_dim: 3,
            },
            &mut rng,
        )
        .unwrap();
        let mut p = model.flat_params();
        for (i, v) in p.iter_mut().enumerate() {
            *v += 0.01 * (i as f64).sin();
        }
        model.set_flat_params(&p).unwrap();
        let x: Vec<Vec<f64>> = (0..5)
            .map(|r| (0..4).map(|c| ((r * 4 + c) as f64 * 0.37).cos()).collect())
            .collect();
        let batch = Array2::from_shape_fn((5, 4), |(r, c)| x[r][c]);
        let out = model.predict(&batch).unwrap();
        let want = oracle_forward(&model, &x);
        for r in 0..5 {
            for c in 0..3 {
                assert_abs_diff_eq!(out[[r, c]], want[r][c], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn shape_and_overflow_errors() {
        let model = Mlp::from_layers(vec![DenseLayer::zeros(3, 2)]).unwrap();
        assert!(matches!(
            model.forward(&Array2::zeros((2, 4))),
            Err(Error::ShapeMismatch(_))
        ));
        let big = Mlp::from_layers(vec![DenseLayer {
            weights: array![[1e308, 1e308]],
            biases: array![0.0],
        }])
        .unwrap();
        assert!(matches!(
            big.forward(&array![[10.0, 10.0]]),
            Err(Error::NumericOverflow { .. })
        ));
        assert!(Mlp::from_layers(vec![DenseLayer::zeros(3, 2), DenseLayer::zeros(3, 1)]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = Mlp::new_glorot(Architecture::square(3, 3), &mut rng).unwrap();
        let x = array![[0.1, 0.2, -0.3], [0.5, -0.5, 0.0]];
        let (out, cache) = model.forward(&x).unwrap();
        let g = model.backward(&cache, &Array2::zeros(out.dim())).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_sum_loss_gradient() {
        let layer = DenseLayer {
            weights: array![[0.3, -0.7], [1.1, 0.2], [0.0, 0.5]],
            biases: array![0.1, 0.0, -0.2],
        };
        let model = Mlp::from_layers(vec![layer]).unwrap();
        let x = array![[1.0, 2.0], [-0.5, 3.0], [0.25, -1.0]];
        let (out, cache) = model.forward(&x).unwrap();
        let g = model.backward(&cache, &Array2::ones(out.dim())).unwrap();
        let colsum = x.sum_axis(Axis(0));
        for o in 0..3 {
            for i in 0..2 {
                assert_abs_diff_eq!(g.weights[0][[o, i]], colsum[i], epsilon = 1e-14);
            }
            assert_eq!(g.biases[0][o], 3.0);
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = Mlp::new_glorot(Architecture::square(2, 2), &mut rng).unwrap();
        let (out, cache) = model.forward(&array![[0.1, 0.2]]).unwrap();
        let p = model.flat_params();
        model.set_flat_params(&p).unwrap();
        assert!(matches!(
            model.backward(&cache, &Array2::zeros(out.dim())),
            Err(Error::StaleCache(_))
        ));
    }

    fn fd_check(seed: u64, arch: Architecture, rows: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Mlp::new_glorot(arch, &mut rng).unwrap();
        // Nonzero biases so the check also covers bias gradients away from trivial values.
        let mut p = model.flat_params();
        for v in p.iter_mut() {
            *v += 0.3 * (rng.gen::<f64>() - 0.5);
        }
        model.set_flat_params(&p).unwrap();
        let x = Array2::from_shape_simple_fn((rows, arch.input_dim), || rng.gen_range(-1.0..1.0));
        let c = Array2::from_shape_simple_fn((rows, arch.output_dim), || rng.gen_range(-1.0..1.0));
        // loss = Σ c ⊙ out + ½ Σ out²
        let loss = |m: &Mlp| {
            let out = m.predict(&x).unwrap();
            (&out * &c).sum() + 0.5 * out.mapv(|v| v * v).sum()
        };
        let (out, cache) = model.forward(&x).unwrap();
        let upstream = &c + &out;
        let analytic = model.backward(&cache, &upstream).unwrap().flatten();
        let h = 1e-5;
        let mut probe = model.clone();
        for (k, &a) in analytic.iter().enumerate() {
            let mut q = p.clone();
            q[k] += h;
            probe.set_flat_params(&q).unwrap();
            let up = loss(&probe);
            q[k] -= 2.0 * h;
            probe.set_flat_params(&q).unwrap();
            let down = loss(&probe);
            let fd = (up - down) / (2.0 * h);
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: analytic {a}, fd {fd}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        fd_check(21, Architecture::square(3, 3), 4);
        fd_check(
            22,
            Architecture {
                input_dim: 2,
                units: 7,
                layers: 4,
                output_dim: 5,
            },
            6,
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gradient_check_random_models(
            seed in 0u64..10_000,
            input_dim in 1usize..6,
            units in 1usize..16,
            layers in 1usize..=4,
            output_dim in 1usize..6,
            rows in 1usize..=8,
        ) {
            fd_check(seed, Architecture { input_dim, units, layers, output_dim }, rows);
        }

        #[test]
        fn elu_grad_is_derivative(x in prop_oneof![-5.0f64..-1e-3, 1e-3f64..5.0]) {
            let h = 1e-6;
            let fd = (elu(x + h) - elu(x - h)) / (2.0 * h);
            prop_assert!((fd - elu_grad(x)).abs() < 1e-6);
        }
    }
}

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::spectral::{sigma_estimate, spectral_normalize, SpectralState};
use super::NetError;
use crate::gradcore::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weight: Tensor,
    /// `out × 1`.
    pub bias: Tensor,
    pub spectral: Option<SpectralState>,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize, spectral_iters: Option<usize>) -> Self {
        DenseLayer {
            weight: Tensor::zeros(output, input),
            bias: Tensor::zeros(output, 1),
            spectral: spectral_iters.map(|n| SpectralState::new(output, n)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Weight used in the forward pass, without touching the power-iteration
    /// state.
    pub fn effective_weight(&self) -> Tensor {
        match &self.spectral {
            Some(st) => self.weight.scale(1.0 / sigma_estimate(&self.weight, &st.u)),
            None => self.weight.clone(),
        }
    }
}

/// How spectral layers pick σ when a network is bound to a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMode {
    /// Advance the persisted power iteration, then normalize.
    Update,
    /// Use σ from the current `u` and leave the state untouched.
    Frozen,
}

/// Multilayer perceptron with leaky-ReLU between layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub slope: f64,
}

/// Parameter leaves and normalized weights of an [`Mlp`] recorded on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    weights: Vec<Var>,
    biases: Vec<Var>,
    /// Transposed effective weights, `in × out`.
    effective_t: Vec<Var>,
}

impl BoundMlp {
    /// Parameter leaves in [`Mlp::params`] order.
    pub fn param_vars(&self) -> Vec<Var> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(&w, &b)| [w, b])
            .collect()
    }
}

impl Mlp {
    /// Zero-initialized network with the given layer widths, e.g. `[2, 100, 100, 1]`.
    pub fn new(dims: &[usize], slope: f64, spectral_iters: Option<usize>) -> Result<Self, NetError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NetError::Architecture(format!("invalid layer widths {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1], spectral_iters))
            .collect();
        Ok(Mlp { layers, slope })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::output_dim)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(DenseLayer::output_dim));
        d
    }

    /// Xavier-uniform weights, zero biases, random unit `u` vectors;
    /// deterministic in `rng`.
    pub fn init_params<R: Rng>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            let (fan_out, fan_in) = layer.weight.shape();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            layer.weight.data_mut().iter_mut().for_each(|w| *w = dist.sample(rng));
            layer.bias.data_mut().iter_mut().for_each(|b| *b = 0.0);
            if let Some(st) = &mut layer.spectral {
                let mut u: Vec<f64> = (0..fan_out).map(|_| StandardNormal.sample(rng)).collect();
                let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                u.iter_mut().for_each(|x| *x /= n);
                st.u = Tensor::column(&u);
            }
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Plain forward pass on `x[m × d_in]`, no tape.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NetError> {
        self.check_input(x)?;
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = layer.effective_weight();
            let mut z = crate::gradcore::Tensor::matmul(&h, &w.transpose())?;
            let n = z.cols();
            for (k, v) in z.data_mut().iter_mut().enumerate() {
                *v += layer.bias.data()[k % n];
            }
            if i < last {
                let s = self.slope;
                z = z.map(|v| if v > 0.0 { v } else { s * v });
            }
            h = z;
        }
        Ok(h)
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NetError> {
        if x.cols() != self.input_dim() {
            return Err(NetError::Architecture(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Records parameters on `tape`. Spectral layers are divided by σ as a
    /// constant, so no gradient flows through the normalizer.
    pub fn bind(&mut self, tape: &mut Tape, mode: SpectralMode) -> Result<BoundMlp, NetError> {
        let mut bound = BoundMlp {
            weights: Vec::with_capacity(self.layers.len()),
            biases: Vec::with_capacity(self.layers.len()),
            effective_t: Vec::with_capacity(self.layers.len()),
        };
        for layer in &mut self.layers {
            let w = tape.leaf(layer.weight.clone());
            let b = tape.leaf(layer.bias.clone());
            let eff = match &mut layer.spectral {
                Some(st) => {
                    let sigma = match mode {
                        SpectralMode::Update => spectral_normalize(&layer.weight, st).1,
                        SpectralMode::Frozen => sigma_estimate(&layer.weight, &st.u),
                    };
                    tape.scale(w, 1.0 / sigma)
                }
                None => w,
            };
            bound.weights.push(w);
            bound.biases.push(b);
            bound.effective_t.push(tape.transpose(eff));
        }
        Ok(bound)
    }

    /// Forward pass of a bound network on a tape node `x[m × d_in]`.
    pub fn forward_on(&self, tape: &mut Tape, bound: &BoundMlp, x: Var) -> Result<Var, NetError> {
        self.check_input(tape.value(x))?;
        let last = self.layers.len() - 1;
        let mut h = x;
        for i in 0..self.layers.len() {
            let z = tape.matmul(h, bound.effective_t[i])?;
            h = tape.add_bias(z, bound.biases[i])?;
            if i < last {
                h = tape.leaky_relu(h, self.slope);
            }
        }
        Ok(h)
    }

    /// Named tensors for checkpointing: weights, biases, and spectral `u`s.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.weight"), &l.weight));
            out.push((format!("layer{i}.bias"), &l.bias));
            if let Some(st) = &l.spectral {
                out.push((format!("layer{i}.spectral_u"), &st.u));
            }
        }
        out
    }

    /// Loads tensors written by [`Mlp::named_tensors`]; names and shapes must
    /// match this architecture exactly.
    pub fn load_named_tensors(&mut self, named: Vec<(String, Tensor)>) -> Result<(), NetError> {
        let expected: Vec<(String, (usize, usize))> = self
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape()))
            .collect();
        let got: Vec<(String, (usize, usize))> =
            named.iter().map(|(n, t)| (n.clone(), t.shape())).collect();
        if expected != got {
            return Err(NetError::Architecture(format!(
                "checkpoint layout {got:?} does not match network {expected:?}"
            )));
        }
        let mut it = named.into_iter().map(|(_, t)| t);
        for l in &mut self.layers {
            l.weight = it.next().expect("checked");
            l.bias = it.next().expect("checked");
            if let Some(st) = &mut l.spectral {
                st.u = it.next().expect("checked");
            }
        }
        Ok(())
    }
}

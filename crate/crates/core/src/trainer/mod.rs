//! Alternating critic/generator training with per-epoch divergence logging,
//! periodic NLL/MMD evaluation, and bit-exact checkpoints.
//!
//! A single `seed` governs initialization, shuffling, latent draws, and
//! evaluation draws through separate ChaCha streams, so a run is a pure
//! function of its config.

mod checkpoint;
mod config;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{ConfigError, DatasetConfig, LossVariant, TrainConfig, CONFIG_VERSION};

use crate::datasets::{self, DataError};
use crate::evalkit::{self, EvalError, MetricRecord};
use crate::gradcore::{Tape, Tensor, Var};
use crate::netkit::{sample_latent, Mlp, NetError, RmsProp, SpectralMode};
use crate::objectives::{self, FGenerator, HingeVariant, ObjectiveError, WeightOptions};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite values at epoch {epoch}: {diagnostic}")]
    NonFinite { epoch: usize, diagnostic: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl From<crate::gradcore::GradError> for TrainError {
    fn from(e: crate::gradcore::GradError) -> Self {
        TrainError::Net(e.into())
    }
}

/// Stream ids under the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_LATENT: u64 = 2;
const STREAM_EVAL: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Evaluation stream for `seed`, as a fresh run would start it.
pub fn eval_stream(seed: u64) -> ChaCha8Rng {
    stream(seed, STREAM_EVAL)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rngs {
    pub shuffle: ChaCha8Rng,
    pub latent: ChaCha8Rng,
    pub eval: ChaCha8Rng,
}

/// Training and validation matrices for a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunData {
    pub train: Tensor,
    pub valid: Tensor,
}

/// Loads or samples the data described by `config.dataset`.
pub fn prepare_data(config: &TrainConfig) -> Result<RunData, TrainError> {
    match &config.dataset {
        DatasetConfig::Synthetic { name, n_train, n_valid, data_seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*data_seed);
            let train = datasets::sample_with(*name, *n_train, &mut rng);
            let valid = datasets::sample_with(*name, *n_valid, &mut rng);
            Ok(RunData { train, valid })
        }
        DatasetConfig::Tabular { path, has_header, delimiter, valid_fraction, data_seed } => {
            let raw = datasets::load_csv(path, *has_header, *delimiter as u8)?;
            let split = datasets::standardize_split(&raw, *valid_fraction, *data_seed)?;
            Ok(RunData { train: split.train, valid: split.valid })
        }
    }
}

/// Bandwidths `(h_kde, h_mmd)`: configured values, else 0.25/0.5 for 2-D
/// data, else the median pairwise distance of the validation set.
pub fn resolve_bandwidths(config: &TrainConfig, valid: &Tensor) -> (f64, f64) {
    let fallback = || evalkit::median_heuristic(valid);
    let two_d = valid.cols() == 2;
    let h_kde = config
        .h_kde
        .unwrap_or_else(|| if two_d { evalkit::DEFAULT_H_KDE } else { fallback() });
    let h_mmd = config
        .h_mmd
        .unwrap_or_else(|| if two_d { evalkit::DEFAULT_H_MMD } else { fallback() });
    (h_kde, h_mmd)
}

/// Losses and divergence estimate of the last critic update in a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub critic_loss: f64,
    pub gen_loss: f64,
    pub divergence: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: TrainConfig,
    pub data: RunData,
    pub generator: Mlp,
    pub critic: Mlp,
    pub gen_opt: RmsProp,
    pub critic_opt: RmsProp,
    pub rngs: Rngs,
    /// Completed epochs.
    pub epoch: usize,
    pub log: Vec<MetricRecord>,
    pub h_kde: f64,
    pub h_mmd: f64,
}

fn spectral_mode(enabled: bool) -> SpectralMode {
    // Frozen is a no-op on layers without spectral state.
    if enabled {
        SpectralMode::Update
    } else {
        SpectralMode::Frozen
    }
}

fn stats(t: &Tensor) -> String {
    if t.is_empty() {
        return "empty".into();
    }
    let finite = t.data().iter().filter(|x| x.is_finite()).count();
    format!(
        "mean={:.6e} min={:.6e} max={:.6e} finite={}/{}",
        t.mean(),
        t.min(),
        t.max(),
        finite,
        t.len()
    )
}

impl TrainState {
    /// Builds networks and optimizers from a validated config.
    pub fn new(config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let data = prepare_data(&config)?;
        Self::with_data(config, data)
    }

    pub fn with_data(config: TrainConfig, data: RunData) -> Result<Self, TrainError> {
        config.validate()?;
        let d = data.train.cols();
        if data.valid.cols() != d {
            return Err(TrainError::Config(ConfigError {
                field: "dataset".into(),
                msg: "train/valid dimension mismatch".into(),
            }));
        }
        let power = Some(config.power_iters);
        let mut gen_dims = vec![config.latent_dim];
        gen_dims.extend(&config.hidden);
        gen_dims.push(d);
        let mut critic_dims = vec![d];
        critic_dims.extend(&config.hidden);
        critic_dims.push(1);
        let mut generator = Mlp::new(&gen_dims, config.leaky_slope, power.filter(|_| config.spectral_generator))?;
        let mut critic = Mlp::new(&critic_dims, config.leaky_slope, power.filter(|_| config.spectral_critic))?;
        let mut init = stream(config.seed, STREAM_INIT);
        generator.init_params(&mut init);
        critic.init_params(&mut init);
        let gen_opt = RmsProp::new(config.optimizer, &generator.params());
        let critic_opt = RmsProp::new(config.optimizer, &critic.params());
        let (h_kde, h_mmd) = resolve_bandwidths(&config, &data.valid);
        Ok(TrainState {
            rngs: Rngs {
                shuffle: stream(config.seed, STREAM_SHUFFLE),
                latent: stream(config.seed, STREAM_LATENT),
                eval: stream(config.seed, STREAM_EVAL),
            },
            config,
            data,
            generator,
            critic,
            gen_opt,
            critic_opt,
            epoch: 0,
            log: Vec::new(),
            h_kde,
            h_mmd,
        })
    }

    fn weight_options(&self) -> WeightOptions {
        WeightOptions {
            temp: self.config.temp,
            detach: self.config.detach_weights,
            force_unit: self.config.force_unit_weights,
        }
    }

    fn non_finite(&self, what: &str, parts: &[(&str, &Tensor)]) -> TrainError {
        let mut diagnostic = format!("{what} ({})", self.config.loss_variant.as_str());
        for (name, t) in parts {
            diagnostic.push_str(&format!("; {name}: {}", stats(t)));
        }
        TrainError::NonFinite { epoch: self.epoch + 1, diagnostic }
    }

    /// Divergence estimate logged for this loss variant.
    pub fn divergence_estimate(&self, t_p: &Tensor, t_q: &Tensor) -> Result<f64, ObjectiveError> {
        match self.config.loss_variant {
            LossVariant::Wgan => objectives::estimator_ipm(t_p, t_q),
            LossVariant::Klwgan => objectives::estimator_dv(t_p, t_q),
            LossVariant::FganKl => objectives::estimator_nwj(FGenerator::Kl, t_p, t_q),
        }
    }

    fn critic_objective(&self, tape: &mut Tape, t_p: Var, t_q: Var) -> Result<Var, TrainError> {
        Ok(match self.config.loss_variant {
            LossVariant::Wgan | LossVariant::Klwgan => {
                let variant = if self.config.loss_variant == LossVariant::Wgan {
                    HingeVariant::Wgan
                } else {
                    HingeVariant::KlWgan
                };
                let (real, fake) = objectives::critic_loss(tape, variant, t_p, t_q, self.weight_options())?;
                tape.add(real, fake)?
            }
            LossVariant::FganKl => objectives::fgan_kl_critic_loss(tape, t_p, t_q)?,
        })
    }

    fn generator_objective(&self, tape: &mut Tape, t_q: Var) -> Result<Var, TrainError> {
        Ok(match self.config.loss_variant {
            LossVariant::Wgan => objectives::gen_loss(tape, HingeVariant::Wgan, t_q, self.weight_options())?,
            LossVariant::Klwgan => objectives::gen_loss(tape, HingeVariant::KlWgan, t_q, self.weight_options())?,
            LossVariant::FganKl => objectives::fgan_kl_gen_loss(tape, t_q)?,
        })
    }

    /// One critic update per real batch, then one generator update.
    pub fn train_step(&mut self, real_batches: &[Tensor]) -> Result<StepMetrics, TrainError> {
        let m = self.config.batch_size;
        if real_batches.len() != self.config.critic_steps || real_batches.iter().any(|b| b.rows() != m) {
            return Err(TrainError::Config(ConfigError {
                field: "batch_size".into(),
                msg: format!("train_step needs {} batches of {m} rows", self.config.critic_steps),
            }));
        }
        let spectral_critic = spectral_mode(self.config.spectral_critic);
        let spectral_gen = spectral_mode(self.config.spectral_generator);
        let mut critic_loss = f64::NAN;
        let mut divergence = f64::NAN;

        for real in real_batches {
            let z = sample_latent(m, self.config.latent_dim, &mut self.rngs.latent);
            let fake = self.generator.forward(&z)?;
            let mut tape = Tape::new();
            let bound = self.critic.bind(&mut tape, spectral_critic)?;
            let xp = tape.constant(real.clone());
            let xq = tape.constant(fake.clone());
            let t_p = self.critic.forward_on(&mut tape, &bound, xp)?;
            let t_q = self.critic.forward_on(&mut tape, &bound, xq)?;
            let loss = self.critic_objective(&mut tape, t_p, t_q)?;
            let (tp_val, tq_val) = (tape.value(t_p).clone(), tape.value(t_q).clone());
            critic_loss = tape.value(loss).item();
            if !critic_loss.is_finite() {
                return Err(self.non_finite(
                    "critic loss",
                    &[("real", real), ("fake", &fake), ("T_P", &tp_val), ("T_Q", &tq_val)],
                ));
            }
            let grads = tape.backward(loss)?;
            let g: Vec<Tensor> = bound.param_vars().into_iter().map(|v| grads.wrt(v)).collect();
            if g.iter().any(|t| !t.all_finite()) {
                return Err(self.non_finite("critic gradient", &[("T_P", &tp_val), ("T_Q", &tq_val)]));
            }
            self.critic_opt.step(&mut self.critic.params_mut(), &g);
            divergence = self.divergence_estimate(&tp_val, &tq_val)?;
        }

        let z = sample_latent(m, self.config.latent_dim, &mut self.rngs.latent);
        let mut tape = Tape::new();
        let gen_bound = self.generator.bind(&mut tape, spectral_gen)?;
        let critic_bound = self.critic.bind(&mut tape, spectral_critic)?;
        let zv = tape.constant(z);
        let x = self.generator.forward_on(&mut tape, &gen_bound, zv)?;
        let t_q = self.critic.forward_on(&mut tape, &critic_bound, x)?;
        let loss = self.generator_objective(&mut tape, t_q)?;
        let gen_loss = tape.value(loss).item();
        if !gen_loss.is_finite() {
            let tq_val = tape.value(t_q).clone();
            let fake = tape.value(x).clone();
            return Err(self.non_finite("generator loss", &[("fake", &fake), ("T_Q", &tq_val)]));
        }
        let grads = tape.backward(loss)?;
        let g: Vec<Tensor> = gen_bound.param_vars().into_iter().map(|v| grads.wrt(v)).collect();
        if g.iter().any(|t| !t.all_finite()) {
            let tq_val = tape.value(t_q).clone();
            return Err(self.non_finite("generator gradient", &[("T_Q", &tq_val)]));
        }
        self.gen_opt.step(&mut self.generator.params_mut(), &g);

        Ok(StepMetrics { critic_loss, gen_loss, divergence })
    }

    /// Draws `n` generator samples from the evaluation stream.
    pub fn generate(&mut self, n: usize) -> Result<Tensor, TrainError> {
        let z = sample_latent(n, self.config.latent_dim, &mut self.rngs.eval);
        Ok(self.generator.forward(&z)?)
    }

    /// Divergence estimate on a held-aside batch: validation rows drawn
    /// without replacement and fresh generator samples.
    fn held_aside_divergence(&mut self) -> Result<f64, TrainError> {
        let k = self.config.divergence_batch.min(self.data.valid.rows());
        let idx: Vec<usize> =
            rand::seq::index::sample(&mut self.rngs.eval, self.data.valid.rows(), k).into_vec();
        let real = self.data.valid.select_rows(&idx);
        let fake = self.generate(self.config.divergence_batch)?;
        let t_p = self.critic.forward(&real)?;
        let t_q = self.critic.forward(&fake)?;
        let d = self.divergence_estimate(&t_p, &t_q)?;
        if !d.is_finite() {
            return Err(self.non_finite("divergence estimate", &[("T_P", &t_p), ("T_Q", &t_q)]));
        }
        Ok(d)
    }

    /// `(nll, mmd²)` of a fresh `eval_samples` generation against validation.
    pub fn evaluate(&mut self) -> Result<(f64, f64), TrainError> {
        let gen = self.generate(self.config.eval_samples)?;
        if !gen.all_finite() {
            return Err(self.non_finite("generated samples", &[("fake", &gen)]));
        }
        let nll = evalkit::kde_nll(&gen, &self.data.valid, self.h_kde)?;
        let mmd = evalkit::mmd2_gaussian(&gen, &self.data.valid, self.h_mmd)?;
        Ok((nll, mmd))
    }

    /// Runs one epoch over shuffled full batches and appends its record.
    pub fn run_epoch(&mut self) -> Result<&MetricRecord, TrainError> {
        let m = self.config.batch_size;
        let k = self.config.critic_steps;
        let mut order: Vec<usize> = (0..self.data.train.rows()).collect();
        order.shuffle(&mut self.rngs.shuffle);
        let batches: Vec<Tensor> = order
            .chunks_exact(m)
            .map(|idx| self.data.train.select_rows(idx))
            .collect();
        for group in batches.chunks_exact(k) {
            self.train_step(group)?;
        }
        let divergence = self.held_aside_divergence()?;
        let epoch = self.epoch + 1;
        let (nll, mmd) = if epoch % self.config.eval_every == 0 || epoch == self.config.epochs {
            let (n, d) = self.evaluate()?;
            (Some(n), Some(d))
        } else {
            (None, None)
        };
        self.epoch = epoch;
        self.log.push(MetricRecord { epoch, divergence, nll, mmd });
        Ok(self.log.last().expect("just pushed"))
    }

    /// Runs epochs until `config.epochs`, calling `after_epoch` after each.
    pub fn run_to_end<F>(&mut self, mut after_epoch: F) -> Result<(), TrainError>
    where
        F: FnMut(&TrainState) -> Result<(), TrainError>,
    {
        while self.epoch < self.config.epochs {
            self.run_epoch()?;
            after_epoch(self)?;
        }
        Ok(())
    }
}

/// Trains from scratch per `config`.
pub fn train(config: TrainConfig) -> Result<TrainState, TrainError> {
    let mut state = TrainState::new(config)?;
    state.run_to_end(|_| Ok(()))?;
    Ok(state)
}

/// Trailing moving average of the logged divergence estimates.
pub fn divergence_curve(log: &[MetricRecord], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let values: Vec<f64> = log.iter().map(|r| r.divergence).collect();
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

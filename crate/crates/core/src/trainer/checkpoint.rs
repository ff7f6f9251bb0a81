//! Checkpoint directory layout:
//!
//! - `generator.csv`, `critic.csv`: network parameters (named-tensor CSV)
//! - `generator_opt.csv`, `critic_opt.csv`: RMSProp accumulators
//! - `state.json`: config, epoch, random-stream positions, metrics log

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{prepare_data, Rngs, TrainConfig, TrainError, TrainState};
use crate::csvfmt;
use crate::evalkit::MetricRecord;
use crate::netkit::{load_mlp_into, save_mlp, RmsProp};

#[derive(Serialize, Deserialize)]
struct StreamPos {
    seed: [u8; 32],
    stream: u64,
    /// `u128` word position as a decimal string.
    word_pos: String,
}

impl StreamPos {
    fn of(rng: &ChaCha8Rng) -> Self {
        StreamPos {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng, TrainError> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        let pos = self
            .word_pos
            .parse()
            .map_err(|e| TrainError::Checkpoint(format!("bad word_pos: {e}")))?;
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    config: TrainConfig,
    epoch: usize,
    shuffle: StreamPos,
    latent: StreamPos,
    eval: StreamPos,
    h_kde: f64,
    h_mmd: f64,
    log: Vec<MetricRecord>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> TrainError {
    TrainError::Checkpoint(format!("{}: {e}", path.display()))
}

fn save_opt(opt: &RmsProp, path: &Path) -> Result<(), TrainError> {
    let named: Vec<(String, &crate::gradcore::Tensor)> =
        opt.acc.iter().enumerate().map(|(i, t)| (format!("acc{i}"), t)).collect();
    csvfmt::write_named_tensors(path, &named).map_err(|e| io_err(path, e))
}

fn load_opt(opt: &mut RmsProp, path: &Path) -> Result<(), TrainError> {
    let named = csvfmt::read_named_tensors(path).map_err(|e| io_err(path, e))?;
    if named.len() != opt.acc.len()
        || named.iter().zip(&opt.acc).any(|((_, t), a)| t.shape() != a.shape())
    {
        return Err(io_err(path, "optimizer state does not match the network"));
    }
    opt.acc = named.into_iter().map(|(_, t)| t).collect();
    Ok(())
}

pub fn save_checkpoint(state: &TrainState, dir: &Path) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    save_mlp(&state.generator, &dir.join("generator.csv"))?;
    save_mlp(&state.critic, &dir.join("critic.csv"))?;
    save_opt(&state.gen_opt, &dir.join("generator_opt.csv"))?;
    save_opt(&state.critic_opt, &dir.join("critic_opt.csv"))?;
    let file = StateFile {
        config: state.config.clone(),
        epoch: state.epoch,
        shuffle: StreamPos::of(&state.rngs.shuffle),
        latent: StreamPos::of(&state.rngs.latent),
        eval: StreamPos::of(&state.rngs.eval),
        h_kde: state.h_kde,
        h_mmd: state.h_mmd,
        log: state.log.clone(),
    };
    let path = dir.join("state.json");
    let text = serde_json::to_string_pretty(&file).expect("state serializes");
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))
}

/// Restores a [`TrainState`] written by [`save_checkpoint`]; the data is
/// re-derived from the stored config.
pub fn load_checkpoint(dir: &Path) -> Result<TrainState, TrainError> {
    let path = dir.join("state.json");
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let file: StateFile = serde_json::from_str(&text).map_err(|e| io_err(&path, e))?;
    let data = prepare_data(&file.config)?;
    let mut state = TrainState::with_data(file.config, data)?;
    load_mlp_into(&mut state.generator, &dir.join("generator.csv"))?;
    load_mlp_into(&mut state.critic, &dir.join("critic.csv"))?;
    load_opt(&mut state.gen_opt, &dir.join("generator_opt.csv"))?;
    load_opt(&mut state.critic_opt, &dir.join("critic_opt.csv"))?;
    state.rngs = Rngs {
        shuffle: file.shuffle.restore()?,
        latent: file.latent.restore()?,
        eval: file.eval.restore()?,
    };
    state.epoch = file.epoch;
    state.h_kde = file.h_kde;
    state.h_mmd = file.h_mmd;
    state.log = file.log;
    Ok(state)
}

//! Training loop: standard (SAT) and fault-aware (FAT) training with
//! ADAM, a halving learning-rate schedule, and a per-epoch CSV log.
//!
//! Methods differ only in which injection layers are enabled:
//!
//! * `Sat` — every injection layer disabled; the run is bit-identical
//!   to the same network with the layers physically removed.
//! * `Fat1` — every injection layer enabled at the configured p.
//! * `Fat2` — one injection layer enabled per epoch, chosen uniformly
//!   from a dedicated random stream so the schedule is independent of
//!   the injected values.
//!
//! The Dropout2D baseline is a topology choice (see `CnvOptions`), and
//! trains with `Sat` since its dropout layers are always live in
//! training mode. All methods run the same number of optimizer steps
//! per epoch; the final partial batch is dropped so batch statistics
//! are always well-formed.

use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::inject::InjectionStatus;
use crate::net::Network;
use crate::optim::Adam;
use crate::rng::{streams, SeedFanout};
use crate::sweep::evaluate_accuracy;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    Sat,
    Fat1,
    Fat2,
}

impl std::fmt::Display for TrainMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainMethod::Sat => write!(f, "sat"),
            TrainMethod::Fat1 => write!(f, "fat1"),
            TrainMethod::Fat2 => write!(f, "fat2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: TrainMethod,
    /// Injection probability in percent; used by the FAT methods.
    pub injection_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    /// The learning rate halves every this many epochs.
    pub lr_halving_period: usize,
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: TrainMethod::Sat,
            injection_p: 0.0,
            epochs: 40,
            batch_size: 100,
            initial_lr: 0.02,
            lr_halving_period: 40,
            eval_batch_size: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub test_acc: f64,
    pub lr: f64,
    /// The single enabled injection layer for `Fat2`; empty otherwise.
    pub enabled_layer: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    pub steps_per_epoch: usize,
}

/// Learning rate at `epoch`: the initial rate halved once per period.
pub fn lr_at(initial_lr: f64, halving_period: usize, epoch: usize) -> f64 {
    initial_lr * 0.5f64.powi((epoch / halving_period) as i32)
}

/// Uniform choice of the injection layer to enable this epoch.
pub fn select_epoch_layer(n_injection_layers: usize, rng: &mut impl Rng) -> usize {
    rng.gen_range(0..n_injection_layers)
}

fn validate(net: &Network, data: &DatasetHandle, cfg: &TrainConfig) -> Result<()> {
    if cfg.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }
    if cfg.batch_size < 2 {
        return Err(Error::Config(
            "batch size must be at least 2 for batch statistics".into(),
        ));
    }
    if data.train.n < cfg.batch_size {
        return Err(Error::Config(format!(
            "training set of {} smaller than batch size {}",
            data.train.n, cfg.batch_size
        )));
    }
    if !(cfg.initial_lr.is_finite() && cfg.initial_lr > 0.0) {
        return Err(Error::Config(format!(
            "initial learning rate {} must be positive",
            cfg.initial_lr
        )));
    }
    if cfg.lr_halving_period == 0 {
        return Err(Error::Config("lr halving period must be at least 1".into()));
    }
    if cfg.eval_batch_size == 0 {
        return Err(Error::Config("eval batch size must be positive".into()));
    }
    match cfg.method {
        TrainMethod::Sat => Ok(()),
        TrainMethod::Fat1 | TrainMethod::Fat2 => {
            if net.injection_points().is_empty() {
                return Err(Error::Config(
                    "fault-aware training needs at least one injection point".into(),
                ));
            }
            if !(0.0..=100.0).contains(&cfg.injection_p) {
                return Err(Error::Config(format!(
                    "injection probability {} outside [0, 100]",
                    cfg.injection_p
                )));
            }
            Ok(())
        }
    }
}

/// Train `net` in place. The caller is responsible for weight
/// initialization (typically from the `weights-init` stream of the same
/// fan-out), so checkpointed networks can be trained further.
///
/// `epoch_hook` runs after each epoch's log record is final; returning
/// an error aborts training.
pub fn train(
    net: &mut Network,
    data: &DatasetHandle,
    cfg: &TrainConfig,
    fanout: &SeedFanout,
    mut epoch_hook: impl FnMut(usize, &Network, &EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    validate(net, data, cfg)?;
    let mut shuffle_rng = fanout.stream(streams::BATCH_SHUFFLE);
    let mut inject_rng = fanout.stream(streams::INJECTION_VALUES);
    let mut layer_rng = fanout.stream(streams::FAT2_LAYER_CHOICE);

    match cfg.method {
        TrainMethod::Sat => net.set_injection_status(InjectionStatus::Disable),
        TrainMethod::Fat1 => {
            net.set_injection_p(cfg.injection_p)?;
            net.set_injection_status(InjectionStatus::Enable);
        }
        TrainMethod::Fat2 => net.set_injection_p(cfg.injection_p)?,
    }

    let steps_per_epoch = data.train.n / cfg.batch_size;
    let mut adam = Adam::default();
    let mut order: Vec<usize> = (0..data.train.n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let enabled_layer = match cfg.method {
            TrainMethod::Fat2 => {
                let chosen = select_epoch_layer(net.injection_points().len(), &mut layer_rng);
                net.set_injection_status(InjectionStatus::Disable);
                net.set_injection_status_at(chosen, InjectionStatus::Enable)?;
                Some(chosen)
            }
            _ => None,
        };
        let lr = lr_at(cfg.initial_lr, cfg.lr_halving_period, epoch);
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0f64;
        for step in 0..steps_per_epoch {
            let batch = &order[step * cfg.batch_size..(step + 1) * cfg.batch_size];
            let (x, labels) = data.train.batch(batch)?;
            net.zero_grads();
            let (logits, caches) = net.forward_train(&x, &mut inject_rng)?;
            if logits.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite logits at epoch {epoch}, step {step}"
                )));
            }
            let (loss, grad) = crate::loss::squared_hinge(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, step {step}"
                )));
            }
            net.backward(&caches, &grad)?;
            adam.step(lr, &mut net.param_pairs())?;
            net.clip_latent_weights();
            loss_sum += loss;
        }

        let test_acc = evaluate_accuracy(net, &data.test, cfg.eval_batch_size, None)?;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / steps_per_epoch as f64,
            test_acc,
            lr,
            enabled_layer,
        };
        epoch_hook(epoch, net, &record)?;
        log.push(record);
    }
    Ok(TrainOutcome {
        log,
        steps_per_epoch,
    })
}

/// Training log CSV: epoch, mean loss, test accuracy, learning rate,
/// enabled injection layer (blank unless Fat2).
pub fn training_log_to_csv(log: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,loss,test_acc,lr,enabled_layer\n");
    for r in log {
        let layer = r.enabled_layer.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.6},{:.2},{},{}\n",
            r.epoch, r.loss, r.test_acc, r.lr, layer
        ));
    }
    out
}

pub fn parse_training_log_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty training log".into()))?;
    if header != "epoch,loss,test_acc,lr,enabled_layer" {
        return Err(Error::Format(format!(
            "unexpected training log header: {header}"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Format(format!(
                "training log line {}: expected 5 fields, got {}",
                lineno + 2,
                parts.len()
            )));
        }
        let bad =
            |what: &str| Error::Format(format!("training log line {}: bad {what}", lineno + 2));
        out.push(EpochRecord {
            epoch: parts[0].parse().map_err(|_| bad("epoch"))?,
            loss: parts[1].parse().map_err(|_| bad("loss"))?,
            test_acc: parts[2].parse().map_err(|_| bad("test_acc"))?,
            lr: parts[3].parse().map_err(|_| bad("lr"))?,
            enabled_layer: if parts[4].is_empty() {
                None
            } else {
                Some(parts[4].parse().map_err(|_| bad("enabled_layer"))?)
            },
        });
    }
    Ok(out)
}

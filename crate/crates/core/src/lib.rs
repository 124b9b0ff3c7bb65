//! Fault-aware training and evaluation of small quantized CNNs.
//!
//! The crate covers the full experiment pipeline:
//!
//! * [`tensor`], [`layers`], [`loss`], [`optim`] — a minimal NCHW
//!   deep-learning stack (conv, linear, batch norm, max pool,
//!   straight-through quantized activations, squared hinge loss, ADAM).
//! * [`quant`] — symmetric codebooks for 1-4 bit values; 32 means float.
//! * [`inject`] — stuck-at fault injection at channel, pixel or element
//!   granularity, plus the dropout variants used as baselines.
//! * [`net`] — declarative network assembly with shape inference,
//!   injection-point bookkeeping, and the standard small CNN topology.
//! * [`data`] — IDX / CIFAR-10 binary loaders and a deterministic
//!   synthetic glyph set for offline runs.
//! * [`train`] — standard and fault-aware training with reproducible,
//!   named random streams.
//! * [`sweep`] — exhaustive stuck-at sweeps over every injection
//!   location and error value, with CSV / JSON reports.
//! * [`replicate`] — channel criticality ranking, triplication cost,
//!   and the cost vs. worst-case-error frontier.
//! * [`checkpoint`], [`config`] — binary weight snapshots and the TOML
//!   experiment description.
//!
//! Everything is deterministic given the master seed: random state is
//! fanned out to named streams (see [`rng`]), parallel sweeps are
//! order-independent, and all file formats round-trip losslessly.

// The hand-rolled kernels index with explicit loop variables so the
// code lines up with the subscripts in the math; keep that style even
// where an iterator would do.
#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod inject;
pub mod layers;
pub mod loss;
pub mod net;
pub mod optim;
pub mod quant;
pub mod replicate;
pub mod rng;
pub mod sweep;
pub mod tensor;
pub mod train;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint,
};
pub use config::{ExperimentConfig, DATA_DIR_ENV};
pub use data::{Dataset, DatasetHandle};
pub use error::{Error, Result};
pub use inject::{FaultModel, InjectionStatus};
pub use net::{build_cnv, CnvOptions, FaultSpec, FaultTarget, Network};
pub use quant::{make_codebook, QuantCodebook, FLOAT_BITS};
pub use replicate::{pareto_frontier, rank_channels, CostModel, ReplicationPlan};
pub use rng::SeedFanout;
pub use sweep::{summarize, sweep, SweepReport, SweepSummary};
pub use train::{train, TrainConfig, TrainMethod};

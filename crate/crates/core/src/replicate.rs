//! Selective channel replication: rank channels by how badly a stuck-at
//! fault on them can hurt accuracy, model the hardware cost of
//! triplicating a subset, and trace the worst-case-error vs. cost
//! frontier.
//!
//! Cost is a proxy in "LUT-equivalents": the MAC count of the producing
//! layer times both bit widths, with triplicated channels costing 3x
//! (majority voting folded into the multiplier). Triplicated channels
//! are treated as fault-free, so their sweep configurations drop out of
//! the worst-case error.

use crate::error::{Error, Result};
use crate::inject::FaultModel;
use crate::net::{FaultTarget, Network};
use crate::rng::fnv1a64;
use crate::sweep::SweepReport;
use serde::{Deserialize, Serialize};

/// How vulnerable one channel is: its worst accuracy over all stuck-at
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCriticality {
    pub layer: usize,
    pub channel: usize,
    /// Minimum accuracy over all error values for this channel.
    pub min_accuracy: f64,
}

impl ChannelCriticality {
    pub fn worst_case_error(&self) -> f64 {
        100.0 - self.min_accuracy
    }
}

/// The set of (layer, channel) pairs chosen for triplication.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplicationPlan {
    channels: Vec<(usize, usize)>,
}

impl ReplicationPlan {
    pub fn new(mut channels: Vec<(usize, usize)>) -> Self {
        channels.sort_unstable();
        channels.dedup();
        Self { channels }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn contains(&self, layer: usize, channel: usize) -> bool {
        self.channels.binary_search(&(layer, channel)).is_ok()
    }

    pub fn channels(&self) -> &[(usize, usize)] {
        &self.channels
    }

    /// Stable hash of the sorted channel list, as written to the
    /// frontier CSV.
    pub fn list_hash(&self) -> u64 {
        let text: String = self
            .channels
            .iter()
            .map(|(l, c)| format!("{l}:{c};"))
            .collect();
        fnv1a64(text.as_bytes())
    }
}

/// Cost model parameters: bit widths enter multiplicatively, and
/// triplicated channels cost `replication_multiplier` times as much.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostModel {
    pub weight_bits: u32,
    pub act_bits: u32,
    pub replication_multiplier: u64,
}

impl CostModel {
    pub fn from_bits(weight_bits: u8, act_bits: u8) -> Self {
        Self {
            weight_bits: weight_bits as u32,
            act_bits: act_bits as u32,
            replication_multiplier: 3,
        }
    }
}

/// LUT-equivalents to produce one channel: producer MACs times both bit
/// widths.
pub fn channel_cost(producer_macs: usize, cm: &CostModel) -> u64 {
    producer_macs as u64 * cm.weight_bits as u64 * cm.act_bits as u64
}

/// Rank all channels of a channel-sweep report from most to least
/// critical: ascending worst accuracy, ties by (layer, channel).
pub fn rank_channels(report: &SweepReport) -> Result<Vec<ChannelCriticality>> {
    if report.meta.mode != FaultModel::Channel {
        return Err(Error::Config(format!(
            "channel ranking needs a channel sweep, got {} mode",
            report.meta.mode
        )));
    }
    let mut per_channel: Vec<ChannelCriticality> = Vec::new();
    for rec in &report.records {
        let channel = match rec.target {
            FaultTarget::Channel(c) => c,
            FaultTarget::Pixel { .. } => {
                return Err(Error::Config(
                    "pixel record in a channel-mode report".into(),
                ))
            }
        };
        match per_channel
            .iter_mut()
            .find(|cc| cc.layer == rec.layer && cc.channel == channel)
        {
            Some(cc) => cc.min_accuracy = cc.min_accuracy.min(rec.accuracy),
            None => per_channel.push(ChannelCriticality {
                layer: rec.layer,
                channel,
                min_accuracy: rec.accuracy,
            }),
        }
    }
    per_channel.sort_by(|a, b| {
        a.min_accuracy
            .partial_cmp(&b.min_accuracy)
            .expect("finite accuracy")
            .then(a.layer.cmp(&b.layer))
            .then(a.channel.cmp(&b.channel))
    });
    Ok(per_channel)
}

/// Total LUT-equivalents of the network with `plan` triplicated: every
/// swept channel costs its base amount, triplicated ones 3x.
pub fn plan_cost(net: &Network, plan: &ReplicationPlan, cm: &CostModel) -> Result<u64> {
    let points = net.injection_points();
    for &(layer, channel) in plan.channels() {
        let point = points
            .get(layer)
            .ok_or_else(|| Error::Config(format!("plan references injection point {layer}")))?;
        if channel >= point.channels {
            return Err(Error::Config(format!(
                "plan references channel {channel} of injection point {layer} ({} channels)",
                point.channels
            )));
        }
    }
    let mut total = 0u64;
    for point in points {
        let base = channel_cost(point.producer_macs, cm);
        for c in 0..point.channels {
            let mult = if plan.contains(point.ordinal, c) {
                cm.replication_multiplier
            } else {
                1
            };
            total += base * mult;
        }
    }
    Ok(total)
}

/// Worst-case classification error with `plan` protected: 100 minus the
/// minimum accuracy over configurations whose channel is unprotected.
/// With every swept channel protected this is the error-free error.
pub fn worst_case_error(report: &SweepReport, plan: &ReplicationPlan) -> Result<f64> {
    if report.meta.mode != FaultModel::Channel {
        return Err(Error::Config(
            "worst-case error is defined over channel sweeps".into(),
        ));
    }
    let mut min_acc = f64::INFINITY;
    for rec in &report.records {
        let channel = match rec.target {
            FaultTarget::Channel(c) => c,
            FaultTarget::Pixel { .. } => {
                return Err(Error::Config(
                    "pixel record in a channel-mode report".into(),
                ))
            }
        };
        if !plan.contains(rec.layer, channel) {
            min_acc = min_acc.min(rec.accuracy);
        }
    }
    if min_acc.is_infinite() {
        return Ok(100.0 - report.error_free_accuracy);
    }
    Ok(100.0 - min_acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    /// Number of triplicated channels (a prefix of the ranking).
    pub k: usize,
    pub plan_hash: u64,
    pub cost: u64,
    pub worst_case_error: f64,
    /// True when some other point has lower cost and no worse error.
    pub dominated: bool,
}

/// One frontier point per prefix of the criticality ranking,
/// k = 0 ..= number of swept channels, with dominance flags.
pub fn pareto_frontier(
    net: &Network,
    report: &SweepReport,
    cm: &CostModel,
) -> Result<Vec<FrontierPoint>> {
    let ranking = rank_channels(report)?;
    let mut points = Vec::with_capacity(ranking.len() + 1);
    let mut prefix: Vec<(usize, usize)> = Vec::new();
    for k in 0..=ranking.len() {
        if k > 0 {
            let cc = &ranking[k - 1];
            prefix.push((cc.layer, cc.channel));
        }
        let plan = ReplicationPlan::new(prefix.clone());
        points.push(FrontierPoint {
            k,
            plan_hash: plan.list_hash(),
            cost: plan_cost(net, &plan, cm)?,
            worst_case_error: worst_case_error(report, &plan)?,
            dominated: false,
        });
    }
    // Cost is strictly increasing in k, so a point is dominated exactly
    // when an earlier (cheaper) point already achieves its error.
    let mut best = f64::INFINITY;
    for p in &mut points {
        p.dominated = best <= p.worst_case_error;
        best = best.min(p.worst_case_error);
    }
    Ok(points)
}

/// Frontier CSV: one row per ranking prefix.
pub fn frontier_to_csv(points: &[FrontierPoint]) -> String {
    let mut out =
        String::from("k,triplicated_channels_list_hash,cost,worst_case_error,dominated\n");
    for p in points {
        out.push_str(&format!(
            "{},{:016x},{},{:.2},{}\n",
            p.k, p.plan_hash, p.cost, p.worst_case_error, p.dominated
        ));
    }
    out
}

pub fn parse_frontier_csv(text: &str) -> Result<Vec<FrontierPoint>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty frontier CSV".into()))?;
    if header != "k,triplicated_channels_list_hash,cost,worst_case_error,dominated" {
        return Err(Error::Format(format!(
            "unexpected frontier header: {header}"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Format(format!(
                "frontier line {}: expected 5 fields, got {}",
                lineno + 2,
                parts.len()
            )));
        }
        let bad = |what: &str| Error::Format(format!("frontier line {}: bad {what}", lineno + 2));
        out.push(FrontierPoint {
            k: parts[0].parse().map_err(|_| bad("k"))?,
            plan_hash: u64::from_str_radix(parts[1], 16).map_err(|_| bad("hash"))?,
            cost: parts[2].parse().map_err(|_| bad("cost"))?,
            worst_case_error: parts[3].parse().map_err(|_| bad("worst_case_error"))?,
            dominated: match parts[4] {
                "true" => true,
                "false" => false,
                _ => return Err(bad("dominated")),
            },
        });
    }
    Ok(out)
}

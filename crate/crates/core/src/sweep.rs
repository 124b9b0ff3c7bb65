//! Exhaustive stuck-at sweeps over a frozen network.
//!
//! A sweep enumerates every (error value, injection point, target)
//! triple — error value outermost, then layer, then channel or pixel —
//! evaluates test accuracy with that single fault pinned, and gathers
//! the per-configuration accuracies plus min/max/variance summaries.
//! Configurations are independent read-only inferences, so they run as
//! a parallel map with an ordered collect: worker count cannot change
//! the report.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inject::FaultModel;
use crate::net::{FaultSpec, FaultTarget, Network};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const SWEEP_SCHEMA_VERSION: u32 = 1;

/// Geometry of one injection point, carried in report metadata so pixel
/// indices in the CSV can be mapped back to (h, w).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub schema_version: u32,
    pub network_id: String,
    pub dataset: String,
    pub mode: FaultModel,
    pub eval_samples: usize,
    pub layer_geoms: Vec<LayerGeom>,
    /// Wall time is informational only and excluded from determinism
    /// comparisons.
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub layer: usize,
    pub target: FaultTarget,
    pub epsilon: f32,
    pub accuracy: f64,
}

impl SweepRecord {
    pub fn target_kind(&self) -> &'static str {
        match self.target {
            FaultTarget::Channel(_) => "channel",
            FaultTarget::Pixel { .. } => "pixel",
        }
    }

    /// Flat target index as written to CSV: the channel index, or
    /// `h * width + w` for pixels.
    pub fn target_index(&self, geoms: &[LayerGeom]) -> usize {
        match self.target {
            FaultTarget::Channel(c) => c,
            FaultTarget::Pixel { h, w } => h * geoms[self.layer].width + w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub meta: SweepMeta,
    pub error_free_accuracy: f64,
    pub records: Vec<SweepRecord>,
}

/// Top-1 accuracy (percent) over the whole dataset, optionally with one
/// stuck-at fault pinned. Ties in the logits resolve to the lowest
/// class index.
pub fn evaluate_accuracy(
    net: &Network,
    data: &Dataset,
    batch_size: usize,
    fault: Option<&FaultSpec>,
) -> Result<f64> {
    if data.n == 0 {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config(
            "evaluation batch size must be positive".into(),
        ));
    }
    let mut correct = 0usize;
    let mut start = 0usize;
    while start < data.n {
        let end = (start + batch_size).min(data.n);
        let indices: Vec<usize> = (start..end).collect();
        let (x, labels) = data.batch(&indices)?;
        let logits = net.forward_eval(&x, fault)?;
        let classes = logits.shape().c;
        for (row, &label) in labels.iter().enumerate() {
            let scores = &logits.data()[row * classes..(row + 1) * classes];
            let mut best = 0usize;
            for k in 1..classes {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            if best == label {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(100.0 * correct as f64 / data.n as f64)
}

/// Enumerate the fault configurations of a sweep in canonical order:
/// error value outermost, then injection point, then target.
pub fn enumerate_faults(net: &Network, mode: FaultModel) -> Result<Vec<FaultSpec>> {
    if mode == FaultModel::Element {
        return Err(Error::Config(
            "sweeps cover channel or pixel faults, not element".into(),
        ));
    }
    let points = net.injection_points();
    if points.is_empty() {
        return Err(Error::Config(
            "network has no injection points to sweep".into(),
        ));
    }
    let e_max = points.iter().map(|p| p.codebook.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    for k in 0..e_max {
        for point in points {
            if k >= point.codebook.len() {
                continue;
            }
            let epsilon = point.codebook.value(k);
            match mode {
                FaultModel::Channel => {
                    for c in 0..point.channels {
                        out.push(FaultSpec {
                            layer: point.ordinal,
                            target: FaultTarget::Channel(c),
                            epsilon,
                        });
                    }
                }
                FaultModel::Pixel => {
                    for h in 0..point.height {
                        for w in 0..point.width {
                            out.push(FaultSpec {
                                layer: point.ordinal,
                                target: FaultTarget::Pixel { h, w },
                                epsilon,
                            });
                        }
                    }
                }
                FaultModel::Element => unreachable!(),
            }
        }
    }
    Ok(out)
}

/// Expected configuration count: Σ over injection points of
/// (channels or pixels) × codebook size.
pub fn expected_config_count(net: &Network, mode: FaultModel) -> usize {
    net.injection_points()
        .iter()
        .map(|p| {
            let targets = match mode {
                FaultModel::Channel => p.channels,
                FaultModel::Pixel => p.height * p.width,
                FaultModel::Element => 0,
            };
            targets * p.codebook.len()
        })
        .sum()
}

/// Run an exhaustive sweep. `network_id` and `dataset` label the report
/// metadata; geometry and counts are filled in here.
pub fn sweep(
    net: &Network,
    data: &Dataset,
    mode: FaultModel,
    batch_size: usize,
    network_id: &str,
    dataset_name: &str,
) -> Result<SweepReport> {
    let started = std::time::Instant::now();
    let hash_before = net.param_hash();
    let faults = enumerate_faults(net, mode)?;
    let error_free_accuracy = evaluate_accuracy(net, data, batch_size, None)?;
    let accuracies: Result<Vec<f64>> = faults
        .par_iter()
        .map(|f| evaluate_accuracy(net, data, batch_size, Some(f)))
        .collect();
    let accuracies = accuracies?;
    if net.param_hash() != hash_before {
        return Err(Error::Config(
            "internal error: sweep mutated network parameters".into(),
        ));
    }
    let records = faults
        .into_iter()
        .zip(accuracies)
        .map(|(f, accuracy)| SweepRecord {
            layer: f.layer,
            target: f.target,
            epsilon: f.epsilon,
            accuracy,
        })
        .collect();
    let layer_geoms = net
        .injection_points()
        .iter()
        .map(|p| LayerGeom {
            channels: p.channels,
            height: p.height,
            width: p.width,
        })
        .collect();
    Ok(SweepReport {
        meta: SweepMeta {
            schema_version: SWEEP_SCHEMA_VERSION,
            network_id: network_id.to_string(),
            dataset: dataset_name.to_string(),
            mode,
            eval_samples: data.n,
            layer_geoms,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
        error_free_accuracy,
        records,
    })
}

/// Min/max accuracy over one (layer, epsilon) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub layer: usize,
    pub epsilon: f32,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub error_free_accuracy: f64,
    pub groups: Vec<GroupStat>,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    /// Population variance over every per-configuration accuracy.
    pub variance: f64,
}

pub fn summarize(report: &SweepReport) -> Result<SweepSummary> {
    if report.records.is_empty() {
        return Err(Error::Config("cannot summarize an empty sweep".into()));
    }
    let mut groups: Vec<GroupStat> = Vec::new();
    for rec in &report.records {
        match groups
            .iter_mut()
            .find(|g| g.layer == rec.layer && g.epsilon == rec.epsilon)
        {
            Some(g) => {
                g.min_accuracy = g.min_accuracy.min(rec.accuracy);
                g.max_accuracy = g.max_accuracy.max(rec.accuracy);
                g.count += 1;
            }
            None => groups.push(GroupStat {
                layer: rec.layer,
                epsilon: rec.epsilon,
                min_accuracy: rec.accuracy,
                max_accuracy: rec.accuracy,
                count: 1,
            }),
        }
    }
    groups.sort_by(|a, b| {
        a.layer
            .cmp(&b.layer)
            .then(a.epsilon.partial_cmp(&b.epsilon).expect("finite epsilon"))
    });
    let accs: Vec<f64> = report.records.iter().map(|r| r.accuracy).collect();
    let min_accuracy = accs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_accuracy = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Welford's online algorithm; the tests cross-check with a plain
    // two-pass computation.
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for (i, &a) in accs.iter().enumerate() {
        let delta = a - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (a - mean);
    }
    let variance = m2 / accs.len() as f64;
    Ok(SweepSummary {
        error_free_accuracy: report.error_free_accuracy,
        groups,
        min_accuracy,
        max_accuracy,
        variance,
    })
}

// --- CSV emission and parsing -------------------------------------------

/// One row per fault configuration. Accuracy is a percentage with two
/// decimal places; epsilon prints as the shortest f32 representation.
pub fn report_to_csv(report: &SweepReport) -> String {
    let mut out = String::from("layer,target_kind,target_index,epsilon,accuracy\n");
    for rec in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{:.2}\n",
            rec.layer,
            rec.target_kind(),
            rec.target_index(&report.meta.layer_geoms),
            rec.epsilon,
            rec.accuracy
        ));
    }
    out
}

/// A parsed report CSV row, faithful to the file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportCsvRow {
    pub layer: usize,
    pub target_kind: String,
    pub target_index: usize,
    pub epsilon: f32,
    pub accuracy: f64,
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportCsvRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty report CSV".into()))?;
    if header != "layer,target_kind,target_index,epsilon,accuracy" {
        return Err(Error::Format(format!("unexpected report header: {header}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Format(format!(
                "report line {}: expected 5 fields, got {}",
                lineno + 2,
                parts.len()
            )));
        }
        let parse_err =
            |what: &str| Error::Format(format!("report line {}: bad {what}", lineno + 2));
        rows.push(ReportCsvRow {
            layer: parts[0].parse().map_err(|_| parse_err("layer"))?,
            target_kind: parts[1].to_string(),
            target_index: parts[2].parse().map_err(|_| parse_err("target_index"))?,
            epsilon: parts[3].parse().map_err(|_| parse_err("epsilon"))?,
            accuracy: parts[4].parse().map_err(|_| parse_err("accuracy"))?,
        });
    }
    Ok(rows)
}

/// Re-emit parsed rows; `emit_rows_csv(parse_report_csv(text))` is the
/// identity on well-formed files.
pub fn emit_rows_csv(rows: &[ReportCsvRow]) -> String {
    let mut out = String::from("layer,target_kind,target_index,epsilon,accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.2}\n",
            r.layer, r.target_kind, r.target_index, r.epsilon, r.accuracy
        ));
    }
    out
}

/// Summary CSV: one row per (layer, epsilon) with min and max accuracy.
pub fn summary_to_csv(summary: &SweepSummary) -> String {
    let mut out = String::from("layer,epsilon,min_accuracy,max_accuracy\n");
    for g in &summary.groups {
        out.push_str(&format!(
            "{},{},{:.2},{:.2}\n",
            g.layer, g.epsilon, g.min_accuracy, g.max_accuracy
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCsvRow {
    pub layer: usize,
    pub epsilon: f32,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryCsvRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty summary CSV".into()))?;
    if header != "layer,epsilon,min_accuracy,max_accuracy" {
        return Err(Error::Format(format!(
            "unexpected summary header: {header}"
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Format(format!(
                "summary line {}: expected 4 fields, got {}",
                lineno + 2,
                parts.len()
            )));
        }
        let parse_err =
            |what: &str| Error::Format(format!("summary line {}: bad {what}", lineno + 2));
        rows.push(SummaryCsvRow {
            layer: parts[0].parse().map_err(|_| parse_err("layer"))?,
            epsilon: parts[1].parse().map_err(|_| parse_err("epsilon"))?,
            min_accuracy: parts[2].parse().map_err(|_| parse_err("min_accuracy"))?,
            max_accuracy: parts[3].parse().map_err(|_| parse_err("max_accuracy"))?,
        });
    }
    Ok(rows)
}

/// Full-fidelity JSON emission of a report (metadata included).
pub fn report_to_json(report: &SweepReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("report serialization failed: {e}")))
}

pub fn report_from_json(text: &str) -> Result<SweepReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("bad report JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_glyphs, load_idx_dir};
    use crate::net::{build_cnv, CnvOptions, Layer, LayerSpec, Network};
    use crate::rng::SeedFanout;
    use crate::tensor::Tensor4;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        SeedFanout::new(seed).stream("sweep-test")
    }

    /// Tiny 1-conv-stage quantized net for fast sweeps.
    fn toy_net(seed: u64) -> Network {
        let specs = vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 4,
                kernel: 3,
                weight_bits: 1,
            },
            LayerSpec::BatchNorm { channels: 4 },
            LayerSpec::QuantAct { bits: 1 },
            LayerSpec::MaxPool,
            LayerSpec::Injection {
                model: crate::inject::FaultModel::Channel,
                bits: 1,
            },
            LayerSpec::Flatten,
            LayerSpec::Linear {
                in_features: 4 * 13 * 13,
                out_features: 10,
                weight_bits: 1,
            },
            LayerSpec::BatchNorm { channels: 10 },
        ];
        let mut net = Network::from_specs(1, 28, 28, specs).unwrap();
        net.init_weights(&mut rng(seed));
        net
    }

    fn toy_data(seed: u64, n: usize) -> crate::data::Dataset {
        let dir = tempfile::tempdir().unwrap();
        generate_glyphs(dir.path(), n, 10, &mut rng(seed)).unwrap();
        load_idx_dir(dir.path()).unwrap().train
    }

    #[test]
    fn config_count_matches_analytic_formula() {
        let net = build_cnv(&CnvOptions::default()).unwrap();
        let chan = enumerate_faults(&net, FaultModel::Channel).unwrap();
        assert_eq!(chan.len(), (16 + 32 + 64 + 128) * 2);
        assert_eq!(chan.len(), expected_config_count(&net, FaultModel::Channel));
        let pix = enumerate_faults(&net, FaultModel::Pixel).unwrap();
        assert_eq!(pix.len(), (13 * 13 + 5 * 5 + 3 * 3 + 1) * 2);
        assert_eq!(pix.len(), expected_config_count(&net, FaultModel::Pixel));
    }

    #[test]
    fn fault_order_is_error_value_outermost() {
        let net = build_cnv(&CnvOptions::default()).unwrap();
        let faults = enumerate_faults(&net, FaultModel::Channel).unwrap();
        // First half all share the first codebook value; layers ascend
        // within it.
        let half = faults.len() / 2;
        let eps0 = faults[0].epsilon;
        assert!(faults[..half].iter().all(|f| f.epsilon == eps0));
        assert!(faults[half..].iter().all(|f| f.epsilon != eps0));
        assert_eq!(faults[0].layer, 0);
        assert_eq!(faults[half - 1].layer, 3);
        assert_eq!(faults[0].target, FaultTarget::Channel(0));
        assert_eq!(faults[1].target, FaultTarget::Channel(1));
    }

    #[test]
    fn element_mode_sweep_is_rejected() {
        let net = build_cnv(&CnvOptions::default()).unwrap();
        assert!(enumerate_faults(&net, FaultModel::Element).is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_pure() {
        let net = toy_net(1);
        let data = toy_data(2, 20);
        let before = net.param_hash();
        let r1 = sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs").unwrap();
        let r2 = sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs").unwrap();
        assert_eq!(net.param_hash(), before);
        assert_eq!(r1.records, r2.records);
        assert_eq!(r1.error_free_accuracy, r2.error_free_accuracy);
    }

    #[test]
    fn one_worker_equals_many_workers() {
        let net = toy_net(3);
        let data = toy_data(4, 20);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs"))
            .unwrap();
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs"))
            .unwrap();
        assert_eq!(serial.records, parallel.records);
    }

    #[test]
    fn sweep_matches_manual_surgery_on_toy_net() {
        // Independent oracle: walk the layers by hand, overwrite the
        // activation plane at the injection point, continue, and compare
        // accuracies exactly.
        let net = toy_net(5);
        let data = toy_data(6, 30);
        let report = sweep(&net, &data, FaultModel::Channel, 30, "toy", "glyphs").unwrap();
        let indices: Vec<usize> = (0..data.n).collect();
        let (x, labels) = data.batch(&indices).unwrap();
        for rec in &report.records {
            let fault = FaultSpec {
                layer: rec.layer,
                target: rec.target,
                epsilon: rec.epsilon,
            };
            let mut a = x.clone();
            let mut ordinal = 0usize;
            for layer in net.layers() {
                a = match layer {
                    Layer::Conv2d(c) => c.forward_eval(&a).unwrap(),
                    Layer::BatchNorm(b) => b.forward_eval(&a).unwrap(),
                    Layer::QuantAct(q) => q.forward_eval(&a).unwrap(),
                    Layer::MaxPool(m) => m.forward_eval(&a).unwrap(),
                    Layer::Flatten => {
                        let s = a.shape();
                        Tensor4::from_vec(
                            crate::tensor::Shape4::new(s.b, s.c * s.h * s.w, 1, 1),
                            a.data().to_vec(),
                        )
                        .unwrap()
                    }
                    Layer::Linear(l) => l.forward_eval(&a).unwrap(),
                    Layer::Injection(_) => {
                        if ordinal == fault.layer {
                            let shape = a.shape();
                            if let FaultTarget::Channel(c) = fault.target {
                                for b in 0..shape.b {
                                    for h in 0..shape.h {
                                        for w in 0..shape.w {
                                            let i = shape.idx(b, c, h, w);
                                            a.data_mut()[i] = fault.epsilon;
                                        }
                                    }
                                }
                            }
                        }
                        ordinal += 1;
                        a
                    }
                    _ => a,
                };
            }
            let classes = a.shape().c;
            let mut correct = 0usize;
            for (row, &label) in labels.iter().enumerate() {
                let scores = &a.data()[row * classes..(row + 1) * classes];
                let mut best = 0;
                for k in 1..classes {
                    if scores[k] > scores[best] {
                        best = k;
                    }
                }
                if best == label {
                    correct += 1;
                }
            }
            let oracle = 100.0 * correct as f64 / data.n as f64;
            assert_eq!(
                rec.accuracy, oracle,
                "fault {fault:?}: sweep {} vs oracle {oracle}",
                rec.accuracy
            );
        }
    }

    #[test]
    fn summary_min_max_and_variance_match_oracles() {
        let net = toy_net(7);
        let data = toy_data(8, 20);
        let report = sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs").unwrap();
        let summary = summarize(&report).unwrap();
        // Independent scan for min/max.
        for g in &summary.groups {
            let members: Vec<f64> = report
                .records
                .iter()
                .filter(|r| r.layer == g.layer && r.epsilon == g.epsilon)
                .map(|r| r.accuracy)
                .collect();
            assert!(!members.is_empty());
            let min = members.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(g.min_accuracy, min);
            assert_eq!(g.max_accuracy, max);
            assert!(g.min_accuracy <= g.max_accuracy);
        }
        // Two-pass population variance oracle.
        let accs: Vec<f64> = report.records.iter().map(|r| r.accuracy).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
        assert!(
            (summary.variance - var).abs() < 1e-9,
            "welford {} vs two-pass {var}",
            summary.variance
        );
        assert!(accs.iter().all(|&a| (0.0..=100.0).contains(&a)));
    }

    #[test]
    fn report_csv_round_trips_byte_identically() {
        let net = toy_net(9);
        let data = toy_data(10, 20);
        let report = sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs").unwrap();
        let csv = report_to_csv(&report);
        let rows = parse_report_csv(&csv).unwrap();
        assert_eq!(rows.len(), report.records.len());
        assert_eq!(emit_rows_csv(&rows), csv);
    }

    #[test]
    fn pixel_report_indices_are_row_major() {
        let net = toy_net(11);
        let data = toy_data(12, 10);
        let report = sweep(&net, &data, FaultModel::Pixel, 10, "toy", "glyphs").unwrap();
        let geoms = &report.meta.layer_geoms;
        // 13x13 feature map: pixel (1, 2) should flatten to 15.
        let rec = report
            .records
            .iter()
            .find(|r| r.target == FaultTarget::Pixel { h: 1, w: 2 })
            .unwrap();
        assert_eq!(rec.target_index(geoms), 13 + 2);
        let csv = report_to_csv(&report);
        let rows = parse_report_csv(&csv).unwrap();
        assert_eq!(emit_rows_csv(&rows), csv);
        assert!(rows.iter().all(|r| r.target_kind == "pixel"));
    }

    #[test]
    fn summary_csv_round_trips() {
        let net = toy_net(13);
        let data = toy_data(14, 10);
        let report = sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs").unwrap();
        let summary = summarize(&report).unwrap();
        let csv = summary_to_csv(&summary);
        let rows = parse_summary_csv(&csv).unwrap();
        assert_eq!(rows.len(), summary.groups.len());
        for (row, g) in rows.iter().zip(&summary.groups) {
            assert_eq!(row.layer, g.layer);
            assert_eq!(row.epsilon, g.epsilon);
        }
    }

    #[test]
    fn report_json_round_trips_exactly() {
        let net = toy_net(15);
        let data = toy_data(16, 10);
        let report = sweep(&net, &data, FaultModel::Channel, 10, "toy", "glyphs").unwrap();
        let json = report_to_json(&report).unwrap();
        let back = report_from_json(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn parse_rejects_malformed_csv() {
        assert!(parse_report_csv("").is_err());
        assert!(parse_report_csv("wrong,header\n").is_err());
        assert!(
            parse_report_csv("layer,target_kind,target_index,epsilon,accuracy\n1,channel,2\n")
                .is_err()
        );
        assert!(parse_report_csv(
            "layer,target_kind,target_index,epsilon,accuracy\nx,channel,2,1,50.00\n"
        )
        .is_err());
    }

    #[test]
    fn accuracy_rejects_empty_set_and_zero_batch() {
        let net = toy_net(17);
        let data = toy_data(18, 10);
        let empty = data.select(&[]).unwrap();
        assert!(evaluate_accuracy(&net, &empty, 10, None).is_err());
        assert!(evaluate_accuracy(&net, &data, 0, None).is_err());
    }
}

//! Evaluation: energy at silence, voice-detection frame accuracy and
//! alignment-deviation ranks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotations::FrameSeries;
use crate::dsp::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyMetricConfig {
    pub epsilon: f64,
    pub silent_threshold_db: f64,
}

impl Default for EnergyMetricConfig {
    fn default() -> Self {
        EnergyMetricConfig {
            epsilon: 1e-9,
            silent_threshold_db: -25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PesEps {
    /// Mean predicted energy over silent-target frames, dB.
    pub pes: f64,
    /// Mean target energy over silent-prediction, non-silent-target frames, dB.
    pub eps: f64,
    pub silent_target_frames: usize,
    pub missed_frames: usize,
}

fn row_energy(m: &DenseMatrix) -> Vec<f64> {
    m.row_iter().map(|r| r.iter().map(|v| v * v).sum()).collect()
}

fn silent(e: &[f64], threshold_db: f64) -> Vec<bool> {
    let max = e.iter().copied().fold(0.0, f64::max);
    e.iter()
        .map(|&x| max == 0.0 || x == 0.0 || 10.0 * (x / max).log10() < threshold_db)
        .collect()
}

/// PES and EPS of a predicted magnitude spectrogram against its target
/// (rows are frames). Energies are relative to the target's loudest frame;
/// each signal's silence is judged against its own loudest frame. An empty
/// frame set yields the floor `10 log10(eps)`.
pub fn pes_eps(prediction: &DenseMatrix, target: &DenseMatrix, cfg: &EnergyMetricConfig) -> Result<PesEps> {
    if prediction.rows() != target.rows() {
        return Err(Error::shape(format!(
            "prediction has {} frames, target {}",
            prediction.rows(),
            target.rows()
        )));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::param("epsilon must be positive"));
    }
    let ep = row_energy(prediction);
    let et = row_energy(target);
    let ref_max = et.iter().copied().fold(0.0, f64::max);
    let rel = |x: f64| if ref_max > 0.0 { x / ref_max } else { x };
    let st = silent(&et, cfg.silent_threshold_db);
    let sp = silent(&ep, cfg.silent_threshold_db);
    let db = |vals: Vec<f64>| -> f64 {
        let mean = if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 };
        10.0 * (mean + cfg.epsilon).log10()
    };
    let pes_frames: Vec<f64> = (0..et.len()).filter(|&t| st[t]).map(|t| rel(ep[t])).collect();
    let eps_frames: Vec<f64> = (0..et.len()).filter(|&t| sp[t] && !st[t]).map(|t| rel(et[t])).collect();
    Ok(PesEps {
        silent_target_frames: pes_frames.len(),
        missed_frames: eps_frames.len(),
        pes: db(pes_frames),
        eps: db(eps_frames),
    })
}

/// Fraction of frames where `phat >= threshold` matches the binary label.
pub fn frame_accuracy(phat: &FrameSeries, labels: &FrameSeries, threshold: f64) -> Result<f64> {
    if phat.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", phat.len(), labels.len())));
    }
    if phat.is_empty() {
        return Err(Error::param("no frames to score"));
    }
    let hits = phat
        .values
        .iter()
        .zip(&labels.values)
        .filter(|(&p, &l)| (p >= threshold) == (l >= 0.5))
        .count();
    Ok(hits as f64 / phat.len() as f64)
}

/// Threshold on the grid `0.00, 0.01, ..., 1.00` maximizing the mean
/// validation accuracy; ties go to the lower threshold.
pub fn choose_threshold(validation: &[(FrameSeries, FrameSeries)]) -> Result<(f64, f64)> {
    if validation.is_empty() {
        return Err(Error::param("no validation tracks"));
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=100 {
        let thr = i as f64 / 100.0;
        let mut sum = 0.0;
        for (p, l) in validation {
            sum += frame_accuracy(p, l, thr)?;
        }
        let acc = sum / validation.len() as f64;
        if acc > best.1 {
            best = (thr, acc);
        }
    }
    Ok(best)
}

/// Dense ranks (1 = smallest) with equal values sharing a rank.
/// Values are compared after rounding to 1e-9 so float noise does not split ties.
pub fn dense_ranks(values: &[f64]) -> Vec<usize> {
    let key = |v: f64| (v * 1e9).round() as i64;
    let mut distinct: Vec<i64> = values.iter().map(|&v| key(v)).collect();
    distinct.sort_unstable();
    distinct.dedup();
    values
        .iter()
        .map(|&v| distinct.binary_search(&key(v)).expect("present") + 1)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemRanks {
    pub deviations: BTreeMap<String, f64>,
    pub ranks: BTreeMap<String, usize>,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub systems: BTreeMap<String, SystemRanks>,
    /// Systems by ascending mean rank, name order on ties.
    pub position: Vec<String>,
}

/// Ranks each system's deviation `|estimate - truth|` per song among the
/// systems that report that song. Songs without ground truth are ignored.
pub fn deviation_ranks(
    estimates: &BTreeMap<String, BTreeMap<String, f64>>,
    truth: &BTreeMap<String, f64>,
) -> Result<DeviationReport> {
    if estimates.is_empty() {
        return Err(Error::param("no systems to rank"));
    }
    let mut systems: BTreeMap<String, SystemRanks> = estimates
        .keys()
        .map(|s| {
            (
                s.clone(),
                SystemRanks {
                    deviations: BTreeMap::new(),
                    ranks: BTreeMap::new(),
                    mean_rank: 0.0,
                },
            )
        })
        .collect();
    for (song, &gt) in truth {
        let entries: Vec<(&String, f64)> = estimates
            .iter()
            .filter_map(|(s, m)| m.get(song).map(|&e| (s, (e - gt).abs())))
            .collect();
        let ranks = dense_ranks(&entries.iter().map(|e| e.1).collect::<Vec<_>>());
        for ((s, d), r) in entries.into_iter().zip(ranks) {
            let sys = systems.get_mut(s).expect("known system");
            sys.deviations.insert(song.clone(), d);
            sys.ranks.insert(song.clone(), r);
        }
    }
    for (name, sys) in systems.iter_mut() {
        if sys.ranks.is_empty() {
            return Err(Error::param(format!("system {name:?} has no song with ground truth")));
        }
        sys.mean_rank = sys.ranks.values().sum::<usize>() as f64 / sys.ranks.len() as f64;
    }
    let mut position: Vec<String> = systems.keys().cloned().collect();
    position.sort_by(|a, b| systems[a].mean_rank.total_cmp(&systems[b].mean_rank).then_with(|| a.cmp(b)));
    Ok(DeviationReport { systems, position })
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::{MetricRecord, Split};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub fid: f64,
    pub mse: f64,
    pub aux: BTreeMap<String, f64>,
}

impl EpochRecord {
    pub fn new(epoch: usize, fid: f64, mse: f64) -> Self {
        EpochRecord {
            epoch,
            fid,
            mse,
            aux: BTreeMap::new(),
        }
    }
}

/// Per-epoch evaluation scores on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsHistory {
    pub split: Split,
    /// Name of the feature backend behind the FID column.
    pub backend: String,
    records: Vec<EpochRecord>,
}

impl MetricsHistory {
    pub fn new(split: Split, backend: impl Into<String>) -> Self {
        MetricsHistory {
            split,
            backend: backend.into(),
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, epoch: usize) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == epoch)
    }

    /// Appends a record; epochs must increase strictly and every value must
    /// be finite.
    pub fn push(&mut self, record: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.epoch <= last.epoch {
                return Err(Error::invalid(format!(
                    "epoch {} does not follow epoch {}",
                    record.epoch, last.epoch
                )));
            }
        }
        let bad = [("fid", record.fid), ("mse", record.mse)]
            .into_iter()
            .chain(record.aux.iter().map(|(k, &v)| (k.as_str(), v)))
            .find(|(_, v)| !v.is_finite());
        if let Some((name, v)) = bad {
            return Err(Error::invalid(format!("non-finite {name} = {v} at epoch {}", record.epoch)));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn to_records(&self) -> Vec<MetricRecord> {
        let mut out = Vec::new();
        for r in &self.records {
            let mut put = |metric: &str, value: f64| {
                out.push(MetricRecord {
                    epoch: r.epoch,
                    metric: metric.to_string(),
                    split: self.split,
                    value,
                    backend: self.backend.clone(),
                })
            };
            put("fid", r.fid);
            put("mse", r.mse);
            for (k, &v) in &r.aux {
                put(k, v);
            }
        }
        out
    }
}

/// Epoch with the smallest [`selection_distances`] entry; ties go to the
/// earliest epoch.
pub fn select_best_epoch(history: &MetricsHistory) -> Result<usize> {
    let d = selection_distances(history);
    let first = *d.first().ok_or(Error::EmptyBatch)?;
    Ok(d.into_iter().fold(first, |best, cur| if cur.1 < best.1 { cur } else { best }).0)
}

/// Per record, the Euclidean norm of the min-max normalised FID and MSE. A
/// column with zero range contributes zero.
pub fn selection_distances(history: &MetricsHistory) -> Vec<(usize, f64)> {
    let recs = history.records();
    if recs.is_empty() {
        return Vec::new();
    }
    let norm = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        vals.into_iter()
            .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect::<Vec<_>>()
    };
    let f = norm(recs.iter().map(|r| r.fid).collect());
    let m = norm(recs.iter().map(|r| r.mse).collect());
    recs.iter().enumerate().map(|(i, r)| (r.epoch, f[i].hypot(m[i]))).collect()
}

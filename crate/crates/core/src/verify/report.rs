//! Score tables and histogram data aggregated from verification records.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelTag;
use crate::stats::{median, winsorize};
use crate::{Error, Result};

use super::metrics::METRIC_NAMES;
use super::pit::{chi_square_uniform, PitHistogram};
use super::records::{QualityRecord, VerificationRecord};
use super::scores::{bias, brier, bss, reliability_curve};

/// Number of reliability bins.
pub const RELIABILITY_BINS: usize = 10;

/// Key used for f64 thresholds in ordered maps.
fn threshold_key(z: f64) -> i64 {
    (z * 1e6).round() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: ModelTag,
    /// `None` pools all lead times.
    pub lead_time_h: Option<u32>,
    pub threshold: f64,
    pub n: usize,
    pub base_rate: f64,
    pub mean_forecast: f64,
    pub brier: f64,
    pub brier_ref: f64,
    /// Empty when the reference score is zero.
    pub bss: Option<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub model: ModelTag,
    pub threshold: f64,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_forecast: Option<f64>,
    pub observed_frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitRow {
    pub model: ModelTag,
    pub metric: String,
    /// "all" or "precip" (at least one observed gridpoint >= 0.1 mm).
    pub subset: String,
    pub n: u64,
    pub counts: Vec<u64>,
    pub chi2: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    /// 1-based member index.
    pub member: usize,
    pub n: usize,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scores: Vec<ScoreRow>,
    pub reliability: Vec<ReliabilityRow>,
    pub pit: Vec<PitRow>,
    pub quality: Vec<QualityRow>,
}

fn score_row(model: ModelTag, lead: Option<u32>, threshold: f64, recs: &[&VerificationRecord]) -> Result<ScoreRow> {
    let p: Vec<f64> = recs.iter().map(|r| r.forecast_prob).collect();
    let o: Vec<bool> = recs.iter().map(|r| r.observed_outcome == 1).collect();
    let clim: Vec<f64> = recs.iter().map(|r| r.climatology).collect();
    let bs = brier(&p, &o)?;
    let bs_ref = brier(&clim, &o)?;
    let n = recs.len();
    Ok(ScoreRow {
        model,
        lead_time_h: lead,
        threshold,
        n,
        base_rate: o.iter().filter(|&&x| x).count() as f64 / n as f64,
        mean_forecast: p.iter().sum::<f64>() / n as f64,
        brier: bs,
        brier_ref: bs_ref,
        bss: bss(bs, bs_ref),
        bias: bias(&p, &o)?,
    })
}

/// Aggregates records into score tables, reliability curves and PIT
/// histograms. Output is ordered by (model, lead time, threshold) and does
/// not depend on record order.
pub fn report(records: &[VerificationRecord], quality: &[QualityRecord]) -> Result<Report> {
    type Key = (ModelTag, u32, i64);
    let mut by_lead: BTreeMap<Key, Vec<&VerificationRecord>> = BTreeMap::new();
    let mut pooled: BTreeMap<(ModelTag, i64), Vec<&VerificationRecord>> = BTreeMap::new();
    let mut thresholds: BTreeMap<i64, f64> = BTreeMap::new();
    for r in records {
        let tk = threshold_key(r.threshold);
        thresholds.insert(tk, r.threshold);
        by_lead.entry((r.model, r.lead_time_h, tk)).or_default().push(r);
        pooled.entry((r.model, tk)).or_default().push(r);
    }
    // Fixed summation order within each group.
    let order = |r: &&VerificationRecord| (r.issue_time, r.lead_time_h, r.area_id, r.timestamp);
    for v in by_lead.values_mut().chain(pooled.values_mut()) {
        v.sort_by_key(order);
    }
    let mut out = Report::default();
    for ((model, tk), recs) in &pooled {
        out.scores.push(score_row(*model, None, thresholds[tk], recs)?);
        let p: Vec<f64> = recs.iter().map(|r| r.forecast_prob).collect();
        let o: Vec<bool> = recs.iter().map(|r| r.observed_outcome == 1).collect();
        for (bin, b) in reliability_curve(&p, &o, RELIABILITY_BINS)?.into_iter().enumerate() {
            out.reliability.push(ReliabilityRow {
                model: *model,
                threshold: thresholds[tk],
                bin,
                lower: b.lower,
                upper: b.upper,
                count: b.count,
                mean_forecast: b.mean_forecast,
                observed_frequency: b.observed_frequency,
            });
        }
    }
    for ((model, lead, tk), recs) in &by_lead {
        out.scores.push(score_row(*model, Some(*lead), thresholds[tk], recs)?);
    }

    // One PIT entry per area forecast, whatever the number of thresholds.
    let mut seen: BTreeSet<(ModelTag, i64, u32, usize)> = BTreeSet::new();
    let mut hists: BTreeMap<(ModelTag, usize, &'static str), PitHistogram> = BTreeMap::new();
    for r in records {
        if !seen.insert((r.model, r.issue_time, r.lead_time_h, r.area_id)) {
            continue;
        }
        for (mi, name) in METRIC_NAMES.iter().enumerate() {
            let Some(&bin) = r.pit_bins.get(*name) else { continue };
            let mut subsets = vec!["all"];
            if r.precip_subset {
                subsets.push("precip");
            }
            for s in subsets {
                let h = hists.entry((r.model, mi, s)).or_insert_with(|| PitHistogram::new(r.n_members));
                if bin >= h.counts.len() {
                    return Err(Error::InvalidInput(format!(
                        "PIT bin {bin} exceeds {} members for {}",
                        r.n_members, r.model
                    )));
                }
                h.add(bin);
            }
        }
    }
    for ((model, mi, subset), h) in hists {
        let (chi2, p_value) = chi_square_uniform(&h.counts);
        out.pit.push(PitRow {
            model,
            metric: METRIC_NAMES[mi].to_string(),
            subset: subset.to_string(),
            n: h.total(),
            counts: h.counts,
            chi2,
            p_value,
        });
    }
    out.quality = quality_summary(quality);
    Ok(out)
}

/// Per-member summary of member-quality ratios after 5%/95% winsorization;
/// undefined ratios are left out.
pub fn quality_summary(quality: &[QualityRecord]) -> Vec<QualityRow> {
    let n = quality.iter().map(|q| q.ratios.len()).max().unwrap_or(0);
    (0..n)
        .filter_map(|j| {
            let vals: Vec<f64> = quality
                .iter()
                .filter_map(|q| q.ratios.get(j).copied())
                .filter(|v| v.is_finite())
                .collect();
            if vals.is_empty() {
                return None;
            }
            let w = winsorize(&vals, 0.05, 0.95);
            let mut sorted = w.clone();
            sorted.sort_by(f64::total_cmp);
            Some(QualityRow {
                member: j + 1,
                n: vals.len(),
                median: median(&w),
                p05: sorted[0],
                p95: sorted[sorted.len() - 1],
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path.display(), e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path.display(), e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl Report {
    /// Writes scores.csv, reliability.csv, pit.csv, quality.csv and report.json.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_csv(&dir.join("scores.csv"), &self.scores)?;
        write_csv(&dir.join("reliability.csv"), &self.reliability)?;
        #[derive(Serialize)]
        struct FlatPit<'a> {
            model: ModelTag,
            metric: &'a str,
            subset: &'a str,
            n: u64,
            counts: String,
            chi2: f64,
            p_value: f64,
        }
        let flat: Vec<FlatPit<'_>> = self
            .pit
            .iter()
            .map(|p| FlatPit {
                model: p.model,
                metric: &p.metric,
                subset: &p.subset,
                n: p.n,
                counts: p.counts.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
                chi2: p.chi2,
                p_value: p.p_value,
            })
            .collect();
        write_csv(&dir.join("pit.csv"), &flat)?;
        write_csv(&dir.join("quality.csv"), &self.quality)?;
        let path = dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))
    }

    /// Score row pooled over lead times.
    pub fn pooled(&self, model: ModelTag, threshold: f64) -> Option<&ScoreRow> {
        self.scores
            .iter()
            .find(|r| r.model == model && r.lead_time_h.is_none() && threshold_key(r.threshold) == threshold_key(threshold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Area;

    fn rec(model: ModelTag, lead: u32, area_id: usize, threshold: f64, p: f64, o: u8) -> VerificationRecord {
        VerificationRecord {
            issue_time: 0,
            timestamp: i64::from(lead) * 3600,
            lead_time_h: lead,
            area_id,
            area: Area { row0: 0, col0: 0, side: 3 },
            model,
            threshold,
            forecast_prob: p,
            observed_outcome: o,
            climatology: 0.5,
            precip_subset: o == 1,
            n_members: 4,
            fit_time: 0,
            train_max_timestamp: 0,
            metric_values: BTreeMap::new(),
            pit_bins: BTreeMap::from([("area_total".to_string(), area_id % 5)]),
        }
    }

    #[test]
    fn empty_and_single() {
        let r = report(&[], &[]).unwrap();
        assert!(r.scores.is_empty() && r.pit.is_empty() && r.reliability.is_empty());
        let r = report(&[rec(ModelTag::Copula, 1, 0, 1.0, 0.25, 1)], &[]).unwrap();
        let by_lead: Vec<_> = r.scores.iter().filter(|s| s.lead_time_h.is_some()).collect();
        assert_eq!(by_lead.len(), 1);
        assert_eq!(by_lead[0].n, 1);
        assert!((by_lead[0].brier - 0.5625).abs() < 1e-15);
        assert_eq!(by_lead[0].bss, Some(1.0 - 0.5625 / 0.25));
    }

    #[test]
    fn counts_add_up_and_order_is_stable() {
        let mut recs = Vec::new();
        for model in [ModelTag::Random, ModelTag::Copula] {
            for lead in [2, 1] {
                for area in 0..5 {
                    for z in [0.62, 1.23] {
                        recs.push(rec(model, lead, area, z, 0.1 * area as f64, (area % 2) as u8));
                    }
                }
            }
        }
        let r = report(&recs, &[]).unwrap();
        let by_lead: Vec<_> = r.scores.iter().filter(|s| s.lead_time_h.is_some()).collect();
        assert_eq!(by_lead.len(), 2 * 2 * 2);
        assert_eq!(by_lead.iter().map(|s| s.n).sum::<usize>(), recs.len());
        assert_eq!(by_lead[0].model, ModelTag::Copula);
        assert_eq!(by_lead[0].lead_time_h, Some(1));
        let pooled = r.pooled(ModelTag::Copula, 0.62).unwrap();
        assert_eq!(pooled.n, 10);
        // PIT counted once per area forecast, not per threshold.
        let all = r.pit.iter().find(|p| p.model == ModelTag::Copula && p.subset == "all").unwrap();
        assert_eq!(all.n, 10);
        assert_eq!(all.counts.len(), 5);
        let mut shuffled = recs.clone();
        shuffled.reverse();
        assert_eq!(report(&shuffled, &[]).unwrap(), r);
        for bin in r.reliability.iter().filter(|b| b.model == ModelTag::Copula && b.threshold == 0.62) {
            assert!(bin.count <= 10);
        }
    }

    #[test]
    fn quality_summary_winsorizes() {
        let q: Vec<QualityRecord> = (0..100)
            .map(|i| QualityRecord {
                issue_time: i,
                lead_time_h: 1,
                area_id: 0,
                ratios: vec![1.0, 1.0 + i as f64 / 100.0, if i == 0 { 1e9 } else { 2.0 }],
            })
            .collect();
        let s = quality_summary(&q);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].median, 1.0);
        assert!(s[2].p95 < 1e9);
        assert!(s[2].median > s[1].median);
    }
}

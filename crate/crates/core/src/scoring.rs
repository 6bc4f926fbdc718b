//! Verification of sample-based probabilistic forecasts.

use std::collections::BTreeMap;

use crate::error::{Result, SpdeError};

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Sample CRPS `(1/m)Σ|xᵢ−y| − (1/2m²)ΣΣ|xᵢ−xⱼ|` in `O(m log m)`.
///
/// The double sum over a sorted sample equals `2 Σ_k x₍ₖ₎(2k − m + 1)` with
/// zero-based ranks `k`.
pub fn crps_sample(samples: &[f64], y: f64) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(SpdeError::invalid(format!("CRPS needs at least two samples, got {m}")));
    }
    let xs = sorted(samples);
    let mf = m as f64;
    let mut abs_err = 0.0;
    let mut spread = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        abs_err += (x - y).abs();
        spread += x * (2.0 * k as f64 - mf + 1.0);
    }
    Ok((abs_err / mf - spread / (mf * mf)).max(0.0))
}

/// Mean absolute error over pairs where neither value is NaN.
pub fn mae(forecasts: &[f64], observations: &[f64]) -> Result<f64> {
    if forecasts.len() != observations.len() {
        return Err(SpdeError::invalid(format!(
            "{} forecasts for {} observations",
            forecasts.len(),
            observations.len()
        )));
    }
    let (sum, count) = forecasts
        .iter()
        .zip(observations)
        .filter(|(f, o)| !f.is_nan() && !o.is_nan())
        .fold((0.0, 0usize), |(s, c), (f, o)| (s + (f - o).abs(), c + 1));
    if count == 0 {
        return Err(SpdeError::invalid("no complete forecast/observation pairs"));
    }
    Ok(sum / count as f64)
}

/// Sample median; for an even count the lower of the two middle values.
pub fn median_point_forecast(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(SpdeError::invalid("median of an empty sample"));
    }
    let xs = sorted(samples);
    Ok(xs[(xs.len() - 1) / 2])
}

/// Predictive samples for all stations at one lead time of one forecast.
#[derive(Clone, Debug)]
pub struct ForecastCase {
    pub lead: usize,
    /// `samples[i][j]`: draw `i` at station `j`. Draws are joint across stations.
    pub samples: Vec<Vec<f64>>,
    /// Observation per station; NaN marks missing.
    pub observed: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    /// Each station's forecast scored separately.
    Stationwise,
    /// The equally weighted station average scored as one quantity.
    Areal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeadScore {
    pub lead: usize,
    pub crps: f64,
    pub mae: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub grouping: Grouping,
    pub per_lead: Vec<LeadScore>,
    pub crps: f64,
    pub mae: f64,
    pub count: usize,
}

/// Scores forecast cases by lead time and overall.
///
/// Stationwise scores average over every (case, station) pair with an
/// observation. Areal scores average over cases; within a case the stations
/// with a missing observation are dropped from both the predictive and the
/// observed average.
pub fn aggregate(cases: &[ForecastCase], grouping: Grouping) -> Result<ScoreReport> {
    let mut by_lead: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for case in cases {
        let stations = case.observed.len();
        if case.samples.iter().any(|s| s.len() != stations) {
            return Err(SpdeError::invalid(format!(
                "lead {}: sample width differs from the {stations} observations",
                case.lead
            )));
        }
        let present: Vec<usize> = (0..stations).filter(|&j| !case.observed[j].is_nan()).collect();
        if present.is_empty() {
            continue;
        }
        let entry = by_lead.entry(case.lead).or_insert((0.0, 0.0, 0));
        match grouping {
            Grouping::Stationwise => {
                for &j in &present {
                    let draws: Vec<f64> = case.samples.iter().map(|s| s[j]).collect();
                    entry.0 += crps_sample(&draws, case.observed[j])?;
                    entry.1 += (median_point_forecast(&draws)? - case.observed[j]).abs();
                    entry.2 += 1;
                }
            }
            Grouping::Areal => {
                let k = present.len() as f64;
                let draws: Vec<f64> = case
                    .samples
                    .iter()
                    .map(|s| present.iter().map(|&j| s[j]).sum::<f64>() / k)
                    .collect();
                let obs = present.iter().map(|&j| case.observed[j]).sum::<f64>() / k;
                entry.0 += crps_sample(&draws, obs)?;
                entry.1 += (median_point_forecast(&draws)? - obs).abs();
                entry.2 += 1;
            }
        }
    }
    if by_lead.is_empty() {
        return Err(SpdeError::invalid("no forecast case has an observation to score"));
    }
    let per_lead: Vec<LeadScore> = by_lead
        .iter()
        .map(|(&lead, &(c, a, n))| LeadScore {
            lead,
            crps: c / n as f64,
            mae: a / n as f64,
            count: n,
        })
        .collect();
    let count: usize = per_lead.iter().map(|l| l.count).sum();
    let crps = by_lead.values().map(|v| v.0).sum::<f64>() / count as f64;
    let mae = by_lead.values().map(|v| v.1).sum::<f64>() / count as f64;
    Ok(ScoreReport {
        grouping,
        per_lead,
        crps,
        mae,
        count,
    })
}

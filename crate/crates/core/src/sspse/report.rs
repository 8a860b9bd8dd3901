//! Posterior tables and density grids.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::prior::FittedPrior;
use super::summary::Summary;
use crate::prior_pipeline::subpopulation_count;
use crate::stats::{quantile_sorted, round_to, sample_sd};
use crate::{Error, Result};

/// Column order of the posterior summary table.
pub const TABLE_COLUMNS: [&str; 8] = ["mean", "median", "mode", "q25", "q75", "q90", "q2.5", "q97.5"];

pub type TableRow = [f64; 8];

pub fn table_row(s: &Summary) -> TableRow {
    let q = |l: f64| s.quantile(l).unwrap_or(f64::NAN);
    [s.mean, s.median, s.mode, q(0.25), q(0.75), q(0.9), q(0.025), q(0.975)]
}

/// Percentage change from a prior statistic to a posterior statistic.
pub fn relative_change(prior_stat: f64, posterior_stat: f64) -> Result<f64> {
    if prior_stat == 0.0 {
        return Err(Error::Invalid("relative change from a zero prior statistic".into()));
    }
    Ok(100.0 * (posterior_stat - prior_stat) / prior_stat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledRow {
    pub label: String,
    pub values: TableRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub prior: TableRow,
    pub posterior: TableRow,
    /// Percent, rounded to 2 decimals.
    pub relative_change: TableRow,
    /// Subpopulation counts (posterior size times a prevalence), 2 decimals.
    pub subpopulations: Vec<LabelledRow>,
}

/// Assemble the prior/posterior comparison with optional subpopulation rows
/// given as `(label, prevalence percent)`.
pub fn posterior_table(
    prior: TableRow,
    posterior: TableRow,
    prevalences: &[(String, f64)],
) -> Result<PosteriorTable> {
    let mut relative = [0.0; 8];
    for i in 0..8 {
        relative[i] = round_to(relative_change(prior[i], posterior[i])?, 2);
    }
    let subpopulations = prevalences
        .iter()
        .map(|(label, pct)| LabelledRow {
            label: label.clone(),
            values: posterior.map(|n| subpopulation_count(n, *pct, 2)),
        })
        .collect();
    Ok(PosteriorTable {
        prior,
        posterior,
        relative_change: relative,
        subpopulations,
    })
}

impl PosteriorTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row"];
        header.extend(TABLE_COLUMNS);
        w.write_record(&header)?;
        let mut row = |label: &str, values: &TableRow| -> Result<()> {
            let mut rec = vec![label.to_string()];
            rec.extend(values.iter().map(|v| format!("{v:.2}")));
            w.write_record(&rec)?;
            Ok(())
        };
        row("prior", &self.prior)?;
        row("posterior", &self.posterior)?;
        row("relative_change_pct", &self.relative_change)?;
        for s in &self.subpopulations {
            row(&s.label, &s.values)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Grid of `(x, prior_pdf, posterior_pdf)`; the posterior density is a
/// Gaussian kernel estimate with Silverman's bandwidth.
pub fn density_grid(prior: &FittedPrior, samples: &[u64], points: usize) -> Vec<(f64, f64, f64)> {
    let xs: Vec<f64> = {
        let mut v: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let lo = prior.spec.hard_min as f64;
    let mut hi = prior.quantile(0.995);
    if let Some(&m) = xs.last() {
        hi = hi.max(m);
    }
    let bandwidth = if xs.len() >= 2 {
        let iqr = quantile_sorted(&xs, 0.75) - quantile_sorted(&xs, 0.25);
        let spread = sample_sd(&xs).min(iqr / 1.34).max(f64::MIN_POSITIVE);
        0.9 * spread * (xs.len() as f64).powf(-0.2)
    } else {
        1.0
    };
    let norm = 1.0 / (xs.len().max(1) as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / points as f64;
            let post: f64 = xs
                .iter()
                .map(|s| (-0.5 * ((x - s) / bandwidth).powi(2)).exp())
                .sum::<f64>()
                * norm;
            (x, prior.pdf(x), post)
        })
        .collect()
}

pub fn write_density_csv<W: Write>(grid: &[(f64, f64, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "prior_pdf", "posterior_pdf"])?;
    for (x, p, q) in grid {
        w.write_record([format!("{x:.3}"), format!("{p:.9e}"), format!("{q:.9e}")])?;
    }
    w.flush()?;
    Ok(())
}

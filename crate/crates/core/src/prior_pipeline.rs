//! Census-bridged prior for the size of a hidden population.
//!
//! The chain runs from published same-sex-householder (SSH) aggregates to a
//! prior count of the hidden population:
//!
//! 1. share of SSH who are Latino and male, assuming independence;
//! 2. count of Latino male SSH;
//! 3. share of the hidden population in a domestic partnership (two
//!    living-situation categories combined);
//! 4. share who are householders (half of those partnered);
//! 5. prior population size = householder count / householder share;
//! 6. subpopulation counts = population size x prevalence.
//!
//! Percentages are rounded to 2 decimals and counts to whole units at every
//! step, and each step consumes the rounded values of the previous one.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::stats::round_to;
use crate::{Error, Result};

/// Ratio of the 50% to the 95% normal interval half-widths, as published
/// (z(0.75) / z(0.975) = 0.34413...).
pub const CI50_RATIO: f64 = 0.3441;

pub const COOK_CONFIG: &str = include_str!("../data/cook.toml");
pub const SAN_FRANCISCO_CONFIG: &str = include_str!("../data/sf.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Count,
    Percent,
}

/// A value with an optional 95% half-width; `None` renders as `±?`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub half95: Option<f64>,
    pub units: Units,
}

impl IntervalEstimate {
    pub fn count(point: f64, half95: Option<f64>) -> Self {
        IntervalEstimate {
            point,
            half95,
            units: Units::Count,
        }
    }

    pub fn percent(point: f64, half95: Option<f64>) -> Self {
        IntervalEstimate {
            point,
            half95,
            units: Units::Percent,
        }
    }

    fn format_value(&self, v: f64) -> String {
        match self.units {
            Units::Count => format!("{v:.0}"),
            Units::Percent => format!("{v:.2}"),
        }
    }

    pub fn point_string(&self) -> String {
        self.format_value(self.point)
    }

    pub fn half95_string(&self) -> String {
        self.half95
            .map(|h| self.format_value(h))
            .unwrap_or_else(|| "?".to_string())
    }
}

impl fmt::Display for IntervalEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = if self.units == Units::Percent { "%" } else { "" };
        write!(
            f,
            "{}{pct} ±{}{}",
            self.point_string(),
            self.half95_string(),
            if self.half95.is_some() { pct } else { "" }
        )
    }
}

fn round_percent(x: f64) -> f64 {
    round_to(x, 2)
}

fn round_count(x: f64) -> f64 {
    round_to(x, 0)
}

fn check_percent(name: &str, p: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Invalid(format!("{name} = {p} is not a percentage")));
    }
    Ok(())
}

/// Share of SSH who are Latino and male: `pm * pl / 100`, 2 decimals.
pub fn latino_male_ssh_share(pm: f64, pl: f64) -> f64 {
    round_percent(pm * pl / 100.0)
}

/// Count of Latino male SSH: `share * n_ssh / 100`, nearest unit.
pub fn latino_male_ssh_count(share: f64, n_ssh: f64) -> f64 {
    round_count(share * n_ssh / 100.0)
}

/// Domestic-partnership share: the two living-situation shares added, with
/// half-widths combined in quadrature.
pub fn domestic_partnership_rate(p1: IntervalEstimate, p2: IntervalEstimate) -> IntervalEstimate {
    let half = match (p1.half95, p2.half95) {
        (Some(a), Some(b)) => Some(round_percent(a.hypot(b))),
        _ => None,
    };
    IntervalEstimate::percent(round_percent(p1.point + p2.point), half)
}

/// Householder share: half of the partnered share, interval halved too.
pub fn ssh_rate(domes: IntervalEstimate) -> IntervalEstimate {
    IntervalEstimate::percent(
        round_percent(domes.point / 2.0),
        domes.half95.map(|h| round_percent(h / 2.0)),
    )
}

/// Prior population size `n_lmssh / rate`. The half-width is the distance to
/// the reciprocal at the lower end of the rate interval; it is absent when
/// that end is not positive.
pub fn msm_population_prior(n_lmssh: f64, rate: IntervalEstimate) -> Result<IntervalEstimate> {
    if rate.point <= 0.0 {
        return Err(Error::Estimation(format!(
            "householder share must be positive, got {}%",
            rate.point
        )));
    }
    let point = round_count(n_lmssh / (rate.point / 100.0));
    let half = match rate.half95 {
        Some(h) if rate.point - h > 0.0 => {
            Some(round_count(n_lmssh / ((rate.point - h) / 100.0) - point))
        }
        Some(h) => {
            log::warn!(
                "householder share {}% ± {h}% reaches zero; prior interval unknown",
                rate.point
            );
            None
        }
        None => None,
    };
    Ok(IntervalEstimate::count(point, half))
}

/// `n * pct / 100` rounded to `decimals` places.
pub fn subpopulation_count(n: f64, pct: f64, decimals: i32) -> f64 {
    round_to(n * pct / 100.0, decimals)
}

/// Subpopulation count from a population size and a prevalence; only the
/// prevalence half-width is carried, scaled by the population point.
pub fn hiv_subpopulation(n_lmsm: f64, p: IntervalEstimate, decimals: i32) -> IntervalEstimate {
    IntervalEstimate::count(
        subpopulation_count(n_lmsm, p.point, decimals),
        p.half95.map(|h| subpopulation_count(n_lmsm, h, decimals)),
    )
}

/// Hidden-population share of all Latino males, in percent.
pub fn msm_share_of_latino_males(n_lmsm: IntervalEstimate, n_lm: f64) -> Result<IntervalEstimate> {
    if n_lm <= 0.0 {
        return Err(Error::Invalid("number of Latino males must be positive".into()));
    }
    Ok(IntervalEstimate::percent(
        round_percent(100.0 * n_lmsm.point / n_lm),
        n_lmsm.half95.map(|h| round_percent(100.0 * h / n_lm)),
    ))
}

/// Exact ratio of the 50% to the 95% two-sided normal quantile.
pub fn normal_ci50_ratio() -> f64 {
    let z = Normal::standard();
    z.inverse_cdf(0.75) / z.inverse_cdf(0.975)
}

/// 50% interval from a 95% half-width under normality.
pub fn ci95_to_ci50(point: f64, half95: f64) -> Result<(f64, f64)> {
    if !(half95 >= 0.0) {
        return Err(Error::Invalid(format!("negative half-width {half95}")));
    }
    let h = CI50_RATIO * half95;
    Ok((point - h, point + h))
}

/// Network scale-up inputs: per-respondent known members `m_i` and personal
/// network size `c_i`, and the frame population size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NsumInputs {
    pub known_members: Vec<u64>,
    pub network_sizes: Vec<u64>,
    pub frame_population: u64,
}

/// `round(N * sum(m) / sum(c))`.
pub fn nsum_estimate(inputs: &NsumInputs) -> Result<u64> {
    if inputs.known_members.len() != inputs.network_sizes.len() {
        return Err(Error::Invalid("known-member and network-size lists differ in length".into()));
    }
    if let Some((m, c)) = inputs
        .known_members
        .iter()
        .zip(&inputs.network_sizes)
        .find(|(m, c)| m > c)
    {
        return Err(Error::Invalid(format!(
            "known members {m} exceed network size {c}"
        )));
    }
    let m: u64 = inputs.known_members.iter().sum();
    let c: u64 = inputs.network_sizes.iter().sum();
    if c == 0 {
        return Err(Error::Invalid("total network size is zero".into()));
    }
    Ok((inputs.frame_population as f64 * m as f64 / c as f64).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RawValue {
    point: f64,
    half95: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCountyInputs {
    #[serde(default)]
    name: Option<String>,
    n_ssh: RawValue,
    p_m_given_ssh: RawValue,
    p_l_given_ssh: RawValue,
    p_livsit1: RawValue,
    p_livsit2: RawValue,
    p_hiv_pos: RawValue,
    p_hiv_unk: RawValue,
    n_lm: RawValue,
}

/// Published aggregates for one county.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountyInputs {
    pub name: Option<String>,
    pub n_ssh: IntervalEstimate,
    pub p_m_given_ssh: IntervalEstimate,
    pub p_l_given_ssh: IntervalEstimate,
    pub p_livsit1: IntervalEstimate,
    pub p_livsit2: IntervalEstimate,
    pub p_hiv_pos: IntervalEstimate,
    pub p_hiv_unk: IntervalEstimate,
    pub n_lm: IntervalEstimate,
}

impl From<RawCountyInputs> for CountyInputs {
    fn from(r: RawCountyInputs) -> Self {
        let c = |v: RawValue| IntervalEstimate::count(v.point, v.half95);
        let p = |v: RawValue| IntervalEstimate::percent(v.point, v.half95);
        CountyInputs {
            name: r.name,
            n_ssh: c(r.n_ssh),
            p_m_given_ssh: p(r.p_m_given_ssh),
            p_l_given_ssh: p(r.p_l_given_ssh),
            p_livsit1: p(r.p_livsit1),
            p_livsit2: p(r.p_livsit2),
            p_hiv_pos: p(r.p_hiv_pos),
            p_hiv_unk: p(r.p_hiv_unk),
            n_lm: c(r.n_lm),
        }
    }
}

impl CountyInputs {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: RawCountyInputs = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(raw.into())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawCountyInputs =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Ok(raw.into())
    }

    /// Load a `.json` or TOML county file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn cook() -> Self {
        Self::from_toml_str(COOK_CONFIG).expect("bundled config parses")
    }

    pub fn san_francisco() -> Self {
        Self::from_toml_str(SAN_FRANCISCO_CONFIG).expect("bundled config parses")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_m_given_ssh", &self.p_m_given_ssh),
            ("p_l_given_ssh", &self.p_l_given_ssh),
            ("p_livsit1", &self.p_livsit1),
            ("p_livsit2", &self.p_livsit2),
            ("p_hiv_pos", &self.p_hiv_pos),
            ("p_hiv_unk", &self.p_hiv_unk),
        ] {
            check_percent(name, v.point)?;
        }
        for (name, v) in [("n_ssh", &self.n_ssh), ("n_lm", &self.n_lm)] {
            if v.point < 0.0 {
                return Err(Error::Invalid(format!("{name} must be non-negative")));
            }
        }
        let all = [
            &self.n_ssh,
            &self.p_m_given_ssh,
            &self.p_l_given_ssh,
            &self.p_livsit1,
            &self.p_livsit2,
            &self.p_hiv_pos,
            &self.p_hiv_unk,
            &self.n_lm,
        ];
        if all.iter().any(|v| v.half95.is_some_and(|h| h < 0.0)) {
            return Err(Error::Invalid("half-widths must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub symbol: String,
    pub description: String,
    /// `input`, or the step that produced the value with its formula.
    pub provenance: String,
    pub value: IntervalEstimate,
}

/// Every input and derived quantity of the chain, in derivation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorReport {
    pub name: Option<String>,
    pub inputs: CountyInputs,
    pub p_lm_given_ssh: IntervalEstimate,
    pub n_lm_ssh: IntervalEstimate,
    pub p_domes_part: IntervalEstimate,
    pub p_ssh_given_lmsm: IntervalEstimate,
    pub prior_n_lmsm: IntervalEstimate,
    pub p_msm_given_lm: IntervalEstimate,
    pub n_lmsm_hiv_pos: IntervalEstimate,
    pub n_lmsm_hiv_unk: IntervalEstimate,
    pub rows: Vec<ReportRow>,
}

/// First-order interval of a product `a * b / 100`, present only when both
/// factors carry one.
fn product_half(a: &IntervalEstimate, b: &IntervalEstimate) -> Option<f64> {
    match (a.half95, b.half95) {
        (Some(ha), Some(hb)) => Some((b.point * ha).hypot(a.point * hb) / 100.0),
        _ => None,
    }
}

/// Run the full chain for one county.
pub fn build_prior_report(inputs: &CountyInputs) -> Result<PriorReport> {
    inputs.validate()?;
    let i = inputs;
    let p_lm_given_ssh = IntervalEstimate::percent(
        latino_male_ssh_share(i.p_m_given_ssh.point, i.p_l_given_ssh.point),
        product_half(&i.p_m_given_ssh, &i.p_l_given_ssh).map(round_percent),
    );
    let n_lm_ssh = IntervalEstimate::count(
        latino_male_ssh_count(p_lm_given_ssh.point, i.n_ssh.point),
        product_half(&p_lm_given_ssh, &i.n_ssh).map(round_count),
    );
    let p_domes_part = domestic_partnership_rate(i.p_livsit1, i.p_livsit2);
    let p_ssh_given_lmsm = ssh_rate(p_domes_part);
    let prior_n_lmsm = msm_population_prior(n_lm_ssh.point, p_ssh_given_lmsm)?;
    let p_msm_given_lm = msm_share_of_latino_males(prior_n_lmsm, i.n_lm.point)?;
    let n_lmsm_hiv_pos = hiv_subpopulation(prior_n_lmsm.point, i.p_hiv_pos, 0);
    let n_lmsm_hiv_unk = hiv_subpopulation(prior_n_lmsm.point, i.p_hiv_unk, 0);

    let row = |symbol: &str, description: &str, provenance: &str, value: IntervalEstimate| ReportRow {
        symbol: symbol.into(),
        description: description.into(),
        provenance: provenance.into(),
        value,
    };
    let rows = vec![
        row("N_SSH", "# of same-sex householders", "input", i.n_ssh),
        row("P_M|SSH", "% SSH are male", "input", i.p_m_given_ssh),
        row("P_L|SSH", "% SSH are Latino", "input", i.p_l_given_ssh),
        row(
            "P_L,M|SSH",
            "% SSH are Latino and male",
            "latino_male_ssh_share: P_M|SSH * P_L|SSH",
            p_lm_given_ssh,
        ),
        row(
            "N_L,M,SSH",
            "# of Latino male SSH",
            "latino_male_ssh_count: P_L,M|SSH * N_SSH",
            n_lm_ssh,
        ),
        row("P_LivSit1|L,MSM", "% living with partner only", "input", i.p_livsit1),
        row(
            "P_LivSit2|L,MSM",
            "% living with partner and others",
            "input",
            i.p_livsit2,
        ),
        row(
            "P_DomesPart|L,MSM",
            "% in a domestic partnership",
            "domestic_partnership_rate: P_LivSit1 + P_LivSit2",
            p_domes_part,
        ),
        row(
            "P_SSH|L,MSM",
            "% are same-sex householders",
            "ssh_rate: P_DomesPart / 2",
            p_ssh_given_lmsm,
        ),
        row(
            "Prior N_L,MSM",
            "# of Latino MSM",
            "msm_population_prior: N_L,M,SSH / P_SSH|L,MSM",
            prior_n_lmsm,
        ),
        row("N_L,M", "# of Latino males", "input", i.n_lm),
        row(
            "P_MSM|L,M",
            "% Latino males who are MSM",
            "msm_share_of_latino_males: N_L,MSM / N_L,M",
            p_msm_given_lm,
        ),
        row("P_HIV+|L,MSM", "% HIV positive", "input", i.p_hiv_pos),
        row("P_HIV?|L,MSM", "% HIV status unknown", "input", i.p_hiv_unk),
        row(
            "N_L,MSM,HIV+",
            "# HIV positive",
            "hiv_subpopulation: P_HIV+ * N_L,MSM",
            n_lmsm_hiv_pos,
        ),
        row(
            "N_L,MSM,HIV?",
            "# HIV status unknown",
            "hiv_subpopulation: P_HIV? * N_L,MSM",
            n_lmsm_hiv_unk,
        ),
    ];
    Ok(PriorReport {
        name: i.name.clone(),
        inputs: i.clone(),
        p_lm_given_ssh,
        n_lm_ssh,
        p_domes_part,
        p_ssh_given_lmsm,
        prior_n_lmsm,
        p_msm_given_lm,
        n_lmsm_hiv_pos,
        n_lmsm_hiv_unk,
        rows,
    })
}

impl PriorReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["symbol", "description", "provenance", "point", "half95", "units"])?;
        for r in &self.rows {
            w.write_record([
                r.symbol.clone(),
                r.description.clone(),
                r.provenance.clone(),
                r.value.point_string(),
                r.value.half95_string(),
                match r.value.units {
                    Units::Count => "count".into(),
                    Units::Percent => "percent".into(),
                },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// The 50% interval implied by the prior count, for use as an SS-PSE prior.
    pub fn prior_interval50(&self) -> Result<(f64, f64)> {
        let half = self.prior_n_lmsm.half95.ok_or_else(|| {
            Error::Invalid("prior population estimate has no interval".into())
        })?;
        ci95_to_ci50(self.prior_n_lmsm.point, half)
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // 3.14 is a survey percentage
mod tests {
    use super::*;

    #[test]
    fn share_and_count() {
        assert_eq!(latino_male_ssh_share(68.33, 12.55), 8.58);
        assert_eq!(latino_male_ssh_share(82.05, 10.32), 8.47);
        assert_eq!(latino_male_ssh_share(100.0, 37.5), 37.5);
        assert_eq!(latino_male_ssh_count(8.58, 14050.0), 1205.0);
        assert_eq!(latino_male_ssh_count(8.47, 10450.0), 885.0);
        assert_eq!(latino_male_ssh_count(0.0, 999.0), 0.0);
    }

    #[test]
    fn partnership_uses_quadrature() {
        let d = domestic_partnership_rate(
            IntervalEstimate::percent(16.05, Some(6.16)),
            IntervalEstimate::percent(3.14, Some(2.98)),
        );
        assert_eq!(d.point, 19.19);
        assert_eq!(d.half95, Some(6.84));
        let d = domestic_partnership_rate(
            IntervalEstimate::percent(14.79, Some(5.71)),
            IntervalEstimate::percent(3.50, Some(3.22)),
        );
        assert_eq!(d.point, 18.29);
        assert_eq!(d.half95, Some(6.56));
        let z = domestic_partnership_rate(
            IntervalEstimate::percent(0.0, Some(0.0)),
            IntervalEstimate::percent(0.0, Some(0.0)),
        );
        assert_eq!((z.point, z.half95), (0.0, Some(0.0)));
        let unknown = domestic_partnership_rate(
            IntervalEstimate::percent(1.0, None),
            IntervalEstimate::percent(2.0, Some(1.0)),
        );
        assert_eq!(unknown.half95, None);
    }

    #[test]
    fn householder_rate() {
        let r = ssh_rate(IntervalEstimate::percent(19.19, Some(6.84)));
        assert_eq!((r.point, r.half95), (9.60, Some(3.42)));
        let r = ssh_rate(IntervalEstimate::percent(18.29, Some(6.56)));
        assert_eq!((r.point, r.half95), (9.15, Some(3.28)));
        assert_eq!(ssh_rate(IntervalEstimate::percent(0.0, None)).point, 0.0);
    }

    #[test]
    fn population_prior() {
        let p = msm_population_prior(1205.0, IntervalEstimate::percent(9.60, Some(3.42))).unwrap();
        assert_eq!((p.point, p.half95), (12552.0, Some(6946.0)));
        let p = msm_population_prior(885.0, IntervalEstimate::percent(9.15, Some(3.28))).unwrap();
        assert_eq!((p.point, p.half95), (9672.0, Some(5405.0)));
        let p = msm_population_prior(777.0, IntervalEstimate::percent(100.0, Some(0.0))).unwrap();
        assert_eq!((p.point, p.half95), (777.0, Some(0.0)));
        assert!(msm_population_prior(10.0, IntervalEstimate::percent(0.0, None)).is_err());
        let p = msm_population_prior(10.0, IntervalEstimate::percent(2.0, Some(3.0))).unwrap();
        assert_eq!((p.point, p.half95), (500.0, None));
    }

    #[test]
    fn subpopulations() {
        let h = hiv_subpopulation(12552.0, IntervalEstimate::percent(14.1, Some(6.85)), 0);
        assert_eq!((h.point, h.half95), (1770.0, Some(860.0)));
        assert_eq!(subpopulation_count(10071.5, 14.1, 2), 1420.08);
        assert_eq!(subpopulation_count(8469.8, 10.1, 2), 855.45);
    }

    #[test]
    fn share_of_males() {
        let s = msm_share_of_latino_males(IntervalEstimate::count(12552.0, Some(6946.0)), 462801.0)
            .unwrap();
        assert_eq!((s.point, s.half95), (2.71, Some(1.50)));
        let s = msm_share_of_latino_males(IntervalEstimate::count(9672.0, Some(5405.0)), 54251.0)
            .unwrap();
        assert_eq!((s.point, s.half95), (17.83, Some(9.96)));
        let s = msm_share_of_latino_males(IntervalEstimate::count(0.0, None), 10.0).unwrap();
        assert_eq!(s.point, 0.0);
        assert!(msm_share_of_latino_males(IntervalEstimate::count(1.0, None), 0.0).is_err());
    }

    #[test]
    fn ci50() {
        let (lo, hi) = ci95_to_ci50(12552.0, 6946.0).unwrap();
        assert!((lo - 10161.9).abs() < 0.05 && (hi - 14942.1).abs() < 0.05);
        let (lo, hi) = ci95_to_ci50(9672.0, 5405.0).unwrap();
        assert!((lo - 7812.1).abs() < 0.05 && (hi - 11531.9).abs() < 0.05);
        assert_eq!(ci95_to_ci50(5.0, 0.0).unwrap(), (5.0, 5.0));
        assert!(ci95_to_ci50(5.0, -1.0).is_err());
        assert!((normal_ci50_ratio() - CI50_RATIO).abs() < 5e-5);
    }

    #[test]
    fn nsum() {
        let e = nsum_estimate(&NsumInputs {
            known_members: vec![1, 1],
            network_sizes: vec![10, 10],
            frame_population: 1000,
        });
        assert_eq!(e.unwrap(), 100);
        let zero = nsum_estimate(&NsumInputs {
            known_members: vec![0, 0, 0],
            network_sizes: vec![4, 9, 1],
            frame_population: 5000,
        });
        assert_eq!(zero.unwrap(), 0);
        assert!(nsum_estimate(&NsumInputs {
            known_members: vec![],
            network_sizes: vec![],
            frame_population: 5,
        })
        .is_err());
        assert!(nsum_estimate(&NsumInputs {
            known_members: vec![3],
            network_sizes: vec![2],
            frame_population: 5,
        })
        .is_err());
    }

    #[test]
    fn missing_field_is_named() {
        let text = COOK_CONFIG.replace("n_ssh = { point = 14050 }", "");
        let err = CountyInputs::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("n_ssh"), "{err}");
    }

    #[test]
    fn zero_rates_fail_at_population_step() {
        let mut c = CountyInputs::cook();
        c.p_livsit1 = IntervalEstimate::percent(0.0, Some(0.0));
        c.p_livsit2 = IntervalEstimate::percent(0.0, Some(0.0));
        assert!(matches!(build_prior_report(&c), Err(Error::Estimation(_))));
    }

    #[test]
    fn display_marks_unknown_interval() {
        assert_eq!(IntervalEstimate::count(14050.0, None).to_string(), "14050 ±?");
        assert_eq!(
            IntervalEstimate::percent(9.6, Some(3.42)).to_string(),
            "9.60% ±3.42%"
        );
    }
}

//! Scaled-beta priors over population size.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use super::summary::{Summary, QUANTILE_LEVELS};
use crate::{Error, Result};

/// Coefficient of variation imposed when the user gives a single statistic.
pub const DEFAULT_PRIOR_CV: f64 = 0.5;
/// Default upper support bound as a multiple of the prior point estimate.
pub const DEFAULT_HARD_MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "form")]
pub enum PriorForm {
    Mean { value: f64 },
    Median { value: f64 },
    Mode { value: f64 },
    /// Central 50% interval: the 25% and 75% quantiles.
    Interval50 { lower: f64, upper: f64 },
}

impl PriorForm {
    /// Single point used to place the default upper bound.
    pub fn point(&self) -> f64 {
        match *self {
            PriorForm::Mean { value } | PriorForm::Median { value } | PriorForm::Mode { value } => {
                value
            }
            PriorForm::Interval50 { lower, upper } => 0.5 * (lower + upper),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(flatten)]
    pub form: PriorForm,
    /// Lower support bound, normally the sample size.
    pub hard_min: u64,
    pub hard_max: u64,
}

impl PriorSpec {
    /// Spec with the default upper bound of ten times the point estimate.
    pub fn with_default_max(form: PriorForm, hard_min: u64) -> Self {
        let hard_max = (DEFAULT_HARD_MAX_FACTOR * form.point()).ceil() as u64;
        PriorSpec {
            form,
            hard_min,
            hard_max: hard_max.max(hard_min + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.hard_min as f64, self.hard_max as f64);
        if self.hard_max <= self.hard_min {
            return Err(Error::Invalid(format!(
                "prior support [{}, {}] is empty",
                self.hard_min, self.hard_max
            )));
        }
        let inside = |v: f64| v > lo && v < hi;
        let ok = match self.form {
            PriorForm::Mean { value } | PriorForm::Median { value } | PriorForm::Mode { value } => {
                inside(value)
            }
            PriorForm::Interval50 { lower, upper } => {
                if lower >= upper {
                    return Err(Error::Invalid(format!(
                        "prior interval lower bound {lower} is not below upper bound {upper}"
                    )));
                }
                inside(lower) && inside(upper)
            }
        };
        if !ok {
            return Err(Error::Invalid(format!(
                "prior values must lie strictly inside ({}, {})",
                self.hard_min, self.hard_max
            )));
        }
        Ok(())
    }
}

/// Beta(alpha, beta) rescaled from [0, 1] to [hard_min, hard_max].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPrior {
    pub spec: PriorSpec,
    pub alpha: f64,
    pub beta: f64,
    pub summary: Summary,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn beta_cdf(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, u)
    }
}

fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_cdf(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

impl FittedPrior {
    pub fn from_shapes(spec: PriorSpec, alpha: f64, beta: f64) -> Self {
        let mut prior = FittedPrior {
            spec,
            alpha,
            beta,
            summary: Summary::default(),
        };
        prior.summary = prior.compute_summary();
        prior
    }

    fn width(&self) -> f64 {
        (self.spec.hard_max - self.spec.hard_min) as f64
    }

    fn to_unit(&self, x: f64) -> f64 {
        (x - self.spec.hard_min as f64) / self.width()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        beta_cdf(self.alpha, self.beta, self.to_unit(x))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.spec.hard_min as f64 + self.width() * beta_quantile(self.alpha, self.beta, p)
    }

    /// Continuous density on the original scale.
    pub fn pdf(&self, x: f64) -> f64 {
        let u = self.to_unit(x);
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        ((self.alpha - 1.0) * u.ln() + (self.beta - 1.0) * (1.0 - u).ln()
            - ln_beta(self.alpha, self.beta))
        .exp()
            / self.width()
    }

    /// Log prior mass of integer population size `n`: the density integrated
    /// over `[n - 1/2, n + 1/2]` clipped to the support. Finite even where the
    /// density diverges at an endpoint.
    pub fn ln_mass(&self, n: u64) -> f64 {
        if n < self.spec.hard_min || n > self.spec.hard_max {
            return f64::NEG_INFINITY;
        }
        let lo = self.cdf(n as f64 - 0.5);
        let hi = self.cdf(n as f64 + 0.5);
        (hi - lo).max(f64::MIN_POSITIVE).ln()
    }

    pub fn mean(&self) -> f64 {
        self.spec.hard_min as f64 + self.width() * self.alpha / (self.alpha + self.beta)
    }

    pub fn sd(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        self.width() * (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt()
    }

    pub fn mode(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let u = if a > 1.0 && b > 1.0 {
            (a - 1.0) / (a + b - 2.0)
        } else if a <= 1.0 && b > 1.0 {
            0.0
        } else if a > 1.0 {
            1.0
        } else if a < b {
            0.0
        } else {
            1.0
        };
        self.spec.hard_min as f64 + self.width() * u
    }

    fn compute_summary(&self) -> Summary {
        Summary {
            mean: self.mean(),
            median: self.quantile(0.5),
            mode: self.mode(),
            quantiles: QUANTILE_LEVELS
                .iter()
                .map(|&p| (p, self.quantile(p)))
                .collect(),
        }
    }
}

/// Damped Newton iteration on a two-parameter residual.
fn solve2<F>(f: F, mut x: [f64; 2]) -> Result<[f64; 2]>
where
    F: Fn([f64; 2]) -> Option<[f64; 2]>,
{
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut r = f(x).ok_or_else(|| Error::NonConvergence("bad starting point".into()))?;
    for _ in 0..500 {
        if norm(r) < 1e-11 {
            return Ok(x);
        }
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (rp, rm) = match (f(xp), f(xm)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::NonConvergence("residual undefined".into())),
            };
            for i in 0..2 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(Error::NonConvergence("singular Jacobian".into()));
        }
        let step = [
            (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let mut t = 1.0;
        loop {
            let cand = [x[0] - t * step[0], x[1] - t * step[1]];
            if let Some(rc) = f(cand) {
                if norm(rc) < norm(r) || t < 1e-8 {
                    x = cand;
                    r = rc;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NonConvergence("line search failed".into()));
            }
        }
    }
    if norm(r) < 1e-8 {
        Ok(x)
    } else {
        Err(Error::NonConvergence(format!(
            "residual {:.3e} after 500 iterations",
            norm(r)
        )))
    }
}

/// Beta shapes with the given unit-scale mean and variance, if feasible.
fn moment_shapes(mean: f64, var: f64) -> Option<(f64, f64)> {
    let spread = mean * (1.0 - mean) / var - 1.0;
    (mean > 0.0 && mean < 1.0 && spread > 0.0).then_some((mean * spread, (1.0 - mean) * spread))
}

fn coefficient_of_variation(spec: &PriorSpec, a: f64, b: f64) -> f64 {
    let p = FittedPrior {
        spec: *spec,
        alpha: a,
        beta: b,
        summary: Summary::default(),
    };
    p.sd() / p.mean()
}

/// Fit the scaled beta to the requested summary. A single statistic is
/// completed by a coefficient of variation of [`DEFAULT_PRIOR_CV`].
pub fn fit_prior(spec: &PriorSpec) -> Result<FittedPrior> {
    spec.validate()?;
    let lo = spec.hard_min as f64;
    let width = (spec.hard_max - spec.hard_min) as f64;
    let unit = |x: f64| (x - lo) / width;
    let cv = DEFAULT_PRIOR_CV;
    let infeasible = |what: &str| {
        Error::Invalid(format!(
            "prior {what} cannot be matched on [{}, {}] with coefficient of variation {cv}",
            spec.hard_min, spec.hard_max
        ))
    };

    let (alpha, beta) = match spec.form {
        PriorForm::Interval50 { lower, upper } => {
            let (u1, u2) = (unit(lower), unit(upper));
            let m = 0.5 * (u1 + u2);
            let sd = (u2 - u1) / 1.349;
            let (a0, b0) = moment_shapes(m, sd * sd).unwrap_or((1.0, 1.0));
            let x = solve2(
                |p| {
                    let (a, b) = (p[0].exp(), p[1].exp());
                    let f1 = beta_cdf(a, b, u1);
                    let f2 = beta_cdf(a, b, u2);
                    if !(f1 > 0.0 && f1 < 1.0 && f2 > 0.0 && f2 < 1.0) {
                        return None;
                    }
                    Some([logit(f1) - logit(0.25), logit(f2) - logit(0.75)])
                },
                [a0.ln(), b0.ln()],
            )?;
            (x[0].exp(), x[1].exp())
        }
        PriorForm::Mean { value } => {
            let m = unit(value);
            let sd = cv * value / width;
            moment_shapes(m, sd * sd).ok_or_else(|| infeasible("mean"))?
        }
        PriorForm::Median { value } => {
            let m = unit(value);
            let sd = cv * value / width;
            let (a0, b0) = moment_shapes(m, sd * sd).unwrap_or((1.0, 1.0));
            let x = solve2(
                |p| {
                    let (a, b) = (p[0].exp(), p[1].exp());
                    let f = beta_cdf(a, b, m);
                    if !(f > 0.0 && f < 1.0) {
                        return None;
                    }
                    Some([
                        logit(f),
                        coefficient_of_variation(spec, a, b).ln() - cv.ln(),
                    ])
                },
                [a0.ln(), b0.ln()],
            )
            .map_err(|_| infeasible("median"))?;
            (x[0].exp(), x[1].exp())
        }
        PriorForm::Mode { value } => {
            // alpha = 1 + c m, beta = 1 + c (1 - m) keeps the mode at m for
            // every concentration c > 0; the CV falls monotonically in c.
            let m = unit(value);
            if !(m > 0.0 && m < 1.0) {
                return Err(infeasible("mode"));
            }
            let shapes = |ln_c: f64| {
                let c = ln_c.exp();
                (1.0 + c * m, 1.0 + c * (1.0 - m))
            };
            let cv_at = |ln_c: f64| {
                let (a, b) = shapes(ln_c);
                coefficient_of_variation(spec, a, b)
            };
            let (mut lo_c, mut hi_c) = (-30.0, 30.0);
            if !(cv_at(lo_c) >= cv && cv_at(hi_c) <= cv) {
                return Err(infeasible("mode"));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo_c + hi_c);
                if cv_at(mid) > cv {
                    lo_c = mid;
                } else {
                    hi_c = mid;
                }
            }
            shapes(0.5 * (lo_c + hi_c))
        }
    };

    let prior = FittedPrior::from_shapes(*spec, alpha, beta);
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    let ok = match spec.form {
        PriorForm::Interval50 { lower, upper } => {
            rel(prior.quantile(0.25), lower) <= 0.01 && rel(prior.quantile(0.75), upper) <= 0.01
        }
        PriorForm::Mean { value } => rel(prior.mean(), value) <= 0.005,
        PriorForm::Median { value } => rel(prior.quantile(0.5), value) <= 0.005,
        PriorForm::Mode { value } => rel(prior.mode(), value) <= 0.005,
    };
    if !ok {
        return Err(Error::NonConvergence(format!(
            "fitted prior misses the requested {:?}",
            spec.form
        )));
    }
    Ok(prior)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn interval_fit_matches_quartiles() {
        let spec = PriorSpec {
            form: PriorForm::Interval50 {
                lower: 10162.0,
                upper: 14942.0,
            },
            hard_min: 323,
            hard_max: 129_099,
        };
        let p = fit_prior(&spec).unwrap();
        assert!(rel(p.quantile(0.25), 10162.0) < 1e-4);
        assert!(rel(p.quantile(0.75), 14942.0) < 1e-4);
    }

    #[test]
    fn symmetric_interval_gives_equal_shapes() {
        let spec = PriorSpec {
            form: PriorForm::Interval50 {
                lower: 4000.0,
                upper: 6000.0,
            },
            hard_min: 0,
            hard_max: 10_000,
        };
        let p = fit_prior(&spec).unwrap();
        assert!((p.alpha - p.beta).abs() < 1e-6, "{} {}", p.alpha, p.beta);
    }

    #[test]
    fn single_statistic_forms() {
        let mean = fit_prior(&PriorSpec::with_default_max(PriorForm::Mean { value: 5000.0 }, 300))
            .unwrap();
        assert!(rel(mean.mean(), 5000.0) < 1e-9);
        assert!(rel(mean.sd() / mean.mean(), 0.5) < 1e-9);

        let median =
            fit_prior(&PriorSpec::with_default_max(PriorForm::Median { value: 5000.0 }, 300))
                .unwrap();
        assert!(rel(median.quantile(0.5), 5000.0) < 1e-6);
        assert!(rel(median.sd() / median.mean(), 0.5) < 1e-6);

        let mode = fit_prior(&PriorSpec::with_default_max(PriorForm::Mode { value: 5000.0 }, 300))
            .unwrap();
        assert!(rel(mode.mode(), 5000.0) < 1e-6);
    }

    #[test]
    fn mode_near_lower_bound_is_right_skewed() {
        let spec = PriorSpec {
            form: PriorForm::Mode { value: 301.0 },
            hard_min: 300,
            hard_max: 10_000,
        };
        let p = fit_prior(&spec).unwrap();
        let s = &p.summary;
        assert!(s.mean > s.median && s.median > s.mode, "{s:?}");
    }

    #[test]
    fn invalid_specs() {
        let bad = PriorSpec {
            form: PriorForm::Interval50 {
                lower: 5.0,
                upper: 50.0,
            },
            hard_min: 10,
            hard_max: 100,
        };
        assert!(fit_prior(&bad).is_err());
        let reversed = PriorSpec {
            form: PriorForm::Interval50 {
                lower: 60.0,
                upper: 50.0,
            },
            hard_min: 10,
            hard_max: 100,
        };
        assert!(fit_prior(&reversed).is_err());
    }

    #[test]
    fn mass_sums_to_one() {
        let p = fit_prior(&PriorSpec {
            form: PriorForm::Interval50 {
                lower: 40.0,
                upper: 90.0,
            },
            hard_min: 20,
            hard_max: 400,
        })
        .unwrap();
        let total: f64 = (20..=400).map(|n| p.ln_mass(n).exp()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        assert_eq!(p.ln_mass(19), f64::NEG_INFINITY);
    }
}

//! Small descriptive-statistics helpers shared by the estimators.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator). Zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mode estimate: midpoint of the densest histogram bin with Freedman-Diaconis
/// bin width. Falls back to the most frequent value when the IQR is zero.
pub fn histogram_mode(sorted: &[f64]) -> f64 {
    assert!(!sorted.is_empty(), "mode of empty sample");
    let n = sorted.len();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let (min, max) = (sorted[0], sorted[n - 1]);
    let width = 2.0 * iqr / (n as f64).cbrt();
    if !(width > 0.0) || max <= min {
        return most_frequent(sorted);
    }
    let bins = (((max - min) / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &x in sorted {
        let b = (((x - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc })
        .0;
    min + (best as f64 + 0.5) * width
}

fn most_frequent(sorted: &[f64]) -> f64 {
    let mut best = (sorted[0], 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best.1 {
            best = (sorted[i], j - i);
        }
        i = j;
    }
    best.0
}

/// `ln(sum(exp(xs)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Round half away from zero to `decimals` places, tolerant of binary
/// representation error (so 9.145 rounds to 9.15).
pub fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let scaled = x * scale;
    let cleaned = (scaled * 1e6).round() / 1e6;
    cleaned.round() / scale
}

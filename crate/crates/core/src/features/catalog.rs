//! The fixed feature catalog.
//!
//! Degenerate inputs never produce NaN or infinity. Documented values:
//! - zero variance: skewness, kurtosis, autocorrelations, r-value,
//!   complexity estimate and beyond-sigma ratios are 0;
//! - lags at or beyond the series length: autocorrelation 0;
//! - length 1: mean change, mean absolute change, slope, r-value,
//!   second derivative and index of maximum change are 0, the intercept is
//!   the single value;
//! - binned entropy of a constant series is 0 (one occupied bin).

pub const CATALOG_SIZE: usize = 44;

#[derive(Debug, Clone, Copy)]
pub struct FeatureDef {
    pub id: &'static str,
    pub description: &'static str,
    /// Value is unchanged by any reordering of the series.
    pub order_invariant: bool,
}

const fn def(id: &'static str, description: &'static str, order_invariant: bool) -> FeatureDef {
    FeatureDef {
        id,
        description,
        order_invariant,
    }
}

static CATALOG: [FeatureDef; CATALOG_SIZE] = [
    def("mean", "arithmetic mean", true),
    def("variance", "population variance", true),
    def("standard_deviation", "population standard deviation", true),
    def("median", "median (mean of middle pair for even length)", true),
    def("minimum", "smallest value", true),
    def("maximum", "largest value", true),
    def("range", "maximum minus minimum", true),
    def("sum_values", "sum of values", true),
    def("length", "number of steps", true),
    def("quantile_q0.1", "10% quantile, linear interpolation", true),
    def("quantile_q0.25", "25% quantile, linear interpolation", true),
    def("quantile_q0.75", "75% quantile, linear interpolation", true),
    def("quantile_q0.9", "90% quantile, linear interpolation", true),
    def("skewness", "population skewness m3 / m2^1.5", true),
    def("kurtosis", "population excess kurtosis m4 / m2^2 - 3", true),
    def("abs_energy", "sum of squares", true),
    def("mean_change", "mean of successive differences", false),
    def("mean_abs_change", "mean of absolute successive differences", false),
    def("number_mean_crossings", "times consecutive values fall on opposite sides of the mean", false),
    def("count_above_mean", "values strictly above the mean", true),
    def("count_below_mean", "values strictly below the mean", true),
    def("longest_run_above_mean", "longest run of consecutive values above the mean", false),
    def("longest_run_below_mean", "longest run of consecutive values below the mean", false),
    def("autocorrelation_lag1", "autocorrelation at lag 1", false),
    def("autocorrelation_lag2", "autocorrelation at lag 2", false),
    def("autocorrelation_lag5", "autocorrelation at lag 5", false),
    def("autocorrelation_lag10", "autocorrelation at lag 10", false),
    def("linear_trend_slope", "least-squares slope against step index", false),
    def("linear_trend_intercept", "least-squares intercept at step 0", false),
    def("linear_trend_rvalue", "Pearson correlation with step index", false),
    def("number_peaks_support3", "values larger than their 3 neighbours on each side", false),
    def("first_location_of_maximum", "first argmax divided by length", false),
    def("last_location_of_maximum", "(last argmax + 1) divided by length", false),
    def("first_location_of_minimum", "first argmin divided by length", false),
    def("last_location_of_minimum", "(last argmin + 1) divided by length", false),
    def("binned_entropy_10", "entropy of a 10-bin equal-width histogram", true),
    def("c3_lag1", "mean of x[i] * x[i+1] * x[i+2]", false),
    def("cid_ce_normalized", "sqrt of summed squared differences of the z-scored series", false),
    def("ratio_beyond_1_sigma", "share of values more than 1 std from the mean", true),
    def("ratio_beyond_2_sigma", "share of values more than 2 std from the mean", true),
    def("mean_abs_value", "mean of absolute values", true),
    def("root_mean_square", "root mean square", true),
    def("index_max_abs_change", "first i maximising |x[i+1] - x[i]|", false),
    def("mean_second_derivative_central", "mean of (x[i+2] - 2 x[i+1] + x[i]) / 2", false),
];

pub fn catalog() -> &'static [FeatureDef] {
    &CATALOG
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn longest_run(x: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    let (mut best, mut cur) = (0, 0);
    for &v in x {
        if pred(v) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

fn autocorrelation(x: &[f64], mean: f64, var: f64, lag: usize) -> f64 {
    let n = x.len();
    if lag >= n || var == 0.0 {
        return 0.0;
    }
    let s: f64 = (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum();
    s / ((n - lag) as f64 * var)
}

fn binned_entropy(x: &[f64], min: f64, max: f64, bins: usize) -> f64 {
    if max <= min {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    let width = (max - min) / bins as f64;
    for &v in x {
        let b = (((v - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = x.len() as f64;
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Values for every catalog entry, in catalog order. `x` must be non-empty.
pub fn compute_catalog(x: &[f64]) -> Vec<f64> {
    assert!(!x.is_empty(), "feature extraction needs at least one value");
    let n = x.len();
    let nf = n as f64;
    let sum: f64 = x.iter().sum();
    let mean = sum / nf;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let std = m2.sqrt();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[n - 1]);
    let median = quantile(&sorted, 0.5);
    let energy: f64 = x.iter().map(|v| v * v).sum();

    let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_change = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().sum::<f64>() / diffs.len() as f64
    };
    let mean_abs_change = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64
    };
    let crossings = x
        .windows(2)
        .filter(|w| (w[0] > mean) != (w[1] > mean))
        .count();

    // least squares against t = 0..n-1
    let t_mean = (nf - 1.0) / 2.0;
    let stt: f64 = (0..n).map(|t| (t as f64 - t_mean).powi(2)).sum();
    let sty: f64 = x
        .iter()
        .enumerate()
        .map(|(t, v)| (t as f64 - t_mean) * (v - mean))
        .sum();
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = mean - slope * t_mean;
    let syy = m2 * nf;
    let rvalue = if stt > 0.0 && syy > 0.0 {
        (sty / (stt * syy).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    let support = 3;
    let peaks = if n > 2 * support {
        (support..n - support)
            .filter(|&i| (1..=support).all(|k| x[i] > x[i - k] && x[i] > x[i + k]))
            .count()
    } else {
        0
    };

    let first_max = x.iter().position(|&v| v == max).unwrap_or(0);
    let last_max = x.iter().rposition(|&v| v == max).unwrap_or(0);
    let first_min = x.iter().position(|&v| v == min).unwrap_or(0);
    let last_min = x.iter().rposition(|&v| v == min).unwrap_or(0);

    let c3 = if n > 2 {
        (0..n - 2).map(|i| x[i] * x[i + 1] * x[i + 2]).sum::<f64>() / (n - 2) as f64
    } else {
        0.0
    };
    let cid = if std > 0.0 {
        diffs.iter().map(|d| (d / std).powi(2)).sum::<f64>().sqrt()
    } else {
        0.0
    };
    let beyond = |r: f64| {
        if std > 0.0 {
            x.iter().filter(|v| (*v - mean).abs() > r * std).count() as f64 / nf
        } else {
            0.0
        }
    };
    let index_max_change = diffs
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, d)| {
            if d.abs() > bv {
                (i, d.abs())
            } else {
                (bi, bv)
            }
        })
        .0;
    let second_derivative = if n > 2 {
        (0..n - 2)
            .map(|i| (x[i + 2] - 2.0 * x[i + 1] + x[i]) / 2.0)
            .sum::<f64>()
            / (n - 2) as f64
    } else {
        0.0
    };

    let out = vec![
        mean,
        m2,
        std,
        median,
        min,
        max,
        max - min,
        sum,
        nf,
        quantile(&sorted, 0.1),
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.75),
        quantile(&sorted, 0.9),
        if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 },
        if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 },
        energy,
        mean_change,
        mean_abs_change,
        crossings as f64,
        x.iter().filter(|&&v| v > mean).count() as f64,
        x.iter().filter(|&&v| v < mean).count() as f64,
        longest_run(x, |v| v > mean) as f64,
        longest_run(x, |v| v < mean) as f64,
        autocorrelation(x, mean, m2, 1),
        autocorrelation(x, mean, m2, 2),
        autocorrelation(x, mean, m2, 5),
        autocorrelation(x, mean, m2, 10),
        slope,
        intercept,
        rvalue,
        peaks as f64,
        first_max as f64 / nf,
        (last_max + 1) as f64 / nf,
        first_min as f64 / nf,
        (last_min + 1) as f64 / nf,
        binned_entropy(x, min, max, 10),
        c3,
        cid,
        beyond(1.0),
        beyond(2.0),
        x.iter().map(|v| v.abs()).sum::<f64>() / nf,
        (energy / nf).sqrt(),
        index_max_change as f64,
        second_derivative,
    ];
    debug_assert_eq!(out.len(), CATALOG_SIZE);
    // guard the no-NaN contract against overflow on extreme inputs
    out.into_iter()
        .map(|v| if v.is_finite() { v } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn value(x: &[f64], id: &str) -> f64 {
        let i = catalog().iter().position(|d| d.id == id).unwrap();
        compute_catalog(x)[i]
    }

    #[test]
    fn catalog_ids_unique() {
        let ids: HashSet<_> = catalog().iter().map(|d| d.id).collect();
        assert_eq!(ids.len(), CATALOG_SIZE);
        assert_eq!(catalog().len(), 44);
    }

    #[test]
    fn closed_forms_on_one_two_three() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(value(&x, "mean"), 2.0);
        assert!((value(&x, "linear_trend_slope") - 1.0).abs() < 1e-15);
        assert_eq!(value(&x, "mean_abs_change"), 1.0);
        assert!((value(&x, "linear_trend_intercept") - 1.0).abs() < 1e-15);
        assert!((value(&x, "linear_trend_rvalue") - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_series_degenerates_to_documented_values() {
        let x = [5.0; 4];
        assert_eq!(value(&x, "variance"), 0.0);
        assert_eq!(value(&x, "autocorrelation_lag1"), 0.0);
        assert_eq!(value(&x, "skewness"), 0.0);
        assert_eq!(value(&x, "binned_entropy_10"), 0.0);
        assert_eq!(value(&x, "cid_ce_normalized"), 0.0);
    }

    #[test]
    fn length_one_is_total() {
        let v = compute_catalog(&[0.7]);
        assert!(v.iter().all(|x| x.is_finite()));
        assert_eq!(value(&[0.7], "linear_trend_slope"), 0.0);
        assert_eq!(value(&[0.7], "linear_trend_intercept"), 0.7);
        assert_eq!(value(&[0.7], "autocorrelation_lag10"), 0.0);
    }

    #[test]
    fn peaks_need_three_neighbours_each_side() {
        let x = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0];
        assert_eq!(value(&x, "number_peaks_support3"), 2.0);
    }

    #[test]
    fn locations_and_runs() {
        let x = [0.0, 3.0, 1.0, 3.0, -1.0];
        assert_eq!(value(&x, "first_location_of_maximum"), 0.2);
        assert_eq!(value(&x, "last_location_of_maximum"), 0.8);
        assert_eq!(value(&x, "first_location_of_minimum"), 0.8);
        assert_eq!(value(&x, "index_max_abs_change"), 3.0);
        // mean 1.2: above = {3, 3}
        assert_eq!(value(&x, "count_above_mean"), 2.0);
        assert_eq!(value(&x, "longest_run_below_mean"), 1.0);
        assert_eq!(value(&x, "number_mean_crossings"), 4.0);
    }
}

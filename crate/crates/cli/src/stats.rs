use clustersend_core::analysis::format_significant;
use clustersend_core::Rational;
use num_traits::FromPrimitive;
use serde::Serialize;

/// Trial count from which the relative tolerance also applies.
pub const LARGE_SAMPLE: u64 = 100_000;
/// Relative tolerance for large samples.
pub const RELATIVE_TOLERANCE: f64 = 0.02;

/// Sample statistics of a step-count column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: u64,
    pub mean: f64,
    /// Sample standard deviation (Bessel-corrected).
    pub sd: f64,
    pub max: u64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = u64>) -> Self {
        let values: Vec<u64> = values.into_iter().collect();
        let count = values.len() as u64;
        if count == 0 {
            return Self {
                count,
                mean: 0.0,
                sd: 0.0,
                max: 0,
            };
        }
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / count as f64;
        let sd = if count > 1 {
            let ss: f64 = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let max = values.iter().copied().max().unwrap_or(0);
        Self {
            count,
            mean,
            sd,
            max,
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sd / (self.count as f64).sqrt()
        }
    }

    pub fn ci95(&self) -> f64 {
        1.96 * self.std_error()
    }

    /// `|mean - analytic| <= 3 se`, and within 2% once the sample is large.
    pub fn within_band(&self, analytic: f64) -> bool {
        let gap = (self.mean - analytic).abs();
        // Slack for the float rendering of an exact mean.
        let eps = 1e-9 * analytic.abs().max(1.0);
        if gap > 3.0 * self.std_error() + eps {
            return false;
        }
        self.count < LARGE_SAMPLE || gap <= RELATIVE_TOLERANCE * analytic.abs() + eps
    }

    /// Mean no larger than `bound` up to the statistical band.
    pub fn at_most(&self, bound: f64) -> bool {
        self.mean <= bound + 3.0 * self.std_error() + 1e-9
    }
}

/// Renders a float at the report precision.
pub fn decimal(x: f64) -> String {
    match Rational::from_f64(x) {
        Some(r) => format_significant(&r, 12),
        None => x.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResultRow {
    pub protocol: String,
    pub n1: u32,
    pub f1: u32,
    pub n2: u32,
    pub f2: u32,
    pub analytic_expected: String,
    pub empirical_mean: String,
    pub empirical_max: u64,
    pub trials: u64,
    pub ci95: String,
    pub ok: bool,
}

impl SweepResultRow {
    pub fn new(
        protocol: &str,
        (n1, f1, n2, f2): (u32, u32, u32, u32),
        analytic: &Rational,
        summary: &Summary,
    ) -> Self {
        let analytic_f = clustersend_core::analysis::to_f64(analytic);
        Self {
            protocol: protocol.to_string(),
            n1,
            f1,
            n2,
            f2,
            analytic_expected: format_significant(analytic, 12),
            empirical_mean: decimal(summary.mean),
            empirical_max: summary.max,
            trials: summary.count,
            ci95: decimal(summary.ci95()),
            ok: summary.within_band(analytic_f),
        }
    }
}

/// Empirical expectation checks, one row per configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepResultRow>,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_small_sample() {
        let s = Summary::of([1, 2, 3, 4]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.max, 4);
        assert!(s.within_band(2.5));
        assert!(!s.within_band(5.0));
    }

    #[test]
    fn constant_sample_needs_exact_match() {
        let s = Summary::of(vec![1; 10]);
        assert!(s.within_band(1.0));
        assert!(!s.within_band(1.01));
    }

    #[test]
    fn relative_band_applies_to_large_samples() {
        let s = Summary {
            count: LARGE_SAMPLE,
            mean: 2.0,
            sd: 1000.0,
            max: 9,
        };
        assert!(s.within_band(2.03));
        assert!(!s.within_band(2.1));
    }

    #[test]
    fn decimals_use_report_precision() {
        assert_eq!(decimal(2.25), "2.25000000000");
    }
}

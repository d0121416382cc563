//! Expected-case curves for the two cluster shapes `n = 2f + 1` and
//! `n = 3f + 1`, with the message counts and the reference protocols of the
//! comparison panel.

use std::fmt;
use std::io::Write;

use clustersend_core::analysis::{
    format_decimal, format_exact, pcs_expected_steps, pt_exact, reference_curves,
    sequential_trials_exact, to_f64,
};
use clustersend_core::protocols::ProtocolKind;
use clustersend_core::Rational;

use crate::simulate::simulate;
use crate::spec::RunSpec;
use crate::stats::{SweepResult, SweepResultRow};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    /// `n = 2f + 1`
    Half,
    /// `n = 3f + 1`
    Third,
}

impl Panel {
    pub const ALL: [Panel; 2] = [Panel::Half, Panel::Third];

    pub fn n(self, f: u32) -> u32 {
        match self {
            Panel::Half => 2 * f + 1,
            Panel::Third => 3 * f + 1,
        }
    }
}

impl fmt::Display for Panel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Panel::Half => "2f+1",
            Panel::Third => "3f+1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    pub pcs: SweepResultRow,
    pub plcs: SweepResultRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub panel: Panel,
    pub f: u32,
    pub n: u32,
    pub pcs_expected: Rational,
    /// `PT(n, f, f)`, the bound on expected Plcs steps.
    pub plcs_expected: Rational,
    pub pbs_cs: u64,
    pub geobft: u64,
    pub chainspace: u64,
    pub empirical: Option<Empirical>,
}

impl SweepRow {
    pub fn pcs_msgs(&self) -> Rational {
        &self.pcs_expected * Rational::from_integer(2.into())
    }

    pub fn plcs_msgs(&self) -> Rational {
        &self.plcs_expected * Rational::from_integer(2.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub f_max: u32,
    /// Monte Carlo trials per point and protocol; zero skips simulation.
    pub trials: u64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            f_max: 20,
            trials: 0,
            seed: 0,
            threads: None,
        }
    }
}

pub fn sweep(opts: SweepOptions) -> Result<Vec<SweepRow>, CliError> {
    let domain = |e: clustersend_core::analysis::DomainError| CliError::Usage(e.to_string());
    let mut rows = Vec::new();
    for panel in Panel::ALL {
        for f in 0..=opts.f_max {
            let n = panel.n(f);
            let refs = reference_curves(n, f, n, f).map_err(domain)?;
            let mut row = SweepRow {
                panel,
                f,
                n,
                pcs_expected: pcs_expected_steps(n, f, n, f).map_err(domain)?,
                plcs_expected: pt_exact(n, f, f).map_err(domain)?,
                pbs_cs: refs.pbs_cs,
                geobft: refs.geobft_opt,
                chainspace: refs.chainspace,
                empirical: None,
            };
            if opts.trials > 0 {
                row.empirical = Some(empirical(&row, opts)?);
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn empirical(row: &SweepRow, opts: SweepOptions) -> Result<Empirical, CliError> {
    let (n, f) = (row.n, row.f);
    let shape = (n, f, n, f);
    let seed = opts.seed ^ (u64::from(n) << 32);
    let run = |kind| {
        let spec = RunSpec::new(kind, n, f, n, f)
            .with_trials(opts.trials)
            .with_seed(seed);
        let report = simulate(&spec, opts.threads)?;
        if let Some(bad) = report.failures.first() {
            return Err(CliError::Invariant(format!(
                "{kind} n = {n} f = {f} trial {}: {}",
                bad.trial,
                bad.problems.join("; ")
            )));
        }
        Ok(report.steps())
    };
    let pcs = run(ProtocolKind::Pcs)?;
    let plcs = run(ProtocolKind::PlcsMin)?;
    // Plcs walks the permutation in order, so its exact mean is the in-order
    // expectation; the PT curve must bound it from above.
    let in_order = sequential_trials_exact(n, f, f).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut plcs_row = SweepResultRow::new("plcs-min", shape, &in_order, &plcs);
    plcs_row.ok &= plcs.at_most(to_f64(&row.plcs_expected));
    Ok(Empirical {
        pcs: SweepResultRow::new("pcs", shape, &row.pcs_expected, &pcs),
        plcs: plcs_row,
    })
}

pub const SWEEP_HEADER: [&str; 12] = [
    "panel",
    "f",
    "n",
    "pcs_expected",
    "plcs_expected",
    "pcs_msgs",
    "plcs_msgs",
    "pbs_cs",
    "geobft",
    "chainspace",
    "pcs_exact",
    "plcs_exact",
];

const EMPIRICAL_HEADER: [&str; 6] = [
    "pcs_mean",
    "pcs_ci95",
    "pcs_ok",
    "plcs_mean",
    "plcs_ci95",
    "plcs_ok",
];

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<(), CliError> {
    let with_empirical = rows.iter().any(|r| r.empirical.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = SWEEP_HEADER.to_vec();
    if with_empirical {
        header.extend(EMPIRICAL_HEADER);
    }
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.panel.to_string(),
            row.f.to_string(),
            row.n.to_string(),
            format_decimal(&row.pcs_expected),
            format_decimal(&row.plcs_expected),
            format_decimal(&row.pcs_msgs()),
            format_decimal(&row.plcs_msgs()),
            row.pbs_cs.to_string(),
            row.geobft.to_string(),
            row.chainspace.to_string(),
            format_exact(&row.pcs_expected),
            format_exact(&row.plcs_expected),
        ];
        if with_empirical {
            match &row.empirical {
                Some(e) => record.extend([
                    e.pcs.empirical_mean.clone(),
                    e.pcs.ci95.clone(),
                    e.pcs.ok.to_string(),
                    e.plcs.empirical_mean.clone(),
                    e.plcs.ci95.clone(),
                    e.plcs.ok.to_string(),
                ]),
                None => record.extend(std::iter::repeat_n(String::new(), EMPIRICAL_HEADER.len())),
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Empirical rows of a sweep, in sweep order.
pub fn sweep_result(rows: &[SweepRow]) -> SweepResult {
    SweepResult {
        rows: rows
            .iter()
            .filter_map(|r| r.empirical.as_ref())
            .flat_map(|e| [e.pcs.clone(), e.plcs.clone()])
            .collect(),
    }
}

use std::fmt::Write;

use clustersend_core::analysis::{
    factorial, fc_closed, feasible_k, format_decimal, format_exact, pcs_expected_steps,
    pt_equal_half, pt_exact, reference_curves, sequential_trials_exact, DomainError,
};
use clustersend_core::{ClusterConfig, ClusterId, Rational};
use num_traits::One;

use crate::CliError;

fn both(r: &Rational) -> String {
    format!("{} = {}", format_exact(r), format_decimal(r))
}

/// Expectation of Pcs is below 4 in general and below 9/4 when both
/// clusters have more than three times as many replicas as faulty ones.
pub fn pcs_bound(n1: u32, f1: u32, n2: u32, f2: u32) -> Rational {
    if n1 > 3 * f1 && n2 > 3 * f2 {
        Rational::new(9.into(), 4.into())
    } else {
        Rational::from_integer(4.into())
    }
}

/// Plain-text report of every analytic quantity for `(n1, f1, n2, f2)`.
/// Permutation-pair quantities use lists of length `min(n1, n2)` with `f1`
/// and `f2` faulty entries.
pub fn analyze(n1: u32, f1: u32, n2: u32, f2: u32) -> Result<String, CliError> {
    let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
    ClusterConfig::with_leading_faulty(ClusterId(1), n1, f1).map_err(|e| usage(&e))?;
    ClusterConfig::with_leading_faulty(ClusterId(2), n2, f2).map_err(|e| usage(&e))?;
    let n = n1.min(n2);
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "clusters: n1 = {n1}, f1 = {f1}, n2 = {n2}, f2 = {f2}").unwrap();

    let pcs = pcs_expected_steps(n1, f1, n2, f2).map_err(|e| usage(&e))?;
    writeln!(w, "pcs expected steps: {}", both(&pcs)).unwrap();
    writeln!(w, "pcs bound: {}", format_exact(&pcs_bound(n1, f1, n2, f2))).unwrap();

    match pt_exact(n, f1, f2) {
        Ok(pt) => writeln!(w, "PT({n}, {f1}, {f2}): {}", both(&pt)).unwrap(),
        Err(DomainError(msg)) => writeln!(
            w,
            "PT({n}, {f1}, {f2}): undefined, every position may be faulty ({msg})"
        )
        .unwrap(),
    }
    if let Ok(seq) = sequential_trials_exact(n, f1, f2) {
        writeln!(w, "plcs in-order expected steps: {}", both(&seq)).unwrap();
    }
    if n1 == n2 && f1 == f2 && n1 == 2 * f1 + 1 {
        writeln!(
            w,
            "PT(2f+1, f, f) closed form: {}",
            both(&pt_equal_half(f1))
        )
        .unwrap();
    }

    let refs = reference_curves(n1, f1, n2, f2).map_err(|e| usage(&e))?;
    writeln!(w, "reference: pbs-cs = {}", refs.pbs_cs).unwrap();
    writeln!(w, "reference: pbs-cs (n > 3f) = {}", refs.pbs_cs_3f).unwrap();
    writeln!(w, "reference: geobft = {}", refs.geobft_opt).unwrap();
    writeln!(w, "reference: chainspace = {}", refs.chainspace).unwrap();

    writeln!(w, "FC({n}, {f1}, {f2}, k):").unwrap();
    let total = factorial(n);
    let total = Rational::from_integer((&total * &total).into());
    let mut sum = Rational::from_integer(0.into());
    for k in feasible_k(n, f1.min(n), f2.min(n)) {
        let count = fc_closed(n, f1.min(n), f2.min(n), k).map_err(|e| usage(&e))?;
        let p = Rational::from_integer(count.clone().into()) / &total;
        sum += &p;
        writeln!(w, "  k = {k}: {count} (p = {})", both(&p)).unwrap();
    }
    if sum != Rational::one() {
        return Err(CliError::Invariant(format!(
            "FC probabilities sum to {}",
            format_exact(&sum)
        )));
    }
    Ok(out)
}

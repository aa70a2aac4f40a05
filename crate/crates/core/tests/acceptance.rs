//! Acceptance battery. Prints one line per criterion and exits nonzero when
//! any criterion fails. Tolerances are pinned here independently of the
//! library's own verdicts, and both must agree for a pass.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;

use dislocade::scenarios::{verify_suite, CriterionVerdict};

type Check = fn(&BTreeMap<String, f64>) -> bool;

fn get(m: &BTreeMap<String, f64>, k: &str) -> f64 {
    m.get(k).copied().unwrap_or(f64::NAN)
}

fn pinned(id: &str) -> Check {
    match id {
        "A1" => |m| get(m, "sup_error") <= 1e-3 && get(m, "gamma_rel_error") <= 0.01 && get(m, "oracle_residual") <= 1e-8,
        "A2" => |m| get(m, "max_abs_error") <= 1e-6,
        "A3" => |m| get(m, "rel_error") <= 1e-3,
        "A4" => |m| {
            let errs: Vec<f64> = m.iter().filter(|(k, _)| k.starts_with("error_")).map(|(_, v)| *v).collect();
            errs.len() == 6 && errs.iter().all(|e| *e <= 0.03)
        },
        "A5" => |m| {
            let (coarse, fine) = (get(m, "deviation_eps0.1"), get(m, "deviation_eps0.05"));
            fine <= 5.0 * 0.05 && fine < coarse
        },
        "A6" => |m| get(m, "r_squared") >= 0.99 && get(m, "rate") >= PI / (2.0 * 0.1f64.powi(2)),
        "A7" => |m| {
            (get(m, "exponent_s0.5") - 0.5).abs() <= 0.1
                && (get(m, "exponent_s0.25") - 1.0 / 3.0).abs() <= 0.1
                && get(m, "odd_crossings_final") == 1.0
                && get(m, "odd_alpha") > 0.0
        },
        "A8" => |m| {
            get(m, "first_pair_is_middle") == 1.0 && get(m, "count_drop") == 2.0 && get(m, "reduced_deviation") <= 5.0 * 0.05
        },
        "A9" => |m| get(m, "min_residual") >= 1e-6,
        "A10" => |m| get(m, "vbar_min_residual") >= -1e-3 && get(m, "hhat_min_residual") >= -1e-3,
        "A11" => |m| get(m, "compared") == 10.0 && get(m, "identical") == 10.0,
        _ => |_| false,
    }
}

fn judge(v: &CriterionVerdict) -> bool {
    v.passed && pinned(&v.id)(&v.measured) && v.within_budget()
}

fn main() -> ExitCode {
    let report = match verify_suite("all") {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance battery could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut failed = Vec::new();
    for v in &report.verdicts {
        let ok = judge(v);
        let summary: Vec<String> = v.measured.iter().map(|(k, x)| format!("{k}={x:.4e}")).collect();
        println!(
            "{} {} | {} | {:.1} s of {:.0} s | {}",
            v.id,
            if ok { "PASS" } else { "FAIL" },
            v.title,
            v.runtime_s,
            v.budget_s,
            summary.join(" ")
        );
        for n in &v.notes {
            println!("    {n}");
        }
        if !ok {
            failed.push(v.id.clone());
        }
    }
    if report.verdicts.len() != 11 {
        println!("expected 11 criteria, got {}", report.verdicts.len());
        return ExitCode::FAILURE;
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing {}", failed.join(", "));
        ExitCode::FAILURE
    }
}

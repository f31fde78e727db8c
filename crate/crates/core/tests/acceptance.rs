//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use mcis::verify::{
    classifier_fixtures, coloring_bounds, concentration, delay_gain, destination_maximum, hop_count_law,
    interfering_cell_constant, scah_reduction, schedule_feasibility, sigma1_exactness, CheckOutcome,
};

type Check = Box<dyn Fn() -> CheckOutcome>;

fn main() {
    let checks: Vec<(&str, Check)> = vec![
        ("1", Box::new(hop_count_law)),
        // 9 (C_A, H) combinations x 12 seeds = 108 configs
        ("2", Box::new(|| schedule_feasibility(12))),
        ("3", Box::new(|| interfering_cell_constant(50))),
        ("4", Box::new(|| coloring_bounds(200))),
        ("5", Box::new(sigma1_exactness)),
        ("6", Box::new(|| scah_reduction(10, None))),
        ("7", Box::new(delay_gain)),
        ("8", Box::new(|| concentration(100))),
        ("9", Box::new(|| destination_maximum(200))),
        ("10", Box::new(classifier_fixtures)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        println!("{} ({:.1}s)", outcome.line(), start.elapsed().as_secs_f64());
        if !outcome.passed {
            failed.push(outcome.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

//! One line per acceptance criterion. Set `SPIKELAB_BUDGET=full` to include
//! the three-dimensional quasilinear run.

use spikelab::config::Budget;
use spikelab::verify::{Verifier, CRITERIA};

#[test]
fn acceptance() {
    let budget = match std::env::var("SPIKELAB_BUDGET").as_deref() {
        Ok("full") => Budget::Full,
        _ => Budget::Quick,
    };
    let verifier = Verifier::new(budget, 1);
    let mut failed = Vec::new();
    for info in CRITERIA {
        let outcome = verifier.run(info);
        println!("{}  [{:.1}s]", outcome.line(), outcome.seconds);
        if !outcome.passed {
            failed.push(outcome.name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! A bright coherent state (mean photon number 30) leaks well past 8 Fock
//! levels. With the same data, a limit of 8 stalls at a much larger PrErr
//! than a limit of 16.

use cv_nucleation::experiment::{self, ExperimentConfig, StateSpec};
use cv_nucleation::nucleation::TerminationPolicy;

fn main() -> cv_nucleation::Result<()> {
    let base = ExperimentConfig {
        true_state: StateSpec::Coherent { alpha: 30f64.sqrt(), alpha_im: 0.0 },
        events: 1_000_000,
        rng_seed: 7,
        termination: TerminationPolicy::FixedSteps(8),
        ..ExperimentConfig::default()
    };
    let data = experiment::simulate(&base)?;
    for limit in [8, 16] {
        let config = ExperimentConfig { limit_dim: limit, ..base.clone() };
        let d = data.clone().truncated(limit)?;
        let trace = experiment::nucleate_with_prerr(&config, &d.pom, &d.counts).map_err(|f| f.source)?;
        let prerr: Vec<String> = trace.steps.iter().map(|s| format!("{:.2e}", s.prerr.unwrap_or(f64::NAN))).collect();
        println!("D_lim = {limit:>2}: PrErr {}", prerr.join(" "));
    }
    Ok(())
}

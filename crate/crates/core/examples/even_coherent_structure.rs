//! An even cat state only populates even Fock levels. Nucleation should pick
//! them up first: at D_rec = 8 the mask is usually {0,2,4,6}.

use cv_nucleation::experiment::{self, ExperimentConfig, StateSpec};
use cv_nucleation::nucleation::TerminationPolicy;

fn main() -> cv_nucleation::Result<()> {
    for seed in 1..=5 {
        let config = ExperimentConfig {
            true_state: StateSpec::EvenCoherent { alpha: 5f64.sqrt(), alpha_im: 0.0 },
            events: 1_000_000,
            rng_seed: seed,
            termination: TerminationPolicy::FixedSteps(4),
            evaluate_prerr: false,
            ..ExperimentConfig::default()
        };
        let data = experiment::simulate(&config)?;
        let trace = experiment::nucleate_with_prerr(&config, &data.pom, &data.counts).map_err(|f| f.source)?;
        let masks: Vec<String> = trace.steps.iter().map(|s| s.mask.to_string()).collect();
        println!("seed {seed}: {}", masks.join(" -> "));
    }
    Ok(())
}

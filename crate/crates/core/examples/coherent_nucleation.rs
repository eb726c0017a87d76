//! Nucleates a coherent state |α = 2⟩ from simulated data and prints the
//! reconstruction dimension, chosen mask and PrErr at each step.

use cv_nucleation::experiment::{self, ExperimentConfig, StateSpec};
use cv_nucleation::nucleation::TerminationPolicy;
use cv_nucleation::quantum::{fidelity, DensityMatrix};

fn main() -> cv_nucleation::Result<()> {
    let config = ExperimentConfig {
        true_state: StateSpec::Coherent { alpha: 2.0, alpha_im: 0.0 },
        events: 1_000_000,
        termination: TerminationPolicy::FixedSteps(5),
        ..ExperimentConfig::default()
    };
    let data = experiment::simulate(&config)?;
    let truth: DensityMatrix = config.true_state.build(config.limit_dim)?;

    let trace = experiment::nucleate_with_prerr(&config, &data.pom, &data.counts).map_err(|f| f.source)?;
    println!("{:>5} {:>22} {:>12} {:>10}", "D_rec", "mask", "PrErr", "1 - F");
    for step in &trace.steps {
        let rho = step.ml_result.estimator.embed(&step.mask)?;
        println!(
            "{:>5} {:>22} {:>12.3e} {:>10.2e}",
            step.recon_dim,
            step.mask.to_string(),
            step.prerr.unwrap_or(f64::NAN),
            1.0 - fidelity(&rho, &truth)?
        );
    }
    if let Some(best) = trace.min_prerr_step() {
        println!("minimum PrErr at D_rec = {}", best.recon_dim);
    }
    Ok(())
}

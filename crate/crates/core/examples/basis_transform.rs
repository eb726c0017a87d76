//! Nucleating in the eigenbasis of a guessed target state instead of the Fock
//! basis. A good guess reaches the stabilized PrErr in fewer dimensions.

use cv_nucleation::experiment::{self, ExperimentConfig, StateSpec};
use cv_nucleation::nucleation::{NucleationTrace, TerminationPolicy};

fn show(label: &str, trace: &NucleationTrace) {
    let row: Vec<String> = trace
        .steps
        .iter()
        .map(|s| format!("{}:{:.2e}", s.recon_dim, s.prerr.unwrap_or(f64::NAN)))
        .collect();
    println!("{label:>10}  {}", row.join("  "));
}

fn main() -> cv_nucleation::Result<()> {
    let fock = ExperimentConfig {
        true_state: StateSpec::Coherent { alpha: 2.0, alpha_im: 0.0 },
        events: 1_000_000,
        rng_seed: 5,
        termination: TerminationPolicy::FixedSteps(8),
        ..ExperimentConfig::default()
    };
    let eigen = ExperimentConfig { target_state: Some(StateSpec::Coherent { alpha: 5f64.sqrt(), alpha_im: 0.0 }), ..fock.clone() };
    let data = experiment::simulate(&fock)?;

    let trace = experiment::nucleate_with_prerr(&fock, &data.pom, &data.counts).map_err(|f| f.source)?;
    show("Fock", &trace);

    let basis = experiment::working_basis(&eigen)?;
    let pom = experiment::to_working_basis(&data.pom, basis.as_ref())?;
    let trace = experiment::nucleate_with_prerr(&eigen, &pom, &data.counts).map_err(|f| f.source)?;
    show("eigenbasis", &trace);
    Ok(())
}

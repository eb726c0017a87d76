//! Noiseless data from |1⟩: the seed step should already contain level 1.
//! Rounding the expected counts to integers leaves a small residue that the
//! ML fit can absorb, so the fidelity is close to, not exactly, one.

use cv_nucleation::measurement::{expected_counts, generate_pom, RngStreams, StreamPurpose};
use cv_nucleation::nucleation::{nucleate, NucleationConfig, TerminationPolicy};
use cv_nucleation::quantum::{fidelity, fock_state, DensityMatrix};

fn main() -> cv_nucleation::Result<()> {
    let dim = 16;
    let truth = DensityMatrix::pure(&fock_state(1, dim)?);
    for seed in 1..=4 {
        let streams = RngStreams::new(seed);
        let pom = generate_pom(1000, dim, &mut streams.stream(StreamPurpose::Pom, 0))?;
        let counts = expected_counts(&truth, &pom, 10_000_000)?;
        let config = NucleationConfig {
            evaluate_prerr: false,
            ..NucleationConfig::new(2, dim, TerminationPolicy::FixedSteps(1))
        };
        let trace = nucleate(&pom, &counts, &config, |_, _| Ok(0.0)).map_err(|f| f.source)?;
        let seed_step = &trace.steps[0];
        let f = fidelity(&seed_step.ml_result.estimator.embed(&seed_step.mask)?, &truth)?;
        println!("seed {seed}: mask {} infidelity {:.2e}", seed_step.mask, 1.0 - f);
    }
    Ok(())
}

//! Parametric bootstrap of PrErr for every step of a small run, printed as
//! box-plot statistics with a basic percentile interval.

use cv_nucleation::experiment::{self, ExperimentConfig};
use cv_nucleation::nucleation::TerminationPolicy;

fn main() -> cv_nucleation::Result<()> {
    let config = ExperimentConfig {
        limit_dim: 10,
        outcomes: 300,
        events: 200_000,
        bootstrap: 200,
        termination: TerminationPolicy::FixedSteps(4),
        ..ExperimentConfig::default()
    };
    let data = experiment::simulate(&config)?;
    let mut trace = experiment::nucleate_with_prerr(&config, &data.pom, &data.counts).map_err(|f| f.source)?;
    experiment::attach_bootstrap(&config, &data.pom, &data.counts, &mut trace)?;

    println!("{:>5} {:>10} {:>10} {:>10} {:>10} {:>23} {:>4}", "D_rec", "PrErr", "q1", "median", "q3", "95% CI", "out");
    for step in &trace.steps {
        let (Some(p), Some(s)) = (step.prerr, &step.prerr_stats) else { continue };
        println!(
            "{:>5} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} [{:>9.3e}, {:>9.3e}] {:>4}",
            step.recon_dim,
            p,
            s.q1,
            s.q2,
            s.q3,
            s.ci_low,
            s.ci_high,
            s.outliers.len()
        );
    }
    Ok(())
}

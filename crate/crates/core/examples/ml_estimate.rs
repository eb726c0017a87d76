//! Direct ML estimation on a fixed subspace, watching the iterates climb.

use cv_nucleation::measurement::{generate_pom, sample_counts, RngStreams, StreamPurpose};
use cv_nucleation::ml::{ml_estimate_observed, restrict_pom, MLConfig};
use cv_nucleation::quantum::{coherent_state, fidelity, DensityMatrix, SubspaceMask};
use num_complex::Complex64;

fn main() -> cv_nucleation::Result<()> {
    let dim = 8;
    let streams = RngStreams::new(3);
    let truth = DensityMatrix::pure(&coherent_state(Complex64::new(0.8, 0.4), dim)?);
    let pom = generate_pom(100, dim, &mut streams.stream(StreamPurpose::Pom, 0))?;
    let counts = sample_counts(&truth, &pom, 50_000, &mut streams.stream(StreamPurpose::Counts, 0))?;

    let mask = SubspaceMask::new(dim, vec![0, 1, 2, 3])?;
    let reduced = restrict_pom(&pom, &mask)?;
    let result = ml_estimate_observed(&reduced, &counts, &MLConfig::default(), |it| {
        if it.iteration % 5 == 0 {
            println!("iteration {:>3}: log-likelihood {:.6}", it.iteration, it.log_likelihood);
        }
    })?;
    println!(
        "{} iterations, converged {}, final log-likelihood {:.6}",
        result.iterations, result.converged, result.log_likelihood
    );
    let embedded = result.estimator.embed(&mask)?;
    println!("fidelity with truth: {:.6}", fidelity(&embedded, &truth)?);
    Ok(())
}

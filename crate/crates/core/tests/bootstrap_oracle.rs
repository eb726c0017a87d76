//! The parametric bootstrap from the true state should agree in mean with
//! PrErr over fresh, independently seeded simulations of that state.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use cv_nucleation::measurement::{generate_pom, sample_counts, split_folds, RngStreams, StreamPurpose};
use cv_nucleation::ml::MLConfig;
use cv_nucleation::quantum::{coherent_state, DensityMatrix, Ket, SubspaceMask};
use cv_nucleation::validation::{bootstrap_prerr, cross_validate, BootstrapConfig, BootstrapSource};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn bootstrap_mean_matches_fresh_simulations() {
    let (dim, total, runs) = (6, 10_000_000, 120);
    let streams = RngStreams::new(21);
    let pom = generate_pom(80, dim, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
    // Coherent amplitudes cut to four levels, so the truth lies inside the mask.
    let mut amps = coherent_state(Complex64::new(0.9, 0.3), dim).unwrap().into_amplitudes();
    amps[4..].fill(Complex64::new(0.0, 0.0));
    let truth = DensityMatrix::pure(&Ket::normalized(amps).unwrap());
    let mask = SubspaceMask::new(dim, vec![0, 1, 2, 3]).unwrap();

    let boot = bootstrap_prerr(
        BootstrapSource::Parametric(&truth),
        &mask,
        &pom,
        total,
        &BootstrapConfig::new(runs, 2),
        &streams,
    )
    .unwrap();

    let fresh: Vec<f64> = (0..runs as u64)
        .map(|r| {
            let mut rng = ChaCha20Rng::seed_from_u64(0xfeed_0000 + r);
            let counts = sample_counts(&truth, &pom, total, &mut rng).unwrap();
            let split = split_folds(pom.len(), 2, &mut rng).unwrap();
            cross_validate(&pom, &counts, &mask, &split, &MLConfig::default()).unwrap()
        })
        .collect();

    let (mb, sb) = mean_and_se(&boot);
    let (mf, sf) = mean_and_se(&fresh);
    let bound = 3.0 * (sb * sb + sf * sf).sqrt();
    assert!((mb - mf).abs() <= bound, "bootstrap {mb:e} ± {sb:e}, fresh {mf:e} ± {sf:e}");
}

//! Writes simulated data as a counts file, ingests it back, runs the full
//! pipeline on it and lists the artifacts.

use cv_nucleation::experiment::{self, ExperimentConfig};
use cv_nucleation::io;
use cv_nucleation::nucleation::TerminationPolicy;

fn main() -> cv_nucleation::Result<()> {
    let dir = std::env::temp_dir().join("cvnucleate-round-trip");
    let counts_path = dir.join("counts.txt");

    let sim = ExperimentConfig { limit_dim: 8, outcomes: 200, events: 100_000, ..ExperimentConfig::default() };
    let data = experiment::simulate(&sim)?;
    io::write_counts(&counts_path, &data.pom, &data.counts)?;

    let (pom, counts) = io::ingest_counts(&counts_path)?;
    assert_eq!(counts, data.counts);
    println!("ingested {} outcomes on {} levels, N = {}", pom.len(), pom.dim(), counts.total());

    let config = ExperimentConfig {
        data: Some(counts_path),
        limit_dim: 8,
        bootstrap: 50,
        termination: TerminationPolicy::FixedSteps(3),
        output_dir: dir.join("run"),
        ..ExperimentConfig::default()
    };
    let out = experiment::run_experiment(&config, true)?;
    println!("wrote {}", out.artifacts.trace_json.display());
    println!("wrote {}", out.artifacts.plot_csv.display());
    for path in &out.artifacts.estimators {
        println!("wrote {}", path.display());
    }
    let record = io::read_trace_json(&out.artifacts.trace_json)?;
    println!("trace has {} steps", record.steps.len());
    Ok(())
}

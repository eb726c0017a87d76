//! End-to-end runs: simulate or ingest data, nucleate with per-step
//! prediction error, attach bootstrap statistics, write artifacts.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, TraceRecord};
use crate::measurement::{
    expected_counts, generate_pom, sample_counts, split_folds, CountData, FoldSplit, POMSet, RngStreams,
    StreamPurpose,
};
use crate::ml::{ml_estimate, restrict_pom, MLConfig};
use crate::nucleation::{nucleate, NucleationConfig, NucleationFailure, NucleationTrace, TerminationPolicy};
use crate::quantum::{
    coherent_state, eigenbasis_unitary, even_coherent_state, fock_state, ComplexMatrix, DensityMatrix, SubspaceMask,
};
use crate::validation::{
    bootstrap_prerr, boxplot_stats, cross_validate, BootstrapConfig, BootstrapSource, BootstrapStats,
};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CVNUCLEATE_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Coherent {
        alpha: f64,
        #[serde(default)]
        alpha_im: f64,
    },
    EvenCoherent {
        alpha: f64,
        #[serde(default)]
        alpha_im: f64,
    },
    Fock {
        n: usize,
    },
    /// A density matrix in the estimator file format, embedded at its mask.
    File {
        path: PathBuf,
    },
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<DensityMatrix> {
        Ok(match self {
            StateSpec::Coherent { alpha, alpha_im } => {
                DensityMatrix::pure(&coherent_state(C64::new(*alpha, *alpha_im), dim)?)
            }
            StateSpec::EvenCoherent { alpha, alpha_im } => {
                DensityMatrix::pure(&even_coherent_state(C64::new(*alpha, *alpha_im), dim)?)
            }
            StateSpec::Fock { n } => DensityMatrix::pure(&fock_state(*n, dim)?),
            StateSpec::File { path } => {
                let (rho, mask) = io::read_estimator(path)?;
                if mask.limit_dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: mask.limit_dim() });
                }
                rho.embed(&mask)?
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub true_state: StateSpec,
    /// When set, masks are taken in the eigenbasis of this state.
    pub target_state: Option<StateSpec>,
    /// Counts file to use instead of simulating.
    pub data: Option<PathBuf>,
    /// Dimension the truth and measurement are simulated in; outcomes are
    /// then restricted to the first `limit_dim` Fock states.
    pub simulation_dim: Option<usize>,
    pub limit_dim: usize,
    pub seed_dim: usize,
    pub outcomes: usize,
    pub events: u64,
    pub folds: usize,
    pub bootstrap: usize,
    pub alpha_significance: f64,
    pub termination: TerminationPolicy,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    /// Rounded expected counts instead of multinomial sampling.
    pub noiseless: bool,
    pub evaluate_prerr: bool,
    pub nonparametric_bootstrap: bool,
    pub ml_tolerance: f64,
    pub ml_max_iterations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ml = MLConfig::default();
        ExperimentConfig {
            true_state: StateSpec::Coherent { alpha: 2.0, alpha_im: 0.0 },
            target_state: None,
            data: None,
            simulation_dim: None,
            limit_dim: 16,
            seed_dim: 2,
            outcomes: 1000,
            events: 10_000_000,
            folds: 2,
            bootstrap: 500,
            alpha_significance: 0.05,
            termination: TerminationPolicy::FixedSteps(5),
            rng_seed: 1,
            output_dir: PathBuf::from("cvnucleate-out"),
            noiseless: false,
            evaluate_prerr: true,
            nonparametric_bootstrap: false,
            ml_tolerance: ml.tolerance,
            ml_max_iterations: ml.max_iterations,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Small smoke-test settings: `N = 10^5`, `M = 200`, `D_lim = 8`, `B = 100`.
    pub fn apply_quick(&mut self) {
        self.events = 100_000;
        self.outcomes = 200;
        self.limit_dim = 8;
        self.bootstrap = 100;
        if self.simulation_dim.is_some_and(|d| d < 8) {
            self.simulation_dim = Some(8);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("limit_dim", self.limit_dim),
            ("seed_dim", self.seed_dim),
            ("outcomes", self.outcomes),
            ("folds", self.folds),
            ("bootstrap", self.bootstrap),
            ("ml_max_iterations", self.ml_max_iterations),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        if self.events == 0 {
            return Err(Error::config("events must be positive"));
        }
        if self.folds < 2 || !self.outcomes.is_multiple_of(self.folds) {
            return Err(Error::config(format!(
                "folds = {} must be at least 2 and divide outcomes = {}",
                self.folds, self.outcomes
            )));
        }
        if !(self.alpha_significance > 0.0 && self.alpha_significance < 1.0) {
            return Err(Error::config("alpha_significance must lie in (0, 1)"));
        }
        if self.simulation_dim.is_some_and(|d| d < self.limit_dim) {
            return Err(Error::config("simulation_dim must be at least limit_dim"));
        }
        self.nucleation_config().validate()
    }

    pub fn ml_config(&self) -> MLConfig {
        MLConfig { tolerance: self.ml_tolerance, max_iterations: self.ml_max_iterations, ..MLConfig::default() }
    }

    pub fn nucleation_config(&self) -> NucleationConfig {
        NucleationConfig {
            seed_dim: self.seed_dim,
            limit_dim: self.limit_dim,
            termination: self.termination,
            ml_config: self.ml_config(),
            evaluate_prerr: self.evaluate_prerr,
        }
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig { ml_config: self.ml_config(), ..BootstrapConfig::new(self.bootstrap, self.folds) }
    }

    pub fn streams(&self) -> RngStreams {
        RngStreams::new(self.rng_seed)
    }
}

/// Outcomes and counts on the `D_lim`-dimensional Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub pom: POMSet,
    pub counts: CountData,
}

impl Dataset {
    /// Restricts outcomes living in a larger space to the first `limit_dim`
    /// Fock states.
    pub fn truncated(self, limit_dim: usize) -> Result<Dataset> {
        match self.pom.dim() {
            d if d == limit_dim => Ok(self),
            d if d > limit_dim => {
                let mask = SubspaceMask::new(d, (0..limit_dim).collect())?;
                Ok(Dataset { pom: self.pom.restrict(&mask)?, counts: self.counts })
            }
            d => Err(Error::DimensionMismatch { expected: limit_dim, found: d }),
        }
    }
}

/// Simulated data for `config.true_state`, truncated to `limit_dim`.
pub fn simulate(config: &ExperimentConfig) -> Result<Dataset> {
    let dim = config.simulation_dim.unwrap_or(config.limit_dim);
    let streams = config.streams();
    let truth = config.true_state.build(dim)?;
    let pom = generate_pom(config.outcomes, dim, &mut streams.stream(StreamPurpose::Pom, 0))?;
    let counts = if config.noiseless {
        expected_counts(&truth, &pom, config.events)?
    } else {
        sample_counts(&truth, &pom, config.events, &mut streams.stream(StreamPurpose::Counts, 0))?
    };
    Dataset { pom, counts }.truncated(config.limit_dim)
}

/// The configured data file, or a fresh simulation.
pub fn load_or_simulate(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.data {
        Some(path) => {
            let (pom, counts) = io::ingest_counts(path)?;
            Dataset { pom, counts }.truncated(config.limit_dim)
        }
        None => simulate(config),
    }
}

/// Unitary whose columns are the target's eigenbasis, when a target is set.
pub fn working_basis(config: &ExperimentConfig) -> Result<Option<ComplexMatrix>> {
    config.target_state.as_ref().map(|t| Ok(eigenbasis_unitary(&t.build(config.limit_dim)?))).transpose()
}

/// Outcomes expressed in the working basis (`Π → U†ΠU`).
pub fn to_working_basis(pom: &POMSet, basis: Option<&ComplexMatrix>) -> Result<POMSet> {
    match basis {
        Some(u) => pom.transform(u),
        None => Ok(pom.clone()),
    }
}

/// The fold split used for every step of a run.
pub fn fold_split(config: &ExperimentConfig, outcomes: usize) -> Result<FoldSplit> {
    split_folds(outcomes, config.folds, &mut config.streams().stream(StreamPurpose::Folds, 0))
}

/// Nucleation with cross-validated PrErr at each step.
pub fn nucleate_with_prerr(
    config: &ExperimentConfig,
    pom: &POMSet,
    counts: &CountData,
) -> Result<NucleationTrace, NucleationFailure> {
    let split = match fold_split(config, pom.len()) {
        Ok(s) => s,
        Err(source) => return Err(NucleationFailure { trace: NucleationTrace::default(), source }),
    };
    let ml = config.ml_config();
    nucleate(pom, counts, &config.nucleation_config(), |mask, _| cross_validate(pom, counts, mask, &split, &ml))
}

/// Bootstrap statistics for every step with a finite PrErr. Replicates are
/// drawn from the minimum-PrErr estimator (or from the observed frequencies
/// for the non-parametric variant).
pub fn attach_bootstrap(
    config: &ExperimentConfig,
    pom: &POMSet,
    counts: &CountData,
    trace: &mut NucleationTrace,
) -> Result<()> {
    let Some(best) = trace.min_prerr_step() else {
        return Ok(());
    };
    let model = best.ml_result.estimator.embed(&best.mask)?;
    let source = if config.nonparametric_bootstrap {
        BootstrapSource::NonParametric(counts)
    } else {
        BootstrapSource::Parametric(&model)
    };
    let streams = config.streams();
    let bootstrap = config.bootstrap_config();
    for step in &mut trace.steps {
        let Some(point) = step.prerr.filter(|p| p.is_finite()) else {
            continue;
        };
        let sample = bootstrap_prerr(source, &step.mask, pom, counts.total(), &bootstrap, &streams)?;
        step.prerr_stats = Some(boxplot_stats(&sample, point, config.alpha_significance)?);
    }
    Ok(())
}

/// PrErr of one mask on the given data, with bootstrap statistics drawn from
/// the mask's own ML estimator when `with_bootstrap` is set.
pub fn validate_mask(
    config: &ExperimentConfig,
    pom: &POMSet,
    counts: &CountData,
    mask: &SubspaceMask,
    with_bootstrap: bool,
) -> Result<(f64, Option<BootstrapStats>)> {
    let split = fold_split(config, pom.len())?;
    let prerr = cross_validate(pom, counts, mask, &split, &config.ml_config())?;
    if !with_bootstrap || !prerr.is_finite() {
        return Ok((prerr, None));
    }
    let fit = ml_estimate(&restrict_pom(pom, mask)?, counts, &config.ml_config())?;
    let model = fit.estimator.embed(mask)?;
    let source = if config.nonparametric_bootstrap {
        BootstrapSource::NonParametric(counts)
    } else {
        BootstrapSource::Parametric(&model)
    };
    let sample = bootstrap_prerr(source, mask, pom, counts.total(), &config.bootstrap_config(), &config.streams())?;
    Ok((prerr, Some(boxplot_stats(&sample, prerr, config.alpha_significance)?)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub config: PathBuf,
    pub data: PathBuf,
    pub trace_json: PathBuf,
    pub trace_csv: PathBuf,
    pub stats_json: PathBuf,
    pub plot_csv: PathBuf,
    pub estimators: Vec<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: NucleationTrace,
    pub artifacts: RunArtifacts,
}

pub fn estimator_file_name(step: usize, recon_dim: usize) -> String {
    format!("step_{step:02}_drec_{recon_dim:02}.txt")
}

/// Writes the trace, per-step estimators, statistics and plot table.
pub fn write_artifacts(
    config: &ExperimentConfig,
    data: &Dataset,
    trace: &NucleationTrace,
    dir: &Path,
) -> Result<RunArtifacts> {
    let record = TraceRecord::from(trace);
    let artifacts = RunArtifacts {
        config: dir.join("config.toml"),
        data: dir.join("data.txt"),
        trace_json: dir.join("trace.json"),
        trace_csv: dir.join("trace.csv"),
        stats_json: dir.join("stats.json"),
        plot_csv: dir.join("plot.csv"),
        estimators: trace
            .steps
            .iter()
            .map(|s| dir.join("estimators").join(estimator_file_name(s.step, s.recon_dim)))
            .collect(),
    };
    io::write_file(&artifacts.config, &config.to_toml_string())?;
    io::write_counts(&artifacts.data, &data.pom, &data.counts)?;
    io::write_file(&artifacts.trace_json, &io::format_trace_json(&record))?;
    io::write_file(&artifacts.trace_csv, &io::format_trace_csv(&record))?;
    io::write_file(&artifacts.stats_json, &io::format_stats_json(&io::stats_records(&record)))?;
    io::write_file(&artifacts.plot_csv, &io::format_plot_csv(&record))?;
    for (step, path) in trace.steps.iter().zip(&artifacts.estimators) {
        io::write_estimator(path, &step.ml_result.estimator, &step.mask)?;
    }
    Ok(artifacts)
}

/// Nucleation, bootstrap and artifacts for data already on the
/// `D_lim`-dimensional Fock space. A failed nucleation still writes the
/// completed steps before the error is returned.
pub fn run_on_data(config: &ExperimentConfig, data: &Dataset, with_bootstrap: bool) -> Result<RunOutput> {
    config.validate()?;
    let basis = working_basis(config)?;
    let pom = to_working_basis(&data.pom, basis.as_ref())?;
    let mut trace = match nucleate_with_prerr(config, &pom, &data.counts) {
        Ok(t) => t,
        Err(failure) => {
            if !failure.trace.is_empty() {
                write_artifacts(config, data, &failure.trace, &config.output_dir)?;
            }
            return Err(failure.source);
        }
    };
    if with_bootstrap {
        attach_bootstrap(config, &pom, &data.counts, &mut trace)?;
    }
    let artifacts = write_artifacts(config, data, &trace, &config.output_dir)?;
    Ok(RunOutput { trace, artifacts })
}

pub fn run_experiment(config: &ExperimentConfig, with_bootstrap: bool) -> Result<RunOutput> {
    config.validate()?;
    let data = load_or_simulate(config)?;
    run_on_data(config, &data, with_bootstrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            limit_dim: 6,
            outcomes: 60,
            events: 20_000,
            bootstrap: 20,
            termination: TerminationPolicy::FixedSteps(3),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_follow_the_reference_settings() {
        let c = ExperimentConfig::default();
        assert_eq!((c.limit_dim, c.seed_dim, c.outcomes, c.events), (16, 2, 1000, 10_000_000));
        assert_eq!((c.folds, c.bootstrap, c.alpha_significance), (2, 500, 0.05));
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
            limit_dim = 12
            events = 1000000
            rng_seed = 9
            true_state = { kind = "even-coherent", alpha = 2.23606797749979 }
            target_state = { kind = "fock", n = 3 }
            termination = { kind = "prerr-relative-change", value = 0.05 }
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.limit_dim, 12);
        assert_eq!(c.outcomes, 1000);
        assert_eq!(c.termination, TerminationPolicy::PrErrRelativeChange(0.05));
        assert_eq!(c.target_state, Some(StateSpec::Fock { n: 3 }));
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("folds = 3").is_err()); // 3 does not divide 1000
        assert!(ExperimentConfig::from_toml_str("seed_dim = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("limit_dim = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("wat = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("simulation_dim = 8").is_err());
        assert!(ExperimentConfig::from_toml_str("alpha_significance = 1.0").is_err());
    }

    #[test]
    fn quick_profile() {
        let mut c = ExperimentConfig::default();
        c.apply_quick();
        assert_eq!((c.events, c.outcomes, c.limit_dim, c.bootstrap), (100_000, 200, 8, 100));
        c.validate().unwrap();
    }

    #[test]
    fn simulation_in_a_larger_space_is_truncated() {
        let c = ExperimentConfig { simulation_dim: Some(9), ..small() };
        let data = simulate(&c).unwrap();
        assert_eq!(data.pom.dim(), 6);
        assert_eq!(data.counts.total(), 20_000);
    }

    #[test]
    fn run_writes_consistent_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig { output_dir: dir.path().to_path_buf(), ..small() };
        let out = run_experiment(&c, true).unwrap();
        assert_eq!(out.trace.dims(), vec![2, 4, 6]);
        assert_eq!(out.artifacts.estimators.len(), 3);
        assert!(out.trace.steps.iter().all(|s| s.prerr_stats.is_some()));
        let plot = std::fs::read_to_string(&out.artifacts.plot_csv).unwrap();
        assert_eq!(plot.lines().count(), 4);
        let (pom, counts) = io::ingest_counts(&out.artifacts.data).unwrap();
        assert_eq!(counts.total(), 20_000);
        assert_eq!(pom.len(), 60);
        let rec = io::read_trace_json(&out.artifacts.trace_json).unwrap();
        assert_eq!(rec, TraceRecord::from(&out.trace));
        let (rho, mask) = io::read_estimator(&out.artifacts.estimators[1]).unwrap();
        assert_eq!(mask, out.trace.steps[1].mask);
        assert_eq!(rho, out.trace.steps[1].ml_result.estimator);
    }
}

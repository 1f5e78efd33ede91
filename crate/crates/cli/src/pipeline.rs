//! Stage execution for one scenario: model trajectory, kernel fields,
//! checks, and the backward-limit experiment, each persisted under the
//! resolved output directory.
//!
//! Layout of an output directory after `run`:
//!
//! ```text
//!   trajectory/            profile snapshots + manifest
//!   kernels/<name>/        kernel.csv + kernel.json per field
//!   reports/check_*.json   one report per check (and per limit summary)
//!   reports/entropy_*.csv  entropy traces (plot-ready)
//!   reports/samples_*.csv  envelope samples (plot-ready)
//!   reports/limit_report.json
//! ```
//!
//! Independent checks are dispatched in parallel; artifact writes happen
//! afterwards in scenario order, so outputs are deterministic.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use heatlab_core::bounds::{self, BoundsError};
use heatlab_core::entropy::{self, EntropyError, EntropyTrace, W_MONOTONE_TOL};
use heatlab_core::flow::{
    exact_sphere_trajectory, exact_torus_trajectory, integrate, make_perturbed_sphere, FlowError,
    FlowTrajectory, StepControl,
};
use heatlab_core::geometry::ProfileKind;
use heatlab_core::io::{self, IoError};
use heatlab_core::kernel::{self, KernelDirection, KernelError, KernelField, KernelOptions};
use heatlab_core::report::CheckReport;
use heatlab_core::soliton::{self, LimitReport, SolitonError, Verdict};

use crate::scenario::{CheckKind, KernelMethod, KernelSpec, ModelSpec, Scenario};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("flow stage: {0}")]
    Flow(#[from] FlowError),
    #[error("kernel stage: {0}")]
    Kernel(#[from] KernelError),
    #[error("check stage: {0}")]
    Bounds(#[from] BoundsError),
    #[error("check stage: {0}")]
    Entropy(#[from] EntropyError),
    #[error("limit stage: {0}")]
    Soliton(#[from] SolitonError),
    #[error("artifact: {0}")]
    Io(#[from] IoError),
    #[error("scenario requests {what}, but it defines no {what} section")]
    MissingSection { what: &'static str },
    #[error("{0}")]
    Unsupported(String),
}

/// One executed check, ready for summary printing and exit-code logic.
#[derive(Debug)]
pub struct CheckOutcome {
    pub report: CheckReport,
    pub control: bool,
    pub path: PathBuf,
}

impl CheckOutcome {
    /// True when this outcome should fail the run.
    pub fn blocking_failure(&self) -> bool {
        !self.control && !self.report.pass
    }
}

pub struct Pipeline {
    pub scenario: Scenario,
    pub out: PathBuf,
    pub seed: u64,
}

enum CheckAux {
    None,
    Entropy(EntropyTrace),
    Samples { header: &'static str, rows: Vec<Vec<f64>> },
}

impl Pipeline {
    pub fn new(scenario: Scenario, out: Option<PathBuf>, seed: Option<u64>) -> Pipeline {
        let out = out.unwrap_or_else(|| PathBuf::from(&scenario.out_dir));
        let seed = seed.unwrap_or(scenario.seed);
        Pipeline {
            scenario,
            out,
            seed,
        }
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out.join("reports")
    }

    pub fn build_trajectory(&self) -> Result<FlowTrajectory, PipelineError> {
        let times = &self.scenario.snapshot_times;
        let tr = match &self.scenario.model {
            ModelSpec::ExactSphere { n, grid_m, t0 } => {
                exact_sphere_trajectory(*n, *t0, times, *grid_m)?
            }
            ModelSpec::FlatTorus { sides, grid_m } => {
                exact_torus_trajectory(sides, times, *grid_m)?
            }
            ModelSpec::WarpedSphere {
                n,
                grid_m,
                r0,
                perturbation,
            } => {
                let start = make_perturbed_sphere(*n, *r0, *grid_m, *perturbation, times[0])?;
                integrate(
                    &start,
                    times[0],
                    *times.last().unwrap(),
                    &StepControl::default(),
                )?
            }
        };
        Ok(tr)
    }

    pub fn write_trajectory(&self, tr: &FlowTrajectory) -> Result<PathBuf, PipelineError> {
        let dir = self.out.join("trajectory");
        io::write_trajectory_dir(&dir, tr)?;
        Ok(dir)
    }

    fn build_kernel(
        &self,
        tr: &FlowTrajectory,
        spec: &KernelSpec,
    ) -> Result<KernelField, PipelineError> {
        let method = match spec.method {
            KernelMethod::Auto => match tr.kind() {
                ProfileKind::FlatTorus => KernelMethod::ClosedForm,
                ProfileKind::WarpedSphere if tr.exact => KernelMethod::Spectral,
                ProfileKind::WarpedSphere => KernelMethod::FiniteDifference,
            },
            m => m,
        };
        let kf = match (method, spec.direction) {
            (KernelMethod::ClosedForm, dir) => {
                if tr.kind() != ProfileKind::FlatTorus {
                    return Err(PipelineError::Unsupported(format!(
                        "kernel {:?}: closed form is the flat-torus method",
                        spec.name
                    )));
                }
                kernel::exact_torus_kernel_field(tr, spec.source_time, &spec.times, dir)?
            }
            (KernelMethod::Spectral, KernelDirection::Conjugate) => {
                kernel::spectral_conjugate_field(tr, spec.x0, spec.source_time, &spec.times)?
            }
            (KernelMethod::Spectral, KernelDirection::Forward) => {
                kernel::spectral_kernel_field(tr, spec.x0, spec.source_time, &spec.times)?
            }
            (KernelMethod::FiniteDifference, dir) => {
                let opts = KernelOptions {
                    seed_eps: spec.seed_eps,
                    ..KernelOptions::default()
                };
                match dir {
                    KernelDirection::Conjugate => kernel::solve_conjugate_kernel(
                        tr,
                        spec.x0,
                        spec.source_time,
                        &spec.times,
                        &opts,
                    )?,
                    KernelDirection::Forward => kernel::solve_forward_kernel(
                        tr,
                        spec.x0,
                        spec.source_time,
                        &spec.times,
                        &opts,
                    )?,
                }
            }
            (KernelMethod::Auto, _) => unreachable!("auto resolved above"),
        };
        Ok(kf)
    }

    /// Builds every kernel field and writes one directory per field.
    pub fn stage_kernels(
        &self,
        tr: &FlowTrajectory,
    ) -> Result<BTreeMap<String, (KernelField, PathBuf)>, PipelineError> {
        let built: Vec<Result<KernelField, PipelineError>> = self
            .scenario
            .kernels
            .par_iter()
            .map(|spec| self.build_kernel(tr, spec))
            .collect();
        let mut fields = BTreeMap::new();
        for (spec, result) in self.scenario.kernels.iter().zip(built) {
            let kf = result?;
            let dir = self.out.join("kernels").join(&spec.name);
            io::write_kernel_dir(&dir, &kf)?;
            fields.insert(spec.name.clone(), (kf, dir));
        }
        Ok(fields)
    }

    fn field<'a>(
        &self,
        kernels: &'a BTreeMap<String, (KernelField, PathBuf)>,
        name: &str,
    ) -> Result<&'a KernelField, PipelineError> {
        kernels
            .get(name)
            .map(|(kf, _)| kf)
            .ok_or_else(|| PipelineError::Unsupported(format!("unknown kernel {name:?}")))
    }

    fn execute_check(
        &self,
        tr: &FlowTrajectory,
        kernels: &BTreeMap<String, (KernelField, PathBuf)>,
        kind: &CheckKind,
    ) -> Result<(CheckReport, CheckAux), PipelineError> {
        let out = match kind {
            CheckKind::MassConservation { kernel, tol } => {
                let kf = self.field(kernels, kernel)?;
                let mut rep = CheckReport::new("mass_conservation");
                let mut worst = 0.0f64;
                for k in 0..kf.num_times() {
                    let m = kf.backward_mass(k);
                    rep.observe(m);
                    worst = worst.max((m - 1.0).abs());
                }
                rep.set_constant("tol", *tol);
                rep.margin = tol - worst;
                rep.pass = rep.margin >= 0.0;
                (rep, CheckAux::None)
            }
            CheckKind::MassBracket { kernel } => {
                let kf = self.field(kernels, kernel)?;
                (bounds::mass_bracket_check(kf, tr)?, CheckAux::None)
            }
            CheckKind::OnDiagUpper { kernel, cap } => {
                let kf = self.field(kernels, kernel)?;
                (bounds::on_diag_upper_check(kf, *cap)?, CheckAux::None)
            }
            CheckKind::OnDiagLower { kernel, floor } => {
                let kf = self.field(kernels, kernel)?;
                (bounds::on_diag_lower_check(kf, tr, *floor)?, CheckAux::None)
            }
            CheckKind::GaussianEnvelope { kernel, q_window } => {
                let kf = self.field(kernels, kernel)?;
                let probes = bounds::default_envelope_probes(kf);
                let rep =
                    bounds::gaussian_envelope_check(kf, tr, &probes, q_window.0, q_window.1)?;
                let mut rows = Vec::new();
                for k in 0..kf.num_times() {
                    for s in bounds::gaussian_envelope_samples(kf, tr, k)? {
                        rows.push(vec![s.time_index as f64, s.d, s.tau, s.value, s.q]);
                    }
                }
                (
                    rep,
                    CheckAux::Samples {
                        header: "time_index,d,tau,value,q",
                        rows,
                    },
                )
            }
            CheckKind::MeanValue {
                kernel,
                x,
                t_center,
                radius,
                cap,
            } => {
                let kf = self.field(kernels, kernel)?;
                (
                    bounds::mean_value_check(kf, tr, *x, *t_center, *radius, *cap)?,
                    CheckAux::None,
                )
            }
            CheckKind::EntropyMonotone { kernel, s_grid } => {
                let kf = self.field(kernels, kernel)?;
                let trace = entropy::w_monotonicity(tr, kf, s_grid)?;
                let mut rep = CheckReport::new("entropy_monotone");
                for w in &trace.w_values {
                    rep.observe(*w);
                }
                let worst_rise = trace
                    .w_values
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mismatch = trace.derivative_mismatch();
                rep.set_constant("w_first", trace.w_values[0]);
                rep.set_constant("w_last", *trace.w_values.last().unwrap());
                rep.set_constant("derivative_mismatch", mismatch);
                rep.margin = W_MONOTONE_TOL - worst_rise.max(0.0);
                rep.pass = trace.monotone_within(W_MONOTONE_TOL) && mismatch <= 1.0;
                if mismatch > 1.0 {
                    rep.note("numeric dW/ds disagrees with the residual integral");
                }
                (rep, CheckAux::Entropy(trace))
            }
            CheckKind::Lambda0 {
                time,
                expected,
                tol,
            } => {
                let p = tr.metric_at(*time)?;
                let value = entropy::lambda0(&p)?;
                let mut rep = CheckReport::new("lambda0");
                rep.observe(value);
                rep.set_constant("lambda0", value);
                rep.set_constant("expected", *expected);
                rep.set_constant("tol", *tol);
                rep.margin = tol - (value - expected).abs();
                rep.pass = rep.margin >= 0.0;
                (rep, CheckAux::None)
            }
            CheckKind::LogSobolev {
                time,
                eps_grid,
                random_trials,
                cap,
            } => {
                let p = tr.metric_at(*time)?;
                let trials = entropy::trial_corpus(&p, *random_trials, self.seed)?;
                (
                    entropy::log_sobolev_check(&p, time.max(0.0), eps_grid, &trials, *cap)?,
                    CheckAux::None,
                )
            }
            CheckKind::Sobolev {
                time,
                random_trials,
                cap,
            } => {
                let p = tr.metric_at(*time)?;
                let trials = entropy::trial_corpus(&p, *random_trials, self.seed)?;
                (entropy::sobolev_check(&p, &trials, *cap)?, CheckAux::None)
            }
        };
        Ok(out)
    }

    /// Runs every check and writes its report (plus plot-ready side files).
    pub fn stage_checks(
        &self,
        tr: &FlowTrajectory,
        kernels: &BTreeMap<String, (KernelField, PathBuf)>,
    ) -> Result<Vec<CheckOutcome>, PipelineError> {
        let reports = self.reports_dir();
        std::fs::create_dir_all(&reports).map_err(IoError::from)?;
        let executed: Vec<Result<(CheckReport, CheckAux), PipelineError>> = self
            .scenario
            .checks
            .par_iter()
            .map(|spec| self.execute_check(tr, kernels, &spec.kind))
            .collect();
        let mut outcomes = Vec::with_capacity(executed.len());
        for (i, (spec, result)) in self.scenario.checks.iter().zip(executed).enumerate() {
            let (mut report, aux) = result?;
            if spec.control {
                report.note("control check: informational only");
            }
            let stem = format!("{i:02}_{}", spec.kind.label());
            match aux {
                CheckAux::None => {}
                CheckAux::Entropy(trace) => {
                    io::write_entropy_csv(&reports.join(format!("entropy_{stem}.csv")), &trace)?;
                }
                CheckAux::Samples { header, rows } => {
                    io::write_samples_csv(
                        &reports.join(format!("samples_{stem}.csv")),
                        header,
                        &rows,
                    )?;
                }
            }
            let path = reports.join(format!("check_{stem}.json"));
            io::write_check_report_json(&path, &report)?;
            outcomes.push(CheckOutcome {
                report,
                control: spec.control,
                path,
            });
        }
        Ok(outcomes)
    }

    /// Runs the backward-limit experiment; returns the raw report and a
    /// summary check outcome.
    pub fn stage_limit(
        &self,
        tr: &FlowTrajectory,
    ) -> Result<(LimitReport, CheckOutcome), PipelineError> {
        let spec = self
            .scenario
            .limit
            .as_ref()
            .ok_or(PipelineError::MissingSection { what: "limit" })?;
        let lim = soliton::backward_limit_experiment(tr, &spec.tau_list, spec.s_ref)?;
        let reports = self.reports_dir();
        std::fs::create_dir_all(&reports).map_err(IoError::from)?;
        io::write_limit_report_json(&reports.join("limit_report.json"), &lim)?;

        let mut rep = CheckReport::new("backward_limit");
        for r in &lim.residual_seq {
            rep.observe(*r);
        }
        rep.set_constant("nonflat", if lim.nonflat { 1.0 } else { 0.0 });
        rep.margin = if lim.verdict == Verdict::Pass { 0.0 } else { -1.0 };
        if let (Some(&first), Some(&last)) = (lim.residual_seq.first(), lim.residual_seq.last()) {
            if first > 0.0 {
                let ratio = last / first;
                rep.set_constant("residual_final_over_initial", ratio);
                rep.margin = 0.1 - ratio;
            }
        }
        if let Some(pair) = lim.w_seq.last() {
            rep.set_constant("w_final", pair[0]);
            rep.set_constant("w_gap_final", pair[0] - pair[1]);
        }
        if let Some(&fv) = lim.f_variance_seq.last() {
            rep.set_constant("f_variance_final", fv);
        }
        rep.pass = lim.verdict == Verdict::Pass;
        for note in &lim.notes {
            rep.note(note);
        }
        if spec.control {
            rep.note("control check: informational only");
        }
        let path = reports.join(format!("check_{:02}_backward_limit.json", self.scenario.checks.len()));
        io::write_check_report_json(&path, &rep)?;
        Ok((
            lim,
            CheckOutcome {
                report: rep,
                control: spec.control,
                path,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CheckSpec, LimitSpec};
    use std::path::Path;

    fn torus_scenario(out: &Path) -> Scenario {
        Scenario {
            schema: crate::scenario::SCHEMA.into(),
            name: "torus-mini".into(),
            model: ModelSpec::FlatTorus {
                sides: vec![40.0, 40.0],
                grid_m: 128,
            },
            snapshot_times: vec![-4.0, 1.0],
            kernels: vec![KernelSpec {
                name: "main".into(),
                direction: KernelDirection::Conjugate,
                x0: 0.0,
                source_time: 0.0,
                times: vec![-0.25, -0.5, -0.75, -1.0],
                seed_eps: None,
                method: KernelMethod::Auto,
            }],
            checks: vec![
                CheckSpec {
                    kind: CheckKind::MassConservation {
                        kernel: "main".into(),
                        tol: 1e-6,
                    },
                    control: false,
                },
                CheckSpec {
                    kind: CheckKind::Lambda0 {
                        time: 0.0,
                        expected: 0.0,
                        tol: 1e-9,
                    },
                    control: false,
                },
            ],
            limit: Some(LimitSpec {
                tau_list: vec![0.5, 1.0, 2.0],
                s_ref: 1.0,
                control: true,
            }),
            seed: 7,
            out_dir: out.display().to_string(),
        }
    }

    #[test]
    fn torus_pipeline_produces_reports_and_informational_limit() {
        let dir = tempfile::tempdir().unwrap();
        let pipe = Pipeline::new(torus_scenario(dir.path()), None, None);
        let tr = pipe.build_trajectory().unwrap();
        pipe.write_trajectory(&tr).unwrap();
        let kernels = pipe.stage_kernels(&tr).unwrap();
        assert!(kernels.contains_key("main"));
        assert!(dir.path().join("kernels/main/kernel.json").is_file());

        let outcomes = pipe.stage_checks(&tr, &kernels).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert!(
            outcomes.iter().all(|o| o.report.pass),
            "torus audits must pass: {:?}",
            outcomes
                .iter()
                .map(|o| (&o.report.name, o.report.pass))
                .collect::<Vec<_>>()
        );
        assert!(outcomes.iter().all(|o| o.path.is_file()));

        let (lim, outcome) = pipe.stage_limit(&tr).unwrap();
        assert_eq!(lim.verdict, Verdict::Fail);
        assert!(!lim.nonflat, "flat control must not certify non-flatness");
        assert!(outcome.control);
        assert!(
            !outcome.blocking_failure(),
            "control limit must stay informational"
        );
        assert!(dir.path().join("reports/limit_report.json").is_file());
    }

    #[test]
    fn out_dir_and_seed_overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let sc = torus_scenario(Path::new("ignored"));
        let pipe = Pipeline::new(sc, Some(dir.path().join("alt")), Some(99));
        assert_eq!(pipe.out, dir.path().join("alt"));
        assert_eq!(pipe.seed, 99);
    }

    #[test]
    fn unknown_kernel_reference_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = torus_scenario(dir.path());
        sc.checks[0].kind = CheckKind::MassConservation {
            kernel: "ghost".into(),
            tol: 1e-6,
        };
        let pipe = Pipeline::new(sc, None, None);
        let tr = pipe.build_trajectory().unwrap();
        let kernels = pipe.stage_kernels(&tr).unwrap();
        let err = pipe.stage_checks(&tr, &kernels).unwrap_err();
        assert!(matches!(err, PipelineError::Unsupported(_)), "{err}");
    }
}

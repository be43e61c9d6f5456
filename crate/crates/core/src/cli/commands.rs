use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::composite::{
    evolve, gaussian_envelope, offdiagonal_suppression, prepare_product_state, CompositeState,
};
use crate::decoherence::{decoherence_verdicts, generator_basis};
use crate::ensemble::{
    born_statistics_from_counts, run_pipeline_with, BornReader, EnsembleReport, EventReader,
    OutcomeRow,
};
use crate::eventreading::{equivalence_test, EquivalenceResult, GaugeEvent};
use crate::exec::Execution;
use crate::sectors::{build_grid, AmplitudeProfile};
use crate::statespace::{MeterBasis, MeterState};

use super::{Check, CliError, Scenario};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunOptions {
    fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.out {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn evaluate_check(check: &Check, report: &EnsembleReport) -> CheckResult {
    match check {
        Check::Born { targets, tolerance } => {
            let counts: Vec<u64> = report.counts.values().copied().collect();
            let worst = targets
                .iter()
                .enumerate()
                .map(|(n, t)| (report.frequencies[&n] - t).abs())
                .fold(0.0, f64::max);
            let (passed, detail) = match born_statistics_from_counts(&counts, targets) {
                Ok(stats) => (
                    stats.pass && worst <= *tolerance,
                    format!(
                        "max |frequency − target| = {worst:.6} (tolerance {tolerance}), chi_square = {:.4} (critical {:.4})",
                        stats.chi_square, stats.critical
                    ),
                ),
                Err(e) => (false, e.to_string()),
            };
            CheckResult {
                name: "born".into(),
                passed,
                detail,
            }
        }
        Check::NoRefusals => CheckResult {
            name: "no_refusals".into(),
            passed: report.refused == 0,
            detail: format!("{} of {} readings refused", report.refused, report.n_copies),
        },
        Check::Decohered => CheckResult {
            name: "decohered".into(),
            passed: report.decoherence_verdicts.copies_not_decohered == 0,
            detail: format!(
                "{} of {} copies failed the decoherence verdict",
                report.decoherence_verdicts.copies_not_decohered, report.n_copies
            ),
        },
        Check::Stage { expected } => CheckResult {
            name: "stage".into(),
            passed: report.stage == *expected,
            detail: format!("expected {expected:?}, got {:?}", report.stage),
        },
    }
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    scenario: &'a Scenario,
    report: &'a EnsembleReport,
    checks: &'a [CheckResult],
}

pub fn histogram_csv(report: &EnsembleReport) -> String {
    let mut out = String::from("meter_index,count,frequency,born_target\n");
    for (n, count) in &report.counts {
        writeln!(
            out,
            "{n},{count},{},{}",
            report.frequencies[n], report.born_targets[n]
        )
        .unwrap();
    }
    out
}

pub fn outcomes_csv(rows: &[OutcomeRow]) -> String {
    let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from("copy_id,iv,delta_xi,equivalence_passed,collapsed_index\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.copy_id,
            opt(r.iv),
            r.delta_xi,
            r.equivalence_passed,
            opt(r.collapsed_index)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub scenario: Scenario,
    pub report: EnsembleReport,
    pub checks: Vec<CheckResult>,
    pub written: Vec<PathBuf>,
}

pub fn cmd_simulate(scenario_path: &Path, opts: &RunOptions) -> Result<SimulationOutput, CliError> {
    simulate_with(scenario_path, opts, Execution::default(), &BornReader)
}

/// [`cmd_simulate`] with an explicit execution mode and reading step.
pub fn simulate_with<R: EventReader>(
    scenario_path: &Path,
    opts: &RunOptions,
    exec: Execution,
    reader: &R,
) -> Result<SimulationOutput, CliError> {
    let mut scenario = Scenario::load(scenario_path)?;
    if let Some(seed) = opts.seed {
        scenario.base_seed = seed;
    }
    let spec = scenario.ensemble_spec()?;
    let run = run_pipeline_with(&spec, exec, reader)?;
    let mut report = run.report;
    if let Some(c) = scenario.c_light {
        report
            .warnings
            .extend(scenario.compartments.relativity_warnings(c));
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }

    let checks: Vec<CheckResult> = scenario
        .checks
        .iter()
        .map(|c| evaluate_check(c, &report))
        .collect();

    let doc = ReportDocument {
        scenario: &scenario,
        report: &report,
        checks: &checks,
    };
    let mut json = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Io(format!("report serialization: {e}")))?;
    json.push('\n');

    let mut files = vec![
        (opts.resolve(&scenario.output.report), json),
        (
            opts.resolve(&scenario.output.histogram),
            histogram_csv(&report),
        ),
    ];
    if let Some(p) = &scenario.output.outcomes {
        files.push((opts.resolve(p), outcomes_csv(&run.outcomes)));
    }
    if let Some(p) = &scenario.output.snapshot {
        files.push((opts.resolve(p), run.decohered_state.to_snapshot_text()));
    }
    for (path, text) in &files {
        write_atomic(path, text.as_bytes())?;
    }

    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::CheckFailed(failed));
    }
    Ok(SimulationOutput {
        scenario,
        report,
        checks,
        written: files.into_iter().map(|(p, _)| p).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceRow {
    pub t: f64,
    /// `|offdiagonal_suppression|` per meter pair, in `pairs` order.
    pub offdiag: Vec<f64>,
    /// Analytic Gaussian envelope per pair, for Gaussian profiles.
    pub envelope: Option<Vec<f64>>,
    pub min_ratio: f64,
    pub decohered: bool,
}

#[derive(Debug, Clone)]
pub struct DecoherenceSweep {
    pub pairs: Vec<(usize, usize)>,
    pub rows: Vec<DecoherenceRow>,
    pub path: PathBuf,
}

impl DecoherenceSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (m, n) in &self.pairs {
            write!(out, ",offdiag_{m}_{n}").unwrap();
        }
        let has_envelope = self.rows.first().is_some_and(|r| r.envelope.is_some());
        if has_envelope {
            for (m, n) in &self.pairs {
                write!(out, ",envelope_{m}_{n}").unwrap();
            }
        }
        out.push_str(",min_ratio,decohered\n");
        for row in &self.rows {
            write!(out, "{}", row.t).unwrap();
            for v in &row.offdiag {
                write!(out, ",{v}").unwrap();
            }
            if let Some(env) = &row.envelope {
                for v in env {
                    write!(out, ",{v}").unwrap();
                }
            }
            writeln!(out, ",{},{}", row.min_ratio, row.decohered).unwrap();
        }
        out
    }
}

/// Tabulates `|ρ_mn|/|c_m c_n|`, the smallest verdict ratio and the
/// decoherence flag at `steps + 1` evenly spaced interaction times.
pub fn cmd_decohere(scenario_path: &Path, opts: &RunOptions) -> Result<DecoherenceSweep, CliError> {
    let scenario = Scenario::load(scenario_path)?;
    let psi0 = scenario.meter_state()?;
    let grid = Arc::new(build_grid(scenario.compartments, &scenario.profile)?);
    let prepared = prepare_product_state(&psi0, grid)?;
    let cfg = scenario.interaction;
    let dim = psi0.dim();
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|m| (m + 1..dim).map(move |n| (m, n)))
        .collect();
    let observables = generator_basis(dim);
    let sigma_v = match scenario.profile {
        AmplitudeProfile::Gaussian { sigma_v, .. } => Some(sigma_v),
        _ => None,
    };
    let eig = psi0.basis().eigenvalues().to_vec();
    let t_max = scenario.sweep_t_max();
    let steps = scenario.sweep.steps;

    let row_at = |i: usize| -> Result<DecoherenceRow, CliError> {
        let t = t_max * i as f64 / steps as f64;
        let state: CompositeState = evolve(&prepared, t, &cfg)?;
        let offdiag = pairs
            .iter()
            .map(|&(m, n)| offdiagonal_suppression(&state, m, n).map(|z| z.norm()))
            .collect::<crate::Result<Vec<_>>>()?;
        let envelope = sigma_v.map(|s| {
            pairs
                .iter()
                .map(|&(m, n)| gaussian_envelope(s, state.coupling_time(), eig[m] - eig[n]))
                .collect()
        });
        let verdicts = decoherence_verdicts(&state, &observables, scenario.r_threshold)?;
        Ok(DecoherenceRow {
            t,
            offdiag,
            envelope,
            min_ratio: verdicts
                .iter()
                .map(|v| v.ratio)
                .fold(f64::INFINITY, f64::min),
            decohered: verdicts.iter().all(|v| v.decohered),
        })
    };
    let rows = Execution::default()
        .map(steps + 1, row_at)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let sweep = DecoherenceSweep {
        pairs,
        rows,
        path: opts.resolve(&scenario.output.sweep),
    };
    write_atomic(&sweep.path, sweep.to_csv().as_bytes())?;
    Ok(sweep)
}

#[derive(Debug, Clone)]
pub struct EquivalenceArgs {
    pub psi: String,
    pub e1: f64,
    pub e2: f64,
    pub eigenvalues: Option<String>,
    pub hbar: f64,
    pub tol: f64,
}

fn parse_list<T>(
    text: &str,
    what: &str,
    f: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            f(s.trim())
                .ok_or_else(|| CliError::Validation(format!("cannot parse {what} entry {s:?}")))
        })
        .collect()
}

fn parse_amplitude(s: &str) -> Option<Complex64> {
    match s.split_once(':') {
        Some((re, im)) => Some(Complex64::new(
            re.trim().parse().ok()?,
            im.trim().parse().ok()?,
        )),
        None => Some(Complex64::new(s.parse().ok()?, 0.0)),
    }
}

/// Rounds to 12 decimals and drops the sign of zero, for display.
fn tidy(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn cmd_equivalence(args: &EquivalenceArgs) -> Result<(EquivalenceResult, String), CliError> {
    let amps = parse_list(&args.psi, "amplitude", parse_amplitude)?;
    let eigenvalues = match &args.eigenvalues {
        Some(text) => parse_list(text, "eigenvalue", |s| s.parse::<f64>().ok())?,
        None => (0..amps.len()).map(|n| n as f64).collect(),
    };
    if !(args.hbar > 0.0) {
        return Err(CliError::Validation("hbar must be positive".into()));
    }
    let basis = Arc::new(MeterBasis::new(eigenvalues)?);
    let psi = MeterState::normalized(basis, amps)?;
    let result = equivalence_test(
        &psi,
        &GaugeEvent::from_increment(args.e1),
        &GaugeEvent::from_increment(args.e2),
        args.hbar,
        args.tol,
    )?;
    let line = format!(
        "equivalent: {}, discrepancy: ({}, {})",
        result.equivalent,
        tidy(result.discrepancy.re),
        tidy(result.discrepancy.im)
    );
    Ok((result, line))
}

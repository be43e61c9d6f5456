//! Ensembles of system copies run through the two-stage measurement:
//! non-selective measurement (decoherence) followed by event reading.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::composite::{
    evolve, prepare_product_state, reduce_to_meter, CompositeState, InteractionConfig,
};
use crate::decoherence::{
    decoherence_verdicts, generator_basis, DecoherenceVerdict, SuperselectedObservable,
};
use crate::error::{Error, Result};
use crate::eventreading::{read_event, ReadingOutcome};
use crate::exec::Execution;
use crate::sectors::{build_grid, AmplitudeProfile, CompartmentSpec};
use crate::statespace::MeterState;

/// Weights below this are treated as numerically zero when classifying.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Significance level of the Born-rule chi-square test.
pub const BORN_SIGNIFICANCE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub n_copies: usize,
    pub psi0: MeterState,
    pub grid_profile: AmplitudeProfile,
    pub compartments: CompartmentSpec,
    pub interaction: InteractionConfig,
    pub t_decohere: f64,
    pub mu: f64,
    pub r_threshold: f64,
    pub base_seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_copies == 0 {
            return Err(Error::Argument("n_copies must be at least 1".into()));
        }
        if !(self.t_decohere >= 0.0) || !self.t_decohere.is_finite() {
            return Err(Error::Argument("t_decohere must be finite and ≥ 0".into()));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::Argument("mu must be positive".into()));
        }
        if !(self.r_threshold > 1.0) {
            return Err(Error::Argument("ratio threshold R must exceed 1".into()));
        }
        self.psi0.require_normalized("psi0")?;
        self.compartments.validate()?;
        self.interaction.validate()
    }

    /// Seed for copy `i`.
    pub fn copy_seed(&self, i: usize) -> u64 {
        self.base_seed.wrapping_add(i as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    QuantumPure,
    ClassicalMixed,
    ClassicalPure,
}

fn stage_from_weights(all_decohered: bool, weights: &[f64]) -> Stage {
    if !all_decohered {
        return Stage::QuantumPure;
    }
    if weights.iter().any(|&w| w >= 1.0 - WEIGHT_FLOOR) {
        Stage::ClassicalPure
    } else {
        Stage::ClassicalMixed
    }
}

/// Classifies a sample of copies. Quantum pure if any verdict fails;
/// otherwise classical pure when the copies' mean meter weights put at least
/// `1 − WEIGHT_FLOOR` on one outcome, and classical mixed when several
/// outcomes carry weight.
pub fn classify_stage(
    states: &[CompositeState],
    observables: &[SuperselectedObservable],
    threshold: f64,
) -> Result<Stage> {
    let Some(first) = states.first() else {
        return Err(Error::Argument("cannot classify an empty sample".into()));
    };
    let mut mean = vec![0.0; first.meter_dim()];
    let mut all_decohered = true;
    for s in states {
        all_decohered &= decoherence_verdicts(s, observables, threshold)?
            .iter()
            .all(|v| v.decohered);
        for (acc, w) in mean.iter_mut().zip(reduce_to_meter(s).diagonal()) {
            *acc += w / states.len() as f64;
        }
    }
    Ok(stage_from_weights(all_decohered, &mean))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornStatistics {
    pub chi_square: f64,
    pub dof: usize,
    /// Upper critical value at [`BORN_SIGNIFICANCE`].
    pub critical: f64,
    pub p_value: f64,
    pub pass: bool,
    pub samples: u64,
}

/// Pearson chi-square of `counts` against probability `targets`.
///
/// Categories with zero target probability take no degrees of freedom; any
/// count landing in one makes the statistic infinite.
pub fn born_statistics_from_counts(counts: &[u64], targets: &[f64]) -> Result<BornStatistics> {
    if counts.len() != targets.len() {
        return Err(Error::Dimension {
            expected: targets.len(),
            found: counts.len(),
        });
    }
    if targets.iter().any(|&p| !(p >= 0.0)) || (targets.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Statistics(
            "targets must be a probability vector".into(),
        ));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Statistics("no collapsed outcomes to test".into()));
    }
    let n = total as f64;
    let mut chi_square = 0.0;
    let mut categories = 0usize;
    for (&c, &p) in counts.iter().zip(targets) {
        if p > 0.0 {
            categories += 1;
            let expected = n * p;
            let d = c as f64 - expected;
            chi_square += d * d / expected;
        } else if c > 0 {
            chi_square = f64::INFINITY;
        }
    }
    let dof = categories.saturating_sub(1);
    let (critical, p_value) = if dof == 0 {
        (0.0, if chi_square == 0.0 { 1.0 } else { 0.0 })
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Statistics(e.to_string()))?;
        (
            dist.inverse_cdf(1.0 - BORN_SIGNIFICANCE),
            dist.sf(chi_square),
        )
    };
    Ok(BornStatistics {
        chi_square,
        dof,
        critical,
        p_value,
        pass: chi_square <= critical,
        samples: total,
    })
}

/// Counts of collapsed indices, `dim` categories.
pub fn outcome_counts(outcomes: &[ReadingOutcome], dim: usize) -> Vec<u64> {
    let mut counts = vec![0u64; dim];
    for n in outcomes.iter().filter_map(|o| o.collapsed_index) {
        counts[n] += 1;
    }
    counts
}

pub fn born_statistics(outcomes: &[ReadingOutcome], targets: &[f64]) -> Result<BornStatistics> {
    if outcomes.iter().all(|o| o.refused()) {
        return Err(Error::Statistics("every reading was refused".into()));
    }
    let max_index = outcomes
        .iter()
        .filter_map(|o| o.collapsed_index)
        .max()
        .unwrap_or(0);
    if max_index >= targets.len() {
        return Err(Error::Dimension {
            expected: targets.len(),
            found: max_index + 1,
        });
    }
    born_statistics_from_counts(&outcome_counts(outcomes, targets.len()), targets)
}

/// The reading step of the pipeline. [`BornReader`] is the real one; tests
/// substitute others to exercise failure paths.
pub trait EventReader: Sync {
    fn read(
        &self,
        state: &CompositeState,
        observables: &[SuperselectedObservable],
        mu: f64,
        threshold: f64,
        hbar: f64,
        seed: u64,
    ) -> Result<ReadingOutcome>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BornReader;

impl EventReader for BornReader {
    fn read(
        &self,
        state: &CompositeState,
        observables: &[SuperselectedObservable],
        mu: f64,
        threshold: f64,
        hbar: f64,
        seed: u64,
    ) -> Result<ReadingOutcome> {
        read_event(state, observables, mu, threshold, hbar, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageTrace {
    pub prepared: Stage,
    pub after_nonselective: Stage,
    pub after_reading: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictSummary {
    pub copies_decohered: usize,
    pub copies_not_decohered: usize,
    /// Smallest variance/interference ratio seen; `null` in JSON when every
    /// interference vanished.
    pub min_ratio: f64,
    pub max_interference: f64,
    /// Per-observable verdicts of copy 0.
    pub first_copy: Vec<DecoherenceVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub stage: Stage,
    pub stage_trace: StageTrace,
    pub n_copies: usize,
    pub counts: BTreeMap<usize, u64>,
    pub frequencies: BTreeMap<usize, f64>,
    pub born_targets: BTreeMap<usize, f64>,
    pub chi_square: Option<f64>,
    pub born_test: Option<BornStatistics>,
    pub decoherence_verdicts: VerdictSummary,
    pub refused: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub copy_id: usize,
    pub iv: Option<usize>,
    pub delta_xi: f64,
    pub equivalence_passed: bool,
    pub collapsed_index: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: EnsembleReport,
    pub outcomes: Vec<OutcomeRow>,
    /// Copy 0 just before reading.
    pub decohered_state: CompositeState,
}

struct CopyResult {
    decohered: bool,
    min_ratio: f64,
    max_interference: f64,
    outcome: ReadingOutcome,
}

pub fn run_pipeline(spec: &EnsembleSpec) -> Result<PipelineRun> {
    run_pipeline_with(spec, Execution::default(), &BornReader)
}

/// Runs every copy through preparation, non-selective measurement for
/// `t_decohere`, the decoherence verdicts over the meter generator basis, and
/// one event reading with seed `base_seed + i`.
pub fn run_pipeline_with<R: EventReader>(
    spec: &EnsembleSpec,
    exec: Execution,
    reader: &R,
) -> Result<PipelineRun> {
    spec.validate()?;
    let grid = Arc::new(build_grid(spec.compartments, &spec.grid_profile)?);
    let dim = spec.psi0.dim();
    let observables = generator_basis(dim);
    let cfg = spec.interaction;
    let threshold = spec.r_threshold;

    let mut warnings = Vec::new();
    if let Some(mass) = grid.captured_mass() {
        if mass < 0.99 {
            warnings.push(format!(
                "grid captures only {:.4} of the profile's mass before renormalization",
                mass
            ));
        }
    }

    let decohere = |psi: &MeterState| -> Result<(CompositeState, CompositeState)> {
        let prepared = prepare_product_state(psi, Arc::clone(&grid))?;
        let evolved = evolve(&prepared, spec.t_decohere, &cfg)?;
        Ok((prepared, evolved))
    };

    let results: Vec<Result<CopyResult>> = exec.map(spec.n_copies, |i| {
        let (_, state) = decohere(&spec.psi0)?;
        let verdicts = decoherence_verdicts(&state, &observables, threshold)?;
        let outcome = reader.read(
            &state,
            &observables,
            spec.mu,
            threshold,
            cfg.hbar,
            spec.copy_seed(i),
        )?;
        Ok(CopyResult {
            decohered: verdicts.iter().all(|v| v.decohered),
            min_ratio: verdicts
                .iter()
                .map(|v| v.ratio)
                .fold(f64::INFINITY, f64::min),
            max_interference: verdicts.iter().map(|v| v.interference).fold(0.0, f64::max),
            outcome,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let (prepared, decohered_state) = decohere(&spec.psi0)?;
    let first_copy = decoherence_verdicts(&decohered_state, &observables, threshold)?;
    let targets = spec.psi0.probabilities();

    let outcomes: Vec<ReadingOutcome> = results.iter().map(|r| r.outcome.clone()).collect();
    let counts = outcome_counts(&outcomes, dim);
    let refused = outcomes.iter().filter(|o| o.refused()).count();
    let collapsed = spec.n_copies - refused;
    let born_test = (collapsed > 0)
        .then(|| born_statistics_from_counts(&counts, &targets))
        .transpose()?;

    let copies_decohered = results.iter().filter(|r| r.decohered).count();
    let prepared_stage = classify_stage(std::slice::from_ref(&prepared), &observables, threshold)?;
    let after_nonselective = stage_from_weights(
        copies_decohered == spec.n_copies,
        &reduce_to_meter(&decohered_state).diagonal(),
    );
    // every collapsed copy belongs to the pure sub-ensemble of its event
    let after_reading = if 2 * refused > spec.n_copies {
        Stage::QuantumPure
    } else {
        Stage::ClassicalPure
    };

    let report = EnsembleReport {
        stage: after_reading,
        stage_trace: StageTrace {
            prepared: prepared_stage,
            after_nonselective,
            after_reading,
        },
        n_copies: spec.n_copies,
        counts: counts.iter().copied().enumerate().collect(),
        frequencies: counts
            .iter()
            .enumerate()
            .map(|(n, &c)| {
                (
                    n,
                    if collapsed > 0 {
                        c as f64 / collapsed as f64
                    } else {
                        0.0
                    },
                )
            })
            .collect(),
        born_targets: targets.iter().copied().enumerate().collect(),
        chi_square: born_test.as_ref().map(|b| b.chi_square),
        born_test,
        decoherence_verdicts: VerdictSummary {
            copies_decohered,
            copies_not_decohered: spec.n_copies - copies_decohered,
            min_ratio: results
                .iter()
                .map(|r| r.min_ratio)
                .fold(f64::INFINITY, f64::min),
            max_interference: results
                .iter()
                .map(|r| r.max_interference)
                .fold(0.0, f64::max),
            first_copy,
        },
        refused,
        warnings,
    };
    let rows = outcomes
        .iter()
        .enumerate()
        .map(|(copy_id, o)| OutcomeRow {
            copy_id,
            iv: o.event.iv,
            delta_xi: o.event.delta_xi,
            equivalence_passed: o.equivalence_passed,
            collapsed_index: o.collapsed_index,
        })
        .collect();
    Ok(PipelineRun {
        report,
        outcomes: rows,
        decohered_state,
    })
}

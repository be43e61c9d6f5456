//! The meter ⊕ condensate composite state.
//!
//! The composite is a direct sum over sectors: each sector carries the
//! condensate amplitude `A(sector)` and its own copy of the meter state. The
//! von Neumann-type coupling multiplies meter amplitude `n` in a sector of
//! velocity `v` by `e^{i·v·t·𝔐_n·λ/ħ}`; nothing ever couples two sectors.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sectors::{CompartmentSpec, SectorGrid, SectorLabel};
use crate::statespace::{MeterBasis, MeterState, DEFAULT_TOL_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionConfig {
    pub lambda: f64,
    pub hbar: f64,
    /// Free Hamiltonians of meter and condensate are dropped. Only `true` is
    /// supported.
    pub neglect_kinetic: bool,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            hbar: 1.0,
            neglect_kinetic: true,
        }
    }
}

impl InteractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Argument("lambda must be positive".into()));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::Argument("hbar must be positive".into()));
        }
        if !self.neglect_kinetic {
            return Err(Error::Argument(
                "kinetic terms are not modelled; neglect_kinetic must be true".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Sectors labelled by the redefined coordinate and velocity `(𝒬, 𝒬̇)`.
    Lab,
    /// Sectors labelled by `(Ξ_A = 0, Ξ̇_A = −𝒬̇)` in the rearranged frame
    /// `Ξ_A = ξ − 𝒬`.
    Rearranged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    grid: Arc<SectorGrid>,
    blocks: Vec<MeterState>,
    time: f64,
    /// `∫ λ/ħ dt`; equals `time` for λ = ħ = 1.
    coupling_time: f64,
    frame: Frame,
}

/// Product state `|ψ0⟩ ⊗ |A⟩` with every sector holding a copy of `psi0`.
pub fn prepare_product_state(psi0: &MeterState, grid: Arc<SectorGrid>) -> Result<CompositeState> {
    psi0.require_normalized("initial meter state")?;
    grid.require_normalized()?;
    Ok(CompositeState {
        blocks: vec![psi0.clone(); grid.len()],
        grid,
        time: 0.0,
        coupling_time: 0.0,
        frame: Frame::Lab,
    })
}

impl CompositeState {
    /// Assembles a composite from explicit per-sector meter blocks.
    pub fn from_blocks(
        grid: Arc<SectorGrid>,
        blocks: Vec<MeterState>,
        time: f64,
        coupling_time: f64,
        frame: Frame,
    ) -> Result<Self> {
        check_dim(grid.len(), blocks.len())?;
        if let Some(first) = blocks.first() {
            if blocks.iter().any(|b| !b.shares_basis(first)) {
                return Err(Error::Argument("meter blocks use different bases".into()));
            }
        }
        let state = Self {
            grid,
            blocks,
            time,
            coupling_time,
            frame,
        };
        let n = state.norm_sqr();
        if (n - 1.0).abs() >= DEFAULT_TOL_NORM {
            return Err(Error::Contract(format!("composite norm² is {n}, not 1")));
        }
        Ok(state)
    }

    pub fn grid(&self) -> &Arc<SectorGrid> {
        &self.grid
    }

    pub fn blocks(&self) -> &[MeterState] {
        &self.blocks
    }

    pub fn block(&self, sector: usize) -> &MeterState {
        &self.blocks[sector]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn coupling_time(&self) -> f64 {
        self.coupling_time
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn basis(&self) -> &Arc<MeterBasis> {
        self.blocks[0].basis()
    }

    pub fn meter_dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn n_sectors(&self) -> usize {
        self.blocks.len()
    }

    /// `|A(sector)|²` per sector; constant under evolution.
    pub fn sector_weights(&self) -> Vec<f64> {
        self.grid.weights()
    }

    /// `Σ_sectors |A|²·‖block‖²`.
    pub fn norm_sqr(&self) -> f64 {
        self.grid
            .amplitudes()
            .iter()
            .zip(&self.blocks)
            .map(|(a, b)| a.norm_sqr() * b.norm_sqr())
            .sum()
    }

    /// Sector coordinates as written in the current frame: `(𝒬, 𝒬̇)` in the
    /// lab frame, `(Ξ_A, Ξ̇_A) = (0, −𝒬̇)` in the rearranged frame.
    pub fn sector_coordinates(&self, sector: usize) -> (f64, f64) {
        let SectorLabel {
            q_center, v_center, ..
        } = self.grid.labels()[sector];
        match self.frame {
            Frame::Lab => (q_center, v_center),
            Frame::Rearranged => (0.0, -v_center),
        }
    }

    /// Accumulated displacement entering the phase: `δ_t𝒬 = 𝒬̇·t` in the lab
    /// frame, `δ_tΞ_A = −δ_t𝒬` in the rearranged frame.
    pub fn phase_displacement(&self, sector: usize) -> f64 {
        let (_, velocity) = self.sector_coordinates(sector);
        velocity * self.coupling_time
    }

    /// Phase carried by meter amplitude `n` in `sector`, in the sign
    /// convention of the current frame: `+δ_t𝒬·𝔐_n` (lab) or `−δ_tΞ_A·𝔐_n`
    /// (rearranged). Both give the same number.
    pub fn phase_exponent(&self, sector: usize, n: usize) -> f64 {
        let m = self.basis().eigenvalue(n);
        match self.frame {
            Frame::Lab => self.phase_displacement(sector) * m,
            Frame::Rearranged => -self.phase_displacement(sector) * m,
        }
    }

    /// Full composite amplitudes `A(s)·c_n(s)`, sector-major.
    pub fn flat_amplitudes(&self) -> Vec<Complex64> {
        self.grid
            .amplitudes()
            .iter()
            .zip(&self.blocks)
            .flat_map(|(a, b)| b.amplitudes().iter().map(move |c| a * c))
            .collect()
    }
}

/// Applies the interaction for a further `dt`.
pub fn evolve(state: &CompositeState, dt: f64, cfg: &InteractionConfig) -> Result<CompositeState> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!(
            "dt must be finite and ≥ 0, got {dt}"
        )));
    }
    cfg.validate()?;
    if state.frame != Frame::Lab {
        return Err(Error::Argument("evolve expects a lab-frame state".into()));
    }
    let rate = dt * cfg.lambda / cfg.hbar;
    let eigenvalues = state.basis().eigenvalues();
    let blocks = state
        .grid
        .labels()
        .iter()
        .zip(&state.blocks)
        .map(|(label, block)| {
            let step = label.v_center * rate;
            block.map_amplitudes(|n, c| c * Complex64::from_polar(1.0, step * eigenvalues[n]))
        })
        .collect();
    Ok(CompositeState {
        grid: Arc::clone(&state.grid),
        blocks,
        time: state.time + dt,
        coupling_time: state.coupling_time + rate,
        frame: Frame::Lab,
    })
}

/// Re-expresses the state in the rearranged frame. Amplitudes are untouched;
/// only the labelling and the sign convention of the phase change.
pub fn to_rearranged_frame(state: &CompositeState) -> CompositeState {
    CompositeState {
        frame: Frame::Rearranged,
        ..state.clone()
    }
}

pub fn to_lab_frame(state: &CompositeState) -> CompositeState {
    CompositeState {
        frame: Frame::Lab,
        ..state.clone()
    }
}

/// Reduced density matrix of the meter after tracing out the condensate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMeterDensity {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ReducedMeterDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * self.dim + n]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|n| self.get(n, n).re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in 0..self.dim {
            for n in 0..self.dim {
                worst = worst.max((self.get(m, n) - self.get(n, m).conj()).norm());
            }
        }
        worst
    }
}

/// `ρ_mn = Σ_s |A(s)|²·c_m(s)·conj(c_n(s))`.
pub fn reduce_to_meter(state: &CompositeState) -> ReducedMeterDensity {
    let dim = state.meter_dim();
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (a, block) in state.grid.amplitudes().iter().zip(&state.blocks) {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let c = block.amplitudes();
        for m in 0..dim {
            for n in 0..dim {
                entries[m * dim + n] += w * c[m] * c[n].conj();
            }
        }
    }
    ReducedMeterDensity { dim, entries }
}

/// `Σ_s |A(s)|²·e^{i·δ_t𝒬(s)·(𝔐_m − 𝔐_n)/ħ}`: the characteristic function of
/// the sector-displacement distribution at `(𝔐_m − 𝔐_n)/ħ`.
///
/// For a product initial state with non-zero `c_m, c_n` this is
/// `ρ_mn / (c_m·conj(c_n))`.
pub fn offdiagonal_suppression(state: &CompositeState, m: usize, n: usize) -> Result<Complex64> {
    let dim = state.meter_dim();
    if m >= dim || n >= dim {
        return Err(Error::Argument(format!(
            "meter index out of range for dimension {dim}"
        )));
    }
    if m == n {
        return Err(Error::Argument(
            "off-diagonal suppression needs m ≠ n".into(),
        ));
    }
    let gap = state.basis().eigenvalue(m) - state.basis().eigenvalue(n);
    Ok(state
        .grid
        .labels()
        .iter()
        .zip(state.grid.amplitudes())
        .map(|(label, a)| {
            let displacement = label.v_center * state.coupling_time;
            a.norm_sqr() * Complex64::from_polar(1.0, displacement * gap)
        })
        .sum())
}

/// `exp(−σ_v²·τ²·Δ𝔐²/2)`, the continuum limit of
/// [`offdiagonal_suppression`] for a Gaussian velocity profile, where `τ` is
/// the coupling time.
pub fn gaussian_envelope(sigma_v: f64, coupling_time: f64, gap: f64) -> f64 {
    let x = sigma_v * coupling_time * gap;
    (-0.5 * x * x).exp()
}

pub const SNAPSHOT_SCHEMA: u32 = 1;

/// Structured-text form of a composite state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSnapshot {
    pub schema: u32,
    pub time: f64,
    pub coupling_time: f64,
    pub frame: Frame,
    pub meter: MeterBasis,
    pub compartments: CompartmentSpec,
    /// Profile mass inside the grid before renormalization, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captured_mass: Option<f64>,
    pub sectors: Vec<SectorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorRecord {
    pub iq: usize,
    pub iv: usize,
    pub q_center: f64,
    pub v_center: f64,
    /// `[re, im]` of `A(sector)`.
    pub amplitude: [f64; 2],
    /// `[re, im]` per meter index.
    pub block: Vec<[f64; 2]>,
}

impl CompositeState {
    pub fn to_snapshot(&self) -> StateSnapshot {
        let sectors = self
            .grid
            .labels()
            .iter()
            .zip(self.grid.amplitudes())
            .zip(&self.blocks)
            .map(|((l, a), b)| SectorRecord {
                iq: l.iq,
                iv: l.iv,
                q_center: l.q_center,
                v_center: l.v_center,
                amplitude: [a.re, a.im],
                block: b.amplitudes().iter().map(|c| [c.re, c.im]).collect(),
            })
            .collect();
        StateSnapshot {
            schema: SNAPSHOT_SCHEMA,
            time: self.time,
            coupling_time: self.coupling_time,
            frame: self.frame,
            meter: (**self.basis()).clone(),
            compartments: *self.grid.spec(),
            captured_mass: self.grid.captured_mass(),
            sectors,
        }
    }

    pub fn from_snapshot(snapshot: &StateSnapshot) -> Result<Self> {
        if snapshot.schema != SNAPSHOT_SCHEMA {
            return Err(Error::Snapshot(format!(
                "unsupported schema {}, expected {SNAPSHOT_SCHEMA}",
                snapshot.schema
            )));
        }
        let spec = snapshot.compartments;
        spec.validate()?;
        let labels = spec.labels();
        check_dim(labels.len(), snapshot.sectors.len())?;
        for (label, record) in labels.iter().zip(&snapshot.sectors) {
            let stored = (record.iq, record.iv, record.q_center, record.v_center);
            if stored != (label.iq, label.iv, label.q_center, label.v_center) {
                return Err(Error::Snapshot(format!(
                    "sector ({}, {}) does not match the compartment layout",
                    record.iq, record.iv
                )));
            }
        }
        let grid = SectorGrid::from_amplitudes(
            spec,
            snapshot
                .sectors
                .iter()
                .map(|r| Complex64::new(r.amplitude[0], r.amplitude[1]))
                .collect(),
        )?
        .with_captured_mass(snapshot.captured_mass);
        let basis = Arc::new(snapshot.meter.clone());
        let blocks = snapshot
            .sectors
            .iter()
            .map(|r| {
                MeterState::new(
                    Arc::clone(&basis),
                    r.block
                        .iter()
                        .map(|[re, im]| Complex64::new(*re, *im))
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_blocks(
            Arc::new(grid),
            blocks,
            snapshot.time,
            snapshot.coupling_time,
            snapshot.frame,
        )
    }

    pub fn to_snapshot_text(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.to_snapshot()).expect("snapshot serializes");
        text.push('\n');
        text
    }

    pub fn from_snapshot_text(text: &str) -> Result<Self> {
        let snapshot: StateSnapshot =
            serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        Self::from_snapshot(&snapshot)
    }
}

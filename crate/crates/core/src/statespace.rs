//! Small dense Hilbert-space arithmetic for the meter system.
//!
//! Everything here is an immutable value. States share their basis through an
//! `Arc` so that per-sector copies inside a composite state stay cheap.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default tolerance on `|‖ψ‖² − 1|` for a state to count as normalized.
pub const DEFAULT_TOL_NORM: f64 = 1e-10;

/// Eigenbasis of the meter observable: one real eigenvalue per basis index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterBasis {
    eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl MeterBasis {
    /// Eigenvalues must be finite and strictly increasing.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Argument(
                "meter basis needs at least one eigenvalue".into(),
            ));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("meter eigenvalues must be finite".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(
                "meter eigenvalues must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            eigenvalues,
            labels: None,
        })
    }

    /// Basis with eigenvalues `0, 1, …, dim − 1`.
    pub fn integer(dim: usize) -> Result<Self> {
        Self::new((0..dim).map(|n| n as f64).collect())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        check_dim(self.dim(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.eigenvalues[n]
    }

    pub fn label(&self, n: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[n].as_str())
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Meter-system state vector in the eigenbasis of the meter observable.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterState {
    amplitudes: Vec<Complex64>,
    basis: Arc<MeterBasis>,
}

impl MeterState {
    pub fn new(basis: Arc<MeterBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_dim(basis.dim(), amplitudes.len())?;
        if amplitudes
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::Argument("amplitudes must be finite".into()));
        }
        Ok(Self { amplitudes, basis })
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(basis: Arc<MeterBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let state = Self::new(basis, amplitudes)?;
        let norm = state.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::Argument("cannot normalize the zero vector".into()));
        }
        Ok(state.map_amplitudes(|_, c| c / norm))
    }

    pub fn from_real(basis: Arc<MeterBasis>, amplitudes: &[f64]) -> Result<Self> {
        Self::new(
            basis,
            amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        )
    }

    /// The basis vector `|𝔐_n⟩`.
    pub fn eigenstate(basis: Arc<MeterBasis>, n: usize) -> Result<Self> {
        if n >= basis.dim() {
            return Err(Error::Argument(format!(
                "eigenstate index {n} out of range for dimension {}",
                basis.dim()
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[n] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, basis })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: usize) -> Complex64 {
        self.amplitudes[n]
    }

    pub fn basis(&self) -> &Arc<MeterBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() < tol
    }

    /// `|c_n|²` for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Indices whose amplitude modulus exceeds `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > threshold)
            .map(|(n, _)| n)
            .collect()
    }

    pub fn shares_basis(&self, other: &MeterState) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis
    }

    pub(crate) fn map_amplitudes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(n, &c)| f(n, c))
                .collect(),
            basis: Arc::clone(&self.basis),
        }
    }

    pub(crate) fn require_normalized(&self, what: &str) -> Result<()> {
        if self.is_normalized(DEFAULT_TOL_NORM) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "{what} is not normalized (‖ψ‖² = {})",
                self.norm_sqr()
            )))
        }
    }
}

/// `⟨a|b⟩ = Σ conj(a_n)·b_n`.
pub fn inner_product(a: &MeterState, b: &MeterState) -> Result<Complex64> {
    check_dim(a.dim(), b.dim())?;
    if !a.shares_basis(b) {
        return Err(Error::Argument(
            "states are expressed in different bases".into(),
        ));
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// A unitary that is diagonal in the meter eigenbasis: `|n⟩ ↦ e^{iθ_n}|n⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalUnitary {
    phases: Vec<f64>,
}

impl DiagonalUnitary {
    pub fn new(phases: Vec<f64>) -> Self {
        Self { phases }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            phases: vec![0.0; dim],
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn apply(&self, state: &MeterState) -> Result<MeterState> {
        apply_diagonal_unitary(self, state)
    }
}

pub fn apply_diagonal_unitary(u: &DiagonalUnitary, s: &MeterState) -> Result<MeterState> {
    check_dim(u.dim(), s.dim())?;
    Ok(s.map_amplitudes(|n, c| c * Complex64::from_polar(1.0, u.phases[n])))
}

/// True iff the two states differ only by an overall phase, i.e.
/// `|⟨a|b⟩| ≥ 1 − tol`.
pub fn global_phase_equivalent(a: &MeterState, b: &MeterState, tol: f64) -> Result<bool> {
    a.require_normalized("first state")?;
    b.require_normalized("second state")?;
    Ok(inner_product(a, b)?.norm() >= 1.0 - tol)
}

//! Superselected observables and the interference-versus-uncertainty-width
//! criterion for a state to act as a classical mixture of meter eigenstates.

use num_complex::Complex64;
use serde::Serialize;

use crate::composite::CompositeState;
use crate::error::{check_dim, Error, Result};

/// Default threshold for "variance ≫ interference".
pub const DEFAULT_RATIO_THRESHOLD: f64 = 100.0;

/// `⊕_sectors Ô_ψ ⊗ |sector⟩⟨sector|`, optionally restricted to a subset of
/// sectors. Block-diagonal by construction: there is no way to express a term
/// that connects two sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperselectedObservable {
    id: String,
    dim: usize,
    meter_op: Vec<Complex64>,
    sector_support: Option<Vec<usize>>,
}

impl SuperselectedObservable {
    /// `meter_op` is row-major `dim × dim` and must be Hermitian.
    pub fn new(id: impl Into<String>, dim: usize, meter_op: Vec<Complex64>) -> Result<Self> {
        check_dim(dim * dim, meter_op.len())?;
        for m in 0..dim {
            for n in 0..dim {
                let err = (meter_op[m * dim + n] - meter_op[n * dim + m].conj()).norm();
                if err > 1e-12 {
                    return Err(Error::Argument(format!(
                        "meter operator is not Hermitian at ({m}, {n})"
                    )));
                }
            }
        }
        Ok(Self {
            id: id.into(),
            dim,
            meter_op,
            sector_support: None,
        })
    }

    pub fn diagonal(id: impl Into<String>, values: &[f64]) -> Self {
        let dim = values.len();
        let mut op = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (n, v) in values.iter().enumerate() {
            op[n * dim + n] = Complex64::new(*v, 0.0);
        }
        Self {
            id: id.into(),
            dim,
            meter_op: op,
            sector_support: None,
        }
    }

    /// Restricts the observable to the listed sectors.
    pub fn with_support(mut self, sectors: Vec<usize>) -> Self {
        self.sector_support = Some(sectors);
        self
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            id: format!("{}*{alpha}", self.id),
            meter_op: self.meter_op.iter().map(|z| z * alpha).collect(),
            ..self.clone()
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element(&self, m: usize, n: usize) -> Complex64 {
        self.meter_op[m * self.dim + n]
    }

    pub fn sector_support(&self) -> Option<&[usize]> {
        self.sector_support.as_deref()
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|m| (0..self.dim).map(|n| self.element(m, n) * v[n]).sum())
            .collect()
    }

    fn sectors<'a>(&'a self, state: &CompositeState) -> Box<dyn Iterator<Item = usize> + 'a> {
        match &self.sector_support {
            Some(s) => Box::new(s.iter().copied()),
            None => Box::new(0..state.n_sectors()),
        }
    }

    fn check(&self, state: &CompositeState) -> Result<()> {
        check_dim(state.meter_dim(), self.dim)?;
        if let Some(support) = &self.sector_support {
            if let Some(&bad) = support.iter().find(|&&s| s >= state.n_sectors()) {
                return Err(Error::Argument(format!(
                    "support sector {bad} out of range"
                )));
            }
        }
        Ok(())
    }
}

/// Hermitian generators of the `dim × dim` operator space, each embedded as
/// a superselected observable: the `dim` diagonal projectors `|n⟩⟨n|`, and for
/// every `m < n` the pair `|m⟩⟨n| + |n⟩⟨m|` and `−i|m⟩⟨n| + i|n⟩⟨m|`.
pub fn generator_basis(dim: usize) -> Vec<SuperselectedObservable> {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(dim * dim);
    for n in 0..dim {
        let mut op = vec![zero; dim * dim];
        op[n * dim + n] = Complex64::new(1.0, 0.0);
        out.push(SuperselectedObservable {
            id: format!("P{n}"),
            dim,
            meter_op: op,
            sector_support: None,
        });
    }
    for m in 0..dim {
        for n in m + 1..dim {
            let mut x = vec![zero; dim * dim];
            x[m * dim + n] = Complex64::new(1.0, 0.0);
            x[n * dim + m] = Complex64::new(1.0, 0.0);
            out.push(SuperselectedObservable {
                id: format!("X{m}{n}"),
                dim,
                meter_op: x,
                sector_support: None,
            });
            let mut y = vec![zero; dim * dim];
            y[m * dim + n] = Complex64::new(0.0, -1.0);
            y[n * dim + m] = Complex64::new(0.0, 1.0);
            out.push(SuperselectedObservable {
                id: format!("Y{m}{n}"),
                dim,
                meter_op: y,
                sector_support: None,
            });
        }
    }
    out
}

/// `Σ_s |A(s)|²·f(s)` over the observable's support.
fn sector_sum(
    state: &CompositeState,
    obs: &SuperselectedObservable,
    f: impl Fn(&[Complex64]) -> Complex64,
) -> Complex64 {
    let amps = state.grid().amplitudes();
    obs.sectors(state)
        .map(|s| amps[s].norm_sqr() * f(state.block(s).amplitudes()))
        .sum()
}

fn braket(bra: &[Complex64], ket: &[Complex64]) -> Complex64 {
    bra.iter().zip(ket).map(|(a, b)| a.conj() * b).sum()
}

/// `⟨⟨Ô⟩⟩ = Σ_s |A(s)|²·⟨block_s|Ô_ψ|block_s⟩`.
pub fn expectation(state: &CompositeState, obs: &SuperselectedObservable) -> Result<f64> {
    obs.check(state)?;
    let z = sector_sum(state, obs, |b| braket(b, &obs.apply(b)));
    debug_assert!(z.im.abs() < 1e-10, "imaginary residue {}", z.im);
    Ok(z.re)
}

/// `⟨⟨Ô²⟩⟩ − ⟨⟨Ô⟩⟩²`, clamped at zero against rounding.
pub fn variance(state: &CompositeState, obs: &SuperselectedObservable) -> Result<f64> {
    obs.check(state)?;
    let mean = expectation(state, obs)?;
    let second = sector_sum(state, obs, |b| {
        let ob = obs.apply(b);
        braket(&ob, &ob)
    })
    .re;
    Ok((second - mean * mean).max(0.0))
}

/// Restriction of the composite to one meter index across all sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterComponent {
    pub index: usize,
    /// `A(s)·c_index(s)` per sector.
    pub amplitudes: Vec<Complex64>,
}

impl MeterComponent {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// The component as a full composite vector (sector-major, zero outside
    /// its meter index).
    pub fn embed(&self, meter_dim: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len() * meter_dim];
        for (s, a) in self.amplitudes.iter().enumerate() {
            out[s * meter_dim + self.index] = *a;
        }
        out
    }
}

pub fn meter_interference_decomposition(state: &CompositeState) -> Vec<MeterComponent> {
    let amps = state.grid().amplitudes();
    (0..state.meter_dim())
        .map(|n| MeterComponent {
            index: n,
            amplitudes: amps
                .iter()
                .zip(state.blocks())
                .map(|(a, b)| a * b.amplitude(n))
                .collect(),
        })
        .collect()
}

/// `(2·Σ_{m<n} Re⟨⟨Ψ_n|Ô|Ψ_m⟩⟩)²`.
pub fn interference(state: &CompositeState, obs: &SuperselectedObservable) -> Result<f64> {
    obs.check(state)?;
    let dim = obs.dim;
    let total = sector_sum(state, obs, |b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..dim {
            for n in m + 1..dim {
                acc += b[n].conj() * obs.element(n, m) * b[m];
            }
        }
        acc
    });
    let doubled = 2.0 * total.re;
    Ok(doubled * doubled)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoherenceVerdict {
    pub observable_id: String,
    pub variance: f64,
    pub interference: f64,
    /// `variance / interference`; infinite when the interference vanishes.
    pub ratio: f64,
    pub decohered: bool,
}

pub fn decoherence_verdict(
    state: &CompositeState,
    obs: &SuperselectedObservable,
    threshold: f64,
) -> Result<DecoherenceVerdict> {
    if !(threshold > 1.0) {
        return Err(Error::Argument(format!(
            "ratio threshold must exceed 1, got {threshold}"
        )));
    }
    let variance = variance(state, obs)?;
    let interference = interference(state, obs)?;
    let (ratio, decohered) = if interference == 0.0 {
        (f64::INFINITY, true)
    } else if variance == 0.0 {
        (0.0, false)
    } else {
        let r = variance / interference;
        (r, r >= threshold)
    };
    Ok(DecoherenceVerdict {
        observable_id: obs.id.clone(),
        variance,
        interference,
        ratio,
        decohered,
    })
}

pub fn decoherence_verdicts(
    state: &CompositeState,
    observables: &[SuperselectedObservable],
    threshold: f64,
) -> Result<Vec<DecoherenceVerdict>> {
    observables
        .iter()
        .map(|o| decoherence_verdict(state, o, threshold))
        .collect()
}

/// True iff every supplied observable passes its verdict. The list stands in
/// for the whole superselected family; [`generator_basis`] spans it.
pub fn is_classical_mixed(
    state: &CompositeState,
    observables: &[SuperselectedObservable],
    threshold: f64,
) -> Result<bool> {
    if observables.is_empty() {
        return Err(Error::Argument("need at least one observable".into()));
    }
    for obs in observables {
        if !decoherence_verdict(state, obs, threshold)?.decohered {
            return Ok(false);
        }
    }
    Ok(true)
}

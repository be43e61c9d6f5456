//! Coarse-grained phase space of the condensate's Goldstone mode.
//!
//! The position line is cut into `n_q` compartments of constant width and the
//! velocity line into `n_v` compartments of the reciprocal width
//! `kappa / width_q`. Each (position, velocity) cell is a superselection sector:
//! the condensate's wave function is a list of per-sector amplitudes and never
//! carries coherences between sectors.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statespace::DEFAULT_TOL_NORM;

/// Velocities at or above this fraction of `c_light` trigger the
/// non-relativistic warning.
pub const NONRELATIVISTIC_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompartmentSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub n_q: usize,
    /// Product of the position and velocity compartment widths.
    pub kappa: f64,
    pub n_v: usize,
    pub v_center: f64,
}

impl CompartmentSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.q_min, self.q_max, self.kappa, self.v_center]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Argument(
                "compartment parameters must be finite".into(),
            ));
        }
        if self.q_max <= self.q_min {
            return Err(Error::Argument("q_max must exceed q_min".into()));
        }
        if self.n_q == 0 || self.n_v == 0 {
            return Err(Error::Argument("n_q and n_v must be at least 1".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::Argument("kappa must be positive".into()));
        }
        if !(self.width_q() > 0.0 && self.width_v() > 0.0 && self.width_v().is_finite()) {
            return Err(Error::Argument(
                "compartment widths must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn width_q(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_q as f64
    }

    pub fn width_v(&self) -> f64 {
        self.kappa / self.width_q()
    }

    pub fn n_sectors(&self) -> usize {
        self.n_q * self.n_v
    }

    pub fn q_center(&self, iq: usize) -> f64 {
        self.q_min + (iq as f64 + 0.5) * self.width_q()
    }

    /// Velocity compartments are laid out symmetrically around `v_center`.
    pub fn v_center_of(&self, iv: usize) -> f64 {
        self.v_center + (iv as f64 + 0.5 - self.n_v as f64 / 2.0) * self.width_v()
    }

    pub fn sector_index(&self, iq: usize, iv: usize) -> usize {
        iq * self.n_v + iv
    }

    pub fn label(&self, iq: usize, iv: usize) -> SectorLabel {
        SectorLabel {
            iq,
            iv,
            q_center: self.q_center(iq),
            v_center: self.v_center_of(iv),
        }
    }

    /// All sector labels, position-major.
    pub fn labels(&self) -> Vec<SectorLabel> {
        (0..self.n_q)
            .flat_map(|iq| (0..self.n_v).map(move |iv| (iq, iv)))
            .map(|(iq, iv)| self.label(iq, iv))
            .collect()
    }

    /// Warnings for velocity compartments that violate `|v| ≪ c_light`.
    pub fn relativity_warnings(&self, c_light: f64) -> Vec<String> {
        let limit = NONRELATIVISTIC_FRACTION * c_light;
        (0..self.n_v)
            .map(|iv| (iv, self.v_center_of(iv)))
            .filter(|(_, v)| v.abs() >= limit)
            .map(|(iv, v)| {
                format!(
                    "velocity compartment {iv} has |v| = {} ≥ {limit} (0.1·c)",
                    v.abs()
                )
            })
            .collect()
    }
}

/// A (position, velocity) compartment with its midpoint representatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorLabel {
    pub iq: usize,
    pub iv: usize,
    pub q_center: f64,
    pub v_center: f64,
}

/// One explicit amplitude in a custom profile table: `[iq, iv, re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow(pub usize, pub usize, pub f64, pub f64);

/// Shape of the condensate wave function over sectors, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeProfile {
    /// `exp(−(q−q0)²/4σ_q²)·exp(−(v−v0)²/4σ_v²)`, so that `|A|²` has
    /// standard deviations `σ_q` and `σ_v`.
    Gaussian {
        q0: f64,
        sigma_q: f64,
        v0: f64,
        sigma_v: f64,
    },
    Uniform,
    Point {
        iq: usize,
        iv: usize,
    },
    Table {
        rows: Vec<TableRow>,
    },
}

impl AmplitudeProfile {
    fn sample(&self, spec: &CompartmentSpec) -> Result<Vec<Complex64>> {
        let zero = Complex64::new(0.0, 0.0);
        let mut amps = vec![zero; spec.n_sectors()];
        match self {
            Self::Gaussian {
                q0,
                sigma_q,
                v0,
                sigma_v,
            } => {
                if !(*sigma_q > 0.0 && *sigma_v > 0.0) {
                    return Err(Error::Argument("gaussian widths must be positive".into()));
                }
                for (a, label) in amps.iter_mut().zip(spec.labels()) {
                    let dq = label.q_center - q0;
                    let dv = label.v_center - v0;
                    let value = (-dq * dq / (4.0 * sigma_q * sigma_q)).exp()
                        * (-dv * dv / (4.0 * sigma_v * sigma_v)).exp();
                    *a = Complex64::new(value, 0.0);
                }
            }
            Self::Uniform => amps.fill(Complex64::new(1.0, 0.0)),
            Self::Point { iq, iv } => {
                if *iq >= spec.n_q || *iv >= spec.n_v {
                    return Err(Error::Argument(format!(
                        "point sector ({iq}, {iv}) outside the {}×{} grid",
                        spec.n_q, spec.n_v
                    )));
                }
                amps[spec.sector_index(*iq, *iv)] = Complex64::new(1.0, 0.0);
            }
            Self::Table { rows } => {
                let mut seen = vec![false; spec.n_sectors()];
                for &TableRow(iq, iv, re, im) in rows {
                    if iq >= spec.n_q || iv >= spec.n_v {
                        return Err(Error::Argument(format!(
                            "table row ({iq}, {iv}) outside the {}×{} grid",
                            spec.n_q, spec.n_v
                        )));
                    }
                    if !(re.is_finite() && im.is_finite()) {
                        return Err(Error::Argument("table amplitudes must be finite".into()));
                    }
                    let k = spec.sector_index(iq, iv);
                    if std::mem::replace(&mut seen[k], true) {
                        return Err(Error::Argument(format!("duplicate table row ({iq}, {iv})")));
                    }
                    amps[k] = Complex64::new(re, im);
                }
            }
        }
        Ok(amps)
    }

    /// Analytic `∫|A|² dq dv` for profiles that have one; used to report how
    /// much of the continuum mass the finite grid captures.
    fn continuum_mass(&self) -> Option<f64> {
        match self {
            Self::Gaussian {
                sigma_q, sigma_v, ..
            } => Some(2.0 * std::f64::consts::PI * sigma_q * sigma_v),
            _ => None,
        }
    }
}

/// Normalized condensate amplitudes over every sector of a compartment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorGrid {
    spec: CompartmentSpec,
    labels: Vec<SectorLabel>,
    amplitudes: Vec<Complex64>,
    captured_mass: Option<f64>,
}

impl SectorGrid {
    pub(crate) fn with_captured_mass(mut self, mass: Option<f64>) -> Self {
        self.captured_mass = mass;
        self
    }

    pub fn spec(&self) -> &CompartmentSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[SectorLabel] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn amplitude(&self, iq: usize, iv: usize) -> Complex64 {
        self.amplitudes[self.spec.sector_index(iq, iv)]
    }

    /// `|A(sector)|²`, indexed like [`labels`](Self::labels).
    pub fn weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Fraction of the continuum profile's mass that falls on the grid before
    /// renormalization. `None` for profiles without a closed form.
    pub fn captured_mass(&self) -> Option<f64> {
        self.captured_mass
    }

    /// Rebuilds a grid from stored amplitudes (snapshot loading).
    pub fn from_amplitudes(spec: CompartmentSpec, amplitudes: Vec<Complex64>) -> Result<Self> {
        spec.validate()?;
        crate::error::check_dim(spec.n_sectors(), amplitudes.len())?;
        let grid = Self {
            labels: spec.labels(),
            spec,
            amplitudes,
            captured_mass: None,
        };
        grid.require_normalized()?;
        Ok(grid)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() < DEFAULT_TOL_NORM {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "sector grid is not normalized (Σ|A|² = {n})"
            )))
        }
    }
}

/// Samples `profile` at compartment midpoints and renormalizes to `Σ|A|² = 1`.
pub fn build_grid(spec: CompartmentSpec, profile: &AmplitudeProfile) -> Result<SectorGrid> {
    spec.validate()?;
    let raw = profile.sample(&spec)?;
    let raw_norm: f64 = raw.iter().map(|a| a.norm_sqr()).sum();
    if raw_norm == 0.0 || !raw_norm.is_finite() {
        return Err(Error::DegenerateProfile);
    }
    let captured_mass = profile
        .continuum_mass()
        .map(|m| raw_norm * spec.width_q() * spec.width_v() / m);
    let scale = raw_norm.sqrt();
    Ok(SectorGrid {
        labels: spec.labels(),
        spec,
        amplitudes: raw.into_iter().map(|a| a / scale).collect(),
        captured_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutationReport {
    /// Largest `|[Q, V]_ij|` over the sector index set.
    pub commutator_max_norm: f64,
    pub n_sectors: usize,
    pub width_q: f64,
    pub width_v: f64,
    pub width_product: f64,
}

/// Coarse position and velocity operators on the sector index set.
///
/// Each sector is a simultaneous eigenvector, so both operators are stored as
/// their diagonals. Off-diagonal entries of both are identically zero.
fn coarse_observables(spec: &CompartmentSpec) -> (Vec<f64>, Vec<f64>) {
    spec.labels()
        .into_iter()
        .map(|l| (l.q_center, l.v_center))
        .unzip()
}

pub fn verify_commuting_redefinition(spec: &CompartmentSpec) -> Result<CommutationReport> {
    spec.validate()?;
    let (q, v) = coarse_observables(spec);
    // (QV − VQ)_ij = Σ_k Q_ik V_kj − V_ik Q_kj; only k = i = j survives for
    // diagonal operators, and off-diagonal entries are zero.
    #[allow(clippy::eq_op)]
    let commutator_max_norm = q
        .iter()
        .zip(&v)
        .map(|(qi, vi)| (qi * vi - vi * qi).abs())
        .fold(0.0, f64::max);
    Ok(CommutationReport {
        commutator_max_norm,
        n_sectors: q.len(),
        width_q: spec.width_q(),
        width_v: spec.width_v(),
        width_product: spec.width_q() * spec.width_v(),
    })
}

/// Marginal probability of each velocity compartment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventWeights {
    weights: Vec<f64>,
}

impl EventWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Argument(
                "event weights must be non-negative and finite".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() >= DEFAULT_TOL_NORM {
            return Err(Error::Contract(format!(
                "event weights sum to {total}, not 1"
            )));
        }
        Ok(Self { weights })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `w(iv) = Σ_iq |A(iq, iv)|²`.
pub fn event_weights(grid: &SectorGrid) -> Result<EventWeights> {
    grid.require_normalized()?;
    let mut w = vec![0.0; grid.spec.n_v];
    for (label, a) in grid.labels.iter().zip(&grid.amplitudes) {
        w[label.iv] += a.norm_sqr();
    }
    EventWeights::new(w)
}

/// Inverse-CDF draw of an index with probability proportional to `weights`.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed on the rounding sliver above the last partial sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws a velocity-compartment index; deterministic in `rng_seed`.
pub fn sample_velocity(weights: &EventWeights, rng_seed: u64) -> usize {
    sample_index(&weights.weights, &mut rng_from_seed(rng_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(n_q: usize, n_v: usize) -> CompartmentSpec {
        CompartmentSpec {
            q_min: 0.0,
            q_max: n_q as f64,
            n_q,
            kappa: 1.0,
            n_v,
            v_center: 0.0,
        }
    }

    #[test]
    fn spec_validation() {
        assert!(spec(2, 2).validate().is_ok());
        let mut s = spec(2, 2);
        s.q_max = s.q_min;
        assert!(s.validate().is_err());
        let mut s = spec(2, 2);
        s.n_v = 0;
        assert!(s.validate().is_err());
        let mut s = spec(2, 2);
        s.kappa = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn centers_are_midpoints() {
        let s = CompartmentSpec {
            q_min: 0.0,
            q_max: 8.0,
            n_q: 4,
            kappa: 1.0,
            n_v: 4,
            v_center: 1.0,
        };
        assert_eq!(s.q_center(0), 1.0);
        assert_eq!(s.q_center(3), 7.0);
        assert_eq!(s.width_v(), 0.5);
        let vs: Vec<f64> = (0..4).map(|iv| s.v_center_of(iv)).collect();
        assert_eq!(vs, vec![0.25, 0.75, 1.25, 1.75]);
    }

    #[test]
    fn point_profile() {
        let g = build_grid(spec(4, 5), &AmplitudeProfile::Point { iq: 2, iv: 3 }).unwrap();
        for l in g.labels() {
            let expected = if (l.iq, l.iv) == (2, 3) { 1.0 } else { 0.0 };
            assert_eq!(g.amplitude(l.iq, l.iv), Complex64::new(expected, 0.0));
        }
        let w = event_weights(&g).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn point_outside_grid_is_rejected() {
        assert!(build_grid(spec(2, 2), &AmplitudeProfile::Point { iq: 2, iv: 0 }).is_err());
    }

    #[test]
    fn uniform_profile() {
        let g = build_grid(spec(2, 2), &AmplitudeProfile::Uniform).unwrap();
        for a in g.amplitudes() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
        }
        let w = event_weights(&g).unwrap();
        assert_abs_diff_eq!(w.as_slice()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.as_slice()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_profile() {
        let rows = vec![TableRow(0, 0, 0.0, 0.0)];
        assert_eq!(
            build_grid(spec(2, 2), &AmplitudeProfile::Table { rows }),
            Err(Error::DegenerateProfile)
        );
    }

    #[test]
    fn table_profile_rejects_duplicates() {
        let rows = vec![TableRow(0, 0, 1.0, 0.0), TableRow(0, 0, 1.0, 0.0)];
        assert!(build_grid(spec(2, 2), &AmplitudeProfile::Table { rows }).is_err());
    }

    #[test]
    fn table_profile_keeps_phases() {
        let rows = vec![TableRow(0, 1, 0.0, 3.0), TableRow(1, 0, 4.0, 0.0)];
        let g = build_grid(spec(2, 2), &AmplitudeProfile::Table { rows }).unwrap();
        assert_abs_diff_eq!(g.amplitude(0, 1).im, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(g.amplitude(1, 0).re, 0.8, epsilon = 1e-15);
    }

    fn gaussian_16x8() -> (CompartmentSpec, AmplitudeProfile) {
        // width_q = 0.5, width_v = 0.25 / 0.5 = 0.5, velocities span ±2.
        let s = CompartmentSpec {
            q_min: -4.0,
            q_max: 4.0,
            n_q: 16,
            kappa: 0.25,
            n_v: 8,
            v_center: 0.0,
        };
        let p = AmplitudeProfile::Gaussian {
            q0: 0.0,
            sigma_q: 1.0,
            v0: 0.0,
            sigma_v: 0.5,
        };
        (s, p)
    }

    /// Direct evaluation of the profile at midpoints written out longhand.
    fn gaussian_oracle() -> Vec<Vec<f64>> {
        let mut table = vec![vec![0.0; 8]; 16];
        let mut total = 0.0;
        for (iq, row) in table.iter_mut().enumerate() {
            let q = -4.0 + 0.25 + 0.5 * iq as f64;
            for (iv, cell) in row.iter_mut().enumerate() {
                let v = -2.0 + 0.25 + 0.5 * iv as f64;
                *cell = (-q * q / 4.0).exp() * (-v * v / (4.0 * 0.25)).exp();
                total += *cell * *cell;
            }
        }
        for row in &mut table {
            for cell in row.iter_mut() {
                *cell /= total.sqrt();
            }
        }
        table
    }

    #[test]
    fn gaussian_profile_matches_direct_evaluation() {
        let (s, p) = gaussian_16x8();
        let g = build_grid(s, &p).unwrap();
        let oracle = gaussian_oracle();
        for (iq, row) in oracle.iter().enumerate() {
            for (iv, want) in row.iter().enumerate() {
                let got = g.amplitude(iq, iv);
                assert_abs_diff_eq!(got.re, *want, epsilon = 1e-14);
                assert_eq!(got.im, 0.0);
            }
        }
        assert_abs_diff_eq!(g.norm_sqr(), 1.0, epsilon = 1e-12);
        let captured = g.captured_mass().unwrap();
        assert!(captured > 0.9 && captured < 1.01, "captured {captured}");
    }

    #[test]
    fn gaussian_event_weights_are_column_sums() {
        let (s, p) = gaussian_16x8();
        let w = event_weights(&build_grid(s, &p).unwrap()).unwrap();
        let oracle = gaussian_oracle();
        for iv in 0..8 {
            let col: f64 = oracle.iter().map(|row| row[iv] * row[iv]).sum();
            assert_abs_diff_eq!(w.as_slice()[iv], col, epsilon = 1e-14);
        }
    }

    #[test]
    fn event_weights_require_normalized_grid() {
        let g = SectorGrid {
            spec: spec(1, 2),
            labels: spec(1, 2).labels(),
            amplitudes: vec![Complex64::new(1.0, 0.0); 2],
            captured_mass: None,
        };
        assert!(matches!(event_weights(&g), Err(Error::Contract(_))));
    }

    #[test]
    fn commutation_examples() {
        let r = verify_commuting_redefinition(&spec(1, 1)).unwrap();
        assert_eq!(r.commutator_max_norm, 0.0);
        assert_eq!(r.n_sectors, 1);

        let s = CompartmentSpec {
            q_min: 0.0,
            q_max: 8.0,
            n_q: 4,
            kappa: 1.0,
            n_v: 3,
            v_center: 0.0,
        };
        let r = verify_commuting_redefinition(&s).unwrap();
        assert_eq!(r.commutator_max_norm, 0.0);
        assert_eq!(r.width_q, 2.0);
        assert_eq!(r.width_v, 0.5);
        assert_eq!(r.width_product, 1.0);
    }

    #[test]
    fn sampling_examples() {
        let w = EventWeights::new(vec![1.0]).unwrap();
        assert!((0..100).all(|seed| sample_velocity(&w, seed) == 0));

        let w = EventWeights::new(vec![0.25, 0.75]).unwrap();
        let a: Vec<usize> = (0..50).map(|s| sample_velocity(&w, s)).collect();
        let b: Vec<usize> = (0..50).map(|s| sample_velocity(&w, s)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn fair_coin_frequencies() {
        let w = [0.5, 0.5];
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let ones = (0..n).filter(|_| sample_index(&w, &mut rng) == 1).count();
        let f = ones as f64 / n as f64;
        // 3σ binomial half-width is 3·sqrt(0.25/1e5) ≈ 0.0047
        assert!((f - 0.5).abs() < 0.01, "frequency {f}");
    }

    #[test]
    fn sample_index_skips_zero_weights() {
        let w = [0.0, 1.0, 0.0];
        let mut rng = rng_from_seed(3);
        assert!((0..1000).all(|_| sample_index(&w, &mut rng) == 1));
    }

    #[test]
    fn relativity_warning() {
        let mut s = spec(1, 4);
        s.v_center = 50.0;
        assert!(s.relativity_warnings(1e6).is_empty());
        assert_eq!(s.relativity_warnings(100.0).len(), 4);
    }

    proptest! {
        #[test]
        fn random_profiles_normalize(
            rows in prop::collection::vec((0usize..3, 0usize..4, -1.0f64..1.0, -1.0f64..1.0), 1..12)
        ) {
            let mut seen = std::collections::HashSet::new();
            let rows: Vec<TableRow> = rows
                .into_iter()
                .filter(|(q, v, _, _)| seen.insert((*q, *v)))
                .map(|(q, v, re, im)| TableRow(q, v, re, im))
                .collect();
            let nonzero = rows.iter().any(|r| r.2 != 0.0 || r.3 != 0.0);
            match build_grid(spec(3, 4), &AmplitudeProfile::Table { rows }) {
                Ok(g) => {
                    prop_assert!((g.norm_sqr() - 1.0).abs() < 1e-10);
                    let w = event_weights(&g).unwrap();
                    prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-10);
                }
                Err(e) => {
                    prop_assert!(!nonzero);
                    prop_assert_eq!(e, Error::DegenerateProfile);
                }
            }
        }

        #[test]
        fn commutator_vanishes(
            q_min in -100.0f64..100.0, span in 0.1f64..50.0, n_q in 1usize..20,
            kappa in 0.01f64..10.0, n_v in 1usize..40, v_center in -5.0f64..5.0,
        ) {
            let s = CompartmentSpec { q_min, q_max: q_min + span, n_q, kappa, n_v, v_center };
            let r = verify_commuting_redefinition(&s).unwrap();
            prop_assert_eq!(r.commutator_max_norm, 0.0);
            prop_assert!((r.width_product - kappa).abs() < 1e-12 * kappa.max(1.0));
        }
    }
}

//! Event reading: a sampled gauge-velocity event, the phase it induces on the
//! meter, the global-phase equivalence test between two such events, and the
//! collapse onto a single meter eigenstate.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::composite::{reduce_to_meter, CompositeState};
use crate::decoherence::{is_classical_mixed, SuperselectedObservable};
use crate::error::{Error, Result};
use crate::sectors::{event_weights, rng_from_seed, sample_index};
use crate::statespace::{global_phase_equivalent, DiagonalUnitary, MeterBasis, MeterState};

/// Default tolerance on `|ratio − 1|` for equivalence decisions.
pub const DEFAULT_EQUIVALENCE_TOL: f64 = 1e-9;

/// Amplitudes at or below this modulus do not count as support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// A classical event of the rearranged-frame velocity: `Ξ̇_A` held for a time
/// increment `μ`, giving the displacement `δ_μΞ_A = Ξ̇_A·μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeEvent {
    /// Velocity compartment the event was drawn from, if any.
    pub iv: Option<usize>,
    pub xi_dot: f64,
    pub mu: f64,
    pub delta_xi: f64,
}

impl GaugeEvent {
    pub fn new(iv: Option<usize>, xi_dot: f64, mu: f64) -> Self {
        Self {
            iv,
            xi_dot,
            mu,
            delta_xi: xi_dot * mu,
        }
    }

    /// Event for velocity compartment `iv` whose lab-frame velocity is
    /// `v_center`; the rearranged velocity is `Ξ̇_A = −v_center`.
    pub fn from_compartment(iv: usize, v_center: f64, mu: f64) -> Self {
        Self::new(Some(iv), -v_center, mu)
    }

    /// Event specified only by its displacement (unit time increment).
    pub fn from_increment(delta_xi: f64) -> Self {
        Self::new(None, delta_xi, 1.0)
    }
}

/// `e^{−i·δ_μΞ_A·𝔐̂/ħ}` as a diagonal unitary.
pub fn gauge_phase(event: &GaugeEvent, basis: &MeterBasis, hbar: f64) -> DiagonalUnitary {
    DiagonalUnitary::new(
        basis
            .eigenvalues()
            .iter()
            .map(|m| -event.delta_xi * m / hbar)
            .collect(),
    )
}

/// `e^{−(i/ħ)(δ₁ − δ₂)(𝔐_a − 𝔐_b)}`.
pub fn discrepancy_ratio(delta1: f64, delta2: f64, m_a: f64, m_b: f64, hbar: f64) -> Complex64 {
    Complex64::from_polar(1.0, -(delta1 - delta2) * (m_a - m_b) / hbar)
}

/// Indices of the two largest weights, in increasing index order. `None` if
/// fewer than two weights exceed `threshold`.
fn dominant_pair(weights: &[f64], threshold: f64) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..weights.len())
        .filter(|&n| weights[n] > threshold)
        .collect();
    // stable sort keeps lower indices first among ties
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    match order[..] {
        [a, b, ..] => Some((a.min(b), a.max(b))),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceResult {
    /// True iff the state is supported on one eigenvalue or every supported
    /// pair has a discrepancy ratio within `tol` of 1.
    pub equivalent: bool,
    /// `|⟨ψ₁|ψ₂⟩| ≥ 1 − tol` for the two phased states.
    pub global_phase_equivalent: bool,
    /// Ratio for the two largest amplitudes; 1 when there is no such pair.
    pub discrepancy: Complex64,
    pub pair: Option<(usize, usize)>,
}

pub fn equivalence_test(
    psi0: &MeterState,
    e1: &GaugeEvent,
    e2: &GaugeEvent,
    hbar: f64,
    tol: f64,
) -> Result<EquivalenceResult> {
    psi0.require_normalized("meter state")?;
    if e1.delta_xi == e2.delta_xi {
        return Err(Error::Argument(
            "events have identical increments; the comparison is vacuous".into(),
        ));
    }
    let basis = psi0.basis();
    let psi1 = gauge_phase(e1, basis, hbar).apply(psi0)?;
    let psi2 = gauge_phase(e2, basis, hbar).apply(psi0)?;
    let global = global_phase_equivalent(&psi1, &psi2, tol)?;

    let eig = basis.eigenvalues();
    let support = psi0.support(SUPPORT_THRESHOLD);
    let equivalent = support.iter().enumerate().all(|(k, &a)| {
        support[k + 1..].iter().all(|&b| {
            let r = discrepancy_ratio(e1.delta_xi, e2.delta_xi, eig[a], eig[b], hbar);
            (r - 1.0).norm() <= tol
        })
    });

    let pair = dominant_pair(&psi0.probabilities(), SUPPORT_THRESHOLD * SUPPORT_THRESHOLD);
    let discrepancy = pair.map_or(Complex64::new(1.0, 0.0), |(a, b)| {
        discrepancy_ratio(e1.delta_xi, e2.delta_xi, eig[a], eig[b], hbar)
    });
    Ok(EquivalenceResult {
        equivalent,
        global_phase_equivalent: global,
        discrepancy,
        pair,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadingOutcome {
    /// The gauge event realized by this copy.
    pub event: GaugeEvent,
    /// A second event drawn from the same ensemble, used as the comparison
    /// partner for the equivalence test.
    pub reference: GaugeEvent,
    pub equivalence_passed: bool,
    pub collapsed_index: Option<usize>,
    /// Discrepancy ratio between `event` and `reference` for the two
    /// dominant meter weights.
    pub discrepancy: Complex64,
}

impl ReadingOutcome {
    pub fn refused(&self) -> bool {
        self.collapsed_index.is_none()
    }
}

/// Runs one event reading on `state`.
///
/// A state that is not a classical mixture with respect to `observables` is
/// refused: the outcome carries no collapsed index. Otherwise a velocity
/// event is drawn from the sector weights and the meter collapses onto index
/// `n` with probability `ρ_nn` of the reduced meter density. All draws come
/// from `rng_seed` in a fixed order: event, reference event, meter index.
pub fn read_event(
    state: &CompositeState,
    observables: &[SuperselectedObservable],
    mu: f64,
    threshold: f64,
    hbar: f64,
    rng_seed: u64,
) -> Result<ReadingOutcome> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Argument(format!(
            "time increment must be positive, got {mu}"
        )));
    }
    let decohered = is_classical_mixed(state, observables, threshold)?;

    let mut rng = rng_from_seed(rng_seed);
    let weights = event_weights(state.grid())?;
    let spec = state.grid().spec();
    let draw_event = |rng: &mut _| {
        let iv = sample_index(weights.as_slice(), rng);
        GaugeEvent::from_compartment(iv, spec.v_center_of(iv), mu)
    };
    let event = draw_event(&mut rng);
    let reference = draw_event(&mut rng);

    let diagonal = reduce_to_meter(state).diagonal();
    let eig = state.basis().eigenvalues();
    let discrepancy = dominant_pair(&diagonal, SUPPORT_THRESHOLD * SUPPORT_THRESHOLD)
        .map_or(Complex64::new(1.0, 0.0), |(a, b)| {
            discrepancy_ratio(event.delta_xi, reference.delta_xi, eig[a], eig[b], hbar)
        });

    if !decohered {
        return Ok(ReadingOutcome {
            event,
            reference,
            equivalence_passed: false,
            collapsed_index: None,
            discrepancy,
        });
    }

    let n = sample_index(&diagonal, &mut rng);
    let eigenstate = MeterState::eigenstate(Arc::clone(state.basis()), n)?;
    let phased1 = gauge_phase(&event, state.basis(), hbar).apply(&eigenstate)?;
    let phased2 = gauge_phase(&reference, state.basis(), hbar).apply(&eigenstate)?;
    let equivalence_passed = global_phase_equivalent(&phased1, &phased2, DEFAULT_EQUIVALENCE_TOL)?;

    Ok(ReadingOutcome {
        event,
        reference,
        equivalence_passed,
        collapsed_index: Some(n),
        discrepancy,
    })
}

/// The post-reading composite: every sector holds the gauge-phased
/// eigenstate `|𝔐_n⟩`. Time is unchanged.
pub fn collapse(
    state: &CompositeState,
    n: usize,
    event: &GaugeEvent,
    hbar: f64,
) -> Result<CompositeState> {
    let eigenstate = MeterState::eigenstate(Arc::clone(state.basis()), n)?;
    let block = gauge_phase(event, state.basis(), hbar).apply(&eigenstate)?;
    CompositeState::from_blocks(
        Arc::clone(state.grid()),
        vec![block; state.n_sectors()],
        state.time(),
        state.coupling_time(),
        state.frame(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::{evolve, prepare_product_state, InteractionConfig};
    use crate::decoherence::generator_basis;
    use crate::sectors::{build_grid, AmplitudeProfile, CompartmentSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn basis(eigs: Vec<f64>) -> Arc<MeterBasis> {
        Arc::new(MeterBasis::new(eigs).unwrap())
    }

    fn gaussian_state(psi: &MeterState, t: f64) -> CompositeState {
        let spec = CompartmentSpec {
            q_min: -4.0,
            q_max: 4.0,
            n_q: 1,
            kappa: 1.0,
            n_v: 64,
            v_center: 0.0,
        };
        let profile = AmplitudeProfile::Gaussian {
            q0: 0.0,
            sigma_q: 1.0,
            v0: 0.0,
            sigma_v: 1.0,
        };
        let grid = Arc::new(build_grid(spec, &profile).unwrap());
        let s = prepare_product_state(psi, grid).unwrap();
        evolve(&s, t, &InteractionConfig::default()).unwrap()
    }

    #[test]
    fn event_increment() {
        let e = GaugeEvent::new(Some(3), -1.25, 0.4);
        assert_eq!(e.delta_xi, -1.25 * 0.4);
        let e = GaugeEvent::from_compartment(2, 0.75, 2.0);
        assert_eq!(e.xi_dot, -0.75);
        assert_eq!(e.delta_xi, -1.5);
    }

    #[test]
    fn gauge_phase_examples() {
        let b = MeterBasis::new(vec![1.0, 2.0]).unwrap();
        let u = gauge_phase(&GaugeEvent::from_increment(0.0), &b, 1.0);
        assert!(u.phases().iter().all(|&p| p == 0.0));

        let u = gauge_phase(&GaugeEvent::from_increment(PI), &b, 1.0);
        assert_eq!(u.phases(), &[-PI, -2.0 * PI]);

        let ints = basis(vec![-1.0, 0.0, 3.0]);
        let u = gauge_phase(&GaugeEvent::from_increment(2.0 * PI), &ints, 1.0);
        let s = MeterState::from_real(ints, &[0.6, 0.0, 0.8]).unwrap();
        let out = u.apply(&s).unwrap();
        for (a, b) in out.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn equivalence_examples() {
        let hbar = 1.0;
        let tol = DEFAULT_EQUIVALENCE_TOL;
        let e = MeterState::eigenstate(basis(vec![0.0, 1.0, 2.0]), 1).unwrap();
        let r = equivalence_test(
            &e,
            &GaugeEvent::from_increment(0.3),
            &GaugeEvent::from_increment(-2.2),
            hbar,
            tol,
        )
        .unwrap();
        assert!(r.equivalent);
        assert!(r.global_phase_equivalent);
        assert_eq!(r.pair, None);

        // (δ₁ − δ₂)(𝔐₁ − 𝔐₂) = π
        let sup = MeterState::from_real(basis(vec![1.0, 2.0]), &[0.6, 0.8]).unwrap();
        let r = equivalence_test(
            &sup,
            &GaugeEvent::from_increment(0.0),
            &GaugeEvent::from_increment(PI),
            hbar,
            tol,
        )
        .unwrap();
        assert!(!r.equivalent);
        assert!(!r.global_phase_equivalent);
        assert_abs_diff_eq!(r.discrepancy.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.discrepancy.im, 0.0, epsilon = 1e-15);

        // resonant: 2π
        let r = equivalence_test(
            &sup,
            &GaugeEvent::from_increment(0.0),
            &GaugeEvent::from_increment(2.0 * PI),
            hbar,
            tol,
        )
        .unwrap();
        assert!(r.equivalent);
        assert_abs_diff_eq!(r.discrepancy.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.discrepancy.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn equivalence_rejects_identical_events() {
        let e = MeterState::eigenstate(basis(vec![0.0, 1.0]), 0).unwrap();
        let ev = GaugeEvent::from_increment(1.0);
        assert!(matches!(
            equivalence_test(&e, &ev, &ev, 1.0, 1e-9),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn dominant_pair_ordering() {
        assert_eq!(dominant_pair(&[0.5, 0.25, 0.25], 0.0), Some((0, 1)));
        assert_eq!(dominant_pair(&[0.1, 0.2, 0.7], 0.0), Some((1, 2)));
        assert_eq!(dominant_pair(&[0.0, 1.0, 0.0], 0.0), None);
    }

    #[test]
    fn fresh_superposition_is_refused() {
        let psi =
            MeterState::from_real(basis(vec![0.0, 1.0, 2.0]), &[FRAC_1_SQRT_2, 0.5, 0.5]).unwrap();
        let s = gaussian_state(&psi, 0.0);
        let out = read_event(&s, &generator_basis(3), 1.0, 100.0, 1.0, 5).unwrap();
        assert!(out.refused());
        assert!(!out.equivalence_passed);
        assert_eq!(out.event.delta_xi, out.event.xi_dot * out.event.mu);
    }

    #[test]
    fn eigenstate_always_collapses_to_itself() {
        let psi = MeterState::eigenstate(basis(vec![0.0, 1.0, 2.0]), 2).unwrap();
        let s = gaussian_state(&psi, 3.0);
        for seed in 0..200 {
            let out = read_event(&s, &generator_basis(3), 0.5, 100.0, 1.0, seed).unwrap();
            assert_eq!(out.collapsed_index, Some(2));
            assert!(out.equivalence_passed);
            assert_abs_diff_eq!(out.discrepancy.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reading_is_deterministic_and_timeless() {
        let psi =
            MeterState::from_real(basis(vec![0.0, 1.0, 2.0]), &[FRAC_1_SQRT_2, 0.5, 0.5]).unwrap();
        let s = gaussian_state(&psi, 6.0);
        let obs = generator_basis(3);
        let a: Vec<_> = (0..50)
            .map(|k| read_event(&s, &obs, 1.0, 100.0, 1.0, k).unwrap())
            .collect();
        let b: Vec<_> = (0..50)
            .map(|k| read_event(&s, &obs, 1.0, 100.0, 1.0, k).unwrap())
            .collect();
        assert_eq!(a, b);
        assert_eq!(s.time(), 6.0);
        assert!(a.iter().all(|o| !o.refused() && o.equivalence_passed));
    }

    #[test]
    fn read_event_rejects_bad_mu() {
        let psi = MeterState::eigenstate(basis(vec![0.0, 1.0]), 0).unwrap();
        let s = gaussian_state(&psi, 0.0);
        assert!(read_event(&s, &generator_basis(2), 0.0, 100.0, 1.0, 0).is_err());
    }

    #[test]
    fn collapse_produces_phased_eigenstate() {
        let psi =
            MeterState::from_real(basis(vec![0.0, 1.0, 2.0]), &[FRAC_1_SQRT_2, 0.5, 0.5]).unwrap();
        let s = gaussian_state(&psi, 6.0);
        let ev = GaugeEvent::from_compartment(3, 0.25, 2.0);
        let c = collapse(&s, 1, &ev, 1.0).unwrap();
        assert_eq!(c.time(), s.time());
        let b = c.block(0);
        assert_abs_diff_eq!(b.amplitude(1).norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.amplitude(1).arg(), 0.5, epsilon = 1e-15);
    }

    fn off_resonance(phase: f64) -> bool {
        let k = (phase / (2.0 * PI)).round();
        (phase - 2.0 * PI * k).abs() >= 1e-6
    }

    proptest! {
        #[test]
        fn eigenstates_always_equivalent(
            d1 in -20.0f64..20.0, d2 in -20.0f64..20.0,
            m1 in -5.0f64..5.0, gap in 0.01f64..5.0, which in 0usize..2,
        ) {
            prop_assume!(d1 != d2);
            let e = MeterState::eigenstate(basis(vec![m1, m1 + gap]), which).unwrap();
            let r = equivalence_test(&e, &GaugeEvent::from_increment(d1), &GaugeEvent::from_increment(d2), 1.0, DEFAULT_EQUIVALENCE_TOL).unwrap();
            prop_assert!(r.equivalent);
            prop_assert!((r.discrepancy.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn superpositions_never_equivalent_off_resonance(
            d1 in -20.0f64..20.0, d2 in -20.0f64..20.0,
            m1 in -5.0f64..5.0, gap in 0.01f64..5.0, theta in 0.0101f64..(PI / 2.0 - 0.0101), rel in 0.0f64..(2.0 * PI),
        ) {
            prop_assume!(d1 != d2);
            prop_assume!(off_resonance((d1 - d2) * gap));
            let psi = MeterState::new(
                basis(vec![m1, m1 + gap]),
                vec![Complex64::new(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), rel)],
            ).unwrap();
            let r = equivalence_test(&psi, &GaugeEvent::from_increment(d1), &GaugeEvent::from_increment(d2), 1.0, DEFAULT_EQUIVALENCE_TOL).unwrap();
            prop_assert!(!r.equivalent);
            prop_assert!((r.discrepancy.norm() - 1.0).abs() < 1e-12);
        }
    }
}

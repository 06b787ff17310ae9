//! Coefficients checked against a separate exact-rational implementation of
//! the recurrence written directly from its defining relations.

use proptest::prelude::*;
use rabi2::model::{derive, ModelParams, Sector};
use rabi2::precision;
use rabi2::series::{compute_coefficients, exact_coefficients, ExactParams};
use rug::{Float, Rational};

/// Parameters with ω² − 16g² a perfect square: ω = c(p² + q²), 4g = 2cpq.
fn pythagorean(omega0: Rational, c: Rational, p: u32, q: u32) -> (Rational, Rational, Rational, Rational) {
    let omega = Rational::from(&c * (p * p + q * q));
    let g = Rational::from(&c * (2 * p * q)) / 4u32;
    let root = Rational::from(&c * (p * p - q * q));
    let kappa = Rational::from(&g * 2u32) / Rational::from(&omega + &root);
    (omega0, omega, g, kappa)
}

/// Q and K straight from
/// 2g(n+2)(n+1) Q_{n+2} = −[((ω−8gκ)n − 4gκ − E) Q_n + (ω₀/2) K_n]
/// 2g(n+2)(n+1) K_{n+2} =  ((ω+8gκ)n + 4gκ − E) K_n − 4ωκ K_{n−2} + (ω₀/2) Q_n.
fn naive(
    (omega0, omega, g, kappa): &(Rational, Rational, Rational, Rational),
    sector: Sector,
    energy: &Rational,
    order: usize,
) -> (Vec<Rational>, Vec<Rational>) {
    let mut q = vec![Rational::new(); order + 1];
    let mut k = vec![Rational::new(); order + 1];
    let (start, k0) = match sector {
        Sector::Plus => (0, 1),
        Sector::Minus => (0, -1),
        Sector::PlusI => (1, 1),
        Sector::MinusI => (1, -1),
    };
    q[start] = Rational::from(1);
    k[start] = Rational::from(k0);
    let gk = Rational::from(g * kappa);
    let half = Rational::from(omega0 / 2u32);
    let mut n = start;
    while n + 2 <= order {
        let nn = Rational::from(n as u32);
        let denom = Rational::from(g * 2u32) * Rational::from(((n + 2) * (n + 1)) as u32);
        let qa = ((omega - Rational::from(&gk * 8u32)) * &nn) - Rational::from(&gk * 4u32) - energy;
        let ka = ((omega + Rational::from(&gk * 8u32)) * &nn) + Rational::from(&gk * 4u32) - energy;
        let q_next = -(qa * &q[n] + Rational::from(&half * &k[n])) / &denom;
        let mut k_next = ka * &k[n] + Rational::from(&half * &q[n]);
        if n >= 2 {
            k_next -= Rational::from(omega * kappa) * 4u32 * &k[n - 2];
        }
        q[n + 2] = q_next;
        k[n + 2] = k_next / &denom;
        n += 2;
    }
    (q, k)
}

fn sector_strategy() -> impl Strategy<Value = Sector> {
    prop::sample::select(Sector::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_mode_matches_naive_recurrence(
        w0 in -30i32..30, c_num in 1u32..6, c_den in 1u32..4,
        (p, q) in (2u32..6).prop_flat_map(|p| (Just(p), 1..p)),
        e_num in -40i32..40, sector in sector_strategy(), order in 4usize..40,
    ) {
        let params = pythagorean(Rational::from((w0, 10)), Rational::from((c_num, c_den)), p, q);
        let energy = Rational::from((e_num, 8));
        let exact = ExactParams::new(params.0.clone(), params.1.clone(), params.2.clone()).unwrap();
        prop_assert_eq!(&exact.kappa, &params.3);
        let got = exact_coefficients(&exact, sector, &energy, order).unwrap();
        let (q_ref, k_ref) = naive(&params, sector, &energy, order);
        prop_assert_eq!(got.q, q_ref);
        prop_assert_eq!(got.k, k_ref);
    }

    #[test]
    fn float_mode_tracks_exact_values(
        w0 in 0i32..30, (p, q) in (2u32..6).prop_flat_map(|p| (Just(p), 1..p)),
        e_num in -40i32..40, sector in sector_strategy(),
    ) {
        let (omega0, omega, g, _) = pythagorean(Rational::from((w0, 10)), Rational::from(1), p, q);
        let model = ModelParams::new(omega0.to_f64(), omega.to_f64(), g.to_f64()).unwrap();
        let exact = ExactParams::from_model(&model).unwrap();
        prop_assert_eq!(&exact.omega, &omega);
        let energy = Rational::from((e_num, 8));
        let want = exact_coefficients(&exact, sector, &energy, 60).unwrap();
        let got = compute_coefficients(&model, &derive(&model), sector, energy.to_f64(), 60).unwrap();
        // Exact cancellations leave rounding residue, so errors are measured
        // against the largest coefficient so far in the same series.
        for (floats, exact) in [(&got.q, &want.q), (&got.k, &want.k)] {
            let mut scale = precision::float(0);
            for (a, b) in floats.iter().zip(exact) {
                let reference = precision::float(b);
                let magnitude = Float::with_val(precision::bits(), reference.abs_ref());
                if magnitude > scale {
                    scale = magnitude;
                }
                let diff = Float::with_val(precision::bits(), a - &reference).abs();
                prop_assert!(diff <= Float::with_val(precision::bits(), &scale * 1e-60f64), "{} vs {}", a, b);
            }
        }
    }
}

#[test]
fn frozen_coefficients_at_pythagorean_point() {
    // ω₀ = 1, ω = 2, g = 0.3: κ = 1/6, E = 1/2, sector G₋.
    let exact = ExactParams::new(Rational::from(1), Rational::from(2), Rational::from((3, 10))).unwrap();
    assert_eq!(exact.kappa, Rational::from((1, 6)));
    let c = exact_coefficients(&exact, Sector::Minus, &Rational::from((1, 2)), 4).unwrap();
    // Q₂ = −((−0.2 − 0.5)·1 + 0.5·(−1))/1.2 = 1, K₂ = ((0.2 − 0.5)(−1) + 0.5)/1.2 = 2/3.
    assert_eq!(c.q[2], 1);
    assert_eq!(c.k[2], Rational::from((2, 3)));
}

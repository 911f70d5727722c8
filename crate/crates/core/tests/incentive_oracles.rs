//! Independent oracles for the incentive math: a geometric-series closed
//! form for the outcome, symbolic polynomial differentiation for the
//! curvature probe, and largest-remainder conservation checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use rnft_core::incentive::{
    allocate_largest_remainder, descending_rate, hessian_probe, income_of, initial_price,
    interest_rate, outcome_of, payment_depth, Curvature, IncentiveParams, UtilitySurface,
    WeightVector, DEFAULT_HESSIAN_STEP, MINOR_UNITS_PER_COIN,
};

/// Closed-form outcome `lambda*p0 + (1+r)*((1+r)^d - 1)/r * p0*(1-lambda)/d`,
/// evaluated through `ln_1p`/`exp_m1` so it stays accurate for tiny rates.
fn outcome_closed_form(p0: f64, lambda: f64, d: u32, r: f64) -> f64 {
    if d == 0 || r == 0.0 {
        return p0;
    }
    let installment = p0 * (1.0 - lambda) / d as f64;
    let geometric = (1.0 + r) * f64::exp_m1(d as f64 * f64::ln_1p(r)) / r;
    lambda * p0 + geometric * installment
}

/// Params whose interest rate is exactly `r`: full cross weight and
/// `alpha = r`, since `r = alpha * Σ w_i = alpha * 1`.
fn params_with_rate(p0: f64, lambda: f64, g: f64, r: f64) -> (IncentiveParams, WeightVector) {
    let params = IncentiveParams {
        base_expense: p0,
        lambda,
        alpha: r,
        beta: 1.0,
        g,
        k_scale: 10.0,
    };
    let weights = WeightVector::new(0.0, vec![1.0]).unwrap();
    (params, weights)
}

#[test]
fn iterative_outcome_matches_closed_form_over_random_draws() {
    let mut rng = ChaCha12Rng::seed_from_u64(31337);
    for _ in 0..1000 {
        let p0 = rng.gen_range(1.0..1000.0);
        let lambda = rng.gen_range(0.0..1.0);
        let g = rng.gen_range(1.0..50.0);
        let r = rng.gen_range(0.0..1.0);
        let (params, weights) = params_with_rate(p0, lambda, g, r);
        assert_eq!(interest_rate(&params, &weights), r);

        let iterative = outcome_of(&params, &weights);
        let closed = outcome_closed_form(p0, lambda, payment_depth(&params), r);
        let tolerance = 1e-12 * closed.abs().max(1.0);
        assert!(
            (iterative - closed).abs() <= tolerance,
            "iterative {iterative} vs closed form {closed} at p0={p0} lambda={lambda} g={g} r={r}"
        );
    }
}

#[test]
fn zero_interest_outcome_is_exactly_p0() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let p0 = rng.gen_range(1.0..1000.0);
        let lambda = rng.gen_range(0.0..=1.0);
        let g = rng.gen_range(1.0..50.0);
        let (params, weights) = params_with_rate(p0, lambda, g, 0.0);
        assert_eq!(outcome_of(&params, &weights), p0);
    }
}

#[test]
fn share_vectors_conserve_the_price_exactly() {
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    let params = IncentiveParams {
        base_expense: 100.0,
        lambda: 0.5,
        alpha: 0.5,
        beta: 1.0,
        g: 4.0,
        k_scale: 10.0,
    };
    for case in 0..2000 {
        let weights = match case {
            0 => WeightVector::new(1.0 / 3.0, vec![1.0 / 3.0, 1.0 / 3.0]).unwrap(),
            1 => {
                let w = 1.0 / 7.0;
                WeightVector::new(w, vec![w; 6]).unwrap()
            }
            2 => WeightVector::from_cross(&[1.0 / 7.0; 7]).unwrap(),
            _ => {
                let n = rng.gen_range(0..=8);
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let scale = rng.gen_range(0.0..=1.0) / raw.iter().sum::<f64>().max(1.0);
                let cross: Vec<f64> = raw.iter().map(|w| w * scale).collect();
                WeightVector::from_cross(&cross).unwrap()
            }
        };
        let price = initial_price(&params, &weights);
        assert_eq!(price.total_minor, 100 * MINOR_UNITS_PER_COIN);
        assert_eq!(
            price.shares_minor.iter().sum::<u64>(),
            price.total_minor,
            "weights {:?}",
            weights.full()
        );
        assert_eq!(price.shares_minor.len(), weights.full().len());
    }
}

#[test]
fn largest_remainder_handles_awkward_totals() {
    // Thirds of a total not divisible by three.
    let shares = allocate_largest_remainder(100, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    assert_eq!(shares.iter().sum::<u64>(), 100);
    assert_eq!(shares, vec![34, 33, 33]);

    let shares = allocate_largest_remainder(1, &[0.5, 0.5]);
    assert_eq!(shares.iter().sum::<u64>(), 1);

    // Very large totals where float quota drift appears.
    let total = 10_000_000 * MINOR_UNITS_PER_COIN;
    let shares = allocate_largest_remainder(total, &[1.0 / 7.0; 7]);
    assert_eq!(shares.iter().sum::<u64>(), total);
}

/// Symbolic oracle: coefficient-level polynomial second derivative,
/// evaluated by Horner's rule.
fn poly_second_derivative_at(coeffs: &[f64], x: f64) -> f64 {
    let mut deriv = Vec::new();
    for (power, coeff) in coeffs.iter().enumerate().skip(2) {
        deriv.push(coeff * power as f64 * (power as f64 - 1.0));
    }
    // deriv[i] is the coefficient of x^i.
    deriv.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[test]
fn hessian_matches_symbolic_polynomial_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(4242);
    for _ in 0..200 {
        let lambda = rng.gen_range(0.05..0.9);
        let d_target = rng.gen_range(2u32..=10);
        let g = (d_target as f64 + rng.gen_range(0.0..0.9)) / (1.0 - lambda);
        let w0 = rng.gen_range(0.05..0.9);
        let sigma_target = rng.gen_range(0.25..1.0);
        let beta = 1.0 / sigma_target - w0;
        let params = IncentiveParams {
            base_expense: rng.gen_range(10.0..500.0),
            lambda,
            alpha: rng.gen_range(0.1..1.0),
            beta,
            g,
            k_scale: rng.gen_range(1.0..20.0),
        };
        let weights = WeightVector::new(w0, vec![1.0 - w0]).unwrap();
        let d = payment_depth(&params);
        assert_eq!(d, d_target);
        let counts: Vec<u64> = (0..d).map(|_| rng.gen_range(1..=20)).collect();

        let probe = hessian_probe(&params, &weights, &counts, DEFAULT_HESSIAN_STEP).unwrap();
        let sigma = descending_rate(&params, &weights).unwrap();
        let r = interest_rate(&params, &weights);

        // Income as a polynomial in sigma: coefficient of sigma^j is k*c_j.
        let mut income_coeffs = vec![0.0; d as usize + 1];
        for (j, count) in counts.iter().enumerate() {
            income_coeffs[j + 1] = params.k_scale * *count as f64;
        }
        let a_oracle = poly_second_derivative_at(&income_coeffs, sigma);

        // Outcome as a polynomial in t = 1 + r; d²U/dr² = -d²O/dt².
        let installment = params.base_expense * (1.0 - lambda) / d as f64;
        let mut outcome_coeffs = vec![0.0; d as usize + 1];
        outcome_coeffs[0] = lambda * params.base_expense;
        for j in 1..=d as usize {
            outcome_coeffs[j] = installment;
        }
        let c_oracle = -poly_second_derivative_at(&outcome_coeffs, 1.0 + r);

        let tol = |v: f64| 1e-9 * v.abs().max(1.0);
        assert!((probe.d2u_dsigma2 - a_oracle).abs() <= tol(a_oracle));
        assert!((probe.d2u_dr2 - c_oracle).abs() <= tol(c_oracle));
        assert_eq!(probe.d2u_dsigma_dr, 0.0);

        // Sign structure and the non-convexity verdict.
        assert!(probe.d2u_dsigma2 > 0.0);
        assert!(probe.d2u_dr2 < 0.0);
        assert!(probe.det < 0.0);
        assert!(probe.fd_det < 0.0);
        assert_eq!(probe.classification, Curvature::NonConvex);
    }
}

#[test]
fn utility_monotone_in_counts_and_antitone_in_rate() {
    let mut rng = ChaCha12Rng::seed_from_u64(2025);
    for _ in 0..1000 {
        let d = rng.gen_range(1u32..=10);
        let surface = UtilitySurface {
            k: rng.gen_range(1.0..20.0),
            counts: (0..d).map(|_| rng.gen_range(0..50)).collect(),
            p0: rng.gen_range(10.0..500.0),
            lambda: rng.gen_range(0.0..0.95),
            d,
        };
        let sigma = rng.gen_range(0.25..=1.0);
        let r = rng.gen_range(0.0..0.5);
        let base = surface.utility(sigma, r);

        // Raising any single referrer count strictly raises utility.
        let round = rng.gen_range(0..d as usize);
        let mut more = surface.clone();
        more.counts[round] += rng.gen_range(1..10);
        assert!(more.utility(sigma, r) > base);

        // Doubling every count strictly raises utility when any is positive.
        if surface.counts.iter().any(|c| *c > 0) {
            let mut doubled = surface.clone();
            for c in &mut doubled.counts {
                *c *= 2;
            }
            assert!(doubled.utility(sigma, r) > base);
        }

        // Raising the rate strictly lowers utility.
        let dr = rng.gen_range(0.01..0.5);
        assert!(surface.utility(sigma, r + dr) < base);

        // Income is monotone in sigma for fixed counts.
        if surface.counts.iter().any(|c| *c > 0) {
            let ds = rng.gen_range(0.01..0.3);
            assert!(surface.income(sigma + ds) > surface.income(sigma));
        }
    }
}

#[test]
fn income_is_linear_in_each_count() {
    let params = IncentiveParams {
        base_expense: 100.0,
        lambda: 0.5,
        alpha: 0.2,
        beta: 1.5,
        g: 6.0,
        k_scale: 10.0,
    };
    let weights = WeightVector::new(0.5, vec![0.5]).unwrap();
    let d = payment_depth(&params) as usize;
    let base: Vec<u64> = vec![3; d];
    let (_, total_base) = income_of(&params, &weights, &base).unwrap();
    for round in 0..d {
        let mut bumped = base.clone();
        bumped[round] += 5;
        let (schedule, total) = income_of(&params, &weights, &bumped).unwrap();
        let sigma = descending_rate(&params, &weights).unwrap();
        let expected_delta = params.k_scale * sigma.powi(round as i32 + 1) * 5.0;
        assert!((total - total_base - expected_delta).abs() < 1e-9);
        assert!((schedule[round]
            - params.k_scale * sigma.powi(round as i32 + 1) * bumped[round] as f64)
            .abs()
            < 1e-12);
    }
}

#[test]
fn utility_decomposition_reconstructs_from_raw_parts() {
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    for _ in 0..200 {
        let lambda = rng.gen_range(0.0..1.0);
        let params = IncentiveParams {
            base_expense: rng.gen_range(10.0..200.0),
            lambda,
            alpha: rng.gen_range(0.0..1.0),
            beta: rng.gen_range(1.0..3.0),
            g: rng.gen_range(1.0..20.0),
            k_scale: rng.gen_range(1.0..20.0),
        };
        let w0 = rng.gen_range(0.0..1.0);
        let weights = WeightVector::new(w0, vec![1.0 - w0]).unwrap();
        let d = payment_depth(&params);
        let counts: Vec<u64> = (0..d).map(|_| rng.gen_range(0..30)).collect();

        let outcome = outcome_of(&params, &weights);
        let (schedule, income) = income_of(&params, &weights, &counts).unwrap();
        assert_eq!(schedule.iter().sum::<f64>(), income);
        let utility = income - outcome;

        let surface = UtilitySurface::from_params(&params, &counts);
        let sigma = descending_rate(&params, &weights).unwrap();
        let r = interest_rate(&params, &weights);
        let via_surface = surface.utility(sigma, r);
        // The surface evaluates the same polynomials; only the exact r = 0
        // branch of the outcome may differ at the last bit.
        assert!((via_surface - utility).abs() <= 1e-9 * utility.abs().max(1.0));
    }
}

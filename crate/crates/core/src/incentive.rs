//! The incentive engine: pure payoff mathematics for rNFT participants.
//!
//! A token's mint price `p0` equals the base expense and is split across the
//! self-reference weight `w0` and the cross-reference weights, settled in
//! integer minor units with largest-remainder rounding so the shares always
//! sum to `p0` exactly. Paying a fraction `lambda` up front defers the rest
//! over `d = g(1-lambda)` rounds at compound interest `r = alpha * Σ w_i`,
//! while income arrives per round as `k * sigma^j * |I_j|` with descending
//! rate `sigma = 1/(w0+beta)`. Utility is income minus outcome.
//!
//! All functions here are pure; the registry is only consulted by
//! [`payoff_of`] to reconstruct weights and referrer counts.

use serde::{Deserialize, Serialize};

use crate::graph::{GraphError, ReferenceGraph, TokenId};

/// Settlement resolution: minor units per currency unit.
pub const MINOR_UNITS_PER_COIN: u64 = 1_000_000;

/// Default finite-difference step for the curvature probe.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-4;

/// Relative tolerance for finite-difference vs analytic agreement.
pub const HESSIAN_AGREEMENT_TOLERANCE: f64 = 1e-6;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// The scalar knobs of the incentive model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncentiveParams {
    /// Mandatory base expense for releasing a token; identified with `p0`.
    #[serde(rename = "O_hat")]
    pub base_expense: f64,
    /// Fraction of `p0` paid up front, in `[0, 1]`.
    pub lambda: f64,
    /// Interest tuning knob, in `[0, 1]`.
    pub alpha: f64,
    /// Descending-rate offset; `w0 + beta >= 1` must hold per token.
    pub beta: f64,
    /// Depth scale: `d = g * (1 - lambda)`.
    pub g: f64,
    /// Income scale per referrer.
    pub k_scale: f64,
}

impl IncentiveParams {
    pub fn validate(&self) -> Result<()> {
        let check = |cond: bool, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(IncentiveError::InvalidParams(msg.to_string()))
            }
        };
        check(
            self.base_expense.is_finite() && self.base_expense > 0.0,
            "O_hat must be positive",
        )?;
        check(
            (0.0..=1.0).contains(&self.lambda),
            "lambda must be in [0, 1]",
        )?;
        check((0.0..=1.0).contains(&self.alpha), "alpha must be in [0, 1]")?;
        check(self.beta.is_finite() && self.beta > 0.0, "beta must be positive")?;
        check(self.g.is_finite() && self.g > 0.0, "g must be positive")?;
        check(
            self.k_scale.is_finite() && self.k_scale > 0.0,
            "k_scale must be positive",
        )
    }
}

/// A full profit-weight vector: the self-reference weight plus one cross
/// weight per referring edge. Entries are non-negative and sum to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w0: f64,
    cross: Vec<f64>,
}

impl WeightVector {
    /// Builds the vector from cross weights alone; the self weight is the
    /// residual `1 - Σ`.
    pub fn from_cross(cross: &[f64]) -> Result<Self> {
        for w in cross {
            if !w.is_finite() || *w < 0.0 {
                return Err(IncentiveError::InvalidWeights(format!(
                    "cross weight {w} is not a non-negative finite number"
                )));
            }
        }
        let sum: f64 = cross.iter().sum();
        if sum > 1.0 + WEIGHT_TOLERANCE {
            return Err(IncentiveError::InvalidWeights(format!(
                "cross weights sum to {sum} > 1"
            )));
        }
        Ok(Self {
            w0: (1.0 - sum).max(0.0),
            cross: cross.to_vec(),
        })
    }

    /// Builds the vector from explicit parts, which must sum to 1.
    pub fn new(w0: f64, cross: Vec<f64>) -> Result<Self> {
        if !w0.is_finite() || w0 < 0.0 {
            return Err(IncentiveError::InvalidWeights(format!(
                "self weight {w0} is not a non-negative finite number"
            )));
        }
        let probe = Self::from_cross(&cross)?;
        let total = w0 + probe.cross.iter().sum::<f64>();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(IncentiveError::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { w0, cross })
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn cross(&self) -> &[f64] {
        &self.cross
    }

    /// `[w0, w1, ..., wn]`.
    pub fn full(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cross.len() + 1);
        out.push(self.w0);
        out.extend_from_slice(&self.cross);
        out
    }
}

/// Everything computed for one token's payoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PayoffBreakdown {
    pub p0: f64,
    pub r: f64,
    pub sigma: f64,
    pub d: u32,
    pub outcome: f64,
    pub income_schedule: Vec<f64>,
    pub income: f64,
    pub utility: f64,
}

/// The settled initial price: total and per-weight shares, in minor units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceShares {
    pub total_minor: u64,
    /// One share per entry of the full weight vector `[w0, w1, ..., wn]`.
    pub shares_minor: Vec<u64>,
}

/// Curvature classification of the payoff surface at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curvature {
    ConvexCandidate,
    NonConvex,
    Degenerate,
}

/// Second partial derivatives of utility in the free coordinates
/// `(sigma, r)`, both analytic and by central finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianProbe {
    pub d2u_dsigma2: f64,
    pub d2u_dsigma_dr: f64,
    pub d2u_dr2: f64,
    pub fd_d2u_dsigma2: f64,
    pub fd_d2u_dsigma_dr: f64,
    pub fd_d2u_dr2: f64,
    /// Analytic determinant `A*C - B^2`.
    pub det: f64,
    /// Finite-difference determinant.
    pub fd_det: f64,
    pub classification: Curvature,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IncentiveError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("sigma out of range: w0 {w0} + beta {beta} < 1")]
    SigmaOutOfRange { w0: f64, beta: f64 },
    #[error("expected {expected} referrer counts (one per round), got {actual}")]
    CountShapeMismatch { expected: u32, actual: usize },
    #[error("finite differences disagree with analytic {which}: {fd} vs {analytic}")]
    StepTooLarge {
        which: &'static str,
        fd: f64,
        analytic: f64,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl IncentiveError {
    pub fn code(&self) -> &'static str {
        match self {
            IncentiveError::InvalidWeights(_) => "InvalidWeights",
            IncentiveError::SigmaOutOfRange { .. } => "SigmaOutOfRange",
            IncentiveError::CountShapeMismatch { .. } => "CountShapeMismatch",
            IncentiveError::StepTooLarge { .. } => "StepTooLarge",
            IncentiveError::InvalidParams(_) => "InvalidParams",
            IncentiveError::Graph(e) => e.code(),
        }
    }
}

type Result<T> = std::result::Result<T, IncentiveError>;

/// Compound interest on deferred installments: `r = alpha * Σ cross weights`.
/// Pure self-reference earns rate 0 exactly.
pub fn interest_rate(params: &IncentiveParams, weights: &WeightVector) -> f64 {
    // `+ 0.0` normalizes the -0.0 that an empty sum produces.
    params.alpha * weights.cross.iter().sum::<f64>() + 0.0
}

/// Per-round geometric income decay: `sigma = 1 / (w0 + beta)`, valid only
/// when `w0 + beta >= 1` so that `sigma` lands in `(0, 1]`.
pub fn descending_rate(params: &IncentiveParams, weights: &WeightVector) -> Result<f64> {
    let denom = weights.w0 + params.beta;
    if denom < 1.0 {
        return Err(IncentiveError::SigmaOutOfRange {
            w0: weights.w0,
            beta: params.beta,
        });
    }
    Ok(1.0 / denom)
}

/// Number of deferred rounds: 0 when fully paid up front, otherwise
/// `floor(g * (1 - lambda))` with a minimum of one round.
pub fn payment_depth(params: &IncentiveParams) -> u32 {
    if params.lambda >= 1.0 {
        return 0;
    }
    let raw = (params.g * (1.0 - params.lambda)).floor();
    if raw < 1.0 {
        1
    } else if raw >= u32::MAX as f64 {
        u32::MAX
    } else {
        raw as u32
    }
}

/// Converts currency units to minor units.
pub fn to_minor_units(amount: f64) -> u64 {
    (amount * MINOR_UNITS_PER_COIN as f64).round() as u64
}

/// Splits `total` minor units across `weights` by largest remainder: floors
/// first, then one extra unit each to the largest fractional remainders (ties
/// to the lower index). The shares always sum to `total` exactly.
pub fn allocate_largest_remainder(total: u64, weights: &[f64]) -> Vec<u64> {
    if weights.is_empty() {
        return Vec::new();
    }
    let mut shares: Vec<u64> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    for (i, w) in weights.iter().enumerate() {
        let quota = (w * total as f64).clamp(0.0, total as f64);
        let floor = quota.floor();
        shares.push(floor as u64);
        remainders.push((i, quota - floor));
    }
    let assigned: u64 = shares.iter().sum();
    let mut deficit = total as i64 - assigned as i64;
    // Largest remainder first; ties broken by index.
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cursor = 0;
    while deficit > 0 {
        shares[remainders[cursor % remainders.len()].0] += 1;
        deficit -= 1;
        cursor += 1;
    }
    // Float drift can overshoot for very large totals; take units back from
    // the smallest remainders.
    let mut cursor = remainders.len();
    while deficit < 0 {
        cursor = if cursor == 0 { remainders.len() } else { cursor } - 1;
        let idx = remainders[cursor].0;
        if shares[idx] > 0 {
            shares[idx] -= 1;
            deficit += 1;
        }
    }
    shares
}

/// The one-off initial price `p0` and its distribution across the full
/// weight vector, settled exactly in minor units.
pub fn initial_price(params: &IncentiveParams, weights: &WeightVector) -> PriceShares {
    let total_minor = to_minor_units(params.base_expense);
    let shares_minor = allocate_largest_remainder(total_minor, &weights.full());
    PriceShares {
        total_minor,
        shares_minor,
    }
}

/// Total cost of minting: the up-front part plus `d` deferred installments at
/// compound interest, `lambda*p0 + Σ_{j=1..d} (1+r)^j * p0*(1-lambda)/d`.
/// At `r = 0` the installments sum to the remainder exactly, so the outcome
/// reduces to `p0`.
pub fn outcome_of(params: &IncentiveParams, weights: &WeightVector) -> f64 {
    let p0 = params.base_expense;
    let r = interest_rate(params, weights);
    let d = payment_depth(params);
    outcome_at(p0, params.lambda, d, r)
}

fn outcome_at(p0: f64, lambda: f64, d: u32, r: f64) -> f64 {
    if d == 0 {
        // Fully paid up front.
        return p0;
    }
    if r == 0.0 {
        // Zero-interest conservation, exact by the algebraic identity.
        return p0;
    }
    let installment = p0 * (1.0 - lambda) / d as f64;
    let mut total = lambda * p0;
    for j in 1..=d {
        total += (1.0 + r).powi(j as i32) * installment;
    }
    total
}

fn income_schedule_at(k: f64, sigma: f64, counts: &[u64]) -> (Vec<f64>, f64) {
    let mut schedule = Vec::with_capacity(counts.len());
    let mut total = 0.0;
    for (j, count) in counts.iter().enumerate() {
        let term = k * sigma.powi(j as i32 + 1) * *count as f64;
        schedule.push(term);
        total += term;
    }
    (schedule, total)
}

/// Per-round income `k * sigma^j * counts[j-1]` for `j = 1..=d`, plus the
/// accumulated total. `counts` must hold exactly one entry per round.
pub fn income_of(
    params: &IncentiveParams,
    weights: &WeightVector,
    referrer_counts: &[u64],
) -> Result<(Vec<f64>, f64)> {
    let d = payment_depth(params);
    if referrer_counts.len() != d as usize {
        return Err(IncentiveError::CountShapeMismatch {
            expected: d,
            actual: referrer_counts.len(),
        });
    }
    if d == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let sigma = descending_rate(params, weights)?;
    Ok(income_schedule_at(params.k_scale, sigma, referrer_counts))
}

/// Full payoff pipeline for a token in the registry: weights from its
/// profit-sharing list, referrer counts from the rounds after its mint,
/// utility as income minus outcome.
pub fn payoff_of(
    graph: &ReferenceGraph,
    token: TokenId,
    params: &IncentiveParams,
) -> Result<PayoffBreakdown> {
    params.validate()?;
    let record = graph.get(token)?;
    let weights = WeightVector::from_cross(&record.relationship.profit_sharing)?;
    let r = interest_rate(params, &weights);
    let sigma = descending_rate(params, &weights)?;
    let d = payment_depth(params);
    let counts = graph.referrer_counts_by_height(token, d)?;
    let outcome = outcome_of(params, &weights);
    let (income_schedule, income) = income_of(params, &weights, &counts)?;
    Ok(PayoffBreakdown {
        p0: params.base_expense,
        r,
        sigma,
        d,
        outcome,
        income_schedule,
        income,
        utility: income - outcome,
    })
}

/// Utility as a function of the free coordinates `(sigma, r)`, decoupled from
/// the formulas that elsewhere derive them from weights. The income part
/// depends only on `sigma` and the outcome part only on `r`, so differencing
/// one coordinate cancels the other part exactly.
#[derive(Clone, Debug)]
pub struct UtilitySurface {
    pub k: f64,
    pub counts: Vec<u64>,
    pub p0: f64,
    pub lambda: f64,
    pub d: u32,
}

impl UtilitySurface {
    pub fn from_params(params: &IncentiveParams, counts: &[u64]) -> Self {
        Self {
            k: params.k_scale,
            counts: counts.to_vec(),
            p0: params.base_expense,
            lambda: params.lambda,
            d: payment_depth(params),
        }
    }

    pub fn income(&self, sigma: f64) -> f64 {
        income_schedule_at(self.k, sigma, &self.counts).1
    }

    pub fn outcome(&self, r: f64) -> f64 {
        if self.d == 0 {
            return self.p0;
        }
        let installment = self.p0 * (1.0 - self.lambda) / self.d as f64;
        let mut total = self.lambda * self.p0;
        for j in 1..=self.d {
            total += (1.0 + r).powi(j as i32) * installment;
        }
        total
    }

    pub fn utility(&self, sigma: f64, r: f64) -> f64 {
        self.income(sigma) - self.outcome(r)
    }
}

fn fd_agrees(fd: f64, analytic: f64) -> bool {
    (fd - analytic).abs() <= HESSIAN_AGREEMENT_TOLERANCE * analytic.abs().max(1.0)
}

/// Double-float ("double-double") arithmetic for the finite-difference
/// stencils. A second difference divides by `h^2 = 1e-8`, which would amplify
/// plain f64 cancellation noise (`eps * |U| / h^2`) past the agreement
/// tolerance; carrying a compensation term keeps the stencil numerators
/// accurate to the truncation error of the stencil itself.
mod dd {
    #[derive(Clone, Copy, Debug)]
    pub struct Dd {
        hi: f64,
        lo: f64,
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd {
            hi: s,
            lo: (hi - s) + lo,
        }
    }

    impl Dd {
        pub fn from_f64(v: f64) -> Dd {
            Dd { hi: v, lo: 0.0 }
        }

        pub fn to_f64(self) -> f64 {
            self.hi + self.lo
        }

        pub fn add(self, other: Dd) -> Dd {
            let s = two_sum(self.hi, other.hi);
            renorm(s.hi, s.lo + self.lo + other.lo)
        }

        pub fn sub(self, other: Dd) -> Dd {
            self.add(Dd {
                hi: -other.hi,
                lo: -other.lo,
            })
        }

        pub fn mul(self, other: Dd) -> Dd {
            let p = two_prod(self.hi, other.hi);
            renorm(p.hi, p.lo + self.hi * other.lo + self.lo * other.hi)
        }

        pub fn scale(self, factor: f64) -> Dd {
            self.mul(Dd::from_f64(factor))
        }
    }

    /// Horner evaluation of a polynomial with f64 coefficients at a Dd point.
    pub fn poly_eval(coeffs: &[f64], x: Dd) -> Dd {
        let mut acc = Dd::from_f64(0.0);
        for c in coeffs.iter().rev() {
            acc = acc.mul(x).add(Dd::from_f64(*c));
        }
        acc
    }
}

/// Probes the curvature of the payoff surface at the point `(sigma, r)`
/// implied by the weights. Second partials are computed both analytically
/// and by central finite differences; disagreement beyond the pinned
/// tolerance is reported as `StepTooLarge`. With fewer than two deferred
/// rounds the surface is linear and the probe reports `Degenerate`.
pub fn hessian_probe(
    params: &IncentiveParams,
    weights: &WeightVector,
    referrer_counts: &[u64],
    step: f64,
) -> Result<HessianProbe> {
    params.validate()?;
    if !(step > 0.0) {
        return Err(IncentiveError::InvalidParams(
            "finite-difference step must be positive".into(),
        ));
    }
    let d = payment_depth(params);
    if referrer_counts.len() != d as usize {
        return Err(IncentiveError::CountShapeMismatch {
            expected: d,
            actual: referrer_counts.len(),
        });
    }
    let sigma = descending_rate(params, weights)?;
    let r = interest_rate(params, weights);

    // Analytic second partials. The j = 1 terms vanish under j*(j-1).
    let mut a = 0.0;
    let mut c = 0.0;
    if d >= 2 {
        let installment = params.base_expense * (1.0 - params.lambda) / d as f64;
        for j in 2..=d {
            let jf = j as f64;
            a += params.k_scale
                * jf
                * (jf - 1.0)
                * sigma.powi(j as i32 - 2)
                * referrer_counts[j as usize - 1] as f64;
            c -= jf * (jf - 1.0) * (1.0 + r).powi(j as i32 - 2) * installment;
        }
    }
    let b = 0.0;

    if d < 2 {
        return Ok(HessianProbe {
            d2u_dsigma2: 0.0,
            d2u_dsigma_dr: 0.0,
            d2u_dr2: 0.0,
            fd_d2u_dsigma2: 0.0,
            fd_d2u_dsigma_dr: 0.0,
            fd_d2u_dr2: 0.0,
            det: 0.0,
            fd_det: 0.0,
            classification: Curvature::Degenerate,
        });
    }

    // Utility as two polynomials with fixed f64 coefficients: income in
    // sigma, outcome in t = 1 + r.
    let mut income_coeffs = vec![0.0; d as usize + 1];
    for (j, count) in referrer_counts.iter().enumerate() {
        income_coeffs[j + 1] = params.k_scale * *count as f64;
    }
    let mut outcome_coeffs = vec![params.base_expense * (1.0 - params.lambda) / d as f64; d as usize + 1];
    outcome_coeffs[0] = params.lambda * params.base_expense;
    let u = |s: dd::Dd, rr: dd::Dd| -> dd::Dd {
        let t = dd::Dd::from_f64(1.0).add(rr);
        dd::poly_eval(&income_coeffs, s).sub(dd::poly_eval(&outcome_coeffs, t))
    };

    // Evaluation points, with the spacings the grid actually realized.
    let h = step;
    let (sp, sm) = (sigma + h, sigma - h);
    let (hp_s, hm_s) = (sp - sigma, sigma - sm);
    let (rp, rm) = (r + h, r - h);
    let (hp_r, hm_r) = (rp - r, r - rm);
    let at = |s: f64, rr: f64| u(dd::Dd::from_f64(s), dd::Dd::from_f64(rr));

    // Unequal-spacing central second difference:
    // f'' ~ 2 * (hm*f(x+hp) - (hp+hm)*f(x) + hp*f(x-hm)) / (hp*hm*(hp+hm)).
    let fd_a = at(sp, r)
        .scale(hm_s)
        .sub(at(sigma, r).scale(hp_s + hm_s))
        .add(at(sm, r).scale(hp_s))
        .to_f64()
        * 2.0
        / (hp_s * hm_s * (hp_s + hm_s));
    let fd_c = at(sigma, rp)
        .scale(hm_r)
        .sub(at(sigma, r).scale(hp_r + hm_r))
        .add(at(sigma, rm).scale(hp_r))
        .to_f64()
        * 2.0
        / (hp_r * hm_r * (hp_r + hm_r));
    let fd_b = at(sp, rp)
        .sub(at(sp, rm))
        .sub(at(sm, rp))
        .add(at(sm, rm))
        .to_f64()
        / ((hp_s + hm_s) * (hp_r + hm_r));

    for (which, fd, analytic) in [
        ("d2u/dsigma2", fd_a, a),
        ("d2u/dsigma dr", fd_b, b),
        ("d2u/dr2", fd_c, c),
    ] {
        if !fd_agrees(fd, analytic) {
            return Err(IncentiveError::StepTooLarge { which, fd, analytic });
        }
    }

    let det = a * c - b * b;
    let classification = if det < 0.0 {
        Curvature::NonConvex
    } else if det == 0.0 {
        Curvature::Degenerate
    } else {
        Curvature::ConvexCandidate
    };
    Ok(HessianProbe {
        d2u_dsigma2: a,
        d2u_dsigma_dr: b,
        d2u_dr2: c,
        fd_d2u_dsigma2: fd_a,
        fd_d2u_dsigma_dr: fd_b,
        fd_d2u_dr2: fd_c,
        det,
        fd_det: fd_a * fd_c - fd_b * fd_b,
        classification,
    })
}

/// Header for the payoff report rows.
pub const PAYOFF_CSV_HEADER: &str = "tokenId,p0,r,sigma,d,outcome,income,utility";

/// One CSV row per the payoff report format: '.' decimal, no separators.
pub fn payoff_csv_row(token: TokenId, payoff: &PayoffBreakdown) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        token,
        payoff.p0,
        payoff.r,
        payoff.sigma,
        payoff.d,
        payoff.outcome,
        payoff.income,
        payoff.utility
    )
}

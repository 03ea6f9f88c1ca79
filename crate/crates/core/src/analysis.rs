//! Closed-form security quantities with exact big-integer combinatorics.
//!
//! The three bounds of interest are the forgery probability `2^-k`, the
//! intercept-resend evasion probability `0.75^d`, and the subset-guessing
//! success probability
//!
//! ```text
//! C(d, g-k) / C(k+d, g) * (3/4)^(g-k)
//! ```
//!
//! for an eavesdropper measuring `g` of the `k + d` stream slots. Everything
//! combinatorial is computed over arbitrary-precision rationals with the
//! factor 3/4 kept exact, so identities hold as rational equalities rather
//! than approximately; floats appear only as a final conversion. A brute
//! force subset enumeration validates the closed form on small instances.

use alloc::string::String;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("instance too large: k+d = {got} exceeds enumeration bound {limit}")]
    TooLarge { limit: u32, got: u32 },
}

fn domain(msg: &str) -> AnalysisError {
    AnalysisError::Domain(String::from(msg))
}

/// An exact probability: a big rational in lowest terms plus its nearest
/// binary64 rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactProb {
    ratio: BigRational,
}

impl ExactProb {
    pub fn from_ratio(ratio: BigRational) -> Self {
        debug_assert!(!ratio.is_negative());
        Self { ratio }
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.ratio
    }

    pub fn numerator(&self) -> &BigInt {
        self.ratio.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.ratio.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.ratio.to_f64().unwrap_or(f64::NAN)
    }
}

impl core::fmt::Display for ExactProb {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}/{}", self.ratio.numer(), self.ratio.denom())
    }
}

/// Binomial coefficient C(n, r) as an exact big integer.
pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn factorial(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 2..=n {
        acc *= BigUint::from(i);
    }
    acc
}

/// (3/4)^e as an exact rational.
fn three_quarters_pow(e: u32) -> BigRational {
    BigRational::new(BigInt::from(3u8).pow(e), BigInt::from(4u8).pow(e))
}

fn big_ratio(numer: BigUint, denom: BigUint) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Probability `2^-k` of forging a `k`-bit authentication token blind.
pub fn forgery_prob(k: u32) -> f64 {
    // 2^-k is exactly representable for every k in the normal range.
    if k == 0 {
        1.0
    } else if k <= 1022 {
        f64::from_bits((1023 - k as u64) << 52)
    } else {
        0.0
    }
}

/// Probability `0.75^d` that measuring every slot leaves all `d` tamper
/// detection bits unflagged.
pub fn evade_prob(d: u32) -> f64 {
    pow_seq(0.75, d)
}

fn pow_seq(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

fn check_subset_domain(k: u32, d: u32, g: u32) -> Result<(), AnalysisError> {
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    if g < k || g > k + d {
        return Err(domain("g must satisfy k <= g <= k+d"));
    }
    Ok(())
}

/// Success probability of guessing a `g`-slot subset: all `k` key slots
/// covered and no disturbed tamper slot flagged. Binomial-ratio form
/// `C(d, g-k) / C(k+d, g) * (3/4)^(g-k)`.
pub fn subset_guess_success(k: u32, d: u32, g: u32) -> Result<ExactProb, AnalysisError> {
    check_subset_domain(k, d, g)?;
    let combinatorial = big_ratio(
        binomial(d as u64, (g - k) as u64),
        binomial((k + d) as u64, g as u64),
    );
    Ok(ExactProb::from_ratio(combinatorial * three_quarters_pow(g - k)))
}

/// The same quantity in its factorial simplification
/// `d! g! / ((k+d)! (g-k)!) * (3/4)^(g-k)`; must agree with
/// [`subset_guess_success`] identically.
pub fn subset_guess_success_factorial(
    k: u32,
    d: u32,
    g: u32,
) -> Result<ExactProb, AnalysisError> {
    check_subset_domain(k, d, g)?;
    let numer = factorial(d as u64) * factorial(g as u64);
    let denom = factorial((k + d) as u64) * factorial((g - k) as u64);
    Ok(ExactProb::from_ratio(
        big_ratio(numer, denom) * three_quarters_pow(g - k),
    ))
}

/// Multiplier `(g+1)/(g+1-k)` applied to the combinatorial factor when one
/// more slot is guessed.
pub fn marginal_gain_ratio(g: u32, k: u32) -> Result<BigRational, AnalysisError> {
    if k == 0 || g < k {
        return Err(domain("marginal gain requires g >= k >= 1"));
    }
    Ok(BigRational::new(
        BigInt::from(g + 1),
        BigInt::from(g + 1 - k),
    ))
}

/// Largest `g` for which guessing one more slot still strictly improves the
/// eavesdropper's odds: the step multiplier `(g+1)/(g+1-k) * 3/4` exceeds 1
/// exactly when `g < 4k - 1`.
pub fn g_limit(k: u32) -> u32 {
    debug_assert!(k >= 1);
    4 * k - 2
}

fn float_to_ratio(x: f64) -> Result<BigRational, AnalysisError> {
    BigRational::from_float(x).ok_or_else(|| domain("target must be a finite probability"))
}

fn half_pow(e: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2u8).pow(e))
}

/// Smallest `(k, d)` with `2^-k <= target` and `0.75^d <= target`, from the
/// exact logarithm forms `k = ceil(-ln D / ln 2)`, `d = ceil(ln D / ln 0.75)`.
///
/// The float estimate is corrected by exact rational comparison, so ceiling
/// artifacts near powers of 1/2 or 3/4 cannot push the sizes off by one.
pub fn size_parameters(target: f64) -> Result<(u32, u32), AnalysisError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(domain("target must lie strictly between 0 and 1"));
    }
    let exact = float_to_ratio(target)?;

    let mut k = libm::ceil(-libm::log(target) / core::f64::consts::LN_2).max(1.0) as u32;
    while k > 1 && half_pow(k - 1) <= exact {
        k -= 1;
    }
    while half_pow(k) > exact {
        k += 1;
    }

    let mut d = libm::ceil(libm::log(target) / libm::log(0.75)).max(1.0) as u32;
    while d > 1 && three_quarters_pow(d - 1) <= exact {
        d -= 1;
    }
    while three_quarters_pow(d) > exact {
        d += 1;
    }

    Ok((k, d))
}

/// Sizing with the rounded constants `k = ceil(-1.44 ln D)`,
/// `d = ceil(-3.48 ln D)` instead of the exact logarithm forms.
pub fn size_parameters_rounded_constants(target: f64) -> Result<(u32, u32), AnalysisError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(domain("target must lie strictly between 0 and 1"));
    }
    let ln_target = libm::log(target);
    let k = libm::ceil(-1.44 * ln_target) as u32;
    let d = libm::ceil(-3.48 * ln_target) as u32;
    Ok((k, d))
}

/// The tamper-to-key ratio `ln 2 / -ln 0.75 = 2.4094...` at which forgery and
/// evasion bounds balance.
pub fn balance_ratio() -> f64 {
    core::f64::consts::LN_2 / -libm::log(0.75)
}

fn check_p1(p1: f64) -> Result<(), AnalysisError> {
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(domain("p1 must lie in (0, 1]"));
    }
    Ok(())
}

/// Tamper bits still effective under photon-number splitting: `p1 * d`.
pub fn pns_effective_d(d: u32, p1: f64) -> Result<f64, AnalysisError> {
    check_p1(p1)?;
    Ok(p1 * d as f64)
}

/// Tamper-bit count restoring `d` effective bits against photon-number
/// splitting: the smallest integer `ceil(d / p1)` whose effective count is at
/// least `d`.
pub fn pns_adjusted_d(d: u32, p1: f64) -> Result<u32, AnalysisError> {
    check_p1(p1)?;
    let mut adjusted = libm::ceil(d as f64 / p1) as u32;
    while adjusted > 0 && (adjusted - 1) as f64 * p1 >= d as f64 {
        adjusted -= 1;
    }
    while (adjusted as f64) * p1 < d as f64 {
        adjusted += 1;
    }
    Ok(adjusted)
}

/// Point approximation `0.75^(p1 d)` for evasion under photon-number
/// splitting.
pub fn pns_evasion_point_approx(d: u32, p1: f64) -> Result<f64, AnalysisError> {
    check_p1(p1)?;
    Ok(libm::pow(0.75, p1 * d as f64))
}

/// Exact evasion expectation under photon-number splitting. The number of
/// single-photon (hence disturbed) tamper slots is Binomial(d, p1), and
/// `E[0.75^Binomial(d, p1)] = (1 - p1/4)^d`.
pub fn pns_evasion_exact(d: u32, p1: f64) -> Result<f64, AnalysisError> {
    check_p1(p1)?;
    Ok(pow_seq(1.0 - p1 / 4.0, d))
}

/// Enumeration bound for [`brute_force_subset_oracle`].
pub const ENUMERATION_LIMIT: u32 = 20;

/// Independent validation of [`subset_guess_success`]: enumerate every
/// `g`-subset of the `k + d` slots (key slots first, without loss of
/// generality), score `(3/4)^t` when all key slots are covered and `t` tamper
/// slots are disturbed, zero otherwise, and average exactly.
pub fn brute_force_subset_oracle(k: u32, d: u32, g: u32) -> Result<ExactProb, AnalysisError> {
    check_subset_domain(k, d, g)?;
    let n = k + d;
    if n > ENUMERATION_LIMIT {
        return Err(AnalysisError::TooLarge { limit: ENUMERATION_LIMIT, got: n });
    }
    let key_mask: u32 = (1u32 << k) - 1;
    let mut total = BigRational::zero();
    let mut subsets = 0u64;
    // Gosper's hack: iterate all n-bit words with exactly g bits set.
    let mut mask: u32 = (1u32 << g) - 1;
    let limit: u32 = 1u32 << n;
    while mask < limit {
        subsets += 1;
        if mask & key_mask == key_mask {
            total += three_quarters_pow(g - k);
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        if r >= limit || c == 0 {
            break;
        }
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    debug_assert_eq!(BigUint::from(subsets), binomial(n as u64, g as u64));
    Ok(ExactProb::from_ratio(
        total / BigRational::new(BigInt::from(subsets), BigInt::one()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn forgery_prob_values() {
        assert_eq!(forgery_prob(1), 0.5);
        assert_eq!(forgery_prob(10), 1.0 / 1024.0);
        assert_eq!(forgery_prob(17), 7.62939453125e-6);
    }

    #[test]
    fn forgery_prob_matches_random_token_simulation() {
        // Direct oracle: a blind forger's k-bit token against an independent
        // uniform key.
        let mut rng = crate::rng::SplitMix64::new(0xF0E5EED);
        let k = 10;
        let trials = 10_000_000u64;
        let mask = (1u64 << k) - 1;
        let mut hits = 0u64;
        for _ in 0..trials {
            let key = rng.next_u64() & mask;
            let token = rng.next_u64() & mask;
            if key == token {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        let expected = forgery_prob(k);
        let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!((rate - expected).abs() < 4.0 * sigma, "rate {rate} expected {expected}");
    }

    #[test]
    fn evade_prob_values() {
        assert_eq!(evade_prob(0), 1.0);
        assert_eq!(evade_prob(1), 0.75);
        assert_eq!(evade_prob(8), 0.1001129150390625);
        // Exact rational cross-check of the full-scale value.
        let exact = three_quarters_pow(41).to_f64().unwrap();
        assert!((evade_prob(41) / exact - 1.0).abs() < 1e-12);
        assert!((evade_prob(41) - 7.542438871228123e-6).abs() < 1e-17);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), BigUint::from(10u32));
        assert_eq!(binomial(58, 41), BigUint::from(197_548_686_920_970u64));
        assert_eq!(binomial(3, 7), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
    }

    #[test]
    fn subset_guess_small_cases() {
        assert_eq!(*subset_guess_success(1, 1, 1).unwrap().as_ratio(), ratio(1, 2));
        assert_eq!(*subset_guess_success(1, 1, 2).unwrap().as_ratio(), ratio(3, 4));
        assert_eq!(*subset_guess_success(2, 3, 2).unwrap().as_ratio(), ratio(1, 10));
        assert_eq!(*subset_guess_success(2, 3, 5).unwrap().as_ratio(), ratio(27, 64));
    }

    #[test]
    fn guessing_everything_reduces_to_evasion() {
        for (k, d) in [(1u32, 1u32), (2, 3), (4, 9), (17, 41)] {
            let all = subset_guess_success(k, d, k + d).unwrap();
            assert_eq!(*all.as_ratio(), three_quarters_pow(d));
        }
    }

    #[test]
    fn factorial_form_matches_binomial_form() {
        for k in 1..=5u32 {
            for d in 0..=7u32 {
                for g in k..=k + d {
                    let a = subset_guess_success(k, d, g).unwrap();
                    let b = subset_guess_success_factorial(k, d, g).unwrap();
                    assert_eq!(a, b, "k={k} d={d} g={g}");
                }
            }
        }
    }

    #[test]
    fn subset_guess_domain_checks() {
        assert!(subset_guess_success(2, 3, 1).is_err());
        assert!(subset_guess_success(2, 3, 6).is_err());
        assert!(subset_guess_success(0, 3, 1).is_err());
    }

    #[test]
    fn brute_force_matches_closed_form_exactly() {
        for k in 1..=4u32 {
            for d in 0..=8u32.saturating_sub(k) {
                for g in k..=k + d {
                    let oracle = brute_force_subset_oracle(k, d, g).unwrap();
                    let closed = subset_guess_success(k, d, g).unwrap();
                    assert_eq!(oracle, closed, "k={k} d={d} g={g}");
                }
            }
        }
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(*brute_force_subset_oracle(1, 1, 1).unwrap().as_ratio(), ratio(1, 2));
        assert_eq!(*brute_force_subset_oracle(1, 1, 2).unwrap().as_ratio(), ratio(3, 4));
        assert_eq!(*brute_force_subset_oracle(2, 3, 5).unwrap().as_ratio(), ratio(27, 64));
    }

    #[test]
    fn brute_force_bound() {
        assert!(matches!(
            brute_force_subset_oracle(10, 11, 10),
            Err(AnalysisError::TooLarge { .. })
        ));
    }

    #[test]
    fn marginal_gain_examples() {
        // k = 3: one more guess at g = 10 still helps, at g = 11 the step
        // multiplier is exactly 1.
        let step10 = marginal_gain_ratio(10, 3).unwrap() * ratio(3, 4);
        assert_eq!(step10, ratio(33, 32));
        let step11 = marginal_gain_ratio(11, 3).unwrap() * ratio(3, 4);
        assert_eq!(step11, ratio(1, 1));
        assert_eq!(g_limit(1), 2);
        assert_eq!(g_limit(3), 10);
    }

    #[test]
    fn successive_ratio_identity() {
        for (k, d) in [(1u32, 6u32), (2, 8), (3, 12)] {
            for g in k..k + d {
                let lo = subset_guess_success(k, d, g).unwrap();
                let hi = subset_guess_success(k, d, g + 1).unwrap();
                let step = marginal_gain_ratio(g, k).unwrap() * ratio(3, 4);
                assert_eq!(hi.as_ratio().clone(), lo.as_ratio() * step, "k={k} d={d} g={g}");
            }
        }
    }

    #[test]
    fn strict_monotonicity_up_to_limit() {
        let (k, d) = (3u32, 12u32);
        let limit = g_limit(k).min(k + d);
        for g in k..=limit {
            let lo = subset_guess_success(k, d, g).unwrap();
            let hi = subset_guess_success(k, d, g + 1).unwrap();
            assert!(hi.as_ratio() > lo.as_ratio(), "g={g}");
        }
    }

    #[test]
    fn size_parameters_examples() {
        assert_eq!(size_parameters(7.62939453125e-6).unwrap(), (17, 41));
        assert_eq!(size_parameters(0.5).unwrap(), (1, 3));
        assert_eq!(size_parameters(1e-3).unwrap(), (10, 25));
        assert_eq!(size_parameters(1e-6).unwrap(), (20, 49));
        assert_eq!(size_parameters(1e-9).unwrap(), (30, 73));
        assert!(size_parameters(0.0).is_err());
        assert!(size_parameters(1.0).is_err());
    }

    #[test]
    fn size_parameters_minimal_and_sufficient() {
        for target in [1e-3, 1e-6, 1e-9, 7.62939453125e-6, 0.5, 0.25] {
            let (k, d) = size_parameters(target).unwrap();
            let exact = BigRational::from_float(target).unwrap();
            assert!(half_pow(k) <= exact, "k not sufficient at {target}");
            assert!(three_quarters_pow(d) <= exact, "d not sufficient at {target}");
            if k > 0 {
                assert!(half_pow(k - 1) > exact, "k not minimal at {target}");
            }
            if d > 0 {
                assert!(three_quarters_pow(d - 1) > exact, "d not minimal at {target}");
            }
        }
    }

    #[test]
    fn balance_ratio_prints_to_two_decimals() {
        assert!((balance_ratio() - 2.409420839653209).abs() < 1e-12);
        let formatted = alloc::format!("{:.2}", balance_ratio());
        assert_eq!(formatted, "2.41");
    }

    #[test]
    fn pns_quantities() {
        assert_eq!(pns_effective_d(41, 0.5).unwrap(), 20.5);
        assert_eq!(pns_adjusted_d(41, 0.5).unwrap(), 82);
        assert_eq!(pns_effective_d(16, 1.0).unwrap(), 16.0);
        assert_eq!(pns_adjusted_d(16, 1.0).unwrap(), 16);
        assert!(pns_effective_d(5, 0.0).is_err());
        assert!(pns_effective_d(5, 1.5).is_err());
        // Adjusted count restores at least d effective bits.
        for (d, p1) in [(41u32, 0.3f64), (16, 0.7), (8, 0.9)] {
            let adj = pns_adjusted_d(d, p1).unwrap();
            assert!(pns_effective_d(adj, p1).unwrap() >= d as f64);
            assert!(pns_effective_d(adj - 1, p1).unwrap() < d as f64);
        }
    }

    #[test]
    fn pns_evasion_forms() {
        let exact = pns_evasion_exact(16, 0.5).unwrap();
        assert!((exact - 0.875f64.powi(16)).abs() < 1e-15);
        let approx = pns_evasion_point_approx(16, 0.5).unwrap();
        assert!((approx - evade_prob(8)).abs() < 1e-12);
        // The point approximation understates the exact expectation.
        assert!(approx < exact);
    }

    #[test]
    fn exact_prob_float_consistency() {
        let p = subset_guess_success(3, 7, 6).unwrap();
        let from_parts = p.numerator().to_f64().unwrap() / p.denominator().to_f64().unwrap();
        assert!((p.to_f64() - from_parts).abs() < 1e-12);
    }
}

//! Gaussian (CLT) approximation of the coded mean AoI and its regional
//! forms.
//!
//! For large `n` the per-block erasure count is approximately normal, so the
//! block size can be parameterized as
//!
//! `k_bar = n - n P + c_n sqrt(n P (1 - P))`
//!
//! with `c_n` counting standard deviations of slack above the mean erasure
//! count. The block failure probability becomes `P Phi(c_n)` and the mean
//! AoI a smooth function of `c_n`, which splits into three regimes around
//! `Phi ~ 0`, `Phi ~ 1` and the linear transition between them.

use serde::{Deserialize, Serialize};

use crate::aoi::AoiResult;
use crate::error::{Error, Result};

/// Standard normal CDF via the complementary error function.
///
/// Absolute error is below 1e-10 over the whole real line; tests pin this
/// against high-precision reference values.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Smallest `c > 0` with `exp(-c^2) / c <= eps`, located by bisection to
/// 1e-9. Past `|c_n| = c_eps` the normal CDF is within `eps`-sized terms of
/// its 0/1 limits; grows like `sqrt(ln(1/eps))`.
pub fn calibrate_c_eps(eps: f64) -> f64 {
    assert!(eps > 0.0 && eps < 1.0, "tolerance must lie in (0, 1)");
    let f = |c: f64| (-c * c).exp() / c - eps;
    let mut lo = 1e-12;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Default tolerance used to place the region boundaries.
pub const DEFAULT_C_EPS_TOLERANCE: f64 = 1e-3;

/// Which regime a `c_n` value falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `c_n < -c_eps`: block failures dominate, `Phi(c_n) ~ 0`.
    Region1,
    /// `c_n > c_eps`: blocks almost never fail to decode, `Phi(c_n) ~ 1`.
    Region2,
    /// `|c_n| <= c_eps`: transition band, `Phi` approximately linear.
    Region3,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Region1 => "1",
            Region::Region2 => "2",
            Region::Region3 => "3",
        }
    }
}

/// The `c_n <-> k_bar` parameterization together with its region tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianApprox {
    pub c_n: f64,
    pub k_bar: f64,
    pub c_eps: f64,
    pub region: Region,
}

impl GaussianApprox {
    /// Builds the parameterization from `c_n`.
    pub fn from_c_n(c_n: f64, n: u64, p: f64, c_eps: f64) -> Self {
        let n_f = n as f64;
        let k_bar = n_f - n_f * p + c_n * (n_f * p * (1.0 - p)).sqrt();
        Self {
            c_n,
            k_bar,
            c_eps,
            region: classify(c_n, c_eps),
        }
    }

    /// Inverse mapping `c_n = (k - n(1 - P)) / sqrt(n P (1 - P))`; fails
    /// when the erasure variance is zero (`P` is 0 or 1).
    pub fn from_k(k: f64, n: u64, p: f64, c_eps: f64) -> Result<Self> {
        let n_f = n as f64;
        let spread = (n_f * p * (1.0 - p)).sqrt();
        if spread == 0.0 {
            return Err(Error::Domain(
                "c_n is undefined when the erasure variance is zero".into(),
            ));
        }
        let c_n = (k - n_f * (1.0 - p)) / spread;
        Ok(Self {
            c_n,
            k_bar: k,
            c_eps,
            region: classify(c_n, c_eps),
        })
    }
}

fn classify(c_n: f64, c_eps: f64) -> Region {
    if c_n < -c_eps {
        Region::Region1
    } else if c_n > c_eps {
        Region::Region2
    } else {
        Region::Region3
    }
}

/// Coded rate factor `k_bar / n = 1 - P + c_n sqrt(P (1 - P) / n)`;
/// errors unless it lies in `(0, 1]` (so `k_bar` is a usable block size).
fn rate_factor(c_n: f64, n: u64, p: f64) -> Result<f64> {
    let rate = 1.0 - p + c_n * (p * (1.0 - p) / n as f64).sqrt();
    if rate <= 0.0 {
        return Err(Error::Domain(format!(
            "rate factor {rate} <= 0 at c_n = {c_n} (k_bar would not be positive)"
        )));
    }
    if rate > 1.0 {
        return Err(Error::Domain(format!(
            "rate factor {rate} > 1 at c_n = {c_n} (k_bar would exceed n)"
        )));
    }
    Ok(rate)
}

/// CLT approximation of the generic-source coded mean AoI at block size
/// `k_bar(c_n)`:
///
/// `K ell (1 + P Phi(c_n)) / (2 (1 - P + c_n sqrt(P(1-P)/n)) (1 - P Phi(c_n)))`
pub fn gaussian_aoi(c_n: f64, n: u64, sources: u64, ell: u64, p: f64) -> Result<AoiResult> {
    let rate = rate_factor(c_n, n, p)?;
    Ok(rate_form(sources, ell, rate, p * normal_cdf(c_n)))
}

/// `K ell (1 + p_c) / (2 rate (1 - p_c))`, the shared shape of the Gaussian
/// and regional forms.
fn rate_form(sources: u64, ell: u64, rate: f64, p_c: f64) -> AoiResult {
    if p_c >= 1.0 {
        return AoiResult::divergent();
    }
    let main = (sources * ell) as f64 * (1.0 + p_c) / (2.0 * rate * (1.0 - p_c));
    AoiResult::finite_with(main, 0.0, 0.0)
}

/// Regional forms of the Gaussian approximation, tagged with their region.
///
/// * Region 1 (`c_n < -c_eps`): `Phi` is replaced by 0.
/// * Region 2 (`c_n > c_eps`): `Phi` is replaced by 1.
/// * Region 3 (`|c_n| <= c_eps`): `Phi` is replaced by the linear ramp
///   `(c_n + c_eps) / (2 c_eps)`.
///
/// All three keep the finite-`n` rate factor in the denominator, so the
/// piecewise curve is continuous at the +/- `c_eps` boundaries; the
/// asymptotic statement drops that `O(1/sqrt(n))` term inside Region 3,
/// which would open a visible gap at the boundaries for moderate `n`.
pub fn region_aoi(
    c_n: f64,
    n: u64,
    sources: u64,
    ell: u64,
    p: f64,
    c_eps: f64,
) -> Result<(AoiResult, Region)> {
    assert!(c_eps > 0.0, "region half-width must be positive");
    let rate = rate_factor(c_n, n, p)?;
    let region = classify(c_n, c_eps);
    let phi = match region {
        Region::Region1 => 0.0,
        Region::Region2 => 1.0,
        Region::Region3 => (c_n + c_eps) / (2.0 * c_eps),
    };
    Ok((rate_form(sources, ell, rate, p * phi), region))
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF_P: f64 = 0.34;

    #[test]
    #[allow(clippy::excessive_precision)]
    fn normal_cdf_reference_values() {
        // High-precision reference values; the implementation must stay
        // within 1e-10 absolutely (that tolerance is part of the contract).
        let cases = [
            (0.0, 0.5),
            (1.0, 0.84134474606854294859),
            (-1.96, 0.024997895148220434137),
            (2.45, 0.99285718926472858082),
            (-3.0, 0.0013498980316300945267),
            (0.5, 0.69146246127401310364),
            (-0.5, 0.30853753872598689636),
        ];
        for (x, want) in cases {
            assert!(
                (normal_cdf(x) - want).abs() < 1e-10,
                "Phi({x}) = {} vs {want}",
                normal_cdf(x)
            );
        }
        assert!((normal_cdf(0.3) + normal_cdf(-0.3) - 1.0).abs() < 1e-14);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn c_eps_defining_inequality_and_monotonicity() {
        let c = calibrate_c_eps((-1.0f64).exp());
        assert!((c - 1.0).abs() < 1e-6);
        assert!(calibrate_c_eps(1e-3) >= calibrate_c_eps(1e-2));
        let c3 = calibrate_c_eps(1e-3);
        assert!((c3 - 2.451726495843949).abs() < 1e-7);
        // At the returned point the defining function is at its root.
        assert!(((-c3 * c3).exp() / c3 - 1e-3).abs() < 1e-11);
    }

    #[test]
    fn c_eps_growth_scales_like_sqrt_log() {
        let ratio = calibrate_c_eps(1e-8) / calibrate_c_eps(1e-2);
        let bound = (1e8f64.ln() / 1e2f64.ln()).sqrt() * 1.5;
        assert!(ratio <= bound, "ratio {ratio} vs bound {bound}");
        assert!(ratio >= 1.0);
    }

    #[test]
    fn gaussian_aoi_at_zero_slack() {
        // Phi(0) = 1/2 collapses the expression to
        // K ell (1 + P/2) / (2 (1 - P)(1 - P/2)).
        let r = gaussian_aoi(0.0, 300, 10_000, 1, REF_P).unwrap();
        let want = 10_000.0 * (1.0 + REF_P / 2.0) / (2.0 * (1.0 - REF_P) * (1.0 - REF_P / 2.0));
        assert!((r.mean_aoi - want).abs() < 1e-9);
        assert!((want - 10679.07995618839).abs() < 1e-8);
    }

    #[test]
    fn gaussian_aoi_approaches_region1_form_for_very_negative_slack() {
        let n = 300;
        let c_n = -3.5;
        let r = gaussian_aoi(c_n, n, 10_000, 1, REF_P).unwrap();
        let region1 = 10_000.0
            / (2.0 * (1.0 - REF_P + c_n * (REF_P * (1.0 - REF_P) / n as f64).sqrt()));
        assert!((r.mean_aoi - region1).abs() / region1 < 2e-3);
    }

    #[test]
    fn gaussian_aoi_domain_errors() {
        // Rate factor driven to zero and below.
        assert!(gaussian_aoi(-40.0, 300, 100, 1, REF_P).is_err());
        // k_bar above n.
        assert!(gaussian_aoi(13.0, 300, 100, 1, REF_P).is_err());
    }

    #[test]
    fn region_formulas_are_continuous_at_the_boundaries() {
        let c_eps = calibrate_c_eps(1e-3);
        let n = 300;
        for sign in [-1.0, 1.0] {
            let c = sign * c_eps;
            let inside = region_aoi(c, n, 10_000, 1, REF_P, c_eps).unwrap().0;
            let outside = region_aoi(c + sign * 1e-9, n, 10_000, 1, REF_P, c_eps)
                .unwrap()
                .0;
            let rel = (inside.mean_aoi - outside.mean_aoi).abs() / inside.mean_aoi;
            assert!(rel < 0.02, "boundary gap {rel} at c_n = {c}");
        }
    }

    #[test]
    fn region_tags_follow_c_n() {
        let c_eps = 2.0;
        let n = 300;
        let (_, r) = region_aoi(-3.0, n, 100, 1, REF_P, c_eps).unwrap();
        assert_eq!(r, Region::Region1);
        let (_, r) = region_aoi(3.0, n, 100, 1, REF_P, c_eps).unwrap();
        assert_eq!(r, Region::Region2);
        let (_, r) = region_aoi(0.5, n, 100, 1, REF_P, c_eps).unwrap();
        assert_eq!(r, Region::Region3);
    }

    #[test]
    fn region2_tracks_local_maximum_trend() {
        // Just past the upper boundary the Region 2 form and the full CLT
        // expression tell the same story.
        let c_eps = calibrate_c_eps(1e-3);
        let c_n = c_eps + 1.0;
        let n = 300;
        let (r2, tag) = region_aoi(c_n, n, 10_000, 1, REF_P, c_eps).unwrap();
        assert_eq!(tag, Region::Region2);
        let full = gaussian_aoi(c_n, n, 10_000, 1, REF_P).unwrap();
        assert!((r2.mean_aoi - full.mean_aoi).abs() / full.mean_aoi < 5e-3);
    }

    #[test]
    fn clt_band_tracks_the_recursion_based_value() {
        // The CLT form at integer-rounded k_bar stays within 5% of the
        // recursion-based approximation for n >= 200 and within 15% for
        // moderate block lengths, over c_n in [-3, 3].
        let params = crate::channel::GEParams::new(0.2, 0.8, 0.2, 0.9).unwrap();
        for (n, band) in [(50u64, 0.15), (100, 0.15), (200, 0.05), (300, 0.05)] {
            let mut c_n = -3.0f64;
            while c_n <= 3.0 + 1e-9 {
                let g = gaussian_aoi(c_n, n, 10_000, 1, REF_P).unwrap();
                let k = GaussianApprox::from_c_n(c_n, n, REF_P, 2.45)
                    .k_bar
                    .round()
                    .max(1.0) as u64;
                let approx = crate::aoi::coded_aoi_approx(n, k, 10_000, 1, &params);
                let rel = (g.mean_aoi - approx.mean_aoi).abs() / approx.mean_aoi;
                assert!(rel < band, "n={n} c_n={c_n}: {rel}");
                c_n += 0.25;
            }
        }
    }

    #[test]
    fn k_bar_relation_round_trips() {
        let c_eps = 2.0;
        for c_n in [-2.5, -0.3, 0.0, 1.7] {
            let g = GaussianApprox::from_c_n(c_n, 300, REF_P, c_eps);
            let n_f = 300.0;
            let relation = n_f - n_f * REF_P + c_n * (n_f * REF_P * (1.0 - REF_P)).sqrt();
            assert!((g.k_bar - relation).abs() < 1e-9);
            let inv = GaussianApprox::from_k(g.k_bar, 300, REF_P, c_eps).unwrap();
            assert!((inv.c_n - c_n).abs() < 1e-9);
            assert_eq!(inv.region, g.region);
        }
        assert!(GaussianApprox::from_k(10.0, 300, 0.0, c_eps).is_err());
    }
}

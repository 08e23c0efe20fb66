//! Closed-form decay and damping exponents, in exact rational arithmetic.

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictError {
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("forbidden exponent: a = -1/p0")]
    ForbiddenExponent,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

/// Serde helpers: rationals as `{"num", "den", "decimal"}`.
pub mod exact {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    pub struct ExactJson {
        pub num: i64,
        pub den: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub decimal: Option<f64>,
    }

    impl From<Rational64> for ExactJson {
        fn from(v: Rational64) -> Self {
            Self {
                num: *v.numer(),
                den: *v.denom(),
                decimal: v.to_f64(),
            }
        }
    }

    impl ExactJson {
        pub fn to_rational<E: serde::de::Error>(&self) -> Result<Rational64, E> {
            if self.den == 0 {
                return Err(E::custom("zero denominator"));
            }
            Ok(Rational64::new(self.num, self.den))
        }
    }

    pub fn serialize<S: Serializer>(v: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        ExactJson::from(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        ExactJson::deserialize(d)?.to_rational()
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<Rational64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(ExactJson::from).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational64>, D::Error> {
            Option::<ExactJson>::deserialize(d)?
                .map(|e| e.to_rational())
                .transpose()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharpLpPrediction {
    pub k: u32,
    pub l: u32,
    #[serde(with = "exact")]
    pub p: Rational64,
    #[serde(with = "exact")]
    pub decay: Rational64,
    /// Exponent on `|a_{k,l}|` in the norm bound.
    #[serde(with = "exact")]
    pub coeff_power: Rational64,
}

impl SharpLpPrediction {
    /// Conjugate exponent `p' = p/(p-1)`.
    pub fn p_dual(&self) -> Rational64 {
        self.p / (self.p - r(1))
    }
}

/// `p = (k+l)/k`, `decay = 1/(k+l)`.
pub fn sharp_lp(k: u32, l: u32) -> Result<SharpLpPrediction, PredictError> {
    if k == 0 || l == 0 {
        return Err(PredictError::InvalidArgument(format!(
            "k and l must be positive, got ({k},{l})"
        )));
    }
    let (kk, ll) = (r(i64::from(k)), r(i64::from(l)));
    let decay = r(1) / (kk + ll);
    Ok(SharpLpPrediction {
        k,
        l,
        p: (kk + ll) / kk,
        decay,
        coeff_power: -decay,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Damping in `x - alpha y^eta`, `eta >= 1`.
    Primal,
    /// Damping in the swapped orientation, `nu >= 1`.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DampingSpec {
    pub orientation: Orientation,
    pub m: u32,
    pub n: u32,
    /// Root count: `N` in the primal orientation, `M` in the dual one.
    #[serde(rename = "N")]
    pub root_count: u32,
    pub s: u32,
    /// `eta` (primal) or `nu` (dual).
    #[serde(with = "exact")]
    pub ratio: Rational64,
    #[serde(with = "exact")]
    pub gamma: Rational64,
    /// Absent when its denominator vanishes.
    #[serde(with = "exact::option")]
    pub re_z: Option<Rational64>,
}

impl DampingSpec {
    pub fn re_z(&self) -> Result<Rational64, PredictError> {
        self.re_z.ok_or(PredictError::DivisionByZero("m + s = 0"))
    }
}

fn check_ratio(name: &str, v: Rational64) -> Result<(), PredictError> {
    if v < r(1) {
        return Err(PredictError::InvalidArgument(format!("{name} = {v} must be >= 1")));
    }
    Ok(())
}

fn check_s(s: u32, total: u32) -> Result<(), PredictError> {
    if s > total {
        return Err(PredictError::InvalidArgument(format!("s = {s} exceeds {total}")));
    }
    Ok(())
}

/// `L = n + (N-s) eta`, the power of `y` left undamped.
fn residual_order(n: u32, big_n: u32, s: u32, eta: Rational64) -> Rational64 {
    r(i64::from(n)) + r(i64::from(big_n - s)) * eta
}

/// Decay `gamma = 1/(2(L+1))` and damping exponent
/// `Re z = (m+s-L) / (2(L+1)(m+s))` with `L = n + (N-s) eta`.
pub fn damped_l2_exponents(
    m: u32,
    n: u32,
    big_n: u32,
    s: u32,
    eta: Rational64,
) -> Result<DampingSpec, PredictError> {
    check_s(s, big_n)?;
    check_ratio("eta", eta)?;
    let l = residual_order(n, big_n, s, eta);
    let ms = r(i64::from(m + s));
    let gamma = r(1) / (r(2) * (l + r(1)));
    let re_z = (!ms.is_zero()).then(|| (ms - l) / (r(2) * (l + r(1)) * ms));
    Ok(DampingSpec {
        orientation: Orientation::Primal,
        m,
        n,
        root_count: big_n,
        s,
        ratio: eta,
        gamma,
        re_z,
    })
}

/// Dual orientation: `gamma = 1/(2(n+M-s+1))`,
/// `Re z = (m + s nu - n - (M-s)) / (2(n+M-s+1)(m + s nu))`.
pub fn damped_l2_dual_exponents(
    m: u32,
    n: u32,
    big_m: u32,
    s: u32,
    nu: Rational64,
) -> Result<DampingSpec, PredictError> {
    check_s(s, big_m)?;
    check_ratio("nu", nu)?;
    let l = r(i64::from(n + big_m - s));
    let msn = r(i64::from(m)) + r(i64::from(s)) * nu;
    let gamma = r(1) / (r(2) * (l + r(1)));
    let re_z = (!msn.is_zero()).then(|| (msn - l) / (r(2) * (l + r(1)) * msn));
    Ok(DampingSpec {
        orientation: Orientation::Dual,
        m,
        n,
        root_count: big_m,
        s,
        ratio: nu,
        gamma,
        re_z,
    })
}

/// Weighted interpolation between an `L^1` endpoint with weight power `-1`
/// and an `L^{p0}` endpoint with weight power `a`:
/// `gamma = -(1-theta) + theta a`, `1/p = (1-theta) + theta/p0`.
pub fn interpolate_weights(
    a: Rational64,
    p0: Rational64,
    theta: Rational64,
) -> Result<(Rational64, Rational64), PredictError> {
    if p0 <= r(1) {
        return Err(PredictError::InvalidArgument(format!("p0 = {p0} must exceed 1")));
    }
    if theta <= r(0) || theta >= r(1) {
        return Err(PredictError::InvalidArgument(format!("theta = {theta} not in (0,1)")));
    }
    if a == -p0.recip() {
        return Err(PredictError::ForbiddenExponent);
    }
    let one = Rational64::one();
    let gamma = -(one - theta) + theta * a;
    let inv_p = (one - theta) + theta / p0;
    Ok((gamma, inv_p.recip()))
}

/// `theta = 2(L+1) / (m+s+L+2)`: the weight at which the `L^1` endpoint
/// (`Re z = -1/(m+s)`) and the `L^2` endpoint cancel.
pub fn matching_theta(
    m: u32,
    n: u32,
    big_n: u32,
    s: u32,
    eta: Rational64,
) -> Result<Rational64, PredictError> {
    check_s(s, big_n)?;
    let l = residual_order(n, big_n, s, eta);
    Ok(r(2) * (l + r(1)) / (r(i64::from(m + s)) + l + r(2)))
}

/// `delta = 1/(m+s+L+2)`, `p = (m+s+L+2)/(m+s+1)`.
pub fn lp_from_damping(
    m: u32,
    n: u32,
    big_n: u32,
    s: u32,
    eta: Rational64,
) -> Result<(Rational64, Rational64), PredictError> {
    check_s(s, big_n)?;
    check_ratio("eta", eta)?;
    let total = r(i64::from(m + s)) + residual_order(n, big_n, s, eta) + r(2);
    Ok((total / r(i64::from(m + s + 1)), total.recip()))
}

/// The same `(p, delta)` as [`lp_from_damping`], derived by running the
/// interpolation arithmetic between the two damped endpoints.
pub fn lp_from_damping_chain(
    m: u32,
    n: u32,
    big_n: u32,
    s: u32,
    eta: Rational64,
) -> Result<(Rational64, Rational64), PredictError> {
    let spec = damped_l2_exponents(m, n, big_n, s, eta)?;
    let beta = spec.re_z()?;
    let theta = matching_theta(m, n, big_n, s, eta)?;
    let a = r(i64::from(m + s)) * beta;
    let (weight, p) = interpolate_weights(a, r(2), theta)?;
    if !weight.is_zero() {
        return Err(PredictError::HypothesisViolated(format!(
            "interpolated weight power {weight} is not zero"
        )));
    }
    // The L^1 endpoint has no decay; the L^2 endpoint decays like gamma.
    Ok((p, theta * spec.gamma))
}

/// Radial reduction exponents with `A = k m / nX`, `B = l n / nY`:
/// `p = (A+B)/A`, `gamma = 1/(A+B)`.
pub fn higher_dim_prediction(
    k: u32,
    l: u32,
    m: u32,
    n: u32,
    nx: u32,
    ny: u32,
) -> Result<(Rational64, Rational64), PredictError> {
    if k == 0 || l == 0 || m == 0 || n == 0 || nx == 0 || ny == 0 {
        return Err(PredictError::InvalidArgument("all arguments must be positive".into()));
    }
    if m < nx {
        return Err(PredictError::HypothesisViolated(format!("m = {m} < nX = {nx}")));
    }
    if n < ny {
        return Err(PredictError::HypothesisViolated(format!("n = {n} < nY = {ny}")));
    }
    let a = Rational64::new(i64::from(k * m), i64::from(nx));
    let b = Rational64::new(i64::from(l * n), i64::from(ny));
    Ok(((a + b) / a, (a + b).recip()))
}

/// Anisotropically scaled phase: `p = (k eta1 + l eta2)/(k eta1)`,
/// `delta = 1/(k eta1 + l eta2)`.
pub fn scaled_lp_eta(
    k: u32,
    l: u32,
    eta1: Rational64,
    eta2: Rational64,
) -> Result<(Rational64, Rational64), PredictError> {
    if k == 0 || l == 0 {
        return Err(PredictError::InvalidArgument("k and l must be positive".into()));
    }
    check_ratio("eta1", eta1)?;
    check_ratio("eta2", eta2)?;
    let a = r(i64::from(k)) * eta1;
    let total = a + r(i64::from(l)) * eta2;
    Ok((total / a, total.recip()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn sharp_lp_values() {
        let a = sharp_lp(1, 1).unwrap();
        assert_eq!((a.p, a.decay), (q(2, 1), q(1, 2)));
        let b = sharp_lp(2, 1).unwrap();
        assert_eq!((b.p, b.decay, b.coeff_power), (q(3, 2), q(1, 3), q(-1, 3)));
        let c = sharp_lp(1, 3).unwrap();
        assert_eq!((c.p, c.decay), (q(4, 1), q(1, 4)));
        assert!(sharp_lp(0, 1).is_err());
    }

    #[test]
    fn damped_values() {
        let a = damped_l2_exponents(0, 0, 2, 2, q(1, 1)).unwrap();
        assert_eq!((a.gamma, a.re_z()), (q(1, 2), Ok(q(1, 2))));
        let b = damped_l2_exponents(1, 1, 0, 0, q(1, 1)).unwrap();
        assert_eq!((b.gamma, b.re_z()), (q(1, 4), Ok(q(0, 1))));
        let c = damped_l2_exponents(0, 0, 1, 0, q(1, 1)).unwrap();
        assert_eq!(c.gamma, q(1, 4));
        assert_eq!(c.re_z(), Err(PredictError::DivisionByZero("m + s = 0")));
        assert!(damped_l2_exponents(0, 0, 1, 2, q(1, 1)).is_err());
    }

    #[test]
    fn dual_values() {
        let a = damped_l2_dual_exponents(0, 0, 1, 1, q(1, 1)).unwrap();
        assert_eq!((a.gamma, a.re_z()), (q(1, 2), Ok(q(1, 2))));
        // gamma = 1/(2(1+3-0+1)) = 1/10; Re z = (2+0-1-3)/(2*5*2) = -1/10.
        let b = damped_l2_dual_exponents(2, 1, 3, 0, q(2, 1)).unwrap();
        assert_eq!((b.gamma, b.re_z()), (q(1, 10), Ok(q(-1, 10))));
    }

    #[test]
    fn interpolation_values() {
        assert_eq!(
            interpolate_weights(q(0, 1), q(2, 1), q(1, 2)),
            Ok((q(-1, 2), q(4, 3)))
        );
        assert_eq!(
            interpolate_weights(q(-1, 2), q(2, 1), q(1, 2)),
            Err(PredictError::ForbiddenExponent)
        );
    }

    #[test]
    fn lp_from_damping_values() {
        assert_eq!(lp_from_damping(1, 1, 0, 0, q(1, 1)), Ok((q(2, 1), q(1, 4))));
        assert_eq!(lp_from_damping(0, 0, 1, 1, q(1, 1)), Ok((q(3, 2), q(1, 3))));
        assert_eq!(lp_from_damping_chain(0, 0, 1, 1, q(1, 1)), Ok((q(3, 2), q(1, 3))));
    }

    #[test]
    fn higher_dim_values() {
        assert_eq!(higher_dim_prediction(1, 1, 1, 1, 1, 1), Ok((q(2, 1), q(1, 2))));
        assert_eq!(higher_dim_prediction(1, 1, 2, 1, 2, 1), Ok((q(2, 1), q(1, 2))));
        assert!(matches!(
            higher_dim_prediction(1, 1, 1, 1, 2, 1),
            Err(PredictError::HypothesisViolated(_))
        ));
    }

    #[test]
    fn scaled_values() {
        assert_eq!(scaled_lp_eta(1, 1, q(1, 1), q(1, 1)), Ok((q(2, 1), q(1, 2))));
        assert_eq!(scaled_lp_eta(2, 1, q(1, 1), q(2, 1)), Ok((q(2, 1), q(1, 4))));
        assert_eq!(scaled_lp_eta(1, 3, q(2, 1), q(1, 1)), Ok((q(5, 2), q(1, 5))));
    }

    #[test]
    fn json_carries_exact_and_decimal() {
        let v = serde_json::to_value(sharp_lp(2, 1).unwrap()).unwrap();
        assert_eq!(v["p"], serde_json::json!({"num": 3, "den": 2, "decimal": 1.5}));
        let c = damped_l2_exponents(0, 0, 1, 0, q(1, 1)).unwrap();
        let v = serde_json::to_value(c).unwrap();
        assert!(v["re_z"].is_null());
        let back: DampingSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}

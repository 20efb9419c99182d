use statrs::function::erf::erfc_inv;

/// Standard normal quantile function, `Φ⁻¹(p)`. Returns ±∞ at the endpoints
/// and NaN outside `[0, 1]`.
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

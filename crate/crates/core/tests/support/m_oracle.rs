use std::f64::consts::PI;

use fracvol::numeric::GaussLegendre;

/// First form of the M-function: nested quadrature over `y` in `[-1, y_max]`
/// and `u = log x`, valid where `a x + b/x > 0`.
pub fn m_double(alpha: f64, a: f64, b: f64) -> f64 {
    let outer = GaussLegendre::new(400).unwrap();
    let inner = GaussLegendre::new(64).unwrap();
    let total = outer.integrate(-8.0 * alpha, 8.0 * alpha, |u| {
        let c = a * u.exp() + b * (-u).exp();
        let y_max = (2.0 * 12.0 * 10f64.ln()).sqrt() / c;
        let panels = 16;
        let h = (y_max + 1.0) / panels as f64;
        let inner_sum: f64 = (0..panels)
            .map(|p| {
                let lo = -1.0 + p as f64 * h;
                inner.integrate(lo, lo + h, |y| (-0.5 * y * y * c * c).exp())
            })
            .sum();
        (-0.5 * (u / alpha).powi(2) + u).exp() * inner_sum
    });
    total / (2.0 * PI * alpha)
}

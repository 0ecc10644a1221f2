//! Filon-type moments for integrals of `e^{iνy}` against polynomials on
//! the unit interval, and the panel weights of the cubic propagator.

use num_complex::Complex64 as C64;

/// Degree of the interpolant used by the propagator.
pub const DEGREE: usize = 3;
/// Interpolation nodes of the propagator on the unit panel.
pub const NODES: [f64; DEGREE + 1] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

const I: C64 = C64::new(0.0, 1.0);

/// `μ_m(ν) = ∫₀¹ y^m e^{iνy} dy` for `m = 0..=m_max`.
pub fn moments(nu: f64, m_max: usize) -> Vec<C64> {
    // Forward recurrence loses about m!/|ν|^m digits; below the threshold the
    // Taylor series is used instead (its terms stay below e^{|ν|}).
    let threshold = 1.0f64.max(0.5 * m_max as f64);
    if nu.abs() < threshold {
        (0..=m_max).map(|m| moment_series(nu, m)).collect()
    } else {
        let e = C64::new(0.0, nu).exp();
        let inv = 1.0 / (I * nu);
        let mut out = Vec::with_capacity(m_max + 1);
        let mut prev = (e - 1.0) * inv;
        out.push(prev);
        for m in 1..=m_max {
            prev = (e - m as f64 * prev) * inv;
            out.push(prev);
        }
        out
    }
}

fn moment_series(nu: f64, m: usize) -> C64 {
    // Σ_n (iν)^n / (n! (m+n+1))
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(1.0 / (m as f64 + 1.0), 0.0);
    for n in 1..200 {
        term *= I * nu / n as f64;
        let add = term / (m + n + 1) as f64;
        sum += add;
        if add.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
    }
    sum
}

/// `M_ab(ν) = ∫₀¹ dx ∫₀ˣ dy x^a y^b e^{−iν(x−y)}` for `a, b ≤ DEGREE`.
pub fn double_moments(nu: f64) -> [[C64; DEGREE + 1]; DEGREE + 1] {
    let mut out = [[C64::new(0.0, 0.0); DEGREE + 1]; DEGREE + 1];
    if nu.abs() <= 4.0 {
        for (a, row) in out.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                *slot = double_moment_series(nu, a, b);
            }
        }
        return out;
    }
    // ∫₀ˣ y^b e^{iνy} dy = e^{iνx} Q_b(x) + c_b with polynomial Q_b, so
    // M_ab = ∫₀¹ x^a Q_b(x) dx + c_b μ_a(−ν).
    let inv = 1.0 / (I * nu);
    let mu_neg = moments(-nu, DEGREE);
    let mut q: Vec<C64> = vec![inv];
    let mut c = -inv;
    for b in 0..=DEGREE {
        if b > 0 {
            let mut next = vec![C64::new(0.0, 0.0); b + 1];
            next[b] = inv;
            for (j, qj) in q.iter().enumerate() {
                next[j] -= b as f64 * qj * inv;
            }
            q = next;
            c = -(b as f64) * c * inv;
        }
        for a in 0..=DEGREE {
            let poly: C64 = q.iter().enumerate().map(|(j, qj)| qj / (a + j + 1) as f64).sum();
            out[a][b] = poly + c * mu_neg[a];
        }
    }
    out
}

fn double_moment_series(nu: f64, a: usize, b: usize) -> C64 {
    // Σ_n (−iν)^n b! / ((b+n+1)! (a+b+n+2)); `ratio` tracks (−iν)^n b!/(b+n+1)!.
    let mut ratio = C64::new(1.0 / (b as f64 + 1.0), 0.0);
    let mut sum = ratio / (a + b + 2) as f64;
    for n in 1..200 {
        ratio *= -I * nu / (b + n + 1) as f64;
        let add = ratio / (a + b + n + 2) as f64;
        sum += add;
        if add.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
    }
    sum
}

/// Coefficients of the monomial interpolant through `(x_j, y_j)`.
pub(crate) fn monomial_coefficients(x: &[f64], y: &[C64]) -> Vec<C64> {
    // Newton divided differences, then expansion into monomials.
    let n = x.len();
    let mut dd: Vec<C64> = y.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (x[i] - x[i - level]);
        }
    }
    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        // coeffs ← coeffs·(y − x_i) + dd[i]
        let mut next = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            if j + 1 < n {
                next[j + 1] += coeffs[j];
            }
            next[j] -= coeffs[j] * x[i];
        }
        next[0] += dd[i];
        coeffs = next;
    }
    coeffs
}

/// Monomial coefficients of the Lagrange basis on [`NODES`]: column `j` holds
/// the coefficients of the polynomial that is 1 at node `j`.
pub(crate) fn lagrange_to_monomial() -> [[f64; DEGREE + 1]; DEGREE + 1] {
    let mut c = [[0.0; DEGREE + 1]; DEGREE + 1];
    for j in 0..=DEGREE {
        let mut y = vec![C64::new(0.0, 0.0); DEGREE + 1];
        y[j] = C64::new(1.0, 0.0);
        let coeffs = monomial_coefficients(&NODES, &y);
        for (b, cb) in coeffs.iter().enumerate() {
            c[b][j] = cb.re;
        }
    }
    c
}

/// Per-mode weights of one propagator panel with `ν = ωh/ε`.
///
/// For node samples `v_j`: `∫₀¹ e^{iνy} v(y) dy = Σ_j drive[j] v_j` and
/// `∫₀¹dx ∫₀ˣdy e^{−iν(x−y)} conj(v(x)) v(y) = Σ_jl conj(v_j) v_l pair[j][l]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PanelWeights {
    pub drive: [C64; DEGREE + 1],
    pub pair: [[C64; DEGREE + 1]; DEGREE + 1],
    pub carrier: C64,
}

impl PanelWeights {
    pub fn new(nu: f64, basis: &[[f64; DEGREE + 1]; DEGREE + 1]) -> Self {
        let mu = moments(nu, DEGREE);
        let m = double_moments(nu);
        let mut drive = [C64::new(0.0, 0.0); DEGREE + 1];
        for (j, d) in drive.iter_mut().enumerate() {
            *d = (0..=DEGREE).map(|b| basis[b][j] * mu[b]).sum();
        }
        let mut pair = [[C64::new(0.0, 0.0); DEGREE + 1]; DEGREE + 1];
        for (j, row) in pair.iter_mut().enumerate() {
            for (l, slot) in row.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..=DEGREE {
                    for b in 0..=DEGREE {
                        acc += basis[a][j] * basis[b][l] * m[a][b];
                    }
                }
                *slot = acc;
            }
        }
        Self { drive, pair, carrier: C64::new(0.0, -nu).exp() }
    }
}

/// `∫ e^{iωs} g(s) ds` over the span of `samples`, with `g` replaced by its
/// polynomial interpolant through the samples.
pub fn oscillatory_panel_integral(omega: f64, samples: &[(f64, C64)]) -> crate::Result<C64> {
    if samples.len() < 2 {
        return Err(crate::Error::InvalidParameter {
            name: "samples",
            reason: format!("need at least 2 samples per panel, got {}", samples.len()),
        });
    }
    let a = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let b = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let h = b - a;
    if !(h > 0.0) || !h.is_finite() {
        return Err(crate::Error::InvalidParameter { name: "samples", reason: "degenerate panel".into() });
    }
    let x: Vec<f64> = samples.iter().map(|s| (s.0 - a) / h).collect();
    let y: Vec<C64> = samples.iter().map(|s| s.1).collect();
    let coeffs = monomial_coefficients(&x, &y);
    let mu = moments(omega * h, coeffs.len() - 1);
    let sum: C64 = coeffs.iter().zip(&mu).map(|(c, m)| c * m).sum();
    Ok(C64::new(0.0, omega * a).exp() * h * sum)
}

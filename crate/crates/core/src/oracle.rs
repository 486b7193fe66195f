//! Independent reference computations used to check the discrete solvers.

use crate::geometry::WarpProfile;

/// `∫_a^b ds / w(s)` by composite Simpson quadrature.
pub fn inverse_warp_integral(warp: &WarpProfile, a: f64, b: f64) -> f64 {
    simpson(|s| 1.0 / warp.value(s), a, b, 4096)
}

pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `∫_a^b |∇γ|² dV` for `γ = c·dt/w` on `dt² + w² r² dθ²`, where
/// `|∇γ|² = 2c² w'²/w⁴`.
pub fn bochner_energy(warp: &WarpProfile, radius: f64, c: f64, a: f64, b: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    simpson(
        |t| {
            let w = warp.value(t);
            2.0 * c * c * warp.d1(t).powi(2) / w.powi(4) * tau * radius * w
        },
        a,
        b,
        8192,
    )
}

/// `sup_{t∈[a,b]} |∇γ|` for `γ = c·dt/w`, on a fine sample.
pub fn grad_gamma_sup(warp: &WarpProfile, c: f64, a: f64, b: f64) -> f64 {
    let n = 20000;
    (0..=n)
        .map(|k| {
            let t = a + (b - a) * k as f64 / n as f64;
            std::f64::consts::SQRT_2 * c.abs() * warp.d1(t).abs() / warp.value(t).powi(2)
        })
        .fold(0.0, f64::max)
}

/// Smallest `count` eigenvalues (with multiplicity) of the Fourier
/// pseudo-spectral Laplacian `-∂²_s` on a circle of the given radius,
/// sampled at `n` points. The operator is built column by column through
/// FFTs and diagonalized densely.
pub fn fourier_circle_spectrum(radius: f64, n: usize, count: usize) -> Vec<f64> {
    use rustfft::{num_complex::Complex, FftPlanner};
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let symbol: Vec<f64> = (0..n)
        .map(|j| {
            let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            k * k / (radius * radius)
        })
        .collect();
    let mut op = nalgebra::DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        buf[col] = Complex::new(1.0, 0.0);
        forward.process(&mut buf);
        buf.iter_mut().zip(&symbol).for_each(|(z, s)| *z *= *s / n as f64);
        inverse.process(&mut buf);
        for (row, z) in buf.iter().enumerate() {
            op[(row, col)] = z.re;
        }
    }
    let sym = (&op + op.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.truncate(count);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_spectrum_of_unit_circle() {
        let ev = fourier_circle_spectrum(1.0, 32, 7);
        let expected = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-10, "{ev:?}");
        }
        let ev = fourier_circle_spectrum(2.0, 16, 3);
        assert!((ev[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 4);
        assert!((v - 2.0).abs() < 1e-14);
    }
}

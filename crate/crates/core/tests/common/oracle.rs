//! Brute-force reference computations shared by the test targets.

use nalgebra::Vector3;
use num_complex::Complex64;
use skinforge::*;

/// Solves `E'' + k0^2 (eps(z) - sin^2 theta) E = 0` through the stack on a
/// uniform grid of step `h`, unit wave incident from the left, and returns the
/// field at the exit face (the transmission coefficient).
pub fn helmholtz_te(stack: &LayerStack, f: Frequency, theta_deg: f64, h: f64) -> Complex64 {
    let k0 = f.wavenumber();
    let s2 = theta_deg.to_radians().sin().powi(2);
    let mut k2_cells = Vec::new();
    for layer in &stack.layers {
        let n = (layer.thickness_m / h).round() as usize;
        assert!((n as f64 * h - layer.thickness_m).abs() < 1e-12, "grid must resolve every layer");
        let eps = Complex64::new(layer.permittivity, -layer.permittivity * layer.loss_tangent);
        k2_cells.extend(std::iter::repeat(k0 * k0 * (eps - s2)).take(n));
    }
    let nodes = k2_cells.len() + 1;
    // k^2 at nodes: averaged on both sides of each node
    let k2_air = Complex64::new(k0 * k0 * (1.0 - s2), 0.0);
    let k2: Vec<Complex64> = (0..nodes)
        .map(|i| {
            let left = if i == 0 { k2_air } else { k2_cells[i - 1] };
            let right = if i == nodes - 1 { k2_air } else { k2_cells[i] };
            (left + right) * 0.5
        })
        .collect();

    // discrete plane waves in the bounding air: cos(kappa h) = 1 - (kz h)^2 / 2
    let kappa_h = (1.0 - k2_air.re * h * h / 2.0).acos();
    let out = Complex64::from_polar(1.0, -kappa_h);
    let one = Complex64::new(1.0, 0.0);

    let mut lower = vec![one; nodes];
    let mut diag: Vec<Complex64> = k2.iter().map(|k| k * h * h - 2.0).collect();
    let mut upper = vec![one; nodes];
    let mut rhs = vec![Complex64::new(0.0, 0.0); nodes];
    diag[0] += out;
    rhs[0] = Complex64::new(0.0, -2.0 * kappa_h.sin());
    diag[nodes - 1] += out;
    lower[0] = Complex64::new(0.0, 0.0);
    upper[nodes - 1] = Complex64::new(0.0, 0.0);

    // Thomas algorithm
    for i in 1..nodes {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        let r = rhs[i - 1];
        rhs[i] -= m * r;
    }
    let mut x = vec![Complex64::new(0.0, 0.0); nodes];
    x[nodes - 1] = rhs[nodes - 1] / diag[nodes - 1];
    for i in (0..nodes - 1).rev() {
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    }
    x[nodes - 1]
}

pub fn helmholtz_extrapolated(stack: &LayerStack, f: Frequency, theta_deg: f64) -> Complex64 {
    let h = 1e-6;
    let coarse = helmholtz_te(stack, f, theta_deg, h);
    let fine = helmholtz_te(stack, f, theta_deg, h / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Tensor-product Gauss-Legendre integral of `exp(jk0 r.r')` over one pixel.
pub fn pixel_quadrature(dir: Direction, pitch: f64, c: &Vector3<f64>, f: Frequency, order: usize) -> Complex64 {
    let k0 = f.wavenumber();
    let rule = gauss_legendre(order);
    let r = dir.unit_vector();
    let half = pitch / 2.0;
    let mut sum = Complex64::new(0.0, 0.0);
    for (xi, wi) in &rule {
        for (yj, wj) in &rule {
            let x = c.x + half * xi;
            let y = c.y + half * yj;
            sum += Complex64::from_polar(wi * wj * half * half, k0 * (r.x * x + r.y * y));
        }
    }
    sum
}

/// Element-wise recomputation of the mismatch from first principles.
pub fn naive_mismatch(layout: &EmsLayout, table: &ResponseTable, wave: &PlaneWave, ideal: &CurrentSheet) -> f64 {
    let eta = FREE_SPACE_IMPEDANCE;
    let k = wave.frequency.wavenumber();
    let s = wave.direction.unit_vector();
    let (th, ph) = (wave.direction.theta_hat(), wave.direction.phi_hat());
    let mut total = 0.0;
    for p in 0..layout.p_count() {
        for q in 0..layout.q_count() {
            let idx = p * layout.q_count() + q;
            let x = (p as f64 - (layout.p_count() as f64 - 1.0) / 2.0) * layout.pitch_m();
            let y = (q as f64 - (layout.q_count() as f64 - 1.0) / 2.0) * layout.pitch_m();
            let a = Complex64::from_polar(wave.magnitude, k * (s.x * x + s.y * y));
            let (a_te, a_tm) = match wave.polarization {
                Polarization::Phi => (a, Complex64::new(0.0, 0.0)),
                Polarization::Theta => (Complex64::new(0.0, 0.0), a),
            };
            let row = table.sample(layout.cells()[idx]).unwrap();
            let t_te = Complex64::from_polar(row.te.magnitude, row.te.phase_deg.to_radians());
            let t_tm = Complex64::from_polar(row.tm.magnitude, row.tm.phase_deg.to_radians());
            let (o_te, o_tm) = (t_te * a_te, t_tm * a_tm);
            let e: [Complex64; 3] = [
                ph.x * o_te + th.x * o_tm,
                ph.y * o_te + th.y * o_tm,
                ph.z * o_te + th.z * o_tm,
            ];
            let kh = [-s.x, -s.y, -s.z];
            let hfield = [
                (e[2] * kh[1] - e[1] * kh[2]) / eta,
                (e[0] * kh[2] - e[2] * kh[0]) / eta,
                (e[1] * kh[0] - e[0] * kh[1]) / eta,
            ];
            // z x H = (-Hy, Hx, 0); E x z = (Ey, -Ex, 0)
            let je = [-hfield[1], hfield[0]];
            let jm = [e[1], -e[0]];
            let ie = &ideal.electric[idx];
            let im = &ideal.magnetic[idx];
            total += (eta * (je[0] - ie.x)).norm_sqr()
                + (eta * (je[1] - ie.y)).norm_sqr()
                + (jm[0] - im.x).norm_sqr()
                + (jm[1] - im.y).norm_sqr();
        }
    }
    total
}

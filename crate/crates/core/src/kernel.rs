//! Stokes fundamental solution `(U, P)` on R^n, its gradient and its Fourier symbol.
//!
//! ```text
//! U_ij(x) = 1/(2 n w_n) [ d_ij / ((n-2)|x|^(n-2)) + x_i x_j / |x|^n ]
//! P_j(x)  = 1/(n w_n) x_j / |x|^n
//! ```
//! with `w_n` the volume of the unit ball. For each fixed `j` the pair solves
//! `-Lap U_.j + grad P_j = e_j delta_0`, `div U_.j = 0`.

use crate::error::{Error, Result};

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    let mut w = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        w *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    w
}

/// Origin weight that completes the punctured lattice sum of `|x|^(2-n)`
/// on `Z^n`: `sum'_j |j h|^(2-n) phi(j h) h^n + w h^2 phi(0)` matches
/// `int |x|^(2-n) phi` to `O(h^4)` for smooth, rapidly decaying `phi`.
/// `w` is minus the analytically continued Epstein zeta sum
/// `sum'_j |j|^(-2s)` at `s = (n-2)/2`, evaluated by theta splitting.
pub fn lattice_origin_weight(n: usize) -> f64 {
    use std::f64::consts::PI;
    assert!(n >= 3);
    // lattice points of Z^n by squared radius, up to |j|^2 = 24 (the
    // neglected terms are below exp(-24 pi))
    const MAX_R2: usize = 24;
    let mut counts = vec![0.0f64; MAX_R2 + 1];
    counts[0] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0f64; MAX_R2 + 1];
        for (r2, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for k in -4i64..=4 {
                let t = r2 + (k * k) as usize;
                if t <= MAX_R2 {
                    next[t] += c;
                }
            }
        }
        counts = next;
    }
    let s = (n as f64 - 2.0) / 2.0;
    let odd = n % 2 == 1;
    // upper incomplete gamma Gamma(s, a) by upward recurrence from 1/2 or 1
    let upper_gamma = |a: f64| {
        let (mut g, mut order) = if odd {
            (PI.sqrt() * libm::erfc(a.sqrt()), 0.5)
        } else {
            ((-a).exp(), 1.0)
        };
        while order < s {
            g = order * g + a.powf(order) * (-a).exp();
            order += 1.0;
        }
        g
    };
    let gamma_s = {
        let (mut g, mut order) = if odd { (PI.sqrt(), 0.5) } else { (1.0, 1.0) };
        while order < s {
            g *= order;
            order += 1.0;
        }
        g
    };
    let mut sum = -1.0 / s - 1.0;
    for (r2, &c) in counts.iter().enumerate().skip(1) {
        if c == 0.0 {
            continue;
        }
        let a = PI * r2 as f64;
        sum += c * (a.powf(-s) * upper_gamma(a) + (-a).exp() / a);
    }
    -PI.powf(s) / gamma_s * sum
}

/// One scalar entry of the kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    /// `U_ij`
    Velocity(usize, usize),
    /// `P_j`
    Pressure(usize),
    /// `d_k U_ij`
    VelocityGradient(usize, usize, usize),
}

impl Component {
    /// Odd under `x -> -x`.
    pub fn is_odd(&self) -> bool {
        !matches!(self, Component::Velocity(..))
    }
}

/// Closed-form Stokes kernel for a fixed dimension.
#[derive(Debug, Clone, Copy)]
pub struct StokesKernel {
    dim: usize,
    velocity_scale: f64,
    pressure_scale: f64,
}

impl StokesKernel {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::Dimension(dim));
        }
        let w = unit_ball_volume(dim);
        Ok(Self {
            dim,
            velocity_scale: 1.0 / (2.0 * dim as f64 * w),
            pressure_scale: 1.0 / (dim as f64 * w),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value of a single component at `x != 0`. No check on `x`.
    #[inline]
    pub fn component(&self, c: Component, x: &[f64]) -> f64 {
        let n = self.dim;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let rn = r.powi(n as i32);
        match c {
            Component::Velocity(i, j) => {
                let diag = if i == j {
                    r2 / ((n - 2) as f64 * rn)
                } else {
                    0.0
                };
                self.velocity_scale * (diag + x[i] * x[j] / rn)
            }
            Component::Pressure(j) => self.pressure_scale * x[j] / rn,
            Component::VelocityGradient(i, j, k) => {
                let mut s = -(n as f64) * x[i] * x[j] * x[k] / r2;
                if i == j {
                    s -= x[k];
                }
                if i == k {
                    s += x[j];
                }
                if j == k {
                    s += x[i];
                }
                self.velocity_scale * s / rn
            }
        }
    }

    /// Average of a component over the cube `[-h/2, h/2]^n`, approximated by
    /// `m` points per axis with the exact centre skipped. For odd `m` the
    /// skipped centre subcell is a copy of the whole cell scaled by `1/m`, so
    /// homogeneity of degree `2-n` closes the sum:
    /// `A = sum' / (m^n - m^(n-2))`. Odd components return exactly 0.
    pub fn cell_average(&self, c: Component, h: f64, m: usize) -> f64 {
        if c.is_odd() {
            return 0.0;
        }
        let n = self.dim;
        let offsets: Vec<f64> = (0..m)
            .map(|i| ((i as f64 + 0.5) / m as f64 - 0.5) * h)
            .collect();
        let total = m.pow(n as u32);
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..total {
            for a in 0..n {
                x[a] = offsets[idx[a]];
            }
            if x.iter().any(|v| *v != 0.0) {
                sum += self.component(c, &x);
                count += 1;
            }
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < m {
                    break;
                }
                idx[a] = 0;
            }
        }
        if m % 2 == 1 {
            sum / (total - m.pow(n as u32 - 2)) as f64
        } else {
            sum / count as f64
        }
    }

    /// Origin value `K_0` whose weight `K_0 h^n` equals the lattice
    /// correction of [`lattice_origin_weight`] for this component. Odd
    /// components return 0; by cubic symmetry `x_i x_j |x|^-n` carries
    /// `delta_ij / n` of the weight of `|x|^(2-n)`.
    pub fn lattice_origin_value(&self, c: Component, h: f64) -> f64 {
        match c {
            Component::Velocity(i, j) if i == j => {
                let n = self.dim as f64;
                let w = lattice_origin_weight(self.dim);
                self.velocity_scale * w * (1.0 / (n - 2.0) + 1.0 / n) * h.powf(2.0 - n)
            }
            _ => 0.0,
        }
    }

    /// First-moment lattice correction for `P_j`, added at the offsets
    /// `+-e_j` (in units of `h`): `+-(c_P w / 2n) h^(1-n)`, where
    /// `w = lattice_origin_weight(n)`. Combined with the zero origin value it
    /// makes the punctured sum for `P` fourth-order accurate. Other
    /// components and offsets return 0.
    pub fn lattice_neighbor_value(&self, c: Component, offset: &[isize], h: f64) -> f64 {
        let Component::Pressure(j) = c else {
            return 0.0;
        };
        let sign = offset[j];
        if sign.abs() != 1 || offset.iter().enumerate().any(|(a, &o)| a != j && o != 0) {
            return 0.0;
        }
        let n = self.dim as f64;
        sign as f64 * self.pressure_scale * lattice_origin_weight(self.dim) / (2.0 * n)
            * h.powf(1.0 - n)
    }

    pub fn eval(&self, x: &[f64]) -> Result<KernelMatrix> {
        let n = self.dim;
        if x.len() != n {
            return Err(Error::Parameter {
                name: "x",
                reason: format!("point has {} coordinates, dimension is {n}", x.len()),
            });
        }
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::Singular);
        }
        let mut u = vec![0.0; n * n];
        let mut p = vec![0.0; n];
        let mut grad = vec![0.0; n * n * n];
        for i in 0..n {
            p[i] = self.component(Component::Pressure(i), x);
            for j in 0..n {
                u[i * n + j] = self.component(Component::Velocity(i, j), x);
                for k in 0..n {
                    grad[(i * n + j) * n + k] =
                        self.component(Component::VelocityGradient(i, j, k), x);
                }
            }
        }
        Ok(KernelMatrix { dim: n, u, p, grad })
    }
}

/// `U(x)`, `P(x)` and `grad U(x)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub dim: usize,
    /// Row-major `n x n`.
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// `grad[(i*n + j)*n + k] = d_k U_ij`.
    pub grad: Vec<f64>,
}

impl KernelMatrix {
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.dim + j]
    }

    pub fn grad(&self, i: usize, j: usize, k: usize) -> f64 {
        self.grad[(i * self.dim + j) * self.dim + k]
    }
}

pub fn eval_kernel(x: &[f64], n: usize) -> Result<KernelMatrix> {
    StokesKernel::new(n)?.eval(x)
}

/// Fourier symbol of the Stokes solution operator at `xi != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesSymbol {
    /// `(I - xi xi^T / |xi|^2) / |xi|^2`, row-major.
    pub velocity: Vec<f64>,
    /// Imaginary part of the pressure symbol `-i xi / |xi|^2`.
    pub pressure_imag: Vec<f64>,
}

pub fn stokes_symbol(xi: &[f64]) -> Result<StokesSymbol> {
    let n = xi.len();
    let k2: f64 = xi.iter().map(|v| v * v).sum();
    if k2 == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let mut velocity = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 1.0 } else { 0.0 };
            velocity[i * n + j] = (d - xi[i] * xi[j] / k2) / k2;
        }
    }
    let pressure_imag = xi.iter().map(|v| -v / k2).collect();
    Ok(StokesSymbol {
        velocity,
        pressure_imag,
    })
}

fn check_step(x: &[f64], h: f64) -> Result<()> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(h > 0.0) || norm <= 4.0 * h {
        return Err(Error::TooCloseToOrigin { norm, step: h });
    }
    Ok(())
}

fn shifted(x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += delta;
    y
}

/// Second-order central differences of `-Lap U_.j + grad P_j` at `x`;
/// entry `(i, j)` is row-major. Vanishes like `h^2` away from the origin.
pub fn kernel_pde_residual(x: &[f64], n: usize, h: f64) -> Result<Vec<f64>> {
    let kernel = StokesKernel::new(n)?;
    check_step(x, h)?;
    let mut res = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let c = Component::Velocity(i, j);
            let centre = kernel.component(c, x);
            let mut lap = 0.0;
            for k in 0..n {
                lap += kernel.component(c, &shifted(x, k, h)) - 2.0 * centre
                    + kernel.component(c, &shifted(x, k, -h));
            }
            lap /= h * h;
            let pj = Component::Pressure(j);
            let dp = (kernel.component(pj, &shifted(x, i, h))
                - kernel.component(pj, &shifted(x, i, -h)))
                / (2.0 * h);
            res[i * n + j] = -lap + dp;
        }
    }
    Ok(res)
}

/// Central-difference `d_k U_ij`, laid out like [`KernelMatrix::grad`].
pub fn fd_kernel_gradient(x: &[f64], n: usize, h: f64) -> Result<Vec<f64>> {
    let kernel = StokesKernel::new(n)?;
    check_step(x, h)?;
    let mut g = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let c = Component::Velocity(i, j);
            for k in 0..n {
                g[(i * n + j) * n + k] = (kernel.component(c, &shifted(x, k, h))
                    - kernel.component(c, &shifted(x, k, -h)))
                    / (2.0 * h);
            }
        }
    }
    Ok(g)
}

/// Central-difference column divergence `sum_i d_i U_ij`, one entry per `j`.
pub fn fd_kernel_divergence(x: &[f64], n: usize, h: f64) -> Result<Vec<f64>> {
    let g = fd_kernel_gradient(x, n, h)?;
    Ok((0..n)
        .map(|j| (0..n).map(|i| g[(i * n + j) * n + i]).sum())
        .collect())
}

pub fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn five_dimensional_values() {
        let k = eval_kernel(&[1.0, 0.0, 0.0, 0.0, 0.0], 5).unwrap();
        let w5 = 8.0 * PI * PI / 15.0;
        let scale = 1.0 / (10.0 * w5);
        assert!((k.u(0, 0) - scale * (1.0 / 3.0 + 1.0)).abs() < 1e-15);
        assert!((k.u(0, 0) - 0.025330).abs() < 1e-6);
        assert!((k.u(1, 1) - 0.0063326).abs() < 1e-7);
        assert_eq!(k.u(0, 1), 0.0);
        assert!((k.p[0] - 1.0 / (5.0 * w5)).abs() < 1e-15);
        assert!((k.p[0] - 0.037997).abs() < 5e-6);
    }

    #[test]
    fn scaling_by_two() {
        let a = eval_kernel(&[1.0, 0.0, 0.0, 0.0, 0.0], 5).unwrap();
        let b = eval_kernel(&[2.0, 0.0, 0.0, 0.0, 0.0], 5).unwrap();
        assert!((b.u(0, 0) / a.u(0, 0) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn rejects_origin_and_low_dimension() {
        assert!(matches!(eval_kernel(&[0.0; 3], 3), Err(Error::Singular)));
        assert!(matches!(
            eval_kernel(&[1.0, 0.0], 2),
            Err(Error::Dimension(2))
        ));
        assert!(kernel_pde_residual(&[0.03, 0.0, 0.0], 3, 0.01).is_err());
    }

    #[test]
    fn symbol_examples() {
        let s = stokes_symbol(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j && i > 0 { 1.0 } else { 0.0 };
                assert_eq!(s.velocity[i * 4 + j], want);
            }
        }
        let s = stokes_symbol(&[1.0, 1.0, 0.0]).unwrap();
        let want = [0.25, -0.25, 0.0, -0.25, 0.25, 0.0, 0.0, 0.0, 0.5];
        for (a, b) in s.velocity.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let xi = [0.3, -1.2, 2.0];
        let s = stokes_symbol(&xi).unwrap();
        for i in 0..3 {
            let v: f64 = (0..3).map(|j| s.velocity[i * 3 + j] * xi[j]).sum();
            assert!(v.abs() < 1e-15);
        }
        assert!(matches!(
            stokes_symbol(&[0.0; 3]),
            Err(Error::ZeroFrequency)
        ));
    }

    #[test]
    fn residual_is_second_order() {
        let x = [1.0, 0.0, 0.0, 0.0, 0.0];
        let a = frobenius(&kernel_pde_residual(&x, 5, 1e-2).unwrap());
        let b = frobenius(&kernel_pde_residual(&x, 5, 5e-3).unwrap());
        assert!((a / b - 4.0).abs() < 0.8, "ratio {}", a / b);

        let x3 = [0.0, 1.0, 0.0];
        let r = frobenius(&kernel_pde_residual(&x3, 3, 1e-2).unwrap());
        // full Hessian of U by central differences of the analytic gradient
        let d = 1e-4;
        let mut hess = Vec::new();
        for l in 0..3 {
            let a = eval_kernel(&shifted(&x3, l, d), 3).unwrap();
            let b = eval_kernel(&shifted(&x3, l, -d), 3).unwrap();
            hess.extend(a.grad.iter().zip(&b.grad).map(|(a, b)| (a - b) / (2.0 * d)));
        }
        let scale = frobenius(&hess);
        assert!(r < 1e-3 * scale, "{r} vs {scale}");
    }

    #[test]
    fn fd_divergence_vanishes_at_second_order() {
        let x = [0.4, -0.9, 0.3];
        let a = frobenius(&fd_kernel_divergence(&x, 3, 1e-2).unwrap());
        let b = frobenius(&fd_kernel_divergence(&x, 3, 5e-3).unwrap());
        assert!(a < 1e-4);
        assert!((a / b - 4.0).abs() < 0.5, "ratio {}", a / b);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let x = [0.6, 0.0, -0.8];
        let k = eval_kernel(&x, 3).unwrap();
        let e = |h: f64| {
            let fd = fd_kernel_gradient(&x, 3, h).unwrap();
            frobenius(
                &fd.iter()
                    .zip(&k.grad)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            )
        };
        let ratio = e(1e-2) / e(5e-3);
        assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn trace_of_gradient_is_zero() {
        let x = [0.3, 0.5, -0.2, 1.1, 0.7];
        let k = eval_kernel(&x, 5).unwrap();
        for j in 0..5 {
            let div: f64 = (0..5).map(|i| k.grad(i, j, i)).sum();
            assert!(div.abs() < 1e-14);
        }
    }

    #[test]
    fn lattice_weights_match_theta_split_oracle() {
        // oracle: the same continuation evaluated with mpmath at two
        // different splitting points (the result must not depend on it)
        let want = [
            (3, 2.837_297_479_480_619_5),
            (4, 5.545_177_444_479_562),
            (5, 8.457_419_791_366_64),
        ];
        for (n, w) in want {
            assert!((lattice_origin_weight(n) - w).abs() < 1e-10, "n={n}");
        }
        // n = 4 is 8 ln 2
        assert!((lattice_origin_weight(4) - 8.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cell_average_of_odd_component_is_zero() {
        let k = StokesKernel::new(3).unwrap();
        assert_eq!(k.cell_average(Component::Pressure(1), 0.1, 5), 0.0);
        let avg = k.cell_average(Component::Velocity(0, 0), 1.0, 5);
        // exact mean of 1/|x| over the unit cube is 2.3800772...; by cubic
        // symmetry the mean of x_0^2/|x|^3 is a third of it
        let exact = (4.0 / 3.0) * 2.380_077_2 / (8.0 * PI);
        assert!((avg / exact - 1.0).abs() < 2e-3, "{avg} vs {exact}");
    }
}

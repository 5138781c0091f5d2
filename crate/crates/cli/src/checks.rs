//! Seeded kernel invariant suite.

use nsrn_core::kernel::{fd_kernel_gradient, frobenius, kernel_pde_residual, stokes_symbol};
use nsrn_core::{Result, StokesKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    /// Worst value over the samples.
    pub worst: f64,
    pub bound: String,
    pub pass: bool,
}

const EXACT: f64 = 1e-12;

fn random_point(rng: &mut ChaCha8Rng, n: usize, r_lo: f64, r_hi: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = frobenius(&x);
        if norm > 0.1 && norm <= 1.0 {
            let r = rng.gen_range(r_lo..=r_hi);
            return x.iter().map(|v| v * r / norm).collect();
        }
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = frobenius(b).max(frobenius(a));
    if s == 0.0 {
        0.0
    } else {
        frobenius(&d) / s
    }
}

/// Runs every check at `samples` random points with `1 <= |x| <= 3`.
pub fn kernel_suite(n: usize, samples: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let kernel = StokesKernel::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym = 0.0f64;
    let mut parity = 0.0f64;
    let mut homog = 0.0f64;
    let mut div = 0.0f64;
    let (mut grad_lo, mut grad_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut pde_lo, mut pde_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut symbol = 0.0f64;
    for _ in 0..samples {
        let x = random_point(&mut rng, n, 1.0, 3.0);
        let k = kernel.eval(&x)?;
        for i in 0..n {
            for j in 0..n {
                let scale = frobenius(&k.u);
                sym = sym.max((k.u(i, j) - k.u(j, i)).abs() / scale);
                for kk in 0..n {
                    let gs = frobenius(&k.grad);
                    sym = sym.max((k.grad(i, j, kk) - k.grad(j, i, kk)).abs() / gs);
                }
            }
        }

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let km = kernel.eval(&neg)?;
        let minus = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<_>>();
        parity = parity
            .max(rel(&km.u, &k.u))
            .max(rel(&km.p, &minus(&k.p)))
            .max(rel(&km.grad, &minus(&k.grad)));

        let lambda = rng.gen_range(0.25..4.0);
        let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let ks = kernel.eval(&scaled)?;
        let nf = n as f64;
        let times = |v: &[f64], e: f64| v.iter().map(|a| a * lambda.powf(e)).collect::<Vec<_>>();
        homog = homog
            .max(rel(&ks.u, &times(&k.u, 2.0 - nf)))
            .max(rel(&ks.p, &times(&k.p, 1.0 - nf)))
            .max(rel(&ks.grad, &times(&k.grad, 1.0 - nf)));

        let gs = frobenius(&k.grad);
        for j in 0..n {
            let d: f64 = (0..n).map(|i| k.grad(i, j, i)).sum();
            div = div.max(d.abs() / gs);
        }

        let step = 0.02;
        let e1 = frobenius(
            &fd_kernel_gradient(&x, n, step)?
                .iter()
                .zip(&k.grad)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let e2 = frobenius(
            &fd_kernel_gradient(&x, n, step / 2.0)?
                .iter()
                .zip(&k.grad)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        grad_lo = grad_lo.min(e1 / e2);
        grad_hi = grad_hi.max(e1 / e2);

        let r1 = frobenius(&kernel_pde_residual(&x, n, 0.05)?);
        let r2 = frobenius(&kernel_pde_residual(&x, n, 0.025)?);
        pde_lo = pde_lo.min(r1 / r2);
        pde_hi = pde_hi.max(r1 / r2);

        let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        if frobenius(&xi) > 1e-3 {
            let s = stokes_symbol(&xi)?;
            let scale = frobenius(&s.velocity);
            for i in 0..n {
                let row: f64 = (0..n).map(|j| s.velocity[i * n + j] * xi[j]).sum();
                symbol = symbol.max(row.abs() / (scale * frobenius(&xi)));
                for j in 0..n {
                    symbol =
                        symbol.max((s.velocity[i * n + j] - s.velocity[j * n + i]).abs() / scale);
                }
            }
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let quad: f64 = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| v[i] * s.velocity[i * n + j] * v[j])
                        .sum::<f64>()
                })
                .sum();
            if quad < -EXACT * scale * frobenius(&v).powi(2) {
                symbol = symbol.max(-quad);
            }
        }
    }
    let exact = |name, worst: f64| CheckRow {
        name,
        worst,
        bound: format!("<= {EXACT:e}"),
        pass: worst <= EXACT,
    };
    let ratio = |name, lo: f64, hi: f64, a: f64, b: f64| CheckRow {
        name,
        worst: if (lo - 4.0).abs() > (hi - 4.0).abs() {
            lo
        } else {
            hi
        },
        bound: format!("in [{a}, {b}]"),
        pass: lo >= a && hi <= b,
    };
    Ok(vec![
        exact("symmetry", sym),
        exact("parity", parity),
        exact("homogeneity", homog),
        exact("divergence_free", div),
        ratio("gradient_fd_halving", grad_lo, grad_hi, 3.5, 4.5),
        ratio("pde_residual_halving", pde_lo, pde_hi, 3.4, 4.6),
        exact("symbol_projection", symbol),
    ])
}

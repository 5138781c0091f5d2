//! Rank-agnostic real transforms on a zero-padded grid of `m = 2N` points per
//! axis, realised as successive 1-D transforms along each axis.
//!
//! The spectrum is a real-to-complex half spectrum: shape `[m; n-1] x (m/2+1)`,
//! row-major. When the real input is supported on the `[0, N)^n` corner only,
//! lines that are identically zero are skipped on the way in, and lines that
//! do not reach the `[0, N)^n` corner are skipped on the way out.

use std::sync::Arc;

use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const BATCH: usize = 16;

pub struct PaddedTransform {
    dim: usize,
    n: usize,
    m: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PaddedTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PaddedTransform")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl PaddedTransform {
    /// Transform for `dim` axes with `n` box points, padded to `2n`.
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim >= 1 && n >= 1);
        let m = 2 * n;
        let mut real = RealFftPlanner::<f64>::new();
        let mut complex = FftPlanner::<f64>::new();
        Self {
            dim,
            n,
            m,
            half: m / 2 + 1,
            r2c: real.plan_fft_forward(m),
            c2r: real.plan_fft_inverse(m),
            forward: complex.plan_fft_forward(m),
            inverse: complex.plan_fft_inverse(m),
        }
    }

    pub fn padded_points(&self) -> usize {
        self.m
    }

    pub fn padded_len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn box_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn spectrum_len(&self) -> usize {
        self.m.pow(self.dim as u32 - 1) * self.half
    }

    /// Multi-index of spectrum mode `idx`, with the last axis in `[0, m/2]`.
    pub fn mode(&self, mut idx: usize, out: &mut [usize]) {
        out[self.dim - 1] = idx % self.half;
        idx /= self.half;
        for a in (0..self.dim - 1).rev() {
            out[a] = idx % self.m;
            idx /= self.m;
        }
    }

    /// `true` if the first `count` base-`m` digits of `o` are all `< n`.
    fn in_corner(&self, mut o: usize, count: usize) -> bool {
        for _ in 0..count {
            if o % self.m >= self.n {
                return false;
            }
            o /= self.m;
        }
        true
    }

    /// Box row (base `n`) for a spectrum row (base `m`), if inside the corner.
    fn box_row(&self, row: usize) -> Option<usize> {
        let mut o = row;
        let mut out = 0;
        let mut weight = 1;
        for _ in 0..self.dim - 1 {
            let d = o % self.m;
            if d >= self.n {
                return None;
            }
            out += d * weight;
            weight *= self.n;
            o /= self.m;
        }
        Some(out)
    }

    fn spectrum_row(&self, box_row: usize) -> usize {
        let mut o = box_row;
        let mut out = 0;
        let mut weight = 1;
        for _ in 0..self.dim - 1 {
            out += (o % self.n) * weight;
            weight *= self.m;
            o /= self.n;
        }
        out
    }

    /// Forward transform of `[0, N)^n` box data, zero padded to `m^n`.
    pub fn forward_box(&self, data: &[f64]) -> Vec<Complex64> {
        assert_eq!(data.len(), self.box_len());
        let (n, m) = (self.n, self.m);
        let mut spec = vec![Complex64::default(); self.spectrum_len()];
        spec.par_chunks_mut(self.half).enumerate().for_each_init(
            || (vec![0.0; m], self.r2c.make_scratch_vec()),
            |(buf, scratch), (row, out)| {
                if let Some(b) = self.box_row(row) {
                    buf[..n].copy_from_slice(&data[b * n..(b + 1) * n]);
                    buf[n..].iter_mut().for_each(|v| *v = 0.0);
                    self.r2c
                        .process_with_scratch(buf, out, scratch)
                        .expect("real transform lengths");
                }
            },
        );
        for axis in (0..self.dim - 1).rev() {
            self.complex_axis(&mut spec, axis, true, true);
        }
        spec
    }

    /// Forward transform of a full padded array of `m^n` values.
    pub fn forward_full(&self, data: &[f64]) -> Vec<Complex64> {
        assert_eq!(data.len(), self.padded_len());
        let m = self.m;
        let mut spec = vec![Complex64::default(); self.spectrum_len()];
        spec.par_chunks_mut(self.half)
            .zip(data.par_chunks(m))
            .for_each_init(
                || (vec![0.0; m], self.r2c.make_scratch_vec()),
                |(buf, scratch), (out, row)| {
                    buf.copy_from_slice(row);
                    self.r2c
                        .process_with_scratch(buf, out, scratch)
                        .expect("real transform lengths");
                },
            );
        for axis in (0..self.dim - 1).rev() {
            self.complex_axis(&mut spec, axis, true, false);
        }
        spec
    }

    /// Inverse transform scaled by `1/m^n`, returning only the `[0, N)^n`
    /// corner. The spectrum is used as scratch.
    pub fn inverse_box(&self, spec: &mut [Complex64]) -> Vec<f64> {
        assert_eq!(spec.len(), self.spectrum_len());
        for axis in 0..self.dim - 1 {
            self.complex_axis(spec, axis, false, true);
        }
        let (n, m, half) = (self.n, self.m, self.half);
        let scale = 1.0 / self.padded_len() as f64;
        let spec: &[Complex64] = spec;
        let mut out = vec![0.0; self.box_len()];
        out.par_chunks_mut(n).enumerate().for_each_init(
            || {
                (
                    vec![Complex64::default(); half],
                    vec![0.0; m],
                    self.c2r.make_scratch_vec(),
                )
            },
            |(cbuf, rbuf, scratch), (b, o)| {
                let row = self.spectrum_row(b);
                cbuf.copy_from_slice(&spec[row * half..(row + 1) * half]);
                // the output is real: drop rounding in the self-conjugate bins
                cbuf[0].im = 0.0;
                cbuf[half - 1].im = 0.0;
                self.c2r
                    .process_with_scratch(cbuf, rbuf, scratch)
                    .expect("real transform lengths");
                for (dst, src) in o.iter_mut().zip(rbuf.iter()) {
                    *dst = src * scale;
                }
            },
        );
        out
    }

    /// Complex transform along `axis` (< n-1). With `prune`, blocks whose
    /// preceding axes leave the `[0, N)` corner are skipped.
    fn complex_axis(&self, spec: &mut [Complex64], axis: usize, forward: bool, prune: bool) {
        let m = self.m;
        let inner = self.m.pow((self.dim - 2 - axis) as u32) * self.half;
        let fft = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        spec.par_chunks_mut(m * inner)
            .enumerate()
            .filter(|(o, _)| !prune || self.in_corner(*o, axis))
            .for_each_init(
                || {
                    (
                        vec![Complex64::default(); BATCH * m],
                        vec![Complex64::default(); fft.get_inplace_scratch_len()],
                    )
                },
                |(lines, scratch), (_, block)| {
                    let mut c0 = 0;
                    while c0 < inner {
                        let b = BATCH.min(inner - c0);
                        for k in 0..m {
                            let src = &block[k * inner + c0..k * inner + c0 + b];
                            for (j, v) in src.iter().enumerate() {
                                lines[j * m + k] = *v;
                            }
                        }
                        fft.process_with_scratch(&mut lines[..b * m], scratch);
                        for k in 0..m {
                            let dst = &mut block[k * inner + c0..k * inner + c0 + b];
                            for (j, v) in dst.iter_mut().enumerate() {
                                *v = lines[j * m + k];
                            }
                        }
                        c0 += b;
                    }
                },
            );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(dim: usize, m: usize, data: &[f64]) -> Vec<Complex64> {
        let len = m.pow(dim as u32);
        let coords = |mut i: usize| {
            let mut c = vec![0; dim];
            for a in (0..dim).rev() {
                c[a] = i % m;
                i /= m;
            }
            c
        };
        (0..len)
            .map(|k| {
                let kc = coords(k);
                let mut s = Complex64::default();
                for (x, v) in data.iter().enumerate() {
                    let xc = coords(x);
                    let phase: usize = kc.iter().zip(&xc).map(|(a, b)| a * b).sum();
                    let ang = -2.0 * PI * (phase % m) as f64 / m as f64;
                    s += Complex64::new(ang.cos(), ang.sin()) * v;
                }
                s
            })
            .collect()
    }

    fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..len)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn full_forward_matches_naive_dft() {
        for dim in 1..=3 {
            let t = PaddedTransform::new(dim, 3);
            let data = pseudo_random(t.padded_len(), dim as u64);
            let spec = t.forward_full(&data);
            let want = naive_dft(dim, 6, &data);
            let mut mode = vec![0; dim];
            for (i, s) in spec.iter().enumerate() {
                t.mode(i, &mut mode);
                let full = mode.iter().fold(0, |acc, &k| acc * 6 + k);
                assert!((s - want[full]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn box_forward_equals_padded_forward() {
        let t = PaddedTransform::new(3, 4);
        let data = pseudo_random(t.box_len(), 7);
        let mut padded = vec![0.0; t.padded_len()];
        for (i, v) in data.iter().enumerate() {
            let (a, b, c) = (i / 16, (i / 4) % 4, i % 4);
            padded[(a * 8 + b) * 8 + c] = *v;
        }
        let s1 = t.forward_box(&data);
        let s2 = t.forward_full(&padded);
        for (a, b) in s1.iter().zip(&s2) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_restores_box() {
        for dim in 1..=4 {
            let t = PaddedTransform::new(dim, 3);
            let data = pseudo_random(t.box_len(), 11 + dim as u64);
            let mut spec = t.forward_box(&data);
            let back = t.inverse_box(&mut spec);
            for (a, b) in data.iter().zip(&back) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }
}

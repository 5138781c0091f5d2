use super::{GridSpec, ScalarField, TensorField, VectorField};
use crate::error::{param, Error, Result};
use crate::kernel::unit_ball_volume;

/// Pointwise absolute value of a sampled field.
pub trait Pointwise {
    fn grid(&self) -> &GridSpec;
    fn abs_at(&self, idx: usize) -> f64;
}

impl Pointwise for ScalarField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    fn abs_at(&self, idx: usize) -> f64 {
        self.data[idx].abs()
    }
}

impl Pointwise for VectorField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    fn abs_at(&self, idx: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c[idx] * c[idx])
            .sum::<f64>()
            .sqrt()
    }
}

impl Pointwise for TensorField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    fn abs_at(&self, idx: usize) -> f64 {
        self.entries
            .iter()
            .map(|c| c[idx] * c[idx])
            .sum::<f64>()
            .sqrt()
    }
}

/// `max_x (1 + |x|)^a |v(x)|` over the grid.
pub fn weighted_sup_norm<F: Pointwise>(v: &F, exponent: f64) -> f64 {
    let grid = v.grid();
    (0..grid.len())
        .map(|idx| (1.0 + grid.radius(idx)).powf(exponent) * v.abs_at(idx))
        .fold(0.0, f64::max)
}

/// Box-restricted `C^1_d` norm: `sup (1+|x|)^(n-3)|v| + sup (1+|x|)^(n-2)|grad v|`.
pub fn cd1_norm(v: &VectorField, grad_v: &TensorField) -> Result<f64> {
    v.grid.ensure_same(&grad_v.grid)?;
    let n = v.dim() as f64;
    Ok(weighted_sup_norm(v, n - 3.0) + weighted_sup_norm(grad_v, n - 2.0))
}

/// Integration region; balls are clipped to the box.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Whole,
    Ball { center: Vec<f64>, radius: f64 },
    Complement { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Self {
        Region::Ball {
            center: vec![0.0; dim],
            radius,
        }
    }

    pub fn outside(dim: usize, radius: f64) -> Self {
        Region::Complement {
            center: vec![0.0; dim],
            radius,
        }
    }
}

/// Calls `visit(idx)` for every grid point inside the closed ball `B_r(c)`.
pub(crate) fn for_each_in_ball(
    grid: &GridSpec,
    center: &[f64],
    radius: f64,
    mut visit: impl FnMut(usize),
) {
    let n = grid.dim();
    let h = grid.spacing();
    let l = grid.half_width();
    let mut lo = vec![0usize; n];
    let mut hi = vec![0usize; n];
    for a in 0..n {
        let first = ((center[a] - radius + l) / h - 0.5).ceil().max(0.0);
        let last = ((center[a] + radius + l) / h - 0.5)
            .floor()
            .min(grid.points() as f64 - 1.0);
        if last < first {
            return;
        }
        lo[a] = first as usize;
        hi[a] = last as usize;
    }
    let r2 = radius * radius;
    let mut multi = lo.clone();
    loop {
        let d2: f64 = (0..n)
            .map(|a| {
                let d = grid.coord(multi[a]) - center[a];
                d * d
            })
            .sum();
        if d2 <= r2 {
            visit(grid.index(&multi));
        }
        let mut a = n;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            multi[a] += 1;
            if multi[a] <= hi[a] {
                break;
            }
            multi[a] = lo[a];
        }
    }
}

/// Midpoint-rule `(sum |s|^p h^n)^(1/p)` over the region.
pub fn lp_norm<F: Pointwise>(s: &F, p: f64, region: &Region) -> Result<f64> {
    lp_norm_with_coverage(s, p, region).map(|(v, _)| v)
}

/// Like [`lp_norm`], also returning the fraction of a ball region that lies
/// inside the box (1 for the other regions).
pub fn lp_norm_with_coverage<F: Pointwise>(s: &F, p: f64, region: &Region) -> Result<(f64, f64)> {
    if !(p >= 1.0) {
        return Err(param("p", format!("p >= 1 required, got {p}")));
    }
    let grid = *s.grid();
    let dv = grid.cell_volume();
    let pow = |v: f64| if p == 1.0 { v } else { v.powf(p) };
    let (sum, coverage) = match region {
        Region::Whole => ((0..grid.len()).map(|i| pow(s.abs_at(i))).sum::<f64>(), 1.0),
        Region::Ball { center, radius } => {
            check_ball(&grid, center, *radius)?;
            let mut sum = 0.0;
            let mut count = 0usize;
            for_each_in_ball(&grid, center, *radius, |i| {
                sum += pow(s.abs_at(i));
                count += 1;
            });
            let full = unit_ball_volume(grid.dim()) * radius.powi(grid.dim() as i32);
            (sum, (count as f64 * dv / full).min(1.0))
        }
        Region::Complement { center, radius } => {
            check_ball(&grid, center, *radius)?;
            let r2 = radius * radius;
            let mut x = vec![0.0; grid.dim()];
            let sum = (0..grid.len())
                .filter(|&i| {
                    grid.point(i, &mut x);
                    x.iter()
                        .zip(center)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        > r2
                })
                .map(|i| pow(s.abs_at(i)))
                .sum::<f64>();
            (sum, 1.0)
        }
    };
    let total = sum * dv;
    Ok((if p == 1.0 { total } else { total.powf(1.0 / p) }, coverage))
}

fn check_ball(grid: &GridSpec, center: &[f64], radius: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(param(
            "radius",
            format!("ball radius must be positive, got {radius}"),
        ));
    }
    if center.len() != grid.dim() {
        return Err(param("center", "centre dimension differs from the grid"));
    }
    Ok(())
}

pub fn positive_part(s: &ScalarField) -> ScalarField {
    ScalarField {
        grid: s.grid,
        data: s.data.iter().map(|v| v.max(0.0)).collect(),
    }
}

/// Value of the sampled Morrey norm and the ball attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct MorreySample {
    pub value: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Sampled `L^{p,lambda}` norm:
/// `(max over (x, r) of r^(-lambda) int_{B_r(x)} |s|^p)^(1/p)`.
///
/// The true norm takes a supremum over every ball; this is a lower bound
/// over the finite sample.
pub fn morrey_norm<F: Pointwise>(
    s: &F,
    p: f64,
    lambda: f64,
    centers: &[Vec<f64>],
    radii: &[f64],
) -> Result<MorreySample> {
    let grid = *s.grid();
    if !(p >= 1.0) {
        return Err(param("p", format!("p >= 1 required, got {p}")));
    }
    if !(lambda >= 0.0 && lambda < grid.dim() as f64) {
        return Err(param(
            "lambda",
            format!("0 <= lambda < n required, got {lambda}"),
        ));
    }
    if centers.is_empty() || radii.is_empty() {
        return Err(param("sample", "empty set of centres or radii"));
    }
    let dv = grid.cell_volume();
    let mut best: Option<MorreySample> = None;
    for c in centers {
        for &r in radii {
            check_ball(&grid, c, r)?;
            let mut sum = 0.0;
            for_each_in_ball(&grid, c, r, |i| sum += s.abs_at(i).powf(p));
            let value = r.powf(-lambda) * sum * dv;
            if best.as_ref().map_or(true, |b| value > b.value) {
                best = Some(MorreySample {
                    value,
                    center: c.clone(),
                    radius: r,
                });
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Fit("no Morrey sample".into()))?;
    best.value = best.value.powf(1.0 / p);
    Ok(best)
}

impl MorreySample {
    /// Default sample: centres on the sublattice of every `stride`-th grid
    /// point, radii `h 2^k <= L`.
    pub fn default_sample(grid: &GridSpec, stride: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let stride = stride.max(1);
        let n = grid.dim();
        let axis: Vec<f64> = (stride / 2..grid.points())
            .step_by(stride)
            .map(|k| grid.coord(k))
            .collect();
        let mut centers = vec![Vec::new()];
        for _ in 0..n {
            centers = centers
                .into_iter()
                .flat_map(|c: Vec<f64>| {
                    axis.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        let mut radii = Vec::new();
        let mut r = grid.spacing();
        while r <= grid.half_width() {
            radii.push(r);
            r *= 2.0;
        }
        (centers, radii)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_and_cancelling_weights() {
        let g = GridSpec::new(3, 8, 2.0).unwrap();
        assert_eq!(weighted_sup_norm(&VectorField::zeros(g), 2.0), 0.0);
        let v = VectorField::from_fn(g, |x, out| {
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            out[0] = (1.0 + r).powf(-1.7);
        });
        assert!((weighted_sup_norm(&v, 1.7) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_weighted_sup_matches_radial_scan() {
        let g = GridSpec::new(3, 32, 8.0).unwrap();
        let v = VectorField::from_fn(g, |x, out| {
            out[0] = (-x.iter().map(|a| a * a).sum::<f64>()).exp();
        });
        // brute force over the distinct grid radii
        let mut best: f64 = 0.0;
        for i in 0..32 {
            for j in 0..32 {
                for k in 0..32 {
                    let r = (g.coord(i).powi(2) + g.coord(j).powi(2) + g.coord(k).powi(2)).sqrt();
                    best = best.max((1.0 + r) * (-r * r).exp());
                }
            }
        }
        assert!((weighted_sup_norm(&v, 1.0) - best).abs() < 1e-12);
    }

    #[test]
    fn cd1_of_constant_field() {
        let g = GridSpec::new(5, 4, 8.0).unwrap();
        let v = VectorField::from_fn(g, |_, out| out[0] = -0.5);
        let grad = TensorField::zeros(g, 5, 5);
        let rmax = (0..g.len()).map(|i| g.radius(i)).fold(0.0, f64::max);
        let want = (1.0 + rmax).powi(2) * 0.5;
        assert!((cd1_norm(&v, &grad).unwrap() - want).abs() < 1e-12 * want);
        let other = GridSpec::new(5, 4, 7.0).unwrap();
        assert!(cd1_norm(&v, &TensorField::zeros(other, 5, 5)).is_err());
    }

    #[test]
    fn counting_measure_and_gaussian_integral() {
        let g = GridSpec::new(3, 8, 2.0).unwrap();
        let mut s = ScalarField::zeros(g);
        for idx in [0, 17, 200, 511] {
            s.data[idx] = 1.0;
        }
        let v = lp_norm(&s, 1.0, &Region::Whole).unwrap();
        assert!((v - 4.0 * g.cell_volume()).abs() < 1e-15);

        let g = GridSpec::new(3, 64, 4.0).unwrap();
        let s = ScalarField::from_fn(g, |x| (-x.iter().map(|a| a * a).sum::<f64>()).exp());
        let v = lp_norm(&s, 2.0, &Region::Whole).unwrap();
        assert!((v - (PI / 2.0).powf(0.75)).abs() < 1e-3);
        assert!(lp_norm(&s, 0.5, &Region::Whole).is_err());
        assert!(lp_norm(&s, 2.0, &Region::centered_ball(3, 0.0)).is_err());
    }

    #[test]
    fn ball_coverage_reports_clipping() {
        let g = GridSpec::new(3, 32, 4.0).unwrap();
        let s = ScalarField::from_fn(g, |_| 1.0);
        let (_, inner) = lp_norm_with_coverage(&s, 1.0, &Region::centered_ball(3, 2.0)).unwrap();
        assert!((inner - 1.0).abs() < 0.05);
        let corner = Region::ball(vec![4.0, 4.0, 4.0], 2.0);
        let (_, clipped) = lp_norm_with_coverage(&s, 1.0, &corner).unwrap();
        assert!((clipped - 0.125).abs() < 0.03, "{clipped}");
    }

    #[test]
    fn positive_part_clamps() {
        let g = GridSpec::new(3, 4, 1.0).unwrap();
        let s = ScalarField::from_fn(g, |x| x[0]);
        let p = positive_part(&s);
        for (a, b) in s.data.iter().zip(&p.data) {
            assert_eq!(*b, a.max(0.0));
        }
        let neg = ScalarField::from_fn(g, |_| -1.0);
        assert_eq!(
            lp_norm(&positive_part(&neg), 3.0, &Region::Whole).unwrap(),
            0.0
        );
    }

    #[test]
    fn morrey_lambda_zero_and_box() {
        let g = GridSpec::new(3, 16, 4.0).unwrap();
        let s = ScalarField::from_fn(g, |x| (-x.iter().map(|a| a * a).sum::<f64>()).exp());
        let centers = vec![vec![0.0; 3], vec![1.0, 0.5, 0.0]];
        let radii = [0.5, 1.0, 2.0];
        let m = morrey_norm(&s, 2.0, 0.0, &centers, &radii).unwrap();
        let big = lp_norm(&s, 2.0, &Region::centered_ball(3, 2.0)).unwrap();
        assert!((m.value - big).abs() < 1e-14);

        let boxed = ScalarField::from_fn(g, |x| {
            if x.iter().all(|a| a.abs() < 1.0) {
                1.0
            } else {
                0.0
            }
        });
        let m = morrey_norm(&boxed, 1.0, 0.0, &[vec![0.0; 3]], &[2.0]).unwrap();
        assert!((m.value - 8.0).abs() < 1e-12);
        assert!(morrey_norm(&s, 2.0, 3.0, &centers, &radii).is_err());
        assert!(morrey_norm(&s, 2.0, 1.0, &[], &radii).is_err());
    }

    #[test]
    fn morrey_of_inverse_radius() {
        let g = GridSpec::new(3, 64, 4.0).unwrap();
        let s = ScalarField::from_fn(g, |x| 1.0 / x.iter().map(|a| a * a).sum::<f64>().sqrt());
        let (_, radii) = MorreySample::default_sample(&g, 8);
        let m = morrey_norm(&s, 2.0, 1.0, &[vec![0.0; 3]], &radii).unwrap();
        // r^-1 int_{B_r} |x|^-2 = 4 pi for every r
        let exact = 4.0 * PI;
        assert!(
            (m.value.powi(2) - exact).abs() < 0.05 * exact,
            "{}",
            m.value.powi(2)
        );
    }
}

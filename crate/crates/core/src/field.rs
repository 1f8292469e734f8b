//! Three-component complex fields on a grid.

use crate::grid::GridSpec;
use crate::{sum, C64, Error, Result};
use rayon::prelude::*;

/// Spin component order used everywhere: index 0 holds the spin level +1,
/// index 1 the level 0, index 2 the level -1.
pub const COMPONENTS: usize = 3;

/// The discrete three-component wave function: one complex value per grid
/// point and spin level, stored flat in the grid's index order.
#[derive(Debug, Clone)]
pub struct SpinorField {
    grid: GridSpec,
    comp: [Vec<C64>; 3],
}

impl SpinorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.total_points();
        Self {
            grid,
            comp: [vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n]],
        }
    }

    pub fn from_components(grid: GridSpec, comp: [Vec<C64>; 3]) -> Result<Self> {
        let n = grid.total_points();
        for c in &comp {
            if c.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "component has {} entries, grid has {n} points",
                    c.len()
                )));
            }
        }
        Ok(Self { grid, comp })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, l: usize) -> &[C64] {
        &self.comp[l]
    }

    pub fn component_mut(&mut self, l: usize) -> &mut [C64] {
        &mut self.comp[l]
    }

    pub fn components(&self) -> &[Vec<C64>; 3] {
        &self.comp
    }

    pub fn is_finite(&self) -> bool {
        self.comp
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Total discrete norm over all three components,
    /// `sqrt(h^d sum_l sum_x |phi_l|^2)`.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.comp.iter().map(|c| sum::norm_sqr(c)).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    /// Scale so the total norm is one.
    pub fn normalized(&self) -> Result<SpinorField> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "cannot normalize a field with norm {n}"
            )));
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn scaled(&self, factor: f64) -> SpinorField {
        let mut out = self.clone();
        for c in &mut out.comp {
            par_map_inplace(c, |z| z * factor);
        }
        out
    }

    /// Largest pointwise magnitude over all components.
    pub fn sup_norm(&self) -> f64 {
        self.comp
            .iter()
            .map(|c| sup_of(c))
            .fold(0.0, f64::max)
    }
}

fn sup_of(c: &[C64]) -> f64 {
    if c.len() < 1 << 15 {
        c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        c.par_chunks(1 << 13)
            .map(|ch| ch.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }
}

/// Apply `f` to every entry of one component buffer.
pub fn par_map_inplace(c: &mut [C64], f: impl Fn(C64) -> C64 + Sync) {
    if c.len() < 1 << 14 {
        for z in c.iter_mut() {
            *z = f(*z);
        }
    } else {
        c.par_chunks_mut(1 << 13).for_each(|ch| {
            for z in ch.iter_mut() {
                *z = f(*z);
            }
        });
    }
}

/// Discrete inner product `h^d sum_{l,x} a_l(x) conj(b_l(x))`,
/// sesquilinear in the second argument.
pub fn inner_product(a: &SpinorField, b: &SpinorField) -> Result<C64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(
            "inner product of fields on different grids".into(),
        ));
    }
    let mut acc = C64::default();
    for l in 0..COMPONENTS {
        acc += sum::dot(a.component(l), b.component(l));
    }
    Ok(acc * a.grid.cell_volume())
}

/// `ca * a + cb * b` componentwise with real coefficients.
pub fn linear_combination(ca: f64, a: &SpinorField, cb: f64, b: &SpinorField) -> SpinorField {
    debug_assert_eq!(a.grid, b.grid);
    let mut out = a.clone();
    for l in 0..COMPONENTS {
        let bl = b.component(l);
        zip_map_inplace(out.component_mut(l), bl, |x, y| x * ca + y * cb);
    }
    out
}

pub(crate) fn zip_map_inplace(dst: &mut [C64], src: &[C64], f: impl Fn(C64, C64) -> C64 + Sync) {
    debug_assert_eq!(dst.len(), src.len());
    if dst.len() < 1 << 14 {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = f(*d, *s);
        }
    } else {
        dst.par_chunks_mut(1 << 13)
            .zip(src.par_chunks(1 << 13))
            .for_each(|(dc, sc)| {
                for (d, s) in dc.iter_mut().zip(sc) {
                    *d = f(*d, *s);
                }
            });
    }
}

/// Largest pointwise difference `max_l ||a_l - b_l||_inf`.
pub fn sup_distance(a: &SpinorField, b: &SpinorField) -> f64 {
    debug_assert_eq!(a.grid, b.grid);
    let mut worst = 0.0f64;
    for l in 0..COMPONENTS {
        let (al, bl) = (a.component(l), b.component(l));
        let m = if al.len() < 1 << 15 {
            al.iter()
                .zip(bl)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max)
        } else {
            al.par_chunks(1 << 13)
                .zip(bl.par_chunks(1 << 13))
                .map(|(xc, yc)| {
                    xc.iter()
                        .zip(yc)
                        .map(|(x, y)| (x - y).norm())
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max)
        };
        worst = worst.max(m);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> GridSpec {
        GridSpec::new(2, &[4.0, 4.0], &[8, 8]).unwrap()
    }

    fn filled(grid: &GridSpec, seed: f64) -> SpinorField {
        let n = grid.total_points();
        let make = |o: f64| -> Vec<C64> {
            (0..n)
                .map(|i| C64::new((i as f64 * 0.13 + o).sin(), (i as f64 * 0.29 + o).cos()))
                .collect()
        };
        SpinorField::from_components(grid.clone(), [make(seed), make(seed + 1.0), make(seed + 2.0)])
            .unwrap()
    }

    #[test]
    fn normalization_scales_entries() {
        let g = small_grid();
        let f = filled(&g, 0.0);
        let n = f.norm();
        let u = f.normalized().unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-13);
        assert!((u.component(0)[5] - f.component(0)[5] / n).norm() < 1e-15);
        // Idempotence.
        let u2 = u.normalized().unwrap();
        assert!(sup_distance(&u, &u2) < 1e-14);
    }

    #[test]
    fn zero_field_cannot_be_normalized() {
        let g = small_grid();
        assert!(matches!(
            SpinorField::zeros(g).normalized(),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn equal_components_split_mass_three_ways() {
        let g = small_grid();
        let mut f = filled(&g, 0.0);
        let c0 = f.component(0).to_vec();
        f.component_mut(1).copy_from_slice(&c0);
        f.component_mut(2).copy_from_slice(&c0);
        let u = f.normalized().unwrap();
        let mass0 = sum::norm_sqr(u.component(0)) * g.cell_volume();
        assert!((mass0 - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn inner_product_is_sesquilinear_and_matches_naive() {
        let g = small_grid();
        let a = filled(&g, 0.3);
        let b = filled(&g, 1.7);
        let ip = inner_product(&a, &b).unwrap();
        // Naive double loop oracle.
        let mut want = C64::default();
        for l in 0..3 {
            for (x, y) in a.component(l).iter().zip(b.component(l)) {
                want += x * y.conj();
            }
        }
        want *= g.cell_volume();
        assert!((ip - want).norm() <= 1e-14 * want.norm());

        let u = a.normalized().unwrap();
        let uu = inner_product(&u, &u).unwrap();
        assert!((uu - C64::new(1.0, 0.0)).norm() < 1e-13);

        // <phi, i phi> = -i ||phi||^2
        let mut iu = u.clone();
        for l in 0..3 {
            par_map_inplace(iu.component_mut(l), |z| z * C64::i());
        }
        let v = inner_product(&u, &iu).unwrap();
        assert!((v - C64::new(0.0, -1.0)).norm() < 1e-13);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = filled(&small_grid(), 0.0);
        let g2 = GridSpec::new(2, &[4.0, 4.0], &[16, 16]).unwrap();
        let b = SpinorField::zeros(g2);
        assert!(matches!(
            inner_product(&a, &b),
            Err(Error::GridMismatch(_))
        ));
    }
}

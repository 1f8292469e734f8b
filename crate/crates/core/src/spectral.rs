//! FFT-based differential operators on the periodic grid.
//!
//! All operators act componentwise on spinor fields and are diagonal in
//! frequency space except the angular-momentum operator, whose multiplier
//! mixes physical and frequency indices and is assembled from two spectral
//! first derivatives.

use crate::fft::GridEngine;
use crate::field::SpinorField;
use crate::grid::GridSpec;
use crate::{C64, Error, Result};
use rayon::prelude::*;

/// Spin-orbit coupling operators: `L0 = i d/dx + d/dy`, `L1 = i d/dx - d/dy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocOp {
    L0,
    L1,
}

/// Frequency multipliers of the diagonal operators.
pub mod multipliers {
    use crate::C64;

    /// Laplacian multiplier `-(v_x^2 + v_y^2 [+ v_z^2])`; nonpositive, zero
    /// at the zero frequency.
    pub fn laplacian(v: &[f64]) -> f64 {
        -v.iter().map(|x| x * x).sum::<f64>()
    }

    /// `L0` multiplier `-v_x + i v_y`.
    pub fn soc_l0(vx: f64, vy: f64) -> C64 {
        C64::new(-vx, vy)
    }

    /// `L1` multiplier `-(v_x + i v_y)`; the complex conjugate of the `L0`
    /// multiplier at the same frequency pair.
    pub fn soc_l1(vx: f64, vy: f64) -> C64 {
        C64::new(-vx, -vy)
    }
}

/// Apply `f(row_index, row)` over contiguous first-axis lines.
pub(crate) fn row_apply(data: &mut [C64], nx: usize, f: impl Fn(usize, &mut [C64]) + Sync) {
    if data.len() < 1 << 14 {
        for (r, chunk) in data.chunks_exact_mut(nx).enumerate() {
            f(r, chunk);
        }
    } else {
        data.par_chunks_exact_mut(nx)
            .enumerate()
            .with_min_len(2)
            .for_each(|(r, chunk)| f(r, chunk));
    }
}

fn map_components(field: &SpinorField, f: impl Fn(&[C64]) -> Vec<C64>) -> SpinorField {
    let comp = field.components();
    SpinorField::from_components(
        field.grid().clone(),
        [f(&comp[0]), f(&comp[1]), f(&comp[2])],
    )
    .expect("component length preserved")
}

/// Unnormalized forward transform of every component.
pub fn fft_forward(field: &SpinorField) -> SpinorField {
    let engine = GridEngine::get(field.grid());
    map_components(field, |c| engine.forward_copy(c))
}

/// Inverse transform of every component, scaled so that
/// `fft_inverse(fft_forward(f)) == f`.
pub fn fft_inverse(field: &SpinorField) -> SpinorField {
    let engine = GridEngine::get(field.grid());
    let s = engine.inv_scale();
    map_components(field, |c| {
        let mut data = c.to_vec();
        engine.inverse(&mut data);
        for z in &mut data {
            *z *= s;
        }
        data
    })
}

/// Second-dimension sizes `(nx, ny, nz)` with `nz = 1` in 2D.
pub(crate) fn dims3(grid: &GridSpec) -> (usize, usize, usize) {
    let p = grid.points();
    (p[0], p[1], if p.len() > 2 { p[2] } else { 1 })
}

/// Laplacian via the frequency multiplier `-|v|^2`.
pub fn apply_laplacian(field: &SpinorField) -> SpinorField {
    let engine = GridEngine::get(field.grid());
    let (nx, ny, _) = dims3(field.grid());
    let s = engine.inv_scale();
    let vx: Vec<f64> = engine.wave(0).iter().map(|v| v * v).collect();
    let vy: Vec<f64> = engine.wave(1).iter().map(|v| v * v).collect();
    let vz: Vec<f64> = if field.grid().dim() > 2 {
        engine.wave(2).iter().map(|v| v * v).collect()
    } else {
        vec![0.0]
    };
    map_components(field, |c| {
        let mut hat = engine.forward_copy(c);
        row_apply(&mut hat, nx, |r, row| {
            let vyz = vy[r % ny] + vz[r / ny];
            for (i, z) in row.iter_mut().enumerate() {
                *z *= -(vx[i] + vyz) * s;
            }
        });
        engine.inverse(&mut hat);
        hat
    })
}

/// Spectral first derivative along one axis.
pub fn derivative(field: &SpinorField, axis: usize) -> SpinorField {
    let engine = GridEngine::get(field.grid());
    let (nx, ny, _) = dims3(field.grid());
    let s = engine.inv_scale();
    let v = engine.wave(axis).to_vec();
    map_components(field, |c| {
        let mut hat = engine.forward_copy(c);
        row_apply(&mut hat, nx, |r, row| match axis {
            0 => {
                for (i, z) in row.iter_mut().enumerate() {
                    *z *= C64::new(0.0, v[i] * s);
                }
            }
            1 => {
                let m = C64::new(0.0, v[r % ny] * s);
                for z in row.iter_mut() {
                    *z *= m;
                }
            }
            _ => {
                let m = C64::new(0.0, v[r / ny] * s);
                for z in row.iter_mut() {
                    *z *= m;
                }
            }
        });
        engine.inverse(&mut hat);
        hat
    })
}

/// Angular momentum `L_z = -i (x d/dy - y d/dx)`, assembled from two
/// spectral derivatives combined with the physical coordinates.
pub fn apply_lz(field: &SpinorField) -> SpinorField {
    let engine = GridEngine::get(field.grid());
    let (nx, ny, _) = dims3(field.grid());
    let s = engine.inv_scale();
    let vx = engine.wave(0).to_vec();
    let vy = engine.wave(1).to_vec();
    let cx = engine.coord(0).to_vec();
    let cy = engine.coord(1).to_vec();
    map_components(field, |c| {
        let hat = engine.forward_copy(c);
        let mut dx = hat.clone();
        row_apply(&mut dx, nx, |_, row| {
            for (i, z) in row.iter_mut().enumerate() {
                *z *= C64::new(0.0, vx[i] * s);
            }
        });
        engine.inverse(&mut dx);
        let mut dy = hat;
        row_apply(&mut dy, nx, |r, row| {
            let m = C64::new(0.0, vy[r % ny] * s);
            for z in row.iter_mut() {
                *z *= m;
            }
        });
        engine.inverse(&mut dy);
        // -i (x dy - y dx)
        let mut out = dy;
        row_apply(&mut out, nx, |r, row| {
            let y = cy[r % ny];
            let base = r * nx;
            for (i, z) in row.iter_mut().enumerate() {
                let val = cx[i] * *z - y * dx[base + i];
                *z = C64::new(val.im, -val.re);
            }
        });
        out
    })
}

/// Spin-orbit coupling operator, diagonal in frequency space; the
/// z-frequencies do not enter in 3D.
pub fn apply_soc(field: &SpinorField, op: SocOp) -> SpinorField {
    let engine = GridEngine::get(field.grid());
    let (nx, ny, _) = dims3(field.grid());
    let s = engine.inv_scale();
    let vx = engine.wave(0).to_vec();
    let vy = engine.wave(1).to_vec();
    map_components(field, |c| {
        let mut hat = engine.forward_copy(c);
        row_apply(&mut hat, nx, |r, row| {
            let y = vy[r % ny];
            for (i, z) in row.iter_mut().enumerate() {
                let m = match op {
                    SocOp::L0 => multipliers::soc_l0(vx[i], y),
                    SocOp::L1 => multipliers::soc_l1(vx[i], y),
                };
                *z *= m * s;
            }
        });
        engine.inverse(&mut hat);
        hat
    })
}

/// Scale so the total norm is one. See [`SpinorField::normalized`].
pub fn normalize(field: &SpinorField) -> Result<SpinorField> {
    field.normalized()
}

/// Per-axis map from a coarse frequency index to fine indices with weights;
/// the signed Nyquist coefficient is split evenly between `+N/2` and `-N/2`
/// so that real fields stay real.
fn axis_targets(n_coarse: usize, n_fine: usize) -> Vec<Vec<(usize, f64)>> {
    (0..n_coarse)
        .map(|k| {
            let half = n_coarse / 2;
            if k < half {
                vec![(k, 1.0)]
            } else if k == half {
                vec![(half, 0.5), (n_fine - half, 0.5)]
            } else {
                vec![(n_fine - (n_coarse - k), 1.0)]
            }
        })
        .collect()
}

/// Trigonometric interpolation onto a grid with doubled points per axis by
/// zero-padding the frequency representation. Values at coincident coarse
/// points are reproduced to roundoff.
pub fn prolongate(field: &SpinorField, fine: &GridSpec) -> Result<SpinorField> {
    let coarse = field.grid();
    if coarse.dim() != fine.dim() || coarse.half_width() != fine.half_width() {
        return Err(Error::InvalidArgument(
            "prolongation requires the same domain on both grids".into(),
        ));
    }
    for (c, f) in coarse.points().iter().zip(fine.points()) {
        if *f != 2 * c {
            return Err(Error::InvalidArgument(format!(
                "prolongation requires doubled points per axis, got {c} -> {f}"
            )));
        }
    }
    let ec = GridEngine::get(coarse);
    let ef = GridEngine::get(fine);
    let (ncx, ncy, ncz) = dims3(coarse);
    let (nfx, nfy, _) = dims3(fine);
    let tx = axis_targets(ncx, nfx);
    let ty = axis_targets(ncy, nfy);
    let tz = if coarse.dim() > 2 {
        axis_targets(ncz, fine.points()[2])
    } else {
        vec![vec![(0usize, 1.0)]]
    };
    // Copied coefficients keep the coarse 1/prod(Nc) normalization.
    let scale = ec.inv_scale();
    let lift = |c: &[C64]| -> Vec<C64> {
        let hat = ec.forward_copy(c);
        let mut fine_hat = vec![C64::default(); fine.total_points()];
        for iz in 0..ncz {
            for iy in 0..ncy {
                for ix in 0..ncx {
                    let v = hat[(iz * ncy + iy) * ncx + ix] * scale;
                    for &(kz, wz) in &tz[iz] {
                        for &(ky, wy) in &ty[iy] {
                            for &(kx, wx) in &tx[ix] {
                                fine_hat[(kz * nfy + ky) * nfx + kx] += v * (wz * wy * wx);
                            }
                        }
                    }
                }
            }
        }
        ef.inverse(&mut fine_hat);
        fine_hat
    };
    let comp = field.components();
    SpinorField::from_components(fine.clone(), [lift(&comp[0]), lift(&comp[1]), lift(&comp[2])])
}

/// Sample every `step`-th point of `fine` per axis; exact restriction onto a
/// coarse grid whose points coincide with fine-grid points.
pub fn restrict_sample(field: &SpinorField, coarse: &GridSpec) -> Result<SpinorField> {
    let fine = field.grid();
    if fine.dim() != coarse.dim() || fine.half_width() != coarse.half_width() {
        return Err(Error::InvalidArgument(
            "restriction requires the same domain on both grids".into(),
        ));
    }
    let mut step = Vec::new();
    for (c, f) in coarse.points().iter().zip(fine.points()) {
        if f % c != 0 {
            return Err(Error::InvalidArgument(format!(
                "fine points {f} are not a multiple of coarse points {c}"
            )));
        }
        step.push(f / c);
    }
    let (nfx, nfy, _) = dims3(fine);
    let (ncx, ncy, ncz) = dims3(coarse);
    let sz = if fine.dim() > 2 { step[2] } else { 1 };
    let mut comps: [Vec<C64>; 3] = Default::default();
    for (l, out) in comps.iter_mut().enumerate() {
        let src = field.component(l);
        let mut data = Vec::with_capacity(coarse.total_points());
        for iz in 0..ncz {
            for iy in 0..ncy {
                let base = (iz * sz * nfy + iy * step[1]) * nfx;
                for ix in 0..ncx {
                    data.push(src[base + ix * step[0]]);
                }
            }
        }
        *out = data;
    }
    SpinorField::from_components(coarse.clone(), comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{inner_product, sup_distance};
    use std::f64::consts::PI;

    fn plane_wave(grid: &GridSpec, modes: &[i32]) -> SpinorField {
        let mut f = SpinorField::zeros(grid.clone());
        let dim = grid.dim();
        let coords: Vec<Vec<f64>> = (0..dim).map(|a| grid.coords(a)).collect();
        let (nx, ny, nz) = dims3(grid);
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let mut phase = 0.0;
                    let idx3 = [ix, iy, iz];
                    for a in 0..dim {
                        let v = PI * modes[a] as f64 / grid.half_width()[a];
                        phase += v * (coords[a][idx3[a]] + grid.half_width()[a]);
                    }
                    let val = (C64::i() * phase).exp();
                    let idx = (iz * ny + iy) * nx + ix;
                    for l in 0..3 {
                        f.component_mut(l)[idx] = val * (l as f64 + 1.0);
                    }
                }
            }
        }
        f
    }

    fn gaussian_2d(grid: &GridSpec) -> SpinorField {
        let mut f = SpinorField::zeros(grid.clone());
        let x = grid.coords(0);
        let y = grid.coords(1);
        let n = grid.points()[0];
        for iy in 0..grid.points()[1] {
            for ix in 0..n {
                let r2 = x[ix] * x[ix] + y[iy] * y[iy];
                f.component_mut(0)[iy * n + ix] = C64::new((-r2 / 2.0).exp(), 0.0);
            }
        }
        f
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let grid = GridSpec::square(2, 5.0, 16).unwrap();
        let mut f = SpinorField::zeros(grid);
        for z in f.component_mut(1).iter_mut() {
            *z = C64::new(2.5, -0.5);
        }
        let lap = apply_laplacian(&f);
        assert!(lap.sup_norm() < 1e-13);
    }

    #[test]
    fn laplacian_eigenfunction_plane_wave() {
        let grid = GridSpec::square(2, PI, 16).unwrap();
        let f = plane_wave(&grid, &[1, 0]);
        let lap = apply_laplacian(&f);
        // v = 1, eigenvalue -1
        let want = f.scaled(-1.0);
        assert!(sup_distance(&lap, &want) < 1e-13);
    }

    #[test]
    fn laplacian_plane_wave_3d() {
        let grid = GridSpec::square(3, PI, 8).unwrap();
        let f = plane_wave(&grid, &[1, 2, 3]);
        let lap = apply_laplacian(&f);
        let want = f.scaled(-(1.0 + 4.0 + 9.0));
        assert!(sup_distance(&lap, &want) < 1e-11);
    }

    #[test]
    fn laplacian_gaussian_matches_closed_form() {
        let grid = GridSpec::square(2, 16.0, 128).unwrap();
        let f = gaussian_2d(&grid);
        let lap = apply_laplacian(&f);
        // Laplacian of exp(-|x|^2/2) is (|x|^2 - d) exp(-|x|^2/2).
        let x = grid.coords(0);
        let y = grid.coords(1);
        let n = grid.points()[0];
        let mut worst = 0.0f64;
        for iy in 0..n {
            for ix in 0..n {
                let r2 = x[ix] * x[ix] + y[iy] * y[iy];
                let want = (r2 - 2.0) * (-r2 / 2.0).exp();
                let got = lap.component(0)[iy * n + ix];
                worst = worst.max((got - C64::new(want, 0.0)).norm());
            }
        }
        assert!(worst <= 1e-10, "sup error {worst}");
    }

    #[test]
    fn lz_annihilates_radial_fields() {
        let grid = GridSpec::square(2, 16.0, 128).unwrap();
        let f = gaussian_2d(&grid);
        let lz = apply_lz(&f);
        assert!(lz.sup_norm() <= 1e-10);
    }

    fn vortex(grid: &GridSpec, sign: f64) -> SpinorField {
        let mut f = SpinorField::zeros(grid.clone());
        let x = grid.coords(0);
        let y = grid.coords(1);
        let n = grid.points()[0];
        for iy in 0..n {
            for ix in 0..n {
                let r2 = x[ix] * x[ix] + y[iy] * y[iy];
                f.component_mut(0)[iy * n + ix] =
                    C64::new(x[ix], sign * y[iy]) * (-r2 / 2.0).exp();
            }
        }
        f
    }

    #[test]
    fn lz_vortex_eigenstates() {
        let grid = GridSpec::square(2, 16.0, 128).unwrap();
        for sign in [1.0, -1.0] {
            let f = vortex(&grid, sign);
            let lz = apply_lz(&f);
            let want = f.scaled(sign);
            assert!(sup_distance(&lz, &want) <= 1e-10);
        }
    }

    #[test]
    fn soc_on_constant_is_zero() {
        let grid = GridSpec::square(2, 3.0, 8).unwrap();
        let mut f = SpinorField::zeros(grid);
        for z in f.component_mut(0).iter_mut() {
            *z = C64::new(1.0, 1.0);
        }
        assert!(apply_soc(&f, SocOp::L0).sup_norm() < 1e-13);
        assert!(apply_soc(&f, SocOp::L1).sup_norm() < 1e-13);
    }

    #[test]
    fn soc_plane_wave_multipliers() {
        let grid = GridSpec::square(2, PI, 8).unwrap();
        let f = plane_wave(&grid, &[1, 2]); // (v_x, v_y) = (1, 2)
        let l0 = apply_soc(&f, SocOp::L0);
        let l1 = apply_soc(&f, SocOp::L1);
        let mut want0 = f.clone();
        let mut want1 = f.clone();
        for l in 0..3 {
            for z in want0.component_mut(l).iter_mut() {
                *z *= C64::new(-1.0, 2.0);
            }
            for z in want1.component_mut(l).iter_mut() {
                *z *= C64::new(-1.0, -2.0);
            }
        }
        assert!(sup_distance(&l0, &want0) < 1e-12);
        assert!(sup_distance(&l1, &want1) < 1e-12);
    }

    #[test]
    fn soc_multiplier_identities() {
        for &(vx, vy) in &[(0.0, 0.0), (1.0, 2.0), (-3.5, 0.25), (-4.0, -4.0)] {
            let m0 = multipliers::soc_l0(vx, vy);
            let m1 = multipliers::soc_l1(vx, vy);
            assert_eq!(m1, m0.conj());
            assert!((m0 + m1 - C64::new(-2.0 * vx, 0.0)).norm() < 1e-15);
            assert!((m0 - m1 - C64::new(0.0, 2.0 * vy)).norm() < 1e-15);
            assert!(multipliers::laplacian(&[vx, vy]) <= 0.0);
        }
        assert_eq!(multipliers::laplacian(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn round_trip_and_laplacian_self_adjoint() {
        let grid = GridSpec::square(2, 7.0, 24).unwrap();
        let mk = |seed: f64| {
            let mut f = SpinorField::zeros(grid.clone());
            for l in 0..3 {
                for (i, z) in f.component_mut(l).iter_mut().enumerate() {
                    *z = C64::new(
                        (i as f64 * 0.17 + seed).sin(),
                        (i as f64 * 0.31 + 2.0 * seed).cos(),
                    );
                }
            }
            f
        };
        let a = mk(0.2);
        let b = mk(1.5);
        let rt = fft_inverse(&fft_forward(&a));
        assert!(sup_distance(&rt, &a) <= 1e-13 * a.sup_norm());

        let la = apply_laplacian(&a);
        let lb = apply_laplacian(&b);
        let lhs = inner_product(&la, &b).unwrap();
        let rhs = inner_product(&a, &lb).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn lz_self_adjoint_on_decaying_fields() {
        let grid = GridSpec::square(2, 12.0, 64).unwrap();
        let a = vortex(&grid, 1.0);
        let b = gaussian_2d(&grid);
        let la = apply_lz(&a);
        let lb = apply_lz(&b);
        let lhs = inner_product(&la, &b).unwrap();
        let rhs = inner_product(&a, &lb).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn prolongate_constant_and_plane_wave() {
        let coarse = GridSpec::square(2, 4.0, 8).unwrap();
        let fine = GridSpec::square(2, 4.0, 16).unwrap();
        let mut c = SpinorField::zeros(coarse.clone());
        for z in c.component_mut(2).iter_mut() {
            *z = C64::new(0.7, -0.1);
        }
        let p = prolongate(&c, &fine).unwrap();
        for z in p.component(2) {
            assert!((z - C64::new(0.7, -0.1)).norm() < 1e-13);
        }

        let wave_c = plane_wave(&coarse, &[2, -1]);
        let wave_f = plane_wave(&fine, &[2, -1]);
        let p = prolongate(&wave_c, &fine).unwrap();
        assert!(sup_distance(&p, &wave_f) <= 1e-12);
    }

    #[test]
    fn prolongate_gaussian_matches_analytic() {
        let coarse = GridSpec::square(2, 16.0, 64).unwrap();
        let fine = GridSpec::square(2, 16.0, 128).unwrap();
        let g = gaussian_2d(&coarse);
        let p = prolongate(&g, &fine).unwrap();
        let want = gaussian_2d(&fine);
        assert!(sup_distance(&p, &want) <= 1e-8);
    }

    #[test]
    fn prolongate_preserves_norm_of_bandlimited_fields() {
        let coarse = GridSpec::square(2, 5.0, 16).unwrap();
        let fine = GridSpec::square(2, 5.0, 32).unwrap();
        // Zero out the Nyquist modes by building from low-frequency waves.
        let f = plane_wave(&coarse, &[3, -2]);
        let f = f.normalized().unwrap();
        let p = prolongate(&f, &fine).unwrap();
        assert!((p.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn prolongate_rejects_bad_grids() {
        let coarse = GridSpec::square(2, 4.0, 8).unwrap();
        let f = SpinorField::zeros(coarse);
        let wrong_domain = GridSpec::square(2, 5.0, 16).unwrap();
        assert!(prolongate(&f, &wrong_domain).is_err());
        let wrong_points = GridSpec::square(2, 4.0, 24).unwrap();
        assert!(prolongate(&f, &wrong_points).is_err());
    }

    #[test]
    fn restriction_samples_coincident_points() {
        let coarse = GridSpec::square(2, 16.0, 32).unwrap();
        let fine = GridSpec::square(2, 16.0, 128).unwrap();
        let g = gaussian_2d(&fine);
        let r = restrict_sample(&g, &coarse).unwrap();
        let want = gaussian_2d(&coarse);
        assert!(sup_distance(&r, &want) == 0.0);
    }
}

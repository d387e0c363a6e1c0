//! Quadrature volumes and the volume-maximization experiment.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SlagError};
use crate::lin;
use crate::planes::{dz_of, induced_gram, Picture};

use super::field::ScalarField;
use super::surface::{surface_from_potential, ImmersedSurface, ParamGrid};

/// Composite Simpson weights for `count` nodes with spacing `h`; `count` must be odd.
pub fn simpson_weights(count: usize, h: f64) -> Result<Vec<f64>> {
    if count < 3 || count.is_multiple_of(2) {
        return Err(SlagError::Invalid(format!(
            "Simpson needs an odd node count >= 3, got {count}"
        )));
    }
    Ok((0..count)
        .map(|i| {
            let w = if i == 0 || i == count - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect())
}

fn tensor_weights(grid: &ParamGrid) -> Result<Vec<f64>> {
    let axes: Vec<Vec<f64>> = (0..grid.dim())
        .map(|d| simpson_weights(grid.counts[d], grid.spacing(d)))
        .collect::<Result<_>>()?;
    Ok((0..grid.len())
        .map(|k| {
            grid.index(k)
                .iter()
                .enumerate()
                .map(|(d, &i)| axes[d][i])
                .product()
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeReport {
    /// `∫ √det(Gram)`.
    pub vol: f64,
    /// `∫ Re dz` pulled back by the parameterization.
    pub re_dz_integral: f64,
    pub nodes: usize,
}

/// Simpson volume and calibrated integral of a space-like surface.
pub fn volume_and_calibrated_integral(s: &ImmersedSurface) -> Result<VolumeReport> {
    let w = tensor_weights(&s.grid)?;
    let vals: Vec<Result<(f64, f64)>> = (0..s.grid.len())
        .into_par_iter()
        .map(|k| {
            let p = s.grid.point(k);
            let frame = s.frame(&p);
            let g = induced_gram(&frame);
            let min = lin::min_sym_eigenvalue(&g);
            if !(min > 0.0) {
                return Err(SlagError::NotSpacelike(min));
            }
            Ok((lin::det(&g).sqrt(), dz_of(&frame).re))
        })
        .collect();
    let mut vol = 0.0;
    let mut re = 0.0;
    for (k, v) in vals.into_iter().enumerate() {
        let (a, b) = v?;
        vol += w[k] * a;
        re += w[k] * b;
    }
    Ok(VolumeReport {
        vol,
        re_dz_integral: re,
        nodes: s.grid.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeRow {
    pub eps: f64,
    pub vol: Option<f64>,
    pub re_dz_integral: Option<f64>,
    /// `vol(M) − vol(N_ε)`.
    pub deficit: Option<f64>,
    /// `∫ ½(1 + det H_ε) − √det H_ε`.
    pub oracle_deficit: Option<f64>,
    /// `re_dz_integral(N_ε) − vol(M)`.
    pub stokes_gap: Option<f64>,
    /// `deficit / ε²`.
    pub ratio: Option<f64>,
    /// Set when convexity fails on the grid.
    pub flagged: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeExperiment {
    pub vol_m: f64,
    pub re_dz_m: f64,
    pub rows: Vec<VolumeRow>,
    /// `(max − min)/mean` of the ratios over rows with `ε ≠ 0`.
    pub ratio_spread: Option<f64>,
    pub min_deficit: f64,
    pub max_oracle_gap: f64,
}

fn null_surface(g: &ScalarField, grid: &ParamGrid) -> Result<ImmersedSurface> {
    surface_from_potential(g, Picture::Null, grid.clone(), None)
}

/// Compare the null-graph of `g` with competitors `g + ε·η` sharing its boundary.
pub fn volume_experiment(
    g: &ScalarField,
    eta: &ScalarField,
    eps_list: &[f64],
    grid: &ParamGrid,
) -> Result<VolumeExperiment> {
    let base = volume_and_calibrated_integral(&null_surface(g, grid)?)?;
    let w = tensor_weights(grid)?;
    let pts = grid.points();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let h = g.plus_scaled(eta, eps);
        let dets: Vec<Option<f64>> = pts
            .par_iter()
            .map(|p| {
                let m = h.hessian(p)?;
                (lin::min_sym_eigenvalue(&m) > 0.0).then(|| lin::det(&m))
            })
            .collect();
        if let Some(k) = dets.iter().position(|d| d.is_none()) {
            rows.push(VolumeRow {
                eps,
                vol: None,
                re_dz_integral: None,
                deficit: None,
                oracle_deficit: None,
                stokes_gap: None,
                ratio: None,
                flagged: Some(format!("Hessian not positive definite at {:?}", pts[k])),
            });
            continue;
        }
        let oracle: f64 = dets
            .iter()
            .zip(&w)
            .map(|(d, w)| {
                let d = d.unwrap();
                w * (0.5 * (1.0 + d) - d.sqrt())
            })
            .sum();
        let rep = volume_and_calibrated_integral(&null_surface(&h, grid)?)?;
        let deficit = base.vol - rep.vol;
        rows.push(VolumeRow {
            eps,
            vol: Some(rep.vol),
            re_dz_integral: Some(rep.re_dz_integral),
            deficit: Some(deficit),
            oracle_deficit: Some(oracle),
            stokes_gap: Some(rep.re_dz_integral - base.vol),
            ratio: (eps != 0.0).then(|| deficit / (eps * eps)),
            flagged: None,
        });
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let ratio_spread = (ratios.len() >= 2).then(|| {
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min) / (ratios.iter().sum::<f64>() / ratios.len() as f64)
    });
    Ok(VolumeExperiment {
        vol_m: base.vol,
        re_dz_m: base.re_dz_integral,
        min_deficit: rows
            .iter()
            .filter_map(|r| r.deficit)
            .fold(f64::INFINITY, f64::min),
        max_oracle_gap: rows
            .iter()
            .filter_map(|r| Some((r.deficit? - r.oracle_deficit?).abs()))
            .fold(0.0, f64::max),
        rows,
        ratio_spread,
    })
}

/// The bump `(u₁(1−u₁)u₂(1−u₂))²` on the unit square; it and its gradient vanish on the boundary.
pub fn unit_square_bump() -> ScalarField {
    ScalarField::from_expr(2, "(x1*(1-x1)*x2*(1-x2))^2").expect("valid expression")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{radial_solution, surface::Chart};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn simpson_is_exact_on_cubics() {
        let w = simpson_weights(5, 0.25).unwrap();
        let s: f64 = w
            .iter()
            .enumerate()
            .map(|(i, w)| w * (0.25 * i as f64).powi(3))
            .sum();
        assert!((s - 0.25).abs() < 1e-15);
        assert!(simpson_weights(4, 0.1).is_err());
    }

    #[test]
    fn annulus_volume() {
        let g = radial_solution(1.0).unwrap();
        let grid = ParamGrid::new(vec![0.5, 0.0], vec![1.5, TAU], vec![41, 41]).unwrap();
        let s = surface_from_potential(&g, Picture::Null, grid, Some(Chart::polar())).unwrap();
        let r = volume_and_calibrated_integral(&s).unwrap();
        assert!((r.vol - 2.0 * PI).abs() < 1e-9, "{}", r.vol);
        assert!((r.re_dz_integral - r.vol).abs() < 1e-9);
    }

    #[test]
    fn flat_square() {
        let g = ScalarField::from_expr(2, "0.5*(x1^2 + x2^2)").unwrap();
        let s = surface_from_potential(
            &g,
            Picture::Null,
            ParamGrid::cube(2, 0.0, 1.0, 5).unwrap(),
            None,
        )
        .unwrap();
        let r = volume_and_calibrated_integral(&s).unwrap();
        assert!((r.vol - 1.0).abs() < 1e-14 && (r.re_dz_integral - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_spacelike_is_rejected() {
        let g = ScalarField::from_expr(2, "0.5*(x1^2 - x2^2)").unwrap();
        let s = surface_from_potential(
            &g,
            Picture::Null,
            ParamGrid::cube(2, 0.0, 1.0, 3).unwrap(),
            None,
        )
        .unwrap();
        assert!(matches!(
            volume_and_calibrated_integral(&s),
            Err(SlagError::NotSpacelike(_))
        ));
    }

    #[test]
    fn perturbations_lose_volume() {
        let g = ScalarField::from_expr(2, "0.5*(x1^2 + x2^2)").unwrap();
        let grid = ParamGrid::cube(2, 0.0, 1.0, 61).unwrap();
        let ex =
            volume_experiment(&g, &unit_square_bump(), &[0.0, 0.025, 0.05, 0.1], &grid).unwrap();
        assert!((ex.vol_m - 1.0).abs() < 1e-12);
        assert!(ex.rows[0].deficit.unwrap().abs() < 1e-12);
        for r in &ex.rows[1..] {
            let d = r.deficit.unwrap();
            assert!(d > 0.0);
            assert!((d - r.oracle_deficit.unwrap()).abs() < 1e-3 * d);
            assert!(r.stokes_gap.unwrap().abs() < 1e-9);
        }
        assert!(ex.ratio_spread.unwrap() < 0.2);
    }

    #[test]
    fn convexity_loss_is_flagged() {
        let g = ScalarField::from_expr(2, "0.5*(x1^2 + x2^2)").unwrap();
        let grid = ParamGrid::cube(2, 0.0, 1.0, 11).unwrap();
        let ex = volume_experiment(&g, &unit_square_bump(), &[500.0], &grid).unwrap();
        assert!(ex.rows[0].flagged.is_some());
    }
}

//! Seeded sweeps over random bases, matrices and planes.
//!
//! Sample `i` of a sweep draws from its own ChaCha8 stream, so results do not
//! depend on the thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dmat::DMatrix;
use crate::error::{Result, SlagError};
use crate::forms::{self, product_of_curves_data, ricci_flat_check, AltForm};
use crate::lin::{self, RMat};
use crate::planes::{
    canonical_angles, cayley_graph, dz_of, graph_tests, im_det_i_tau, random_gl_plus, sample_rng,
    sigma_odd, Picture, PlaneBasis,
};
use crate::transport::{brute_force_assignment, cost_matrix, ot_discrete, CostFunction};

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RMat {
    RMat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> RMat {
    gaussian(rng, n, n).qr().q()
}

/// Random symmetric matrix with spectrum in `(−band, band)`. With `slag`
/// the spectrum lies on `Σ atanh λ_i = 0`.
pub fn symmetric_in_band(rng: &mut ChaCha8Rng, n: usize, band: f64, slag: bool) -> RMat {
    let q = random_orthogonal(rng, n);
    let lambdas = loop {
        let mut l: Vec<f64> = (0..n)
            .map(|_| band * 0.999 * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        if !slag {
            break l;
        }
        let s: f64 = l[..n - 1].iter().map(|x| x.atanh()).sum();
        l[n - 1] = (-s).tanh();
        if l[n - 1].abs() < band {
            break l;
        }
    };
    &q * RMat::from_diagonal(&nalgebra::DVector::from_vec(lambdas)) * q.transpose()
}

#[derive(Clone, Debug, Serialize)]
pub struct DzRouteSweep {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    /// Largest `|det_D − expansion| / (1 + |dz|)`.
    pub max_gap: f64,
}

/// `dz` of random Gaussian bases, by determinant and by the form expansion.
pub fn dz_route_sweep(n: usize, count: usize, seed: u64) -> Result<DzRouteSweep> {
    if n > 3 {
        return Err(SlagError::OracleLimit(3));
    }
    let gaps: Vec<Result<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let cols = gaussian(&mut sample_rng(seed, i as u64), 2 * n, n);
            let a = dz_of(&cols);
            let b = forms::eval_dz_oracle(&cols)?;
            Ok(a.abs_diff(b) / (1.0 + a.re.abs().max(a.im.abs())))
        })
        .collect();
    let mut max_gap = 0.0f64;
    for g in gaps {
        max_gap = max_gap.max(g?);
    }
    Ok(DzRouteSweep {
        n,
        count,
        seed,
        max_gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaOddSweep {
    pub count: usize,
    pub seed: u64,
    pub max_n: usize,
    /// Largest relative gap between `Im det_D(I + τA)` and `Σ σ_{2k+1}`.
    pub max_rel_gap: f64,
    /// Largest relative gap against `tr A + det A` over the `n = 3` samples.
    pub max_trace_det_gap: f64,
    pub n3_samples: usize,
}

/// Random symmetric `A` of size `1..=max_n`, entries standard normal.
pub fn sigma_odd_sweep(count: usize, seed: u64, max_n: usize) -> SigmaOddSweep {
    let rows: Vec<(usize, f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let n = rng.random_range(1..=max_n);
            let g = gaussian(&mut rng, n, n);
            let a = lin::sym(&g);
            let lhs = im_det_i_tau(&a);
            let rhs = sigma_odd(&a);
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            let td = if n == 3 {
                rel(lhs, a.trace() + lin::det(&a))
            } else {
                0.0
            };
            (n, rel(lhs, rhs), td)
        })
        .collect();
    SigmaOddSweep {
        count,
        seed,
        max_n,
        max_rel_gap: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        max_trace_det_gap: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        n3_samples: rows.iter().filter(|r| r.0 == 3).count(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CayleySweep {
    pub count: usize,
    pub seed: u64,
    pub max_n: usize,
    pub slag_count: usize,
    /// Samples where the x-picture and null-picture verdicts differ.
    pub mismatches: usize,
    /// Largest `|det B − 1|` over the slag subset.
    pub max_det_gap_slag: f64,
    /// Smallest `|det B − 1|` off the slag subset.
    pub min_det_gap_other: f64,
}

/// Half the samples are built on the slag locus, half are generic.
pub fn cayley_sweep(count: usize, seed: u64, max_n: usize, tol: f64) -> Result<CayleySweep> {
    let rows: Vec<Result<(bool, bool, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let n = rng.random_range(2..=max_n.max(2));
            let a = symmetric_in_band(&mut rng, n, 0.95, i % 2 == 0);
            let b = cayley_graph(&a)?;
            let x = graph_tests(Picture::X, &a, tol);
            let null = graph_tests(Picture::Null, &b, tol);
            Ok((x.slag, null.slag, (lin::det(&b) - 1.0).abs()))
        })
        .collect();
    let rows: Vec<(bool, bool, f64)> = rows.into_iter().collect::<Result<_>>()?;
    Ok(CayleySweep {
        count,
        seed,
        max_n,
        slag_count: rows.iter().filter(|r| r.0).count(),
        mismatches: rows.iter().filter(|r| r.0 != r.1).count(),
        max_det_gap_slag: rows.iter().filter(|r| r.0).map(|r| r.2).fold(0.0, f64::max),
        min_det_gap_other: rows
            .iter()
            .filter(|r| !r.0)
            .map(|r| r.2)
            .fold(f64::INFINITY, f64::min),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalSweep {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub max_angle_error: f64,
    /// Largest `|quad(dz) − Π(1 + λ²)|`, relative to `1 + quad(dz)`.
    pub max_quad_error: f64,
}

/// Build planes from known angles and a `GL⁺` unitary, then recover the angles.
pub fn canonical_sweep(n: usize, count: usize, seed: u64) -> Result<CanonicalSweep> {
    if n < 2 {
        return Err(SlagError::Dimension("canonical angles need n >= 2".into()));
    }
    let rows: Vec<Result<(f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let mut angles: Vec<f64> = (0..n / 2).map(|_| 2.0 * rng.random::<f64>()).collect();
            let u = DMatrix::from_gl(&random_gl_plus(&mut rng, n))?;
            let plane = PlaneBasis::canonical(n, &angles).apply(&u);
            let c = canonical_angles(&plane)?;
            angles.sort_by(|a, b| b.total_cmp(a));
            let err = c
                .angles
                .iter()
                .zip(&angles)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let (q, _) = c.reconstruction_residuals();
            Ok((err, q / (1.0 + c.dz_value.quad())))
        })
        .collect();
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    Ok(CanonicalSweep {
        n,
        count,
        seed,
        max_angle_error: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        max_quad_error: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteSweep {
    pub count: usize,
    pub seed: u64,
    pub max_n: usize,
    /// Instances where the Hungarian cost exceeds the exhaustive optimum.
    pub mismatches: usize,
    pub max_cost_gap: f64,
    pub all_cyclically_monotone: bool,
}

/// Random point clouds in the unit square under the quadratic cost, checked
/// against exhaustive search over permutations.
pub fn discrete_sweep(count: usize, seed: u64, max_n: usize) -> Result<DiscreteSweep> {
    let cost = CostFunction::quadratic(2);
    let rows: Vec<Result<(f64, bool)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let n = rng.random_range(1..=max_n);
            let mut cloud = || -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                    .collect()
            };
            let (mu, nu) = (cloud(), cloud());
            let plan = ot_discrete(&mu, &nu, &cost)?;
            let (_, best) = brute_force_assignment(&cost_matrix(&mu, &nu, &cost))?;
            Ok((plan.total_cost - best, plan.cyclically_monotone))
        })
        .collect();
    let rows: Vec<(f64, bool)> = rows.into_iter().collect::<Result<_>>()?;
    Ok(DiscreteSweep {
        count,
        seed,
        max_n,
        mismatches: rows.iter().filter(|r| r.0 > 1e-12).count(),
        max_cost_gap: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        all_cyclically_monotone: rows.iter().all(|r| r.1),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationRow {
    pub eps: f64,
    /// `max(|α∧ω_ε|, |β∧ω_ε|)`.
    pub residual: f64,
    pub wedge_omega_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RicciPerturbation {
    pub rows: Vec<PerturbationRow>,
    /// Spread of `residual / ε` over rows with `ε ≠ 0`, relative to its mean.
    pub slope_spread: f64,
}

/// The product-of-curves data with `ω_ε = ω + ε(a∧b + a′∧b′)`.
pub fn ricci_perturbation(eps_list: &[f64], tol: f64) -> Result<RicciPerturbation> {
    let (omega, alpha, beta) = product_of_curves_data();
    let bump = AltForm::coord(4, 0)
        .wedge(&AltForm::coord(4, 1))
        .add(&AltForm::coord(4, 2).wedge(&AltForm::coord(4, 3)));
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let w = omega.add(&bump.scale(eps));
        let r = ricci_flat_check(&alpha, &beta, &w, None, tol)?;
        rows.push(PerturbationRow {
            eps,
            residual: r.alpha_omega_residual.max(r.beta_omega_residual),
            wedge_omega_ok: r.wedge_omega_ok,
        });
    }
    let slopes: Vec<f64> = rows
        .iter()
        .filter(|r| r.eps != 0.0)
        .map(|r| r.residual / r.eps.abs())
        .collect();
    let slope_spread = if slopes.is_empty() {
        0.0
    } else {
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min) / mean
    };
    Ok(RicciPerturbation { rows, slope_spread })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_and_locus() {
        let mut rng = sample_rng(3, 0);
        for n in 2..=5 {
            let a = symmetric_in_band(&mut rng, n, 0.95, true);
            assert!(lin::sym_eigenvalues(&a).iter().all(|l| l.abs() < 0.95));
            assert!(im_det_i_tau(&a).abs() < 1e-12);
        }
    }

    #[test]
    fn sweeps_are_thread_independent() {
        let a = sigma_odd_sweep(50, 11, 6);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| sigma_odd_sweep(50, 11, 6));
        assert_eq!(a.max_rel_gap.to_bits(), b.max_rel_gap.to_bits());
    }

    #[test]
    fn small_sweeps_pass() {
        assert!(dz_route_sweep(3, 20, 1).unwrap().max_gap < 1e-12);
        assert!(dz_route_sweep(4, 1, 1).is_err());
        let c = cayley_sweep(40, 2, 4, 1e-10).unwrap();
        assert_eq!(c.mismatches, 0);
        assert_eq!(c.slag_count, 20);
        let d = discrete_sweep(30, 5, 7).unwrap();
        assert_eq!(d.mismatches, 0);
        assert!(d.all_cyclically_monotone);
        let k = canonical_sweep(4, 20, 3).unwrap();
        assert!(k.max_angle_error < 1e-8 && k.max_quad_error < 1e-8);
    }

    #[test]
    fn perturbed_omega_residual_is_linear() {
        let r = ricci_perturbation(&[0.0, 1e-3, 1e-2, 1e-1], 1e-12).unwrap();
        assert!(r.rows[0].wedge_omega_ok);
        assert!(r.rows[1..].iter().all(|row| !row.wedge_omega_ok));
        assert!(r.slope_spread < 1e-9);
    }
}

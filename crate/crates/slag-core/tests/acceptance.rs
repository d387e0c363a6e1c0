//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use slag_core::deform::{
    flat_split_plane, hyperbola_product, phase_gradient_check, refinement_table,
    timelike_line_product, variation_harmonicity, VariationData,
};
use slag_core::forms::{product_of_curves_data, ricci_flat_check, RICCI_CONVENTION_N2};
use slag_core::holo2d::{
    coord_map_and_form_identity, curve_to_surface, plane_correspondence, ComplexCurveParam, C64,
};
use slag_core::planes::{sample_mealy, Picture};
use slag_core::potential::{
    pogorelov_fixture, radial_solution, surface_from_potential, unit_square_bump,
    volume_and_calibrated_integral, volume_experiment, Chart, ParamGrid, PogorelovRegion,
    PogorelovVariant, ScalarField,
};
use slag_core::sweeps::{
    canonical_sweep, cayley_sweep, discrete_sweep, dz_route_sweep, ricci_perturbation,
    sigma_odd_sweep,
};
use slag_core::transport::{kmw_check, ot_1d, Density1D};
use slag_core::Result;

type Check = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn mealy() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [2, 3, 4] {
        let r = sample_mealy(n, 10_000, 7, 1e-9);
        ok &= r.min_re_dz >= 1.0 - 1e-9 && r.mismatches == 0 && r.outside_positive_component == 0;
        notes.push(format!(
            "n={n} min Re dz={:.12} equality={} slag={} mismatches={}",
            r.min_re_dz, r.equality_count, r.slag_count, r.mismatches
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn dz_routes() -> Check {
    let mut worst = 0.0_f64;
    for n in [2, 3] {
        worst = worst.max(dz_route_sweep(n, 100, 0)?.max_gap);
    }
    Ok((worst <= 1e-12, format!("max gap {worst:.3e}")))
}

fn sigma_odd() -> Check {
    let s = sigma_odd_sweep(1000, 0, 6);
    Ok((
        s.max_rel_gap <= 1e-10 && s.max_trace_det_gap <= 1e-10,
        format!(
            "max relative gap {:.3e}, n=3 trace+det gap {:.3e} over {} samples",
            s.max_rel_gap, s.max_trace_det_gap, s.n3_samples
        ),
    ))
}

fn cayley() -> Check {
    let s = cayley_sweep(1000, 0, 5, slag_core::DEFAULT_TOL)?;
    Ok((
        s.mismatches == 0 && s.max_det_gap_slag <= 1e-9 && s.min_det_gap_other > 1e-9,
        format!(
            "{} slag of {}, mismatches {}, max |det B - 1| on slag {:.3e}, min off slag {:.3e}",
            s.slag_count, s.count, s.mismatches, s.max_det_gap_slag, s.min_det_gap_other
        ),
    ))
}

fn canonical() -> Check {
    let (mut angle, mut quad) = (0.0_f64, 0.0_f64);
    for n in [2, 3, 4] {
        let s = canonical_sweep(n, 1000, 0)?;
        angle = angle.max(s.max_angle_error);
        quad = quad.max(s.max_quad_error);
    }
    Ok((
        angle <= 1e-8 && quad <= 1e-8,
        format!("angle error {angle:.3e}, quad error {quad:.3e}"),
    ))
}

fn volume() -> Check {
    let grid = ParamGrid::new(vec![0.5, 0.0], vec![1.5, TAU], vec![201, 201])?;
    let s = surface_from_potential(
        &radial_solution(1.0)?,
        Picture::Null,
        grid,
        Some(Chart::polar()),
    )?;
    let annulus = volume_and_calibrated_integral(&s)?;
    let vol_err = (annulus.vol - 2.0 * PI).abs();

    let base = ScalarField::from_expr(2, "0.5*(x1^2 + x2^2)")?;
    let grid = ParamGrid::cube(2, 0.0, 1.0, 61)?;
    let ex = volume_experiment(&base, &unit_square_bump(), &[0.025, 0.05, 0.1], &grid)?;
    let oracle_ok = ex.rows.iter().all(|r| match (r.deficit, r.oracle_deficit) {
        (Some(d), Some(o)) => (d - o).abs() <= 1e-3 * d.abs() + 1e-12,
        _ => false,
    });
    let spread = ex.ratio_spread.unwrap_or(f64::INFINITY);
    Ok((
        vol_err <= 1e-6
            && ex.min_deficit >= -1e-10
            && oracle_ok
            && spread < 0.2
            && ex.rows.iter().all(|r| r.flagged.is_none()),
        format!(
            "|vol - 2pi| {vol_err:.3e}, min deficit {:.3e}, oracle gap {:.3e}, ratio spread {spread:.3}",
            ex.min_deficit, ex.max_oracle_gap
        ),
    ))
}

fn transport() -> Check {
    let plan = ot_1d(
        &Density1D::uniform(0.0, 1.0, 65)?,
        &Density1D::uniform(0.0, 2.0, 65)?,
        1e-10,
    );
    let one = |_: &[f64]| 1.0;
    let kmw = kmw_check(
        &radial_solution(1.0)?,
        &one,
        &one,
        &ParamGrid::cube(2, 0.5, 1.5, 11)?,
        1e-9,
    )?;
    let disc = discrete_sweep(200, 0, 8)?;
    Ok((
        plan.residual.max_abs <= 1e-10
            && plan.monotone
            && kmw.im_phi.max_abs <= 1e-9
            && disc.mismatches == 0,
        format!(
            "1-D residual {:.3e}, Im Phi residual {:.3e}, discrete mismatches {} of {}",
            plan.residual.max_abs, kmw.im_phi.max_abs, disc.mismatches, disc.count
        ),
    ))
}

fn holomorphic() -> Check {
    let id = coord_map_and_form_identity();
    let c = |re: f64| C64::new(re, 0.0);
    let curve =
        ComplexCurveParam::polynomial(vec![c(0.0), c(1.0)], vec![c(0.0), c(0.0), c(0.25)], 1.0, 41);
    let (_, r) = curve_to_surface(&curve, 1e-12)?;
    let mut disagreements = 0;
    for i in 0..8 {
        for j in 0..8 {
            let a = -1.3 + 0.37 * i as f64;
            let b = -1.3 + 0.37 * j as f64;
            disagreements += usize::from(!plane_correspondence(a, b, 1e-10).agrees);
        }
    }
    Ok((
        id.identity_residual == 0.0
            && r.omega.max_abs <= 1e-12
            && r.im_dz.max_abs <= 1e-12
            && r.agreement
            && disagreements == 0,
        format!(
            "identity residual {}, curve omega {:.3e} Im dz {:.3e}, 45-degree disagreements {}, lattice disagreements {disagreements}/64",
            id.identity_residual,
            r.omega.max_abs,
            r.im_dz.max_abs,
            r.disagreements.len()
        ),
    ))
}

fn deformation() -> Check {
    let tol = slag_core::DEFAULT_TOL;
    let g = radial_solution(1.0)?;
    let linear = ScalarField::from_expr(2, "0.7*x1 - 0.4*x2")?;
    let t = refinement_table(&g, &linear, 0.5, 1.5, &[51, 101], tol)?;
    let in_band = |r: &f64| (3.0..=5.0).contains(r);
    let quad = ScalarField::from_expr(2, "x1^2 + x2^2")?;
    let rejected = variation_harmonicity(&VariationData::on_cube(g, quad, 0.5, 1.5, 51)?, tol)?;
    let reject_residual = rejected.first_order_residual();
    Ok((
        t.d_star_ratios.iter().all(in_band)
            && t.star_ratios.iter().all(in_band)
            && t.rows.iter().all(|r| r.first_order <= tol)
            && reject_residual > 10.0 * tol,
        format!(
            "d*theta ratio {:?}, star ratio {:?}, non-first-order residual {reject_residual:.3e}",
            t.d_star_ratios, t.star_ratios
        ),
    ))
}

fn phase_gradient() -> Check {
    let mut levels = Vec::new();
    for c in [13, 25, 49] {
        let grid = ParamGrid::new(vec![-0.6, 0.0], vec![0.6, 1.0], vec![c, c])?;
        let r = phase_gradient_check(&hyperbola_product(grid)?, 1, 0.0)?;
        levels.push((r.spacing, r.report.max_abs));
    }
    let constant = levels[0].1 / levels[0].0;
    let bounded = levels
        .iter()
        .all(|(h, r)| *r <= constant * h * (1.0 + 1e-12));
    let ratios: Vec<f64> = levels.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let decays = ratios.iter().all(|r| *r >= 1.5);
    let mut flat_max = 0.0_f64;
    let flat_grid = ParamGrid::cube(2, -1.0, 1.0, 13)?;
    for jet in [
        flat_split_plane(flat_grid.clone())?,
        timelike_line_product(flat_grid, 0.3)?,
    ] {
        flat_max = flat_max.max(phase_gradient_check(&jet, 1, 0.0)?.report.max_abs);
    }
    Ok((
        bounded && decays && flat_max == 0.0,
        format!("C = {constant:.3e}, refinement ratios {ratios:.3?}, flat residual {flat_max}"),
    ))
}

fn ricci() -> Check {
    let (omega, alpha, beta) = product_of_curves_data();
    let r = ricci_flat_check(&alpha, &beta, &omega, Some(RICCI_CONVENTION_N2), 1e-12)?;
    let p = ricci_perturbation(&[1e-3, 1e-2, 1e-1], 1e-12)?;
    Ok((
        r.simple_ok
            && r.wedge_omega_ok
            && r.strict_ok == Some(true)
            && p.rows.iter().all(|row| !row.wedge_omega_ok)
            && p.slope_spread <= 1e-6,
        format!(
            "proportionality {:?}, perturbed residuals {:?}, slope spread {:.3e}",
            r.proportionality,
            p.rows.iter().map(|row| row.residual).collect::<Vec<_>>(),
            p.slope_spread
        ),
    ))
}

fn pogorelov() -> Check {
    let region = PogorelovRegion::default();
    let r = pogorelov_fixture(None, PogorelovVariant::Legendre, region.clone(), 1e-6)?;
    let doubled = pogorelov_fixture(
        Some(2.0 * r.k_found),
        PogorelovVariant::Legendre,
        region,
        1e-6,
    )?;
    let growth = doubled.max_im_dz / r.max_im_dz.max(f64::MIN_POSITIVE);
    Ok((
        r.max_im_dz <= 1e-6 && growth >= 1e3,
        format!(
            "k = {:.6}, max Im dz {:.3e}, doubled-k residual {:.3e}",
            r.k_found, r.max_im_dz, doubled.max_im_dz
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("1 reverse calibration inequality", mealy),
        ("2 dz by determinant and expansion", dz_routes),
        ("3 odd symmetric functions", sigma_odd),
        ("4 Cayley equivalence", cayley),
        ("5 canonical form round trip", canonical),
        ("6 volume maximization", volume),
        ("7 transport bridge", transport),
        ("8 holomorphic curves", holomorphic),
        ("9 deformation harmonicity", deformation),
        ("10 phase gradient", phase_gradient),
        ("11 Ricci-flat conditions", ricci),
        ("12 singular example", pogorelov),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

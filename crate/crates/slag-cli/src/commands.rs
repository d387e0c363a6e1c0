//! One function per subcommand.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;
use slag_core::deform::{
    flat_split_plane, hyperbola_product, phase_gradient_check, refinement_table,
    timelike_line_product, variation_harmonicity, VariationData,
};
use slag_core::forms::{product_of_curves_data, ricci_flat_check, RICCI_CONVENTION_N2};
use slag_core::holo2d::{
    coord_map_and_form_identity, curve_to_surface, plane_correspondence, ComplexCurveParam,
    CurveSpec, C64,
};
use slag_core::lin::{self, RMat};
use slag_core::planes::{
    analyze_plane, canonical_angles, cayley_graph, graph_tests, phase_pq, sample_mealy, Picture,
};
use slag_core::potential::{
    appc_residual, ma_residual_null, pogorelov_fixture, radial_solution, slag_residual_x,
    surface_from_potential, unit_rhs, unit_square_bump, volume_and_calibrated_integral,
    volume_experiment, Chart, FieldSpec, ParamGrid, PogorelovRegion, PogorelovVariant, ScalarField,
};
use slag_core::sweeps::{
    canonical_sweep, cayley_sweep, discrete_sweep, dz_route_sweep, ricci_perturbation,
    sigma_odd_sweep,
};
use slag_core::transport::{kmw_check, ot_1d, ot_discrete, CostFunction, Density1D};
use slag_core::PlaneBasis;

use crate::io::{cell, load, load_opt, opt_cell, CliError, CliResult, Outcome, Series};
use crate::{Command, FormsMode, Holo2dMode, PhaseFixture, PictureArg, TransportMode, VariantArg};

pub fn dispatch(cmd: &Command, tol: f64) -> CliResult<Outcome> {
    match cmd {
        Command::Plane { input } => plane(input, tol),
        Command::Canonical {
            input,
            n,
            count,
            seed,
        } => canonical(input, n, *count, *seed),
        Command::GraphTest {
            picture,
            input,
            sweep,
            max_n,
            seed,
        } => graph_test(*picture, input, *sweep, *max_n, *seed, tol),
        Command::Cayley {
            input,
            sweep,
            max_n,
            seed,
        } => cayley(input, *sweep, *max_n, *seed, tol),
        Command::SampleMealy {
            n,
            count,
            seed,
            eps,
        } => mealy(n, *count, *seed, *eps),
        Command::Residual {
            picture,
            potential,
            grid,
        } => residual(*picture, potential, *grid, tol),
        Command::VolumeExp {
            g,
            eta,
            eps,
            grid,
            annulus_grid,
        } => volume(g, eta, eps, *grid, *annulus_grid),
        Command::Transport { mode } => transport(mode.as_ref(), tol),
        Command::Holo2d { mode } => holo2d(mode.as_ref(), tol),
        Command::Deform {
            g,
            gdot,
            grid,
            bounds,
        } => deform(g, gdot, *grid, bounds, tol),
        Command::PhaseGrad {
            fixture,
            grid,
            levels,
        } => phase_grad(*fixture, *grid, *levels),
        Command::FormsCheck { mode } => forms_check(mode.as_ref(), tol),
        Command::Appc { u, h, grid } => appc(u, h, *grid, tol),
        Command::Pogorelov {
            k,
            variant,
            grid,
            max_residual,
        } => pogorelov(*k, *variant, *grid, *max_residual),
    }
}

fn input_err(m: impl Into<String>) -> CliError {
    CliError::Input(m.into())
}

/// A square matrix as `{"rows": [[..], ..]}` or a bare array of rows.
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixFile {
    Wrapped { rows: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

fn load_matrix(path: &Path) -> CliResult<RMat> {
    let rows = match load::<MatrixFile>(path)? {
        MatrixFile::Wrapped { rows } | MatrixFile::Bare(rows) => rows,
    };
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(input_err(format!(
            "{}: expected a non-empty square matrix",
            path.display()
        )));
    }
    Ok(lin::from_rows(&rows))
}

fn load_field(path: &Path) -> CliResult<(ScalarField, FieldSpec)> {
    let spec: FieldSpec = load(path)?;
    Ok((spec.build()?, spec))
}

fn plane(input: &Path, tol: f64) -> CliResult<Outcome> {
    let p: PlaneBasis = load(input)?;
    let rep = analyze_plane(&p, tol);
    let phase = phase_pq(&p, tol).ok();
    Ok(Outcome::new(
        rep.slag,
        json!({ "plane": rep, "phase": phase }),
    ))
}

fn canonical(input: &Option<PathBuf>, ns: &[usize], count: usize, seed: u64) -> CliResult<Outcome> {
    if let Some(path) = input {
        let p: PlaneBasis = load(path)?;
        let c = canonical_angles(&p)?;
        let (q, r) = c.reconstruction_residuals();
        let passed = q <= 1e-8 * (1.0 + c.dz_value.quad()) && r <= 1e-8 * (1.0 + c.dz_value.re);
        return Ok(Outcome::new(
            passed,
            json!({ "canonical": c, "quad_residual": q, "re_residual": r }),
        ));
    }
    let mut series = Series::new(&["n", "count", "max_angle_error", "max_quad_error"]);
    let mut runs = Vec::new();
    let mut passed = true;
    for &n in ns {
        let s = canonical_sweep(n, count, seed)?;
        passed &= s.max_angle_error <= 1e-8 && s.max_quad_error <= 1e-8;
        series.push(vec![
            cell(n),
            cell(count),
            cell(s.max_angle_error),
            cell(s.max_quad_error),
        ]);
        runs.push(s);
    }
    Ok(Outcome::new(passed, json!({ "sweeps": runs })).with_series(series))
}

fn picture(p: PictureArg) -> Picture {
    match p {
        PictureArg::X => Picture::X,
        PictureArg::Null => Picture::Null,
    }
}

fn graph_test(
    pic: PictureArg,
    input: &Option<PathBuf>,
    sweep: Option<usize>,
    max_n: usize,
    seed: u64,
    tol: f64,
) -> CliResult<Outcome> {
    match (input, sweep) {
        (Some(path), None) => {
            let a = load_matrix(path)?;
            let r = graph_tests(picture(pic), &a, tol);
            Ok(Outcome::new(r.slag, r))
        }
        (None, Some(count)) => {
            if max_n == 0 {
                return Err(input_err("--max-n must be at least 1"));
            }
            let s = sigma_odd_sweep(count, seed, max_n);
            Ok(Outcome::new(
                s.max_rel_gap <= 1e-10 && s.max_trace_det_gap <= 1e-10,
                s,
            ))
        }
        _ => Err(input_err("give exactly one of --in or --sweep")),
    }
}

fn cayley(
    input: &Option<PathBuf>,
    sweep: Option<usize>,
    max_n: usize,
    seed: u64,
    tol: f64,
) -> CliResult<Outcome> {
    match (input, sweep) {
        (Some(path), None) => {
            let a = load_matrix(path)?;
            let b = cayley_graph(&a)?;
            let x = graph_tests(Picture::X, &a, tol);
            let null = graph_tests(Picture::Null, &b, tol);
            Ok(Outcome::new(
                x.slag == null.slag,
                json!({
                    "b": lin::to_rows(&b),
                    "det_b": lin::det(&b),
                    "x_picture": x,
                    "null_picture": null,
                }),
            ))
        }
        (None, Some(count)) => {
            let s = cayley_sweep(count, seed, max_n, tol)?;
            Ok(Outcome::new(
                s.mismatches == 0 && s.max_det_gap_slag <= 1e-9 && s.min_det_gap_other > 1e-9,
                s,
            ))
        }
        _ => Err(input_err("give exactly one of --in or --sweep")),
    }
}

fn mealy(ns: &[usize], count: usize, seed: u64, eps: f64) -> CliResult<Outcome> {
    if ns.contains(&0) {
        return Err(input_err("--n must be positive"));
    }
    let mut series = Series::new(&[
        "n",
        "count",
        "min_re_dz",
        "equality_count",
        "slag_count",
        "mismatches",
    ]);
    let mut runs = Vec::new();
    let mut passed = true;
    for &n in ns {
        let r = sample_mealy(n, count, seed, eps);
        passed &= r.inequality_holds && r.mismatches == 0 && r.outside_positive_component == 0;
        series.push(vec![
            cell(n),
            cell(count),
            cell(r.min_re_dz),
            cell(r.equality_count),
            cell(r.slag_count),
            cell(r.mismatches),
        ]);
        runs.push(r);
    }
    Ok(Outcome::new(passed, json!({ "eps": eps, "runs": runs })).with_series(series))
}

fn box_grid(spec: &FieldSpec, count: usize) -> CliResult<ParamGrid> {
    let b = spec
        .domain()
        .ok_or_else(|| input_err("the potential needs a \"box\" to sample on"))?;
    Ok(ParamGrid::new(b.lo, b.hi, vec![count; spec.dim()])?)
}

fn residual(pic: PictureArg, path: &Path, count: usize, tol: f64) -> CliResult<Outcome> {
    let (f, spec) = load_field(path)?;
    let pts = box_grid(&spec, count)?.points();
    match pic {
        PictureArg::X => {
            let r = slag_residual_x(&f, &pts, tol);
            Ok(Outcome::new(r.report.passed && r.min_margin > 0.0, r))
        }
        PictureArg::Null => {
            let r = ma_residual_null(&f, &unit_rhs, &pts, tol);
            Ok(Outcome::new(r.report.passed && r.all_convex, r))
        }
    }
}

fn volume(
    g: &Option<PathBuf>,
    eta: &Option<PathBuf>,
    eps: &[f64],
    intervals: usize,
    annulus_intervals: usize,
) -> CliResult<Outcome> {
    if !intervals.is_multiple_of(2)
        || !annulus_intervals.is_multiple_of(2)
        || intervals == 0
        || annulus_intervals == 0
    {
        return Err(input_err(
            "Simpson needs an even, positive number of intervals",
        ));
    }
    let k = annulus_intervals + 1;
    let annulus_grid = ParamGrid::new(vec![0.5, 0.0], vec![1.5, TAU], vec![k, k])?;
    let annulus = volume_and_calibrated_integral(&surface_from_potential(
        &radial_solution(1.0)?,
        Picture::Null,
        annulus_grid,
        Some(Chart::polar()),
    )?)?;
    let annulus_error = (annulus.vol - 2.0 * PI).abs();

    let (base, grid) = match g {
        Some(p) => {
            let (f, spec) = load_field(p)?;
            let grid = box_grid(&spec, intervals + 1)?;
            (f, grid)
        }
        None => (
            ScalarField::from_expr(2, "0.5*(x1^2 + x2^2)")?,
            ParamGrid::cube(2, 0.0, 1.0, intervals + 1)?,
        ),
    };
    let bump = match eta {
        Some(p) => load_field(p)?.0,
        None => unit_square_bump(),
    };
    let ex = volume_experiment(&base, &bump, eps, &grid)?;
    let oracle_ok = ex.rows.iter().all(|r| match (r.deficit, r.oracle_deficit) {
        (Some(d), Some(o)) => (d - o).abs() <= 1e-3 * d.abs() + 1e-12,
        _ => false,
    });
    let passed = annulus_error <= 1e-6
        && ex.rows.iter().all(|r| r.flagged.is_none())
        && ex.min_deficit >= -1e-10
        && oracle_ok
        && ex.ratio_spread.is_some_and(|s| s < 0.2);
    let mut series = Series::new(&["eps", "vol", "deficit", "oracle_deficit", "ratio"]);
    for r in &ex.rows {
        series.push(vec![
            cell(r.eps),
            opt_cell(r.vol),
            opt_cell(r.deficit),
            opt_cell(r.oracle_deficit),
            opt_cell(r.ratio),
        ]);
    }
    Ok(Outcome::new(
        passed,
        json!({
            "annulus": { "vol": annulus.vol, "re_dz_integral": annulus.re_dz_integral,
                         "error": annulus_error, "nodes": annulus.nodes },
            "family": ex,
            "oracle_agrees": oracle_ok,
        }),
    )
    .with_series(series))
}

#[derive(Deserialize)]
struct DensityFile {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
}

fn load_density(path: &Option<PathBuf>, default: (f64, f64)) -> CliResult<Density1D> {
    match load_opt::<DensityFile>(path)? {
        Some(d) => Ok(Density1D::new(d.lo, d.hi, d.values)?),
        None => Ok(Density1D::uniform(default.0, default.1, 65)?),
    }
}

#[derive(Deserialize)]
struct DiscreteFile {
    mu: Vec<Vec<f64>>,
    nu: Vec<Vec<f64>>,
    #[serde(default = "default_cost")]
    cost: String,
}

fn default_cost() -> String {
    "quadratic".into()
}

fn cost_named(name: &str, dim: usize) -> CliResult<CostFunction> {
    Ok(match name {
        "quadratic" => CostFunction::quadratic(dim),
        "squared_distance" => CostFunction::squared_distance(dim),
        "dot" => CostFunction::dot(dim),
        expr => CostFunction::from_expr(dim, expr)?,
    })
}

fn transport_1d(
    source: &Option<PathBuf>,
    target: &Option<PathBuf>,
    tol: f64,
) -> CliResult<Outcome> {
    let rho = load_density(source, (0.0, 1.0))?;
    let rho_t = load_density(target, (0.0, 2.0))?;
    let plan = ot_1d(&rho, &rho_t, tol);
    let mut series = Series::new(&["u", "t", "g"]);
    for i in 0..plan.u.len() {
        series.push(vec![cell(plan.u[i]), cell(plan.t[i]), cell(plan.g[i])]);
    }
    let passed = plan.residual.passed && plan.monotone && plan.convex;
    Ok(Outcome::new(passed, plan).with_series(series))
}

fn transport_discrete(
    input: &Option<PathBuf>,
    sweep: Option<usize>,
    max_n: usize,
    seed: u64,
) -> CliResult<Outcome> {
    match (input, sweep) {
        (Some(path), None) => {
            let f: DiscreteFile = load(path)?;
            let dim = f.mu.first().map(|p| p.len()).unwrap_or(1);
            let cost = cost_named(&f.cost, dim)?;
            let plan = ot_discrete(&f.mu, &f.nu, &cost)?;
            Ok(Outcome::new(plan.cyclically_monotone, plan))
        }
        (None, sweep) => {
            if !(1..=9).contains(&max_n) {
                return Err(input_err("--max-n must lie in 1..=9 for exhaustive search"));
            }
            let s = discrete_sweep(sweep.unwrap_or(200), seed, max_n)?;
            Ok(Outcome::new(
                s.mismatches == 0 && s.all_cyclically_monotone,
                s,
            ))
        }
        _ => Err(input_err("give at most one of --in or --sweep")),
    }
}

fn transport_kmw(g: &Option<PathBuf>, count: usize, tol: f64) -> CliResult<Outcome> {
    let (field, grid) = match g {
        Some(p) => {
            let (f, spec) = load_field(p)?;
            let grid = box_grid(&spec, count)?;
            (f, grid)
        }
        None => (radial_solution(1.0)?, ParamGrid::cube(2, 0.5, 1.5, count)?),
    };
    let one = |_: &[f64]| 1.0;
    let r = kmw_check(&field, &one, &one, &grid, tol)?;
    Ok(Outcome::new(r.passed, r))
}

fn transport(mode: Option<&TransportMode>, tol: f64) -> CliResult<Outcome> {
    match mode {
        Some(TransportMode::OneD { source, target }) => transport_1d(source, target, tol),
        Some(TransportMode::Discrete {
            input,
            sweep,
            max_n,
            seed,
        }) => transport_discrete(input, *sweep, *max_n, *seed),
        Some(TransportMode::Kmw { g, grid }) => transport_kmw(g, *grid, tol),
        None => {
            let one_d = transport_1d(&None, &None, tol)?;
            let kmw = transport_kmw(&None, 11, tol.min(1e-9))?;
            let discrete = transport_discrete(&None, None, 8, 0)?;
            Ok(Outcome::new(
                one_d.passed && kmw.passed && discrete.passed,
                json!({ "one_d": one_d.report, "kmw": kmw.report, "discrete": discrete.report }),
            ))
        }
    }
}

fn quarter_square_curve() -> ComplexCurveParam {
    let c = |re: f64| C64::new(re, 0.0);
    ComplexCurveParam::polynomial(vec![c(0.0), c(1.0)], vec![c(0.0), c(0.0), c(0.25)], 1.0, 41)
}

fn holo2d(mode: Option<&Holo2dMode>, tol: f64) -> CliResult<Outcome> {
    let identity = || {
        let r = coord_map_and_form_identity();
        Outcome::new(
            r.identity_residual == 0.0 && r.involution_residual == 0.0,
            r,
        )
    };
    let curve = |input: &Option<PathBuf>| -> CliResult<Outcome> {
        let c = match load_opt::<CurveSpec>(input)? {
            Some(s) => s.build(),
            None => quarter_square_curve(),
        };
        let (_, r) = curve_to_surface(&c, tol.min(1e-12))?;
        Ok(Outcome::new(r.passed && r.agreement, r))
    };
    let lattice = |k: usize| {
        let step = 0.37;
        let rows: Vec<_> = (0..k * k)
            .map(|i| {
                plane_correspondence(
                    -1.3 + step * (i / k) as f64,
                    -1.3 + step * (i % k) as f64,
                    tol,
                )
            })
            .collect();
        let disagreements = rows.iter().filter(|r| !r.agrees).count();
        let mut series = Series::new(&["a", "b", "slope_abs", "slag", "graph_slag"]);
        for r in &rows {
            series.push(vec![
                cell(r.slope[0]),
                cell(r.slope[1]),
                cell(r.slope_abs),
                cell(r.slag),
                cell(r.graph.slag),
            ]);
        }
        Outcome::new(
            disagreements == 0,
            json!({ "points": rows.len(), "disagreements": disagreements, "lattice": rows }),
        )
        .with_series(series)
    };
    match mode {
        Some(Holo2dMode::Identity) => Ok(identity()),
        Some(Holo2dMode::Curve { input }) => curve(input),
        Some(Holo2dMode::Plane { lattice: k }) => Ok(lattice(*k)),
        None => {
            let (a, b, c) = (identity(), curve(&None)?, lattice(8));
            Ok(Outcome::new(
                a.passed && b.passed && c.passed,
                json!({ "identity": a.report, "curve": b.report, "plane": c.report }),
            ))
        }
    }
}

fn deform(
    g: &Option<PathBuf>,
    gdot: &Option<PathBuf>,
    intervals: usize,
    bounds: &[f64],
    tol: f64,
) -> CliResult<Outcome> {
    let [lo, hi] = bounds else {
        return Err(input_err("--box takes two values lo,hi"));
    };
    if !(lo < hi) || intervals < 2 {
        return Err(input_err("need lo < hi and at least 2 intervals"));
    }
    let base = match g {
        Some(p) => load_field(p)?.0,
        None => radial_solution(1.0)?,
    };
    let counts = [intervals + 1, 2 * intervals + 1];
    let linear_default = gdot.is_none();
    let variation = match gdot {
        Some(p) => load_field(p)?.0,
        None => ScalarField::from_expr(2, "0.7*x1 - 0.4*x2")?,
    };
    let table = refinement_table(&base, &variation, *lo, *hi, &counts, tol)?;
    let ratio_ok = |r: f64| (3.0..=5.0).contains(&r);
    let first_order_ok = table.rows.iter().all(|r| r.first_order.abs() <= tol);
    let converges = table.d_star_ratios.iter().all(|r| ratio_ok(*r))
        && table.star_ratios.iter().all(|r| ratio_ok(*r));
    let fine = VariationData::on_cube(base.clone(), variation, *lo, *hi, counts[0])?;
    let detail = variation_harmonicity(&fine, tol)?;
    let mut series = Series::new(&[
        "h",
        "first_order",
        "d_theta",
        "d_star_theta",
        "star_relation",
    ]);
    for r in &table.rows {
        series.push(vec![
            cell(r.spacing),
            cell(r.first_order),
            cell(r.d_theta),
            cell(r.d_star_theta),
            cell(r.star_relation),
        ]);
    }
    let summary = json!({
        "first_order_residual": detail.first_order_residual(),
        "d_theta_residual": detail.d_theta_residual(),
        "d_star_theta_residual": detail.d_star_theta_residual(),
        "star_relation_residual": detail.star_relation_residual(),
        "witness": detail.first_order.witness_point,
        "det_deviation": detail.det_deviation,
    });
    if !linear_default {
        return Ok(Outcome::new(
            first_order_ok && converges,
            json!({ "residuals": summary, "refinement": table }),
        )
        .with_series(series));
    }
    let quadratic = ScalarField::from_expr(2, "x1^2 + x2^2")?;
    let rejected = variation_harmonicity(
        &VariationData::on_cube(base, quadratic, *lo, *hi, counts[0])?,
        tol,
    )?;
    let rejection_ok = rejected.first_order_residual() > 10.0 * tol
        && rejected
            .first_order
            .residuals
            .iter()
            .flatten()
            .all(|r| r.abs() > 10.0 * tol);
    Ok(Outcome::new(
        first_order_ok && converges && rejection_ok,
        json!({
            "residuals": summary,
            "refinement": table,
            "non_first_order": {
                "variation": "x1^2 + x2^2",
                "first_order_residual": rejected.first_order_residual(),
                "min_first_order": rejected.first_order.residuals.iter().flatten()
                    .fold(f64::INFINITY, |m, r| m.min(r.abs())),
                "d_star_theta_residual": rejected.d_star_theta_residual(),
                "rejected": rejection_ok,
            },
        }),
    )
    .with_series(series))
}

fn phase_grad(
    fixture: Option<PhaseFixture>,
    intervals: usize,
    levels: usize,
) -> CliResult<Outcome> {
    if intervals < 2 || levels == 0 {
        return Err(input_err("need at least 2 intervals and 1 level"));
    }
    let hyperbola = || -> CliResult<Outcome> {
        let mut rows = Vec::new();
        let mut series = Series::new(&["h", "max_residual", "residual_over_h"]);
        for l in 0..levels {
            let c = intervals * (1 << l) + 1;
            let grid = ParamGrid::new(vec![-0.6, 0.0], vec![0.6, 1.0], vec![c, c])?;
            let r = phase_gradient_check(&hyperbola_product(grid)?, 1, 0.0)?;
            series.push(vec![
                cell(r.spacing),
                cell(r.report.max_abs),
                cell(r.report.max_abs / r.spacing),
            ]);
            rows.push(r);
        }
        let ratios: Vec<f64> = rows
            .windows(2)
            .map(|w| w[0].report.max_abs / w[1].report.max_abs)
            .collect();
        let constant = rows
            .iter()
            .map(|r| r.report.max_abs / r.spacing)
            .fold(0.0, f64::max);
        let mut theta_err = 0.0_f64;
        for (l, r) in rows.iter().enumerate() {
            let c = intervals * (1 << l) + 1;
            let grid = ParamGrid::new(vec![-0.6, 0.0], vec![0.6, 1.0], vec![c, c])?;
            for (p, th) in grid.points().iter().zip(&r.theta) {
                theta_err = theta_err.max((th - p[0]).abs());
            }
        }
        let passed = ratios.iter().all(|r| *r >= 1.5)
            && theta_err <= 1e-10
            && rows.iter().all(|r| !r.minimal && !r.constant_phase);
        let summary: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "spacing": r.spacing,
                    "max_residual": r.report.max_abs,
                    "witness": r.report.witness_point,
                    "orthogonality": r.orthogonality,
                    "max_mean_curvature": r.max_mean_curvature,
                    "theta_spread": r.theta_spread,
                    "signature": r.signature,
                })
            })
            .collect();
        Ok(Outcome::new(
            passed,
            json!({ "fixture": "hyperbola", "levels": summary, "ratios": ratios,
                    "residual_constant": constant, "theta_error": theta_err }),
        )
        .with_series(series))
    };
    let flat = |which: PhaseFixture| -> CliResult<Outcome> {
        let grid = ParamGrid::cube(2, -1.0, 1.0, intervals + 1)?;
        let jet = match which {
            PhaseFixture::Flat => flat_split_plane(grid)?,
            _ => timelike_line_product(grid, 0.3)?,
        };
        let r = phase_gradient_check(&jet, 1, 0.0)?;
        Ok(Outcome::new(
            r.report.max_abs == 0.0 && r.constant_phase && r.minimal,
            json!({
                "fixture": if which == PhaseFixture::Flat { "flat" } else { "timelike" },
                "max_residual": r.report.max_abs,
                "theta_spread": r.theta_spread,
                "max_mean_curvature": r.max_mean_curvature,
                "cross_flag_agrees": r.cross_flag_agrees,
            }),
        ))
    };
    match fixture {
        Some(PhaseFixture::Hyperbola) => hyperbola(),
        Some(f) => flat(f),
        None => {
            let (a, b, c) = (
                hyperbola()?,
                flat(PhaseFixture::Flat)?,
                flat(PhaseFixture::Timelike)?,
            );
            let series = a.series;
            let out = Outcome::new(
                a.passed && b.passed && c.passed,
                json!({ "hyperbola": a.report, "flat": b.report, "timelike": c.report }),
            );
            Ok(match series {
                Some(s) => out.with_series(s),
                None => out,
            })
        }
    }
}

fn forms_check(mode: Option<&FormsMode>, tol: f64) -> CliResult<Outcome> {
    let dz = |ns: &[usize], count: usize, seed: u64| -> CliResult<Outcome> {
        let mut runs = Vec::new();
        for &n in ns {
            if n == 0 {
                return Err(input_err("--n must be positive"));
            }
            runs.push(dz_route_sweep(n, count, seed)?);
        }
        let passed = runs.iter().all(|r| r.max_gap <= 1e-12);
        Ok(Outcome::new(passed, json!({ "runs": runs })))
    };
    let ricci = |eps: &[f64]| -> CliResult<Outcome> {
        let strict_tol = tol.max(1e-12);
        let (omega, alpha, beta) = product_of_curves_data();
        let base = ricci_flat_check(&alpha, &beta, &omega, Some(RICCI_CONVENTION_N2), strict_tol)?;
        let pert = ricci_perturbation(eps, strict_tol)?;
        let mut series = Series::new(&["eps", "residual"]);
        for r in &pert.rows {
            series.push(vec![cell(r.eps), cell(r.residual)]);
        }
        let passed = base.simple_ok
            && base.wedge_omega_ok
            && base.strict_ok == Some(true)
            && pert.rows.iter().all(|r| r.eps == 0.0 || !r.wedge_omega_ok)
            && pert.slope_spread <= 1e-6;
        Ok(Outcome::new(
            passed,
            json!({ "convention": RICCI_CONVENTION_N2, "example": base, "perturbation": pert }),
        )
        .with_series(series))
    };
    match mode {
        Some(FormsMode::Dz { n, count, seed }) => dz(n, *count, *seed),
        Some(FormsMode::Ricci { eps }) => ricci(eps),
        None => {
            let (a, b) = (dz(&[2, 3], 100, 0)?, ricci(&[1e-3, 1e-2, 1e-1])?);
            Ok(Outcome::new(
                a.passed && b.passed,
                json!({ "dz": a.report, "ricci": b.report }),
            ))
        }
    }
}

fn appc(u: &Option<PathBuf>, h: &Option<PathBuf>, count: usize, tol: f64) -> CliResult<Outcome> {
    let alpha = 0.6;
    let uf = match u {
        Some(p) => load_field(p)?.0,
        None => ScalarField::from_expr(2, &format!("{alpha}*x1"))?,
    };
    let hf = match h {
        Some(p) => load_field(p)?.0,
        None => ScalarField::from_expr(2, &format!("x1^2 - x2^2/(1 - {alpha}^2)"))?,
    };
    let grid = ParamGrid::new(vec![-0.5, -0.5, -1.0], vec![0.5, 0.5, 1.0], vec![count; 3])?;
    let r = appc_residual(&uf, &hf, &grid.points(), tol)?;
    Ok(Outcome::new(
        r.report.passed && r.decomposition_gap <= 1e-9,
        r,
    ))
}

fn pogorelov(
    k: Option<f64>,
    variant: VariantArg,
    count: usize,
    max_residual: f64,
) -> CliResult<Outcome> {
    if count == 0 {
        return Err(input_err("--grid must be positive"));
    }
    let variant = match variant {
        VariantArg::Legendre => PogorelovVariant::Legendre,
        VariantArg::Printed => PogorelovVariant::Printed,
    };
    let region = PogorelovRegion {
        u1: (0.0, 0.0, 1),
        v: (0.5, 1.5, count),
    };
    let r = pogorelov_fixture(k, variant, region.clone(), max_residual)?;
    let doubled = pogorelov_fixture(Some(2.0 * r.k_found), variant, region, max_residual)?;
    let growth = doubled.max_im_dz / r.max_im_dz.max(f64::MIN_POSITIVE);
    let mut series = Series::new(&["k", "max_im_dz"]);
    for (kk, v) in &r.residual_curve {
        series.push(vec![cell(kk), cell(v)]);
    }
    let passed = r.passed && growth >= 1e3;
    Ok(Outcome::new(
        passed,
        json!({
            "k_found": r.k_found,
            "variant": r.variant,
            "max_im_dz": r.max_im_dz,
            "max_omega": r.max_omega,
            "lagrangian": r.lagrangian,
            "min_margin": r.min_margin,
            "doubled_k_max_im_dz": doubled.max_im_dz,
            "doubling_growth": growth,
            "residual_curve": r.residual_curve,
            "witness": r.report.im_dz.witness_point,
        }),
    )
    .with_series(series))
}

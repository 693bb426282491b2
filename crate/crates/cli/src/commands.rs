//! One function per subcommand.

use std::path::{Path, PathBuf};

use peierls::bloch_section::transport_section;
use peierls::bloch_solver::{assemble_fiber_matrix, compute_bands, BandStructure};
use peierls::direct::{assemble_direct, direct_spectrum, DirectMode, LandauBasis};
use peierls::effective::{
    assemble_effective, band_symbol_hoppings, field_for_flux, lambda_grid, lambda_scan,
    reconstruct_spectrum_adaptive, EffectiveMode, HoppingSet, ScanPoint,
};
use peierls::grushin::{
    assemble_grushin, build_trial_family, default_reference_points, invert_grushin, trial_from_section, BumpWindow,
    TrialFamily,
};
use peierls::linalg;
use peierls::magnetic::{MagneticField, VectorPotential};
use peierls::spectra::{hausdorff_distance, power_fit, HausdorffReport, SpectrumSet};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    parse_flux, rational_approx, DirectModeConfig, EffectiveModeConfig, FamilyConfig, RunConfig, Setup,
};
use crate::output::{Cell, Output};
use crate::CliError;

fn num(module: &'static str) -> impl Fn(peierls::Error) -> CliError {
    move |e| CliError::numeric(module, e)
}

/// Momentum columns of a grid point: one per dimension.
fn xi_cells(dim: usize, xi: [f64; 2]) -> Vec<Cell> {
    (0..dim).map(|j| Cell::Float(xi[j])).collect()
}

fn xi_header(dim: usize) -> Vec<&'static str> {
    ["xi_1", "xi_2"][..dim].to_vec()
}

pub fn bands(s: &Setup, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let o = Output::new(out, "bands", &s.config)?;
    let n = s.config.numerics.n_bands;
    let b = compute_bands(&s.symbol, &s.grid, &s.shell, n, false).map_err(num("bloch_solver"))?;
    let iv = s.intervals(&b);
    let d = s.lattice.dim();
    let mut header = vec!["xi_index"];
    header.extend(xi_header(d));
    header.extend(["band", "lambda"]);
    let mut rows = Vec::with_capacity(b.bands.len() * n);
    for (i, lams) in b.bands.iter().enumerate() {
        for (j, &lam) in lams.iter().enumerate() {
            let mut r = vec![Cell::from(i)];
            r.extend(xi_cells(d, s.grid.point(i)));
            r.extend([Cell::from(j + 1), Cell::from(lam)]);
            rows.push(r);
        }
    }
    let meta = json!({ "grid_points": s.grid.len(), "shell_size": s.shell.len(), "n_bands": n });
    Ok(vec![o.csv("bands", &header, &rows, meta)?, o.json("intervals", &iv)?])
}

pub fn section(s: &Setup, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let o = Output::new(out, "section", &s.config)?;
    let b = s.bands(true)?;
    let k = s.require_simple(&s.intervals(&b))?;
    let sec = transport_section(&b, k, s.config.numerics.gap_tol).map_err(num("bloch_section"))?;
    let report = sec.report().map_err(num("bloch_section"))?;
    let d = s.lattice.dim();
    let mut header = vec!["xi_index"];
    header.extend(["gamma_1", "gamma_2"][..d].iter());
    header.extend(["re", "im"]);
    let mut rows = Vec::with_capacity(sec.vectors.len() * s.shell.len());
    for (i, v) in sec.vectors.iter().enumerate() {
        for (g, c) in s.shell.indices().iter().zip(v) {
            let mut r = vec![Cell::from(i)];
            r.extend(g[..d].iter().map(|&x| Cell::from(x)));
            r.extend([Cell::from(c.re), Cell::from(c.im)]);
            rows.push(r);
        }
    }
    let kappa = json!({
        "band": k + 1,
        "kappa": sec.kappa(),
        "phase_log": sec.phase_log,
        "report": report,
    });
    let meta = json!({ "band": k + 1, "grid_points": s.grid.len(), "shell_size": s.shell.len() });
    Ok(vec![o.csv("section", &header, &rows, meta)?, o.json("kappa", &kappa)?])
}

#[derive(Serialize)]
struct GrushinReport {
    construction: String,
    n: usize,
    window: (f64, f64),
    lambdas: Vec<f64>,
    max_residual: f64,
    max_condition_number: f64,
    max_e_mp_hermitian_defect: f64,
    /// `max |E₋₊ − (λ − λ_k)|` for the section family.
    max_symbol_error: Option<f64>,
}

pub fn grushin(s: &Setup, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let o = Output::new(out, "grushin", &s.config)?;
    let g = &s.config.grushin;
    let b = s.bands(true)?;
    let iv = s.intervals(&b);
    let window = s.config.window(&iv);
    let (family, band): (TrialFamily, Option<usize>) = match g.family {
        FamilyConfig::Section => {
            let k = s.require_simple(&iv)?;
            let sec = transport_section(&b, k, s.config.numerics.gap_tol).map_err(num("bloch_section"))?;
            (trial_from_section(&sec), Some(k))
        }
        FamilyConfig::Bump => {
            let refs = default_reference_points(&s.lattice, g.reference_per_dir);
            let lm = g.lambda_max.unwrap_or(window.1);
            let f = build_trial_family(&b, lm, &refs, BumpWindow::default()).map_err(num("grushin"))?;
            (f, None)
        }
    };
    let lambdas = lambda_grid(window, g.lambda_points);
    let nf = family.n;
    let mut header: Vec<String> = vec!["xi_index".into(), "lambda".into(), "n".into()];
    for r in 0..nf {
        for c in 0..nf {
            header.push(format!("e_mp_{}_{}_re", r + 1, c + 1));
            header.push(format!("e_mp_{}_{}_im", r + 1, c + 1));
        }
    }
    header.push("min_abs_eig".into());
    let mut report = GrushinReport {
        construction: format!("{:?}", family.construction),
        n: nf,
        window,
        lambdas: lambdas.clone(),
        max_residual: 0.0,
        max_condition_number: 0.0,
        max_e_mp_hermitian_defect: 0.0,
        max_symbol_error: band.map(|_| 0.0),
    };
    let mut rows = Vec::new();
    for i in 0..s.grid.len() {
        let m = assemble_fiber_matrix(&s.symbol, s.grid.point(i), &s.shell).map_err(num("bloch_solver"))?;
        for &lam in &lambdas {
            let gm = assemble_grushin(&m, lam, &family).map_err(num("grushin"))?;
            let inv = invert_grushin(&gm).map_err(num("grushin"))?;
            let sv = linalg::singular_values(&inv.e_mp).map_err(num("grushin"))?;
            let min_abs = sv.iter().copied().fold(f64::INFINITY, f64::min);
            report.max_residual = report.max_residual.max(inv.residual);
            report.max_condition_number = report.max_condition_number.max(inv.condition_number);
            report.max_e_mp_hermitian_defect = report.max_e_mp_hermitian_defect.max(inv.e_mp_hermitian_defect());
            if let (Some(k), Some(err)) = (band, report.max_symbol_error.as_mut()) {
                *err = err.max((inv.e_mp[(0, 0)] - linalg::C64::new(lam - b.bands[i][k], 0.0)).norm());
            }
            let mut r = vec![Cell::from(i), Cell::from(lam), Cell::from(nf)];
            for a in 0..nf {
                for c in 0..nf {
                    r.push(Cell::from(inv.e_mp[(a, c)].re));
                    r.push(Cell::from(inv.e_mp[(a, c)].im));
                }
            }
            r.push(Cell::from(min_abs));
            rows.push(r);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let meta = json!({ "n": nf, "construction": report.construction });
    Ok(vec![o.csv("grushin", &header, &rows, meta)?, o.json("grushin_report", &report)?])
}

/// `(p, q)` from an explicit flux string or from the configured field.
fn flux(cfg: &RunConfig, lattice: &peierls::lattice::Lattice) -> Result<(i64, i64), CliError> {
    if let Some(f) = &cfg.effective.flux {
        return parse_flux(f);
    }
    if lattice.dim() == 1 {
        return Ok((0, 1));
    }
    let phi = cfg.field.epsilon * cfg.field.b12 * lattice.cell_volume() / (2.0 * std::f64::consts::PI);
    let (p, q) = rational_approx(phi, cfg.compare.max_denominator);
    if (phi - p as f64 / q as f64).abs() > 1e-9 * phi.abs().max(1.0) {
        return Err(CliError::Config(format!(
            "flux per cell {phi:.12}·2π is not p/q with q ≤ {}; pass --flux p/q",
            cfg.compare.max_denominator
        )));
    }
    Ok((p, q))
}

/// Configured gauge with the uniform field `b`.
fn potential_with_field(cfg: &RunConfig, dim: usize, b: f64) -> Result<VectorPotential, CliError> {
    let base = cfg.vector_potential(dim)?;
    let field = MagneticField::uniform(b, 1.0);
    Ok(match base.chi() {
        Some(chi) => VectorPotential::with_gradient(field, *chi),
        None => VectorPotential::transversal(field),
    })
}

/// Simple band, its window and the `λ = 0` hoppings of `λ − λ_k(ξ)`.
struct BandSetup {
    k: usize,
    interval: (f64, f64),
    window: (f64, f64),
    h0: HoppingSet,
    bands: BandStructure,
}

fn band_setup(s: &Setup) -> Result<BandSetup, CliError> {
    let bands = s.bands(false)?;
    let iv = s.intervals(&bands);
    let k = s.require_simple(&iv)?;
    let window = s.config.window(&iv);
    let h0 = band_symbol_hoppings(&bands, k, 0.0, s.config.numerics.radius).map_err(num("effective"))?;
    Ok(BandSetup {
        k,
        interval: iv.intervals[k],
        window,
        h0,
        bands,
    })
}

struct EffectiveRun {
    scan: Vec<ScanPoint>,
    spectrum: Option<SpectrumSet>,
    meta: serde_json::Value,
}

fn run_effective(s: &Setup, bs: &BandSetup, reconstruct: bool) -> Result<EffectiveRun, CliError> {
    let cfg = &s.config;
    let e = &cfg.effective;
    let mt = cfg.numerics.merge_tol;
    let lambdas = lambda_grid(bs.window, cfg.numerics.lambda_points);
    let h0 = &bs.h0;
    let decay = h0.decay_fit(4).ok();
    let base = json!({
        "band": bs.k + 1,
        "band_interval": bs.interval,
        "window": bs.window,
        "radius": h0.radius,
        "hopping_asymmetry": h0.asymmetry,
        "decay_fit": decay,
    });
    match e.mode {
        EffectiveModeConfig::Bloch => {
            let (p, q) = flux(cfg, &s.lattice)?;
            let b = if p == 0 { 0.0 } else { field_for_flux(&s.lattice, p, q) };
            let a = potential_with_field(cfg, s.lattice.dim(), b)?;
            let n_theta = e.n_theta.unwrap_or(2 * q as usize);
            let factory = |lam: f64| -> peierls::Result<HoppingSet> { Ok(h0.shifted(lam)) };
            let scan = lambda_scan(&factory, &a, p, q, n_theta, &lambdas).map_err(num("effective"))?;
            let spectrum = if reconstruct {
                Some(
                    reconstruct_spectrum_adaptive(
                        &factory, &a, p, q, n_theta, &scan, e.lipschitz, e.tol, e.edge_res, bs.window, mt,
                    )
                    .map_err(num("effective"))?,
                )
            } else {
                None
            };
            let mut meta = base;
            meta["mode"] = json!("bloch");
            meta["flux"] = json!({ "p": p, "q": q, "field": b });
            meta["n_theta"] = json!(n_theta);
            Ok(EffectiveRun { scan, spectrum, meta })
        }
        EffectiveModeConfig::Box => {
            let a = cfg.vector_potential(s.lattice.dim())?;
            let op = assemble_effective(h0, &a, EffectiveMode::Box { l: e.box_size }).map_err(num("effective"))?;
            // 0 ∈ σ(λ + H₀) exactly at λ = −μ
            let roots: Vec<f64> = op.eigenvalues().map_err(num("effective"))?.iter().map(|m| -m).collect();
            let scan = lambdas
                .iter()
                .map(|&lambda| ScanPoint {
                    lambda,
                    margin: roots.iter().map(|r| (lambda - r).abs()).fold(f64::INFINITY, f64::min),
                })
                .collect();
            let spectrum = reconstruct.then(|| SpectrumSet::from_points(&roots, bs.window, mt));
            let mut meta = base;
            meta["mode"] = json!("box");
            meta["box_size"] = json!(e.box_size);
            meta["sites"] = json!(op.sites.len());
            meta["hermitian_defect"] = json!(op.hermitian_defect());
            Ok(EffectiveRun { scan, spectrum, meta })
        }
    }
}

fn margin_rows(scan: &[ScanPoint]) -> Vec<Vec<Cell>> {
    scan.iter().map(|p| vec![Cell::from(p.lambda), Cell::from(p.margin)]).collect()
}

pub fn effective(s: &Setup, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let o = Output::new(out, "effective", &s.config)?;
    let bs = band_setup(s)?;
    let run = run_effective(s, &bs, true)?;
    let spectrum = json!({ "spectrum": run.spectrum, "run": run.meta });
    Ok(vec![
        o.csv("margin", &["lambda", "margin"], &margin_rows(&run.scan), run.meta.clone())?,
        o.json("spectrum", &spectrum)?,
    ])
}

pub fn scan(s: &Setup, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let o = Output::new(out, "scan", &s.config)?;
    let bs = band_setup(s)?;
    let run = run_effective(s, &bs, false)?;
    Ok(vec![o.csv("scan", &["lambda", "margin"], &margin_rows(&run.scan), run.meta)?])
}

fn landau_basis(cfg: &RunConfig) -> LandauBasis {
    let d = &cfg.direct;
    LandauBasis {
        points_per_cell: d.points_per_cell,
        half_width: d.half_width,
        n_k: d.n_k,
        n_theta: d.n_theta,
        cutoff: cfg.numerics.cutoff,
    }
}

pub fn direct(s: &Setup, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let o = Output::new(out, "direct", &s.config)?;
    let cfg = &s.config;
    let dc = &cfg.direct;
    let (mode, a) = match dc.mode {
        DirectModeConfig::ZeroField => (
            DirectMode::ZeroFieldBloch {
                resolution: cfg.numerics.resolution,
                cutoff: cfg.numerics.cutoff,
            },
            VectorPotential::transversal(MagneticField::zero()),
        ),
        DirectModeConfig::MagneticBloch => {
            let (p, q) = flux(cfg, &s.lattice)?;
            let b = if p == 0 { 0.0 } else { field_for_flux(&s.lattice, p, q) };
            let basis = landau_basis(cfg);
            (DirectMode::MagneticBloch { p, q, basis }, potential_with_field(cfg, s.lattice.dim(), b)?)
        }
        DirectModeConfig::Box => (
            DirectMode::Box {
                cells: dc.cells,
                points_per_cell: dc.box_points_per_cell,
            },
            cfg.vector_potential(s.lattice.dim())?,
        ),
    };
    let disc = assemble_direct(&s.symbol, &a, mode).map_err(num("direct"))?;
    let mut rows = Vec::new();
    let mut defect: f64 = 0.0;
    let per_sample: Vec<(usize, [f64; 2], Vec<f64>)> = match disc.box_operator() {
        Some(op) => vec![(0, [0.0, 0.0], op.lowest(dc.n_eigenvalues.min(op.len())).map_err(num("direct"))?)],
        None => {
            let mut v = Vec::with_capacity(disc.samples.len());
            for (i, smp) in disc.samples.iter().enumerate() {
                let m = disc.matrix_at(i).map_err(num("direct"))?;
                defect = defect.max(linalg::hermitian_defect(&m));
                let mut ev = linalg::eigvalsh(&m).map_err(num("direct"))?;
                ev.truncate(dc.n_eigenvalues);
                v.push((i, smp.point, ev));
            }
            v
        }
    };
    for (i, pt, ev) in &per_sample {
        for (j, &lam) in ev.iter().enumerate() {
            rows.push(vec![
                Cell::from(*i),
                Cell::from(pt[0]),
                Cell::from(pt[1]),
                Cell::from(j + 1),
                Cell::from(lam),
            ]);
        }
    }
    let window_spectrum = match cfg.numerics.window {
        Some([lo, hi]) => Some(direct_spectrum(&disc, (lo, hi), cfg.numerics.merge_tol).map_err(num("direct"))?),
        None => None,
    };
    let meta = json!({
        "mode": mode,
        "samples": per_sample.len(),
        "hermitian_defect": defect,
        "window_spectrum": window_spectrum,
    });
    Ok(vec![o.csv(
        "direct",
        &["sample_index", "sample_1", "sample_2", "eig_index", "lambda"],
        &rows,
        meta,
    )?])
}

#[derive(Serialize)]
struct CompareRow {
    epsilon_requested: f64,
    epsilon: f64,
    p: i64,
    q: i64,
    n_theta: usize,
    d_effective_direct: f64,
    flagged: bool,
    d_direct_zero_field: f64,
    gap_empty: Option<bool>,
}

pub fn compare(s: &Setup, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let o = Output::new(out, "compare", &s.config)?;
    let cfg = &s.config;
    let b12 = cfg.field.b12;
    if s.lattice.dim() != 2 || b12 == 0.0 {
        return Err(CliError::Config("compare needs a two-dimensional lattice and nonzero field.B12".into()));
    }
    if cfg.compare.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(CliError::Config("compare.epsilons must be positive".into()));
    }
    let bs = band_setup(s)?;
    let window = bs.window;
    let mt = cfg.numerics.merge_tol;
    let iv = s.intervals(&bs.bands);
    // gap above the band, kept 0.05 away from both neighbours
    let gap = iv.intervals.get(bs.k + 1).and_then(|n| {
        let g = (bs.interval.1 + 0.05, n.0 - 0.05);
        (g.0 < g.1).then_some(g)
    });
    let zero = VectorPotential::transversal(MagneticField::zero());
    let p0_mode = DirectMode::ZeroFieldBloch {
        resolution: cfg.numerics.resolution,
        cutoff: cfg.numerics.cutoff,
    };
    let p0 = assemble_direct(&s.symbol, &zero, p0_mode)
        .and_then(|d| direct_spectrum(&d, window, mt))
        .map_err(num("direct"))?;
    let h0 = &bs.h0;
    let factory = |lam: f64| -> peierls::Result<HoppingSet> { Ok(h0.shifted(lam)) };
    let lambdas = lambda_grid(window, cfg.numerics.lambda_points);
    let e = &cfg.effective;
    let mut runs = Vec::new();
    for &eps in &cfg.compare.epsilons {
        let phi = eps * b12 * s.lattice.cell_volume() / (2.0 * std::f64::consts::PI);
        let (p, q) = rational_approx(phi, cfg.compare.max_denominator);
        if p == 0 {
            return Err(CliError::Config(format!(
                "ε = {eps}: flux {phi:.4}·2π rounds to 0 with denominators ≤ {}",
                cfg.compare.max_denominator
            )));
        }
        let b = field_for_flux(&s.lattice, p, q);
        let a = potential_with_field(cfg, 2, b)?;
        let n_theta = e.n_theta.unwrap_or(2 * q as usize);
        let scan = lambda_scan(&factory, &a, p, q, n_theta, &lambdas).map_err(num("effective"))?;
        let eff = reconstruct_spectrum_adaptive(&factory, &a, p, q, n_theta, &scan, e.lipschitz, e.tol, e.edge_res, window, mt)
            .map_err(num("effective"))?;
        let disc = assemble_direct(&s.symbol, &a, DirectMode::MagneticBloch { p, q, basis: landau_basis(cfg) })
            .map_err(num("direct"))?;
        let direct = direct_spectrum(&disc, window, mt).map_err(num("direct"))?;
        let gap_empty = match gap {
            Some(g) => Some(direct_spectrum(&disc, g, mt).map_err(num("direct"))?.is_empty()),
            None => None,
        };
        let d_ed = hausdorff_distance(&eff, &direct).map_err(num("spectra"))?;
        let d_dz = hausdorff_distance(&direct, &p0).map_err(num("spectra"))?;
        runs.push(CompareRow {
            epsilon_requested: eps,
            epsilon: b / b12,
            p,
            q,
            n_theta,
            d_effective_direct: d_ed.value,
            flagged: d_ed.flagged,
            d_direct_zero_field: d_dz.value,
            gap_empty,
        });
    }
    let report = HausdorffReport::new(
        runs.iter().map(|r| (r.epsilon, r.d_effective_direct, r.flagged)).collect(),
        mt,
    )
    .map_err(num("spectra"))?;
    let quadratic: Vec<(f64, f64)> = runs.iter().filter(|r| !r.flagged).map(|r| (r.epsilon, r.d_effective_direct)).collect();
    let quadratic = power_fit(&quadratic, 2.0).map_err(num("spectra"))?;
    let zero_field = HausdorffReport::new(
        runs.iter().map(|r| (r.epsilon, r.d_direct_zero_field, false)).collect(),
        mt,
    )
    .map_err(num("spectra"))?;
    let rows: Vec<Vec<Cell>> = runs
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.epsilon),
                Cell::from(r.p),
                Cell::from(r.q),
                Cell::from(r.d_effective_direct),
                Cell::from(r.d_direct_zero_field),
            ]
        })
        .collect();
    let doc = json!({
        "report": report,
        "quadratic_fit": quadratic,
        "zero_field_report": zero_field,
        "window": window,
        "band": bs.k + 1,
        "gap_window": gap,
        "runs": runs,
    });
    Ok(vec![
        o.csv(
            "compare",
            &["epsilon", "p", "q", "d_effective_direct", "d_direct_zero_field"],
            &rows,
            json!({ "window": window }),
        )?,
        o.json("compare", &doc)?,
    ])
}

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use pvbs_core::analytic::{check_diagonal_bound, check_product_bounds, check_ratio_bounds, BoundCheck};
use pvbs_core::lattice::parse_volume_spec;
use pvbs_core::martingale::{certify, dense_condition_iii, verify_condition_iii, CertifyOptions, ConditionReport, NormOptions};
use pvbs_core::model::{
    c_orthant, choose_ell, classify_halfspace, classify_zd, infinite_gs_census, parse_decimal_list, select_tilt,
    InfiniteGroundState, Region,
};
use pvbs_core::operators::edge_projection_block;
use pvbs_core::spectra::{gapless_scaling, total_gap, GapOptions, LanczosOptions, SpectrumReport};
use pvbs_core::{defaults, fock, Params, PvbsError, Species, TiltScheme, VolumeFamilySpec};

use crate::args::Common;
use crate::output::{csv, float, opt_float, table, Output};

pub fn params(c: &Common) -> Result<Params> {
    let (Some(a), Some(b)) = (&c.lambda_a, &c.lambda_b) else {
        return Err(PvbsError::InvalidArgument("--lambda-a and --lambda-b are required".into()).into());
    };
    Ok(Params::parse(a, b, c.dim)?)
}

pub fn gap_options(c: &Common) -> GapOptions {
    GapOptions {
        sector_cap: c.budget,
        dense_switch: c.dense_cap,
        lanczos: LanczosOptions {
            seed: c.seed,
            ..LanczosOptions::default()
        },
        ..GapOptions::default()
    }
}

fn norm_options(c: &Common) -> NormOptions {
    NormOptions {
        seed: c.seed,
        ..NormOptions::default()
    }
}

fn real_list(s: &str) -> Result<Vec<f64>> {
    Ok(parse_decimal_list(s)?.into_iter().map(|x| x.0).collect())
}

pub fn usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad integer '{t}'")))
        .collect::<Result<_>>()
        .map_err(|e| PvbsError::InvalidArgument(format!("{e:#}")).into())
}

pub fn classify(c: &Common, halfspace: Option<&str>) -> Result<Output> {
    let p = params(c)?;
    match halfspace {
        None => Output::new(&json!({ "classification": classify_zd(&p) })),
        Some(m) => {
            let m = real_list(m)?;
            let class = classify_halfspace(&p, &m)?;
            Output::new(&json!({ "classification": class, "halfspace": m }))
        }
    }
}

fn parse_region(s: &str) -> Result<Region> {
    Ok(match s {
        "zd" => Region::Zd,
        "orthant" => Region::Orthant,
        _ => match s.strip_prefix("halfspace:") {
            Some(m) => Region::HalfSpace(real_list(m)?),
            None => return Err(PvbsError::InvalidArgument(format!("unknown region '{s}'")).into()),
        },
    })
}

pub fn census(c: &Common, region: &str) -> Result<Output> {
    let p = params(c)?;
    let r = parse_region(region)?;
    let states: Vec<InfiniteGroundState> = infinite_gs_census(&r, &p)?.into_iter().collect();
    let mut out = json!({ "region": r, "ground_states": states });
    if r == Region::Orthant {
        out["c_orthant"] = json!({ "a": c_orthant(&p, Species::A), "b": c_orthant(&p, Species::B) });
    }
    Output::new(&out)
}

#[derive(Serialize)]
struct GapOutput<'a> {
    params: &'a Params,
    #[serde(flatten)]
    report: &'a SpectrumReport,
}

pub fn gap(c: &Common) -> Result<Output> {
    let p = params(c)?;
    let spec = c
        .volume
        .as_deref()
        .ok_or_else(|| PvbsError::InvalidArgument("--volume is required".into()))?;
    let v = parse_volume_spec(spec)?;
    let report = total_gap(&v, &p, &gap_options(c))?;
    if report.partial {
        let skipped: Vec<String> = report.skipped.iter().map(|l| format!("({},{})", l.n_a, l.n_b)).collect();
        eprintln!(
            "pvbs: {} sectors above the budget were skipped: {}; the reported gap is not certified",
            skipped.len(),
            skipped.join(" ")
        );
    }
    let rows: Vec<Vec<String>> = report
        .sectors
        .iter()
        .map(|r| {
            vec![
                r.n_a.to_string(),
                r.n_b.to_string(),
                r.dim.to_string(),
                opt_float(r.eigenvalues.first().copied()),
                opt_float(r.eigenvalues.get(1).copied()),
                r.kernel.to_string(),
                format!("{:?}", r.method).to_lowercase(),
            ]
        })
        .collect();
    let mut tab = table(&["N_a", "N_b", "dim", "e0", "e1", "kernel", "method"], &rows);
    tab.push_str(&format!(
        "\nvolume {} ({} sites)\nkernel_total {}\ntotal_gap {} in sector ({},{}){}\n",
        report.volume,
        report.sites,
        report.kernel_total,
        float(report.total_gap),
        report.gap_sector.n_a,
        report.gap_sector.n_b,
        if report.partial { " [partial]" } else { "" }
    ));
    Ok(Output::new(&GapOutput { params: &p, report: &report })?
        .with_csv(report.to_csv())
        .with_table(tab))
}

pub fn certify_cmd(c: &Common) -> Result<Output> {
    let p = params(c)?;
    let opts = CertifyOptions {
        eta: c.eta,
        ell_cap: c.ell_cap,
        budget: c.budget,
        norm: norm_options(c),
        gap: gap_options(c),
    };
    let cert = certify(&p, &opts)?;
    let rows: Vec<Vec<String>> = cert.conditions.iter().map(condition_row).collect();
    let header = format!(
        "ell {}\nc_tilde {}\neps_ell {}\nfactor_per_direction {}\ngamma_ell {}\nfinal_bound {}\n\n",
        cert.ell,
        float(cert.c_tilde),
        float(cert.eps_ell),
        float(cert.factor_per_direction),
        cert.gamma_ell.value().map_or("symbolic".into(), float),
        cert.final_bound.value().map_or("symbolic".into(), float),
    );
    let cond_header = ["condition", "direction", "n", "ell", "L", "measured", "bound", "pass"];
    Ok(Output::new(&cert)?
        .with_csv(csv(&cond_header, &rows))
        .with_table(header + &table(&cond_header, &rows)))
}

fn condition_row(r: &ConditionReport) -> Vec<String> {
    let cond = serde_json::to_value(r.condition).unwrap();
    vec![
        cond.as_str().unwrap_or_default().to_string(),
        r.direction.to_string(),
        r.n.map(|x| x.to_string()).unwrap_or_default(),
        r.ell.to_string(),
        r.l.map(|x| x.to_string()).unwrap_or_default(),
        float(r.measured),
        float(r.bound),
        r.pass.to_string(),
    ]
}

#[derive(Serialize)]
struct DirectedCheck {
    direction: usize,
    #[serde(flatten)]
    check: BoundCheck,
}

#[derive(Serialize)]
struct EdgeAlgebra {
    direction: usize,
    idempotency_error: f64,
    symmetry_error: f64,
    trace: f64,
    kernel_residual: f64,
    pass: bool,
}

/// `h^2 = h`, `h = h^T`, rank 5 and the four annihilated two-site states.
fn edge_algebra(p: &Params, j: usize) -> Result<EdgeAlgebra> {
    let (la, lb) = (p.lambda(Species::A)[j], p.lambda(Species::B)[j]);
    let h = edge_projection_block(la, lb)?;
    let mut idem = 0.0f64;
    let mut sym = 0.0f64;
    for r in 0..9 {
        for c in 0..9 {
            let sq: f64 = (0..9).map(|k| h[(r, k)] * h[(k, c)]).sum();
            idem = idem.max((sq - h[(r, c)]).abs());
            sym = sym.max((h[(r, c)] - h[(c, r)]).abs());
        }
    }
    let trace: f64 = (0..9).map(|k| h[(k, k)]).sum();
    let kernel: [&[(usize, f64)]; 4] = [&[(0, 1.0)], &[(1, la), (3, 1.0)], &[(2, lb), (6, 1.0)], &[(5, lb), (7, la)]];
    let mut residual = 0.0f64;
    for v in kernel {
        let norm = v.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
        for r in 0..9 {
            let hv: f64 = v.iter().map(|&(c, x)| h[(r, c)] * x).sum();
            residual = residual.max((hv / norm).abs());
        }
    }
    Ok(EdgeAlgebra {
        direction: j + 1,
        idempotency_error: idem,
        symmetry_error: sym,
        trace,
        kernel_residual: residual,
        pass: idem <= 1e-14 && sym <= 1e-14 && (trace - 5.0).abs() <= 1e-12 && residual <= 1e-14,
    })
}

pub fn verify_lemmas(c: &Common, ell: Option<usize>, n: Option<usize>) -> Result<Output> {
    let p = params(c)?;
    let t = select_tilt(&p, c.eta)?;
    let ell = match ell {
        Some(l) => l,
        None => choose_ell(&t, c.ell_cap)?.0,
    };
    let n = n.unwrap_or(2 * ell);
    if n < ell || ell < 2 {
        bail!(PvbsError::InvalidArgument(format!("need n >= ell >= 2, got n={n}, ell={ell}")));
    }
    let d = t.dim();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for j in 0..d {
        let mut extents = vec![ell; d];
        extents[j] = n + 1;
        let fam = VolumeFamilySpec::new(t.geometry.clone(), extents, j, n + 1 - ell, n + 1)?;
        let mut found: Vec<BoundCheck> = Vec::new();
        let mut note = |what: &str, e: PvbsError| notes.push(format!("{what} in direction {} not applicable: {e}", j + 1));
        match check_product_bounds(&t, &fam) {
            Ok(v) => found.extend(v),
            Err(e @ PvbsError::Hypothesis(_)) => note("product bounds", e),
            Err(e) => return Err(e.into()),
        }
        match check_diagonal_bound(&t, &fam) {
            Ok(v) => found.push(v),
            Err(e @ PvbsError::Hypothesis(_)) => note("diagonal bound", e),
            Err(e) => return Err(e.into()),
        }
        found.extend(check_ratio_bounds(&t, &fam, n, ell)?);
        checks.extend(found.into_iter().map(|check| DirectedCheck { direction: j + 1, check }));
    }
    let edges: Vec<EdgeAlgebra> = (0..p.dim()).map(|j| edge_algebra(&p, j)).collect::<Result<_>>()?;
    let all_pass = checks.iter().all(|c| c.check.pass) && edges.iter().all(|e| e.pass);
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.direction.to_string(),
                c.check.name.clone(),
                float(c.check.lhs),
                float(c.check.rhs),
                opt_float(c.check.rhs_printed),
                c.check.pass.to_string(),
                float(c.check.slack),
            ]
        })
        .collect();
    let header = ["direction", "name", "lhs", "rhs", "rhs_printed", "pass", "slack"];
    let mut tab = table(&header, &rows);
    for e in &edges {
        tab.push_str(&format!(
            "\nedge projector, direction {}: |h^2-h| {}, trace {}, kernel residual {}, pass {}",
            e.direction,
            float(e.idempotency_error),
            float(e.trace),
            float(e.kernel_residual),
            e.pass
        ));
    }
    tab.push_str(&format!("\nall_pass {all_pass}\n"));
    let out = json!({
        "params": p,
        "tilt": t,
        "ell": ell,
        "n": n,
        "checks": checks,
        "edge_projector": edges,
        "notes": notes,
        "all_pass": all_pass,
    });
    Ok(Output::new(&out)?.with_csv(csv(&header, &rows)).with_table(tab))
}

pub struct ProjectionArgs {
    pub n: usize,
    pub ell: usize,
    pub direction: usize,
    pub transverse: usize,
    pub dense: bool,
}

pub fn verify_projection(c: &Common, a: &ProjectionArgs) -> Result<Output> {
    let p = params(c)?;
    let t: TiltScheme = select_tilt(&p, c.eta)?;
    let d = t.dim();
    if a.direction == 0 || a.direction > d {
        bail!(PvbsError::InvalidArgument(format!("direction must lie in 1..={d}")));
    }
    let j = a.direction - 1;
    let mut extents = vec![a.transverse; d];
    extents[j] = a.n + 1;
    let fam = VolumeFamilySpec::new(t.geometry.clone(), extents, j, 0, a.n + 1)?;
    let report = verify_condition_iii(&t, &fam, a.n, a.ell, &p, &norm_options(c))?;
    let dense = if a.dense {
        Some(dense_condition_iii(&fam, a.n, a.ell, &p)?)
    } else {
        None
    };
    let row = condition_row(&report);
    let header = ["condition", "direction", "n", "ell", "L", "measured", "bound", "pass"];
    let mut tab = table(&header, std::slice::from_ref(&row));
    if let Some(x) = dense {
        tab.push_str(&format!("\ndense {}\n", float(x)));
    }
    let out = json!({ "params": p, "tilt": t, "report": report, "dense": dense });
    Ok(Output::new(&out)?.with_csv(csv(&header, &[row])).with_table(tab))
}

pub fn scaling(c: &Common, sizes: Option<&str>, numeric_cap: u128) -> Result<Output> {
    let p = params(c)?;
    let ls = match sizes {
        Some(s) => usize_list(s)?,
        None => (2..=40).collect(),
    };
    let rows = gapless_scaling(&p, &ls, numeric_cap, &gap_options(c))?;
    let text: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.l.to_string(), float(r.trial_energy), float(r.bound), opt_float(r.numeric_gap)])
        .collect();
    let header = ["L", "trial_energy", "bound", "numeric_gap"];
    Ok(Output::new(&json!({ "params": p, "rows": rows }))?
        .with_csv(csv(&header, &text))
        .with_table(table(&header, &text)))
}

pub fn info() -> Result<Output> {
    let l = LanczosOptions::default();
    let out = json!({
        "version": pvbs_core::VERSION,
        "defaults": {
            "eta": defaults::ETA,
            "v_max": defaults::V_MAX,
            "ell_cap": defaults::ELL_CAP,
            "sector_cap": defaults::SECTOR_CAP as u64,
            "dense_cap": defaults::DENSE_CAP,
            "dense_switch": defaults::DENSE_SWITCH,
            "power_tol": defaults::POWER_TOL,
            "power_max_iter": defaults::POWER_MAX_ITER,
            "seed": defaults::SEED,
            "action_cap": defaults::ACTION_CAP as u64,
            "kernel_tol_rel": defaults::KERNEL_TOL_REL,
            "lanczos_tol": l.tol,
            "lanczos_max_basis": l.max_basis,
            "lanczos_max_restarts": l.max_restarts,
            "max_sites": fock::MAX_SITES,
        }
    });
    Output::new(&out)
}

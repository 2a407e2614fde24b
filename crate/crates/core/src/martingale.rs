//! The martingale-method gap certifier: checks of conditions (i) and (iii),
//! the local gap `gamma(Lambda_ell)`, and the chained lower bound.

use serde::{Deserialize, Serialize};

use crate::analytic::lemma1_bound;
use crate::defaults;
use crate::error::{invalid, PvbsError, Result};
use crate::fock::{all_sectors, enumerate_sector, sector_dimension, MAX_SITES};
use crate::lattice::{build_tilted, TiltGeometry, VolumeFamilySpec};
use crate::model::{c_tilde, choose_ell, classify_zd, ell_conditions, epsilon_ell, select_tilt, GapClass, Params, TiltScheme};
use crate::operators::{
    dense_kernel_projector, dense_spectral_norm, operator_norm_of_product, EnProjector, GroundProjector,
};
use crate::spectra::{total_gap, GapOptions};

/// Slack allowed when comparing a measured value with its bound.
const REPORT_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionId {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "iii")]
    Iii,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    /// 1-based sweep direction in the working frame of the tilt.
    pub direction: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    pub ell: usize,
    /// Largest family index used (condition (i) only).
    #[serde(rename = "L", skip_serializing_if = "Option::is_none", default)]
    pub l: Option<usize>,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl ConditionReport {
    fn new(condition: ConditionId, sweep: usize, n: Option<usize>, ell: usize, l: Option<usize>, measured: f64, bound: f64) -> Self {
        ConditionReport {
            condition,
            direction: sweep + 1,
            n,
            ell,
            l,
            measured,
            bound,
            pass: measured <= bound + REPORT_SLACK,
        }
    }
}

/// Family with the sweep extent widened to at least `n`.
fn widened(family: &VolumeFamilySpec, n: usize) -> Result<VolumeFamilySpec> {
    let mut extents = family.extents.clone();
    extents[family.sweep] = extents[family.sweep].max(n);
    VolumeFamilySpec::new(family.geometry.clone(), extents, family.sweep, 0, n)
}

/// Largest number of slabs `Lambda_n \ Lambda_{n-ell}`, `n = ell..=L`, containing
/// a single edge of `Lambda_L`. Each edge is located by the sweep box coordinates
/// of its endpoints.
pub fn verify_condition_i(family: &VolumeFamilySpec, ell: usize, l: usize) -> Result<ConditionReport> {
    if ell == 0 || ell > l {
        return invalid(format!("need 1 <= ell <= L, got ell={ell}, L={l}"));
    }
    let fam = widened(family, l)?;
    let g = &fam.geometry;
    let j = fam.sweep;
    let vol = fam.member(l)?;
    let mut worst = 0usize;
    for e in vol.edges() {
        let u0 = g.box_coords(e.base.coords()).0[j];
        let u1 = g.box_coords(e.head().coords()).0[j];
        let (lo, hi) = (u0.min(u1), u0.max(u1));
        // n ranges over [max(ell, hi + 1), min(L, lo + ell)]
        let first = (ell as i64).max(hi + 1);
        let last = (l as i64).min(lo + ell as i64);
        worst = worst.max((last - first + 1).max(0) as usize);
    }
    Ok(ConditionReport::new(ConditionId::I, j, None, ell, Some(l), worst as f64, ell as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Largest Fock dimension on which projector actions are applied.
    pub action_cap: u128,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: defaults::POWER_TOL,
            max_iter: defaults::POWER_MAX_ITER,
            seed: defaults::SEED,
            action_cap: defaults::ACTION_CAP,
        }
    }
}

fn check_scheme(t: &TiltScheme, family: &VolumeFamilySpec) -> Result<()> {
    if t.geometry != family.geometry {
        return invalid("volume family was not built with this tilt scheme");
    }
    Ok(())
}

/// `||G^{Lambda_{n+1} \ Lambda_{n+1-ell}} E_n||` by power iteration, against the
/// projection bound for the family's sweep direction.
pub fn verify_condition_iii(
    t: &TiltScheme,
    family: &VolumeFamilySpec,
    n: usize,
    ell: usize,
    p: &Params,
    opts: &NormOptions,
) -> Result<ConditionReport> {
    check_scheme(t, family)?;
    let bound = lemma1_bound(t, ell, family.sweep)?;
    if n + 1 < ell {
        return invalid(format!("need n + 1 >= ell, got n={n}, ell={ell}"));
    }
    let fam = widened(family, n + 1)?;
    let ambient = fam.member(n + 1)?;
    let slab = fam.window(n + 1 - ell, n + 1)?.slab()?;
    let g = GroundProjector::with_cap(&slab, p, &ambient, opts.action_cap)?;
    let e = EnProjector::with_cap(&fam, p, n, opts.action_cap)?;
    let est = operator_norm_of_product(&g, &e, opts.tol, opts.max_iter, opts.seed)?;
    Ok(ConditionReport::new(ConditionId::Iii, fam.sweep, Some(n), ell, None, est.value, bound))
}

/// The same norm from dense kernel projectors, sector by sector.
pub fn dense_condition_iii(family: &VolumeFamilySpec, n: usize, ell: usize, p: &Params) -> Result<f64> {
    if n + 1 < ell || n == 0 {
        return invalid("need n >= 1 and n + 1 >= ell");
    }
    let fam = widened(family, n + 1)?;
    let ambient = fam.member(n + 1)?;
    let small = fam.member(n)?;
    let slab = fam.window(n + 1 - ell, n + 1)?.slab()?;
    let tol = 1e-9;
    let mut worst = 0.0f64;
    for label in all_sectors(ambient.len()) {
        let basis = enumerate_sector(&ambient, label)?;
        let gs = dense_kernel_projector(&slab, &ambient, p, &basis, tol)?;
        let en = dense_kernel_projector(&small, &ambient, p, &basis, tol)?
            - dense_kernel_projector(&ambient, &ambient, p, &basis, tol)?;
        worst = worst.max(dense_spectral_norm(&(gs * en)));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaEll {
    Numeric(f64),
    /// The local gap exists but is out of numerical reach.
    Symbolic {
        sites: usize,
        log10_largest_sector: f64,
    },
}

impl GammaEll {
    pub fn value(&self) -> Option<f64> {
        match self {
            GammaEll::Numeric(v) => Some(*v),
            GammaEll::Symbolic { .. } => None,
        }
    }
}

fn log10_multinomial(n: usize, a: usize, b: usize) -> f64 {
    let lf = |k: usize| (1..=k).map(|i| (i as f64).log10()).sum::<f64>();
    lf(n) - lf(a) - lf(b) - lf(n - a - b)
}

/// `log10` of the largest sector dimension on `n` sites (near-equal thirds).
pub fn log10_largest_sector(n: usize) -> f64 {
    let a = n / 3;
    let b = (n - a) / 2;
    log10_multinomial(n, a, b)
}

/// `gamma` of the tilted volume with all extents `ell`, if its largest sector fits `budget`.
pub fn compute_gamma_ell(p: &Params, t: &TiltScheme, ell: usize, budget: u128, gap: &GapOptions) -> Result<GammaEll> {
    let d = t.dim();
    let sites = (ell as u128)
        .checked_pow(d as u32)
        .and_then(|x| x.checked_mul(t.geometry.multiplicity() as u128))
        .unwrap_or(u128::MAX);
    let symbolic = |sites: usize| GammaEll::Symbolic {
        sites,
        log10_largest_sector: log10_largest_sector(sites),
    };
    if sites > MAX_SITES as u128 {
        return Ok(symbolic(sites.min(usize::MAX as u128) as usize));
    }
    let sites = sites as usize;
    let largest = all_sectors(sites)
        .iter()
        .map(|l| sector_dimension(sites, l.n_a, l.n_b))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(1);
    if largest > budget {
        return Ok(symbolic(sites));
    }
    let v = build_tilted(&t.geometry, &vec![ell; d])?;
    let opts = GapOptions {
        sector_cap: u128::MAX,
        ..*gap
    };
    Ok(GammaEll::Numeric(total_gap(&v, p, &opts)?.total_gap))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub eta: f64,
    pub ell_cap: usize,
    /// Largest sector dimension solved when computing `gamma(Lambda_ell)`.
    pub budget: u128,
    pub norm: NormOptions,
    pub gap: GapOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            eta: defaults::ETA,
            ell_cap: defaults::ELL_CAP,
            budget: defaults::SECTOR_CAP,
            norm: NormOptions::default(),
            gap: GapOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolicMarker {
    Symbolic,
}

/// A number, or the marker `"symbolic"` when it is known to exist but was not computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaybeSymbolic {
    Value(f64),
    Marker(SymbolicMarker),
}

impl MaybeSymbolic {
    pub fn value(self) -> Option<f64> {
        match self {
            MaybeSymbolic::Value(v) => Some(v),
            MaybeSymbolic::Marker(_) => None,
        }
    }
}

impl From<Option<f64>> for MaybeSymbolic {
    fn from(v: Option<f64>) -> Self {
        v.map_or(MaybeSymbolic::Marker(SymbolicMarker::Symbolic), MaybeSymbolic::Value)
    }
}

/// Self-contained record of a lower bound `gamma(Lambda_ell) ((1 - eps sqrt(ell))^2 / ell)^d`
/// on the spectral gap of every large tilted volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub params: Params,
    pub tilt: TiltScheme,
    pub ell: usize,
    pub c_tilde: f64,
    pub eps_ell: f64,
    pub d_ell: usize,
    pub gamma_ell: MaybeSymbolic,
    pub gamma_volume: String,
    pub gamma_detail: GammaEll,
    pub factor_per_direction: f64,
    pub final_bound: MaybeSymbolic,
    pub conditions: Vec<ConditionReport>,
    pub notes: Vec<String>,
    pub version: String,
}

/// Transverse extent used for the condition (iii) spot checks.
const SPOT_TRANSVERSE: usize = 2;

fn spot_family(t: &TiltScheme, sweep: usize, n: usize) -> Result<VolumeFamilySpec> {
    let mut extents = vec![SPOT_TRANSVERSE; t.dim()];
    extents[sweep] = n + 1;
    VolumeFamilySpec::new(t.geometry.clone(), extents, sweep, 0, n + 1)
}

fn spot_sites(g: &TiltGeometry, extents: &[usize]) -> u128 {
    extents.iter().map(|&e| e as u128).product::<u128>() * g.multiplicity() as u128
}

/// Runs the whole pipeline for gapped parameters.
pub fn certify(p: &Params, opts: &CertifyOptions) -> Result<GapCertificate> {
    if classify_zd(p) != GapClass::Gapped {
        return Err(PvbsError::Gapless);
    }
    let t = select_tilt(p, opts.eta)?;
    let (ell, eps) = choose_ell(&t, opts.ell_cap)?;
    let ct = c_tilde(&t);
    let d = t.dim();
    let gamma = compute_gamma_ell(p, &t, ell, opts.budget, &opts.gap)?;
    let factor = (1.0 - eps * (ell as f64).sqrt()).powi(2) / ell as f64;
    let mut notes = Vec::new();
    if let GammaEll::Symbolic { sites, log10_largest_sector } = gamma {
        notes.push(format!(
            "gamma_ell not computed: {sites} sites, largest sector ~1e{log10_largest_sector:.1} exceeds budget {}",
            opts.budget
        ));
    }

    let mut conditions = Vec::new();
    for j in 0..d {
        let mut extents = vec![ell; d];
        extents[j] = 2 * ell;
        let family = VolumeFamilySpec::new(t.geometry.clone(), extents, j, 0, 2 * ell)?;
        conditions.push(verify_condition_i(&family, ell, 2 * ell)?);
        for n in [ell, ell + 1] {
            let fam = spot_family(&t, j, n)?;
            let sites = spot_sites(&t.geometry, &fam.extents);
            let fits = sites <= MAX_SITES as u128 && 3u128.pow(sites as u32) <= opts.norm.action_cap;
            if !fits {
                notes.push(format!(
                    "condition iii at direction {}, n={n} omitted: 3^{sites} exceeds action cap {}",
                    j + 1,
                    opts.norm.action_cap
                ));
                continue;
            }
            match verify_condition_iii(&t, &fam, n, ell, p, &opts.norm) {
                Ok(r) => conditions.push(r),
                Err(e) if e.is_budget() => return Err(e),
                Err(e) => notes.push(format!("condition iii at direction {}, n={n} skipped: {e}", j + 1)),
            }
        }
    }
    let gamma_value = gamma.value();
    let cert = GapCertificate {
        params: p.clone(),
        ell,
        c_tilde: ct,
        eps_ell: eps,
        d_ell: ell,
        gamma_ell: gamma_value.into(),
        gamma_volume: t.geometry.describe(&vec![ell; d]),
        gamma_detail: gamma,
        factor_per_direction: factor,
        final_bound: gamma_value.map(|g| g * factor.powi(d as i32)).into(),
        conditions,
        notes,
        version: crate::VERSION.to_string(),
        tilt: t,
    };
    cert.validate()?;
    Ok(cert)
}

impl GapCertificate {
    /// Re-derives the constants from `params` and the recorded geometry and checks
    /// every invariant of the certificate.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PvbsError::Hypothesis(m));
        let t = TiltScheme::with_geometry(&self.params, self.tilt.geometry.clone())?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if !close(c_tilde(&t), self.c_tilde) {
            return fail(format!("c_tilde {} does not match recomputed {}", self.c_tilde, c_tilde(&t)));
        }
        if !close(epsilon_ell(&t, self.ell), self.eps_ell) {
            return fail("eps_ell does not match the recomputed value".into());
        }
        if !ell_conditions(&t, self.ell).iter().all(|&c| c) {
            return fail(format!("ell = {} violates an admissibility condition", self.ell));
        }
        if !(self.eps_ell < 1.0 / (self.ell as f64).sqrt()) {
            return fail("eps_ell * sqrt(ell) >= 1".into());
        }
        let factor = (1.0 - self.eps_ell * (self.ell as f64).sqrt()).powi(2) / self.ell as f64;
        if !close(factor, self.factor_per_direction) {
            return fail("factor_per_direction is inconsistent".into());
        }
        match (self.gamma_ell.value(), self.final_bound.value()) {
            (Some(g), Some(f)) => {
                if !(g > 0.0 && f > 0.0 && close(f, g * factor.powi(t.dim() as i32))) {
                    return fail("final_bound is inconsistent with gamma_ell".into());
                }
            }
            (None, None) => {}
            _ => return fail("gamma_ell and final_bound must both be numeric or both symbolic".into()),
        }
        if let Some(c) = self.conditions.iter().find(|c| !c.pass) {
            return fail(format!("condition {:?} failed in direction {}", c.condition, c.direction));
        }
        for j in 0..t.dim() {
            let mut extents = vec![self.ell; t.dim()];
            extents[j] = 2 * self.ell;
            let fam = VolumeFamilySpec::new(t.geometry.clone(), extents, j, 0, 2 * self.ell)?;
            for n in self.ell..=2 * self.ell {
                let slab = fam.window(n - self.ell, n)?.slab()?;
                if slab.len() <= 200_000 && !slab.is_connected() {
                    return fail(format!("slab [{}, {n}) in direction {} is disconnected", n - self.ell, j + 1));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_box, TiltCase};
    use std::collections::BTreeMap;

    fn params(a: &[f64], b: &[f64]) -> Params {
        Params::new(a.to_vec(), b.to_vec()).unwrap()
    }

    fn box_family(d: usize, extents: Vec<usize>, sweep: usize) -> VolumeFamilySpec {
        let top = extents[sweep];
        VolumeFamilySpec::new(TiltGeometry::axis_aligned(d).unwrap(), extents, sweep, 0, top).unwrap()
    }

    /// Counts edges slab by slab, the plain reading of the condition.
    fn brute_multiplicity(family: &VolumeFamilySpec, ell: usize, l: usize) -> usize {
        let mut counts: BTreeMap<(crate::lattice::Site, usize), usize> = BTreeMap::new();
        let fam = widened(family, l).unwrap();
        for n in ell..=l {
            for e in fam.window(n - ell, n).unwrap().slab().unwrap().edges() {
                *counts.entry((e.base.clone(), e.direction)).or_default() += 1;
            }
        }
        counts.values().copied().max().unwrap_or(0)
    }

    #[test]
    fn condition_i_counts() {
        let f = box_family(1, vec![6], 0);
        let r = verify_condition_i(&f, 3, 6).unwrap();
        assert_eq!(r.measured, 2.0);
        assert_eq!(r.measured as usize, brute_multiplicity(&f, 3, 6));
        assert!(r.pass);
        assert_eq!(verify_condition_i(&f, 2, 6).unwrap().measured, 1.0);

        let f = box_family(2, vec![8, 3], 0);
        let r = verify_condition_i(&f, 4, 8).unwrap();
        assert_eq!(r.measured, 4.0);
        assert_eq!(brute_multiplicity(&f, 4, 8), 4);
    }

    #[test]
    fn condition_i_matches_brute_force_on_tilted_families() {
        let geoms = [
            TiltGeometry::new(TiltCase::Rectangular, vec![0, 1], vec![1]).unwrap(),
            TiltGeometry::new(TiltCase::Rectangular, vec![1, 0], vec![2]).unwrap(),
            TiltGeometry::new(TiltCase::Diamond, vec![0, 1], vec![]).unwrap(),
            TiltGeometry::new(TiltCase::Diamond, vec![0, 1, 2], vec![1]).unwrap(),
        ];
        for g in geoms {
            for sweep in 0..g.dim() {
                for ell in 2..=4 {
                    let mut ext = vec![3; g.dim()];
                    ext[sweep] = 2 * ell;
                    let f = VolumeFamilySpec::new(g.clone(), ext, sweep, 0, 2 * ell).unwrap();
                    let r = verify_condition_i(&f, ell, 2 * ell).unwrap();
                    assert_eq!(r.measured as usize, brute_multiplicity(&f, ell, 2 * ell), "{g:?} sweep {sweep} ell {ell}");
                    assert!(r.pass);
                }
            }
        }
    }

    fn d1(la: f64, lb: f64) -> (Params, TiltScheme) {
        let p = params(&[la], &[lb]);
        let t = TiltScheme::with_geometry(&p, TiltGeometry::axis_aligned(1).unwrap()).unwrap();
        (p, t)
    }

    #[test]
    fn condition_iii_matches_dense_oracle() {
        let (p, t) = d1(10.0, 0.1);
        let f = box_family(1, vec![6], 0);
        let r = verify_condition_iii(&t, &f, 5, 4, &p, &NormOptions::default()).unwrap();
        let dense = dense_condition_iii(&f, 5, 4, &p).unwrap();
        assert!((r.measured - dense).abs() < 1e-8, "{} vs {dense}", r.measured);
        assert!(r.measured <= r.bound);
    }

    #[test]
    fn condition_iii_vanishes_when_slab_is_everything() {
        let (p, t) = d1(10.0, 0.1);
        let f = box_family(1, vec![5], 0);
        let r = verify_condition_iii(&t, &f, 4, 5, &p, &NormOptions::default()).unwrap();
        assert_eq!(r.measured, 0.0);
    }

    #[test]
    fn condition_iii_in_a_strip() {
        let p = params(&[10.0, 10.0], &[0.1, 0.1]);
        let t = TiltScheme::with_geometry(&p, TiltGeometry::axis_aligned(2).unwrap()).unwrap();
        let f = box_family(2, vec![2, 6], 1);
        let r = verify_condition_iii(&t, &f, 5, 4, &p, &NormOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn gamma_examples() {
        let (p, t) = d1(10.0, 0.1);
        let g = compute_gamma_ell(&p, &t, 3, 1000, &GapOptions::default()).unwrap();
        let direct = total_gap(&build_box(&[3]).unwrap(), &p, &GapOptions::default()).unwrap().total_gap;
        assert_eq!(g, GammaEll::Numeric(direct));
        let p2 = params(&[10.0, 10.0], &[0.1, 0.1]);
        let t2 = TiltScheme::with_geometry(&p2, TiltGeometry::axis_aligned(2).unwrap()).unwrap();
        let g = compute_gamma_ell(&p2, &t2, 7, 1_000_000, &GapOptions::default()).unwrap();
        assert!(matches!(g, GammaEll::Symbolic { sites: 49, .. }));
    }

    #[test]
    fn d1_certificate() {
        let c = certify(&params(&[10.0], &[0.1]), &CertifyOptions::default()).unwrap();
        assert_eq!(c.ell, 7);
        assert!((c.eps_ell - 0.2080).abs() < 1e-4);
        assert!((c.factor_per_direction - 0.0289).abs() < 1e-4);
        let g = c.gamma_ell.value().unwrap();
        assert!(g > 0.0);
        assert!((c.final_bound.value().unwrap() - g * c.factor_per_direction).abs() < 1e-15);
        assert!(c.conditions.iter().any(|r| r.condition == ConditionId::Iii));
        let json = serde_json::to_value(&c).unwrap();
        assert!(json["gamma_ell"].is_f64());
        let back: GapCertificate = serde_json::from_value(json).unwrap();
        back.validate().unwrap();
    }

    #[test]
    fn d2_certificate_is_symbolic() {
        let c = certify(&params(&[10.0, 10.0], &[0.1, 0.1]), &CertifyOptions::default()).unwrap();
        assert_eq!(c.ell, 7);
        assert_eq!(c.gamma_ell, MaybeSymbolic::Marker(SymbolicMarker::Symbolic));
        let json = serde_json::to_value(&c).unwrap();
        assert_eq!(json["gamma_ell"], "symbolic");
        assert_eq!(json["final_bound"], "symbolic");
        assert_eq!(c.conditions.iter().filter(|r| r.condition == ConditionId::I).count(), 2);
        assert!(!c.notes.is_empty());
    }

    #[test]
    fn certify_rejects_gapless_and_tampering() {
        assert_eq!(certify(&params(&[1.0], &[2.0]), &CertifyOptions::default()), Err(PvbsError::Gapless));
        let mut c = certify(&params(&[10.0], &[0.1]), &CertifyOptions::default()).unwrap();
        c.eps_ell *= 1.01;
        assert!(c.validate().is_err());
    }
}

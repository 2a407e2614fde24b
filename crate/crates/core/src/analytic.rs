//! Closed forms: ground-state vectors, normalization constants, trial-state
//! energies, and evaluators for the normalization-constant lemmas.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PvbsError, Result};
use crate::fock::{SectorBasis, SectorLabel, Symbol};
use crate::lattice::{boundary_sites, Site, Volume, VolumeFamilySpec};
use crate::model::{c_tilde, lemma_bound_raw, log_lambda, Params, Species, TiltScheme};

/// `x . log lambda_s`, the exponent of `lambda_s^x`.
pub fn log_lambda_power(p: &Params, s: Species, x: &Site) -> f64 {
    log_lambda(p, s).iter().zip(x.coords()).map(|(l, &c)| l * c as f64).sum()
}

/// `lambda_s^x = prod_j lambda_{s,j}^{x_j}`, evaluated in log space.
pub fn lambda_power(p: &Params, s: Species, x: &Site) -> Result<f64> {
    if x.dim() != p.dim() {
        return invalid("site dimension does not match parameters");
    }
    let v = log_lambda_power(p, s, x).exp();
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(PvbsError::Overflow(format!("lambda_{s:?}^{x} is not representable")))
    }
}

/// `C(a)`, `C(b)`, `D` and `C(ab) = C(a) C(b) - D` of a volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSet {
    pub c_a: f64,
    pub c_b: f64,
    pub c_ab: f64,
    pub d_diag: f64,
}

impl NormalizationSet {
    fn from_parts(c_a: f64, c_b: f64, d_diag: f64) -> Self {
        NormalizationSet {
            c_a,
            c_b,
            c_ab: c_a * c_b - d_diag,
            d_diag,
        }
    }

    pub fn c(&self, s: Species) -> f64 {
        match s {
            Species::A => self.c_a,
            Species::B => self.c_b,
        }
    }
}

/// `sum exp(w_i)` with the largest exponent factored out.
fn sum_exp(w: &[f64]) -> f64 {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if w.is_empty() {
        return 0.0;
    }
    m.exp() * w.iter().map(|x| (x - m).exp()).sum::<f64>()
}

/// `log sum exp(w_i)`.
fn log_sum_exp(w: &[f64]) -> f64 {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + w.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn squared_exponents(v: &Volume, p: &Params, s: Species) -> Vec<f64> {
    v.sites().iter().map(|x| 2.0 * log_lambda_power(p, s, x)).collect()
}

/// Normalization constants by summing over the sites of `v`.
pub fn normalization_direct(v: &Volume, p: &Params) -> Result<NormalizationSet> {
    if v.is_empty() {
        return invalid("normalization of an empty volume");
    }
    if v.dim() != p.dim() {
        return invalid("volume dimension does not match parameters");
    }
    let wa = squared_exponents(v, p, Species::A);
    let wb = squared_exponents(v, p, Species::B);
    let wd: Vec<f64> = wa.iter().zip(&wb).map(|(a, b)| a + b).collect();
    Ok(NormalizationSet::from_parts(sum_exp(&wa), sum_exp(&wb), sum_exp(&wd)))
}

/// `sum_{x=m}^{n-1} e^{2 l x}`.
fn geometric(l: f64, m: usize, n: usize) -> f64 {
    if n <= m {
        return 0.0;
    }
    let len = (n - m) as f64;
    if l == 0.0 {
        return len;
    }
    (2.0 * l * m as f64).exp() * (2.0 * l * len).exp_m1() / (2.0 * l).exp_m1()
}

fn check_family(t: &TiltScheme, spec: &VolumeFamilySpec) -> Result<()> {
    if t.geometry != spec.geometry {
        return invalid("volume family was not built with this tilt scheme");
    }
    Ok(())
}

fn closed_product(logs: &[f64], spec: &VolumeFamilySpec, lower: usize, upper: usize) -> f64 {
    logs.iter()
        .enumerate()
        .map(|(k, &l)| {
            if k == spec.sweep {
                geometric(l, lower, upper)
            } else {
                geometric(l, 0, spec.extents[k])
            }
        })
        .product()
}

fn closed_window(t: &TiltScheme, spec: &VolumeFamilySpec, lower: usize, upper: usize) -> NormalizationSet {
    let diag: Vec<f64> = t.log_tilde_a.iter().zip(&t.log_tilde_b).map(|(a, b)| a + b).collect();
    NormalizationSet::from_parts(
        t.kappa_a * closed_product(&t.log_tilde_a, spec, lower, upper),
        t.kappa_b * closed_product(&t.log_tilde_b, spec, lower, upper),
        t.kappa_diag * closed_product(&diag, spec, lower, upper),
    )
}

/// Normalization constants of the slab `[lower, upper)` of a tilted family as
/// products of one-dimensional geometric sums in the effective parameters.
pub fn normalization_closed_form(t: &TiltScheme, spec: &VolumeFamilySpec) -> Result<NormalizationSet> {
    check_family(t, spec)?;
    Ok(closed_window(t, spec, spec.lower, spec.upper))
}

/// Normalized single-particle amplitudes of the ground states on a volume:
/// `a[i] = lambda_a^{x_i} / sqrt(C(a))`, likewise `b`, and the two-particle
/// amplitude `psi_ab(x_i, x_k) = ab_scale * a[i] * b[k]` for `i != k`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundAmplitudes {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub ab_scale: f64,
}

impl GroundAmplitudes {
    pub fn new(v: &Volume, p: &Params) -> Result<Self> {
        check_ground_volume(v)?;
        if v.dim() != p.dim() {
            return invalid("volume dimension does not match parameters");
        }
        let amps = |s| {
            let w = squared_exponents(v, p, s);
            let log_c = log_sum_exp(&w);
            w.iter().map(|x| (0.5 * (x - log_c)).exp()).collect::<Vec<f64>>()
        };
        let (a, b) = (amps(Species::A), amps(Species::B));
        let overlap: f64 = a.iter().zip(&b).map(|(x, y)| (x * y).powi(2)).sum();
        Ok(GroundAmplitudes {
            ab_scale: 1.0 / (1.0 - overlap).sqrt(),
            a,
            b,
        })
    }

    pub fn single(&self, s: Species) -> &[f64] {
        match s {
            Species::A => &self.a,
            Species::B => &self.b,
        }
    }
}

fn check_ground_volume(v: &Volume) -> Result<()> {
    if v.len() < 2 {
        return invalid("ground states need a volume with at least two sites");
    }
    if !v.is_connected() {
        return Err(PvbsError::Disconnected);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundKind {
    Vac,
    A,
    B,
    Ab,
}

impl GroundKind {
    pub const ALL: [GroundKind; 4] = [GroundKind::Vac, GroundKind::A, GroundKind::B, GroundKind::Ab];

    pub fn sector(self) -> SectorLabel {
        match self {
            GroundKind::Vac => SectorLabel::new(0, 0),
            GroundKind::A => SectorLabel::new(1, 0),
            GroundKind::B => SectorLabel::new(0, 1),
            GroundKind::Ab => SectorLabel::new(1, 1),
        }
    }

    pub fn for_sector(label: SectorLabel) -> Option<GroundKind> {
        GroundKind::ALL.into_iter().find(|k| k.sector() == label)
    }
}

/// Unit ground-state vector `Psi_which` in the coordinates of `basis`.
pub fn ground_state_vector(v: &Volume, p: &Params, which: GroundKind, basis: &SectorBasis) -> Result<Vec<f64>> {
    if basis.label() != which.sector() || basis.n_sites() != v.len() {
        return invalid("basis does not match the requested ground state");
    }
    let amp = GroundAmplitudes::new(v, p)?;
    Ok(ground_vector_from(&amp, which, basis))
}

pub(crate) fn ground_vector_from(amp: &GroundAmplitudes, which: GroundKind, basis: &SectorBasis) -> Vec<f64> {
    let n = basis.n_sites();
    basis
        .states()
        .iter()
        .map(|c| {
            let find = |sym| (0..n).find(|&k| c.symbol(k) == sym);
            match which {
                GroundKind::Vac => 1.0,
                GroundKind::A => amp.a[find(Symbol::A).unwrap()],
                GroundKind::B => amp.b[find(Symbol::B).unwrap()],
                GroundKind::Ab => amp.ab_scale * amp.a[find(Symbol::A).unwrap()] * amp.b[find(Symbol::B).unwrap()],
            }
        })
        .collect()
}

fn check_strict_subset(inner: &Volume, ambient: &Volume) -> Result<()> {
    if !inner.is_subset_of(ambient) {
        return Err(PvbsError::NotSubset);
    }
    if inner.len() == ambient.len() {
        return invalid("trial volume must be strictly contained in the ambient volume");
    }
    if !inner.is_connected() || inner.is_empty() {
        return Err(PvbsError::Disconnected);
    }
    Ok(())
}

/// Energy of `Psi_s^{inner}` (vacuum outside) under `H^{ambient}` in closed form.
///
/// Only edges with one endpoint outside `inner` contribute: an outgoing edge in
/// direction `j` gives `lambda_j^2 / (1 + lambda_j^2)` times the weight of its
/// inner endpoint, an incoming one gives `1 / (1 + lambda_j^2)`.
pub fn trial_state_energy(inner: &Volume, ambient: &Volume, p: &Params, s: Species) -> Result<f64> {
    check_strict_subset(inner, ambient)?;
    let lam = p.lambda(s);
    let w = squared_exponents(inner, p, s);
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, wx) in inner.sites().iter().zip(&w) {
        let e = (wx - m).exp();
        den += e;
        for (j, &l) in lam.iter().enumerate() {
            let outside = |y: Site| ambient.contains(&y) && !inner.contains(&y);
            let l2 = l * l;
            if outside(x.shifted(j, 1)) {
                num += l2 / (1.0 + l2) * e;
            }
            if outside(x.shifted(j, -1)) {
                num += 1.0 / (1.0 + l2) * e;
            }
        }
    }
    Ok(num / den)
}

/// `d * C(boundary of inner, s) / C(inner, s)`, the upper bound on the trial energy.
pub fn trial_energy_bound(inner: &Volume, ambient: &Volume, p: &Params, s: Species) -> Result<f64> {
    check_strict_subset(inner, ambient)?;
    let bd = Volume::new(inner.dim(), boundary_sites(inner, ambient)?, "boundary")?;
    let w_in = squared_exponents(inner, p, s);
    let w_bd = squared_exponents(&bd, p, s);
    let m = w_in.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum = |w: &[f64]| w.iter().map(|x| (x - m).exp()).sum::<f64>();
    Ok(p.dim() as f64 * sum(&w_bd) / sum(&w_in))
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// The bound as printed in the source, where it differs from the one verified.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_printed: Option<f64>,
    pub pass: bool,
    /// `(rhs - lhs) / rhs`.
    pub slack: f64,
}

/// Relative rounding allowance on the comparison `lhs <= rhs`.
const CHECK_RTOL: f64 = 1e-12;

impl BoundCheck {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, rhs_printed: Option<f64>) -> Self {
        BoundCheck {
            name: name.into(),
            lhs,
            rhs,
            rhs_printed,
            pass: lhs <= rhs * (1.0 + CHECK_RTOL),
            slack: (rhs - lhs) / rhs,
        }
    }
}

/// `C(ab) <= C(a) C(b) <= c~ C(ab)` on the family's slab.
pub fn check_product_bounds(t: &TiltScheme, spec: &VolumeFamilySpec) -> Result<Vec<BoundCheck>> {
    check_family(t, spec)?;
    if spec.upper < spec.lower + 2 {
        return Err(PvbsError::Hypothesis(format!(
            "slab length {} < 2",
            spec.upper - spec.lower
        )));
    }
    // a side of length one contributes a factor 1 to D / (C_a C_b), not 1 / (1 + q)
    if let Some(k) = (0..spec.dim()).find(|&k| k != spec.sweep && spec.extents[k] < 2) {
        return Err(PvbsError::Hypothesis(format!("transverse extent {} < 2 in direction {}", spec.extents[k], k + 1)));
    }
    let c = closed_window(t, spec, spec.lower, spec.upper);
    let prod = c.c_a * c.c_b;
    Ok(vec![
        BoundCheck::new("C_ab<=C_aC_b", c.c_ab, prod, None),
        BoundCheck::new("C_aC_b<=c~C_ab", prod, c_tilde(t) * c.c_ab, None),
    ])
}

/// `D / (C(a) C(b)) <= (n-m) e^{-2 (n-m-1) mu}` on the slab, with
/// `mu = min_s |log lambda~_{s,j}|` along the sweep direction. The printed form
/// with the maximum instead of the minimum is reported alongside.
pub fn check_diagonal_bound(t: &TiltScheme, spec: &VolumeFamilySpec) -> Result<BoundCheck> {
    check_family(t, spec)?;
    let j = spec.sweep;
    let (la, lb) = (t.log_tilde_a[j], t.log_tilde_b[j]);
    if la * lb >= 0.0 {
        return Err(PvbsError::Hypothesis(format!(
            "log lambda~ along direction {} must have opposite signs (got {la:.4}, {lb:.4})",
            j + 1
        )));
    }
    if spec.upper <= spec.lower {
        return Err(PvbsError::Hypothesis("empty slab".into()));
    }
    let c = closed_window(t, spec, spec.lower, spec.upper);
    let len = (spec.upper - spec.lower) as f64;
    let rhs = |mu: f64| len * (-2.0 * (len - 1.0) * mu).exp();
    Ok(BoundCheck::new(
        "D/(C_aC_b)",
        c.d_diag / (c.c_a * c.c_b),
        rhs(la.abs().min(lb.abs())),
        Some(rhs(la.abs().max(lb.abs()))),
    ))
}

/// The four ratio inequalities that apply to each species along the sweep
/// direction (`4R*` where `lambda~ > 1`, `4L*` where `lambda~ < 1`), for the
/// family members `Lambda_k = [0, k)`.
pub fn check_ratio_bounds(t: &TiltScheme, spec: &VolumeFamilySpec, n: usize, ell: usize) -> Result<Vec<BoundCheck>> {
    check_family(t, spec)?;
    if !(n >= ell && ell >= 2) {
        return Err(PvbsError::Hypothesis(format!("need n >= ell >= 2, got n={n}, ell={ell}")));
    }
    if n + 1 > spec.extents[spec.sweep] {
        return invalid(format!(
            "family extent {} too short for n + 1 = {}",
            spec.extents[spec.sweep],
            n + 1
        ));
    }
    let j = spec.sweep;
    let lo = n + 1 - ell;
    let mut out = Vec::with_capacity(8);
    for s in Species::BOTH {
        let l = t.log_tilde(s)[j];
        let mu = l.abs();
        let c = |a: usize, b: usize| closed_window(t, spec, a, b).c(s);
        let tag = if s == Species::A { "a" } else { "b" };
        let r1 = c(0, lo) / c(0, n);
        let r2 = c(n, n + 1) / c(lo, n + 1);
        let r3 = c(n, n + 1) / c(0, n);
        let r4 = c(lo, n) / c(0, n);
        let decay = (-2.0 * (ell as f64 - 1.0) * mu).exp();
        if l > 0.0 {
            out.push(BoundCheck::new(format!("4R1/{tag}"), r1, decay, None));
            out.push(BoundCheck::new(format!("4R2/{tag}"), r2, 1.0, None));
            out.push(BoundCheck::new(format!("4R3/{tag}"), r3, (2.0 * mu).exp(), Some((-2.0 * mu).exp())));
            out.push(BoundCheck::new(format!("4R4/{tag}"), r4, 1.0, None));
        } else {
            out.push(BoundCheck::new(format!("4L1/{tag}"), r1, 1.0, None));
            out.push(BoundCheck::new(format!("4L2/{tag}"), r2, decay, None));
            out.push(BoundCheck::new(
                format!("4L3/{tag}"),
                r3,
                (-2.0 * n as f64 * mu).exp(),
                Some((-2.0 * (n as f64 + 1.0) * mu).exp()),
            ));
            out.push(BoundCheck::new(format!("4L4/{tag}"), r4, 1.0, None));
        }
    }
    Ok(out)
}

/// Right-hand side of the two-species projection bound along working direction `j`.
pub fn lemma1_bound(t: &TiltScheme, ell: usize, j: usize) -> Result<f64> {
    if j >= t.dim() {
        return invalid(format!("direction {j} out of range"));
    }
    let mu = t.min_log_in(j);
    if !((ell as f64 - 2.0) > 1.0 / mu) {
        return Err(PvbsError::Hypothesis(format!(
            "ell - 2 = {} must exceed 1/min|log lambda~| = {:.4}",
            ell as f64 - 2.0,
            1.0 / mu
        )));
    }
    Ok(lemma_bound_raw(t, ell, mu))
}

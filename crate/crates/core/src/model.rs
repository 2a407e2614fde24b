//! Model parameters, gap classification and the derived constants used by the
//! gap certifier (tilt schemes, `c~`, `ell`, `eps_ell`).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{invalid, PvbsError, Result};
use crate::lattice::{TiltCase, TiltGeometry, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    A,
    B,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::A, Species::B];

    pub fn other(self) -> Species {
        match self {
            Species::A => Species::B,
            Species::B => Species::A,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    lambda_a: Vec<f64>,
    lambda_b: Vec<f64>,
}

/// The two positive parameter vectors `lambda_a`, `lambda_b` of length `d`.
///
/// Each entry remembers whether it is exactly one. Values parsed from decimal
/// strings decide this from the string itself, so `1.0000000000000001` (which
/// rounds to 1.0 in binary) is still treated as off the gapless manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct Params {
    lambda_a: Vec<f64>,
    lambda_b: Vec<f64>,
    unit_a: Vec<bool>,
    unit_b: Vec<bool>,
}

impl From<Params> for ParamsRepr {
    fn from(p: Params) -> Self {
        ParamsRepr {
            lambda_a: p.lambda_a,
            lambda_b: p.lambda_b,
        }
    }
}

impl TryFrom<ParamsRepr> for Params {
    type Error = PvbsError;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        Params::new(r.lambda_a, r.lambda_b)
    }
}

/// True iff the decimal literal denotes exactly one.
pub fn decimal_is_one(s: &str) -> bool {
    let s = s.trim();
    let s = s.strip_prefix('+').unwrap_or(s);
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => match s[i + 1..].parse::<i64>() {
            Ok(e) => (&s[..i], e),
            Err(_) => return false,
        },
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return false;
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = digits.trim_start_matches('0');
    let trimmed = digits.trim_end_matches('0');
    let scale = exponent - frac_part.len() as i64 + (digits.len() - trimmed.len()) as i64;
    trimmed == "1" && scale == 0
}

/// Parses a comma-separated list of decimals, keeping exact-one information.
pub fn parse_decimal_list(s: &str) -> Result<Vec<(f64, bool)>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let v: f64 = t
                .parse()
                .map_err(|_| PvbsError::InvalidArgument(format!("'{t}' is not a decimal number")))?;
            Ok((v, decimal_is_one(t)))
        })
        .collect()
}

impl Params {
    pub fn new(lambda_a: Vec<f64>, lambda_b: Vec<f64>) -> Result<Self> {
        let unit_a = lambda_a.iter().map(|&x| x == 1.0).collect();
        let unit_b = lambda_b.iter().map(|&x| x == 1.0).collect();
        Params::with_units(lambda_a, lambda_b, unit_a, unit_b)
    }

    fn with_units(lambda_a: Vec<f64>, lambda_b: Vec<f64>, unit_a: Vec<bool>, unit_b: Vec<bool>) -> Result<Self> {
        let d = lambda_a.len();
        if d == 0 || d > MAX_DIM {
            return Err(PvbsError::InvalidDimension(d));
        }
        if lambda_b.len() != d {
            return invalid(format!(
                "lambda_a has {d} entries but lambda_b has {}",
                lambda_b.len()
            ));
        }
        if let Some(x) = lambda_a.iter().chain(&lambda_b).find(|x| !(x.is_finite() && **x > 0.0)) {
            return invalid(format!("parameters must be finite and positive, got {x}"));
        }
        Ok(Params {
            lambda_a,
            lambda_b,
            unit_a,
            unit_b,
        })
    }

    /// From comma-separated decimal strings. A single value is broadcast to `dim`
    /// coordinates when `dim` is given.
    pub fn parse(a: &str, b: &str, dim: Option<usize>) -> Result<Self> {
        let expand = |s: &str| -> Result<Vec<(f64, bool)>> {
            let v = parse_decimal_list(s)?;
            match dim {
                Some(d) if v.len() == 1 && d > 1 => Ok(vec![v[0]; d]),
                Some(d) if v.len() != d => invalid(format!("expected {d} entries in '{s}'")),
                _ => Ok(v),
            }
        };
        let (a, b) = (expand(a)?, expand(b)?);
        Params::with_units(
            a.iter().map(|x| x.0).collect(),
            b.iter().map(|x| x.0).collect(),
            a.iter().map(|x| x.1).collect(),
            b.iter().map(|x| x.1).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lambda_a.len()
    }

    pub fn lambda(&self, s: Species) -> &[f64] {
        match s {
            Species::A => &self.lambda_a,
            Species::B => &self.lambda_b,
        }
    }

    pub fn is_unit(&self, s: Species, j: usize) -> bool {
        match s {
            Species::A => self.unit_a[j],
            Species::B => self.unit_b[j],
        }
    }

    /// Species labels exchanged.
    pub fn swapped(&self) -> Params {
        Params {
            lambda_a: self.lambda_b.clone(),
            lambda_b: self.lambda_a.clone(),
            unit_a: self.unit_b.clone(),
            unit_b: self.unit_a.clone(),
        }
    }

    /// Coordinates reordered: entry `k` of the result is entry `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Params {
        let pick = |v: &[f64]| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        let pick_b = |v: &[bool]| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        Params {
            lambda_a: pick(&self.lambda_a),
            lambda_b: pick(&self.lambda_b),
            unit_a: pick_b(&self.unit_a),
            unit_b: pick_b(&self.unit_b),
        }
    }
}

/// Componentwise natural logarithm; exactly zero on entries equal to one.
pub fn log_lambda(p: &Params, s: Species) -> Vec<f64> {
    p.lambda(s)
        .iter()
        .enumerate()
        .map(|(j, &x)| if p.is_unit(s, j) { 0.0 } else { x.ln() })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapClass {
    Gapped,
    Gapless,
    /// Only issued for half-spaces, where the gapped direction is not proven.
    ConjecturedGapped,
}

fn has_zero_log(p: &Params, s: Species) -> bool {
    (0..p.dim()).all(|j| p.is_unit(s, j))
}

/// Gap classification on Z^d: gapped iff neither log-parameter vector vanishes.
pub fn classify_zd(p: &Params) -> GapClass {
    if has_zero_log(p, Species::A) || has_zero_log(p, Species::B) {
        GapClass::Gapless
    } else {
        GapClass::Gapped
    }
}

fn is_negative_multiple(u: &[f64], m: &[f64]) -> bool {
    let dot: f64 = u.iter().zip(m).map(|(a, b)| a * b).sum();
    if dot >= 0.0 {
        return false;
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * nu * nm;
    (0..u.len()).all(|i| (0..u.len()).all(|k| (u[i] * m[k] - u[k] * m[i]).abs() <= tol))
}

fn check_normal(p: &Params, m: &[f64]) -> Result<()> {
    if m.len() != p.dim() {
        return invalid("normal vector has wrong dimension");
    }
    if m.iter().all(|&x| x == 0.0) || m.iter().any(|x| !x.is_finite()) {
        return invalid("half-space normal must be a nonzero finite vector");
    }
    Ok(())
}

/// Half-space `{x : m.x >= 0}` with inward normal `m`: gapless when some log vector
/// vanishes or points along the outward normal, otherwise conjectured gapped.
pub fn classify_halfspace(p: &Params, m: &[f64]) -> Result<GapClass> {
    check_normal(p, m)?;
    for s in Species::BOTH {
        if has_zero_log(p, s) || is_negative_multiple(&log_lambda(p, s), m) {
            return Ok(GapClass::Gapless);
        }
    }
    Ok(GapClass::ConjecturedGapped)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Zd,
    HalfSpace(Vec<f64>),
    Orthant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteGroundState {
    Vacuum,
    OmegaA,
    OmegaB,
    OmegaAb,
}

/// Infinite-volume ground states that survive the thermodynamic limit.
pub fn infinite_gs_census(region: &Region, p: &Params) -> Result<BTreeSet<InfiniteGroundState>> {
    let mut out = BTreeSet::from([InfiniteGroundState::Vacuum]);
    match region {
        Region::Zd => {}
        Region::HalfSpace(m) => check_normal(p, m)?,
        Region::Orthant => {
            let decays = |s| p.lambda(s).iter().all(|&x| x < 1.0);
            let (a, b) = (decays(Species::A), decays(Species::B));
            if a {
                out.insert(InfiniteGroundState::OmegaA);
            }
            if b {
                out.insert(InfiniteGroundState::OmegaB);
            }
            if a && b {
                out.insert(InfiniteGroundState::OmegaAb);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrthantNorm {
    Finite(f64),
    Divergent,
}

/// Limit of the single-particle normalization on the positive orthant.
pub fn c_orthant(p: &Params, s: Species) -> OrthantNorm {
    let lam = p.lambda(s);
    if lam.iter().all(|&x| x < 1.0) {
        OrthantNorm::Finite(lam.iter().map(|&x| 1.0 / (1.0 - x * x)).product())
    } else {
        OrthantNorm::Divergent
    }
}

/// A tilted-volume construction together with the effective parameters
/// `lambda~` under which its normalization constants factorize.
///
/// All per-coordinate vectors are in the working (permuted) frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltScheme {
    #[serde(flatten)]
    pub geometry: TiltGeometry,
    pub lambda_tilde_a: Vec<f64>,
    pub lambda_tilde_b: Vec<f64>,
    pub log_tilde_a: Vec<f64>,
    pub log_tilde_b: Vec<f64>,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Prefactor of the diagonal sum `D`.
    pub kappa_diag: f64,
    pub min_log: f64,
    pub eta: f64,
}

impl TiltScheme {
    /// Effective parameters for an explicit geometry. Fails if some `lambda~` is exactly one.
    pub fn with_geometry(p: &Params, geometry: TiltGeometry) -> Result<Self> {
        let d = p.dim();
        if geometry.dim() != d {
            return invalid("geometry dimension does not match parameters");
        }
        let pp = p.permuted(&geometry.permutation);
        let tilde = |s: Species| -> Vec<f64> {
            let l = log_lambda(&pp, s);
            let mut t = l.clone();
            match geometry.case {
                TiltCase::Rectangular => {
                    for k in 1..d {
                        t[k] = l[k] - geometry.tilt(k) as f64 * l[0];
                    }
                }
                TiltCase::Diamond => {
                    t[0] = l[0] + l[1];
                    t[1] = l[1] - l[0];
                    for k in 2..d {
                        t[k] = l[k] - geometry.tilt(k) as f64 * t[0];
                    }
                }
            }
            t
        };
        let (log_tilde_a, log_tilde_b) = (tilde(Species::A), tilde(Species::B));
        let min_log = log_tilde_a
            .iter()
            .chain(&log_tilde_b)
            .map(|x| x.abs())
            .fold(f64::INFINITY, f64::min);
        if min_log == 0.0 {
            return Err(PvbsError::TiltMargin(format!(
                "some effective parameter equals one (log~a={log_tilde_a:?}, log~b={log_tilde_b:?})"
            )));
        }
        let (kappa_a, kappa_b, kappa_diag) = match geometry.case {
            TiltCase::Rectangular => (1.0, 1.0, 1.0),
            TiltCase::Diamond => {
                let (a2, b2) = (pp.lambda_a[1], pp.lambda_b[1]);
                (1.0 + a2 * a2, 1.0 + b2 * b2, 1.0 + (a2 * b2).powi(2))
            }
        };
        Ok(TiltScheme {
            lambda_tilde_a: log_tilde_a.iter().map(|x| x.exp()).collect(),
            lambda_tilde_b: log_tilde_b.iter().map(|x| x.exp()).collect(),
            log_tilde_a,
            log_tilde_b,
            kappa_a,
            kappa_b,
            kappa_diag,
            min_log,
            eta: min_log,
            geometry,
        })
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn log_tilde(&self, s: Species) -> &[f64] {
        match s {
            Species::A => &self.log_tilde_a,
            Species::B => &self.log_tilde_b,
        }
    }

    pub fn kappa(&self, s: Species) -> f64 {
        match s {
            Species::A => self.kappa_a,
            Species::B => self.kappa_b,
        }
    }

    /// `min_s |log lambda~_{s,k}|` for working coordinate `k`.
    pub fn min_log_in(&self, k: usize) -> f64 {
        self.log_tilde_a[k].abs().min(self.log_tilde_b[k].abs())
    }
}

fn best_coordinate(candidates: impl Iterator<Item = usize>, score: impl Fn(usize) -> f64) -> Option<usize> {
    // strict comparison keeps the smallest index among ties
    candidates.fold(None, |best: Option<usize>, j| match best {
        Some(b) if score(b) >= score(j) => Some(b),
        _ => Some(j),
    })
}

/// Chooses the tilted-volume construction for gapped parameters.
///
/// Prefers the rectangular construction along a coordinate where both species
/// are nontrivial; otherwise uses the diamond construction. Each free tilt
/// `v(k)` is the smallest integer in `0..=V_MAX` whose effective parameters
/// clear the margin `eta` in absolute log.
pub fn select_tilt(p: &Params, eta: f64) -> Result<TiltScheme> {
    if classify_zd(p) == GapClass::Gapless {
        return Err(PvbsError::Gapless);
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return invalid("tilt margin must be positive");
    }
    let d = p.dim();
    let la = log_lambda(p, Species::A);
    let lb = log_lambda(p, Species::B);
    let nontrivial = |s: Species, j: usize| !p.is_unit(s, j);

    let shared = best_coordinate(
        (0..d).filter(|&j| nontrivial(Species::A, j) && nontrivial(Species::B, j)),
        |j| la[j].abs().min(lb[j].abs()),
    );
    let (case, lead): (TiltCase, Vec<usize>) = match shared {
        Some(j) => (TiltCase::Rectangular, vec![j]),
        None => {
            let pa = best_coordinate((0..d).filter(|&j| nontrivial(Species::A, j)), |j| la[j].abs());
            let pb = best_coordinate((0..d).filter(|&j| nontrivial(Species::B, j)), |j| lb[j].abs());
            match (pa, pb) {
                (Some(pa), Some(pb)) => (TiltCase::Diamond, vec![pa, pb]),
                _ => return Err(PvbsError::Gapless),
            }
        }
    };
    let mut permutation = lead.clone();
    permutation.extend((0..d).filter(|j| !lead.contains(j)));
    let fixed = lead.len();
    let mut v = vec![0u32; d - fixed];

    let margin_at = |v: &[u32], k: usize| -> Result<f64> {
        let g = TiltGeometry::new(case, permutation.clone(), v.to_vec())?;
        let pp = p.permuted(&g.permutation);
        let l = |s| log_lambda(&pp, s);
        let (a, b) = (l(Species::A), l(Species::B));
        let lead_log = |x: &[f64]| match case {
            TiltCase::Rectangular => x[0],
            TiltCase::Diamond => x[0] + x[1],
        };
        let t = |x: &[f64]| {
            if k < fixed {
                match (case, k) {
                    (TiltCase::Diamond, 1) => x[1] - x[0],
                    _ => lead_log(x),
                }
            } else {
                x[k] - g.tilt(k) as f64 * lead_log(x)
            }
        };
        Ok(t(&a).abs().min(t(&b).abs()))
    };

    for k in 0..fixed {
        let m = margin_at(&v, k)?;
        if m < eta {
            return Err(PvbsError::TiltMargin(format!(
                "coordinate {} has |log lambda~| = {m:.3e} < eta = {eta}",
                permutation[k] + 1
            )));
        }
    }
    for k in fixed..d {
        let mut found = false;
        for t in 0..=defaults::V_MAX {
            v[k - fixed] = t;
            if margin_at(&v, k)? >= eta {
                found = true;
                break;
            }
        }
        if !found {
            return Err(PvbsError::TiltMargin(format!(
                "no tilt v <= {} clears eta = {eta} on coordinate {}",
                defaults::V_MAX,
                permutation[k] + 1
            )));
        }
    }
    let geometry = TiltGeometry::new(case, permutation, v)?;
    let mut t = TiltScheme::with_geometry(p, geometry)?;
    t.eta = eta;
    Ok(t)
}

/// `c~ = (1 - prod_k max_s(1 + e^{-2|log lambda~_{s,k}|})^{-1})^{-1}`, evaluated
/// as `-1/expm1(-sum log1p(...))` to keep precision when the product is near one.
pub fn c_tilde(t: &TiltScheme) -> f64 {
    let s: f64 = (0..t.dim())
        .map(|k| {
            let eps = Species::BOTH
                .iter()
                .map(|&s| (-2.0 * t.log_tilde(s)[k].abs()).exp())
                .fold(0.0, f64::max);
            eps.ln_1p()
        })
        .sum();
    -1.0 / (-s).exp_m1()
}

fn projection_bound(c_tilde: f64, ell: usize, min_log: f64) -> f64 {
    let ell = ell as f64;
    ((60.0 * ell).sqrt().ln() + 1.5 * c_tilde.ln() - (ell - 2.0) * min_log).exp()
}

/// `eps_ell = sqrt(60 ell) c~^{3/2} exp(-(ell - 2) min_log)`.
pub fn epsilon_ell(t: &TiltScheme, ell: usize) -> f64 {
    projection_bound(c_tilde(t), ell, t.min_log)
}

pub(crate) fn lemma_bound_raw(t: &TiltScheme, ell: usize, min_log: f64) -> f64 {
    projection_bound(c_tilde(t), ell, min_log)
}

/// The three admissibility conditions on `ell` for a scheme.
pub fn ell_conditions(t: &TiltScheme, ell: usize) -> [bool; 3] {
    let eps = epsilon_ell(t, ell);
    [
        ell >= 3 && ell as u32 >= t.geometry.max_tilt() + 1,
        (ell as f64 - 2.0) > 1.0 / t.min_log,
        eps < 1.0 / (ell as f64).sqrt(),
    ]
}

/// Smallest admissible `ell >= 3` and its `eps_ell`.
pub fn choose_ell(t: &TiltScheme, cap: usize) -> Result<(usize, f64)> {
    for ell in 3..=cap {
        if ell_conditions(t, ell).iter().all(|&c| c) {
            return Ok((ell, epsilon_ell(t, ell)));
        }
    }
    Err(PvbsError::EllCap(cap))
}

//! Finite subvolumes of Z^d: axis-aligned boxes, tilted parallelepipeds and
//! the slabs cut out of them along a sweep direction.
//!
//! Every tilted volume is described by a [`TiltGeometry`], which maps a site
//! to integer "box coordinates". A volume with extents `L` is then the set of
//! sites whose box coordinates lie in `[0, L_1) x ... x [0, L_d)`. For the
//! diamond-shaped construction the map also returns a parity bit, so each box
//! point carries two lattice sites.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PvbsError, Result};

pub const MAX_DIM: usize = 4;

/// A point of Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// The site `self + delta * e_direction`.
    pub fn shifted(&self, direction: usize, delta: i64) -> Site {
        let mut c = self.0.clone();
        c[direction] += delta;
        Site(c)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The nearest-neighbour pair `(base, base + e_direction)`; `direction` is 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub base: Site,
    pub direction: usize,
}

impl Edge {
    pub fn head(&self) -> Site {
        self.base.shifted(self.direction, 1)
    }
}

#[derive(Deserialize)]
struct VolumeRepr {
    dim: usize,
    sites: Vec<Vec<i64>>,
    #[serde(default)]
    label: String,
}

/// A finite set of lattice sites in canonical (lexicographic) order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VolumeRepr")]
pub struct Volume {
    dim: usize,
    sites: Vec<Site>,
    label: String,
}

impl TryFrom<VolumeRepr> for Volume {
    type Error = PvbsError;

    fn try_from(r: VolumeRepr) -> Result<Self> {
        Volume::new(r.dim, r.sites.into_iter().map(Site).collect(), r.label)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(PvbsError::InvalidDimension(dim));
    }
    Ok(())
}

impl Volume {
    pub fn new(dim: usize, mut sites: Vec<Site>, label: impl Into<String>) -> Result<Self> {
        check_dim(dim)?;
        if let Some(bad) = sites.iter().find(|s| s.dim() != dim) {
            return invalid(format!("site {bad} does not have {dim} coordinates"));
        }
        sites.sort();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate site {}", w[0]));
        }
        Ok(Volume {
            dim,
            sites,
            label: label.into(),
        })
    }

    pub fn empty(dim: usize, label: impl Into<String>) -> Result<Self> {
        Volume::new(dim, Vec::new(), label)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Index of `site` in canonical order.
    pub fn position(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.position(site).is_some()
    }

    pub fn is_subset_of(&self, other: &Volume) -> bool {
        self.dim == other.dim && self.sites.iter().all(|s| other.contains(s))
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for s in &self.sites {
            for j in 0..self.dim {
                if self.contains(&s.shifted(j, 1)) {
                    out.push(Edge {
                        base: s.clone(),
                        direction: j,
                    });
                }
            }
        }
        out
    }

    /// Edges as `(tail index, head index, direction)` in canonical site order.
    pub fn edge_indices(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (i, s) in self.sites.iter().enumerate() {
            for j in 0..self.dim {
                if let Some(k) = self.position(&s.shifted(j, 1)) {
                    out.push((i, k, j));
                }
            }
        }
        out
    }

    /// Breadth-first connectivity of the edge graph. The empty volume counts as connected.
    pub fn is_connected(&self) -> bool {
        if self.sites.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.sites.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for j in 0..self.dim {
                for delta in [-1, 1] {
                    if let Some(k) = self.position(&self.sites[i].shifted(j, delta)) {
                        if !seen[k] {
                            seen[k] = true;
                            count += 1;
                            queue.push_back(k);
                        }
                    }
                }
            }
        }
        count == self.sites.len()
    }

    pub fn translated(&self, shift: &[i64]) -> Result<Volume> {
        if shift.len() != self.dim {
            return invalid("translation vector has wrong dimension");
        }
        let sites = self
            .sites
            .iter()
            .map(|s| Site(s.0.iter().zip(shift).map(|(a, b)| a + b).collect()))
            .collect();
        Volume::new(self.dim, sites, self.label.clone())
    }

    pub fn difference(&self, other: &Volume) -> Volume {
        Volume {
            dim: self.dim,
            sites: self
                .sites
                .iter()
                .filter(|s| !other.contains(s))
                .cloned()
                .collect(),
            label: format!("{} \\ {}", self.label, other.label),
        }
    }

    pub fn union(&self, other: &Volume) -> Result<Volume> {
        if self.dim != other.dim {
            return invalid("union of volumes with different dimensions");
        }
        let set: BTreeSet<Site> = self.sites.iter().chain(&other.sites).cloned().collect();
        Volume::new(self.dim, set.into_iter().collect(), format!("{} u {}", self.label, other.label))
    }
}

/// Sites of `inner` with at least one neighbour in `ambient \ inner`.
pub fn boundary_sites(inner: &Volume, ambient: &Volume) -> Result<Vec<Site>> {
    if !inner.is_subset_of(ambient) {
        return Err(PvbsError::NotSubset);
    }
    Ok(inner
        .sites()
        .iter()
        .filter(|s| {
            (0..inner.dim()).any(|j| {
                [-1, 1].iter().any(|&d| {
                    let n = s.shifted(j, d);
                    ambient.contains(&n) && !inner.contains(&n)
                })
            })
        })
        .cloned()
        .collect())
}

/// Which of the two tilted constructions a geometry uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TiltCase {
    /// Rectangular cross-sections; normal `v = (1, v(2), ..., v(d))`.
    Rectangular,
    /// Diamond cross-sections in the first two (permuted) coordinates.
    Diamond,
}

impl From<TiltCase> for u8 {
    fn from(c: TiltCase) -> u8 {
        match c {
            TiltCase::Rectangular => 1,
            TiltCase::Diamond => 2,
        }
    }
}

impl TryFrom<u8> for TiltCase {
    type Error = PvbsError;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(TiltCase::Rectangular),
            2 => Ok(TiltCase::Diamond),
            _ => invalid(format!("tilt case must be 1 or 2, got {v}")),
        }
    }
}

/// Hyperplane geometry of a tilted parallelepiped.
///
/// `permutation[k]` is the original coordinate placed at position `k` of the
/// working frame. `v` holds the free tilt integers: `v(2..=d)` for the
/// rectangular case, `v(3..=d)` for the diamond case.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiltGeometry {
    pub case: TiltCase,
    pub permutation: Vec<usize>,
    pub v: Vec<u32>,
}

impl TiltGeometry {
    pub fn new(case: TiltCase, permutation: Vec<usize>, v: Vec<u32>) -> Result<Self> {
        let d = permutation.len();
        check_dim(d)?;
        let mut sorted = permutation.clone();
        sorted.sort_unstable();
        if sorted != (0..d).collect::<Vec<_>>() {
            return invalid(format!("{permutation:?} is not a permutation of 0..{d}"));
        }
        let free = match case {
            TiltCase::Rectangular => d - 1,
            TiltCase::Diamond => {
                if d < 2 {
                    return invalid("diamond tilt needs d >= 2");
                }
                d - 2
            }
        };
        if v.len() != free {
            return invalid(format!("expected {free} tilt integers, got {}", v.len()));
        }
        Ok(TiltGeometry {
            case,
            permutation,
            v,
        })
    }

    /// Zero tilt, identity permutation: the axis-aligned box.
    pub fn axis_aligned(d: usize) -> Result<Self> {
        TiltGeometry::new(TiltCase::Rectangular, (0..d).collect(), vec![0; d.saturating_sub(1)])
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    /// Tilt integer attached to working coordinate `k` (zero where none applies).
    pub fn tilt(&self, k: usize) -> u32 {
        match self.case {
            TiltCase::Rectangular if k >= 1 => self.v[k - 1],
            TiltCase::Diamond if k >= 2 => self.v[k - 2],
            _ => 0,
        }
    }

    pub fn max_tilt(&self) -> u32 {
        self.v.iter().copied().max().unwrap_or(0)
    }

    /// Number of lattice sites per box point.
    pub fn multiplicity(&self) -> usize {
        match self.case {
            TiltCase::Rectangular => 1,
            TiltCase::Diamond => 2,
        }
    }

    /// Box coordinates and parity of a site (original frame). Uses only integer
    /// arithmetic; the diamond inequalities are doubled before flooring.
    pub fn box_coords(&self, x: &[i64]) -> (Vec<i64>, u8) {
        let d = self.dim();
        let y: Vec<i64> = self.permutation.iter().map(|&p| x[p]).collect();
        let mut u = y.clone();
        match self.case {
            TiltCase::Rectangular => {
                u[0] = y[0] + (1..d).map(|k| self.tilt(k) as i64 * y[k]).sum::<i64>();
                (u, 0)
            }
            TiltCase::Diamond => {
                let s = y[0] + y[1] + 2 * (2..d).map(|k| self.tilt(k) as i64 * y[k]).sum::<i64>();
                let t = y[1] - y[0];
                u[0] = s.div_euclid(2);
                u[1] = t.div_euclid(2);
                (u, s.rem_euclid(2) as u8)
            }
        }
    }

    /// Inverse of [`TiltGeometry::box_coords`].
    pub fn site_from_box(&self, u: &[i64], parity: u8) -> Site {
        let d = self.dim();
        let mut y = u.to_vec();
        match self.case {
            TiltCase::Rectangular => {
                y[0] = u[0] - (1..d).map(|k| self.tilt(k) as i64 * u[k]).sum::<i64>();
            }
            TiltCase::Diamond => {
                let shift: i64 = (2..d).map(|k| self.tilt(k) as i64 * u[k]).sum();
                let s = 2 * u[0] + parity as i64 - 2 * shift;
                let t = 2 * u[1] + parity as i64;
                y[0] = (s - t) / 2;
                y[1] = (s + t) / 2;
            }
        }
        let mut x = vec![0; d];
        for (k, &p) in self.permutation.iter().enumerate() {
            x[p] = y[k];
        }
        Site(x)
    }

    /// All sites whose box coordinates lie in the half-open `ranges`.
    pub fn region(&self, ranges: &[(i64, i64)], label: impl Into<String>) -> Result<Volume> {
        let d = self.dim();
        if ranges.len() != d {
            return invalid("range count does not match dimension");
        }
        let mut sites = Vec::new();
        if ranges.iter().all(|&(lo, hi)| lo < hi) {
            let mut u: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                for parity in 0..self.multiplicity() as u8 {
                    sites.push(self.site_from_box(&u, parity));
                }
                for k in 0..d {
                    u[k] += 1;
                    if u[k] < ranges[k].1 {
                        continue 'outer;
                    }
                    u[k] = ranges[k].0;
                }
                break;
            }
        }
        Volume::new(d, sites, label)
    }

    /// Spec-string form, e.g. `case1:v=1,2:L=4,4`.
    pub fn describe(&self, extents: &[usize]) -> String {
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(",");
        let mut s = match self.case {
            TiltCase::Rectangular => format!(
                "case1:v={}",
                join(&mut std::iter::once("1".to_string()).chain(self.v.iter().map(|x| x.to_string())))
            ),
            TiltCase::Diamond if self.v.is_empty() => "case2".to_string(),
            TiltCase::Diamond => format!("case2:v={}", join(&mut self.v.iter().map(|x| x.to_string()))),
        };
        s.push_str(&format!(":L={}", join(&mut extents.iter().map(|x| x.to_string()))));
        if self.permutation.iter().enumerate().any(|(i, &p)| i != p) {
            s.push_str(&format!(":perm={}", join(&mut self.permutation.iter().map(|x| x.to_string()))));
        }
        s
    }
}

/// Axis-aligned box `{x : 0 <= x_j < dims_j}`.
pub fn build_box(dims: &[usize]) -> Result<Volume> {
    check_dim(dims.len())?;
    if dims.iter().any(|&n| n == 0) {
        return invalid("box extents must be positive");
    }
    let label = format!(
        "box:{}",
        dims.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
    );
    let ranges: Vec<(i64, i64)> = dims.iter().map(|&n| (0, n as i64)).collect();
    TiltGeometry::axis_aligned(dims.len())?.region(&ranges, label)
}

fn full_ranges(extents: &[usize]) -> Vec<(i64, i64)> {
    extents.iter().map(|&n| (0, n as i64)).collect()
}

fn check_extents(geometry: &TiltGeometry, extents: &[usize]) -> Result<()> {
    if extents.len() != geometry.dim() {
        return invalid(format!(
            "expected {} extents, got {}",
            geometry.dim(),
            extents.len()
        ));
    }
    if extents.iter().any(|&n| n == 0) {
        return invalid("extents must be positive");
    }
    Ok(())
}

/// `{x : 0 <= v.x <= L_1 - 1, 0 <= x_j <= L_j - 1 (j >= 2)}` in the working frame.
pub fn build_tilted_case1(geometry: &TiltGeometry, extents: &[usize]) -> Result<Volume> {
    if geometry.case != TiltCase::Rectangular {
        return invalid("build_tilted_case1 called with a diamond geometry");
    }
    check_extents(geometry, extents)?;
    geometry.region(&full_ranges(extents), geometry.describe(extents))
}

/// Diamond-section parallelepiped with `2 * prod(L)` sites.
pub fn build_tilted_case2(geometry: &TiltGeometry, extents: &[usize]) -> Result<Volume> {
    if geometry.case != TiltCase::Diamond {
        return invalid("build_tilted_case2 called with a rectangular geometry");
    }
    check_extents(geometry, extents)?;
    geometry.region(&full_ranges(extents), geometry.describe(extents))
}

pub fn build_tilted(geometry: &TiltGeometry, extents: &[usize]) -> Result<Volume> {
    match geometry.case {
        TiltCase::Rectangular => build_tilted_case1(geometry, extents),
        TiltCase::Diamond => build_tilted_case2(geometry, extents),
    }
}

/// A family `Lambda_n` of tilted volumes grown along one box coordinate, together
/// with a slab window `[lower, upper)` along that coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeFamilySpec {
    pub geometry: TiltGeometry,
    /// Box extents; the entry at `sweep` is the largest admissible `n`.
    pub extents: Vec<usize>,
    /// 0-based sweep coordinate in the working frame.
    pub sweep: usize,
    pub lower: usize,
    pub upper: usize,
}

impl VolumeFamilySpec {
    pub fn new(
        geometry: TiltGeometry,
        extents: Vec<usize>,
        sweep: usize,
        lower: usize,
        upper: usize,
    ) -> Result<Self> {
        if extents.len() != geometry.dim() {
            return invalid("extent count does not match geometry dimension");
        }
        if sweep >= extents.len() {
            return invalid(format!("sweep direction {sweep} out of range"));
        }
        if lower > upper {
            return invalid(format!("slab lower cut {lower} exceeds upper cut {upper}"));
        }
        if upper > extents[sweep] {
            return invalid(format!(
                "slab upper cut {upper} exceeds family extent {}",
                extents[sweep]
            ));
        }
        if extents
            .iter()
            .enumerate()
            .any(|(k, &n)| k != sweep && n == 0)
        {
            return invalid("transverse extents must be positive");
        }
        Ok(VolumeFamilySpec {
            geometry,
            extents,
            sweep,
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    /// Same family, different slab window.
    pub fn window(&self, lower: usize, upper: usize) -> Result<Self> {
        VolumeFamilySpec::new(self.geometry.clone(), self.extents.clone(), self.sweep, lower, upper)
    }

    pub fn member_extents(&self, n: usize) -> Vec<usize> {
        let mut e = self.extents.clone();
        e[self.sweep] = n;
        e
    }

    /// Box-coordinate ranges of the slab `[lower, upper)`.
    pub fn ranges(&self, lower: usize, upper: usize) -> Vec<(i64, i64)> {
        let mut r = full_ranges(&self.extents);
        r[self.sweep] = (lower as i64, upper as i64);
        r
    }

    /// Family member `Lambda_n` (empty for `n = 0`).
    pub fn member(&self, n: usize) -> Result<Volume> {
        self.geometry
            .region(&self.ranges(0, n), self.geometry.describe(&self.member_extents(n)))
    }

    /// `Lambda_upper \ Lambda_lower`.
    pub fn slab(&self) -> Result<Volume> {
        let label = format!(
            "{}[{}..{})@{}",
            self.geometry.describe(&self.extents),
            self.lower,
            self.upper,
            self.sweep + 1
        );
        self.geometry.region(&self.ranges(self.lower, self.upper), label)
    }
}

/// `Lambda_n \ Lambda_m` for the family; empty when `m == n`.
pub fn slab(spec: &VolumeFamilySpec) -> Result<Volume> {
    spec.slab()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split([',', 'x'])
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| PvbsError::InvalidArgument(format!("bad {what} entry '{t}'")))
        })
        .collect()
}

/// Parses a geometry/extent description such as `box:2x3`, `case1:v=1,1:L=4,4`
/// or `case2:L=3,3` (optional `:v=...` and `:perm=...` parts).
pub fn parse_geometry_spec(spec: &str) -> Result<(TiltGeometry, Vec<usize>)> {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or_default();
    if kind == "box" {
        let dims: Vec<usize> = parse_list(parts.next().unwrap_or_default(), "box extent")?;
        if parts.next().is_some() {
            return invalid(format!("unexpected trailing fields in '{spec}'"));
        }
        let g = TiltGeometry::axis_aligned(dims.len())?;
        return Ok((g, dims));
    }
    let case = match kind {
        "case1" => TiltCase::Rectangular,
        "case2" => TiltCase::Diamond,
        _ => return invalid(format!("unknown volume kind '{kind}' in '{spec}'")),
    };
    let (mut v, mut extents, mut perm) = (None, None, None);
    for p in parts {
        let (key, val) = p
            .split_once('=')
            .ok_or_else(|| PvbsError::InvalidArgument(format!("expected key=value, got '{p}'")))?;
        match key {
            "v" => v = Some(parse_list::<u32>(val, "tilt")?),
            "L" => extents = Some(parse_list::<usize>(val, "extent")?),
            "perm" => perm = Some(parse_list::<usize>(val, "permutation")?),
            _ => return invalid(format!("unknown key '{key}' in '{spec}'")),
        }
    }
    let extents = extents.ok_or_else(|| PvbsError::InvalidArgument(format!("missing L= in '{spec}'")))?;
    let d = extents.len();
    let v = match (case, v) {
        (TiltCase::Rectangular, Some(v)) => {
            if v.len() != d || v[0] != 1 {
                return invalid("case1 v must have d entries with v(1) = 1");
            }
            v[1..].to_vec()
        }
        (TiltCase::Rectangular, None) => vec![0; d.saturating_sub(1)],
        (TiltCase::Diamond, Some(v)) => v,
        (TiltCase::Diamond, None) => vec![0; d.saturating_sub(2)],
    };
    let perm = perm.unwrap_or_else(|| (0..d).collect());
    Ok((TiltGeometry::new(case, perm, v)?, extents))
}

/// Builds the volume named by a spec string.
pub fn parse_volume_spec(spec: &str) -> Result<Volume> {
    let (g, extents) = parse_geometry_spec(spec)?;
    Ok(build_tilted(&g, &extents)?.with_label(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vol(dim: usize, pts: &[&[i64]]) -> Volume {
        Volume::new(dim, pts.iter().map(|p| Site::new(p.to_vec())).collect(), "t").unwrap()
    }

    /// Brute-force membership straight from the hyperplane inequalities.
    fn brute_case1(v: &[i64], l: &[i64], r: i64) -> BTreeSet<Vec<i64>> {
        let d = v.len();
        let mut out = BTreeSet::new();
        let mut x = vec![-r; d];
        loop {
            let vx: i64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
            if (0..l[0]).contains(&vx) && (1..d).all(|j| (0..l[j]).contains(&x[j])) {
                out.insert(x.clone());
            }
            let mut k = 0;
            loop {
                if k == d {
                    return out;
                }
                x[k] += 1;
                if x[k] <= r {
                    break;
                }
                x[k] = -r;
                k += 1;
            }
        }
    }

    fn brute_case2(v3: &[i64], l: &[i64], r: i64) -> BTreeSet<Vec<i64>> {
        let d = l.len();
        let mut out = BTreeSet::new();
        let mut x = vec![-r; d];
        loop {
            let two_vx = x[0] + x[1] + 2 * (2..d).map(|j| v3[j - 2] * x[j]).sum::<i64>();
            let two_wx = -x[0] + x[1];
            if (0..2 * l[0]).contains(&two_vx)
                && (0..2 * l[1]).contains(&two_wx)
                && (2..d).all(|j| (0..l[j]).contains(&x[j]))
            {
                out.insert(x.clone());
            }
            let mut k = 0;
            loop {
                if k == d {
                    return out;
                }
                x[k] += 1;
                if x[k] <= r {
                    break;
                }
                x[k] = -r;
                k += 1;
            }
        }
    }

    fn as_set(v: &Volume) -> BTreeSet<Vec<i64>> {
        v.sites().iter().map(|s| s.0.clone()).collect()
    }

    #[test]
    fn box_examples() {
        let c = build_box(&[3]).unwrap();
        assert_eq!(as_set(&c), [[0], [1], [2]].iter().map(|x| x.to_vec()).collect());
        assert_eq!(c.edges().len(), 2);
        assert_eq!(build_box(&[2, 2]).unwrap().edges().len(), 4);
        let b = build_box(&[2, 3]).unwrap();
        assert_eq!(b.len(), 6);
        let e = b.edges();
        assert_eq!(e.len(), 7);
        assert_eq!(e.iter().filter(|e| e.direction == 0).count(), 3);
        assert_eq!(e.iter().filter(|e| e.direction == 1).count(), 4);
        assert!(build_box(&[]).is_err());
        assert!(build_box(&[1, 1, 1, 1, 1]).is_err());
        assert!(build_box(&[2, 0]).is_err());
    }

    #[test]
    fn case1_examples() {
        let g = TiltGeometry::new(TiltCase::Rectangular, vec![0, 1], vec![0]).unwrap();
        assert_eq!(build_tilted_case1(&g, &[2, 2]).unwrap(), build_box(&[2, 2]).unwrap().with_label(g.describe(&[2, 2])));
        let g = TiltGeometry::new(TiltCase::Rectangular, vec![0, 1], vec![1]).unwrap();
        let v = build_tilted_case1(&g, &[2, 2]).unwrap();
        let expected: BTreeSet<Vec<i64>> = [vec![0, 0], vec![1, 0], vec![-1, 1], vec![0, 1]].into();
        assert_eq!(as_set(&v), expected);
        assert_eq!(as_set(&v), brute_case1(&[1, 1], &[2, 2], 4));
        let g1 = TiltGeometry::axis_aligned(1).unwrap();
        assert_eq!(as_set(&build_tilted_case1(&g1, &[5]).unwrap()), (0..5).map(|i| vec![i]).collect());
        let g2 = TiltGeometry::new(TiltCase::Diamond, vec![0, 1], vec![]).unwrap();
        assert!(build_tilted_case1(&g2, &[2, 2]).is_err());
    }

    #[test]
    fn case2_examples() {
        let g = TiltGeometry::new(TiltCase::Diamond, vec![0, 1], vec![]).unwrap();
        let v = build_tilted_case2(&g, &[1, 1]).unwrap();
        assert_eq!(as_set(&v), [vec![0, 0], vec![0, 1]].into());
        assert_eq!(build_tilted_case2(&g, &[2, 1]).unwrap().len(), 4);
        assert!(build_tilted_case2(&g, &[0, 1]).is_err());
        assert!(TiltGeometry::new(TiltCase::Diamond, vec![0], vec![]).is_err());
    }

    #[test]
    fn case2_site_count_matches_enumeration() {
        for l1 in 1..5 {
            for l2 in 1..5 {
                let g = TiltGeometry::new(TiltCase::Diamond, vec![0, 1], vec![]).unwrap();
                let v = build_tilted_case2(&g, &[l1, l2]).unwrap();
                assert_eq!(v.len(), 2 * l1 * l2);
                assert_eq!(as_set(&v), brute_case2(&[], &[l1 as i64, l2 as i64], 12));
            }
        }
        for v3 in 0..3u32 {
            let g = TiltGeometry::new(TiltCase::Diamond, vec![0, 1, 2], vec![v3]).unwrap();
            let v = build_tilted_case2(&g, &[2, 3, 2]).unwrap();
            assert_eq!(v.len(), 24);
            assert_eq!(as_set(&v), brute_case2(&[v3 as i64], &[2, 3, 2], 10));
        }
    }

    #[test]
    fn slab_examples() {
        let g = TiltGeometry::axis_aligned(1).unwrap();
        let fam = VolumeFamilySpec::new(g.clone(), vec![6], 0, 3, 6).unwrap();
        assert_eq!(as_set(&slab(&fam).unwrap()), (3..6).map(|i| vec![i]).collect());
        assert!(fam.window(4, 4).unwrap().slab().unwrap().is_empty());
        assert!(VolumeFamilySpec::new(g, vec![6], 0, 4, 3).is_err());

        let g = TiltGeometry::new(TiltCase::Rectangular, vec![0, 1], vec![1]).unwrap();
        let fam = VolumeFamilySpec::new(g, vec![2, 2], 1, 1, 2).unwrap();
        assert_eq!(as_set(&fam.slab().unwrap()), [vec![-1, 1], vec![0, 1]].into());
    }

    #[test]
    fn connectivity_and_boundary() {
        assert!(build_box(&[3, 2]).unwrap().is_connected());
        assert!(!vol(2, &[&[0, 0], &[2, 0]]).is_connected());
        assert!(Volume::empty(2, "e").unwrap().is_connected());
        assert!(build_tilted_case2(&TiltGeometry::new(TiltCase::Diamond, vec![0, 1], vec![]).unwrap(), &[3, 3])
            .unwrap()
            .is_connected());

        let inner = build_box(&[5]).unwrap();
        let ambient = build_box(&[7]).unwrap().translated(&[-1]).unwrap();
        let b = boundary_sites(&inner, &ambient).unwrap();
        assert_eq!(b, vec![Site::new(vec![0]), Site::new(vec![4])]);
        let inner = build_box(&[2, 2]).unwrap();
        assert_eq!(boundary_sites(&inner, &build_box(&[4, 4]).unwrap()).unwrap().len(), 3);
        assert!(boundary_sites(&inner, &inner).unwrap().is_empty());
        assert_eq!(
            boundary_sites(&build_box(&[4, 4]).unwrap(), &inner),
            Err(PvbsError::NotSubset)
        );
    }

    #[test]
    fn tilted_slabs_are_connected_when_wide_enough() {
        for v2 in 0..4u32 {
            let g = TiltGeometry::new(TiltCase::Rectangular, vec![0, 1], vec![v2]).unwrap();
            let ell = v2 as usize + 1;
            for sweep in 0..2 {
                let fam = VolumeFamilySpec::new(g.clone(), vec![ell + 3, ell + 3], sweep, 2, 2 + ell).unwrap();
                assert!(fam.slab().unwrap().is_connected(), "v2={v2} sweep={sweep}");
            }
        }
    }

    #[test]
    fn spec_strings() {
        assert_eq!(parse_volume_spec("box:3").unwrap().len(), 3);
        assert_eq!(parse_volume_spec("box:2x3").unwrap().len(), 6);
        let v = parse_volume_spec("case1:v=1,1:L=4,4").unwrap();
        assert_eq!(v.len(), 16);
        assert_eq!(v.label(), "case1:v=1,1:L=4,4");
        assert_eq!(parse_volume_spec("case2:L=3,3").unwrap().len(), 18);
        assert!(parse_volume_spec("case1:v=2,1:L=4,4").is_err());
        assert!(parse_volume_spec("blob:3").is_err());
        let (g, l) = parse_geometry_spec("case1:v=1,2:L=3,2:perm=1,0").unwrap();
        assert_eq!(parse_geometry_spec(&g.describe(&l)).unwrap(), (g, l));
    }

    #[test]
    fn volume_json_roundtrip_and_validation() {
        let v = build_box(&[2, 2]).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"dim":2,"sites":[[0,0],[0,1],[1,0],[1,1]],"label":"box:2x2"}"#);
        assert_eq!(serde_json::from_str::<Volume>(&s).unwrap(), v);
        assert!(serde_json::from_str::<Volume>(r#"{"dim":1,"sites":[[0],[0]]}"#).is_err());
        assert!(serde_json::from_str::<Volume>(r#"{"dim":5,"sites":[]}"#).is_err());
    }

    fn geometry_strategy() -> impl Strategy<Value = (TiltGeometry, Vec<usize>)> {
        (1usize..=3, any::<bool>(), proptest::collection::vec(0u32..3, 3), proptest::collection::vec(1usize..4, 3), any::<bool>())
            .prop_filter_map("diamond needs d>=2", |(d, diamond, v, l, flip)| {
                let case = if diamond { TiltCase::Diamond } else { TiltCase::Rectangular };
                if diamond && d < 2 {
                    return None;
                }
                let free = if diamond { d - 2 } else { d - 1 };
                let mut perm: Vec<usize> = (0..d).collect();
                if flip && d >= 2 {
                    perm.swap(0, d - 1);
                }
                Some((TiltGeometry::new(case, perm, v[..free].to_vec()).unwrap(), l[..d].to_vec()))
            })
    }

    proptest! {
        #[test]
        fn tilted_site_count_is_product((g, l) in geometry_strategy()) {
            let v = build_tilted(&g, &l).unwrap();
            prop_assert_eq!(v.len(), g.multiplicity() * l.iter().product::<usize>());
            for s in v.sites() {
                let (u, p) = g.box_coords(s.coords());
                prop_assert_eq!(&g.site_from_box(&u, p), s);
                prop_assert!(u.iter().zip(&l).all(|(&x, &n)| x >= 0 && (x as usize) < n));
            }
        }

        #[test]
        fn slab_union_is_disjoint((g, l) in geometry_strategy(), sweep in 0usize..3, n in 0usize..5, m in 0usize..5) {
            let sweep = sweep % g.dim();
            let (m, n) = (m.min(n), m.max(n));
            let mut ext = l.clone();
            ext[sweep] = n;
            let full = VolumeFamilySpec::new(g.clone(), ext, sweep, 0, n).unwrap();
            let upper = full.window(m, n).unwrap().slab().unwrap();
            let lower = full.window(0, m).unwrap().slab().unwrap();
            let whole = full.slab().unwrap();
            prop_assert_eq!(upper.len() + lower.len(), whole.len());
            prop_assert_eq!(as_set(&upper.union(&lower).unwrap()), as_set(&whole));
            prop_assert_eq!(as_set(&whole), as_set(&full.member(n).unwrap()));
        }

        #[test]
        fn box_edge_count(dims in proptest::collection::vec(1usize..5, 1..=3)) {
            let v = build_box(&dims).unwrap();
            let expected: usize = (0..dims.len())
                .map(|j| (dims[j] - 1) * dims.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, n)| n).product::<usize>())
                .sum();
            prop_assert_eq!(v.edges().len(), expected);
        }

        #[test]
        fn translation_invariance((g, l) in geometry_strategy(), shift in proptest::collection::vec(-5i64..5, 3)) {
            let v = build_tilted(&g, &l).unwrap();
            let t = v.translated(&shift[..g.dim()]).unwrap();
            prop_assert_eq!(t.len(), v.len());
            prop_assert_eq!(t.edges().len(), v.edges().len());
            prop_assert_eq!(t.is_connected(), v.is_connected());
        }

        #[test]
        fn edges_ignore_input_order(mut pts in proptest::collection::btree_set((0i64..4, 0i64..4), 1..10), seed in any::<u64>()) {
            let mut sites: Vec<Site> = std::mem::take(&mut pts).into_iter().map(|(a, b)| Site::new(vec![a, b])).collect();
            let a = Volume::new(2, sites.clone(), "a").unwrap();
            let k = (seed as usize) % sites.len();
            sites.rotate_left(k);
            sites.reverse();
            let b = Volume::new(2, sites, "b").unwrap();
            prop_assert_eq!(a.edges(), b.edges());
        }
    }
}

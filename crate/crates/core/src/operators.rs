//! Sector Hamiltonians as sparse symmetric matrices, and matrix-free actions of
//! ground-state projectors on the full Fock space of a volume.

use std::io::Write;

use nalgebra::{DMatrix, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::GroundAmplitudes;
use crate::defaults;
use crate::error::{invalid, PvbsError, Result};
use crate::fock::{check_encodable, pow3, Configuration, SectorBasis};
use crate::lattice::{Volume, VolumeFamilySpec};
use crate::model::{Params, Species};

pub type EdgeBlock = SMatrix<f64, 9, 9>;

/// Orthogonal projection of rank 5 on one edge `(x, x + e_j)`, in the local
/// basis `3 s_x + s_y` with symbol codes empty = 0, a = 1, b = 2.
pub fn edge_projection_block(lambda_a: f64, lambda_b: f64) -> Result<EdgeBlock> {
    if !(lambda_a > 0.0 && lambda_b > 0.0 && lambda_a.is_finite() && lambda_b.is_finite()) {
        return invalid("edge parameters must be finite and positive");
    }
    let mut h = EdgeBlock::zeros();
    let mut add = |v: &[(usize, f64)]| {
        let n2: f64 = v.iter().map(|(_, c)| c * c).sum();
        for &(i, ci) in v {
            for &(k, ck) in v {
                h[(i, k)] += ci * ck / n2;
            }
        }
    };
    add(&[(1, 1.0), (3, -lambda_a)]);
    add(&[(2, 1.0), (6, -lambda_b)]);
    add(&[(5, lambda_a), (7, -lambda_b)]);
    add(&[(4, 1.0)]);
    add(&[(8, 1.0)]);
    Ok(h)
}

/// Anything that can multiply a vector.
pub trait LinearOperatorAction: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn label(&self) -> String;

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

/// Symmetric sparse matrix in compressed-row form (both triangles stored).
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    label: String,
}

/// Entries below this magnitude are dropped during assembly.
const DROP_TOL: f64 = 1e-300;

impl SymmetricSparseOperator {
    /// From triplets; duplicates are summed. The caller supplies both triangles.
    fn from_triplets(dim: usize, mut t: Vec<(usize, usize, f64)>, label: String) -> Self {
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = SymmetricSparseOperator {
            dim,
            row_ptr,
            cols,
            vals,
            label,
        };
        op.prune();
        op
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k].abs() > DROP_TOL {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Entries `(row, col, value)` with `row <= col`.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim)
            .flat_map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .filter(move |&k| self.cols[k] >= r)
                    .map(move |k| (r, self.cols[k], self.vals[k]))
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// Coordinate text dump: a `dim nnz` header, then one `row col value` line per upper entry.
    pub fn write_coordinate(&self, mut w: impl Write) -> std::io::Result<()> {
        let entries = self.upper_entries();
        writeln!(w, "{} {}", self.dim, entries.len())?;
        for (r, c, v) in entries {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .map(|k| self.vals[k] * x[self.cols[k]])
            .sum()
    }
}

/// Row blocks handed to rayon during large products.
const PAR_ROWS: usize = 4096;

impl LinearOperatorAction for SymmetricSparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        if self.dim >= 4 * PAR_ROWS {
            y.par_chunks_mut(PAR_ROWS).enumerate().for_each(|(c, ys)| {
                for (i, yi) in ys.iter_mut().enumerate() {
                    *yi = self.row_dot(c * PAR_ROWS + i, x);
                }
            });
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = self.row_dot(r, x);
            }
        }
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

fn edge_blocks(v: &Volume, p: &Params) -> Result<Vec<EdgeBlock>> {
    (0..v.dim())
        .map(|j| edge_projection_block(p.lambda(Species::A)[j], p.lambda(Species::B)[j]))
        .collect()
}

/// Sum of the selected edge terms on a sorted list of configuration codes.
/// The edge terms conserve both particle numbers, so any union of sectors is closed.
fn assemble_on_codes(
    v: &Volume,
    p: &Params,
    codes: &[Configuration],
    edges: &[(usize, usize, usize)],
    label: String,
) -> Result<SymmetricSparseOperator> {
    if v.dim() != p.dim() {
        return invalid("volume dimension does not match parameters");
    }
    let blocks = edge_blocks(v, p)?;
    let mut triplets = Vec::with_capacity(codes.len() * (edges.len() + 1));
    for (row, &c) in codes.iter().enumerate() {
        for &(i, k, j) in edges {
            let (si, sk) = (c.symbol(i) as usize, c.symbol(k) as usize);
            let local = 3 * si + sk;
            let base = c.0 - si as u64 * pow3(i) - sk as u64 * pow3(k);
            for target in 0..9 {
                let h = blocks[j][(target, local)];
                if h == 0.0 {
                    continue;
                }
                let code = Configuration(base + (target / 3) as u64 * pow3(i) + (target % 3) as u64 * pow3(k));
                let col = codes
                    .binary_search(&code)
                    .map_err(|_| PvbsError::InvalidArgument("edge term leaves the basis".into()))?;
                triplets.push((col, row, h));
            }
        }
    }
    Ok(SymmetricSparseOperator::from_triplets(codes.len(), triplets, label))
}

/// `H^Lambda` restricted to one particle-number sector.
pub fn assemble_sector_hamiltonian(v: &Volume, p: &Params, basis: &SectorBasis) -> Result<SymmetricSparseOperator> {
    if basis.n_sites() != v.len() {
        return invalid("basis was built on a different volume");
    }
    let l = basis.label();
    assemble_on_codes(
        v,
        p,
        basis.states(),
        &v.edge_indices(),
        format!("H[{}]({},{})", v.label(), l.n_a, l.n_b),
    )
}

/// `H^Lambda` on the whole Fock space, basis ordered by configuration code.
pub fn assemble_full_hamiltonian(v: &Volume, p: &Params, cap: u128) -> Result<SymmetricSparseOperator> {
    check_encodable(v.len())?;
    let dim = 3u128.pow(v.len() as u32);
    if dim > cap {
        return Err(PvbsError::DimensionCap { dim, cap });
    }
    let codes: Vec<Configuration> = (0..dim as u64).map(Configuration).collect();
    assemble_on_codes(v, p, &codes, &v.edge_indices(), format!("H[{}]", v.label()))
}

/// Edges of `inner`, acting on a basis of `ambient` configurations.
fn inner_edges_in_ambient(inner: &Volume, ambient: &Volume) -> Result<Vec<(usize, usize, usize)>> {
    inner
        .edges()
        .iter()
        .map(|e| {
            let i = ambient.position(&e.base).ok_or(PvbsError::NotSubset)?;
            let k = ambient.position(&e.head()).ok_or(PvbsError::NotSubset)?;
            Ok((i, k, e.direction))
        })
        .collect()
}

/// `H^{inner} (x) I` restricted to a sector of the ambient volume.
pub fn assemble_embedded_hamiltonian(
    inner: &Volume,
    ambient: &Volume,
    p: &Params,
    basis: &SectorBasis,
) -> Result<SymmetricSparseOperator> {
    if basis.n_sites() != ambient.len() {
        return invalid("basis was built on a different volume");
    }
    let edges = inner_edges_in_ambient(inner, ambient)?;
    assemble_on_codes(ambient, p, basis.states(), &edges, format!("H[{}]", inner.label()))
}

/// `G^{inner} (x) I` on the full Fock space of `ambient`, applied without forming a matrix.
///
/// For each configuration of the exterior sites the interior block is projected
/// onto the four ground states of `inner`, which costs `O(|inner|^2)` per block.
#[derive(Clone, Debug)]
pub struct GroundProjector {
    label: String,
    dim: usize,
    /// Digit weights `3^k` of the inner sites inside ambient codes.
    inner_w: Vec<u64>,
    /// Code offsets of every exterior configuration.
    ext_base: Vec<u64>,
    amp: GroundAmplitudes,
}

fn check_action_dim(n: usize, cap: u128) -> Result<usize> {
    check_encodable(n)?;
    let dim = 3u128.pow(n as u32);
    if dim > cap {
        return Err(PvbsError::DimensionCap { dim, cap });
    }
    Ok(dim as usize)
}

impl GroundProjector {
    pub fn new(inner: &Volume, p: &Params, ambient: &Volume) -> Result<Self> {
        GroundProjector::with_cap(inner, p, ambient, defaults::ACTION_CAP)
    }

    pub fn with_cap(inner: &Volume, p: &Params, ambient: &Volume, cap: u128) -> Result<Self> {
        if !inner.is_subset_of(ambient) {
            return Err(PvbsError::NotSubset);
        }
        let dim = check_action_dim(ambient.len(), cap)?;
        let amp = GroundAmplitudes::new(inner, p)?;
        let inner_w: Vec<u64> = inner
            .sites()
            .iter()
            .map(|s| pow3(ambient.position(s).unwrap()))
            .collect();
        let ext_w: Vec<u64> = ambient
            .sites()
            .iter()
            .enumerate()
            .filter(|(_, s)| !inner.contains(s))
            .map(|(k, _)| pow3(k))
            .collect();
        let mut ext_base = vec![0u64];
        for w in ext_w {
            let prev = ext_base.clone();
            ext_base.extend(prev.iter().map(|b| b + w));
            ext_base.extend(prev.iter().map(|b| b + 2 * w));
        }
        ext_base.sort_unstable();
        Ok(GroundProjector {
            label: format!("G[{}] on {}", inner.label(), ambient.label()),
            dim,
            inner_w,
            ext_base,
            amp,
        })
    }

    fn overlaps(&self, base: u64, x: &[f64]) -> [f64; 4] {
        let w = &self.inner_w;
        let at = |c: u64| x[c as usize];
        let mut ca = 0.0;
        let mut cb = 0.0;
        let mut cab = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            ca += self.amp.a[i] * at(base + wi);
            cb += self.amp.b[i] * at(base + 2 * wi);
            let mut row = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                if k != i {
                    row += self.amp.b[k] * at(base + wi + 2 * wk);
                }
            }
            cab += self.amp.a[i] * row;
        }
        [at(base), ca, cb, cab * self.amp.ab_scale]
    }

    fn scatter(&self, base: u64, c: [f64; 4], y: &mut [f64]) {
        let w = &self.inner_w;
        y[base as usize] = c[0];
        let s = c[3] * self.amp.ab_scale;
        for (i, &wi) in w.iter().enumerate() {
            y[(base + wi) as usize] = c[1] * self.amp.a[i];
            y[(base + 2 * wi) as usize] = c[2] * self.amp.b[i];
            for (k, &wk) in w.iter().enumerate() {
                if k != i {
                    y[(base + wi + 2 * wk) as usize] = s * self.amp.a[i] * self.amp.b[k];
                }
            }
        }
    }
}

impl LinearOperatorAction for GroundProjector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let coeffs: Vec<[f64; 4]> = self.ext_base.par_iter().map(|&b| self.overlaps(b, x)).collect();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (&b, &c) in self.ext_base.iter().zip(&coeffs) {
            self.scatter(b, c, y);
        }
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `E_n = G^{Lambda_n} (x) I - G^{Lambda_{n+1}}` on the Fock space of `Lambda_{n+1}`.
#[derive(Clone, Debug)]
pub struct EnProjector {
    small: GroundProjector,
    large: GroundProjector,
    n: usize,
}

impl EnProjector {
    pub fn new(family: &VolumeFamilySpec, p: &Params, n: usize) -> Result<Self> {
        EnProjector::with_cap(family, p, n, defaults::ACTION_CAP)
    }

    pub fn with_cap(family: &VolumeFamilySpec, p: &Params, n: usize, cap: u128) -> Result<Self> {
        let inner = family.member(n)?;
        let outer = family.member(n + 1)?;
        Ok(EnProjector {
            small: GroundProjector::with_cap(&inner, p, &outer, cap)?,
            large: GroundProjector::with_cap(&outer, p, &outer, cap)?,
            n,
        })
    }
}

impl LinearOperatorAction for EnProjector {
    fn dim(&self) -> usize {
        self.large.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.small.apply(x, y);
        let big = self.large.apply_vec(x);
        y.iter_mut().zip(big).for_each(|(a, b)| *a -= b);
    }

    fn label(&self) -> String {
        format!("E_{}", self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    /// `||M x - mu x|| / mu` at termination, `M = B A B`.
    pub residual: f64,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Seeded start vector with entries uniform in `[-1, 1)`, normalized.
pub fn seeded_unit_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = norm(&x);
    x.iter_mut().for_each(|v| *v /= n);
    x
}

/// Below this Rayleigh quotient the product is reported as exactly zero.
const ZERO_MU: f64 = 1e-24;

/// `||A B||` for an orthogonal projector `A` and symmetric `B`, as the square
/// root of the top eigenvalue of `B A B` found by power iteration.
pub fn operator_norm_of_product(
    a: &dyn LinearOperatorAction,
    b: &dyn LinearOperatorAction,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if a.dim() != b.dim() {
        return invalid(format!("dimension mismatch: {} vs {}", a.dim(), b.dim()));
    }
    let dim = a.dim();
    let mut x = seeded_unit_vector(dim, seed);
    let mut t1 = vec![0.0; dim];
    let mut t2 = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut prev = f64::INFINITY;
    let mut calm = 0;
    for it in 1..=max_iter {
        b.apply(&x, &mut t1);
        a.apply(&t1, &mut t2);
        b.apply(&t2, &mut y);
        let mu = dot(&x, &y);
        let ny = norm(&y);
        if ny < ZERO_MU || mu < ZERO_MU {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it,
                residual: 0.0,
            });
        }
        let res = y.iter().zip(&x).map(|(yi, xi)| (yi - mu * xi).powi(2)).sum::<f64>().sqrt() / mu;
        // a stagnant Rayleigh quotient also counts, since clustered top values slow the vector
        if (mu - prev).abs() <= 1e-3 * tol * mu {
            calm += 1;
        } else {
            calm = 0;
        }
        if res <= tol || calm >= 5 {
            return Ok(NormEstimate {
                value: mu.max(0.0).sqrt(),
                iterations: it,
                residual: res,
            });
        }
        prev = mu;
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / ny);
    }
    let mu = dot(&x, &y);
    Err(PvbsError::NoConvergence {
        iterations: max_iter,
        residual: (mu - prev).abs() / mu,
    })
}

/// Dense projector onto the kernel of `H^{inner} (x) I` within one ambient sector.
/// This is an independent route to `G^{inner}` (it never uses the closed-form states).
pub fn dense_kernel_projector(
    inner: &Volume,
    ambient: &Volume,
    p: &Params,
    basis: &SectorBasis,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let h = assemble_embedded_hamiltonian(inner, ambient, p, basis)?;
    if h.dim > defaults::DENSE_CAP {
        return Err(PvbsError::DimensionCap {
            dim: h.dim as u128,
            cap: defaults::DENSE_CAP as u128,
        });
    }
    let eig = h.to_dense().symmetric_eigen();
    let mut g = DMatrix::zeros(h.dim, h.dim);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() < tol {
            let v = eig.eigenvectors.column(k);
            g += v * v.transpose();
        }
    }
    Ok(g)
}

/// Maximal singular value of a dense matrix.
pub fn dense_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ground_state_vector, GroundKind};
    use crate::fock::{all_sectors, enumerate_sector, SectorLabel, Symbol};
    use crate::lattice::{build_box, TiltGeometry};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn params(a: &[f64], b: &[f64]) -> Params {
        Params::new(a.to_vec(), b.to_vec()).unwrap()
    }

    fn dense_eigs(m: DMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn edge_block_is_rank_five_projection() {
        let h = edge_projection_block(1.0, 1.0).unwrap();
        let e = dense_eigs(DMatrix::from_column_slice(9, 9, h.as_slice()));
        for (k, v) in e.iter().enumerate() {
            let want = if k < 4 { 0.0 } else { 1.0 };
            assert!((v - want).abs() < 1e-14);
        }
        let h = edge_projection_block(2.0, 3.0).unwrap();
        assert!((h.trace() - 5.0).abs() < 1e-14);
        assert!((h * h - h).abs().max() < 1e-14);
        let mut g = SMatrix::<f64, 9, 1>::zeros();
        g[1] = 2.0;
        g[3] = 1.0;
        assert!((h * g).abs().max() < 1e-15);
        assert!(edge_projection_block(0.0, 1.0).is_err());
    }

    #[test]
    fn two_site_sector_matrix() {
        let v = build_box(&[2]).unwrap();
        let basis = enumerate_sector(&v, SectorLabel::new(1, 0)).unwrap();
        let h = assemble_sector_hamiltonian(&v, &params(&[2.0], &[3.0]), &basis).unwrap().to_dense();
        let want = DMatrix::from_row_slice(2, 2, &[0.8, -0.4, -0.4, 0.2]);
        assert!((h - want).abs().max() < 1e-15);
    }

    #[test]
    fn three_site_kernel_and_vacuum() {
        let v = build_box(&[3]).unwrap();
        let p = params(&[2.0], &[0.5]);
        let basis = enumerate_sector(&v, SectorLabel::new(1, 0)).unwrap();
        let h = assemble_sector_hamiltonian(&v, &p, &basis).unwrap();
        let y = h.apply_vec(&[1.0, 2.0, 4.0]);
        assert!(norm(&y) < 1e-14);
        let vac = enumerate_sector(&v, SectorLabel::new(0, 0)).unwrap();
        let h0 = assemble_sector_hamiltonian(&v, &p, &vac).unwrap();
        assert_eq!(h0.dim(), 1);
        assert_eq!(h0.nnz(), 0);
    }

    #[test]
    fn coordinate_dump() {
        let v = build_box(&[2]).unwrap();
        let basis = enumerate_sector(&v, SectorLabel::new(1, 0)).unwrap();
        let h = assemble_sector_hamiltonian(&v, &params(&[2.0], &[3.0]), &basis).unwrap();
        let mut out = Vec::new();
        h.write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("2 3\n"));
    }

    #[test]
    fn sector_operators_are_symmetric_psd_and_frustration_free() {
        let v = build_box(&[2, 3]).unwrap();
        let p = params(&[2.0, 0.4], &[1.3, 3.0]);
        for label in all_sectors(v.len()) {
            let basis = enumerate_sector(&v, label).unwrap();
            let h = assemble_sector_hamiltonian(&v, &p, &basis).unwrap().to_dense();
            assert_eq!((&h - h.transpose()).abs().max(), 0.0);
            assert!(dense_eigs(h).first().map_or(true, |&e| e >= -1e-10));
        }
        for kind in GroundKind::ALL {
            let basis = enumerate_sector(&v, kind.sector()).unwrap();
            let psi = ground_state_vector(&v, &p, kind, &basis).unwrap();
            for (i, e) in v.edges().iter().enumerate() {
                let single = Volume::new(2, vec![e.base.clone(), e.head()], "edge").unwrap();
                let h = assemble_embedded_hamiltonian(&single, &v, &p, &basis).unwrap();
                assert!(norm(&h.apply_vec(&psi)) < 1e-12, "{kind:?} edge {i}");
            }
        }
    }

    #[test]
    fn sectors_assemble_to_full_operator() {
        let v = build_box(&[5]).unwrap();
        let p = params(&[1.7], &[0.6]);
        let full = assemble_full_hamiltonian(&v, &p, 1 << 20).unwrap();
        for label in all_sectors(v.len()) {
            let basis = enumerate_sector(&v, label).unwrap();
            let h = assemble_sector_hamiltonian(&v, &p, &basis).unwrap();
            for (r, c, val) in h.upper_entries() {
                let (gr, gc) = (basis.states()[r].0 as usize, basis.states()[c].0 as usize);
                assert!((full.get(gr, gc) - val).abs() < 1e-14);
            }
        }
        let total: usize = all_sectors(v.len())
            .iter()
            .map(|&l| assemble_sector_hamiltonian(&v, &p, &enumerate_sector(&v, l).unwrap()).unwrap().nnz())
            .sum();
        assert_eq!(total, full.nnz());
    }

    /// Single-species chain Hamiltonian written out from its hopping form:
    /// each bond contributes `(|0a> - l|a0>)(<0a| - l<a0|) / (1 + l^2) + |aa><aa|`.
    fn single_species(n: usize, l: f64, k: usize) -> DMatrix<f64> {
        let v = build_box(&[n]).unwrap();
        let basis = enumerate_sector(&v, SectorLabel::new(k, 0)).unwrap();
        let dim = basis.len();
        let mut h = DMatrix::zeros(dim, dim);
        for (r, &c) in basis.states().iter().enumerate() {
            for x in 0..n - 1 {
                let (s0, s1) = (c.symbol(x), c.symbol(x + 1));
                match (s0, s1) {
                    (Symbol::A, Symbol::A) => h[(r, r)] += 1.0,
                    (Symbol::A, Symbol::Empty) | (Symbol::Empty, Symbol::A) => {
                        let swapped = Configuration(c.0 + pow3(x + 1) * s0 as u64 + pow3(x) * s1 as u64 - pow3(x) * s0 as u64 - pow3(x + 1) * s1 as u64);
                        let q = basis.index_of(swapped).unwrap();
                        let own = if s0 == Symbol::A { l * l } else { 1.0 };
                        h[(r, r)] += own / (1.0 + l * l);
                        h[(r, q)] += -l / (1.0 + l * l);
                    }
                    _ => {}
                }
            }
        }
        h
    }

    #[test]
    fn matches_single_species_model() {
        for k in 0..=5 {
            let v = build_box(&[5]).unwrap();
            let basis = enumerate_sector(&v, SectorLabel::new(k, 0)).unwrap();
            let h = assemble_sector_hamiltonian(&v, &params(&[1.9], &[0.3]), &basis).unwrap().to_dense();
            assert!((h - single_species(5, 1.9, k)).abs().max() < 1e-15, "k={k}");
        }
    }

    fn random_vec(dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn ground_projector_examples() {
        let inner = build_box(&[3]).unwrap();
        let ambient = build_box(&[5]).unwrap();
        let p = params(&[2.0], &[0.5]);
        let g = GroundProjector::new(&inner, &p, &ambient).unwrap();
        assert_eq!(g.dim(), 243);

        let amp = GroundAmplitudes::new(&inner, &p).unwrap();
        let mut psi = vec![0.0; 243];
        for (i, a) in amp.a.iter().enumerate() {
            psi[pow3(i) as usize] = *a;
        }
        let out = g.apply_vec(&psi);
        assert!(out.iter().zip(&psi).all(|(x, y)| (x - y).abs() < 1e-15));

        let mut two_a = vec![0.0; 243];
        two_a[(1 + 3 + 2 * 27) as usize] = 1.0;
        two_a[(1 + 9 + 81) as usize] = 0.5;
        assert!(norm(&g.apply_vec(&two_a)) < 1e-15);

        let x = random_vec(243, 1);
        let px = g.apply_vec(&x);
        let ppx = g.apply_vec(&px);
        assert!(norm(&px.iter().zip(&ppx).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-12 * norm(&x));

        let disconnected = Volume::new(1, vec![crate::lattice::Site::new(vec![0]), crate::lattice::Site::new(vec![2])], "d").unwrap();
        assert!(matches!(GroundProjector::new(&disconnected, &p, &ambient), Err(PvbsError::Disconnected)));
        assert!(matches!(
            GroundProjector::with_cap(&inner, &p, &ambient, 100),
            Err(PvbsError::DimensionCap { .. })
        ));
    }

    #[test]
    fn ground_projector_matches_dense_kernel() {
        let inner = build_box(&[2, 2]).unwrap();
        let ambient = build_box(&[2, 3]).unwrap();
        let p = params(&[2.0, 0.6], &[1.5, 3.0]);
        let g = GroundProjector::new(&inner, &p, &ambient).unwrap();
        for label in all_sectors(ambient.len()) {
            let basis = enumerate_sector(&ambient, label).unwrap();
            let dense = dense_kernel_projector(&inner, &ambient, &p, &basis, 1e-9).unwrap();
            for (c, state) in basis.states().iter().enumerate() {
                let mut e = vec![0.0; g.dim()];
                e[state.0 as usize] = 1.0;
                let col = g.apply_vec(&e);
                for (r, s) in basis.states().iter().enumerate() {
                    assert!((col[s.0 as usize] - dense[(r, c)]).abs() < 1e-9, "{label:?} {r} {c} {} {}", col[s.0 as usize], dense[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn en_rank_on_short_chain() {
        let g = TiltGeometry::axis_aligned(1).unwrap();
        let family = VolumeFamilySpec::new(g, vec![3], 0, 0, 3).unwrap();
        let p = params(&[1.7], &[0.4]);
        let en = EnProjector::new(&family, &p, 2).unwrap();
        let dim = en.dim();
        let mut trace = 0.0;
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            trace += en.apply_vec(&e)[i];
        }
        assert!((trace - 8.0).abs() < 1e-12);

        // dense oracle: rank of G_2 (x) I - G_3 from kernel projectors
        let ambient = family.member(3).unwrap();
        let small = family.member(2).unwrap();
        let mut rank = 0;
        for label in all_sectors(3) {
            let basis = enumerate_sector(&ambient, label).unwrap();
            let d = dense_kernel_projector(&small, &ambient, &p, &basis, 1e-9).unwrap()
                - dense_kernel_projector(&ambient, &ambient, &p, &basis, 1e-9).unwrap();
            rank += d.symmetric_eigen().eigenvalues.iter().filter(|e| e.abs() > 0.5).count();
        }
        assert_eq!(rank, 8);

        let x = random_vec(dim, 3);
        let ex = en.apply_vec(&x);
        let eex = en.apply_vec(&ex);
        assert!(ex.iter().zip(&eex).all(|(a, b)| (a - b).abs() < 1e-12));
        let y = random_vec(dim, 4);
        assert!((dot(&y, &ex) - dot(&en.apply_vec(&y), &x)).abs() < 1e-12);

        let outer = family.member(3).unwrap();
        let amp = GroundAmplitudes::new(&outer, &p).unwrap();
        let mut psi = vec![0.0; dim];
        for (i, a) in amp.a.iter().enumerate() {
            psi[pow3(i) as usize] = *a;
        }
        assert!(norm(&en.apply_vec(&psi)) < 1e-14);
    }

    #[test]
    fn norm_of_product_trivial_cases() {
        let inner = build_box(&[3]).unwrap();
        let p = params(&[2.0], &[0.5]);
        let g = GroundProjector::new(&inner, &p, &inner).unwrap();
        let n = operator_norm_of_product(&g, &g, 1e-10, 1000, 7).unwrap();
        assert!((n.value - 1.0).abs() < 1e-10);

        let g = TiltGeometry::axis_aligned(1).unwrap();
        let family = VolumeFamilySpec::new(g, vec![4], 0, 0, 4).unwrap();
        let en = EnProjector::new(&family, &p, 3).unwrap();
        let full = GroundProjector::new(&family.member(4).unwrap(), &p, &family.member(4).unwrap()).unwrap();
        let n = operator_norm_of_product(&full, &en, 1e-10, 1000, 7).unwrap();
        assert_eq!(n.value, 0.0);
    }

    #[test]
    fn norm_of_product_is_seed_deterministic() {
        let g = TiltGeometry::axis_aligned(1).unwrap();
        let family = VolumeFamilySpec::new(g, vec![6], 0, 0, 6).unwrap();
        let p = params(&[10.0], &[0.1]);
        let en = EnProjector::new(&family, &p, 5).unwrap();
        let slab = family.window(2, 6).unwrap().slab().unwrap();
        let gs = GroundProjector::new(&slab, &p, &family.member(6).unwrap()).unwrap();
        let a = operator_norm_of_product(&gs, &en, 1e-8, 20000, defaults::SEED).unwrap();
        let b = operator_norm_of_product(&gs, &en, 1e-8, 20000, defaults::SEED).unwrap();
        assert_eq!(a, b);
        assert!(a.value < 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn projector_action_is_linear_and_symmetric(la in 0.3f64..3.0, lb in 0.3f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000, alpha in -2.0f64..2.0) {
            let inner = build_box(&[2, 2]).unwrap();
            let ambient = build_box(&[2, 3]).unwrap();
            let p = params(&[la, lb], &[lb, la]);
            let g = GroundProjector::new(&inner, &p, &ambient).unwrap();
            let (u, v) = (random_vec(g.dim(), s1), random_vec(g.dim(), s2));
            let comb: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + alpha * b).collect();
            let lhs = g.apply_vec(&comb);
            let (pu, pv) = (g.apply_vec(&u), g.apply_vec(&v));
            for i in 0..g.dim() {
                prop_assert!((lhs[i] - pu[i] - alpha * pv[i]).abs() < 1e-12);
            }
            prop_assert!((dot(&u, &pv) - dot(&pu, &v)).abs() < 1e-12);
        }
    }
}

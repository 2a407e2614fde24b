//! Eigenvalue engines and gap extraction.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ground_state_vector, trial_energy_bound, trial_state_energy, GroundKind};
use crate::defaults;
use crate::error::{invalid, PvbsError, Result};
use crate::fock::{all_sectors, check_encodable, enumerate_sector_capped, sector_dimension, SectorLabel};
use crate::lattice::{build_box, Volume};
use crate::model::{classify_zd, GapClass, Params, Species};
use crate::operators::{assemble_sector_hamiltonian, seeded_unit_vector, LinearOperatorAction, SymmetricSparseOperator};

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    orthogonalize2(w, basis, &[]);
}

/// Two classical Gram-Schmidt sweeps over both sets. Sweeping them together
/// matters near breakdown, where leftovers along either set get amplified.
fn orthogonalize2(w: &mut [f64], first: &[Vec<f64>], second: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in first.iter().chain(second) {
            let c = dot(v, w);
            axpy(w, -c, v);
        }
    }
}

fn check_dense_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(PvbsError::DimensionCap {
            dim: dim as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

/// Full spectrum, ascending, by a dense symmetric eigensolve.
pub fn dense_eigenvalues(op: &SymmetricSparseOperator) -> Result<Vec<f64>> {
    dense_eigenvalues_capped(op, defaults::DENSE_CAP)
}

pub fn dense_eigenvalues_capped(op: &SymmetricSparseOperator, cap: usize) -> Result<Vec<f64>> {
    Ok(dense_eigenpairs(op, cap)?.0)
}

/// Ascending eigenvalues and the matching eigenvectors as columns.
pub fn dense_eigenpairs(op: &SymmetricSparseOperator, cap: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_dense_cap(op.dim(), cap)?;
    let eig = op.to_dense().symmetric_eigen();
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&i, &k| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[k]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(op.dim(), op.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Residual tolerance relative to `max(1, |theta|)`.
    pub tol: f64,
    /// Krylov basis size per restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            max_basis: 100,
            max_restarts: 200,
            seed: defaults::SEED,
        }
    }
}

/// Lowest eigenpair on the orthogonal complement of `deflate` (orthonormal),
/// by restarted Lanczos with full reorthogonalization.
fn lanczos_lowest(
    op: &dyn LinearOperatorAction,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<(f64, Vec<f64>)> {
    let dim = op.dim();
    if deflate.len() >= dim {
        return invalid("deflation space covers the whole operator domain");
    }
    let m_max = opts.max_basis.min(dim - deflate.len()).max(1);
    let mut start = seeded_unit_vector(dim, opts.seed);
    orthogonalize(&mut start, deflate);
    let mut last_res = f64::INFINITY;
    for _ in 0..opts.max_restarts {
        let n0 = norm(&start);
        start.iter_mut().for_each(|x| *x /= n0);
        let mut basis: Vec<Vec<f64>> = vec![start];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        let mut scale = 0.0f64;
        loop {
            let j = basis.len() - 1;
            op.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            scale = scale.max(norm(&w));
            orthogonalize2(&mut w, deflate, &basis);
            let b = norm(&w);
            if basis.len() == m_max || b <= 1e-10 * scale.max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let k = (0..m)
            .min_by(|&i, &k| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[k]))
            .unwrap();
        let s: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        let mut x = vec![0.0; dim];
        for (i, v) in basis.iter().enumerate() {
            axpy(&mut x, s[i], v);
        }
        orthogonalize(&mut x, deflate);
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let hx = op.apply_vec(&x);
        let theta = dot(&x, &hx);
        let res = hx.iter().zip(&x).map(|(h, v)| (h - theta * v).powi(2)).sum::<f64>().sqrt();
        last_res = res;
        if res <= opts.tol * theta.abs().max(1.0) {
            return Ok((theta, x));
        }
        start = x;
    }
    Err(PvbsError::NoConvergence {
        iterations: opts.max_restarts * m_max,
        residual: last_res,
    })
}

/// The `k` lowest eigenpairs on the complement of `deflate`, ascending.
pub fn lowest_eigenpairs(
    op: &dyn LinearOperatorAction,
    k: usize,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let mut space = deflate.to_vec();
    let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
    for _ in 0..k {
        let (theta, x) = lanczos_lowest(op, &space, opts)?;
        space.push(x.clone());
        out.push((theta, x));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

pub fn lowest_eigenvalues(
    op: &dyn LinearOperatorAction,
    k: usize,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<Vec<f64>> {
    Ok(lowest_eigenpairs(op, k, deflate, opts)?.into_iter().map(|p| p.0).collect())
}

pub fn rayleigh_quotient(op: &dyn LinearOperatorAction, x: &[f64]) -> f64 {
    dot(x, &op.apply_vec(x)) / dot(x, x)
}

/// `||op||` for a positive semidefinite operator, by power iteration.
pub fn estimate_norm(op: &dyn LinearOperatorAction, seed: u64) -> f64 {
    let mut x = seeded_unit_vector(op.dim(), seed);
    let mut mu = 0.0;
    for _ in 0..500 {
        let y = op.apply_vec(&x);
        let next = dot(&x, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - mu).abs() <= 1e-6 * next {
            return next.max(ny);
        }
        mu = next;
    }
    mu
}

/// Number of eigenvalues below `tol_rel * max(1, ||op||)`.
pub fn kernel_dimension(op: &SymmetricSparseOperator, tol_rel: f64) -> Result<usize> {
    if op.dim() <= defaults::DENSE_CAP {
        let e = dense_eigenvalues(op)?;
        let tol = tol_rel * e.last().copied().unwrap_or(0.0).max(1.0);
        return Ok(e.iter().filter(|&&x| x < tol).count());
    }
    let opts = LanczosOptions::default();
    let tol = tol_rel * estimate_norm(op, opts.seed).max(1.0);
    let mut found: Vec<Vec<f64>> = Vec::new();
    while found.len() < op.dim() {
        let (theta, x) = lanczos_lowest(op, &found, &opts)?;
        if theta >= tol {
            break;
        }
        found.push(x);
    }
    Ok(found.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorRecord {
    pub n_a: usize,
    pub n_b: usize,
    pub dim: usize,
    /// The lowest (at most two) eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub kernel: usize,
    /// Smallest eigenvalue above the kernel tolerance, if any.
    pub excitation: Option<f64>,
    pub method: SolveMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub volume: String,
    pub sites: usize,
    pub sectors: Vec<SectorRecord>,
    /// Minimum over the solved sectors. Only a certified gap when `partial` is false.
    pub total_gap: f64,
    pub gap_sector: SectorLabel,
    pub kernel_total: usize,
    pub partial: bool,
    pub skipped: Vec<SectorLabel>,
    pub kernel_tol_rel: f64,
    pub lanczos_tol: f64,
}

impl SpectrumReport {
    /// CSV with one row per solved sector: `N_a,N_b,dim,e0,e1,kernel`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N_a,N_b,dim,e0,e1,kernel\n");
        for r in &self.sectors {
            let e = |i: usize| r.eigenvalues.get(i).map(|v| format!("{v:.16e}")).unwrap_or_default();
            s.push_str(&format!("{},{},{},{},{},{}\n", r.n_a, r.n_b, r.dim, e(0), e(1), r.kernel));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOptions {
    /// Sectors larger than this are skipped and the report marked partial.
    pub sector_cap: u128,
    /// Sectors up to this dimension are diagonalized densely.
    pub dense_switch: usize,
    pub kernel_tol_rel: f64,
    pub lanczos: LanczosOptions,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            sector_cap: defaults::SECTOR_CAP,
            dense_switch: defaults::DENSE_SWITCH,
            kernel_tol_rel: defaults::KERNEL_TOL_REL,
            lanczos: LanczosOptions::default(),
        }
    }
}

fn check_gap_volume(v: &Volume) -> Result<()> {
    if v.len() < 2 {
        return invalid("gap queries need at least two sites");
    }
    if !v.is_connected() {
        return Err(PvbsError::Disconnected);
    }
    check_encodable(v.len())
}

fn solve_sector(v: &Volume, p: &Params, label: SectorLabel, opts: &GapOptions) -> Result<SectorRecord> {
    let basis = enumerate_sector_capped(v, label, opts.sector_cap)?;
    let h = assemble_sector_hamiltonian(v, p, &basis)?;
    let dim = h.dim();
    if dim <= opts.dense_switch.min(defaults::DENSE_CAP) {
        let e = dense_eigenvalues(&h)?;
        let tol = opts.kernel_tol_rel * e.last().copied().unwrap_or(0.0).max(1.0);
        let kernel = e.iter().filter(|&&x| x < tol).count();
        return Ok(SectorRecord {
            n_a: label.n_a,
            n_b: label.n_b,
            dim,
            eigenvalues: e.iter().take(2).copied().collect(),
            kernel,
            excitation: e.get(kernel).copied(),
            method: SolveMethod::Dense,
        });
    }
    let tol = opts.kernel_tol_rel * estimate_norm(&h, opts.lanczos.seed).max(1.0);
    let mut deflate: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    if let Some(kind) = GroundKind::for_sector(label) {
        let psi = ground_state_vector(v, p, kind, &basis)?;
        values.push(rayleigh_quotient(&h, &psi));
        deflate.push(psi);
    }
    let mut kernel = deflate.len();
    let mut excitation = None;
    while deflate.len() < dim && (excitation.is_none() || values.len() < 2) {
        let (theta, x) = lanczos_lowest(&h, &deflate, &opts.lanczos)?;
        values.push(theta);
        deflate.push(x);
        if excitation.is_none() {
            if theta < tol {
                kernel += 1;
            } else {
                excitation = Some(theta);
            }
        }
    }
    values.sort_by(f64::total_cmp);
    values.truncate(2);
    Ok(SectorRecord {
        n_a: label.n_a,
        n_b: label.n_b,
        dim,
        eigenvalues: values,
        kernel,
        excitation,
        method: SolveMethod::Lanczos,
    })
}

/// Spectral gap of `H^v` as the minimum over particle-number sectors of the
/// lowest eigenvalue above the kernel tolerance. Sectors are solved in parallel.
pub fn total_gap(v: &Volume, p: &Params, opts: &GapOptions) -> Result<SpectrumReport> {
    check_gap_volume(v)?;
    if v.dim() != p.dim() {
        return invalid("volume dimension does not match parameters");
    }
    let n = v.len();
    let (todo, skipped): (Vec<SectorLabel>, Vec<SectorLabel>) = all_sectors(n)
        .into_iter()
        .partition(|l| sector_dimension(n, l.n_a, l.n_b).map_or(false, |d| d <= opts.sector_cap));
    let sectors: Vec<SectorRecord> = todo
        .par_iter()
        .map(|&l| solve_sector(v, p, l, opts))
        .collect::<Result<_>>()?;
    let best = sectors
        .iter()
        .filter_map(|r| r.excitation.map(|e| (e, SectorLabel::new(r.n_a, r.n_b))))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let (total_gap, gap_sector) = best.ok_or_else(|| PvbsError::InvalidArgument("no excited sector was solved".into()))?;
    Ok(SpectrumReport {
        volume: v.label().to_string(),
        sites: n,
        kernel_total: sectors.iter().map(|r| r.kernel).sum(),
        total_gap,
        gap_sector,
        partial: !skipped.is_empty(),
        skipped,
        sectors,
        kernel_tol_rel: opts.kernel_tol_rel,
        lanczos_tol: opts.lanczos.tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub trial_energy: f64,
    /// `d * C(boundary) / C(inner)`.
    pub bound: f64,
    pub numeric_gap: Option<f64>,
}

/// Trial energies of a single-particle state on boxes `L^d` padded by one site,
/// for gapless parameters, with numeric gaps of the unpadded box where the Fock
/// dimension stays below `numeric_cap`.
pub fn gapless_scaling(p: &Params, ls: &[usize], numeric_cap: u128, opts: &GapOptions) -> Result<Vec<ScalingRow>> {
    if classify_zd(p) != GapClass::Gapless {
        return invalid("scaling tables need gapless parameters");
    }
    let d = p.dim();
    let s = Species::BOTH
        .into_iter()
        .find(|&s| (0..d).all(|j| p.is_unit(s, j)))
        .unwrap();
    ls.iter()
        .map(|&l| {
            if l < 1 {
                return invalid("box side must be positive");
            }
            let inner = build_box(&vec![l; d])?;
            let ambient = build_box(&vec![l + 2; d])?.translated(&vec![-1; d])?;
            let sites = l.pow(d as u32);
            let numeric_gap = if sites >= 2 && sites <= 40 && 3u128.pow(sites as u32) <= numeric_cap {
                Some(total_gap(&inner, p, opts)?.total_gap)
            } else {
                None
            };
            Ok(ScalingRow {
                l,
                trial_energy: trial_state_energy(&inner, &ambient, p, s)?,
                bound: trial_energy_bound(&inner, &ambient, p, s)?,
                numeric_gap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_sector;
    use crate::operators::assemble_full_hamiltonian;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn params(a: &[f64], b: &[f64]) -> Params {
        Params::new(a.to_vec(), b.to_vec()).unwrap()
    }

    fn sector_op(v: &Volume, p: &Params, a: usize, b: usize) -> SymmetricSparseOperator {
        assemble_sector_hamiltonian(v, p, &enumerate_sector(v, SectorLabel::new(a, b)).unwrap()).unwrap()
    }

    #[test]
    fn dense_examples() {
        let v = build_box(&[2]).unwrap();
        let p = params(&[2.0], &[3.0]);
        let full = assemble_full_hamiltonian(&v, &p, 100).unwrap();
        let e = dense_eigenvalues(&full).unwrap();
        for (k, x) in e.iter().enumerate() {
            assert!((x - if k < 4 { 0.0 } else { 1.0 }).abs() < 1e-14);
        }
        assert_eq!(dense_eigenvalues(&sector_op(&v, &p, 0, 0)).unwrap(), vec![0.0]);
        let e = dense_eigenvalues(&sector_op(&v, &p, 1, 0)).unwrap();
        assert!(e[0].abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        assert!(matches!(
            dense_eigenvalues_capped(&full, 4),
            Err(PvbsError::DimensionCap { .. })
        ));
    }

    #[test]
    fn lanczos_matches_dense_with_deflated_kernel() {
        let v = build_box(&[3]).unwrap();
        let p = params(&[2.0], &[0.5]);
        let h = sector_op(&v, &p, 1, 0);
        let psi = ground_state_vector(&v, &p, GroundKind::A, &enumerate_sector(&v, SectorLabel::new(1, 0)).unwrap()).unwrap();
        let dense = dense_eigenvalues(&h).unwrap();
        let got = lowest_eigenvalues(&h, 1, &[psi], &LanczosOptions::default()).unwrap();
        assert!((got[0] - dense[1]).abs() < 1e-10);
    }

    #[test]
    fn lanczos_on_projector() {
        let v = build_box(&[2]).unwrap();
        let h = assemble_full_hamiltonian(&v, &params(&[1.3], &[0.7]), 100).unwrap();
        let (_, vecs) = dense_eigenpairs(&h, 100).unwrap();
        let kernel: Vec<Vec<f64>> = (0..4).map(|c| vecs.column(c).iter().copied().collect()).collect();
        let got = lowest_eigenvalues(&h, 1, &kernel, &LanczosOptions::default()).unwrap();
        assert!((got[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lanczos_agrees_with_dense_on_mid_sized_sectors() {
        let v = build_box(&[8]).unwrap();
        let p = params(&[1.4], &[0.6]);
        for (a, b) in [(2, 2), (3, 1), (2, 3)] {
            let h = sector_op(&v, &p, a, b);
            let dense = dense_eigenvalues(&h).unwrap();
            let got = lowest_eigenvalues(&h, 3, &[], &LanczosOptions::default()).unwrap();
            for k in 0..3 {
                assert!((got[k] - dense[k]).abs() < 1e-8, "({a},{b}) k={k}: {} vs {}", got[k], dense[k]);
            }
            let again = lowest_eigenvalues(&h, 3, &[], &LanczosOptions::default()).unwrap();
            assert_eq!(got, again);
        }
    }

    #[test]
    fn kernel_examples() {
        let v = build_box(&[5]).unwrap();
        let p = params(&[1.8], &[0.45]);
        let mut total = 0;
        for l in all_sectors(5) {
            let k = kernel_dimension(&sector_op(&v, &p, l.n_a, l.n_b), 1e-8).unwrap();
            let want = usize::from(GroundKind::for_sector(l).is_some());
            assert_eq!(k, want, "{l:?}");
            total += k;
        }
        assert_eq!(total, 4);
        let e = build_box(&[2]).unwrap();
        assert_eq!(kernel_dimension(&assemble_full_hamiltonian(&e, &p, 100).unwrap(), 1e-8).unwrap(), 4);
    }

    #[test]
    fn gap_examples() {
        let v = build_box(&[2]).unwrap();
        let r = total_gap(&v, &params(&[3.0], &[0.2]), &GapOptions::default()).unwrap();
        assert!((r.total_gap - 1.0).abs() < 1e-12);
        assert_eq!(r.kernel_total, 4);

        let v = build_box(&[3]).unwrap();
        let p = params(&[1.0], &[1.0]);
        let r = total_gap(&v, &p, &GapOptions::default()).unwrap();
        assert_eq!(r.sectors.len(), 10);
        let e = dense_eigenvalues(&assemble_full_hamiltonian(&v, &p, 100).unwrap()).unwrap();
        assert_eq!(e.iter().filter(|x| x.abs() < 1e-10).count(), 4);
        assert!((r.total_gap - e[4]).abs() < 1e-12);

        let single = build_box(&[1]).unwrap();
        assert!(total_gap(&single, &params(&[2.0], &[2.0]), &GapOptions::default()).is_err());
        let split = Volume::new(1, vec![crate::lattice::Site::new(vec![0]), crate::lattice::Site::new(vec![2])], "s").unwrap();
        assert_eq!(
            total_gap(&split, &params(&[2.0], &[2.0]), &GapOptions::default()),
            Err(PvbsError::Disconnected)
        );
    }

    #[test]
    fn gap_is_invariant_under_relabeling() {
        let p = params(&[2.0, 0.7], &[1.3, 3.0]);
        let a = total_gap(&build_box(&[2, 3]).unwrap(), &p, &GapOptions::default()).unwrap();
        let b = total_gap(&build_box(&[3, 2]).unwrap(), &p.permuted(&[1, 0]), &GapOptions::default()).unwrap();
        let c = total_gap(&build_box(&[2, 3]).unwrap(), &p.swapped(), &GapOptions::default()).unwrap();
        assert!((a.total_gap - b.total_gap).abs() < 1e-12);
        assert!((a.total_gap - c.total_gap).abs() < 1e-12);
    }

    #[test]
    fn lanczos_path_matches_dense_path() {
        let v = build_box(&[7]).unwrap();
        let p = params(&[1.6], &[0.5]);
        let dense = total_gap(&v, &p, &GapOptions { dense_switch: 4096, ..Default::default() }).unwrap();
        let iterative = total_gap(&v, &p, &GapOptions { dense_switch: 0, ..Default::default() }).unwrap();
        assert!((dense.total_gap - iterative.total_gap).abs() < 1e-8);
        assert_eq!(iterative.kernel_total, 4);
        for (d, i) in dense.sectors.iter().zip(&iterative.sectors) {
            assert_eq!(i.method, SolveMethod::Lanczos);
            for (x, y) in d.eigenvalues.iter().zip(&i.eigenvalues) {
                assert!((x - y).abs() < 1e-8, "({},{})", d.n_a, d.n_b);
            }
        }
    }

    #[test]
    fn partial_reports() {
        let v = build_box(&[6]).unwrap();
        let r = total_gap(&v, &params(&[2.0], &[0.5]), &GapOptions { sector_cap: 30, ..Default::default() }).unwrap();
        assert!(r.partial);
        assert!(r.skipped.contains(&SectorLabel::new(2, 2)));
        assert!(r.to_csv().starts_with("N_a,N_b,dim,e0,e1,kernel\n0,0,1,"));
    }

    #[test]
    fn scaling_examples() {
        let p = params(&[1.0], &[2.0]);
        let rows = gapless_scaling(&p, &[2, 3, 4, 5, 6], 3u128.pow(6), &GapOptions::default()).unwrap();
        for r in &rows {
            assert_eq!(r.trial_energy, 1.0 / r.l as f64);
            assert!(r.trial_energy <= r.bound);
        }
        let gaps: Vec<f64> = rows[1..].iter().map(|r| r.numeric_gap.unwrap()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(gapless_scaling(&params(&[2.0], &[2.0]), &[3], 100, &GapOptions::default()).is_err());

        let p = params(&[1.0, 1.0], &[2.0, 0.5]);
        let rows = gapless_scaling(&p, &[3], 0, &GapOptions::default()).unwrap();
        assert!(rows[0].trial_energy <= rows[0].bound);
        assert!(rows[0].numeric_gap.is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn ground_space_is_four_dimensional(la in 0.2f64..5.0, lb in 0.2f64..5.0, len in 2usize..6) {
            let r = total_gap(&build_box(&[len]).unwrap(), &params(&[la], &[lb]), &GapOptions::default()).unwrap();
            prop_assert!(r.kernel_total == 4);
            prop_assert!(r.total_gap > 0.0);
            prop_assert!(r.sectors.iter().all(|s| s.eigenvalues[0] >= -1e-10));
        }
    }
}

//! Parameter sweeps over one lambda coordinate and box sizes, with a
//! content-addressed result cache so interrupted sweeps resume where they stopped.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pvbs_core::lattice::parse_volume_spec;
use pvbs_core::spectra::{total_gap, GapOptions};
use pvbs_core::{json, Params};

use crate::output::{csv, opt_float, table};

/// Everything that determines a grid point's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointInputs {
    pub lambda_a: String,
    pub lambda_b: String,
    pub dim: usize,
    pub volume: String,
    pub options: GapOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointOutputs {
    pub status: Status,
    pub total_gap: Option<f64>,
    pub kernel_total: Option<usize>,
    pub error: Option<String>,
}

/// One cached grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: String,
    pub inputs: PointInputs,
    pub inputs_hash: String,
    pub outputs: PointOutputs,
    pub wall_time_s: f64,
    pub version: String,
}

/// SHA-256 of the canonical inputs together with the code version.
pub fn inputs_hash(inputs: &PointInputs) -> Result<String> {
    let key = serde_json::json!({ "inputs": inputs, "version": pvbs_core::VERSION });
    let text = json::to_canonical_string(&key)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

fn solve(inputs: &PointInputs) -> PointOutputs {
    let run = || -> std::result::Result<_, String> {
        let p = Params::parse(&inputs.lambda_a, &inputs.lambda_b, Some(inputs.dim)).map_err(|e| e.to_string())?;
        let v = parse_volume_spec(&inputs.volume).map_err(|e| e.to_string())?;
        let r = total_gap(&v, &p, &inputs.options).map_err(|e| e.to_string())?;
        if r.partial {
            return Err(format!(
                "{} sectors exceed the sector budget {}",
                r.skipped.len(),
                inputs.options.sector_cap
            ));
        }
        Ok(r)
    };
    match run() {
        Ok(r) => PointOutputs {
            status: Status::Ok,
            total_gap: Some(r.total_gap),
            kernel_total: Some(r.kernel_total),
            error: None,
        },
        Err(e) => PointOutputs {
            status: Status::Failed,
            total_gap: None,
            kernel_total: None,
            error: Some(e),
        },
    }
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    /// Opens (creating if needed) a cache directory and checks that it is writable.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create cache directory {}", dir.display()))?;
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cache directory {} is not writable", dir.display()))?;
        Ok(Cache { dir: dir.to_path_buf() })
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    /// A record stored under `hash`, ignoring unreadable or foreign files.
    pub fn get(&self, hash: &str) -> Option<ResultRecord> {
        let text = fs::read_to_string(self.path(hash)).ok()?;
        let rec: ResultRecord = serde_json::from_str(&text).ok()?;
        (rec.inputs_hash == hash).then_some(rec)
    }

    /// Writes to a temporary file in the cache directory and renames it into place.
    pub fn put(&self, rec: &ResultRecord) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(json::to_canonical_pretty(rec)?.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(&rec.inputs_hash))?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub status: Status,
    pub total_gap: Option<f64>,
    pub kernel_total: Option<usize>,
    pub error: Option<String>,
    pub inputs_hash: String,
    pub cached: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub axis: String,
    pub fixed: String,
    pub dim: usize,
    pub rows: Vec<SweepRow>,
    pub cache_hits: usize,
    pub solves: usize,
    pub failures: usize,
    pub data_file: String,
}

pub struct SweepSpec {
    /// `"a"` or `"b"`.
    pub axis: String,
    /// Swept values as written by the user.
    pub values: Vec<String>,
    /// Parameters of the other species.
    pub fixed: String,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub options: GapOptions,
}

fn volume_spec(l: usize, dim: usize) -> String {
    format!("box:{}", vec![l.to_string(); dim].join("x"))
}

pub fn run(spec: &SweepSpec, cache: &Cache, data: &Path) -> Result<SweepReport> {
    let points: Vec<(String, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&l| spec.values.iter().map(move |v| (v.clone(), l)))
        .collect();
    // validate every point before spending time on any of them
    for (v, _) in &points {
        let (a, b) = if spec.axis == "a" { (v, &spec.fixed) } else { (&spec.fixed, v) };
        Params::parse(a, b, Some(spec.dim))?;
    }
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|(v, l)| -> Result<SweepRow> {
            let (a, b) = if spec.axis == "a" { (v, &spec.fixed) } else { (&spec.fixed, v) };
            let inputs = PointInputs {
                lambda_a: a.clone(),
                lambda_b: b.clone(),
                dim: spec.dim,
                volume: volume_spec(*l, spec.dim),
                options: spec.options,
            };
            let hash = inputs_hash(&inputs)?;
            let (rec, cached) = match cache.get(&hash) {
                Some(rec) => (rec, true),
                None => {
                    let t0 = Instant::now();
                    let outputs = solve(&inputs);
                    let rec = ResultRecord {
                        command: "gap".into(),
                        inputs,
                        inputs_hash: hash,
                        outputs,
                        wall_time_s: t0.elapsed().as_secs_f64(),
                        version: pvbs_core::VERSION.into(),
                    };
                    cache.put(&rec)?;
                    (rec, false)
                }
            };
            Ok(SweepRow {
                lambda: v.trim().parse().unwrap_or(f64::NAN),
                l: *l,
                status: rec.outputs.status,
                total_gap: rec.outputs.total_gap,
                kernel_total: rec.outputs.kernel_total,
                error: rec.outputs.error,
                inputs_hash: rec.inputs_hash,
                cached,
            })
        })
        .collect::<Result<_>>()?;
    write_gnuplot(data, spec, &rows)?;
    Ok(SweepReport {
        axis: spec.axis.clone(),
        fixed: spec.fixed.clone(),
        dim: spec.dim,
        cache_hits: rows.iter().filter(|r| r.cached).count(),
        solves: rows.iter().filter(|r| !r.cached).count(),
        failures: rows.iter().filter(|r| r.status == Status::Failed).count(),
        rows,
        data_file: data.display().to_string(),
    })
}

/// One gnuplot data block per box size (`index` selects it), columns `lambda L gap`.
fn write_gnuplot(path: &Path, spec: &SweepSpec, rows: &[SweepRow]) -> Result<()> {
    let mut s = format!(
        "# pvbs sweep over lambda_{} (other species: {}), d = {}\n# lambda L gap\n",
        spec.axis, spec.fixed, spec.dim
    );
    for (i, &l) in spec.sizes.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        for r in rows.iter().filter(|r| r.l == l) {
            match r.total_gap {
                Some(g) => s.push_str(&format!("{:.16e} {} {:.16e}\n", r.lambda, r.l, g)),
                None => s.push_str(&format!("# {:.16e} {} failed\n", r.lambda, r.l)),
            }
        }
    }
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(s.as_bytes())?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn rows_text(rows: &[SweepRow]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec!["lambda", "L", "total_gap", "kernel_total", "status", "cached", "error"];
    let body = rows
        .iter()
        .map(|r| {
            vec![
                format!("{:.16e}", r.lambda),
                r.l.to_string(),
                opt_float(r.total_gap),
                r.kernel_total.map(|k| k.to_string()).unwrap_or_default(),
                if r.status == Status::Ok { "ok" } else { "failed" }.to_string(),
                r.cached.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    (header, body)
}

pub fn render_csv(rows: &[SweepRow]) -> String {
    let (h, b) = rows_text(rows);
    csv(&h, &b)
}

pub fn render_table(rows: &[SweepRow]) -> String {
    let (h, b) = rows_text(rows);
    table(&h, &b)
}

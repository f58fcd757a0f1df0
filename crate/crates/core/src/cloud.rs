//! Sampled point clouds and their CSV / JSON encodings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::polyring::FORMAT_VERSION;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("point {index} violates the cloud contract: {msg}")]
    Contract { index: usize, msg: String },
    #[error("unsupported format_version {0}")]
    Version(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudHeader {
    pub format_version: u32,
    pub dim: usize,
    #[serde(default)]
    pub system_hash: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub residual_tol: f64,
    pub shell_tol: f64,
}

/// Points in ℝᴺ with per-point residual `max |fᵢ(x)|` and optional shell radius tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub header: CloudHeader,
    pub points: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub shells: Vec<Option<f64>>,
}

impl PointCloud {
    pub fn empty(dim: usize, residual_tol: f64, shell_tol: f64) -> Self {
        PointCloud {
            header: CloudHeader {
                format_version: FORMAT_VERSION,
                dim,
                system_hash: None,
                seed: None,
                residual_tol,
                shell_tol,
            },
            points: Vec::new(),
            residuals: Vec::new(),
            shells: Vec::new(),
        }
    }

    /// Untagged cloud with zero residuals (exact or synthetic points).
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        let mut c = PointCloud::empty(dim, 0.0, 0.0);
        c.residuals = vec![0.0; points.len()];
        c.shells = vec![None; points.len()];
        c.points = points;
        c
    }

    pub fn push(&mut self, point: Vec<f64>, residual: f64, shell: Option<f64>) {
        self.points.push(point);
        self.residuals.push(residual);
        self.shells.push(shell);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    /// Appends the points of `other`; tolerances become the looser of the two.
    pub fn merge(&mut self, other: &PointCloud) {
        self.points.extend(other.points.iter().cloned());
        self.residuals.extend(other.residuals.iter().cloned());
        self.shells.extend(other.shells.iter().cloned());
        self.header.residual_tol = self.header.residual_tol.max(other.header.residual_tol);
        self.header.shell_tol = self.header.shell_tol.max(other.header.shell_tol);
    }

    pub fn scaled(&self, lambda: f64) -> PointCloud {
        let mut c = self.clone();
        for p in &mut c.points {
            for v in p.iter_mut() {
                *v *= lambda;
            }
        }
        for s in c.shells.iter_mut().flatten() {
            *s *= lambda;
        }
        c
    }

    /// Re-checks the residual and shell contracts recorded in the header.
    pub fn validate(&self) -> Result<(), CloudError> {
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != self.header.dim {
                return Err(CloudError::Contract { index: i, msg: format!("dimension {}", p.len()) });
            }
            if self.residuals[i] > self.header.residual_tol {
                return Err(CloudError::Contract {
                    index: i,
                    msg: format!("residual {} > {}", self.residuals[i], self.header.residual_tol),
                });
            }
            if let Some(r) = self.shells[i] {
                let off = (linalg::norm(p) - r).abs();
                if off > self.header.shell_tol {
                    return Err(CloudError::Contract { index: i, msg: format!("shell offset {off}") });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, CloudError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<PointCloud, CloudError> {
        let c: PointCloud = serde_json::from_str(s)?;
        check_version(c.header.format_version)?;
        let n = c.points.len();
        if c.residuals.len() != n || c.shells.len() != n {
            return Err(CloudError::Contract { index: n, msg: "points, residuals and shells differ in length".into() });
        }
        Ok(c)
    }

    /// CSV with `#`-prefixed metadata lines, a header row `x0,…,residual,shell`
    /// and one point per row. Empty `shell` cells mean untagged.
    pub fn to_csv(&self) -> Result<String, CloudError> {
        let mut out = String::new();
        out.push_str(&format!("# format_version={}\n", self.header.format_version));
        if let Some(h) = &self.header.system_hash {
            out.push_str(&format!("# system_hash={h}\n"));
        }
        if let Some(s) = self.header.seed {
            out.push_str(&format!("# seed={s}\n"));
        }
        out.push_str(&format!("# residual_tol={}\n", self.header.residual_tol));
        out.push_str(&format!("# shell_tol={}\n", self.header.shell_tol));
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (0..self.header.dim).map(|i| format!("x{i}")).collect();
        header.push("residual".into());
        header.push("shell".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.points[i].iter().map(|v| v.to_string()).collect();
            row.push(self.residuals[i].to_string());
            row.push(self.shells[i].map(|s| s.to_string()).unwrap_or_default());
            w.write_record(&row)?;
        }
        let body = w.into_inner().map_err(|e| CloudError::Row { row: 0, msg: e.to_string() })?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }

    /// Reads the format written by [`PointCloud::to_csv`]. Plain coordinate CSVs
    /// (header `x0,x1,…` only, or no metadata) are accepted too.
    pub fn from_csv(s: &str) -> Result<PointCloud, CloudError> {
        let mut seed = None;
        let mut hash = None;
        let mut residual_tol = 0.0;
        let mut shell_tol = 0.0;
        for line in s.lines().filter(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                match k.trim() {
                    "format_version" => {
                        let v = v.trim().parse().map_err(|_| CloudError::Row { row: 0, msg: format!("format_version `{}`", v.trim()) })?;
                        check_version(v)?;
                    }
                    "seed" => seed = v.trim().parse().ok(),
                    "system_hash" => hash = Some(v.trim().to_string()),
                    "residual_tol" => residual_tol = v.trim().parse().unwrap_or(0.0),
                    "shell_tol" => shell_tol = v.trim().parse().unwrap_or(0.0),
                    _ => {}
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(s.as_bytes());
        let headers = rdr.headers()?.clone();
        let dim = headers.iter().filter(|h| h.starts_with('x')).count();
        let res_col = headers.iter().position(|h| h == "residual");
        let shell_col = headers.iter().position(|h| h == "shell");
        let mut cloud = PointCloud::empty(dim, residual_tol, shell_tol);
        cloud.header.seed = seed;
        cloud.header.system_hash = hash;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64, CloudError> {
                rec.get(j)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| CloudError::Row { row, msg: format!("column {j}: {e}") })
            };
            let point: Result<Vec<f64>, _> = (0..dim).map(parse).collect();
            let residual = match res_col {
                Some(j) => parse(j)?,
                None => 0.0,
            };
            let shell = match shell_col {
                Some(j) if !rec.get(j).unwrap_or("").trim().is_empty() => Some(parse(j)?),
                _ => None,
            };
            cloud.push(point?, residual, shell);
        }
        Ok(cloud)
    }
}

fn check_version(v: u32) -> Result<(), CloudError> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(CloudError::Version(v))
    }
}

//! Synthetic manifold datasets and CSV persistence.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// An `n×p` sample of finite points.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Array2<f64>,
    pub name: String,
    /// Known intrinsic dimension of the generating manifold, if any.
    pub intrinsic_dim: Option<usize>,
}

impl Dataset {
    pub fn new(rows: Array2<f64>, name: impl Into<String>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset must have n ≥ 1 and p ≥ 1, got {}×{}",
                rows.nrows(),
                rows.ncols()
            )));
        }
        if let Some(i) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "dataset row {} column {}",
                i / rows.ncols() + 1,
                i % rows.ncols() + 1
            )));
        }
        Ok(Self {
            rows,
            name: name.into(),
            intrinsic_dim: None,
        })
    }

    pub fn with_intrinsic_dim(mut self, r: usize) -> Self {
        self.intrinsic_dim = Some(r);
        self
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn into_rows(self) -> Array2<f64> {
        self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    /// Rows at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Array2<f64> {
        self.rows.select(Axis(0), indices)
    }

    /// Per-column z-scoring. Returns the transformed data with the column
    /// means and standard deviations used; constant columns are only
    /// centred.
    pub fn standardized(&self) -> (Dataset, Array1<f64>, Array1<f64>) {
        let mean = self.rows.mean_axis(Axis(0)).expect("n ≥ 1");
        let std = self.rows.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        let rows = (&self.rows - &mean) / &std;
        let out = Dataset {
            rows,
            name: self.name.clone(),
            intrinsic_dim: self.intrinsic_dim,
        };
        (out, mean, std)
    }
}

/// The three toy manifolds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    SwissRoll,
    SCurve,
    Hyperplane,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [
        DatasetKind::SwissRoll,
        DatasetKind::SCurve,
        DatasetKind::Hyperplane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::SwissRoll => "swiss_roll",
            DatasetKind::SCurve => "s_curve",
            DatasetKind::Hyperplane => "hyperplane",
        }
    }

    /// Ambient dimension `p`.
    pub fn ambient_dim(self) -> usize {
        match self {
            DatasetKind::SwissRoll => 2,
            DatasetKind::SCurve => 3,
            DatasetKind::Hyperplane => 5,
        }
    }

    /// Intrinsic dimension `r` of the manifold.
    pub fn intrinsic_dim(self) -> usize {
        match self {
            DatasetKind::SwissRoll => 1,
            DatasetKind::SCurve => 2,
            DatasetKind::Hyperplane => 4,
        }
    }

    /// Latent dimension `d` used by the toy architectures.
    pub fn latent_dim(self) -> usize {
        match self {
            DatasetKind::SwissRoll | DatasetKind::SCurve => 5,
            DatasetKind::Hyperplane => 10,
        }
    }

    pub fn generate(self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        match self {
            DatasetKind::SwissRoll => gen_swiss_roll(n, rng),
            DatasetKind::SCurve => gen_s_curve(n, rng),
            DatasetKind::Hyperplane => gen_hyperplane(n, rng),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swiss_roll" => Ok(DatasetKind::SwissRoll),
            "s_curve" => Ok(DatasetKind::SCurve),
            "hyperplane" => Ok(DatasetKind::Hyperplane),
            other => Err(Error::UnknownDataset(other.to_string())),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

/// `sign` with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// S-curve point for `U = u`, `V = v`.
pub fn s_curve_point(u: f64, v: f64) -> [f64; 3] {
    let t = 3.0 * PI * (u - 0.5);
    [t.sin(), 2.0 * v, sign(t) * t.cos()]
}

/// Swiss-roll point for `U = u`: `V = 3π(1 + 2u)/2`, `(V cos V, V sin V)`.
pub fn swiss_roll_point(u: f64) -> [f64; 2] {
    let v = 3.0 * PI * (1.0 + 2.0 * u) / 2.0;
    [v * v.cos(), v * v.sin()]
}

/// Hyperplane point: `(x1, x2, x3, x4, x1 + x2 + x3 + x4²)`.
pub fn hyperplane_point(x: [f64; 4]) -> [f64; 5] {
    [x[0], x[1], x[2], x[3], x[0] + x[1] + x[2] + x[3] * x[3]]
}

/// S-curve with `U ~ Unif(0, 1)`, `V ~ N(0, 1)`; `p = 3`, `r = 2`.
pub fn gen_s_curve(n: usize, rng: &mut Rng) -> Result<Dataset> {
    check_n(n)?;
    let mut rows = Array2::zeros((n, 3));
    for mut row in rows.axis_iter_mut(Axis(0)) {
        let u: f64 = rng.random();
        let v: f64 = StandardNormal.sample(rng);
        row.assign(&Array1::from(s_curve_point(u, v).to_vec()));
    }
    Ok(Dataset::new(rows, "s_curve")?.with_intrinsic_dim(2))
}

/// Swiss roll with `U ~ N(0, 1)`; `p = 2`, `r = 1`.
pub fn gen_swiss_roll(n: usize, rng: &mut Rng) -> Result<Dataset> {
    check_n(n)?;
    let mut rows = Array2::zeros((n, 2));
    for mut row in rows.axis_iter_mut(Axis(0)) {
        let u: f64 = StandardNormal.sample(rng);
        row.assign(&Array1::from(swiss_roll_point(u).to_vec()));
    }
    Ok(Dataset::new(rows, "swiss_roll")?.with_intrinsic_dim(1))
}

/// Hyperplane with `X1..X4 ~ N(0, 1)`; `p = 5`, `r = 4`.
pub fn gen_hyperplane(n: usize, rng: &mut Rng) -> Result<Dataset> {
    check_n(n)?;
    let mut rows = Array2::zeros((n, 5));
    for mut row in rows.axis_iter_mut(Axis(0)) {
        let x: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        row.assign(&Array1::from(hyperplane_point(x).to_vec()));
    }
    Ok(Dataset::new(rows, "hyperplane")?.with_intrinsic_dim(4))
}

/// Writes `x1,…,xp` header plus one line per row, LF-terminated. Floats use
/// Rust's shortest round-trip formatting.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(dataset.n() * dataset.p() * 20);
    let header: Vec<String> = (1..=dataset.p()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in dataset.rows().rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Reads a CSV with one header row and float columns.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |line: usize, msg: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "empty file".into()))?;
    let p = header.split(',').count();
    if header.trim().is_empty() {
        return Err(csv_err(1, "empty header".into()));
    }

    let mut values = Vec::new();
    let mut n = 0;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p {
            return Err(csv_err(
                line_no,
                format!("expected {p} fields, found {}", fields.len()),
            ));
        }
        for field in fields {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| csv_err(line_no, format!("not a number: `{field}`")))?;
            if !v.is_finite() {
                return Err(csv_err(line_no, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(csv_err(1, "no data rows".into()));
    }
    let rows = Array2::from_shape_vec((n, p), values).expect("row lengths checked");
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(rows, name)
}

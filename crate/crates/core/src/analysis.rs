//! PCA of the emotion space: head rows and sample embeddings projected onto
//! the leading components, exported as CSV and an optional SVG scatter.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::EmotionEmbedding;
use crate::mapping::{variable_positions, MultiwayMapper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// Orthonormal rows, `[k × d]`.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component (denominator `n − 1`), nonincreasing.
    pub explained_variance: Vec<f64>,
    /// Total variance of the fit points.
    pub total_variance: f64,
}

impl PcaTransform {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Share of the total variance along each component.
    pub fn explained_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.k() {
            return Err(Error::Shape {
                expected: self.k(),
                got: coords.len(),
            });
        }
        let mut x = self.mean.clone();
        for (c, comp) in coords.iter().zip(&self.components) {
            for (xi, ci) in x.iter_mut().zip(comp) {
                *xi += c * ci;
            }
        }
        Ok(x)
    }
}

/// Principal components of the centered data.
pub fn pca_fit(points: &[Vec<f64>], k: usize) -> Result<PcaTransform> {
    let n = points.len();
    if n < 2 {
        return Err(Error::config(format!("PCA needs at least 2 points, got {n}")));
    }
    let d = points[0].len();
    for p in points {
        if p.len() != d {
            return Err(Error::Shape {
                expected: d,
                got: p.len(),
            });
        }
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::config(format!(
            "k = {k} components requested from {n} points in {d} dimensions (at most {})",
            (n - 1).min(d)
        )));
    }
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| points[i][j] - mean[j]);
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;

    // Eigendecomposition of the smaller of C·Cᵀ and Cᵀ·C. nalgebra's SVD
    // loses about six digits on rank-deficient input (8 head rows in R^100
    // reconstruct only to ~1e-5), the eigensolver does not.
    let wide = n <= d;
    let gram = if wide {
        &centered * centered.transpose()
    } else {
        centered.transpose() * &centered
    };
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let floor = eig.eigenvalues.amax() * 1e-12;

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let lambda = eig.eigenvalues[i].max(0.0);
        let mut row: Vec<f64> = if !wide {
            eig.eigenvectors.column(i).iter().copied().collect()
        } else if lambda > floor {
            (centered.transpose() * eig.eigenvectors.column(i) / lambda.sqrt())
                .iter()
                .copied()
                .collect()
        } else {
            // no variance left: any unit direction orthogonal to the rest
            complete_basis(&components, d)
        };
        let pivot = row
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > row[best].abs() { j } else { best });
        if row[pivot] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(row);
        explained_variance.push(if lambda > floor { lambda / (n - 1) as f64 } else { 0.0 });
    }
    Ok(PcaTransform {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

/// First standard basis vector, Gram-Schmidt'ed against `basis`, with
/// enough length left to normalize.
fn complete_basis(basis: &[Vec<f64>], d: usize) -> Vec<f64> {
    for j in 0..d {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
    unreachable!("fewer than d basis vectors always leave a free direction")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Variable,
    Sample,
}

impl RowKind {
    fn as_str(self) -> &'static str {
        match self {
            RowKind::Variable => "variable",
            RowKind::Sample => "sample",
        }
    }
}

/// An embedding to place in the space.
#[derive(Clone, Debug)]
pub struct Sample {
    pub tag: String,
    pub language: String,
    pub dataset: String,
    pub embedding: EmotionEmbedding,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceRow {
    pub tag: String,
    pub language: String,
    /// Format name for variable rows, dataset id for samples.
    pub dataset: String,
    pub kind: RowKind,
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTable {
    pub k: usize,
    pub rows: Vec<SpaceRow>,
}

/// Which points the components are fitted on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitPopulation {
    #[default]
    Variables,
    Samples,
}

/// Fit on head rows (or on the samples) of the mapper's space.
pub fn fit_space(
    mapper: &MultiwayMapper,
    samples: &[Sample],
    k: usize,
    population: FitPopulation,
) -> Result<PcaTransform> {
    let points: Vec<Vec<f64>> = match population {
        FitPopulation::Variables => variable_positions(mapper)
            .into_iter()
            .map(|p| p.position.into_coords())
            .collect(),
        FitPopulation::Samples => samples.iter().map(|s| s.embedding.coords().to_vec()).collect(),
    };
    pca_fit(&points, k)
}

/// Variable positions first, in head order, then the samples.
pub fn project_space(t: &PcaTransform, mapper: &MultiwayMapper, samples: &[Sample]) -> Result<SpaceTable> {
    let mut rows = Vec::new();
    for p in variable_positions(mapper) {
        rows.push(SpaceRow {
            coords: t.project(p.position.coords())?,
            tag: p.variable,
            language: String::new(),
            dataset: p.format,
            kind: RowKind::Variable,
        });
    }
    for s in samples {
        rows.push(SpaceRow {
            coords: t.project(s.embedding.coords())?,
            tag: s.tag.clone(),
            language: s.language.clone(),
            dataset: s.dataset.clone(),
            kind: RowKind::Sample,
        });
    }
    Ok(SpaceTable { k: t.k(), rows })
}

/// CSV `tag,language,kind,pc1..pck` at six decimals, plus an SVG scatter
/// of the first two components when `scatter` is given.
pub fn export_space(table: &SpaceTable, path: impl AsRef<Path>, scatter: Option<&Path>) -> Result<()> {
    let path = path.as_ref();
    if table.rows.is_empty() {
        return Err(Error::Usage("nothing to export".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let mut header = vec!["tag".to_owned(), "language".into(), "kind".into()];
    header.extend((1..=table.k).map(|i| format!("pc{i}")));
    w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
    for r in &table.rows {
        let mut rec = vec![r.tag.clone(), r.language.clone(), r.kind.as_str().to_owned()];
        rec.extend(r.coords.iter().map(|c| format!("{c:.6}")));
        w.write_record(&rec).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    if let Some(svg) = scatter {
        fs::write(svg, render_svg(table)).map_err(|e| Error::io(svg, e))?;
    }
    Ok(())
}

/// One row of an exported CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub tag: String,
    pub language: String,
    pub kind: RowKind,
    pub coords: Vec<f64>,
}

pub fn read_space_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let kind = match rec.get(2) {
            Some("variable") => RowKind::Variable,
            Some("sample") => RowKind::Sample,
            other => return Err(bad(format!("unknown row kind {other:?}"))),
        };
        let coords = rec
            .iter()
            .skip(3)
            .map(|c| c.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        out.push(CsvRow {
            tag: rec[0].to_owned(),
            language: rec[1].to_owned(),
            kind,
            coords,
        });
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_svg(table: &SpaceTable) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 40.0;
    let xy = |r: &SpaceRow| (r.coords.first().copied().unwrap_or(0.0), r.coords.get(1).copied().unwrap_or(0.0));
    let extent = table
        .rows
        .iter()
        .map(|r| {
            let (x, y) = xy(r);
            x.abs().max(y.abs())
        })
        .fold(0.0, f64::max)
        .max(1e-12);
    let to_px = |v: f64, flip: bool| {
        let u = if flip { -v } else { v };
        SIZE / 2.0 + u / extent * (SIZE / 2.0 - PAD)
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let mid = SIZE / 2.0;
    let _ = writeln!(s, r##"<line x1="{PAD}" y1="{mid}" x2="{}" y2="{mid}" stroke="#bbb"/>"##, SIZE - PAD);
    let _ = writeln!(s, r##"<line x1="{mid}" y1="{PAD}" x2="{mid}" y2="{}" stroke="#bbb"/>"##, SIZE - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}">PC1</text>"#, SIZE - PAD, mid - 6.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">PC2</text>"#, mid + 6.0, PAD - 6.0);
    for r in table.rows.iter().filter(|r| r.kind == RowKind::Sample) {
        let (x, y) = xy(r);
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#7a9cc6"><title>{}</title></circle>"##,
            to_px(x, false),
            to_px(y, true),
            escape(&r.tag)
        );
    }
    for r in table.rows.iter().filter(|r| r.kind == RowKind::Variable) {
        let (x, y) = xy(r);
        let (px, py) = (to_px(x, false), to_px(y, true));
        let _ = writeln!(s, r##"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="#c0392b"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            px + 6.0,
            py - 6.0,
            escape(&r.tag)
        );
    }
    s.push_str("</svg>\n");
    s
}

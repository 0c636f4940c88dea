//! On-disk artifacts of an evaluation: CSV tables, PPM heatmaps and
//! per-patch class maps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ConfusionMatrix, EvalReport};
use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// One colour per class id; ids past the end wrap around.
pub const PALETTE: [[u8; 3]; 9] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [128, 128, 0],
];

const FILTERED: [u8; 3] = [40, 40, 40];
const MAP_CELL: usize = 8;
const HEAT_CELL: usize = 24;

/// `true/pred,0,1,..` header then one row per true class.
pub fn confusion_to_csv(cm: &ConfusionMatrix) -> String {
    let mut s = String::from("true/pred");
    for j in 0..cm.classes() {
        let _ = write!(s, ",{j}");
    }
    s.push('\n');
    for i in 0..cm.classes() {
        let _ = write!(s, "{i}");
        for &c in cm.row(i) {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
    }
    s
}

pub fn confusion_from_csv(text: &str) -> Result<ConfusionMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("confusion csv is empty".into()))?;
    let n = header.split(',').count().saturating_sub(1);
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or_default().trim();
            if label.parse::<usize>().ok() != Some(i) {
                return Err(Error::Parse(format!("row {i} is labeled {label:?}")));
            }
            let row: Vec<u64> = cells
                .map(|c| {
                    c.trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad count {c:?} in row {i}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!("row {i} has {} cells, expected {n}", row.len())));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.len() != n {
        return Err(Error::Parse(format!("{} rows for {n} classes", rows.len())));
    }
    ConfusionMatrix::from_rows(rows)
}

fn ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Row-normalized confusion heatmap: white for 0, dark blue for 1.
pub fn heatmap_ppm(cm: &ConfusionMatrix) -> Vec<u8> {
    let n = cm.classes();
    let side = n * HEAT_CELL;
    let rates = cm.normalized();
    let mut rgb = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            let r = rates[y / HEAT_CELL][x / HEAT_CELL];
            let shade = |lo: f64| (255.0 - (255.0 - lo) * r).round() as u8;
            rgb.extend_from_slice(&[shade(8.0), shade(48.0), shade(107.0)]);
        }
    }
    ppm(side, side, &rgb)
}

/// Predicted class per grid cell of one frame/offset; filtered cells are
/// dark grey.
pub fn patch_map_ppm(report: &EvalReport, frame_index: usize, truth: usize) -> Result<Vec<u8>> {
    let result = report
        .result(frame_index, truth)
        .ok_or_else(|| Error::invalid(format!("no result for frame {frame_index}, class {truth}")))?;
    let (rows, cols) = (report.grid.rows, report.grid.cols);
    let mut cells = vec![FILTERED; rows * cols];
    for (&origin, &pred) in result.origins.iter().zip(&result.predictions) {
        let (i, j) = report.grid.cell_of(origin);
        cells[i * cols + j] = PALETTE[pred % PALETTE.len()];
    }
    let (w, h) = (cols * MAP_CELL, rows * MAP_CELL);
    let mut rgb = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            rgb.extend_from_slice(&cells[(y / MAP_CELL) * cols + x / MAP_CELL]);
        }
    }
    Ok(ppm(w, h, &rgb))
}

/// Fusion window sizes across, accuracy below.
fn temporal_csv(report: &EvalReport) -> Result<String> {
    let mut s = String::from("k");
    for t in &report.temporal {
        let _ = write!(s, ",{}", t.k);
    }
    s.push_str("\nmean_diag_accuracy");
    for t in &report.temporal {
        let _ = write!(s, ",{:.2}", t.accuracy()?);
    }
    s.push_str("\nundecided");
    for t in &report.temporal {
        let _ = write!(s, ",{}", t.undecided);
    }
    s.push('\n');
    Ok(s)
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

/// Writes every artifact of `report` into `dir` and returns the summary.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<KeyValues> {
    let dir = dir.as_ref();
    if report.results.is_empty() || report.patch.total() == 0 {
        return Err(Error::EmptyDataset("evaluation produced no predictions".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut summary = KeyValues::new();
    summary.push("frames", report.frames);
    summary.push("patches", report.patch.total());
    summary.push(
        "patch_mean_diag_accuracy",
        format!("{:.4}", report.patch.mean_diagonal_accuracy()?),
    );
    summary.push("patch_raw_accuracy", format!("{:.4}", report.patch.raw_accuracy()?));
    if report.image.total() > 0 {
        summary.push(
            "image_mean_diag_accuracy",
            format!("{:.4}", report.image.mean_diagonal_accuracy()?),
        );
        summary.push("image_raw_accuracy", format!("{:.4}", report.image.raw_accuracy()?));
    }
    summary.push("undecided", report.undecided);
    for t in &report.temporal {
        if t.confusion.total() > 0 {
            summary.push(&format!("temporal_k{}_accuracy", t.k), format!("{:.4}", t.accuracy()?));
        }
    }

    write(dir.join("summary.txt"), summary.to_text())?;
    write(dir.join("patch_confusion.csv"), confusion_to_csv(&report.patch))?;
    write(dir.join("image_confusion.csv"), confusion_to_csv(&report.image))?;
    write(dir.join("patch_confusion.ppm"), heatmap_ppm(&report.patch))?;
    write(dir.join("image_confusion.ppm"), heatmap_ppm(&report.image))?;
    if !report.temporal.is_empty() {
        write(dir.join("temporal.csv"), temporal_csv(report)?)?;
    }
    let first = report.results[0].frame_index;
    for truth in 0..report.patch.classes() {
        write(
            dir.join(format!("patch_map_f{first}_c{truth}.ppm")),
            patch_map_ppm(report, first, truth)?,
        )?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub channels: String,
    pub filters: [usize; 3],
    pub kernel_size: usize,
    pub patch_accuracy: f64,
    pub image_accuracy: f64,
}

pub fn write_ablation_csv(rows: &[AblationRow], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("model,channels,filters,kernel,patch_mean_diag,image_mean_diag\n");
    for r in rows {
        let [a, b, c] = r.filters;
        let _ = writeln!(
            s,
            "{},{},{a}-{b}-{c},{},{:.2},{:.2}",
            r.name, r.channels, r.kernel_size, r.patch_accuracy, r.image_accuracy
        );
    }
    write(path.as_ref().to_path_buf(), s)
}

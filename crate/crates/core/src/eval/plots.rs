//! Plot data: line-profile and box-plot CSVs, 8-bit binary graymaps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{ArrayView2, Axis};

use super::metrics::line_profile;
use super::pipeline::{fmt_num, Report, STATS_HEADER};
use crate::error::{Error, Result};

/// Binary PGM (P5) bytes of already-quantized pixels.
fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn quantize(frame: ArrayView2<f64>, lo: f64, hi: f64) -> Vec<u8> {
    let span = hi - lo;
    frame
        .iter()
        .map(|&v| {
            if span > 0.0 {
                (255.0 * ((v - lo) / span).clamp(0.0, 1.0)).round() as u8
            } else if hi > 0.0 {
                255
            } else {
                0
            }
        })
        .collect()
}

/// Density frame with `[0, max]` mapped linearly onto `[0, 255]`.
pub fn density_pgm(frame: ArrayView2<f64>) -> Vec<u8> {
    let max = frame.iter().copied().fold(0.0, f64::max);
    let (h, w) = frame.dim();
    let lo = if max > 0.0 { 0.0 } else { max };
    pgm(w, h, &quantize(frame, lo, max))
}

/// Radiograph shown as `ln(max(m, eps))`, rescaled from its range onto `[0, 255]`.
pub fn radiograph_pgm(frame: ArrayView2<f64>, clamp_eps: f64) -> Vec<u8> {
    let logs = frame.mapv(|m| m.max(clamp_eps).ln());
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (h, w) = frame.dim();
    let px = if hi > lo { quantize(logs.view(), lo, hi) } else { vec![128; h * w] };
    pgm(w, h, &px)
}

/// `x,clean,<method>...` through the center row of frame `t`.
pub fn profile_csv(report: &Report, t: usize) -> Result<String> {
    let sc = report
        .showcase
        .as_ref()
        .ok_or_else(|| Error::Invalid("report has no showcase series".into()))?;
    let clean = line_profile(sc.clean.frames.index_axis(Axis(0), t), &sc.clean.grid);
    let others: Vec<Vec<f64>> = sc
        .estimates
        .iter()
        .map(|(_, s)| line_profile(s.frames.index_axis(Axis(0), t), &s.grid).values)
        .collect();
    let mut out = String::from("x,clean");
    for (m, _) in &sc.estimates {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for j in 0..clean.x.len() {
        let mut cells = vec![fmt_num(clean.x[j]), fmt_num(clean.values[j])];
        cells.extend(others.iter().map(|o| fmt_num(o[j])));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// `method,n,mean,std,min,q1,median,q3,max` of one metric.
pub fn boxplot_csv(report: &Report, metric: &str) -> Result<String> {
    let mut out = format!("method,n,{STATS_HEADER}\n");
    for s in &report.summaries {
        let st = match metric {
            "nl2" => s.nl2,
            "nl1" => s.nl1,
            "rel_mass" => s.rel_mass,
            _ => return Err(Error::Invalid(format!("unknown metric `{metric}`"))),
        };
        let cells = [st.mean, st.std, st.min, st.q1, st.median, st.q3, st.max].map(fmt_num).join(",");
        let _ = writeln!(out, "{},{},{}", s.method.name(), st.n, cells);
    }
    Ok(out)
}

/// Writes profile and box-plot CSVs and graymaps of the showcase series.
pub fn emit_plots(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    for metric in ["nl2", "nl1", "rel_mass"] {
        put(format!("boxplot_{metric}.csv"), boxplot_csv(report, metric)?.into_bytes())?;
    }
    if let Some(sc) = &report.showcase {
        for t in 0..sc.clean.n_frames() {
            put(format!("profile_t{t}.csv"), profile_csv(report, t)?.into_bytes())?;
            put(format!("clean_t{t}.pgm"), density_pgm(sc.clean.frames.index_axis(Axis(0), t)))?;
            put(
                format!("radiograph_t{t}.pgm"),
                radiograph_pgm(sc.measured.index_axis(Axis(0), t), sc.clamp_eps),
            )?;
            for (m, s) in &sc.estimates {
                put(format!("{}_t{t}.pgm", m.file_stem()), density_pgm(s.frames.index_axis(Axis(0), t)))?;
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn constant_frame_is_one_gray_level() {
        let f = Array2::from_elem((4, 6), 0.3);
        let b = density_pgm(f.view());
        assert!(b.starts_with(b"P5\n6 4\n255\n"));
        let px = &b[b.len() - 24..];
        assert!(px.iter().all(|&p| p == px[0]));
        let r = radiograph_pgm(f.view(), 1e-6);
        assert!(r[r.len() - 24..].iter().all(|&p| p == 128));
    }

    #[test]
    fn density_mapping_is_linear_from_zero() {
        let f = Array2::from_shape_vec((1, 3), vec![0.0, 0.5, 1.0]).unwrap();
        let b = density_pgm(f.view());
        assert_eq!(&b[b.len() - 3..], &[0, 128, 255]);
    }
}

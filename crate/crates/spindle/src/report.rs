//! Deterministic artifact writers: CSV, JSON, and simple SVG. All floats go
//! through one formatter so identical runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::csf::LoopState;
use crate::surface::{ConeSurface, SurfPoint};

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalize -0.0
        "0.000000000000e0".to_string()
    } else {
        format!("{x:.12e}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = serde_json::to_string_pretty(value).expect("serializable report");
    out.push('\n');
    fs::write(path, out)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Loops drawn in the (r cos theta-like) azimuthal projection of each
/// hemisphere side by side; good enough to eyeball runs.
pub fn write_loops_svg(path: &Path, surface: &ConeSurface, loops: &[&LoopState]) -> std::io::Result<()> {
    let l = surface.len();
    let scale = 180.0 / l;
    let mut body = String::new();
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
    for (k, lp) in loops.iter().enumerate() {
        let pts: String = lp
            .vertices
            .iter()
            .map(|v| {
                let (x, y) = project(*v, l, scale);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        body.push_str(&format!(
            "<polygon points=\"{pts}\" fill=\"none\" stroke=\"{}\" stroke-width=\"0.8\"/>\n",
            colors[k % colors.len()]
        ));
    }
    write_svg(path, &body)
}

pub fn write_points_svg(
    path: &Path,
    surface: &ConeSurface,
    orbits: &[(Vec<SurfPoint>, &str)],
) -> std::io::Result<()> {
    let l = surface.len();
    let scale = 180.0 / l;
    let mut body = String::new();
    for (pts, color) in orbits {
        for p in pts {
            let (x, y) = project(*p, l, scale);
            body.push_str(&format!(
                "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"1.2\" fill=\"{color}\"/>\n"
            ));
        }
    }
    write_svg(path, &body)
}

fn project(v: SurfPoint, l: f64, scale: f64) -> (f64, f64) {
    // north hemisphere on the left disc, south on the right
    if v.r < 0.5 * l {
        (200.0 + scale * v.r * v.theta.cos(), 200.0 + scale * v.r * v.theta.sin())
    } else {
        let rr = l - v.r;
        (600.0 + scale * rr * v.theta.cos(), 200.0 + scale * rr * v.theta.sin())
    }
}

fn write_svg(path: &Path, body: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(
        path,
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 400\">\n\
             <circle cx=\"200\" cy=\"200\" r=\"185\" fill=\"none\" stroke=\"#999\"/>\n\
             <circle cx=\"600\" cy=\"200\" r=\"185\" fill=\"none\" stroke=\"#999\"/>\n\
             {body}</svg>\n"
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_stable() {
        assert_eq!(fmt_f64(0.0), fmt_f64(-0.0));
        assert_eq!(fmt_f64(1.0 / 3.0), "3.333333333333e-1");
        assert_eq!(fmt_f64(-2.5e-11), "-2.500000000000e-11");
    }
}

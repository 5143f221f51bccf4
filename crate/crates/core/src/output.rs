//! Report, trajectory and plot emission.
//!
//! Reports are JSON documents mirroring the library types. Trajectories go
//! to CSV with one row per agent per sample (`t,agent,x,y[,z],err_norm`).
//! Plots are self-contained SVG files: one polyline per agent with a circle
//! at the start and a square at the final position; 3-D runs emit xy and xz
//! projections as two files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{Dim, Framework};
use crate::henneberg::HennebergCertificate;
use crate::rigidity::RigidityReport;
use crate::sim::{AmbiguityReport, ControllerKind, TerminalStatus, Trajectory};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Henneberg certificate plus the global-uniqueness verdict it supports.
/// Frameworks outside the construction are "unknown", not "ambiguous".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HennebergReport {
    pub certificate: HennebergCertificate,
    pub global_uniqueness: String,
}

impl HennebergReport {
    pub fn from_certificate(mut certificate: HennebergCertificate) -> Self {
        // 1-based vertex labels on the I/O surface.
        certificate.peel_order = certificate.peel_order.iter().map(|v| v + 1).collect();
        let global_uniqueness = if certificate.is_henneberg {
            "certified".to_string()
        } else {
            "unknown".to_string()
        };
        HennebergReport {
            certificate,
            global_uniqueness,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub controller: ControllerKind,
    pub terminal_status: TerminalStatus,
    pub steps_taken: usize,
    pub final_time: f64,
    pub final_error_norm: f64,
    pub energy_monotone: bool,
    pub tail_log_slope: Option<f64>,
    pub ambiguity: AmbiguityReport,
}

/// Top-level JSON report for one scenario run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub dim: usize,
    pub n: usize,
    pub classification: Vec<RigidityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub henneberg: Option<HennebergReport>,
    /// Agent pairs that must sense each other, 1-based.
    pub sensing_topology: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
}

impl RunReport {
    pub fn new(framework: &Framework, scenario: Option<String>) -> Self {
        RunReport {
            scenario,
            dim: framework.dim().as_usize(),
            n: framework.n(),
            classification: vec![],
            henneberg: None,
            sensing_topology: framework
                .graph()
                .sensing_topology()
                .into_iter()
                .map(|(i, j)| [i + 1, j + 1])
                .collect(),
            simulation: None,
        }
    }
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text).map_err(io_err(path))
}

/// CSV with header `t,agent,x,y[,z],err_norm`, agents 1-based.
pub fn write_trajectory_csv(
    trajectory: &Trajectory,
    dim: Dim,
    path: &Path,
) -> Result<(), OutputError> {
    let d = dim.as_usize();
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut out = std::io::BufWriter::new(file);
    let header = match dim {
        Dim::Two => "t,agent,x,y,err_norm",
        Dim::Three => "t,agent,x,y,z,err_norm",
    };
    writeln!(out, "{header}").map_err(io_err(path))?;
    for sample in &trajectory.samples {
        let n = sample.realization.len() / d;
        for agent in 0..n {
            let mut fields = vec![format!("{}", sample.t), format!("{}", agent + 1)];
            for a in 0..d {
                fields.push(format!("{}", sample.realization[d * agent + a]));
            }
            fields.push(format!("{}", sample.error_norm));
            writeln!(out, "{}", fields.join(",")).map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// At most this many polyline points per agent; long runs are strided down.
const SVG_MAX_POINTS: usize = 1500;

fn projected_tracks(
    trajectory: &Trajectory,
    d: usize,
    ax: usize,
    ay: usize,
) -> Vec<Vec<(f64, f64)>> {
    let n = trajectory.samples[0].realization.len() / d;
    let stride = (trajectory.samples.len() / SVG_MAX_POINTS).max(1);
    let mut tracks = vec![Vec::new(); n];
    for (idx, sample) in trajectory.samples.iter().enumerate() {
        if idx % stride != 0 && idx != trajectory.samples.len() - 1 {
            continue;
        }
        for (agent, track) in tracks.iter_mut().enumerate() {
            track.push((
                sample.realization[d * agent + ax],
                sample.realization[d * agent + ay],
            ));
        }
    }
    tracks
}

fn render_svg(tracks: &[Vec<(f64, f64)>], x_label: &str, y_label: &str) -> String {
    let size = 640.0;
    let margin = 40.0;
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for track in tracks {
        for &(x, y) in track {
            lo_x = lo_x.min(x);
            hi_x = hi_x.max(x);
            lo_y = lo_y.min(y);
            hi_y = hi_y.max(y);
        }
    }
    let span_x = (hi_x - lo_x).max(1e-9);
    let span_y = (hi_y - lo_y).max(1e-9);
    let span = span_x.max(span_y);
    let cx = 0.5 * (lo_x + hi_x);
    let cy = 0.5 * (lo_y + hi_y);
    let scale = (size - 2.0 * margin) / (1.1 * span);
    let map = |x: f64, y: f64| {
        (
            size / 2.0 + (x - cx) * scale,
            size / 2.0 - (y - cy) * scale,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"#444\">{x_label} vs {y_label}</text>\n",
        margin, margin - 16.0
    ));
    for (agent, track) in tracks.iter().enumerate() {
        let color = PALETTE[agent % PALETTE.len()];
        let points: Vec<String> = track
            .iter()
            .map(|&(x, y)| {
                let (px, py) = map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            points.join(" ")
        ));
        if let (Some(&first), Some(&last)) = (track.first(), track.last()) {
            let (sx, sy) = map(first.0, first.1);
            svg.push_str(&format!(
                "<circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"4\" fill=\"{color}\"/>\n"
            ));
            // Final position marker: an open square.
            let (ex, ey) = map(last.0, last.1);
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                ex - 5.0,
                ey - 5.0
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
                ex + 8.0,
                ey - 8.0,
                agent + 1
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write trajectory plots. 2-D runs produce `path`; 3-D runs produce the xy
/// and xz projections as `<stem>_xy.svg` and `<stem>_xz.svg`. Returns the
/// paths written.
pub fn write_trajectory_svg(
    trajectory: &Trajectory,
    dim: Dim,
    path: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    if trajectory.samples.is_empty() {
        return Ok(vec![]);
    }
    match dim {
        Dim::Two => {
            let tracks = projected_tracks(trajectory, 2, 0, 1);
            let svg = render_svg(&tracks, "x", "y");
            std::fs::write(path, svg).map_err(io_err(path))?;
            Ok(vec![path.to_path_buf()])
        }
        Dim::Three => {
            let stem = path.with_extension("");
            let stem = stem.to_string_lossy();
            let mut written = Vec::new();
            for (ax, ay, label) in [(0usize, 1usize, "xy"), (0, 2, "xz")] {
                let tracks = projected_tracks(trajectory, 3, ax, ay);
                let svg = render_svg(
                    &tracks,
                    "x",
                    if label == "xy" { "y" } else { "z" },
                );
                let out: PathBuf = format!("{stem}_{label}.svg").into();
                std::fs::write(&out, svg).map_err(io_err(&out))?;
                written.push(out);
            }
            Ok(written)
        }
    }
}

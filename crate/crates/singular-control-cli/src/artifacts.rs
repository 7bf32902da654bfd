//! CSV, SVG and manifest writers. All output is a pure function of the
//! effective configuration: full-precision decimal floats, no timestamps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use singular_control::sim::Trajectory;

/// 17 significant digits: round-trips every f64 exactly.
pub fn full(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutDir {
    root: PathBuf,
    outputs: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    /// Writes the effective config and the run manifest. Re-running with the
    /// same inputs reproduces every artifact byte for byte.
    pub fn finish(mut self, effective_config: &impl Serialize, seed: u64) -> anyhow::Result<()> {
        let config_text =
            toml::to_string_pretty(effective_config).context("serialize effective config")?;
        let digest = hex_digest(config_text.as_bytes());
        self.write("effective_config.toml", &config_text)?;
        let manifest = Manifest {
            config_digest: digest,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs.clone(),
        };
        let text = toml::to_string_pretty(&manifest).context("serialize manifest")?;
        let path = self.root.join("manifest.toml");
        std::fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest {
    config_digest: String,
    seed: u64,
    tool_version: String,
    outputs: Vec<String>,
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub const TRAJECTORY_HEADER: &str =
    "n,r_n,x_pre,x_post,y_pre,y_post,jump,cont_increment,H_bar,c_pre,c_bar";

/// Canonical trajectory export. `path_index` prefixes a `path` column for
/// concatenated multi-path files.
pub fn trajectory_csv(out: &mut String, tr: &Trajectory, path_index: Option<usize>) {
    if out.is_empty() {
        if path_index.is_some() {
            out.push_str("path,");
        }
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
    }
    for (n, rec) in tr.steps.iter().enumerate() {
        if let Some(p) = path_index {
            let _ = write!(out, "{p},");
        }
        let _ = writeln!(
            out,
            "{n},{},{},{},{},{},{},{},{},{},{}",
            full(tr.t0 + n as f64 * tr.dt),
            full(rec.pre.x),
            full(rec.post.x),
            full(rec.pre.y),
            full(rec.post.y),
            full(rec.jump),
            full(rec.cont_increment),
            full(rec.h_bar),
            full(rec.c_pre),
            full(rec.c_bar),
        );
    }
}

pub fn theta_history_csv(history: &[[f64; 3]]) -> String {
    let mut out = String::from("episode,theta1,theta2,theta3,implied_xhat\n");
    for (m, th) in history.iter().enumerate() {
        let _ = writeln!(
            out,
            "{m},{},{},{},{}",
            full(th[0]),
            full(th[1]),
            full(th[2]),
            full(th[2])
        );
    }
    out
}

/// Minimal deterministic SVG line chart: one polyline per series plus an
/// optional dashed horizontal reference line.
pub struct LineChart {
    pub title: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
    pub reference: Option<(String, f64)>,
}

impl LineChart {
    pub fn render(&self) -> String {
        const W: f64 = 720.0;
        const H: f64 = 440.0;
        const ML: f64 = 64.0;
        const MR: f64 = 24.0;
        const MT: f64 = 40.0;
        const MB: f64 = 48.0;
        let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for (_, pts) in &self.series {
            for &(x, y) in pts {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
        if let Some((_, y)) = self.reference {
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        if !xmin.is_finite() {
            xmin = 0.0;
            xmax = 1.0;
        }
        if xmax == xmin {
            xmax = xmin + 1.0;
        }
        if !ymin.is_finite() {
            ymin = 0.0;
            ymax = 1.0;
        }
        let pad = 0.05 * (ymax - ymin).max(1e-9);
        ymin -= pad;
        ymax += pad;

        let sx = |x: f64| ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
        let sy = |y: f64| H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
        );
        let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"24\" font-family=\"monospace\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
            W / 2.0,
            self.title
        );
        // axes
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            H - MB,
            W - MR,
            H - MB
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.2}\" stroke=\"black\"/>",
            H - MB
        );
        for k in 0..=4 {
            let fx = xmin + (xmax - xmin) * k as f64 / 4.0;
            let fy = ymin + (ymax - ymin) * k as f64 / 4.0;
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>",
                sx(fx),
                H - MB + 18.0,
                fx
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>",
                ML - 6.0,
                sy(fy) + 4.0,
                fy
            );
            let _ = writeln!(
                svg,
                "<line x1=\"{ML}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
                sy(fy),
                W - MR,
                sy(fy)
            );
        }
        if let Some((label, y)) = &self.reference {
            let _ = writeln!(
                svg,
                "<line x1=\"{ML}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>",
                sy(*y),
                W - MR,
                sy(*y)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{label}</text>",
                W - MR - 4.0,
                sy(*y) - 5.0
            );
        }
        for (idx, (label, pts)) in self.series.iter().enumerate() {
            let color = palette[idx % palette.len()];
            let mut d = String::new();
            for &(x, y) in pts {
                let _ = write!(d, "{:.2},{:.2} ", sx(x), sy(y));
            }
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                d.trim_end()
            );
            let ly = MT + 16.0 * idx as f64;
            let _ = writeln!(
                svg,
                "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                ML + 8.0,
                ML + 28.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\">{label}</text>",
                ML + 34.0,
                ly + 4.0
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

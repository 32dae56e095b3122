//! Curve exports for plotting: per-channel CSV tables and an SVG rendering
//! of the learned transformations, individual estimates in grey behind the
//! median in each channel's color.

use crate::colorspace::Channel;
use crate::error::{Error, Result};
use crate::transfer::TransformSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Write one `x,y` CSV per channel at grid resolution. Returns the paths,
/// named `<stem>_<channel>.csv`.
pub fn write_channel_csvs(
    ts: &TransformSet,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut paths = Vec::with_capacity(3);
    for channel in Channel::ALL {
        let t = ts.channel(channel);
        let mut body = String::from("x,y\n");
        for (k, &y) in t.outputs().iter().enumerate() {
            // Shortest round-trip float formatting.
            writeln!(body, "{},{}", t.grid_x(k), y).expect("string write");
        }
        let path = dir.join(format!("{stem}_{channel}.csv"));
        std::fs::write(&path, body).map_err(|source| Error::FileWrite {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

const PANEL: f64 = 280.0;
const MARGIN: f64 = 40.0;
const GAP: f64 = 24.0;

fn stroke_color(channel: Channel) -> &'static str {
    match channel {
        Channel::Cyan => "#008b9e",
        Channel::Magenta => "#c2187c",
        Channel::Yellow => "#c99a00",
    }
}

fn polyline(points: &str, stroke: &str, width: f64, opacity: f64) -> String {
    format!(
        "  <polyline points=\"{points}\" fill=\"none\" stroke=\"{stroke}\" \
         stroke-width=\"{width}\" stroke-opacity=\"{opacity}\"/>\n"
    )
}

fn curve_points(outputs: &[f64], x0: f64, y0: f64) -> String {
    let g = (outputs.len() - 1) as f64;
    let mut pts = String::new();
    for (k, &y) in outputs.iter().enumerate() {
        let px = x0 + k as f64 / g * PANEL;
        let py = y0 + (1.0 - y) * PANEL;
        let _ = write!(pts, "{px:.2},{py:.2} ");
    }
    pts.trim_end().to_string()
}

/// Render all three channels side by side. `individuals` draw as thin grey
/// curves behind the median; pass an empty slice when only the median is
/// available.
pub fn render_svg(median: &TransformSet, individuals: &[TransformSet]) -> String {
    let width = MARGIN * 2.0 + PANEL * 3.0 + GAP * 2.0;
    let height = MARGIN * 2.0 + PANEL;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (i, channel) in Channel::ALL.into_iter().enumerate() {
        let x0 = MARGIN + i as f64 * (PANEL + GAP);
        let y0 = MARGIN;
        // Frame and identity diagonal.
        let _ = writeln!(
            svg,
            "  <rect x=\"{x0}\" y=\"{y0}\" width=\"{PANEL}\" height=\"{PANEL}\" \
             fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>"
        );
        svg.push_str(&polyline(
            &format!("{:.2},{:.2} {:.2},{:.2}", x0, y0 + PANEL, x0 + PANEL, y0),
            "#999",
            0.8,
            0.8,
        ));
        for est in individuals {
            svg.push_str(&polyline(
                &curve_points(est.channel(channel).outputs(), x0, y0),
                "#aaaaaa",
                0.8,
                0.55,
            ));
        }
        svg.push_str(&polyline(
            &curve_points(median.channel(channel).outputs(), x0, y0),
            stroke_color(channel),
            2.2,
            1.0,
        ));
        let label_x = x0 + PANEL / 2.0;
        let label_y = y0 - 10.0;
        let _ = writeln!(
            svg,
            "  <text x=\"{label_x}\" y=\"{label_y}\" text-anchor=\"middle\" \
             font-family=\"sans-serif\" font-size=\"14\">{channel}</text>"
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(
    median: &TransformSet,
    individuals: &[TransformSet],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(median, individuals)).map_err(|source| Error::FileWrite {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn csv_values_round_trip_through_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let ts = TransformSet::from_channel_fns(
            16,
            [&|x: f64| x.powf(0.7), &|x: f64| x, &|x: f64| x * x],
            BTreeMap::new(),
        )
        .unwrap();
        let paths = write_channel_csvs(&ts, dir.path(), "curve").unwrap();
        assert_eq!(paths.len(), 3);
        for (path, channel) in paths.iter().zip(Channel::ALL) {
            let body = std::fs::read_to_string(path).unwrap();
            let mut lines = body.lines();
            assert_eq!(lines.next(), Some("x,y"));
            for (k, line) in lines.enumerate() {
                let (x, y) = line.split_once(',').unwrap();
                let t = ts.channel(channel);
                assert_eq!(x.parse::<f64>().unwrap().to_bits(), t.grid_x(k).to_bits());
                assert_eq!(
                    y.parse::<f64>().unwrap().to_bits(),
                    t.outputs()[k].to_bits()
                );
            }
        }
    }

    #[test]
    fn svg_contains_grey_estimates_and_colored_medians() {
        let median = TransformSet::identity(8);
        let individuals = vec![TransformSet::from_channel_fns(
            8,
            [&|x: f64| x.powf(0.5), &|x: f64| x, &|x: f64| x],
            BTreeMap::new(),
        )
        .unwrap()];
        let svg = render_svg(&median, &individuals);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("#aaaaaa"));
        for channel in Channel::ALL {
            assert!(svg.contains(stroke_color(channel)));
            assert!(svg.contains(&format!(">{channel}<")));
        }
        // Median-only rendering drops the grey layer.
        let bare = render_svg(&median, &[]);
        assert!(!bare.contains("#aaaaaa"));
    }
}

//! Output files: atomic writes, SHA-256 digests, CSV and JSON-lines tables,
//! and small SVG renderings (heat maps and labelled point sets). Every
//! table carries the inputs hash of the run that produced it.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A CSV table whose first line is `# inputs_hash=<hash>`.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(inputs_hash: &str, header: &[&str]) -> Self {
        Csv { text: format!("# inputs_hash={inputs_hash}\n{}\n", header.join(",")), columns: header.len() }
    }

    /// Appends one row; values use the shortest round-trip representation.
    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// Appends a row with a leading text label.
    pub fn labelled_row(&mut self, label: &str, values: &[f64]) {
        debug_assert_eq!(values.len() + 1, self.columns);
        self.text.push_str(label);
        for v in values {
            let _ = write!(self.text, ",{v}");
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// JSON-lines text: one serialized record per line, each tagged with the inputs hash.
pub fn jsonl<T: Serialize>(inputs_hash: &str, records: &[T]) -> Result<Vec<u8>> {
    let mut out = String::new();
    for r in records {
        let mut v = serde_json::to_value(r).map_err(|e| Error::Io(e.to_string()))?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("inputs_hash".into(), serde_json::Value::String(inputs_hash.into()));
        }
        out.push_str(&v.to_string());
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// Diverging blue-white-red color for `v` in `[-1, 1]`.
fn diverging(v: f64) -> (u8, u8, u8) {
    let v = v.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 * c).round() as u8;
    if v >= 0.0 {
        (255, fade(1.0 - v), fade(1.0 - v))
    } else {
        (fade(1.0 + v), fade(1.0 + v), 255)
    }
}

fn svg_open(inputs_hash: &str, title: &str, w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <!-- inputs_hash={inputs_hash} -->\n<title>{title}</title>\n\
         <text x=\"8\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">{title}</text>\n"
    )
}

/// Heat map of `values[i * ny + j]` at `(x_i, y_j)` over `bbox = [x0, x1, y0, y1]`,
/// scaled symmetrically by the largest magnitude. `NaN` cells are left blank.
pub fn svg_heatmap(inputs_hash: &str, title: &str, bbox: [f64; 4], nx: usize, ny: usize, values: &[f64]) -> String {
    let (pw, ph) = (480.0, 480.0);
    let (ox, oy) = (40.0, 30.0);
    let scale = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let (cw, chh) = (pw / nx as f64, ph / ny as f64);
    let mut s = svg_open(inputs_hash, title, pw + 2.0 * ox, ph + 2.0 * oy);
    for i in 0..nx {
        for j in 0..ny {
            let v = values[i * ny + j];
            if !v.is_finite() {
                continue;
            }
            let (r, g, b) = diverging(v / scale);
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>",
                ox + i as f64 * cw,
                oy + ph - (j + 1) as f64 * chh,
                cw + 0.05,
                chh + 0.05
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{ox}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\">x: [{}, {}]  y: [{}, {}]  max |v| = {:.3e}</text>",
        oy + ph + 20.0,
        bbox[0],
        bbox[1],
        bbox[2],
        bbox[3],
        scale
    );
    s.push_str("</svg>\n");
    s
}

/// Labelled points in the box `bbox` with one color per class, plus optional
/// line segments `(x0, y0, x1, y1)`.
pub fn svg_points(inputs_hash: &str, title: &str, bbox: [f64; 4], points: &[([f64; 2], usize)], palette: &[(&str, &str)], segments: &[[f64; 4]]) -> String {
    let (pw, ph) = (480.0, 480.0);
    let (ox, oy) = (40.0, 30.0);
    let px = |x: f64| ox + (x - bbox[0]) / (bbox[1] - bbox[0]) * pw;
    let py = |y: f64| oy + ph - (y - bbox[2]) / (bbox[3] - bbox[2]) * ph;
    let mut s = svg_open(inputs_hash, title, pw + 2.0 * ox, ph + 2.0 * oy + 20.0 * palette.len() as f64);
    for (p, class) in points {
        let color = palette.get(*class).map(|c| c.1).unwrap_or("black");
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>", px(p[0]), py(p[1]));
    }
    for seg in segments {
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>",
            px(seg[0]),
            py(seg[1]),
            px(seg[2]),
            py(seg[3])
        );
    }
    for (k, (label, color)) in palette.iter().enumerate() {
        let y = oy + ph + 24.0 + 18.0 * k as f64;
        let _ = writeln!(s, "<circle cx=\"{}\" cy=\"{y}\" r=\"5\" fill=\"{color}\"/>", ox + 5.0);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>", ox + 16.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("diffract-export-{}", std::process::id()));
        let p = dir.join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let leftovers = std::fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("abc", &["x", "y"]);
        c.row(&[1.0, 0.5]);
        c.labelled_row("p", &[2.0]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "# inputs_hash=abc\nx,y\n1,0.5\np,2\n");
    }

    #[test]
    fn jsonl_tags_records() {
        #[derive(Serialize)]
        struct R {
            v: f64,
        }
        let text = String::from_utf8(jsonl("h", &[R { v: 1.5 }]).unwrap()).unwrap();
        assert_eq!(text, "{\"inputs_hash\":\"h\",\"v\":1.5}\n");
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn heatmap_skips_nan_cells() {
        let s = svg_heatmap("h", "t", [0.0, 1.0, 0.0, 1.0], 2, 2, &[1.0, f64::NAN, -1.0, 0.0]);
        assert_eq!(s.matches("<rect").count(), 3);
        assert!(s.contains("inputs_hash=h"));
    }
}

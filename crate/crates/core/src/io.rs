//! File formats: PGM/PNG images, skeleton and parameter documents, tables.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{Colony, EnergyParams};
use crate::error::{Error, Result};
use crate::geometry::{Contour, Point2, Skeleton, SkeletonNode};
use crate::image::ImageGrid;
use crate::optimizer::OptimizeOptions;
use crate::optimizer::OptimizeTrace;

pub const SKELETON_FORMAT_VERSION: u32 = 1;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a PGM (P2 or P5, 8 or 16 bit) or grayscale PNG image, normalized to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    decode_image(&read_bytes(path.as_ref())?)
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else {
        Err(Error::Format {
            magic: bytes.iter().take(4).copied().collect(),
        })
    }
}

struct PgmHeader {
    binary: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader> {
    let binary = &bytes[..2] == b"P5";
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated or malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse("PGM header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Parse(format!("PGM size {width}x{height} is empty")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!(
            "PGM maxval {maxval} outside 1..=65535"
        )));
    }
    // exactly one whitespace byte separates the header from binary data
    if bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        pos += 1;
    } else if binary || pos < bytes.len() {
        return Err(Error::Parse(
            "PGM header is not followed by whitespace".into(),
        ));
    }
    Ok(PgmHeader {
        binary,
        width,
        height,
        maxval: maxval as u32,
        data_start: pos,
    })
}

fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let h = parse_pgm_header(bytes)?;
    let n = h.width * h.height;
    let max = h.maxval as f64;
    let raw: Vec<u32> = if h.binary {
        let body = &bytes[h.data_start..];
        let wide = h.maxval > 255;
        let need = if wide { 2 * n } else { n };
        if body.len() < need {
            return Err(Error::Parse(format!(
                "truncated PGM data: expected {need} bytes, found {}",
                body.len()
            )));
        }
        if wide {
            body[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                .collect()
        } else {
            body[..n].iter().map(|&b| b as u32).collect()
        }
    } else {
        let text = std::str::from_utf8(&bytes[h.data_start..])
            .map_err(|_| Error::Parse("ASCII PGM contains non-text bytes".into()))?;
        let values = text
            .split_ascii_whitespace()
            .take(n)
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::Parse(format!("invalid PGM sample {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() < n {
            return Err(Error::Parse(format!(
                "truncated PGM data: expected {n} samples, found {}",
                values.len()
            )));
        }
        values
    };
    if let Some(v) = raw.iter().find(|&&v| v > h.maxval) {
        return Err(Error::Parse(format!(
            "PGM sample {v} exceeds maxval {}",
            h.maxval
        )));
    }
    ImageGrid::new(
        h.width,
        h.height,
        raw.iter().map(|&v| v as f64 / max).collect(),
    )
}

fn decode_png(bytes: &[u8]) -> Result<ImageGrid> {
    let parse = |e: png::DecodingError| Error::Parse(format!("PNG: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(parse)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Parse("PNG image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(parse)?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => {
            return Err(Error::Parse(format!(
                "PNG color type {other:?} is not grayscale"
            )))
        }
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let wide = info.bit_depth == png::BitDepth::Sixteen;
    let mut data = Vec::with_capacity(w * h);
    for j in 0..h {
        let line = &buf[j * info.line_size..(j + 1) * info.line_size];
        for i in 0..w {
            let v = if wide {
                let k = 2 * channels * i;
                u16::from_be_bytes([line[k], line[k + 1]]) as f64 / 65535.0
            } else {
                line[channels * i] as f64 / 255.0
            };
            data.push(v);
        }
    }
    ImageGrid::new(w, h, data)
}

fn quantize(v: f64, maxval: u16) -> u16 {
    (v.clamp(0.0, 1.0) * maxval as f64).round() as u16
}

/// Binary PGM (P5) with the given maxval; values above 255 use 16-bit samples.
pub fn encode_pgm(img: &ImageGrid, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidParameter(
            "PGM maxval must be positive".into(),
        ));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    for &v in img.data() {
        let q = quantize(v, maxval);
        if maxval > 255 {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    Ok(out)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &ImageGrid, maxval: u16) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(img, maxval)?)
}

/// 16-bit grayscale PNG.
pub fn encode_png(img: &ImageGrid) -> Result<Vec<u8>> {
    let encode = |e: png::EncodingError| Error::Parse(format!("PNG: {e}"));
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(encode)?;
        let data: Vec<u8> = img
            .data()
            .iter()
            .flat_map(|&v| quantize(v, u16::MAX).to_be_bytes())
            .collect();
        writer.write_image_data(&data).map_err(encode)?;
    }
    Ok(out)
}

/// Writes PNG when the extension is `.png`, 16-bit PGM otherwise.
pub fn save_image(path: impl AsRef<Path>, img: &ImageGrid) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        encode_png(img)?
    } else {
        encode_pgm(img, u16::MAX)?
    };
    write_bytes(path, &bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub nodes: Vec<NodeRecord>,
}

/// JSON document holding a colony.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonDocument {
    pub format_version: u32,
    pub cells: Vec<CellRecord>,
}

impl SkeletonDocument {
    pub fn from_colony(colony: &Colony) -> Self {
        Self {
            format_version: SKELETON_FORMAT_VERSION,
            cells: colony
                .iter()
                .map(|s| CellRecord {
                    label: None,
                    nodes: s
                        .nodes()
                        .iter()
                        .map(|n| NodeRecord {
                            x: n.position.x,
                            y: n.position.y,
                            r: n.radius,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_colony(&self) -> Result<Colony> {
        if self.format_version != SKELETON_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported skeleton format_version {} (expected {SKELETON_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                let nodes = cell
                    .nodes
                    .iter()
                    .map(|n| SkeletonNode::new(n.x, n.y, n.r))
                    .collect();
                Skeleton::new(nodes).map_err(|e| Error::Parse(format!("cell {k}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Colony::new(cells))
    }
}

pub fn parse_skeletons(text: &str) -> Result<Colony> {
    let doc: SkeletonDocument =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("skeleton document: {e}")))?;
    doc.to_colony()
}

pub fn skeletons_to_string(colony: &Colony) -> String {
    let mut s = serde_json::to_string_pretty(&SkeletonDocument::from_colony(colony))
        .expect("skeleton document serializes");
    s.push('\n');
    s
}

pub fn load_skeletons(path: impl AsRef<Path>) -> Result<Colony> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Parse(format!("{}: not UTF-8 text", path.display())))?;
    parse_skeletons(&text)
}

pub fn save_skeletons(path: impl AsRef<Path>, colony: &Colony) -> Result<()> {
    write_bytes(path.as_ref(), skeletons_to_string(colony).as_bytes())
}

/// TOML configuration with optional `[energy]` and `[optimize]` tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsDocument {
    pub energy: EnergyParams,
    pub optimize: OptimizeOptions,
}

pub fn parse_params(text: &str) -> Result<ParamsDocument> {
    let doc: ParamsDocument =
        toml::from_str(text).map_err(|e| Error::Parse(format!("parameter file: {e}")))?;
    doc.energy.validate()?;
    doc.optimize.validate()?;
    Ok(doc)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ParamsDocument> {
    let path = path.as_ref();
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| Error::Parse(format!("{}: not UTF-8 text", path.display())))?;
    parse_params(&text)
}

/// Tab-separated table with a `#`-prefixed header line.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("# {}\n", header.join("\t"));
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_bytes(path.as_ref(), text.as_bytes())
}

/// Reads `x y` pairs, one per line, separated by whitespace or commas.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_points(text: &str) -> Result<Vec<Point2>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(k, line)| {
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("line {}: invalid number {s:?}", k + 1)))
            };
            match fields.as_slice() {
                [x, y] => Ok(Point2::new(parse(x)?, parse(y)?)),
                _ => Err(Error::Parse(format!(
                    "line {}: expected two coordinates, found {}",
                    k + 1,
                    fields.len()
                ))),
            }
        })
        .collect()
}

pub fn load_points(path: impl AsRef<Path>) -> Result<Vec<Point2>> {
    let path = path.as_ref();
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| Error::Parse(format!("{}: not UTF-8 text", path.display())))?;
    parse_points(&text)
}

/// Optimizer trace as a table, one row per recorded step.
pub fn trace_table(trace: &OptimizeTrace) -> String {
    let rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                format!("{:.12}", r.energy.total),
                format!("{:.12}", r.energy.e_data),
                format!("{:.12}", r.energy.e_curv),
                format!("{:.12}", r.energy.e_homog),
                format!("{:.12}", r.energy.e_repul),
                format!("{:.6e}", r.grad_max),
                format!("{:.6e}", r.step),
            ]
        })
        .collect();
    format_table(
        &[
            "iteration",
            "total",
            "e_data",
            "e_curv",
            "e_homog",
            "e_repul",
            "grad_max",
            "step_px",
        ],
        &rows,
    )
}

/// Outline samples of every cell: `cell x_px y_px`.
pub fn contours_table(contours: &[Contour]) -> String {
    let rows: Vec<Vec<String>> = contours
        .iter()
        .enumerate()
        .flat_map(|(k, c)| {
            c.points
                .iter()
                .map(move |p| vec![k.to_string(), format!("{:.6}", p.x), format!("{:.6}", p.y)])
        })
        .collect();
    format_table(&["cell", "x_px", "y_px"], &rows)
}

//! PCD (Point Cloud Data) reading and writing.
//!
//! Supported header keys: `VERSION`, `FIELDS`, `SIZE`, `TYPE`, `COUNT`,
//! `WIDTH`, `HEIGHT`, `VIEWPOINT`, `POINTS`, `DATA`, plus `#` comments.
//! Payloads may be `ascii` (one point per row) or `binary` (little-endian,
//! densely packed); `binary_compressed` is not supported.
//!
//! Recognized fields are `x`/`y`/`z` (float, 4 or 8 bytes), `rgb`/`rgba`
//! (4 bytes, float-packed `0x00RRGGBB` or unsigned), `normal_x`/`normal_y`/
//! `normal_z` (float, 4 or 8 bytes), and the conventional `_` padding field.
//! Files written here use 8-byte floats for coordinates and normals so
//! round trips are bitwise, and pack `rgb` the way PCL does.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use pcreg_core::PointCloud;

use crate::error::{Error, Result};
use crate::io::{finish_cloud, sanitize_normal, CloudRead, DataLayout, ReadOptions, F32, F64};

/// What a declared field contributes to the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    /// Coordinate axis 0..=2 (x, y, z).
    Coord(usize),
    /// Packed 24-bit color; `unsigned` distinguishes `TYPE U` from `TYPE F`.
    Rgb { unsigned: bool },
    /// Normal component axis 0..=2.
    Normal(usize),
    /// Declared but not representable in a [`PointCloud`]; values skipped.
    Skip,
}

#[derive(Debug, Clone)]
struct PlannedField {
    name: String,
    role: Role,
    size: usize,
    count: usize,
}

#[derive(Debug, Default)]
struct RawHeader {
    fields: Vec<String>,
    sizes: Vec<usize>,
    types: Vec<char>,
    counts: Option<Vec<usize>>,
    width: Option<usize>,
    height: Option<usize>,
    points: Option<usize>,
    data: Option<DataLayout>,
    /// Line numbers for error reporting.
    fields_line: usize,
    data_line: usize,
    /// Total header lines consumed and the byte offset where payload begins.
    lines: usize,
    payload_offset: usize,
}

fn parse_count(path: &Path, line: usize, token: &str, what: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} '{token}'")))
}

fn parse_header(bytes: &[u8], path: &Path, strict: bool, warnings: &mut Vec<String>) -> Result<RawHeader> {
    let mut header = RawHeader::default();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .unwrap_or(bytes.len());
        line_no += 1;
        let raw = &bytes[offset..end];
        offset = (end + 1).min(bytes.len() + 1);
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(path, line_no, "header is not valid UTF-8"))?
            .trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().expect("non-empty line has a first token");
        let rest: Vec<&str> = tokens.collect();
        match key.to_ascii_uppercase().as_str() {
            "VERSION" => {}
            "FIELDS" => {
                if rest.is_empty() {
                    return Err(Error::parse(path, line_no, "FIELDS lists no fields"));
                }
                header.fields = rest.iter().map(|s| s.to_string()).collect();
                header.fields_line = line_no;
            }
            "SIZE" => {
                header.sizes = rest
                    .iter()
                    .map(|t| parse_count(path, line_no, t, "SIZE entry"))
                    .collect::<Result<_>>()?;
            }
            "TYPE" => {
                header.types = rest
                    .iter()
                    .map(|t| {
                        let mut chars = t.chars();
                        match (chars.next(), chars.next()) {
                            (Some(c), None) if matches!(c, 'F' | 'U' | 'I') => Ok(c),
                            _ => Err(Error::parse(path, line_no, format!("invalid TYPE entry '{t}'"))),
                        }
                    })
                    .collect::<Result<_>>()?;
            }
            "COUNT" => {
                header.counts = Some(
                    rest.iter()
                        .map(|t| parse_count(path, line_no, t, "COUNT entry"))
                        .collect::<Result<_>>()?,
                );
            }
            "WIDTH" => {
                let t = rest.first().ok_or_else(|| Error::parse(path, line_no, "WIDTH has no value"))?;
                header.width = Some(parse_count(path, line_no, t, "WIDTH")?);
            }
            "HEIGHT" => {
                let t = rest.first().ok_or_else(|| Error::parse(path, line_no, "HEIGHT has no value"))?;
                header.height = Some(parse_count(path, line_no, t, "HEIGHT")?);
            }
            "POINTS" => {
                let t = rest.first().ok_or_else(|| Error::parse(path, line_no, "POINTS has no value"))?;
                header.points = Some(parse_count(path, line_no, t, "POINTS")?);
            }
            "VIEWPOINT" => {
                if rest.len() != 7 || rest.iter().any(|t| t.parse::<f64>().is_err()) {
                    return Err(Error::parse(
                        path,
                        line_no,
                        "VIEWPOINT needs seven numbers (tx ty tz qw qx qy qz)",
                    ));
                }
            }
            "DATA" => {
                let value = rest.first().copied().unwrap_or("");
                header.data = Some(match value {
                    "ascii" => DataLayout::Ascii,
                    "binary" => DataLayout::Binary,
                    other => {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("unsupported DATA layout '{other}'; expected ascii or binary"),
                        ))
                    }
                });
                header.data_line = line_no;
                header.lines = line_no;
                header.payload_offset = offset;
                return finish_header(header, path, strict, warnings);
            }
            other => {
                let note = format!("line {line_no}: unknown header key '{other}'");
                if strict {
                    return Err(Error::parse(path, line_no, format!("unknown header key '{other}'")));
                }
                warnings.push(note);
            }
        }
    }
    Err(Error::parse(path, line_no, "header ended without a DATA line"))
}

fn finish_header(
    mut header: RawHeader,
    path: &Path,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<RawHeader> {
    let line = header.data_line;
    if header.fields.is_empty() {
        return Err(Error::parse(path, line, "header has no FIELDS line"));
    }
    let n = header.fields.len();
    if header.sizes.len() != n {
        return Err(Error::parse(
            path,
            line,
            format!("SIZE lists {} entries for {} fields", header.sizes.len(), n),
        ));
    }
    if header.types.len() != n {
        return Err(Error::parse(
            path,
            line,
            format!("TYPE lists {} entries for {} fields", header.types.len(), n),
        ));
    }
    match &header.counts {
        Some(counts) if counts.len() != n => {
            return Err(Error::parse(
                path,
                line,
                format!("COUNT lists {} entries for {} fields", counts.len(), n),
            ));
        }
        Some(_) => {}
        None => header.counts = Some(vec![1; n]),
    }
    let grid = header.width.zip(header.height).map(|(w, h)| w * h);
    let points = match (header.points, grid) {
        (Some(p), Some(g)) => {
            if p != g {
                let note = format!("POINTS {p} disagrees with WIDTH x HEIGHT = {g}; using POINTS");
                if strict {
                    return Err(Error::parse(path, line, note));
                }
                warnings.push(note);
            }
            p
        }
        (Some(p), None) => p,
        (None, Some(g)) => g,
        (None, None) => {
            return Err(Error::parse(path, line, "header declares neither POINTS nor WIDTH/HEIGHT"));
        }
    };
    header.points = Some(points);
    Ok(header)
}

fn plan_fields(
    header: &RawHeader,
    path: &Path,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<PlannedField>> {
    let line = header.fields_line;
    let counts = header.counts.as_ref().expect("finish_header fills counts");
    let mut plan = Vec::with_capacity(header.fields.len());
    let mut seen = [false; 7]; // x y z rgb nx ny nz
    for ((name, (&size, &ty)), &count) in header
        .fields
        .iter()
        .zip(header.sizes.iter().zip(header.types.iter()))
        .zip(counts.iter())
    {
        let mut known = |slot: usize, role: Role, want: &str| -> Result<Role> {
            if seen[slot] {
                return Err(Error::parse(path, line, format!("duplicate field '{name}'")));
            }
            seen[slot] = true;
            let ok = match role {
                Role::Coord(_) | Role::Normal(_) => ty == 'F' && (size == 4 || size == 8),
                Role::Rgb { .. } => size == 4,
                Role::Skip => true,
            };
            if !ok || count != 1 {
                return Err(Error::parse(
                    path,
                    line,
                    format!("field '{name}' must be {want} with COUNT 1, not TYPE {ty} SIZE {size} COUNT {count}"),
                ));
            }
            Ok(role)
        };
        let role = match name.as_str() {
            "x" => known(0, Role::Coord(0), "a 4- or 8-byte float")?,
            "y" => known(1, Role::Coord(1), "a 4- or 8-byte float")?,
            "z" => known(2, Role::Coord(2), "a 4- or 8-byte float")?,
            "rgb" | "rgba" => {
                let role = known(3, Role::Rgb { unsigned: ty == 'U' }, "a 4-byte packed color")?;
                if name == "rgba" {
                    warnings.push("field 'rgba': alpha channel ignored".into());
                }
                role
            }
            "normal_x" => known(4, Role::Normal(0), "a 4- or 8-byte float")?,
            "normal_y" => known(5, Role::Normal(1), "a 4- or 8-byte float")?,
            "normal_z" => known(6, Role::Normal(2), "a 4- or 8-byte float")?,
            // "_" is the conventional padding name; skip it silently.
            "_" => Role::Skip,
            other => {
                if strict {
                    return Err(Error::parse(path, line, format!("unknown field '{other}'")));
                }
                warnings.push(format!("ignoring unknown field '{other}'"));
                Role::Skip
            }
        };
        plan.push(PlannedField {
            name: name.clone(),
            role,
            size,
            count,
        });
    }
    for (slot, name) in [(0, "x"), (1, "y"), (2, "z")] {
        if !seen[slot] {
            return Err(Error::parse(path, line, format!("missing coordinate field '{name}'")));
        }
    }
    let normal_count = seen[4] as usize + seen[5] as usize + seen[6] as usize;
    if normal_count != 0 && normal_count != 3 {
        return Err(Error::parse(
            path,
            line,
            "normal_x/normal_y/normal_z must appear together",
        ));
    }
    Ok(plan)
}

/// Per-point accumulation shared by the ascii and binary paths.
struct Assembler {
    points: Vec<Point3<f64>>,
    colors: Option<Vec<[u8; 3]>>,
    normals: Option<Vec<Option<Vector3<f64>>>>,
    dropped: usize,
}

impl Assembler {
    fn new(plan: &[PlannedField]) -> Self {
        let has_rgb = plan.iter().any(|f| matches!(f.role, Role::Rgb { .. }));
        let has_normals = plan.iter().any(|f| matches!(f.role, Role::Normal(_)));
        Assembler {
            points: Vec::new(),
            colors: has_rgb.then(Vec::new),
            normals: has_normals.then(Vec::new),
            dropped: 0,
        }
    }

    /// Incorporate one parsed point. Returns false when the point was
    /// dropped for non-finite coordinates (the strict path errors instead,
    /// before calling this).
    fn push(&mut self, coords: [f64; 3], rgb: Option<u32>, normal: Option<Vector3<f64>>, warnings: &mut Vec<String>) -> bool {
        if !coords.iter().all(|c| c.is_finite()) {
            self.dropped += 1;
            return false;
        }
        self.points.push(Point3::new(coords[0], coords[1], coords[2]));
        if let Some(colors) = &mut self.colors {
            let bits = rgb.expect("rgb field parsed when color channel planned");
            colors.push([(bits >> 16) as u8, (bits >> 8) as u8, bits as u8]);
        }
        if let Some(normals) = &mut self.normals {
            let v = normal.expect("normal fields parsed when normal channel planned");
            normals.push(sanitize_normal(v, self.points.len() - 1, warnings));
        }
        true
    }

    fn finish(self, mut warnings: Vec<String>) -> Result<CloudRead> {
        if self.dropped > 0 {
            warnings.push(format!(
                "dropped {} point(s) with non-finite coordinates",
                self.dropped
            ));
        }
        Ok(CloudRead {
            cloud: finish_cloud(self.points, self.colors, self.normals)?,
            dropped_points: self.dropped,
            warnings,
        })
    }
}

/// Read a PCD file.
pub fn read_pcd(path: &Path, options: &ReadOptions) -> Result<CloudRead> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut warnings = Vec::new();
    let header = parse_header(&bytes, path, options.strict, &mut warnings)?;
    let plan = plan_fields(&header, path, options.strict, &mut warnings)?;
    match header.data.expect("parse_header requires DATA") {
        DataLayout::Ascii => read_ascii(&bytes, &header, &plan, path, options, warnings),
        DataLayout::Binary => read_binary(&bytes, &header, &plan, path, options, warnings),
    }
}

fn parse_number<T: std::str::FromStr>(path: &Path, line: usize, token: &str, field: &str) -> Result<T> {
    token
        .parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("invalid number '{token}' in field '{field}'")))
}

fn read_ascii(
    bytes: &[u8],
    header: &RawHeader,
    plan: &[PlannedField],
    path: &Path,
    options: &ReadOptions,
    mut warnings: Vec<String>,
) -> Result<CloudRead> {
    let points = header.points.expect("finish_header fills points");
    let text = std::str::from_utf8(&bytes[header.payload_offset..])
        .map_err(|_| Error::parse(path, header.lines + 1, "ascii payload is not valid UTF-8"))?;
    let expected_tokens: usize = plan.iter().map(|f| f.count).sum();
    let mut assembler = Assembler::new(plan);
    let mut rows = 0usize;
    let mut line_no = header.lines;
    for line in text.lines() {
        line_no += 1;
        let line = line.trim();
        if rows == points {
            if !line.is_empty() {
                let note = format!("line {line_no}: trailing content after {points} data rows");
                if options.strict {
                    return Err(Error::parse(path, line_no, format!("trailing content after {points} data rows")));
                }
                warnings.push(note);
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != expected_tokens {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {expected_tokens} values, found {}", tokens.len()),
            ));
        }
        let mut cursor = 0usize;
        let mut coords = [0.0f64; 3];
        let mut rgb = None;
        let mut normal = Vector3::zeros();
        for field in plan {
            match field.role {
                Role::Coord(axis) => {
                    coords[axis] = parse_number(path, line_no, tokens[cursor], &field.name)?;
                }
                Role::Rgb { unsigned } => {
                    let bits = if unsigned {
                        parse_number::<u32>(path, line_no, tokens[cursor], &field.name)?
                    } else {
                        parse_number::<f32>(path, line_no, tokens[cursor], &field.name)?.to_bits()
                    };
                    rgb = Some(bits);
                }
                Role::Normal(axis) => {
                    normal[axis] = parse_number(path, line_no, tokens[cursor], &field.name)?;
                }
                Role::Skip => {}
            }
            cursor += field.count;
        }
        rows += 1;
        let has_normals = assembler.normals.is_some();
        if !assembler.push(coords, rgb, has_normals.then_some(normal), &mut warnings) && options.strict {
            return Err(Error::parse(path, line_no, "point has a non-finite coordinate"));
        }
    }
    if rows < points {
        return Err(Error::parse(
            path,
            line_no,
            format!("unexpected end of file: expected {points} data rows, found {rows}"),
        ));
    }
    assembler.finish(warnings)
}

fn read_binary(
    bytes: &[u8],
    header: &RawHeader,
    plan: &[PlannedField],
    path: &Path,
    options: &ReadOptions,
    mut warnings: Vec<String>,
) -> Result<CloudRead> {
    let points = header.points.expect("finish_header fills points");
    let stride: usize = plan.iter().map(|f| f.size * f.count).sum();
    let payload = &bytes[header.payload_offset.min(bytes.len())..];
    let expected = points * stride;
    if payload.len() < expected {
        return Err(Error::parse(
            path,
            0,
            format!(
                "binary payload truncated: expected {expected} bytes for {points} points of stride {stride}, found {} bytes",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        let extra = payload.len() - expected;
        if options.strict {
            return Err(Error::parse(
                path,
                0,
                format!("{extra} trailing bytes after the binary payload"),
            ));
        }
        warnings.push(format!("ignoring {extra} trailing bytes after the binary payload"));
    }
    let read_float = |at: usize, size: usize| -> f64 {
        match size {
            4 => f32::from_le_bytes(payload[at..at + 4].try_into().expect("bounds checked")) as f64,
            _ => f64::from_le_bytes(payload[at..at + 8].try_into().expect("bounds checked")),
        }
    };
    let mut assembler = Assembler::new(plan);
    for i in 0..points {
        let base = i * stride;
        let mut at = base;
        let mut coords = [0.0f64; 3];
        let mut rgb = None;
        let mut normal = Vector3::zeros();
        for field in plan {
            match field.role {
                Role::Coord(axis) => coords[axis] = read_float(at, field.size),
                // Color bytes are the same on disk whether declared F or U.
                Role::Rgb { .. } => {
                    rgb = Some(u32::from_le_bytes(payload[at..at + 4].try_into().expect("bounds checked")));
                }
                Role::Normal(axis) => normal[axis] = read_float(at, field.size),
                Role::Skip => {}
            }
            at += field.size * field.count;
        }
        let has_normals = assembler.normals.is_some();
        if !assembler.push(coords, rgb, has_normals.then_some(normal), &mut warnings) && options.strict {
            return Err(Error::parse(path, 0, format!("point {i} has a non-finite coordinate")));
        }
    }
    assembler.finish(warnings)
}

fn packed_rgb(c: [u8; 3]) -> u32 {
    ((c[0] as u32) << 16) | ((c[1] as u32) << 8) | (c[2] as u32)
}

/// Write a PCD file with 8-byte float coordinates (and normals, if present)
/// and a float-packed `rgb` field if colors are present.
pub fn write_pcd(cloud: &PointCloud, path: &Path, layout: DataLayout) -> Result<()> {
    let n = cloud.len();
    let mut names = vec!["x", "y", "z"];
    let mut sizes = vec![8, 8, 8];
    let mut types = vec!['F', 'F', 'F'];
    if cloud.colors().is_some() {
        names.push("rgb");
        sizes.push(4);
        types.push('F');
    }
    if cloud.has_normals() {
        names.extend(["normal_x", "normal_y", "normal_z"]);
        sizes.extend([8, 8, 8]);
        types.extend(['F', 'F', 'F']);
    }
    let join = |items: Vec<String>| items.join(" ");
    let mut header = String::new();
    header.push_str("# .PCD v0.7 - Point Cloud Data file format\n");
    header.push_str("VERSION 0.7\n");
    let _ = writeln!(header, "FIELDS {}", names.join(" "));
    let _ = writeln!(header, "SIZE {}", join(sizes.iter().map(|s| s.to_string()).collect()));
    let _ = writeln!(header, "TYPE {}", join(types.iter().map(|t| t.to_string()).collect()));
    let _ = writeln!(header, "COUNT {}", join(vec!["1".to_string(); names.len()]));
    let _ = writeln!(header, "WIDTH {n}");
    header.push_str("HEIGHT 1\n");
    header.push_str("VIEWPOINT 0 0 0 1 0 0 0\n");
    let _ = writeln!(header, "POINTS {n}");
    let _ = writeln!(header, "DATA {}", if layout == DataLayout::Ascii { "ascii" } else { "binary" });

    let mut out: Vec<u8> = header.into_bytes();
    match layout {
        DataLayout::Ascii => {
            let mut body = String::new();
            for i in 0..n {
                let p = cloud.point(i);
                let _ = write!(body, "{} {} {}", F64(p.x), F64(p.y), F64(p.z));
                if let Some(colors) = cloud.colors() {
                    let _ = write!(body, " {}", F32(f32::from_bits(packed_rgb(colors[i]))));
                }
                if cloud.has_normals() {
                    match cloud.normal(i) {
                        Some(v) => {
                            let _ = write!(body, " {} {} {}", F64(v.x), F64(v.y), F64(v.z));
                        }
                        None => body.push_str(" nan nan nan"),
                    }
                }
                body.push('\n');
            }
            out.extend_from_slice(body.as_bytes());
        }
        DataLayout::Binary => {
            for i in 0..n {
                let p = cloud.point(i);
                for c in [p.x, p.y, p.z] {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(colors) = cloud.colors() {
                    out.extend_from_slice(&packed_rgb(colors[i]).to_le_bytes());
                }
                if cloud.has_normals() {
                    let v = cloud.normal(i).unwrap_or(Vector3::new(f64::NAN, f64::NAN, f64::NAN));
                    for c in [v.x, v.y, v.z] {
                        out.extend_from_slice(&c.to_le_bytes());
                    }
                }
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

//! ASCII PLY reading and writing.
//!
//! The reader understands scalar vertex properties `x`/`y`/`z` (float or
//! double), `red`/`green`/`blue` (uchar), and `nx`/`ny`/`nz` (float or
//! double). Anything else — other scalar properties, list properties, alpha,
//! non-vertex elements such as faces — is skipped with a warning, or rejected
//! under strict mode. Binary PLY variants are not supported.
//!
//! The writer emits `double` coordinates and normals so a write/read round
//! trip is bitwise, and one vertex per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use pcreg_core::PointCloud;

use crate::error::{Error, Result};
use crate::io::{finish_cloud, sanitize_normal, CloudRead, ReadOptions, F64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VertexRole {
    Coord(usize),
    Color(usize),
    Normal(usize),
    /// One scalar token to discard.
    SkipScalar,
    /// A list: leading count token, then that many tokens to discard.
    SkipList,
}

#[derive(Debug)]
struct VertexProperty {
    name: String,
    role: VertexRole,
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    /// Populated only for the vertex element.
    schedule: Vec<VertexProperty>,
}

fn is_float_type(t: &str) -> bool {
    matches!(t, "float" | "float32" | "double" | "float64")
}

fn is_uchar_type(t: &str) -> bool {
    matches!(t, "uchar" | "uint8")
}

/// Read an ASCII PLY file.
pub fn read_ply(path: &Path, options: &ReadOptions) -> Result<CloudRead> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut warnings = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (line_no, magic) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file; expected 'ply' magic"))?;
    if magic != "ply" {
        return Err(Error::parse(path, line_no, "missing 'ply' magic line"));
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    let mut header_end = 0usize;
    for (line_no, line) in lines.by_ref() {
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "comment" | "obj_info" => {}
            "format" => {
                if tokens.get(1) != Some(&"ascii") {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!(
                            "unsupported PLY format '{}'; only ascii is supported",
                            tokens.get(1).unwrap_or(&"?")
                        ),
                    ));
                }
                saw_format = true;
            }
            "element" => {
                let (name, count) = match (tokens.get(1), tokens.get(2)) {
                    (Some(name), Some(count)) => (
                        name.to_string(),
                        count.parse::<usize>().map_err(|_| {
                            Error::parse(path, line_no, format!("invalid element count '{count}'"))
                        })?,
                    ),
                    _ => return Err(Error::parse(path, line_no, "element needs a name and a count")),
                };
                if elements.iter().any(|e| e.name == name) {
                    return Err(Error::parse(path, line_no, format!("duplicate element '{name}'")));
                }
                elements.push(PlyElement {
                    name,
                    count,
                    schedule: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, line_no, "property appears before any element"))?;
                if element.name != "vertex" {
                    continue; // ascii rows of other elements are skipped whole
                }
                let prop = parse_vertex_property(&tokens, path, line_no, options.strict, &mut warnings)?;
                element.schedule.push(prop);
            }
            "end_header" => {
                header_end = line_no;
                break;
            }
            other => {
                if options.strict {
                    return Err(Error::parse(path, line_no, format!("unknown header keyword '{other}'")));
                }
                warnings.push(format!("line {line_no}: ignoring unknown header keyword '{other}'"));
            }
        }
    }
    if header_end == 0 {
        return Err(Error::parse(path, text.lines().count(), "header ended without end_header"));
    }
    if !saw_format {
        return Err(Error::parse(path, header_end, "header has no format line"));
    }
    let vertex = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse(path, header_end, "header declares no vertex element"))?;
    validate_vertex_schedule(vertex, path, header_end)?;

    // Data section: elements appear in declaration order.
    let mut points = Vec::new();
    let mut colors: Option<Vec<[u8; 3]>> = vertex
        .schedule
        .iter()
        .any(|p| matches!(p.role, VertexRole::Color(_)))
        .then(Vec::new);
    let mut normals: Option<Vec<Option<Vector3<f64>>>> = vertex
        .schedule
        .iter()
        .any(|p| matches!(p.role, VertexRole::Normal(_)))
        .then(Vec::new);
    let mut dropped = 0usize;
    let mut last_line = header_end;
    for element in &elements {
        if element.name != "vertex" {
            if element.count > 0 {
                let note = format!("ignoring element '{}' ({} rows)", element.name, element.count);
                if options.strict {
                    return Err(Error::parse(path, header_end, note));
                }
                warnings.push(note);
            }
            for k in 0..element.count {
                let (line_no, _) = lines.next().ok_or_else(|| {
                    Error::parse(
                        path,
                        last_line,
                        format!(
                            "unexpected end of file: element '{}' expects {} rows, found {k}",
                            element.name, element.count
                        ),
                    )
                })?;
                last_line = line_no;
            }
            continue;
        }
        for k in 0..element.count {
            let (line_no, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    path,
                    last_line,
                    format!("unexpected end of file: element 'vertex' expects {} rows, found {k}", element.count),
                )
            })?;
            last_line = line_no;
            let mut tokens = line.split_whitespace();
            let mut coords = [0.0f64; 3];
            let mut color = [0u8; 3];
            let mut normal = Vector3::zeros();
            for prop in &element.schedule {
                let mut next = || {
                    tokens
                        .next()
                        .ok_or_else(|| Error::parse(path, line_no, "vertex row is missing values"))
                };
                match prop.role {
                    VertexRole::Coord(axis) => {
                        coords[axis] = parse_token(next()?, path, line_no, &prop.name)?;
                    }
                    VertexRole::Color(channel) => {
                        color[channel] = parse_token(next()?, path, line_no, &prop.name)?;
                    }
                    VertexRole::Normal(axis) => {
                        normal[axis] = parse_token(next()?, path, line_no, &prop.name)?;
                    }
                    VertexRole::SkipScalar => {
                        next()?;
                    }
                    VertexRole::SkipList => {
                        let count: usize = parse_token(next()?, path, line_no, &prop.name)?;
                        for _ in 0..count {
                            next()?;
                        }
                    }
                }
            }
            if tokens.next().is_some() {
                return Err(Error::parse(path, line_no, "vertex row has too many values"));
            }
            if !coords.iter().all(|c| c.is_finite()) {
                if options.strict {
                    return Err(Error::parse(path, line_no, "vertex has a non-finite coordinate"));
                }
                dropped += 1;
                continue;
            }
            points.push(Point3::new(coords[0], coords[1], coords[2]));
            if let Some(colors) = &mut colors {
                colors.push(color);
            }
            if let Some(normals) = &mut normals {
                normals.push(sanitize_normal(normal, points.len() - 1, &mut warnings));
            }
        }
    }
    for (line_no, line) in lines {
        if !line.is_empty() {
            if options.strict {
                return Err(Error::parse(path, line_no, "trailing content after the last element"));
            }
            warnings.push(format!("line {line_no}: trailing content after the last element"));
            break;
        }
    }
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} point(s) with non-finite coordinates"));
    }
    Ok(CloudRead {
        cloud: finish_cloud(points, colors, normals)?,
        dropped_points: dropped,
        warnings,
    })
}

fn parse_token<T: std::str::FromStr>(token: &str, path: &Path, line: usize, name: &str) -> Result<T> {
    token
        .parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("invalid value '{token}' for property '{name}'")))
}

fn parse_vertex_property(
    tokens: &[&str],
    path: &Path,
    line_no: usize,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<VertexProperty> {
    if tokens.get(1) == Some(&"list") {
        let name = tokens.get(4).copied().unwrap_or("?").to_string();
        if strict {
            return Err(Error::parse(
                path,
                line_no,
                format!("list property '{name}' on vertex is not supported"),
            ));
        }
        warnings.push(format!("ignoring list property '{name}' on vertex"));
        return Ok(VertexProperty {
            name,
            role: VertexRole::SkipList,
        });
    }
    let (ty, name) = match (tokens.get(1), tokens.get(2)) {
        (Some(ty), Some(name)) => (*ty, name.to_string()),
        _ => return Err(Error::parse(path, line_no, "property needs a type and a name")),
    };
    let require = |ok: bool, want: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::parse(
                path,
                line_no,
                format!("property '{name}' must be {want}, not '{ty}'"),
            ))
        }
    };
    let role = match name.as_str() {
        "x" => {
            require(is_float_type(ty), "float or double")?;
            VertexRole::Coord(0)
        }
        "y" => {
            require(is_float_type(ty), "float or double")?;
            VertexRole::Coord(1)
        }
        "z" => {
            require(is_float_type(ty), "float or double")?;
            VertexRole::Coord(2)
        }
        "red" => {
            require(is_uchar_type(ty), "uchar")?;
            VertexRole::Color(0)
        }
        "green" => {
            require(is_uchar_type(ty), "uchar")?;
            VertexRole::Color(1)
        }
        "blue" => {
            require(is_uchar_type(ty), "uchar")?;
            VertexRole::Color(2)
        }
        "nx" => {
            require(is_float_type(ty), "float or double")?;
            VertexRole::Normal(0)
        }
        "ny" => {
            require(is_float_type(ty), "float or double")?;
            VertexRole::Normal(1)
        }
        "nz" => {
            require(is_float_type(ty), "float or double")?;
            VertexRole::Normal(2)
        }
        "alpha" => {
            warnings.push("property 'alpha': alpha channel ignored".into());
            VertexRole::SkipScalar
        }
        other => {
            if strict {
                return Err(Error::parse(path, line_no, format!("unknown vertex property '{other}'")));
            }
            warnings.push(format!("ignoring unknown vertex property '{other}'"));
            VertexRole::SkipScalar
        }
    };
    Ok(VertexProperty { name, role })
}

fn validate_vertex_schedule(vertex: &PlyElement, path: &Path, line: usize) -> Result<()> {
    let mut has = [false; 9]; // x y z r g b nx ny nz
    for prop in &vertex.schedule {
        let slot = match prop.role {
            VertexRole::Coord(a) => Some(a),
            VertexRole::Color(c) => Some(3 + c),
            VertexRole::Normal(a) => Some(6 + a),
            _ => None,
        };
        if let Some(slot) = slot {
            if has[slot] {
                return Err(Error::parse(path, line, format!("duplicate vertex property '{}'", prop.name)));
            }
            has[slot] = true;
        }
    }
    for (slot, name) in [(0, "x"), (1, "y"), (2, "z")] {
        if !has[slot] {
            return Err(Error::parse(path, line, format!("vertex element lacks property '{name}'")));
        }
    }
    let colors = has[3] as usize + has[4] as usize + has[5] as usize;
    if colors != 0 && colors != 3 {
        return Err(Error::parse(path, line, "red/green/blue must appear together"));
    }
    let normals = has[6] as usize + has[7] as usize + has[8] as usize;
    if normals != 0 && normals != 3 {
        return Err(Error::parse(path, line, "nx/ny/nz must appear together"));
    }
    Ok(())
}

/// Write an ASCII PLY file with double-precision coordinates and normals.
pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.colors().is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.has_normals() {
        out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    out.push_str("end_header\n");
    for i in 0..cloud.len() {
        let p = cloud.point(i);
        let _ = write!(out, "{} {} {}", F64(p.x), F64(p.y), F64(p.z));
        if let Some(colors) = cloud.colors() {
            let c = colors[i];
            let _ = write!(out, " {} {} {}", c[0], c[1], c[2]);
        }
        if cloud.has_normals() {
            match cloud.normal(i) {
                Some(v) => {
                    let _ = write!(out, " {} {} {}", F64(v.x), F64(v.y), F64(v.z));
                }
                None => out.push_str(" nan nan nan"),
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

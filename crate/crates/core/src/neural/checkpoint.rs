//! Versioned text format for trained weights.
//!
//! ```text
//! # monorom-weights v1
//! arch=<token>
//! meta <name> <count>
//! <count values, one line>
//! param <name> <rows> <cols>
//! <rows lines of cols values>
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! a read-back reproduces every f64 bit for bit. `meta` blocks carry small
//! named vectors (normalization statistics); `param` blocks carry matrices
//! row-major. Block order is preserved, producing deterministic bytes.

use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::DataError;

const WEIGHTS_MAGIC: &str = "# monorom-weights v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Architecture token, e.g. `autoencoder:62-62t-4t-62t-62l`.
    pub arch: String,
    /// Named small vectors, written before the parameters.
    pub meta: Vec<(String, Vec<f64>)>,
    /// Named matrices in storage order.
    pub params: Vec<(String, DMatrix<f64>)>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' || c == ':')
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), DataError> {
    let p = path.display().to_string();
    if !valid_name(&ckpt.arch) {
        return Err(DataError::parse(&p, format!("invalid arch token `{}`", ckpt.arch)));
    }
    for (name, values) in &ckpt.meta {
        if !valid_name(name) {
            return Err(DataError::parse(&p, format!("invalid meta name `{name}`")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::parse(&p, format!("meta `{name}` has non-finite value")));
        }
    }
    for (name, m) in &ckpt.params {
        if !valid_name(name) {
            return Err(DataError::parse(&p, format!("invalid param name `{name}`")));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(DataError::parse(&p, format!("param `{name}` has non-finite value")));
        }
    }

    let file = std::fs::File::create(path).map_err(|e| DataError::io(&p, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| DataError::io(&p, e);

    writeln!(w, "{WEIGHTS_MAGIC}").map_err(io)?;
    writeln!(w, "arch={}", ckpt.arch).map_err(io)?;
    for (name, values) in &ckpt.meta {
        writeln!(w, "meta {name} {}", values.len()).map_err(io)?;
        let line: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io)?;
    }
    for (name, m) in &ckpt.params {
        writeln!(w, "param {name} {} {}", m.nrows(), m.ncols()).map_err(io)?;
        for r in 0..m.nrows() {
            let line: Vec<String> = (0..m.ncols()).map(|c| format!("{}", m[(r, c)])).collect();
            writeln!(w, "{}", line.join(" ")).map_err(io)?;
        }
    }
    writeln!(w, "end").map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, DataError> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| DataError::io(&p, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let mut next_line = |what: &str| -> Result<(usize, String), DataError> {
        match lines.next() {
            Some((idx, Ok(line))) => Ok((idx + 1, line)),
            Some((_, Err(e))) => Err(DataError::io(&p, e)),
            None => Err(DataError::parse(&p, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (_, magic) = next_line("weights header")?;
    if magic.trim_end() != WEIGHTS_MAGIC {
        return Err(DataError::parse(
            &p,
            format!("bad magic line `{magic}`, expected `{WEIGHTS_MAGIC}`"),
        ));
    }
    let (no, arch_line) = next_line("arch line")?;
    let arch = arch_line
        .strip_prefix("arch=")
        .ok_or_else(|| DataError::parse(&p, format!("line {no}: expected arch=<token>")))?
        .to_string();
    if !valid_name(&arch) {
        return Err(DataError::parse(&p, format!("line {no}: invalid arch token `{arch}`")));
    }

    let parse_values = |no: usize, line: &str, n: usize| -> Result<Vec<f64>, DataError> {
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals
            .map_err(|_| DataError::parse(&p, format!("line {no}: non-numeric value")))?;
        if vals.len() != n {
            return Err(DataError::parse(
                &p,
                format!("line {no}: expected {n} values, found {}", vals.len()),
            ));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(DataError::parse(&p, format!("line {no}: non-finite value")));
        }
        Ok(vals)
    };

    let mut meta: Vec<(String, Vec<f64>)> = Vec::new();
    let mut params: Vec<(String, DMatrix<f64>)> = Vec::new();
    loop {
        let (no, line) = next_line("block header or end")?;
        let line = line.trim_end();
        if line == "end" {
            break;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["meta", name, count] => {
                let name = name.to_string();
                if !valid_name(&name) {
                    return Err(DataError::parse(&p, format!("line {no}: invalid meta name `{name}`")));
                }
                if meta.iter().any(|(n, _)| *n == name) {
                    return Err(DataError::parse(&p, format!("line {no}: duplicate meta `{name}`")));
                }
                let n: usize = count.parse().map_err(|_| {
                    DataError::parse(&p, format!("line {no}: bad meta count `{count}`"))
                })?;
                let (vno, vline) = next_line("meta values")?;
                meta.push((name, parse_values(vno, &vline, n)?));
            }
            ["param", name, rows, cols] => {
                let name = name.to_string();
                if !valid_name(&name) {
                    return Err(DataError::parse(&p, format!("line {no}: invalid param name `{name}`")));
                }
                if params.iter().any(|(n, _)| *n == name) {
                    return Err(DataError::parse(&p, format!("line {no}: duplicate param `{name}`")));
                }
                let r: usize = rows.parse().map_err(|_| {
                    DataError::parse(&p, format!("line {no}: bad row count `{rows}`"))
                })?;
                let c: usize = cols.parse().map_err(|_| {
                    DataError::parse(&p, format!("line {no}: bad column count `{cols}`"))
                })?;
                if r == 0 || c == 0 {
                    return Err(DataError::parse(&p, format!("line {no}: empty matrix `{name}`")));
                }
                let mut data = Vec::with_capacity(r * c);
                for _ in 0..r {
                    let (vno, vline) = next_line("matrix row")?;
                    data.extend(parse_values(vno, &vline, c)?);
                }
                params.push((name, DMatrix::from_row_slice(r, c, &data)));
            }
            _ => {
                return Err(DataError::parse(
                    &p,
                    format!("line {no}: expected `meta`, `param` or `end`, got `{line}`"),
                ))
            }
        }
    }
    // Nothing but whitespace may follow the end marker.
    for (idx, line) in lines {
        let line = line.map_err(|e| DataError::io(&p, e))?;
        if !line.trim().is_empty() {
            return Err(DataError::parse(
                &p,
                format!("line {}: trailing content after end marker", idx + 1),
            ));
        }
    }

    Ok(Checkpoint { arch, meta, params })
}

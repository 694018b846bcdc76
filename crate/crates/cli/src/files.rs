//! File formats: datasets (`id,attr_hex`), share files
//! (`row,u_share_hex,v_share_hex`), and revealed joins (`u_hex,v_hex`).

use std::path::Path;

use psa_core::crypto::ShareVector;
use psa_core::psa::{Dataset, JoinedShares, ShareRole};

use crate::CliError;

fn bad(path: &Path, what: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {what}", path.display()))
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "attr_hex"])?;
    for (id, attr) in ds.records() {
        w.write_byte_record(&csv::ByteRecord::from(vec![
            id.clone(),
            hex::encode(attr).into_bytes(),
        ]))?;
    }
    w.flush().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "attr_hex"] {
        return Err(bad(path, "expected header `id,attr_hex`"));
    }
    let mut records = Vec::new();
    let mut width = None;
    for rec in r.byte_records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(bad(path, "expected two columns"));
        }
        let id = rec[0].to_vec();
        let attr = hex::decode(&rec[1]).map_err(|e| bad(path, format!("bad attr hex: {e}")))?;
        match width {
            None => width = Some(attr.len()),
            Some(w) if w != attr.len() => {
                return Err(bad(path, "attribute widths differ between rows"))
            }
            _ => {}
        }
        records.push((id, attr));
    }
    let width = width.ok_or_else(|| bad(path, "dataset has no rows"))?;
    Dataset::new(width, records).map_err(|e| bad(path, e))
}

pub fn write_shares(path: &Path, shares: &JoinedShares) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "u_share_hex", "v_share_hex"])?;
    for (i, (u, v)) in shares.u.rows.iter().zip(&shares.v.rows).enumerate() {
        w.write_record([i.to_string(), hex::encode(u), hex::encode(v)])?;
    }
    w.flush().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn read_shares(path: &Path, role: ShareRole) -> Result<JoinedShares, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["row", "u_share_hex", "v_share_hex"] {
        return Err(bad(path, "expected header `row,u_share_hex,v_share_hex`"));
    }
    let mut u_rows = Vec::new();
    let mut v_rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        u_rows.push(hex::decode(&rec[1]).map_err(|e| bad(path, format!("bad u hex: {e}")))?);
        v_rows.push(hex::decode(&rec[2]).map_err(|e| bad(path, format!("bad v hex: {e}")))?);
    }
    let u_width = u_rows.first().map_or(0, Vec::len);
    let v_width = v_rows.first().map_or(0, Vec::len);
    if u_rows.iter().any(|r| r.len() != u_width) || v_rows.iter().any(|r| r.len() != v_width) {
        return Err(bad(path, "share widths differ between rows"));
    }
    Ok(JoinedShares {
        role,
        u: ShareVector {
            width_bytes: u_width,
            rows: u_rows,
        },
        v: ShareVector {
            width_bytes: v_width,
            rows: v_rows,
        },
    })
}

pub fn write_join(path: &Path, rows: &[(Vec<u8>, Vec<u8>)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["u_hex", "v_hex"])?;
    for (u, v) in rows {
        w.write_record([hex::encode(u), hex::encode(v)])?;
    }
    w.flush().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn read_join(path: &Path) -> Result<Vec<(Vec<u8>, Vec<u8>)>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["u_hex", "v_hex"] {
        return Err(bad(path, "expected header `u_hex,v_hex`"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push((
            hex::decode(&rec[0]).map_err(|e| bad(path, format!("bad u hex: {e}")))?,
            hex::decode(&rec[1]).map_err(|e| bad(path, format!("bad v hex: {e}")))?,
        ));
    }
    Ok(rows)
}

pub fn write_id_list(path: &Path, ids: &[Vec<u8>]) -> Result<(), CliError> {
    let mut out = String::new();
    for id in ids {
        out.push_str(&String::from_utf8_lossy(id));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Usage(e.to_string()))
}

//! Field, mask and ensemble files: CSV with `#` header lines, JSON sidecars
//! and binary PGM heatmaps.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::cartography::{EnsembleStudy, FieldTable, RegionMask};
use crate::error::{Result, SdiError};
use crate::systems::GuardStatus;

/// Fixed leading columns of a field file; indicator columns follow, then `status`.
pub const FIELD_PREFIX: [&str; 4] = ["ix", "iy", "u", "v"];

/// Writes `# key: value` header lines then the field rows.
pub fn write_field_csv<W: Write>(mut w: W, table: &FieldTable, header: &[(String, String)]) -> Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}: {v}")?;
    }
    let mut cols: Vec<&str> = FIELD_PREFIX.to_vec();
    cols.extend(table.columns.iter().map(String::as_str));
    cols.push("status");
    writeln!(w, "{}", cols.join(","))?;
    for (i, row) in table.rows.iter().enumerate() {
        write!(w, "{},{},{},{}", i % table.nx, i / table.nx, table.u[i], table.v[i])?;
        for x in row {
            write!(w, ",{x}")?;
        }
        writeln!(w, ",{}", table.status[i])?;
    }
    w.flush()?;
    Ok(())
}

/// `(u, v, values, status)` of one parsed cell.
type Row = (f64, f64, Vec<f64>, GuardStatus);

fn parse_err(line: usize, message: impl Into<String>) -> SdiError {
    SdiError::Parse { line, message: message.into() }
}

/// Reads a field file written by [`write_field_csv`]. Returns the table and
/// the header entries.
pub fn read_field_csv<R: BufRead>(r: R) -> Result<(FieldTable, BTreeMap<String, String>)> {
    let mut text = String::new();
    let mut header = BTreeMap::new();
    for line in r.lines() {
        let line = line?;
        if let Some((key, value)) = line.trim_start().strip_prefix('#').and_then(|rest| rest.split_once(':')) {
            header.insert(key.trim().to_string(), value.trim().to_string());
        }
        text.push_str(&line);
        text.push('\n');
    }

    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let head = rdr.headers().map_err(|e| csv_err(&e))?.clone();
    let line_of = |rec: &csv::StringRecord| rec.position().map_or(0, |p| p.line() as usize);
    let n = head.len();
    if n < 5 || head.iter().take(4).ne(FIELD_PREFIX) || head.get(n - 1) != Some("status") {
        return Err(parse_err(line_of(&head), "expected header row 'ix,iy,u,v,...,status'"));
    }
    let columns: Vec<String> = head.iter().skip(4).take(n - 5).map(String::from).collect();

    let mut records: Vec<(usize, usize, Row)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(&e))?;
        let lineno = line_of(&rec);
        let idx = |s: &str, name: &str| s.parse::<usize>().map_err(|_| parse_err(lineno, format!("bad {name} '{s}'")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad number '{s}'")));
        let ix = idx(&rec[0], "ix")?;
        let iy = idx(&rec[1], "iy")?;
        let vals = rec.iter().skip(4).take(n - 5).map(num).collect::<Result<Vec<f64>>>()?;
        let st = &rec[n - 1];
        let status = GuardStatus::parse(st).ok_or_else(|| parse_err(lineno, format!("unknown status '{st}'")))?;
        records.push((ix, iy, (num(&rec[2])?, num(&rec[3])?, vals, status)));
    }
    if records.is_empty() {
        return Err(parse_err(0, "field has no rows"));
    }
    let nx = records.iter().map(|r| r.0).max().unwrap_or(0) + 1;
    let ny = records.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    if records.len() != nx * ny {
        return Err(parse_err(0, format!("expected {} cells for a {nx}x{ny} grid, found {}", nx * ny, records.len())));
    }
    let mut slots: Vec<Option<Row>> = vec![None; nx * ny];
    for (ix, iy, row) in records {
        let slot = &mut slots[iy * nx + ix];
        if slot.is_some() {
            return Err(parse_err(0, format!("duplicate cell ({ix}, {iy})")));
        }
        *slot = Some(row);
    }
    let mut table = FieldTable { nx, ny, columns, u: vec![], v: vec![], rows: vec![], status: vec![] };
    for (u, v, vals, st) in slots.into_iter().flatten() {
        table.u.push(u);
        table.v.push(v);
        table.rows.push(vals);
        table.status.push(st);
    }
    Ok((table, header))
}

fn csv_err(e: &csv::Error) -> SdiError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => format!("expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    parse_err(line, message)
}

/// Binary PGM of one column, min–max scaled to 0..=255 over finite values;
/// non-finite cells are 0. The top image row is the largest `v`.
pub fn write_pgm<W: Write>(mut w: W, values: &[f64], nx: usize, ny: usize) -> Result<()> {
    if values.len() != nx * ny {
        return Err(SdiError::invalid("value count does not match the grid"));
    }
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    write!(w, "P5\n{nx} {ny}\n255\n")?;
    let mut buf = Vec::with_capacity(nx * ny);
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let x = values[iy * nx + ix];
            let px = if !x.is_finite() || !(hi > lo) { 0 } else { ((x - lo) / (hi - lo) * 255.0).round() as u8 };
            buf.push(px);
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Mask rows `ix,iy,u,v,mask,component`.
pub fn write_mask_csv<W: Write>(mut w: W, table: &FieldTable, mask: &RegionMask) -> Result<()> {
    writeln!(w, "# column: {}", mask.column)?;
    writeln!(w, "# predicate: {}", serde_json::to_string(&mask.predicate)?)?;
    writeln!(w, "ix,iy,u,v,mask,component")?;
    for i in 0..mask.mask.len() {
        writeln!(w, "{},{},{},{},{},{}", i % mask.nx, i / mask.nx, table.u[i], table.v[i], u8::from(mask.mask[i]), mask.labels[i])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RegionReport<'a> {
    column: &'a str,
    predicate: &'a crate::cartography::Predicate,
    masked_cells: usize,
    components: &'a [crate::cartography::Component],
}

pub fn regions_json(mask: &RegionMask) -> Result<String> {
    Ok(serde_json::to_string_pretty(&RegionReport {
        column: &mask.column,
        predicate: &mask.predicate,
        masked_cells: mask.count(),
        components: &mask.components,
    })?)
}

/// Long-format trajectories: `realization_id,t,<components>,status`.
pub fn write_ensemble_csv<W: Write>(mut w: W, study: &EnsembleStudy, components: &[String], header: &[(String, String)]) -> Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "realization_id,t,{},status", components.join(","))?;
    for r in &study.realizations {
        for (t, z) in r.times.iter().zip(&r.states) {
            write!(w, "{},{t}", r.id)?;
            for x in z {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{}", r.status)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartography::Predicate;

    fn sample() -> FieldTable {
        FieldTable {
            nx: 2,
            ny: 2,
            columns: vec!["ftle".into(), "alpha".into()],
            u: vec![-0.5, 0.5, -0.5, 0.5],
            v: vec![-1.0, -1.0, 1.0, 1.0],
            rows: vec![vec![0.1, 0.0], vec![f64::NAN, 1.0], vec![1e-300, 0.5], vec![-2.5, 0.25]],
            status: vec![GuardStatus::Ok, GuardStatus::Collision, GuardStatus::Ok, GuardStatus::ForbiddenRegion],
        }
    }

    fn same(a: &FieldTable, b: &FieldTable) -> bool {
        a.nx == b.nx
            && a.ny == b.ny
            && a.columns == b.columns
            && a.u == b.u
            && a.v == b.v
            && a.status == b.status
            && a.rows.iter().flatten().zip(b.rows.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits())
    }

    #[test]
    fn field_round_trip() {
        let t = sample();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &t, &[("seed".into(), "7".into())]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed: 7\nix,iy,u,v,ftle,alpha,status\n0,0,-0.5,-1,0.1,0,ok\n"));
        let (back, header) = read_field_csv(buf.as_slice()).unwrap();
        assert!(same(&t, &back));
        assert_eq!(header["seed"], "7");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "# a: b\nix,iy,u,v,ftle,status\n0,0,0,0,0.1,ok\n1,0,0,0,zz,ok\n";
        match read_field_csv(bad.as_bytes()) {
            Err(SdiError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let short = "ix,iy,u,v,ftle,status\n0,0,0,0,ok\n";
        assert!(matches!(read_field_csv(short.as_bytes()), Err(SdiError::Parse { line: 2, .. })));
        assert!(matches!(read_field_csv("x,y\n".as_bytes()), Err(SdiError::Parse { line: 1, .. })));
        let status = "ix,iy,u,v,f,status\n0,0,0,0,1,meh\n";
        assert!(matches!(read_field_csv(status.as_bytes()), Err(SdiError::Parse { line: 2, .. })));
    }

    #[test]
    fn pgm_scaling() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, &[0.0, 1.0, f64::NAN, 0.5], 2, 2).unwrap();
        let head = b"P5\n2 2\n255\n";
        assert_eq!(&buf[..head.len()], head);
        assert_eq!(&buf[head.len()..], &[0, 128, 0, 255]);
    }

    #[test]
    fn mask_and_report() {
        let t = sample();
        let m = crate::cartography::extract_regions(&t, "alpha", Predicate::Below { threshold: 0.6 }).unwrap();
        let mut buf = Vec::new();
        write_mask_csv(&mut buf, &t, &m).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("0,0,-0.5,-1,1,1\n"));
        assert!(text.contains("1,1,0.5,1,0,0\n"));
        let json: serde_json::Value = serde_json::from_str(&regions_json(&m).unwrap()).unwrap();
        assert_eq!(json["masked_cells"], 2);
        assert_eq!(json["components"].as_array().unwrap().len(), 1);
    }
}

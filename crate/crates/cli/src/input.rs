//! CSV ingestion: header `v,y`, one record per line.

use calib_core::{make_empirical, EmpiricalDistribution};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn parse_samples(bytes: &[u8]) -> Result<EmpiricalDistribution, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Parse(format!("line 1: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "v" || &headers[1] != "y" {
        return Err(CliError::Parse(format!(
            "line 1: expected header `v,y`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut pairs = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let v: f64 = rec[0]
            .parse()
            .map_err(|_| CliError::Parse(format!("line {line}: bad prediction `{}`", &rec[0])))?;
        let y: i64 = rec[1]
            .parse()
            .map_err(|_| CliError::Parse(format!("line {line}: bad label `{}`", &rec[1])))?;
        pairs.push((v, y));
        lines.push(line);
    }
    make_empirical(&pairs).map_err(|e| {
        let line = match e {
            calib_core::CalibError::OutOfRange { index, .. }
            | calib_core::CalibError::BadLabel { index, .. } => lines[index],
            _ => 1,
        };
        CliError::Parse(format!("line {line}: {e}"))
    })
}

pub fn read_input(path: &str) -> Result<(Vec<u8>, EmpiricalDistribution), CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Parse(format!("cannot read {path}: {e}")))?;
    let dist = parse_samples(&bytes)?;
    Ok((bytes, dist))
}

pub fn write_samples(dist: &EmpiricalDistribution) -> String {
    let mut out = String::from("v,y\n");
    for s in dist.samples() {
        out.push_str(&format!("{},{}\n", s.v, s.y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let d = parse_samples(b"v,y\n0.25,1\n0.75,0\n").unwrap();
        assert_eq!(d.to_pairs(), vec![(0.25, 1), (0.75, 0)]);
        assert_eq!(parse_samples(write_samples(&d).as_bytes()).unwrap(), d);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let msg = |b: &[u8]| parse_samples(b).unwrap_err().to_string();
        assert!(msg(b"v,y\n0.2,1\nx,0\n").starts_with("line 3"));
        assert!(msg(b"v,y\n0.2,1\n0.3,1\n1.5,0\n").starts_with("line 4"));
        assert!(msg(b"v,y\n0.2,2\n").starts_with("line 2"));
        assert!(msg(b"a,b\n0.2,1\n").starts_with("line 1"));
        assert!(msg(b"v,y\n").contains("empty"));
    }
}

//! Exit codes, provenance records, and small argument parsers.

use std::fmt::Write as _;
use std::path::Path;

use fhn_core::{Error, Result, RngStream};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_IO: u8 = 4;
const EXIT_BUG: u8 = 1;

pub fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        _ if e.is_numeric() => (EXIT_NUMERIC, "numeric"),
        Error::Io(_) | Error::Format(_) => (EXIT_IO, "I/O"),
        Error::Bug(_) => (EXIT_BUG, "internal"),
        _ => (EXIT_CONFIG, "configuration"),
    }
}

/// `provenance.txt` in `dir`: versions, seed, thread count, and the resolved arguments.
pub fn write_provenance(
    dir: &Path,
    command: &str,
    seed: u64,
    threads: usize,
    config: &dyn std::fmt::Debug,
) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "tool=fhn {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "core=fhn-core {}", fhn_core::VERSION);
    let _ = writeln!(s, "command={command}");
    let _ = writeln!(s, "seed={seed}");
    let _ = writeln!(s, "threads={threads}");
    let _ = writeln!(s, "rng={}", RngStream::ALGORITHM);
    let _ = writeln!(s, "config={config:?}");
    std::fs::write(dir.join("provenance.txt"), s)?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn parse_theta(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("theta '{s}' is not a number list")))?;
    v.try_into().map_err(|_| Error::Config(format!("theta '{s}' needs three values")))
}

pub fn parse_param(s: &str) -> Result<usize> {
    match s {
        "theta0" | "0" => Ok(0),
        "theta1" | "1" => Ok(1),
        "theta2" | "2" => Ok(2),
        _ => Err(Error::Config(format!("unknown parameter '{s}'"))),
    }
}

/// `name=lo:hi:n` into a parameter index and `n` evenly spaced values.
pub fn parse_axis(s: &str) -> Result<(usize, Vec<f64>)> {
    let bad = || Error::Config(format!("grid '{s}' is not name=lo:hi:n"));
    let (name, range) = s.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || !(lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    let values = if n == 1 { vec![lo] } else { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
    Ok((parse_param(name)?, values))
}

pub fn csv_row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_and_thetas() {
        assert_eq!(parse_axis("theta2=2:5:4").unwrap(), (2, vec![2.0, 3.0, 4.0, 5.0]));
        assert_eq!(parse_axis("theta0=-0.2:-0.2:1").unwrap(), (0, vec![-0.2]));
        assert!(parse_axis("theta3=0:1:2").is_err());
        assert!(parse_axis("theta0=0:1").is_err());
        assert_eq!(parse_theta("0.4, 0.4,3.4").unwrap(), [0.4, 0.4, 3.4]);
        assert!(parse_theta("1,2").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(classify(&Error::Config("x".into())).0, EXIT_CONFIG);
        assert_eq!(classify(&Error::NonFinite { step: 3 }).0, EXIT_NUMERIC);
        assert_eq!(classify(&Error::NotSpd { min_eigenvalue: -1.0 }).0, EXIT_NUMERIC);
        assert_eq!(classify(&Error::Format("x".into())).0, EXIT_IO);
    }
}

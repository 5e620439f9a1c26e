//! Byte sizes on the command line: `4096`, `64KiB`, `4 MiB`, `1GiB`, and
//! geometric ranges `lo:hi:xK`.

use crate::error::{Error, Result};

/// Parses a size with an optional binary suffix (`B`, `KiB`, `MiB`, `GiB`;
/// `K`/`M`/`G` are accepted as shorthands for the same powers of two).
pub fn parse_size(text: &str) -> Result<u64> {
    let t = text.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (digits, suffix) = t.split_at(split);
    if digits.is_empty() {
        return Err(Error::Size(format!("bad size {text:?}")));
    }
    let value: u64 = digits
        .parse()
        .map_err(|_| Error::Size(format!("bad size {text:?}")))?;
    let shift = match suffix.trim() {
        "" | "B" => 0,
        "KiB" | "K" | "k" => 10,
        "MiB" | "M" => 20,
        "GiB" | "G" => 30,
        other => return Err(Error::Size(format!("unknown size suffix {other:?} in {text:?}"))),
    };
    value
        .checked_mul(1 << shift)
        .ok_or_else(|| Error::Size(format!("{text:?} overflows")))
}

/// Parses a comma-separated list of sizes and ranges. A range `lo:hi:xK`
/// expands to `lo, lo*K, lo*K^2, ...` up to and including `hi`.
pub fn parse_sizes(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [single] => out.push(parse_size(single)?),
            [lo, hi, step] => {
                let (lo, hi) = (parse_size(lo)?, parse_size(hi)?);
                let factor: u64 = step
                    .trim()
                    .strip_prefix(['x', 'X'])
                    .and_then(|f| f.parse().ok())
                    .filter(|&f| f >= 2)
                    .ok_or_else(|| Error::Size(format!("bad range step {step:?}, expected xK with K >= 2")))?;
                if lo == 0 || lo > hi {
                    return Err(Error::Size(format!("bad range {part:?}")));
                }
                let mut s = lo;
                while s <= hi {
                    out.push(s);
                    match s.checked_mul(factor) {
                        Some(next) => s = next,
                        None => break,
                    }
                }
            }
            _ => return Err(Error::Size(format!("bad size list entry {part:?}"))),
        }
    }
    if out.is_empty() {
        return Err(Error::Size("empty size list".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_size("4194304").unwrap(), 4 << 20);
        assert_eq!(parse_size("64KiB").unwrap(), 65536);
        assert_eq!(parse_size("4 MiB").unwrap(), 4 << 20);
        assert_eq!(parse_size("1GiB").unwrap(), 1 << 30);
        assert_eq!(parse_size("1K").unwrap(), 1024);
        assert!(parse_size("MiB").is_err());
        assert!(parse_size("4TB").is_err());
        assert!(parse_size("-1").is_err());
        assert!(parse_size("99999999999999GiB").is_err());
    }

    #[test]
    fn geometric_range() {
        let s = parse_sizes("1KiB:64MiB:x4").unwrap();
        assert_eq!(s.first(), Some(&1024));
        assert_eq!(s.last(), Some(&(64 << 20)));
        assert_eq!(s.len(), 9);
        assert_eq!(parse_sizes("1:10:x3").unwrap(), vec![1, 3, 9]);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_sizes("1KiB, 8").unwrap(), vec![1024, 8]);
        assert!(parse_sizes("").is_err());
        assert!(parse_sizes("8:1:x2").is_err());
        assert!(parse_sizes("1:8:x1").is_err());
        assert!(parse_sizes("1:8").is_err());
    }
}

//! Coefficient files: one decimal coefficient per line, blocks separated
//! by blank lines, `#` comments ignored.

use std::fmt::Write as _;

use sram_ntt::Polynomial;

use crate::CliError;

/// Read exactly `blocks` blocks of `n` coefficients reduced modulo `q`.
pub fn parse_blocks(text: &str, blocks: usize, n: usize, q: u64) -> Result<Vec<Polynomial>, CliError> {
    let mut parsed: Vec<Vec<u64>> = Vec::new();
    let mut current: Vec<u64> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        last_line = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if !current.is_empty() {
                parsed.push(std::mem::take(&mut current));
            }
            continue;
        }
        let value: u64 = line.parse().map_err(|_| CliError::FileFormat {
            line: i + 1,
            message: format!("`{line}` is not a non-negative integer"),
        })?;
        if value >= q {
            return Err(CliError::FileFormat {
                line: i + 1,
                message: format!("coefficient {value} is not reduced modulo {q}"),
            });
        }
        current.push(value);
    }
    if !current.is_empty() {
        parsed.push(current);
    }
    if parsed.len() != blocks {
        return Err(CliError::FileFormat {
            line: last_line,
            message: format!("expected {blocks} coefficient blocks, found {}", parsed.len()),
        });
    }
    parsed
        .into_iter()
        .map(|block| {
            if block.len() != n {
                return Err(CliError::LengthMismatch {
                    expected: n,
                    got: block.len(),
                });
            }
            Ok(Polynomial::new(block, q).expect("range checked while parsing"))
        })
        .collect()
}

pub fn format_block(p: &Polynomial) -> String {
    let mut out = String::new();
    for c in p.coeffs() {
        let _ = writeln!(out, "{c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blocks() {
        let text = "1\n0\n\n# s\n3\n4\n";
        let blocks = parse_blocks(text, 2, 2, 17).unwrap();
        assert_eq!(blocks[0].coeffs(), &[1, 0]);
        assert_eq!(blocks[1].coeffs(), &[3, 4]);
        assert_eq!(format_block(&blocks[1]), "3\n4\n");
    }

    #[test]
    fn malformed() {
        assert!(matches!(
            parse_blocks("1\nx\n\n1\n2\n", 2, 2, 17),
            Err(CliError::FileFormat { line: 2, .. })
        ));
        assert!(matches!(
            parse_blocks("1\n20\n\n1\n2\n", 2, 2, 17),
            Err(CliError::FileFormat { line: 2, .. })
        ));
        assert!(matches!(
            parse_blocks("1\n2\n", 2, 2, 17),
            Err(CliError::FileFormat { .. })
        ));
        assert!(matches!(
            parse_blocks("1\n2\n3\n\n1\n2\n", 2, 2, 17),
            Err(CliError::LengthMismatch { expected: 2, got: 3 })
        ));
    }
}

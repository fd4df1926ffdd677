//! Plain-text coefficient dump: one line per block,
//! `<component> <bx> <by> <c0> ... <c63>` with coefficients in natural order.

use super::QuantizedJpeg;
use crate::error::{Error, Result};
use std::fmt::Write;

pub fn dump_coefficients(j: &QuantizedJpeg) -> String {
    let mut out = String::new();
    for (ci, comp) in j.components().iter().enumerate() {
        for by in 0..comp.blocks_tall() {
            for bx in 0..comp.blocks_wide() {
                write!(out, "{ci} {bx} {by}").unwrap();
                for v in comp.block(bx, by) {
                    write!(out, " {v}").unwrap();
                }
                out.push('\n');
            }
        }
    }
    out
}

/// One parsed dump line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpRow {
    pub component: usize,
    pub bx: usize,
    pub by: usize,
    pub coeffs: [i16; 64],
}

pub fn parse_dump(text: &str) -> Result<Vec<DumpRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Malformed(format!("dump line {}", i + 1));
            let fields: Vec<i64> = line
                .split_ascii_whitespace()
                .map(|f| f.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            if fields.len() != 67 || fields[..3].iter().any(|&v| v < 0) {
                return Err(bad());
            }
            let mut coeffs = [0i16; 64];
            for (slot, &v) in coeffs.iter_mut().zip(&fields[3..]) {
                *slot = i16::try_from(v).map_err(|_| bad())?;
            }
            Ok(DumpRow { component: fields[0] as usize, bx: fields[1] as usize, by: fields[2] as usize, coeffs })
        })
        .collect()
}

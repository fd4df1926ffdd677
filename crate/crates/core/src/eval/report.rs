//! Record storage and aggregate tables.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{thresholds, EvalRecord, N_THRESHOLDS};
use crate::Result;

/// Writes one JSON object per line. Readers skip lines starting with `#`.
pub fn write_records(records: &[EvalRecord], mut w: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(r: impl BufRead) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() && !line.starts_with('#') {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct CellStats {
    pub mean_max_f1: f64,
    pub count: usize,
}

/// Mean per-image max F1 per `(q1, q2)` cell, negative controls excluded.
pub fn aggregate_by_quality(records: &[EvalRecord]) -> BTreeMap<(u8, u8), CellStats> {
    let mut sums: BTreeMap<(u8, u8), (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.negative_control) {
        let e = sums.entry((r.q1, r.q2)).or_default();
        e.0 += r.max_f1;
        e.1 += 1;
    }
    sums.into_iter().map(|(k, (s, n))| (k, CellStats { mean_max_f1: s / n as f64, count: n })).collect()
}

/// All `(q1, q2)` pairs with `lo <= q1 <= q2 <= hi`.
pub fn quality_cells(lo: u8, hi: u8) -> Vec<(u8, u8)> {
    (lo..=hi).flat_map(|q1| (q1..=hi).map(move |q2| (q1, q2))).collect()
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct DetectorSummary {
    pub cases: usize,
    pub mean_max_f1: f64,
    pub mean_auc_005: f64,
    pub mean_auc_01: f64,
    pub mean_auc_02: f64,
}

/// Per-detector means over positive cases.
pub fn aggregate_by_detector(records: &[EvalRecord]) -> BTreeMap<String, DetectorSummary> {
    let mut out: BTreeMap<String, DetectorSummary> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.negative_control) {
        let s = out.entry(r.detector.clone()).or_default();
        s.cases += 1;
        s.mean_max_f1 += r.max_f1;
        s.mean_auc_005 += r.auc_005;
        s.mean_auc_01 += r.auc_01;
        s.mean_auc_02 += r.auc_02;
    }
    for s in out.values_mut() {
        let n = s.cases as f64;
        s.mean_max_f1 /= n;
        s.mean_auc_005 /= n;
        s.mean_auc_01 /= n;
        s.mean_auc_02 /= n;
    }
    out
}

/// Mean `(threshold, fp_rate, tp_rate)` per sweep step for one detector.
pub fn roc_points(records: &[EvalRecord], detector: &str) -> Vec<(f64, f64, f64)> {
    let rs: Vec<&EvalRecord> = records.iter().filter(|r| r.detector == detector && !r.negative_control).collect();
    let mut out = Vec::with_capacity(N_THRESHOLDS);
    for (k, t) in thresholds().iter().enumerate() {
        let n = rs.len().max(1) as f64;
        let fp = rs.iter().map(|r| r.samples[k].fp_rate).sum::<f64>() / n;
        let tp = rs.iter().map(|r| r.samples[k].tp_rate).sum::<f64>() / n;
        out.push((*t, fp, tp));
    }
    out
}

/// Binary PGM of the `(q1, q2)` grid over `lo..=hi`, `scale` pixels per
/// cell; q1 runs down, q2 across. Empty cells are black.
pub fn write_f1_heatmap(
    cells: &BTreeMap<(u8, u8), CellStats>,
    lo: u8,
    hi: u8,
    scale: usize,
    mut w: impl Write,
) -> Result<()> {
    let n = usize::from(hi - lo) + 1;
    let side = n * scale;
    write!(w, "P5\n{side} {side}\n255\n")?;
    let mut row = vec![0u8; side];
    for y in 0..side {
        let q1 = lo + (y / scale) as u8;
        for (x, px) in row.iter_mut().enumerate() {
            let q2 = lo + (x / scale) as u8;
            *px = cells.get(&(q1, q2)).map_or(0, |c| (c.mean_max_f1 * 255.0).round() as u8);
        }
        w.write_all(&row)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::RocSample;

    fn record(q1: u8, q2: u8, f1: f64) -> EvalRecord {
        let samples =
            thresholds().iter().map(|&t| RocSample { threshold: t, fp_rate: 1.0 - t, tp_rate: 1.0 - t, f1 }).collect();
        EvalRecord::new("c", "d", q1, q2, false, samples)
    }

    #[test]
    fn upper_triangle_has_231_cells() {
        assert_eq!(quality_cells(80, 100).len(), 231);
    }

    #[test]
    fn single_record_cell_is_its_max_f1() {
        let cells = aggregate_by_quality(&[record(80, 95, 0.42)]);
        assert_eq!(cells[&(80, 95)], CellStats { mean_max_f1: 0.42, count: 1 });
    }

    #[test]
    fn negative_controls_are_excluded() {
        let mut neg = record(80, 95, 0.0);
        neg.negative_control = true;
        let cells = aggregate_by_quality(&[record(80, 95, 0.5), neg]);
        assert_eq!(cells[&(80, 95)].count, 1);
    }

    #[test]
    fn records_round_trip_through_jsonl() {
        let rs = vec![record(80, 95, 0.3), record(90, 90, 0.1)];
        let mut buf = Vec::new();
        write_records(&rs, &mut buf).unwrap();
        assert_eq!(read_records(&buf[..]).unwrap(), rs);
    }

    #[test]
    fn heatmap_size() {
        let cells = aggregate_by_quality(&[record(80, 95, 1.0)]);
        let mut buf = Vec::new();
        write_f1_heatmap(&cells, 80, 100, 4, &mut buf).unwrap();
        let header = b"P5\n84 84\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 84 * 84);
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::corpus::Dataset;
use super::corrupt::CorruptionKind;
use super::feedback::FeedbackMode;
use super::CaseResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Percent, two decimals.
    pub acc: f64,
    /// Percent, two decimals.
    pub iso: f64,
    /// Mean over cases, two decimals.
    pub ged: f64,
    pub n: usize,
}

pub type CellMap = BTreeMap<Dataset, BTreeMap<FeedbackMode, BTreeMap<CorruptionKind, Cell>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricsReport {
    pub cells: CellMap,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Running (acc, iso, ged, n) totals for one cell.
type Totals = (u64, u64, u64, usize);

/// Per-cell means. Independent of result order.
pub fn aggregate(results: &[CaseResult]) -> MetricsReport {
    let mut sums: BTreeMap<(Dataset, FeedbackMode, CorruptionKind), Totals> = BTreeMap::new();
    for r in results {
        let s = sums.entry((r.dataset, r.mode, r.kind)).or_default();
        s.0 += u64::from(r.acc);
        s.1 += u64::from(r.iso);
        s.2 += u64::from(r.ged);
        s.3 += 1;
    }
    let mut cells = CellMap::new();
    for ((dataset, mode, kind), (acc, iso, ged, n)) in sums {
        let mean = |x: u64| x as f64 / n as f64;
        cells.entry(dataset).or_default().entry(mode).or_default().insert(
            kind,
            Cell { acc: round2(100.0 * mean(acc)), iso: round2(100.0 * mean(iso)), ged: round2(mean(ged)), n },
        );
    }
    MetricsReport { cells }
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn cell(&self, dataset: Dataset, mode: FeedbackMode, kind: CorruptionKind) -> Option<&Cell> {
        self.cells.get(&dataset)?.get(&mode)?.get(&kind)
    }

    /// One block per dataset: rows are feedback modes, columns are
    /// corruption kinds with Acc / ISO / GED. Empty cells show "–".
    pub fn to_table(&self) -> String {
        let modes: BTreeSet<FeedbackMode> =
            self.cells.values().flat_map(|m| m.keys().copied()).collect();
        let kinds: BTreeSet<CorruptionKind> = self
            .cells
            .values()
            .flat_map(|m| m.values().flat_map(|k| k.keys().copied()))
            .collect();
        let mut out = String::new();
        for (dataset, by_mode) in &self.cells {
            let mut rows: Vec<Vec<String>> = vec![std::iter::once("mode".to_string())
                .chain(kinds.iter().flat_map(|_| ["Acc".to_string(), "ISO".into(), "GED".into()]))
                .collect()];
            for mode in &modes {
                let mut row = vec![mode.to_string()];
                for kind in &kinds {
                    match by_mode.get(mode).and_then(|k| k.get(kind)) {
                        Some(c) => row.extend([
                            format!("{:.2}", c.acc),
                            format!("{:.2}", c.iso),
                            format!("{:.2}", c.ged),
                        ]),
                        None => row.extend(["–".to_string(), "–".to_string(), "–".to_string()]),
                    }
                }
                rows.push(row);
            }
            let mut widths: Vec<usize> = (0..rows[0].len())
                .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            widths[0] = widths[0].max(dataset.as_str().len());
            // Widen the first metric column of a group if the kind name needs it.
            for (g, kind) in kinds.iter().enumerate() {
                let group: usize = widths[1 + 3 * g..4 + 3 * g].iter().sum::<usize>() + 4;
                let need = kind.as_str().len();
                if need > group {
                    widths[1 + 3 * g] += need - group;
                }
            }
            let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
            let mut head = vec![pad(dataset.as_str(), widths[0])];
            for (g, kind) in kinds.iter().enumerate() {
                let group: usize = widths[1 + 3 * g..4 + 3 * g].iter().sum::<usize>() + 4;
                head.push(pad(kind.as_str(), group));
            }
            out.push_str(head.join("  ").trim_end());
            out.push('\n');
            for row in rows {
                let line: Vec<String> = row.iter().zip(&widths).map(|(s, w)| pad(s, *w)).collect();
                out.push_str(line.join("  ").trim_end());
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

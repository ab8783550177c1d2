//! Cross-seed summaries of run CSVs.
//!
//! Quantiles use linear interpolation between order statistics: with
//! sorted values `v₀ ≤ … ≤ v_{n−1}` and `h = (n − 1)q`, the `q` quantile is
//! `v_⌊h⌋ + (h − ⌊h⌋)(v_{⌊h⌋+1} − v_⌊h⌋)`.

use crate::run::CSV_HEADER;
use crate::{fmt_float, CliError};
use conseq::learning::Strategy;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub const DEFAULT_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];
const METRICS: [&str; 5] = [
    "utility",
    "effective_utility",
    "dp_violation",
    "eop_violation",
    "positives_collected",
];

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Group key ordered like run output: strategy, λ, t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    strategy: Strategy,
    lambda: OrderedF64,
    t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedF64(f64);

impl Eq for OrderedF64 {}

impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Default)]
struct Group {
    seeds: BTreeSet<u64>,
    values: [Vec<f64>; 5],
}

fn ingest(path: &Path, at: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Ingest(format!("{}: row {at}: {msg}", path.display()))
}

fn read_into(path: &Path, groups: &mut BTreeMap<Key, Group>) -> Result<(), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(CliError::Ingest(format!(
            "{}: header `{}` does not match the run schema `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(","),
            CSV_HEADER.join(",")
        )));
    }
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| ingest(path, row, e))?;
        let num = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| ingest(path, row, format!("column `{}`: `{}` is not a number", CSV_HEADER[k], &rec[k])))
        };
        let int = |k: usize| -> Result<u64, CliError> {
            rec[k]
                .parse::<u64>()
                .map_err(|_| ingest(path, row, format!("column `{}`: `{}` is not an integer", CSV_HEADER[k], &rec[k])))
        };
        let strategy: Strategy = rec[0].parse().map_err(|e| ingest(path, row, e))?;
        let key = Key {
            strategy,
            lambda: OrderedF64(num(2)?),
            t: int(3)? as usize,
        };
        let seed = int(1)?;
        let group = groups.entry(key).or_default();
        if !group.seeds.insert(seed) {
            return Err(ingest(
                path,
                row,
                format!("duplicate row for strategy {} seed {seed} lambda {} t {}", &rec[0], &rec[2], key.t),
            ));
        }
        for (m, slot) in group.values.iter_mut().enumerate() {
            slot.push(num(4 + m)?);
        }
    }
    Ok(())
}

fn quantile_label(q: f64) -> String {
    format!("q{}", fmt_float(q * 100.0))
}

/// Summarize the rows of `paths` into a CSV string.
pub fn aggregate_files(paths: &[PathBuf], quantiles: &[f64]) -> Result<String, CliError> {
    if paths.is_empty() {
        return Err(CliError::Ingest("no input files matched".into()));
    }
    if let Some(q) = quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(CliError::Config(format!("quantile {q} outside [0, 1]")));
    }
    let mut groups = BTreeMap::new();
    for p in paths {
        read_into(p, &mut groups)?;
    }
    let mut header = vec!["strategy".to_string(), "lambda".into(), "t".into(), "seeds".into()];
    for m in METRICS {
        header.push(format!("{m}_median"));
        for &q in quantiles {
            header.push(format!("{m}_{}", quantile_label(q)));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Ingest(format!("writing CSV: {e}"));
    w.write_record(&header).map_err(err)?;
    for (key, mut group) in groups {
        let mut row = vec![
            key.strategy.as_str().to_string(),
            fmt_float(key.lambda.0),
            key.t.to_string(),
            group.seeds.len().to_string(),
        ];
        for values in group.values.iter_mut() {
            values.sort_by(f64::total_cmp);
            row.push(fmt_float(quantile(values, 0.5)));
            for &q in quantiles {
                row.push(fmt_float(quantile(values, q)));
            }
        }
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Ingest(format!("writing CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Expand a glob into a sorted list of files.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, CliError> {
    let paths = glob::glob(pattern).map_err(|e| CliError::Config(format!("bad glob `{pattern}`: {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        out.push(p.map_err(|e| CliError::Ingest(e.to_string()))?);
    }
    out.sort();
    Ok(out)
}

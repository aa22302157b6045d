use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{HarnessError, Result};

/// One line of a results table. `width` is empty for decoders without a
/// beam; `std` is empty with fewer than two seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub size: usize,
    pub width: Option<usize>,
    pub mean_rel_err: f64,
    pub std: Option<f64>,
    pub seeds: usize,
}

pub const COLUMNS: [&str; 6] = ["model", "size", "width", "mean_rel_err", "std", "seeds"];

/// Mean and sample standard deviation; the deviation needs two values.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (ss / (n - 1) as f64).sqrt()
    });
    (mean, std)
}

/// Row over per-seed mean errors, in seed order.
pub fn aggregate(model: &str, size: usize, width: Option<usize>, per_seed: &[f64]) -> Result<ResultRow> {
    if let Some(bad) = per_seed.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(HarnessError::Invariant(format!("{model} at n = {size}: relative error {bad}")));
    }
    let (mean, std) = mean_std(per_seed);
    Ok(ResultRow { model: model.to_string(), size, width, mean_rel_err: mean, std, seeds: per_seed.len() })
}

/// Size, then model, then width.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.size
            .cmp(&b.size)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.width.cmp(&b.width))
    });
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(COLUMNS) {
        return Err(HarnessError::Data(format!("{}: unexpected columns", path.display())));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn write_json(path: &Path, rows: &[ResultRow]) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(rows)? + "\n")?;
    Ok(())
}

/// Replaces the rows of the models in `rows` inside `results.csv` and
/// `results.json` under `dir`, keeping other models' rows. Returns the table.
pub fn merge_results(dir: &Path, rows: Vec<ResultRow>) -> Result<Vec<ResultRow>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    let mut table = if csv_path.exists() { read_csv(&csv_path)? } else { vec![] };
    table.retain(|r| !rows.iter().any(|n| n.model == r.model));
    table.extend(rows);
    sort_rows(&mut table);
    write_csv(&csv_path, &table)?;
    write_json(&dir.join("results.json"), &table)?;
    Ok(table)
}

/// Sets `metrics[key] = value` in `dir/metrics.json`, keys sorted.
pub fn merge_metrics(dir: &Path, key: &str, value: Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join("metrics.json");
    let mut all = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str::<serde_json::Map<String, Value>>(&text)?,
        Err(_) => serde_json::Map::new(),
    };
    all.insert(key.to_string(), value);
    fs::write(path, serde_json::to_string_pretty(&all)? + "\n")?;
    Ok(())
}

//! Result tables: wide CSV/JSON rows, plot-ready long CSV and a text
//! summary of shape checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One sweep point, aggregated over its trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub index: usize,
    pub config_hash: String,
    pub benchmark: String,
    pub nodelets: usize,
    pub threads: Option<usize>,
    pub strategy: Option<String>,
    pub scale: Option<u32>,
    pub elements: Option<u64>,
    pub block_size: Option<u64>,
    pub permutation: Option<String>,
    pub layout: Option<String>,
    pub n: Option<usize>,
    pub cores_per_nodelet: Option<usize>,
    pub seed: u64,
    pub trials: usize,
    pub bw_mb_mean: f64,
    pub bw_mb_min: f64,
    pub bw_mb_max: f64,
    pub util_stream: f64,
    pub util_ncdimm: f64,
    pub migrations: u64,
    pub spawns: u64,
    pub sim_cycles: u64,
    pub verified: bool,
}

pub const CSV_HEADER: [&str; 24] = [
    "index",
    "config_hash",
    "benchmark",
    "nodelets",
    "threads",
    "strategy",
    "scale",
    "elements",
    "block_size",
    "permutation",
    "layout",
    "n",
    "cores_per_nodelet",
    "seed",
    "trials",
    "bw_mb_mean",
    "bw_mb_min",
    "bw_mb_max",
    "util_stream",
    "util_ncdimm",
    "migrations",
    "spawns",
    "sim_cycles",
    "verified",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl ResultRow {
    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.index.to_string(),
            self.config_hash.clone(),
            self.benchmark.clone(),
            self.nodelets.to_string(),
            opt(&self.threads),
            opt(&self.strategy),
            opt(&self.scale),
            opt(&self.elements),
            opt(&self.block_size),
            opt(&self.permutation),
            opt(&self.layout),
            opt(&self.n),
            opt(&self.cores_per_nodelet),
            self.seed.to_string(),
            self.trials.to_string(),
            format!("{:.3}", self.bw_mb_mean),
            format!("{:.3}", self.bw_mb_min),
            format!("{:.3}", self.bw_mb_max),
            format!("{:.4}", self.util_stream),
            format!("{:.4}", self.util_ncdimm),
            self.migrations.to_string(),
            self.spawns.to_string(),
            self.sim_cycles.to_string(),
            self.verified.to_string(),
        ]
    }

    /// Series label and x-axis value for plotting.
    fn series_and_x(&self) -> (String, &'static str, String) {
        match self.benchmark.as_str() {
            "stream" => (opt(&self.strategy), "threads", opt(&self.threads)),
            "chase" => (opt(&self.permutation), "block_size", opt(&self.block_size)),
            "spmv" => (opt(&self.layout), "n", opt(&self.n)),
            _ => (String::from("model"), "cores_per_nodelet", opt(&self.cores_per_nodelet)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        Self { rows }
    }

    /// Concatenates tables, renumbering rows in order.
    pub fn merge(tables: impl IntoIterator<Item = ResultTable>) -> Self {
        let mut rows: Vec<ResultRow> = tables.into_iter().flat_map(|t| t.rows).collect();
        for (i, r) in rows.iter_mut().enumerate() {
            r.index = i;
        }
        Self { rows }
    }

    /// One row per sweep point; the header is always written.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.csv_fields()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows serialize")
    }

    /// Long format: one line per (row, metric).
    pub fn to_long_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "benchmark", "nodelets", "series", "x_name", "x", "metric", "value"])
            .expect("in-memory write");
        for r in &self.rows {
            let (series, x_name, x) = r.series_and_x();
            let metrics = [
                ("bw_mb_mean", format!("{:.3}", r.bw_mb_mean)),
                ("bw_mb_min", format!("{:.3}", r.bw_mb_min)),
                ("bw_mb_max", format!("{:.3}", r.bw_mb_max)),
                ("util_stream", format!("{:.4}", r.util_stream)),
                ("util_ncdimm", format!("{:.4}", r.util_ncdimm)),
                ("migrations", r.migrations.to_string()),
            ];
            for (m, v) in metrics {
                w.write_record([
                    r.index.to_string(),
                    r.benchmark.clone(),
                    r.nodelets.to_string(),
                    series.clone(),
                    x_name.to_string(),
                    x.clone(),
                    m.to_string(),
                    v,
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        if self.rows.is_empty() {
            return out;
        }
        out.push(Check::new(
            "all results verified",
            self.rows.iter().all(|r| r.verified),
            format!("{} rows", self.rows.len()),
        ));
        stream_checks(&self.rows, &mut out);
        chase_checks(&self.rows, &mut out);
        spmv_checks(&self.rows, &mut out);
        out
    }

    pub fn summary(&self) -> String {
        let checks = self.checks();
        let mut s = String::new();
        let _ = writeln!(s, "{} rows, {} checks", self.rows.len(), checks.len());
        for c in &checks {
            let _ = writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

const LOCAL_STRATEGIES: [&str; 2] = ["serial_spawn", "recursive_spawn"];
const REMOTE_STRATEGIES: [&str; 2] = ["serial_remote_spawn", "recursive_remote_spawn"];

fn stream_checks(rows: &[ResultRow], out: &mut Vec<Check>) {
    let stream: Vec<&ResultRow> = rows.iter().filter(|r| r.benchmark == "stream").collect();
    // thread scaling per (nodelets, strategy)
    let mut curves: BTreeMap<(usize, String), Vec<(usize, f64)>> = BTreeMap::new();
    for r in &stream {
        if let (Some(t), Some(s)) = (r.threads, &r.strategy) {
            curves.entry((r.nodelets, s.clone())).or_default().push((t, r.bw_mb_mean));
        }
    }
    for ((nodelets, strategy), mut pts) in curves {
        if pts.len() < 2 {
            continue;
        }
        pts.sort_by_key(|p| p.0);
        let plateau = pts.iter().map(|p| p.1).fold(0.0, f64::max);
        let knee = pts.iter().position(|p| p.1 >= 0.9 * plateau).unwrap_or(0);
        let monotone = pts[..=knee].windows(2).all(|w| w[1].1 >= w[0].1);
        out.push(Check::new(
            format!("stream {strategy} on {nodelets} nodelets rises to its plateau"),
            monotone,
            format!("plateau {plateau:.1} MB/s reached within 10% at {} threads", pts[knee].0),
        ));
    }
    // remote spawns versus local spawns at the largest shared thread count
    let mut by_threads: BTreeMap<(usize, usize), BTreeMap<String, f64>> = BTreeMap::new();
    for r in &stream {
        if let (Some(t), Some(s)) = (r.threads, &r.strategy) {
            by_threads.entry((r.nodelets, t)).or_default().insert(s.clone(), r.bw_mb_mean);
        }
    }
    let complete = by_threads
        .iter()
        .filter(|(k, m)| k.0 > 1 && LOCAL_STRATEGIES.iter().chain(&REMOTE_STRATEGIES).all(|s| m.contains_key(*s)))
        .max_by_key(|(k, _)| (k.0, k.1));
    if let Some(((nodelets, threads), m)) = complete {
        let best_local = LOCAL_STRATEGIES.iter().map(|s| m[*s]).fold(0.0, f64::max);
        let worst_remote = REMOTE_STRATEGIES.iter().map(|s| m[*s]).fold(f64::INFINITY, f64::min);
        out.push(Check::new(
            format!("remote spawns at least 2x local on {nodelets} nodelets, {threads} threads"),
            worst_remote >= 2.0 * best_local,
            format!("worst remote {worst_remote:.1} MB/s, best local {best_local:.1} MB/s"),
        ));
    }
}

fn chase_checks(rows: &[ResultRow], out: &mut Vec<Check>) {
    let mut curves: BTreeMap<(usize, String), BTreeMap<u64, &ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.benchmark == "chase") {
        if let (Some(b), Some(p)) = (r.block_size, &r.permutation) {
            curves.entry((r.nodelets, p.clone())).or_default().insert(b, r);
        }
    }
    for ((nodelets, perm), pts) in &curves {
        let label = format!("chase {perm} on {nodelets} nodelets");
        let flat: Vec<f64> = pts.range(8..).map(|(_, r)| r.bw_mb_mean).collect();
        if flat.len() >= 2 {
            let cv = coefficient_of_variation(&flat);
            out.push(Check::new(
                format!("{label}: flat for blocks >= 8"),
                cv <= 0.15,
                format!("coefficient of variation {cv:.3}"),
            ));
        }
        if let (Some(b1), Some(b4), Some(b64)) = (pts.get(&1), pts.get(&4), pts.get(&64)) {
            let (r1, r4) = (b1.bw_mb_mean / b64.bw_mb_mean, b4.bw_mb_mean / b64.bw_mb_mean);
            out.push(Check::new(
                format!("{label}: block 1 at most half of block 64"),
                r1 <= 0.5,
                format!("ratio {r1:.3}"),
            ));
            out.push(Check::new(
                format!("{label}: block 4 within 25% of block 64"),
                r4 >= 0.75,
                format!("ratio {r4:.3}"),
            ));
        }
        let band: Vec<f64> = pts.range(4..).map(|(_, r)| r.util_stream).collect();
        if !band.is_empty() {
            let inside = band.iter().all(|u| (0.25..=0.80).contains(u));
            let high = band.iter().filter(|&&u| u >= 0.5).count();
            out.push(Check::new(
                format!("{label}: utilization in [0.25, 0.80], mostly >= 0.50"),
                inside && 2 * high > band.len(),
                format!(
                    "range {:.3}..{:.3}, {high} of {} at or above 0.50",
                    band.iter().copied().fold(f64::INFINITY, f64::min),
                    band.iter().copied().fold(0.0, f64::max),
                    band.len()
                ),
            ));
        }
    }
}

fn spmv_checks(rows: &[ResultRow], out: &mut Vec<Check>) {
    let mut by_n: BTreeMap<(usize, usize, usize), BTreeMap<String, &ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.benchmark == "spmv") {
        if let (Some(n), Some(l), Some(t)) = (r.n, &r.layout, r.threads) {
            by_n.entry((r.nodelets, n, t)).or_default().insert(l.clone(), r);
        }
    }
    for ((nodelets, n, threads), m) in by_n {
        let (Some(local), Some(d1), Some(d2)) = (m.get("local"), m.get("1d"), m.get("2d")) else {
            continue;
        };
        out.push(Check::new(
            format!("spmv n={n} on {nodelets} nodelets: 2d > 1d > local"),
            d2.bw_mb_mean > d1.bw_mb_mean && d1.bw_mb_mean > local.bw_mb_mean,
            format!(
                "{:.1} / {:.1} / {:.1} MB/s",
                d2.bw_mb_mean, d1.bw_mb_mean, local.bw_mb_mean
            ),
        ));
        let bound = 2 * threads as u64 + nodelets as u64;
        out.push(Check::new(
            format!("spmv n={n} on {nodelets} nodelets: migration counts"),
            d2.migrations <= bound && d1.migrations >= 10 * d2.migrations,
            format!("2d {} (bound {bound}), 1d {}", d2.migrations, d1.migrations),
        ));
    }
}

/// Population coefficient of variation.
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

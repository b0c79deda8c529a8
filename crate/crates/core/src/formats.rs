//! Text formats shared with the `dm` CLI.
//!
//! | artifact | layout |
//! |---|---|
//! | assignment | CSV `unit_id,district`, canonical labels |
//! | centroid | `# n=<n> T=<T>`, then `i,j,count` rows (`i < j`, `count > 0`, sorted) |
//! | cut instance | `# n=<n> k=<k>`, then `i,j,s` rows at full precision |
//! | histogram | `# theta=<kind> centroid=<file> T=<T>`, then one `d²` per line |
//! | votes | CSV `unit_id,votes_a,votes_b` |
//! | explicit θ | CSV `unit_a,unit_b,theta`; unlisted pairs weigh 1 |
//! | plan directory | `plan_<state>.csv` files plus `manifest.json` |
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! format reads back bit-exactly. Parse errors name the file and line.
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{DistanceHistogram, VoteTable};
use crate::centroid::CentroidMatrix;
use crate::chain::PlanSink;
use crate::districting::Plan;
use crate::error::{Error, Result};
use crate::graph::DualGraph;
use crate::kcut::KCutInstance;
use crate::metric::ExplicitTheta;
use crate::pairs::{pair_count, tri_index};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Hex SHA-256 of a byte string; used to fingerprint artifacts in manifests.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// [`digest`] of a file's contents.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(digest(&bytes))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn at(source: &str, line: u64) -> String {
    format!("{source}:{line}")
}

/// CSV records with their 1-based line numbers, shifted by `line_offset`.
fn records(
    source: &str,
    body: &str,
    line_offset: u64,
    header: Option<&[&str]>,
) -> Result<Vec<(u64, StringRecord)>> {
    let mut reader = ReaderBuilder::new()
        .has_headers(header.is_some())
        .trim(Trim::All)
        .from_reader(body.as_bytes());
    if let Some(expected) = header {
        let got = reader
            .headers()
            .map_err(|e| Error::parse(at(source, line_offset + 1), e))?;
        if got.iter().ne(expected.iter().copied()) {
            return Err(Error::parse(
                at(source, line_offset + 1),
                format!(
                    "expected header {:?}, found {:?}",
                    expected.join(","),
                    got.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(at(source, line_offset + line), e)
        })?;
        let line = line_offset + rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    source: &str,
    line: u64,
    rec: &StringRecord,
    col: usize,
    name: &str,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec
        .get(col)
        .ok_or_else(|| Error::parse(at(source, line), format!("missing column {name:?}")))?;
    raw.parse()
        .map_err(|e| Error::parse(at(source, line), format!("{name} {raw:?}: {e}")))
}

fn check_width(source: &str, line: u64, rec: &StringRecord, width: usize) -> Result<()> {
    if rec.len() != width {
        return Err(Error::parse(
            at(source, line),
            format!("expected {width} columns, found {}", rec.len()),
        ));
    }
    Ok(())
}

/// Splits off a leading `# key=value ...` line.
fn split_header<'t>(source: &str, text: &'t str) -> Result<(BTreeMap<&'t str, &'t str>, &'t str)> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let first = first.trim_end_matches('\r');
    let fields = first.strip_prefix('#').ok_or_else(|| {
        Error::parse(
            at(source, 1),
            format!("expected a '#' header, found {first:?}"),
        )
    })?;
    let mut map = BTreeMap::new();
    for token in fields.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| {
            Error::parse(
                at(source, 1),
                format!("header token {token:?} is not key=value"),
            )
        })?;
        map.insert(k, v);
    }
    Ok((map, rest))
}

fn header_value<T: std::str::FromStr>(
    source: &str,
    map: &BTreeMap<&str, &str>,
    key: &str,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = map
        .get(key)
        .ok_or_else(|| Error::parse(at(source, 1), format!("header is missing {key}=")))?;
    raw.parse()
        .map_err(|e| Error::parse(at(source, 1), format!("header {key}={raw}: {e}")))
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = WriterBuilder::new().from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn display_name(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------- assignment

const ASSIGNMENT_HEADER: [&str; 2] = ["unit_id", "district"];

pub fn format_assignment(g: &DualGraph, plan: &Plan) -> Result<String> {
    plan.check_size(g.n())?;
    let plan = plan.canonical();
    Ok(csv_string(
        &ASSIGNMENT_HEADER,
        g.units()
            .iter()
            .zip(plan.assignment())
            .map(|(u, d)| vec![u.id.clone(), d.to_string()]),
    ))
}

/// Reads an assignment; rows may come in any order but must cover every
/// unit exactly once. Labels are canonicalized.
pub fn parse_assignment(source: &str, text: &str, g: &DualGraph) -> Result<Plan> {
    let mut labels: Vec<Option<u32>> = vec![None; g.n()];
    for (line, rec) in records(source, text, 0, Some(&ASSIGNMENT_HEADER))? {
        check_width(source, line, &rec, 2)?;
        let id = &rec[0];
        let unit = g
            .unit_index(id)
            .ok_or_else(|| Error::parse(at(source, line), format!("unknown unit id {id:?}")))?;
        if labels[unit].is_some() {
            return Err(Error::parse(
                at(source, line),
                format!("unit {id:?} assigned twice"),
            ));
        }
        labels[unit] = Some(field(source, line, &rec, 1, "district")?);
    }
    if let Some(missing) = labels.iter().position(Option::is_none) {
        return Err(Error::parse(
            source,
            format!("unit {:?} has no district", g.units()[missing].id),
        ));
    }
    let labels: Vec<u32> = labels.into_iter().map(|l| l.expect("checked")).collect();
    Plan::from_labels(&labels)
}

pub fn write_assignment(path: impl AsRef<Path>, g: &DualGraph, plan: &Plan) -> Result<()> {
    write_text(path.as_ref(), &format_assignment(g, plan)?)
}

pub fn read_assignment(path: impl AsRef<Path>, g: &DualGraph) -> Result<Plan> {
    let path = path.as_ref();
    parse_assignment(&display_name(path), &read_text(path)?, g)
}

// ------------------------------------------------------------------ centroid

pub fn format_centroid(acc: &CentroidMatrix) -> String {
    let mut entries = acc.entries();
    entries.sort_unstable();
    let mut out = format!("# n={} T={}\n", acc.n(), acc.samples());
    out.push_str(&csv_string(
        &[],
        entries
            .into_iter()
            .map(|(i, j, c)| vec![i.to_string(), j.to_string(), c.to_string()]),
    ));
    out
}

pub fn parse_centroid(source: &str, text: &str) -> Result<CentroidMatrix> {
    let (header, body) = split_header(source, text)?;
    let n: usize = header_value(source, &header, "n")?;
    let samples: u64 = header_value(source, &header, "T")?;
    let mut triples = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    for (line, rec) in records(source, body, 1, None)? {
        check_width(source, line, &rec, 3)?;
        let i: usize = field(source, line, &rec, 0, "i")?;
        let j: usize = field(source, line, &rec, 1, "j")?;
        let count: u64 = field(source, line, &rec, 2, "count")?;
        if i >= j || j >= n {
            return Err(Error::parse(
                at(source, line),
                format!("pair ({i}, {j}) is not i < j < {n}"),
            ));
        }
        if count == 0 || count > samples {
            return Err(Error::parse(
                at(source, line),
                format!("count {count} outside 1..={samples}"),
            ));
        }
        if prev.is_some_and(|p| p >= (i, j)) {
            return Err(Error::parse(
                at(source, line),
                "rows are not strictly sorted by (i, j)",
            ));
        }
        prev = Some((i, j));
        triples.push((i, j, count));
    }
    CentroidMatrix::from_counts(n, samples, triples)
}

pub fn write_centroid(path: impl AsRef<Path>, acc: &CentroidMatrix) -> Result<()> {
    write_text(path.as_ref(), &format_centroid(acc))
}

pub fn read_centroid(path: impl AsRef<Path>) -> Result<CentroidMatrix> {
    let path = path.as_ref();
    parse_centroid(&display_name(path), &read_text(path)?)
}

// -------------------------------------------------------------- cut instance

pub fn format_kcut(inst: &KCutInstance) -> String {
    let mut out = format!("# n={} k={}\n", inst.n(), inst.k());
    out.push_str(&csv_string(
        &[],
        inst.entries()
            .map(|(i, j, s)| vec![i.to_string(), j.to_string(), s.to_string()]),
    ));
    out
}

pub fn parse_kcut(source: &str, text: &str) -> Result<KCutInstance> {
    let (header, body) = split_header(source, text)?;
    let n: usize = header_value(source, &header, "n")?;
    let k: usize = header_value(source, &header, "k")?;
    let mut s = vec![None; pair_count(n)];
    for (line, rec) in records(source, body, 1, None)? {
        check_width(source, line, &rec, 3)?;
        let i: usize = field(source, line, &rec, 0, "i")?;
        let j: usize = field(source, line, &rec, 1, "j")?;
        let v: f64 = field(source, line, &rec, 2, "s")?;
        if i >= j || j >= n {
            return Err(Error::parse(
                at(source, line),
                format!("pair ({i}, {j}) is not i < j < {n}"),
            ));
        }
        let slot = &mut s[tri_index(i, j)];
        if slot.is_some() {
            return Err(Error::parse(
                at(source, line),
                format!("pair ({i}, {j}) listed twice"),
            ));
        }
        *slot = Some(v);
    }
    if let Some(missing) = s.iter().position(Option::is_none) {
        let (i, j) = crate::pairs::tri_pair(missing);
        return Err(Error::parse(
            source,
            format!("pair ({i}, {j}) has no weight"),
        ));
    }
    KCutInstance::new(n, k, s.into_iter().map(|v| v.expect("checked")).collect())
}

pub fn write_kcut(path: impl AsRef<Path>, inst: &KCutInstance) -> Result<()> {
    write_text(path.as_ref(), &format_kcut(inst))
}

pub fn read_kcut(path: impl AsRef<Path>) -> Result<KCutInstance> {
    let path = path.as_ref();
    parse_kcut(&display_name(path), &read_text(path)?)
}

// ----------------------------------------------------------------- histogram

/// Histogram values plus the provenance recorded in the file header.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramFile {
    pub theta: String,
    pub centroid: String,
    pub histogram: DistanceHistogram,
}

pub fn format_histogram(theta: &str, centroid: &str, hist: &DistanceHistogram) -> String {
    let mut out = format!("# theta={theta} centroid={centroid} T={}\n", hist.len());
    for v in hist.values() {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_histogram(source: &str, text: &str) -> Result<HistogramFile> {
    let (header, body) = split_header(source, text)?;
    let samples: usize = header_value(source, &header, "T")?;
    let theta: String = header_value(source, &header, "theta")?;
    let centroid: String = header_value(source, &header, "centroid")?;
    let mut values = Vec::with_capacity(samples);
    for (idx, raw) in body.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let line = idx as u64 + 2;
        values.push(
            raw.parse::<f64>()
                .map_err(|e| Error::parse(at(source, line), format!("d² {raw:?}: {e}")))?,
        );
    }
    if values.len() != samples {
        return Err(Error::parse(
            source,
            format!("header says T={samples} but {} values follow", values.len()),
        ));
    }
    Ok(HistogramFile {
        theta,
        centroid,
        histogram: DistanceHistogram::from_values(values)?,
    })
}

pub fn write_histogram(
    path: impl AsRef<Path>,
    theta: &str,
    centroid: &str,
    hist: &DistanceHistogram,
) -> Result<()> {
    write_text(path.as_ref(), &format_histogram(theta, centroid, hist))
}

pub fn read_histogram(path: impl AsRef<Path>) -> Result<HistogramFile> {
    let path = path.as_ref();
    parse_histogram(&display_name(path), &read_text(path)?)
}

// --------------------------------------------------------------------- votes

const VOTES_HEADER: [&str; 3] = ["unit_id", "votes_a", "votes_b"];

pub fn format_votes(g: &DualGraph, votes: &VoteTable) -> Result<String> {
    if votes.n() != g.n() {
        return Err(Error::SizeMismatch {
            expected: g.n(),
            found: votes.n(),
        });
    }
    Ok(csv_string(
        &VOTES_HEADER,
        g.units().iter().enumerate().map(|(i, u)| {
            vec![
                u.id.clone(),
                votes.votes_a()[i].to_string(),
                votes.votes_b()[i].to_string(),
            ]
        }),
    ))
}

pub fn parse_votes(source: &str, text: &str, g: &DualGraph) -> Result<VoteTable> {
    let mut a = vec![None; g.n()];
    let mut b = vec![0.0; g.n()];
    for (line, rec) in records(source, text, 0, Some(&VOTES_HEADER))? {
        check_width(source, line, &rec, 3)?;
        let id = &rec[0];
        let unit = g
            .unit_index(id)
            .ok_or_else(|| Error::parse(at(source, line), format!("unknown unit id {id:?}")))?;
        if a[unit].is_some() {
            return Err(Error::parse(
                at(source, line),
                format!("unit {id:?} listed twice"),
            ));
        }
        a[unit] = Some(field::<f64>(source, line, &rec, 1, "votes_a")?);
        b[unit] = field(source, line, &rec, 2, "votes_b")?;
    }
    if let Some(missing) = a.iter().position(Option::is_none) {
        return Err(Error::parse(
            source,
            format!("unit {:?} has no vote row", g.units()[missing].id),
        ));
    }
    VoteTable::new(a.into_iter().map(|v| v.expect("checked")).collect(), b)
}

pub fn read_votes(path: impl AsRef<Path>, g: &DualGraph) -> Result<VoteTable> {
    let path = path.as_ref();
    parse_votes(&display_name(path), &read_text(path)?, g)
}

pub fn write_votes(path: impl AsRef<Path>, g: &DualGraph, votes: &VoteTable) -> Result<()> {
    write_text(path.as_ref(), &format_votes(g, votes)?)
}

// ------------------------------------------------------------- explicit theta

const THETA_HEADER: [&str; 3] = ["unit_a", "unit_b", "theta"];

/// Explicit θ over unit ids; pairs that are not listed weigh 1.
pub fn parse_explicit_theta(source: &str, text: &str, g: &DualGraph) -> Result<ExplicitTheta> {
    let mut values = vec![1.0; pair_count(g.n())];
    let mut seen = vec![false; values.len()];
    for (line, rec) in records(source, text, 0, Some(&THETA_HEADER))? {
        check_width(source, line, &rec, 3)?;
        let lookup = |col: usize| {
            g.unit_index(&rec[col]).ok_or_else(|| {
                Error::parse(at(source, line), format!("unknown unit id {:?}", &rec[col]))
            })
        };
        let (x, y) = (lookup(0)?, lookup(1)?);
        if x == y {
            return Err(Error::parse(at(source, line), "a unit paired with itself"));
        }
        let v: f64 = field(source, line, &rec, 2, "theta")?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::parse(
                at(source, line),
                format!("theta {v} must be positive"),
            ));
        }
        let idx = tri_index(x.min(y), x.max(y));
        if seen[idx] {
            return Err(Error::parse(at(source, line), "pair listed twice"));
        }
        seen[idx] = true;
        values[idx] = v;
    }
    ExplicitTheta::new(g.n(), values)
}

pub fn read_explicit_theta(path: impl AsRef<Path>, g: &DualGraph) -> Result<ExplicitTheta> {
    let path = path.as_ref();
    parse_explicit_theta(&display_name(path), &read_text(path)?, g)
}

/// Lists every pair whose weight differs from 1.
pub fn format_explicit_theta(g: &DualGraph, theta: &ExplicitTheta) -> Result<String> {
    if theta.n() != g.n() {
        return Err(Error::SizeMismatch {
            expected: g.n(),
            found: theta.n(),
        });
    }
    let ids = g.units();
    let mut rows = Vec::new();
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            let v = theta.get(i, j);
            if v != 1.0 {
                rows.push(vec![ids[i].id.clone(), ids[j].id.clone(), v.to_string()]);
            }
        }
    }
    Ok(csv_string(&THETA_HEADER, rows))
}

// ------------------------------------------------------------ plan directory

/// Parameters and outcome of a chain run, stored next to its plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub graph_hash: String,
    pub k: usize,
    pub pop_tolerance: f64,
    pub max_cut_edges: Option<usize>,
    pub total_steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub rng_seed: u64,
    pub seed_plan_seed: u64,
    pub kept: u64,
    pub proposals: u64,
    pub accepted: u64,
}

impl ChainManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialization");
        s.push('\n');
        s
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_text(&dir.as_ref().join(MANIFEST_FILE), &self.to_json())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        serde_json::from_str(&read_text(&path)?)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), e.line()), e))
    }
}

/// [`PlanSink`] writing each kept plan to `dir/plan_<state>.csv`.
pub struct PlanDirWriter<'g> {
    dir: PathBuf,
    graph: &'g DualGraph,
}

impl<'g> PlanDirWriter<'g> {
    /// Creates `dir` if needed.
    pub fn create(dir: impl Into<PathBuf>, graph: &'g DualGraph) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(PlanDirWriter { dir, graph })
    }
}

impl PlanSink for PlanDirWriter<'_> {
    fn keep(&mut self, state: u64, plan: &Plan) -> Result<()> {
        write_assignment(self.dir.join(format!("plan_{state}.csv")), self.graph, plan)
    }
}

/// `plan_<state>.csv` files of a directory, ordered by state.
pub fn list_plan_files(dir: impl AsRef<Path>) -> Result<Vec<(u64, PathBuf)>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let state = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("plan_"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(state) = state {
            out.push((state, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every plan in a directory in state order.
pub fn read_plan_dir(dir: impl AsRef<Path>, g: &DualGraph) -> Result<Vec<Plan>> {
    let files = list_plan_files(&dir)?;
    if files.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    files.iter().map(|(_, p)| read_assignment(p, g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_grid, GridSpec};
    use crate::kcut::build_instance;
    use crate::metric::{Theta, ThetaKind};

    fn grid() -> DualGraph {
        make_grid(&GridSpec::uniform(2, 3)).unwrap()
    }

    #[test]
    fn assignment_round_trip() {
        let g = grid();
        let p = Plan::new(vec![1, 1, 0, 1, 0, 0], 2).unwrap();
        let text = format_assignment(&g, &p).unwrap();
        assert!(text.starts_with("unit_id,district\nr0c0,0\n"));
        let back = parse_assignment("a.csv", &text, &g).unwrap();
        assert_eq!(back, p.canonical());

        let shuffled = "unit_id,district\nr1c2,7\nr0c0,3\nr0c1,3\nr0c2,7\nr1c0,3\nr1c1,7\n";
        assert!(parse_assignment("s.csv", shuffled, &g)
            .unwrap()
            .same_partition(&Plan::new(vec![0, 0, 1, 0, 1, 1], 2).unwrap()));

        let missing = "unit_id,district\nr0c0,0\n";
        assert!(parse_assignment("m.csv", missing, &g).is_err());
        let err = parse_assignment("x.csv", "unit_id,district\nr0c0,0\nzz,1\n", &g).unwrap_err();
        assert!(err.to_string().contains("x.csv:3"), "{err}");
        assert!(parse_assignment("h.csv", "unit,district\n", &g).is_err());
    }

    #[test]
    fn centroid_round_trip() {
        let mut acc = CentroidMatrix::new(6);
        acc.accumulate(&Plan::new(vec![0, 0, 1, 0, 1, 1], 2).unwrap())
            .unwrap();
        acc.accumulate(&Plan::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap())
            .unwrap();
        let text = format_centroid(&acc);
        assert!(text.starts_with("# n=6 T=2\n0,1,2\n"));
        assert_eq!(parse_centroid("c", &text).unwrap(), acc);
        assert_eq!(format_centroid(&parse_centroid("c", &text).unwrap()), text);
    }

    #[test]
    fn centroid_errors_name_the_line() {
        let err = parse_centroid("cent.csv", "n=6 T=2\n").unwrap_err();
        assert!(err.to_string().contains("cent.csv:1"), "{err}");
        let err = parse_centroid("cent.csv", "# n=6 T=two\n").unwrap_err();
        assert!(err.to_string().contains("cent.csv:1"), "{err}");
        let err = parse_centroid("cent.csv", "# n=6 T=2\n0,1,2\n0,1,1\n").unwrap_err();
        assert!(err.to_string().contains("cent.csv:3"), "{err}");
        let err = parse_centroid("cent.csv", "# n=6 T=2\n0,1,3\n").unwrap_err();
        assert!(err.to_string().contains("cent.csv:2"), "{err}");
        let err = parse_centroid("cent.csv", "# n=6 T=2\n0,9,1\n").unwrap_err();
        assert!(err.to_string().contains("cent.csv:2"), "{err}");
    }

    #[test]
    fn kcut_round_trip_is_exact() {
        let g = grid();
        let theta = Theta::new(ThetaKind::PathDecay { rate: 0.7 }, &g).unwrap();
        let mut acc = CentroidMatrix::new(6);
        for a in [[0, 0, 1, 0, 1, 1], [0, 0, 0, 1, 1, 1], [0, 1, 1, 0, 1, 1]] {
            acc.accumulate(&Plan::new(a.to_vec(), 2).unwrap()).unwrap();
        }
        let inst = build_instance(&acc, &theta, 2).unwrap();
        let text = format_kcut(&inst);
        assert!(text.starts_with("# n=6 k=2\n"));
        assert_eq!(parse_kcut("i", &text).unwrap(), inst);
        assert!(parse_kcut("i", "# n=3 k=2\n0,1,0.5\n").is_err());
    }

    #[test]
    fn histogram_round_trip() {
        let h = DistanceHistogram::from_values(vec![0.1 + 0.2, 1.0 / 3.0, 7.25]).unwrap();
        let text = format_histogram("pop", "cent.csv", &h);
        let back = parse_histogram("h", &text).unwrap();
        assert_eq!(back.histogram, h);
        assert_eq!(back.theta, "pop");
        assert_eq!(back.centroid, "cent.csv");
        assert!(parse_histogram("h", "# theta=pop centroid=c T=2\n1\n").is_err());
    }

    #[test]
    fn votes_round_trip() {
        let g = grid();
        let v = VoteTable::new(vec![1.5, 0.0, 3.0, 2.0, 1.0, 0.25], vec![0.5; 6]).unwrap();
        let text = format_votes(&g, &v).unwrap();
        assert_eq!(parse_votes("v", &text, &g).unwrap(), v);
        assert!(parse_votes("v", "unit_id,votes_a,votes_b\nr0c0,1,-1\n", &g).is_err());
    }

    #[test]
    fn explicit_theta_defaults_to_one() {
        let g = grid();
        let text = "unit_a,unit_b,theta\nr0c0,r1c2,0.25\nr1c1,r0c1,4\n";
        let t = parse_explicit_theta("t", text, &g).unwrap();
        assert_eq!(t.get(0, 5), 0.25);
        assert_eq!(t.get(1, 4), 4.0);
        assert_eq!(t.get(0, 1), 1.0);
        let back = parse_explicit_theta("t", &format_explicit_theta(&g, &t).unwrap(), &g).unwrap();
        assert_eq!(back, t);
        assert!(parse_explicit_theta("t", "unit_a,unit_b,theta\nr0c0,r0c0,1\n", &g).is_err());
        assert!(parse_explicit_theta("t", "unit_a,unit_b,theta\nr0c0,r0c1,0\n", &g).is_err());
    }

    #[test]
    fn plan_directory_round_trip() {
        let g = grid();
        let dir = tempfile::tempdir().unwrap();
        let plans = [
            Plan::new(vec![0, 0, 1, 0, 1, 1], 2).unwrap(),
            Plan::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap(),
        ];
        let mut w = PlanDirWriter::create(dir.path().join("plans"), &g).unwrap();
        w.keep(10, &plans[1]).unwrap();
        w.keep(9, &plans[0]).unwrap();
        let back = read_plan_dir(dir.path().join("plans"), &g).unwrap();
        assert_eq!(back, plans.to_vec());

        let m = ChainManifest {
            graph_hash: g.content_hash(),
            k: 2,
            pop_tolerance: 0.05,
            max_cut_edges: None,
            total_steps: 10,
            burn_in: 8,
            thin: 1,
            rng_seed: 3,
            seed_plan_seed: 3,
            kept: 2,
            proposals: 12,
            accepted: 10,
        };
        m.save(dir.path()).unwrap();
        assert_eq!(ChainManifest::load(dir.path()).unwrap(), m);
        assert!(matches!(
            read_plan_dir(dir.path(), &g),
            Err(Error::EmptyEnsemble)
        ));
    }
}

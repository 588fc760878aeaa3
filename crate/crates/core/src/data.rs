//! Measurement and labeled datasets, their text formats, labeling, splitting
//! and batching.
//!
//! Three line-oriented file kinds are supported, each starting with `#`
//! header lines of `key=value` tokens (`n_sites`, `lx`, `ly`, `delta`, `seed`):
//!
//! - configurations: one `σ` per line, space-separated 0/1 in row-major order;
//! - labels: one integer per line (0 disordered, 1 ordered);
//! - measurements: `BASIS outcome` per line, e.g. `ZZXZ 0101`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{check_len, Error, Result};
use crate::lattice::{Configuration, Pauli};
use crate::rng::{stream_rng, Stream};

/// Default half-width of the detuning window around the critical point whose
/// records are left out of labeled datasets.
pub const DEFAULT_EXCLUSION_WINDOW: f64 = 0.2;

pub const LABEL_DISORDERED: u8 = 0;
pub const LABEL_ORDERED: u8 = 1;

/// Per-site measurement basis over {X, Y, Z}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasurementBasis(Vec<Pauli>);

impl MeasurementBasis {
    pub fn new(ops: Vec<Pauli>) -> Result<Self> {
        if ops.contains(&Pauli::I) {
            return Err(Error::invalid("measurement bases are over X, Y, Z only"));
        }
        Ok(Self(ops))
    }

    pub fn all_z(n: usize) -> Self {
        Self(vec![Pauli::Z; n])
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sites measured outside the reference basis.
    pub fn rotated_sites(&self) -> Vec<usize> {
        (0..self.0.len())
            .filter(|&j| self.0[j] != Pauli::Z)
            .collect()
    }
}

impl FromStr for MeasurementBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .trim()
            .chars()
            .map(Pauli::from_char)
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

impl fmt::Display for MeasurementBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub basis: MeasurementBasis,
    pub outcome: Configuration,
}

/// Metadata carried in file headers.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub n_sites: usize,
    pub lx: Option<usize>,
    pub ly: Option<usize>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
}

impl DatasetHeader {
    pub fn new(n_sites: usize) -> Self {
        Self {
            n_sites,
            lx: None,
            ly: None,
            delta: None,
            seed: None,
        }
    }

    pub fn with_geometry(mut self, lx: usize, ly: usize) -> Self {
        self.lx = Some(lx);
        self.ly = Some(ly);
        self
    }

    fn write(&self, out: &mut String) {
        out.push_str(&format!("# n_sites={}", self.n_sites));
        if let (Some(lx), Some(ly)) = (self.lx, self.ly) {
            out.push_str(&format!(" lx={lx} ly={ly}"));
        }
        if let Some(d) = self.delta {
            out.push_str(&format!(" delta={d}"));
        }
        if let Some(s) = self.seed {
            out.push_str(&format!(" seed={s}"));
        }
        out.push_str("\n# ordering=row-major\n");
    }

    /// Parse `#` lines; returns the header (if `n_sites` was present) and the
    /// remaining data lines with their 1-based line numbers.
    fn read(text: &str) -> Result<(Option<Self>, Vec<(usize, &str)>)> {
        let mut header: Option<Self> = None;
        let mut data = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    let Some((k, v)) = tok.split_once('=') else {
                        continue;
                    };
                    let bad = |e: String| Error::parse(i + 1, format!("header `{k}`: {e}"));
                    match k {
                        "n_sites" => {
                            let n = v
                                .parse()
                                .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                            header.get_or_insert_with(|| Self::new(n)).n_sites = n;
                        }
                        "lx" | "ly" | "delta" | "seed" => {
                            let h = header.get_or_insert_with(|| Self::new(0));
                            match k {
                                "lx" => {
                                    h.lx =
                                        Some(v.parse().map_err(|e: std::num::ParseIntError| {
                                            bad(e.to_string())
                                        })?)
                                }
                                "ly" => {
                                    h.ly =
                                        Some(v.parse().map_err(|e: std::num::ParseIntError| {
                                            bad(e.to_string())
                                        })?)
                                }
                                "delta" => {
                                    h.delta = Some(v.parse().map_err(
                                        |e: std::num::ParseFloatError| bad(e.to_string()),
                                    )?)
                                }
                                _ => {
                                    h.seed =
                                        Some(v.parse().map_err(|e: std::num::ParseIntError| {
                                            bad(e.to_string())
                                        })?)
                                }
                            }
                        }
                        _ => {}
                    }
                }
            } else if !line.is_empty() {
                data.push((i + 1, line));
            }
        }
        Ok((header, data))
    }
}

/// Shots `(τ, σ)` at a single set of model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDataset {
    pub header: DatasetHeader,
    pub records: Vec<MeasurementRecord>,
}

impl MeasurementDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.header.n_sites
    }

    /// Outcomes of the records measured in the all-Z basis.
    pub fn z_outcomes(&self) -> Vec<Configuration> {
        self.records
            .iter()
            .filter(|r| r.basis.rotated_sites().is_empty())
            .map(|r| r.outcome.clone())
            .collect()
    }

    /// Normalized outcome frequencies over the `2^N` basis indices.
    pub fn empirical_distribution(&self) -> Vec<f64> {
        let mut counts = vec![0.0; 1 << self.n_sites()];
        for r in &self.records {
            counts[r.outcome.to_index() as usize] += 1.0;
        }
        let total = self.records.len().max(1) as f64;
        counts.iter_mut().for_each(|c| *c /= total);
        counts
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.header.write(&mut s);
        for r in &self.records {
            s.push_str(&format!("{} {}\n", r.basis, r.outcome));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, lines) = DatasetHeader::read(text)?;
        let mut records = Vec::with_capacity(lines.len());
        for (n, line) in lines {
            let (b, o) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::parse(n, "expected `BASIS outcome`"))?;
            let basis: MeasurementBasis = b
                .parse()
                .map_err(|e: Error| Error::parse(n, e.to_string()))?;
            let outcome: Configuration = o
                .parse()
                .map_err(|e: Error| Error::parse(n, e.to_string()))?;
            if basis.len() != outcome.len() {
                return Err(Error::parse(n, "basis and outcome lengths differ"));
            }
            records.push(MeasurementRecord { basis, outcome });
        }
        let n_sites = records.first().map(|r| r.outcome.len());
        let header = match (header, n_sites) {
            (Some(h), Some(n)) if h.n_sites != n => {
                return Err(Error::parse(1, "header n_sites disagrees with records"))
            }
            (Some(h), _) => h,
            (None, Some(n)) => DatasetHeader::new(n),
            (None, None) => return Err(Error::parse(1, "empty dataset without header")),
        };
        if records.iter().any(|r| r.outcome.len() != header.n_sites) {
            return Err(Error::parse(1, "records of different lengths"));
        }
        Ok(Self { header, records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Configurations file (`xtrain` layout).
pub fn configurations_to_text(header: &DatasetHeader, configs: &[Configuration]) -> String {
    let mut s = String::new();
    header.write(&mut s);
    for c in configs {
        let bits: Vec<String> = c.bits().iter().map(|b| b.to_string()).collect();
        s.push_str(&bits.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_configurations(text: &str) -> Result<(Option<DatasetHeader>, Vec<Configuration>)> {
    let (header, lines) = DatasetHeader::read(text)?;
    let configs = lines
        .into_iter()
        .map(|(n, l)| {
            l.parse::<Configuration>()
                .map_err(|e| Error::parse(n, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = configs.first() {
        if configs.iter().any(|c| c.len() != first.len()) {
            return Err(Error::parse(1, "configurations of different lengths"));
        }
    }
    Ok((header, configs))
}

pub fn labels_to_text(header: &DatasetHeader, labels: &[u8]) -> String {
    let mut s = String::new();
    header.write(&mut s);
    for l in labels {
        s.push_str(&format!("{l}\n"));
    }
    s
}

pub fn parse_labels(text: &str) -> Result<Vec<u8>> {
    let (_, lines) = DatasetHeader::read(text)?;
    lines
        .into_iter()
        .map(|(n, l)| match l {
            "0" => Ok(LABEL_DISORDERED),
            "1" => Ok(LABEL_ORDERED),
            other => Err(Error::parse(
                n,
                format!("label must be 0 or 1, got `{other}`"),
            )),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub config: Configuration,
    pub label: u8,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub header: DatasetHeader,
    pub records: Vec<LabeledRecord>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            header: self.header.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Distinct detunings in order of first appearance.
    pub fn detunings(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.records {
            if !out.iter().any(|d| d.to_bits() == r.delta.to_bits()) {
                out.push(r.delta);
            }
        }
        out
    }

    pub fn at_detuning(&self, delta: f64) -> Self {
        Self {
            header: self.header.clone(),
            records: self
                .records
                .iter()
                .filter(|r| r.delta.to_bits() == delta.to_bits())
                .cloned()
                .collect(),
        }
    }

    /// Writes `<stem>.configs.txt`, `<stem>.labels.txt` and
    /// `<stem>.deltas.txt` (one detuning per line).
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let configs: Vec<Configuration> = self.records.iter().map(|r| r.config.clone()).collect();
        let labels: Vec<u8> = self.records.iter().map(|r| r.label).collect();
        fs::write(
            dir.join(format!("{stem}.configs.txt")),
            configurations_to_text(&self.header, &configs),
        )?;
        fs::write(
            dir.join(format!("{stem}.labels.txt")),
            labels_to_text(&self.header, &labels),
        )?;
        let mut d = String::new();
        self.header.write(&mut d);
        for r in &self.records {
            d.push_str(&format!("{}\n", r.delta));
        }
        fs::write(dir.join(format!("{stem}.deltas.txt")), d)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let (header, configs) = parse_configurations(&fs::read_to_string(
            dir.join(format!("{stem}.configs.txt")),
        )?)?;
        let labels = parse_labels(&fs::read_to_string(dir.join(format!("{stem}.labels.txt")))?)?;
        let delta_text = fs::read_to_string(dir.join(format!("{stem}.deltas.txt")))?;
        let (_, delta_lines) = DatasetHeader::read(&delta_text)?;
        let deltas = delta_lines
            .into_iter()
            .map(|(n, l)| l.parse::<f64>().map_err(|e| Error::parse(n, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        check_len(configs.len(), labels.len())?;
        check_len(configs.len(), deltas.len())?;
        let header =
            header.unwrap_or_else(|| DatasetHeader::new(configs.first().map_or(0, |c| c.len())));
        Ok(Self {
            header,
            records: configs
                .into_iter()
                .zip(labels)
                .zip(deltas)
                .map(|((config, label), delta)| LabeledRecord {
                    config,
                    label,
                    delta,
                })
                .collect(),
        })
    }
}

/// Label snapshots by phase: 0 below `delta_c`, 1 at or above it.
///
/// Detunings with `|δ − delta_c| < window` are dropped; `window = 0` keeps
/// everything.
pub fn label_by_detuning(
    sets: &[(f64, Vec<Configuration>)],
    delta_c: f64,
    window: f64,
) -> Result<LabeledDataset> {
    if !(window >= 0.0) {
        return Err(Error::invalid("exclusion window must be non-negative"));
    }
    let n = sets
        .iter()
        .flat_map(|(_, c)| c.first())
        .map(|c| c.len())
        .next()
        .unwrap_or(0);
    let mut records = Vec::new();
    for (delta, configs) in sets {
        if (delta - delta_c).abs() < window {
            continue;
        }
        let label = if *delta < delta_c {
            LABEL_DISORDERED
        } else {
            LABEL_ORDERED
        };
        for c in configs {
            check_len(n, c.len())?;
            records.push(LabeledRecord {
                config: c.clone(),
                label,
                delta: *delta,
            });
        }
    }
    Ok(LabeledDataset {
        header: DatasetHeader::new(n),
        records,
    })
}

/// Stratified split by detuning. Each stratum is shuffled and a share of it
/// goes to the test set; shares are allotted by largest remainder so the
/// total test size is `round(test_fraction · len)`.
pub fn split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::invalid("test_fraction must lie in [0, 1]"));
    }
    let deltas = dataset.detunings();
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); deltas.len()];
    for (i, r) in dataset.records.iter().enumerate() {
        let s = deltas
            .iter()
            .position(|d| d.to_bits() == r.delta.to_bits())
            .unwrap();
        strata[s].push(i);
    }
    let total_test = (test_fraction * dataset.len() as f64).round() as usize;
    let quotas: Vec<f64> = strata
        .iter()
        .map(|s| test_fraction * s.len() as f64)
        .collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = total_test.saturating_sub(take.iter().sum());
    let mut by_remainder: Vec<usize> = (0..strata.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        (quotas[b] - quotas[b].floor())
            .total_cmp(&(quotas[a] - quotas[a].floor()))
            .then(a.cmp(&b))
    });
    for s in by_remainder {
        if remaining == 0 {
            break;
        }
        if take[s] < strata[s].len() {
            take[s] += 1;
            remaining -= 1;
        }
    }
    let mut test_idx = Vec::with_capacity(total_test);
    let mut train_idx = Vec::with_capacity(dataset.len() - total_test);
    for (s, idx) in strata.iter_mut().enumerate() {
        let mut rng = stream_rng(seed, Stream::Split, s as u64);
        idx.shuffle(&mut rng);
        test_idx.extend_from_slice(&idx[..take[s]]);
        train_idx.extend_from_slice(&idx[take[s]..]);
    }
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((dataset.subset(&train_idx), dataset.subset(&test_idx)))
}

/// Shuffled index batches covering `0..n` once; the last batch may be short.
pub fn batches(
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<impl Iterator<Item = Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Batches, epoch));
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    Ok(chunks.into_iter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfgs(n: usize, count: usize, offset: u64) -> Vec<Configuration> {
        (0..count as u64)
            .map(|i| Configuration::from_index((i + offset) % (1 << n), n))
            .collect()
    }

    #[test]
    fn labels_follow_detuning() {
        let sets = vec![
            (-5.0, cfgs(4, 3, 0)),
            (1.5, cfgs(4, 2, 1)),
            (4.0, cfgs(4, 3, 2)),
        ];
        let d = label_by_detuning(&sets, 1.5, 0.0).unwrap();
        let label_at = |delta: f64| d.at_detuning(delta).records[0].label;
        assert_eq!(label_at(-5.0), LABEL_DISORDERED);
        assert_eq!(label_at(4.0), LABEL_ORDERED);
        assert_eq!(label_at(1.5), LABEL_ORDERED);
        let windowed = label_by_detuning(&sets, 1.5, DEFAULT_EXCLUSION_WINDOW).unwrap();
        assert_eq!(windowed.len(), 6);
        assert!(label_by_detuning(&sets, 1.5, -1.0).is_err());
    }

    #[test]
    fn basis_parsing() {
        let b: MeasurementBasis = "ZZXZ".parse().unwrap();
        assert_eq!(b.ops(), &[Pauli::Z, Pauli::Z, Pauli::X, Pauli::Z]);
        assert_eq!(b.rotated_sites(), vec![2]);
        assert!("ZIX".parse::<MeasurementBasis>().is_err());
        assert!("ZQ".parse::<MeasurementBasis>().is_err());
    }

    #[test]
    fn measurement_round_trip() {
        let d = MeasurementDataset {
            header: DatasetHeader {
                delta: Some(-1.25),
                seed: Some(42),
                ..DatasetHeader::new(4).with_geometry(2, 2)
            },
            records: vec![
                MeasurementRecord {
                    basis: "ZZXZ".parse().unwrap(),
                    outcome: "0101".parse().unwrap(),
                },
                MeasurementRecord {
                    basis: "YZZX".parse().unwrap(),
                    outcome: "1100".parse().unwrap(),
                },
            ],
        };
        assert_eq!(MeasurementDataset::parse(&d.to_text()).unwrap(), d);
        assert!(MeasurementDataset::parse("ZZ 010\n").is_err());
    }

    #[test]
    fn labeled_round_trip() {
        let sets = vec![(-5.0, cfgs(4, 5, 0)), (4.0, cfgs(4, 5, 7))];
        let d = label_by_detuning(&sets, 1.5, 0.2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path(), "train").unwrap();
        assert_eq!(LabeledDataset::load(dir.path(), "train").unwrap(), d);
        let text = fs::read_to_string(dir.path().join("train.configs.txt")).unwrap();
        assert!(text.lines().any(|l| l == "1 1 1 0"));
    }

    #[test]
    fn labels_reject_garbage() {
        assert!(parse_labels("0\n2\n").is_err());
        assert_eq!(parse_labels("# n_sites=2\n0\n1\n").unwrap(), vec![0, 1]);
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(sizes in prop::collection::vec(1usize..40, 1..6), frac in 0.0f64..1.0, seed in any::<u64>()) {
            let sets: Vec<(f64, Vec<Configuration>)> =
                sizes.iter().enumerate().map(|(i, &s)| (i as f64 - 2.0, cfgs(3, s, i as u64))).collect();
            let d = label_by_detuning(&sets, 0.5, 0.0).unwrap();
            let (train, test) = split(&d, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), d.len());
            let want = frac * d.len() as f64;
            prop_assert!((test.len() as f64 - want).abs() <= 1.0);
            // Each record lands in exactly one side.
            let mut all: Vec<_> = train.records.iter().chain(&test.records).map(|r| (r.delta.to_bits(), r.config.to_index())).collect();
            let mut orig: Vec<_> = d.records.iter().map(|r| (r.delta.to_bits(), r.config.to_index())).collect();
            all.sort_unstable();
            orig.sort_unstable();
            prop_assert_eq!(all, orig);
            let (t2, s2) = split(&d, frac, seed).unwrap();
            prop_assert_eq!(t2, train);
            prop_assert_eq!(s2, test);
        }

        #[test]
        fn batches_cover_once(n in 0usize..300, bs in 1usize..50, seed in any::<u64>(), epoch in 0u64..5) {
            let all: Vec<Vec<usize>> = batches(n, bs, seed, epoch).unwrap().collect();
            let mut seen: Vec<usize> = all.iter().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            for b in all.iter().rev().skip(1) {
                prop_assert_eq!(b.len(), bs);
            }
        }
    }
}

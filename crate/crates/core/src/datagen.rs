//! Dataset ingestion and synthetic histograms.
//!
//! Histogram CSV files have a header line `index,count` followed by one row
//! per cell with zero-based contiguous indices and non-negative decimal
//! counts. LF and CRLF line endings are accepted; files are written with LF.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::noise::Rng;

pub const CSV_HEADER: &str = "index,count";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub name: String,
    pub domain_size: usize,
    pub scale: u64,
    /// Largest `k` with every level `0..=k` present; `-1` if no cell is empty.
    pub support_k: i64,
}

pub fn compute_meta(db: &Histogram, name: &str) -> DatasetMeta {
    DatasetMeta {
        name: name.to_string(),
        domain_size: db.domain_size(),
        scale: db.scale(),
        support_k: support_k(db),
    }
}

pub fn support_k(db: &Histogram) -> i64 {
    let mut present = vec![false; db.domain_size() + 1];
    for &c in db.counts() {
        if let Some(p) = present.get_mut(c as usize) {
            *p = true;
        }
    }
    present.iter().take_while(|&&p| p).count() as i64 - 1
}

/// `total` i.i.d. draws from a finite Zipf law `P(i) ∝ 1/(i+1)^exponent`
/// over `domain_size` cells, tallied into a histogram. Cell 0 is the most
/// popular.
pub fn zipfian_histogram(domain_size: usize, total: u64, exponent: f64, rng: &mut Rng) -> Result<Histogram> {
    if domain_size == 0 {
        return Err(Error::arg("domain size must be positive"));
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::arg(format!("Zipf exponent must be positive, got {exponent}")));
    }
    let mut cumulative = Vec::with_capacity(domain_size);
    let mut acc = 0.0;
    for i in 0..domain_size {
        acc += ((i + 1) as f64).powf(-exponent);
        cumulative.push(acc);
    }
    let mut counts = vec![0u64; domain_size];
    for _ in 0..total {
        let u = rng.uniform() * acc;
        let cell = cumulative.partition_point(|&c| c <= u).min(domain_size - 1);
        counts[cell] += 1;
    }
    Ok(Histogram::new(counts))
}

/// One cell of each count `0..=k`, then `extra_cells` cells of count `k + 10`.
pub fn staircase_histogram(k: u64, extra_cells: usize) -> Histogram {
    let mut counts: Vec<u64> = (0..=k).collect();
    counts.extend(std::iter::repeat_n(k + 10, extra_cells));
    Histogram::new(counts)
}

pub fn read_histogram_csv(path: impl AsRef<Path>) -> Result<(Histogram, DatasetMeta)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let db = parse_histogram_csv(&text).map_err(|(line, message)| Error::Ingestion {
        path: path.to_path_buf(),
        line,
        message,
    })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let meta = compute_meta(&db, &name);
    Ok((db, meta))
}

/// Parses CSV text; errors carry a 1-based line number.
pub fn parse_histogram_csv(text: &str) -> std::result::Result<Histogram, (usize, String)> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate();

    match lines.next() {
        None => return Err((1, "no rows".into())),
        Some((_, h)) if h.trim().is_empty() => return Err((1, "no rows".into())),
        Some((_, h)) if h.trim() != CSV_HEADER => {
            return Err((1, format!("expected header {CSV_HEADER:?}, found {:?}", h.trim())))
        }
        Some(_) => {}
    }

    let mut counts = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (idx, count) = line
            .split_once(',')
            .ok_or_else(|| (lineno, format!("expected `index,count`, found {line:?}")))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| (lineno, format!("bad index {:?}", idx.trim())))?;
        if idx != counts.len() {
            return Err((lineno, format!("index {idx} out of sequence, expected {}", counts.len())));
        }
        let count = count.trim();
        if count.starts_with('-') {
            return Err((lineno, format!("negative count {count}")));
        }
        let count: u64 = count.parse().map_err(|_| (lineno, format!("bad count {count:?}")))?;
        counts.push(count);
    }
    if counts.is_empty() {
        return Err((1, "no rows".into()));
    }
    Ok(Histogram::new(counts))
}

pub fn write_histogram_csv(db: &Histogram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
    for (i, c) in db.counts().iter().enumerate() {
        writeln!(out, "{i},{c}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::noise::Rng;

    #[test]
    fn zipf_conserves_total_and_repeats() {
        let a = zipfian_histogram(500, 3000, 1.2, &mut Rng::new(9)).unwrap();
        let b = zipfian_histogram(500, 3000, 1.2, &mut Rng::new(9)).unwrap();
        assert_eq!(a.scale(), 3000);
        assert_eq!(a, b);
        assert!(a.counts()[0] > a.counts()[499]);
        assert!(zipfian_histogram(0, 10, 1.0, &mut Rng::new(0)).is_err());
        assert!(zipfian_histogram(10, 10, 0.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn zipf_cell_frequencies() {
        // P(cell 0) = 1 / H_10 for exponent 1 over ten cells
        let h10: f64 = (1..=10).map(|i| 1.0 / i as f64).sum();
        let n = 200_000;
        let db = zipfian_histogram(10, n, 1.0, &mut Rng::new(1)).unwrap();
        for (i, &c) in db.counts().iter().enumerate() {
            let p = 1.0 / ((i + 1) as f64 * h10);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() < 5.0 * se, "cell {i}");
        }
    }

    #[test]
    fn zipf_fixture_has_support() {
        let ok = (0..100)
            .filter(|&s| {
                let db = zipfian_histogram(4096, 20_000, 1.0, &mut Rng::new(s)).unwrap();
                support_k(&db) >= 10
            })
            .count();
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn staircase_shape() {
        let db = staircase_histogram(3, 0);
        assert_eq!(db.counts(), &[0, 1, 2, 3]);
        let db = staircase_histogram(30, 50);
        assert_eq!(db.domain_size(), 81);
        assert!(support_k(&db) >= 30);
        assert_eq!(db.level_set(40).len(), 50);
    }

    #[test]
    fn meta_examples() {
        let m = compute_meta(&Histogram::new(vec![0, 1, 2, 5]), "x");
        assert_eq!((m.scale, m.support_k, m.domain_size), (8, 2, 4));
        let m = compute_meta(&Histogram::new(vec![0, 0, 0]), "zeros");
        assert_eq!((m.scale, m.support_k), (0, 0));
        assert_eq!(compute_meta(&Histogram::new(vec![1, 2]), "").support_k, -1);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adult.csv");
        let db = Histogram::new(vec![0, 17, 3, 0, 42]);
        write_histogram_csv(&db, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("index,count\n0,0\n1,17\n"));
        let (back, meta) = read_histogram_csv(&path).unwrap();
        assert_eq!(back, db);
        assert_eq!(meta.name, "adult");
        assert_eq!(meta.scale, 62);
    }

    #[test]
    fn csv_errors() {
        assert_eq!(parse_histogram_csv("").unwrap_err().1, "no rows");
        assert_eq!(parse_histogram_csv("index,count\n").unwrap_err().1, "no rows");
        let (line, msg) = parse_histogram_csv("index,count\n0,3\n1,4\n2,-1\n").unwrap_err();
        assert_eq!(line, 4);
        assert!(msg.contains("negative"));
        assert_eq!(parse_histogram_csv("index,count\n0,3\n2,4\n").unwrap_err().0, 3);
        assert_eq!(parse_histogram_csv("index,count\n0,x\n").unwrap_err().0, 2);
        assert_eq!(parse_histogram_csv("idx,n\n0,1\n").unwrap_err().0, 1);
        assert_eq!(parse_histogram_csv("index,count\n0;1\n").unwrap_err().0, 2);
    }

    #[test]
    fn csv_accepts_crlf() {
        let db = parse_histogram_csv("index,count\r\n0,5\r\n1,0\r\n").unwrap();
        assert_eq!(db.counts(), &[5, 0]);
    }

    #[test]
    fn csv_missing_file() {
        let err = read_histogram_csv("/nonexistent/dir/h.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn csv_ingestion_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "index,count\n0,1\n1,-1\n").unwrap();
        let err = read_histogram_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Ingestion { line: 3, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_identity(counts in prop::collection::vec(any::<u64>(), 1..40)) {
            let db = Histogram::new(counts);
            let mut text = String::from("index,count\n");
            for (i, c) in db.counts().iter().enumerate() {
                text.push_str(&format!("{i},{c}\n"));
            }
            prop_assert_eq!(parse_histogram_csv(&text).unwrap(), db);
        }

        #[test]
        fn meta_scale_is_sum(counts in prop::collection::vec(0u64..1000, 0..40)) {
            let db = Histogram::new(counts.clone());
            prop_assert_eq!(compute_meta(&db, "p").scale, counts.iter().sum::<u64>());
        }

        #[test]
        fn staircase_meets_support_precondition(k in 0u64..60, extra in 0usize..20) {
            let db = staircase_histogram(k, extra);
            prop_assert!(support_k(&db) >= k as i64);
            prop_assert_eq!(db.domain_size(), k as usize + 1 + extra);
        }
    }
}

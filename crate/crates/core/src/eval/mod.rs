//! Ranking metrics against exhaustive ground truth, and verification of
//! discovered patterns by exact counting.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{count_occurrences, Count, PatternKey, PatternTable, TypedDigraph};

/// Counts normalized by their total.
pub fn relative_frequency(counts: &[f64]) -> Result<Vec<f64>> {
    if counts.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::invalid("counts must be finite and nonnegative"));
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("counts are all zero"));
    }
    Ok(counts.iter().map(|c| c / total).collect())
}

/// 1-based ranks, ties sharing the average of the positions they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn check_pair(p: &[f64], f: &[f64]) -> Result<()> {
    if p.len() != f.len() {
        return Err(Error::invalid("score vectors differ in length"));
    }
    if p.len() < 2 {
        return Err(Error::invalid("rank correlation needs at least two classes"));
    }
    Ok(())
}

fn all_tied(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// `1 − 6 Σ d² / (n(n² − 1))` over average ranks. An all-tied input gives 0.
pub fn spearman(p: &[f64], f: &[f64]) -> Result<f64> {
    check_pair(p, f)?;
    if all_tied(p) || all_tied(f) {
        return Ok(0.0);
    }
    let (rp, rf) = (average_ranks(p), average_ranks(f));
    let d2: f64 = rp.iter().zip(&rf).map(|(a, b)| (a - b).powi(2)).sum();
    let n = p.len() as f64;
    Ok((1.0 - 6.0 * d2 / (n * (n * n - 1.0))).clamp(-1.0, 1.0))
}

/// `(n_c − n_d) / √((n₀ − n₁)(n₀ − n₂))` with `n₀ = n(n − 1)/2` and `n₁`,
/// `n₂` the pairs tied in `p` and in `f`. Tied pairs count as neither
/// concordant nor discordant. Without ties this is `2 (n_c − n_d) / (n(n − 1))`;
/// the tie correction keeps identical rankings at exactly 1. An all-tied
/// input gives 0.
pub fn kendall(p: &[f64], f: &[f64]) -> Result<f64> {
    check_pair(p, f)?;
    let n = p.len();
    let (mut net, mut tied_p, mut tied_f) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let (dp, df) = (p[i] - p[j], f[i] - f[j]);
            tied_p += u64::from(dp == 0.0);
            tied_f += u64::from(df == 0.0);
            if dp != 0.0 && df != 0.0 {
                net += (dp.signum() * df.signum()) as i64;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    if tied_p == n0 || tied_f == n0 {
        return Ok(0.0);
    }
    let denom = (((n0 - tied_p) as f64) * ((n0 - tied_f) as f64)).sqrt();
    Ok((net as f64 / denom).clamp(-1.0, 1.0))
}

/// How to treat ground-truth classes the method under test never produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Score them 0, as for sampling baselines that simply did not see them.
    #[default]
    ZeroFill,
    /// Fail: the method was expected to score every class.
    Require,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub key: String,
    pub truth: f64,
    pub score: f64,
    pub truth_rank: f64,
    pub score_rank: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEvalReport {
    pub spearman_rho: f64,
    pub kendall_tau: f64,
    pub n_classes: usize,
    pub zero_filled: usize,
    /// One side was constant, so the metrics were reported as 0.
    pub degenerate: bool,
    pub rows: Vec<RankRow>,
}

/// Aligns method scores on the ground-truth classes and correlates them.
/// Method classes absent from the truth are ignored.
pub fn rank_eval(truth: &PatternTable<f64>, method: &PatternTable<f64>, policy: MissingPolicy) -> Result<RankEvalReport> {
    if truth.is_empty() {
        return Err(Error::invalid("ground truth is empty"));
    }
    let mut t = Vec::with_capacity(truth.len());
    let mut s = Vec::with_capacity(truth.len());
    let mut keys = Vec::with_capacity(truth.len());
    let mut zero_filled = 0;
    for (_, p, &count) in truth.iter() {
        let score = match method.get_graph(p.graph()) {
            Some(&v) => v,
            None => match policy {
                MissingPolicy::ZeroFill => {
                    zero_filled += 1;
                    0.0
                }
                MissingPolicy::Require => return Err(Error::MissingClass(p.key().to_string())),
            },
        };
        t.push(count);
        s.push(score);
        keys.push(p.key());
    }
    let n = t.len();
    let degenerate = n < 2 || all_tied(&t) || all_tied(&s);
    let (rho, tau) = if degenerate {
        (0.0, 0.0)
    } else {
        (spearman(&s, &t)?, kendall(&s, &t)?)
    };
    let (rt, rs) = (average_ranks(&t), average_ranks(&s));
    let rows = (0..n)
        .map(|i| RankRow {
            key: keys[i].to_string(),
            truth: t[i],
            score: s[i],
            truth_rank: rt[i],
            score_rank: rs[i],
        })
        .collect();
    Ok(RankEvalReport {
        spearman_rho: rho,
        kendall_tau: tau,
        n_classes: n,
        zero_filled,
        degenerate,
        rows,
    })
}

#[derive(Serialize)]
struct CsvLine<'a> {
    row: &'a str,
    key: &'a str,
    truth: Option<f64>,
    score: Option<f64>,
    truth_rank: Option<f64>,
    score_rank: Option<f64>,
    spearman: Option<f64>,
    kendall: Option<f64>,
    zero_filled: Option<usize>,
    degenerate: Option<bool>,
}

/// One row per class, then a summary row carrying the metrics.
pub fn write_rank_csv(report: &RankEvalReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    for r in &report.rows {
        w.serialize(CsvLine {
            row: "class",
            key: &r.key,
            truth: Some(r.truth),
            score: Some(r.score),
            truth_rank: Some(r.truth_rank),
            score_rank: Some(r.score_rank),
            spearman: None,
            kendall: None,
            zero_filled: None,
            degenerate: None,
        })
        .map_err(csv_err)?;
    }
    w.serialize(CsvLine {
        row: "summary",
        key: "",
        truth: None,
        score: None,
        truth_rank: None,
        score_rank: None,
        spearman: Some(report.spearman_rho),
        kendall: Some(report.kendall_tau),
        zero_filled: Some(report.zero_filled),
        degenerate: Some(report.degenerate),
    })
    .map_err(csv_err)?;
    w.flush().map_err(|e| Error::invalid(format!("csv flush failed: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopNReport {
    pub keys: Vec<PatternKey>,
    pub counts: Vec<Count>,
    /// Over exact counts only; `None` when every pattern timed out.
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub cutoff: Option<Duration>,
}

impl TopNReport {
    pub fn timeouts(&self) -> usize {
        self.counts.iter().filter(|c| c.exact().is_none()).count()
    }
}

pub const DEFAULT_CUTOFF: Duration = Duration::from_secs(60);

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Total occurrences of one pattern across `graphs`, sharing one time budget.
pub fn verified_count(pattern: &TypedDigraph, graphs: &[TypedDigraph], cutoff: Option<Duration>) -> Count {
    let start = Instant::now();
    let mut total = 0u64;
    for g in graphs {
        let left = cutoff.map(|c| c.saturating_sub(start.elapsed()));
        match count_occurrences(pattern, g, left) {
            Count::Exact(c) => total += c,
            Count::Timeout => return Count::Timeout,
        }
    }
    Count::Exact(total)
}

/// Counts every pattern exactly within its cutoff and summarizes the counts
/// that finished.
pub fn verify_top_n(patterns: &[&TypedDigraph], graphs: &[TypedDigraph], cutoff: Option<Duration>) -> TopNReport {
    let counts: Vec<Count> = patterns.iter().map(|p| verified_count(p, graphs, cutoff)).collect();
    let exact: Vec<f64> = counts.iter().filter_map(|c| c.exact()).map(|c| c as f64).collect();
    let mean = (!exact.is_empty()).then(|| exact.iter().sum::<f64>() / exact.len() as f64);
    TopNReport {
        keys: patterns.iter().map(|p| crate::graph::pattern_key(p)).collect(),
        median: median(&exact),
        mean,
        counts,
        cutoff,
    }
}

pub fn write_topn_csv(report: &TopNReport, out: impl Write) -> Result<()> {
    #[derive(Serialize)]
    struct Line {
        rank: usize,
        key: String,
        count: Option<u64>,
        timeout: bool,
    }
    let mut w = csv::Writer::from_writer(out);
    for (i, (k, c)) in report.keys.iter().zip(&report.counts).enumerate() {
        w.serialize(Line {
            rank: i + 1,
            key: k.to_string(),
            count: c.exact(),
            timeout: c.exact().is_none(),
        })
        .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv flush failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Alphabet;

    #[test]
    fn frequencies() {
        assert_eq!(relative_frequency(&[5.0]).unwrap(), vec![1.0]);
        assert_eq!(relative_frequency(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
        assert_eq!(relative_frequency(&[1.0, 3.0]).unwrap(), vec![0.25, 0.75]);
        assert!(relative_frequency(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(spearman(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap(), 1.0);
        assert!((spearman(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(kendall(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!((kendall(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(kendall(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(kendall(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn tied_identical_rankings_are_perfect() {
        let x = [4.0, 1.0, 1.0, 2.0, 4.0];
        assert_eq!(kendall(&x, &x).unwrap(), 1.0);
        assert_eq!(spearman(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 0.0, 0.0, 5.0]), vec![4.0, 1.5, 1.5, 3.0]);
    }

    fn path3(c: u16) -> TypedDigraph {
        TypedDigraph::from_edges(Alphabet::new(3, 2).unwrap(), vec![c, 0, 0], &[(0, 1, 1), (1, 2, 1)]).unwrap()
    }

    fn truth() -> PatternTable<f64> {
        let mut t = PatternTable::new();
        for (c, n) in [(0, 9.0), (1, 4.0), (2, 1.0)] {
            *t.entry_or_insert_with(path3(c), || 0.0).1 = n;
        }
        t
    }

    #[test]
    fn rank_eval_identity_and_zero_fill() {
        let t = truth();
        let r = rank_eval(&t, &t, MissingPolicy::Require).unwrap();
        assert_eq!((r.spearman_rho, r.kendall_tau), (1.0, 1.0));

        let mut only_top = PatternTable::new();
        *only_top.entry_or_insert_with(path3(0), || 0.0).1 = 0.7;
        let r = rank_eval(&t, &only_top, MissingPolicy::ZeroFill).unwrap();
        assert_eq!(r.zero_filled, 2);
        // scores [0.7, 0, 0] vs truth [9, 4, 1]: ranks [3, 1.5, 1.5] vs [3, 2, 1]
        assert!((r.spearman_rho - (1.0 - 6.0 * 0.5 / 24.0)).abs() < 1e-15);
        // two concordant pairs, one pair tied in the scores
        assert!((r.kendall_tau - 2.0 / (2.0f64 * 3.0).sqrt()).abs() < 1e-15);
        assert!(matches!(
            rank_eval(&t, &only_top, MissingPolicy::Require),
            Err(Error::MissingClass(_))
        ));

        let r = rank_eval(&t, &PatternTable::new(), MissingPolicy::ZeroFill).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.spearman_rho, 0.0);
        assert_eq!(r.zero_filled, 3);

        let mut buf = Vec::new();
        write_rank_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().last().unwrap().starts_with("summary"));
    }

    #[test]
    fn verification() {
        let ab = Alphabet::new(1, 2).unwrap();
        let chain = TypedDigraph::from_edges(ab, vec![0; 4], &[(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        let p = TypedDigraph::from_edges(ab, vec![0; 3], &[(0, 1, 1), (1, 2, 1)]).unwrap();
        let r = verify_top_n(&[&p, &p], std::slice::from_ref(&chain), None);
        assert_eq!(r.counts, vec![Count::Exact(2), Count::Exact(2)]);
        assert_eq!(r.mean, Some(2.0));
        assert_eq!(r.median, Some(2.0));
        let r = verify_top_n(&[&p], std::slice::from_ref(&chain), Some(Duration::ZERO));
        assert_eq!(r.counts, vec![Count::Timeout]);
        assert_eq!(r.mean, None);
        assert_eq!(r.median, None);
        let mut buf = Vec::new();
        write_topn_csv(&r, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("true"));
    }
}

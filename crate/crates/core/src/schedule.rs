//! Update-set policies: which page, set of pages or group acts at step `k`.
//!
//! Random policies draw from a ChaCha8 stream seeded with a 64-bit seed, and
//! convert raw words to floats by hand, so a given `(kind, weights, seed)`
//! yields the same sequence on every platform. Replica `r` of a Monte Carlo
//! batch uses the stream [`replica_seed`]`(seed, r)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Partition, WebGraph};

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// One index per step, each with probability `1/n`.
    UniformSingleton,
    /// One index per step, index `i` with probability `w_i / Σw`.
    WeightedSingleton,
    /// `{k mod n}`.
    RoundRobin,
    /// Sets read from an explicit list; the schedule ends with the list.
    FixedSequence,
    /// Every index independently with probability `q`.
    RandomSubset(f64),
    /// Group `k mod N`.
    PeriodicGroups,
}

impl ScheduleKind {
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            ScheduleKind::UniformSingleton
                | ScheduleKind::WeightedSingleton
                | ScheduleKind::RandomSubset(_)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    domain: usize,
    cumulative: Vec<f64>,
    sequence: Vec<Vec<usize>>,
    seed: u64,
    rng: ChaCha8Rng,
    buf: Vec<usize>,
}

/// SplitMix64 finalizer.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of replica `r`: `seed ⊕ mix64(r)`, with replica 0 on the base seed.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    if replica == 0 {
        seed
    } else {
        seed ^ mix64(replica)
    }
}

impl Schedule {
    fn build(kind: ScheduleKind, domain: usize, seed: u64) -> Result<Self> {
        if domain == 0 {
            return Err(Error::domain("schedule over an empty index set"));
        }
        Ok(Self {
            kind,
            domain,
            cumulative: Vec::new(),
            sequence: Vec::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: Vec::new(),
        })
    }

    pub fn uniform(domain: usize, seed: u64) -> Result<Self> {
        Self::build(ScheduleKind::UniformSingleton, domain, seed)
    }

    /// Singletons drawn proportionally to `weights`, which must all be
    /// positive and finite.
    pub fn weighted(weights: &[f64], seed: u64) -> Result<Self> {
        if let Some(i) = weights.iter().position(|&w| w <= 0.0 || !w.is_finite()) {
            return Err(Error::domain(format!(
                "selection weight {} at index {i} is not positive",
                weights[i]
            )));
        }
        let mut s = Self::build(ScheduleKind::WeightedSingleton, weights.len(), seed)?;
        let mut acc = 0.0;
        s.cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(s)
    }

    pub fn round_robin(domain: usize) -> Result<Self> {
        Self::build(ScheduleKind::RoundRobin, domain, 0)
    }

    pub fn fixed_sequence(domain: usize, sequence: Vec<Vec<usize>>) -> Result<Self> {
        for (k, set) in sequence.iter().enumerate() {
            if let Some(&bad) = set.iter().find(|&&i| i >= domain) {
                return Err(Error::domain(format!(
                    "sequence entry {k} holds index {bad}, out of range for {domain}"
                )));
            }
        }
        let mut s = Self::build(ScheduleKind::FixedSequence, domain, 0)?;
        s.sequence = sequence;
        Ok(s)
    }

    pub fn random_subset(domain: usize, q: f64, seed: u64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::domain(format!(
                "subset probability q = {q} must lie in (0, 1]"
            )));
        }
        Self::build(ScheduleKind::RandomSubset(q), domain, seed)
    }

    pub fn periodic_groups(num_groups: usize) -> Result<Self> {
        Self::build(ScheduleKind::PeriodicGroups, num_groups, 0)
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Number of pages (or groups) the schedule picks from.
    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh copy on the stream of replica `r`.
    pub fn for_replica(&self, replica: u64) -> Self {
        let seed = replica_seed(self.seed, replica);
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: Vec::new(),
            ..self.clone()
        }
    }

    fn uniform_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn draw_weighted(&mut self) -> usize {
        let total = *self.cumulative.last().expect("nonempty weights");
        let target = self.uniform_f64() * total;
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.domain - 1)
    }

    /// The set for step `k`, or `None` once a fixed sequence is exhausted.
    /// Random kinds ignore `k` and advance their stream instead.
    pub fn next(&mut self, k: usize) -> Option<&[usize]> {
        self.buf.clear();
        match self.kind {
            ScheduleKind::UniformSingleton => {
                let i = ((self.uniform_f64() * self.domain as f64) as usize).min(self.domain - 1);
                self.buf.push(i);
            }
            ScheduleKind::WeightedSingleton => {
                let i = self.draw_weighted();
                self.buf.push(i);
            }
            ScheduleKind::RoundRobin | ScheduleKind::PeriodicGroups => {
                self.buf.push(k % self.domain)
            }
            ScheduleKind::FixedSequence => {
                let set = self.sequence.get(k)?;
                self.buf.extend_from_slice(set);
            }
            ScheduleKind::RandomSubset(q) => {
                for i in 0..self.domain {
                    if self.uniform_f64() < q {
                        self.buf.push(i);
                    }
                }
            }
        }
        Some(&self.buf)
    }
}

/// Selection weights proportional to in-degree plus one.
pub fn indegree_plus_one(graph: &WebGraph) -> Vec<f64> {
    (0..graph.n())
        .map(|i| graph.in_degree(i) as f64 + 1.0)
        .collect()
}

/// Group selection weights proportional to group size.
pub fn group_size_weights(partition: &Partition) -> Vec<f64> {
    partition
        .group_sizes()
        .into_iter()
        .map(|l| l as f64)
        .collect()
}

/// Parses `index weight` lines into a dense weight vector of length `domain`.
pub fn parse_weights(text: &str, domain: usize) -> Result<Vec<f64>> {
    let mut weights: Vec<Option<f64>> = vec![None; domain];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        let mut fields = line.split_whitespace();
        let (i, w) = match (fields.next(), fields.next(), fields.next()) {
            (Some(i), Some(w), None) => (
                i.parse::<usize>()
                    .map_err(|_| bad(format!("{i:?} is not an index")))?,
                w.parse::<f64>()
                    .map_err(|_| bad(format!("{w:?} is not a number")))?,
            ),
            _ => return Err(bad(format!("expected `index weight`, found {line:?}"))),
        };
        if i >= domain {
            return Err(bad(format!("index {i} out of range for {domain}")));
        }
        if weights[i].replace(w).is_some() {
            return Err(bad(format!("index {i} given twice")));
        }
    }
    let missing: Vec<usize> = (0..domain).filter(|&i| weights[i].is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "no weight for indices {missing:?}"
        )));
    }
    Ok(weights.into_iter().map(Option::unwrap).collect())
}

/// Parses a sequence file: one set per line as comma-separated indices, `-`
/// for the empty set, `#` comments and blank lines skipped.
pub fn parse_sequence(text: &str) -> Result<Vec<Vec<usize>>> {
    let mut seq = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "-" {
            seq.push(Vec::new());
            continue;
        }
        let set = line
            .split(',')
            .map(|f| {
                f.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("{f:?} is not an index"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        seq.push(set);
    }
    Ok(seq)
}

/// Per-index gap statistics of an emitted history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LivenessReport {
    pub window: usize,
    /// Longest distance between consecutive inclusions, counting the start
    /// of the history as an inclusion at step -1 and its end as one at step
    /// `history.len()`.
    pub max_gap: Vec<usize>,
    /// Indices whose `max_gap` exceeds `window`: some run of `window`
    /// consecutive steps never included them.
    pub violations: Vec<usize>,
}

impl LivenessReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn liveness_audit<S: AsRef<[usize]>>(
    history: &[S],
    domain: usize,
    window: usize,
) -> LivenessReport {
    let mut last: Vec<isize> = vec![-1; domain];
    let mut max_gap = vec![0usize; domain];
    for (k, set) in history.iter().enumerate() {
        for &i in set.as_ref() {
            if i < domain && last[i] != k as isize {
                max_gap[i] = max_gap[i].max((k as isize - last[i]) as usize);
                last[i] = k as isize;
            }
        }
    }
    let end = history.len() as isize;
    for i in 0..domain {
        max_gap[i] = max_gap[i].max((end - last[i]) as usize);
    }
    let violations = (0..domain).filter(|&i| max_gap[i] > window).collect();
    LivenessReport {
        window,
        max_gap,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn take(s: &mut Schedule, steps: usize) -> Vec<Vec<usize>> {
        (0..steps)
            .map_while(|k| s.next(k).map(<[usize]>::to_vec))
            .collect()
    }

    #[test]
    fn round_robin_cycles() {
        let mut s = Schedule::round_robin(3).unwrap();
        assert_eq!(
            take(&mut s, 5),
            vec![vec![0], vec![1], vec![2], vec![0], vec![1]]
        );
    }

    #[test]
    fn fixed_sequence_ends() {
        let mut s = Schedule::fixed_sequence(4, vec![vec![1], vec![], vec![0, 3]]).unwrap();
        assert_eq!(take(&mut s, 10), vec![vec![1], vec![], vec![0, 3]]);
        assert!(s.next(3).is_none());
        assert!(Schedule::fixed_sequence(2, vec![vec![2]]).is_err());
    }

    #[test]
    fn seeded_streams_repeat() {
        let mut a = Schedule::uniform(50, 9).unwrap();
        let mut b = Schedule::uniform(50, 9).unwrap();
        assert_eq!(take(&mut a, 200), take(&mut b, 200));
        let mut c = Schedule::uniform(50, 10).unwrap();
        let mut a = Schedule::uniform(50, 9).unwrap();
        assert_ne!(take(&mut a, 200), take(&mut c, 200));
    }

    #[test]
    fn replica_streams_differ() {
        let base = Schedule::random_subset(20, 0.5, 3).unwrap();
        let mut r0 = base.for_replica(0);
        let mut r1 = base.for_replica(1);
        let mut again = base.clone();
        let h0 = take(&mut r0, 30);
        assert_eq!(h0, take(&mut again, 30));
        assert_ne!(h0, take(&mut r1, 30));
    }

    #[test]
    fn uniform_frequencies() {
        let mut s = Schedule::uniform(7, 2024).unwrap();
        let mut counts = [0usize; 7];
        for k in 0..70_000 {
            counts[s.next(k).unwrap()[0]] += 1;
        }
        for c in counts {
            let f = c as f64 / 70_000.0;
            assert!((f - 1.0 / 7.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn weighted_frequencies_within_five_sigma() {
        let w = [1.0, 2.0, 3.0, 0.5, 10.0];
        let total: f64 = w.iter().sum();
        let mut s = Schedule::weighted(&w, 77).unwrap();
        let draws = 1_000_000;
        let mut counts = [0usize; 5];
        for k in 0..draws {
            counts[s.next(k).unwrap()[0]] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = w[i] / total;
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - draws as f64 * p).abs() < 5.0 * sd, "{i}: {c}");
        }
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(Schedule::weighted(&[1.0, 0.0], 1).is_err());
        assert!(Schedule::weighted(&[1.0, -1.0], 1).is_err());
        assert!(Schedule::weighted(&[1.0, f64::NAN], 1).is_err());
        assert!(Schedule::random_subset(3, 0.0, 1).is_err());
        assert!(Schedule::random_subset(3, 1.5, 1).is_err());
    }

    #[test]
    fn star_indegree_weights() {
        // every leaf links to the centre, the centre links to every leaf
        let n = 6;
        let edges = (1..n).flat_map(|i| [(i, 0), (0, i)]);
        let g = WebGraph::from_edges(n, edges).unwrap();
        let w = indegree_plus_one(&g);
        assert_eq!(w[0], n as f64);
        assert!(w[1..].iter().all(|&v| v == 2.0));
        let total: f64 = w.iter().sum();
        assert_eq!(w[0] / total, n as f64 / (n as f64 + 2.0 * (n - 1) as f64));
    }

    #[test]
    fn audit_round_robin() {
        let mut s = Schedule::round_robin(5).unwrap();
        let h = take(&mut s, 50);
        let r = liveness_audit(&h, 5, 5);
        assert!(r.is_clean());
        assert!(r.max_gap.iter().all(|&g| g == 5));
    }

    #[test]
    fn audit_flags_missing_page() {
        let h: Vec<Vec<usize>> = (0..100).map(|k| vec![k % 3]).collect();
        let r = liveness_audit(&h, 4, 50);
        assert_eq!(r.violations, vec![3]);
        assert_eq!(r.max_gap[3], 101);
    }

    #[test]
    fn audit_random_subset_clean() {
        let mut s = Schedule::random_subset(30, 0.5, 11).unwrap();
        let h = take(&mut s, 1_000);
        assert!(liveness_audit(&h, 30, 60).is_clean());
    }

    #[test]
    fn weight_and_sequence_files() {
        assert_eq!(
            parse_weights("# w\n1 2.5\n0 1\n", 2).unwrap(),
            vec![1.0, 2.5]
        );
        assert!(matches!(
            parse_weights("0 1\n", 2),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_weights("0 1\n0 2\n1 1", 2),
            Err(Error::Parse { line: 2, .. })
        ));
        assert_eq!(
            parse_sequence("0,2\n-\n# c\n\n 3 , 1\n").unwrap(),
            vec![vec![0, 2], vec![], vec![3, 1]]
        );
        assert!(matches!(
            parse_sequence("1,a"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}

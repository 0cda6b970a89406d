//! Agglomerative clustering with Ward linkage.
//!
//! Distances start as squared Euclidean distances between points and are
//! updated with the Lance-Williams recurrence for Ward's criterion:
//!
//! ```text
//! d(a∪b, c) = ((n_a + n_c) d(a,c) + (n_b + n_c) d(b,c) - n_c d(a,b)) / (n_a + n_b + n_c)
//! ```
//!
//! With that initialization `d(a, b) / 2` is the increase in within-cluster
//! sum of squares caused by merging `a` and `b`, which is what each merge
//! records as its height. The pair with minimum distance merges first; equal
//! distances are resolved by the lexicographically smallest
//! `(left_id, right_id)` pair of cluster ids. Leaves are ids `0..n`, the
//! cluster created by merge `s` gets id `n + s`.

use std::cell::Cell;
use std::cmp::Ordering;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::FeatureMatrix;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("feature value {value} at row {row} is not finite")]
    NonFinite { row: usize, value: f64 },
    #[error("cannot cut {n} leaves into {k} clusters")]
    BadK { k: usize, n: usize },
    #[error("cannot cluster an empty feature matrix")]
    Empty,
    #[error("malformed dendrogram: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Dense symmetric `n × n` matrix of squared Euclidean distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

pub fn pairwise_sq_dist(features: &FeatureMatrix) -> DistanceMatrix {
    sq_dist_rows(features.values(), features.n(), features.d())
}

fn sq_dist_rows(values: &[f64], n: usize, d: usize) -> DistanceMatrix {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let xi = &values[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            let xj = &values[j * d..(j + 1) * d];
            let s: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            data[i * n + j] = s;
            data[j * n + i] = s;
        }
    }
    DistanceMatrix { n, data }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Increase in within-cluster sum of squares.
    pub height: f64,
    pub size: usize,
}

/// Full merge history of an agglomerative clustering of `n` leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

/// Partition of the participants into `k` clusters. Cluster indices are
/// numbered by first appearance in participant order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClusterAssignment {
    k: usize,
    labels: Vec<usize>,
}

impl ClusterAssignment {
    /// Canonicalizes arbitrary cluster keys to `0..k` by first appearance.
    pub fn from_keys(keys: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<usize> = keys
            .iter()
            .map(|&key| {
                let next = map.len();
                *map.entry(key).or_insert(next)
            })
            .collect();
        ClusterAssignment {
            k: map.len(),
            labels,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_of(&self, participant: usize) -> usize {
        self.labels[participant]
    }

    /// Members of each cluster, in participant order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.k as u64).to_le_bytes());
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

thread_local! {
    static LINKAGE_CALLS: Cell<usize> = const { Cell::new(0) };
}

/// Number of [`ward_linkage`] calls made on the current thread.
pub fn linkage_calls() -> usize {
    LINKAGE_CALLS.with(Cell::get)
}

pub fn reset_linkage_calls() {
    LINKAGE_CALLS.with(|c| c.set(0));
}

/// Active-cluster nearest neighbor: `(distance, lo_id, hi_id, slot)`.
#[derive(Clone, Copy, Debug)]
struct Nearest {
    dist: f64,
    lo: usize,
    hi: usize,
    slot: usize,
}

fn key_cmp(a: &Nearest, b: &Nearest) -> Ordering {
    a.dist
        .partial_cmp(&b.dist)
        .expect("distances are finite")
        .then(a.lo.cmp(&b.lo))
        .then(a.hi.cmp(&b.hi))
}

pub fn ward_linkage(features: &FeatureMatrix) -> Result<Dendrogram, ClusterError> {
    LINKAGE_CALLS.with(|c| c.set(c.get() + 1));
    let n = features.n();
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    if let Some((idx, &value)) = features.values().iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(ClusterError::NonFinite {
            row: idx / features.d().max(1),
            value,
        });
    }
    Ok(ward_from_distances(pairwise_sq_dist(features)))
}

/// Runs Ward linkage over precomputed squared Euclidean distances.
pub fn ward_from_distances(dist: DistanceMatrix) -> Dendrogram {
    let n = dist.n;
    let mut d = dist.data;
    // slot s holds the cluster with id `ids[s]`
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    let nearest_of = |s: usize, d: &[f64], ids: &[usize], active: &[bool]| -> Option<Nearest> {
        let mut best: Option<Nearest> = None;
        for t in 0..n {
            if t == s || !active[t] {
                continue;
            }
            let (lo, hi) = if ids[s] < ids[t] { (ids[s], ids[t]) } else { (ids[t], ids[s]) };
            let cand = Nearest {
                dist: d[s * n + t],
                lo,
                hi,
                slot: t,
            };
            if best.is_none_or(|b| key_cmp(&cand, &b) == Ordering::Less) {
                best = Some(cand);
            }
        }
        best
    };

    let mut nn: Vec<Option<Nearest>> = (0..n).map(|s| nearest_of(s, &d, &ids, &active)).collect();

    for step in 0..n.saturating_sub(1) {
        // global minimum over per-slot nearest neighbors
        let (a, best) = (0..n)
            .filter(|&s| active[s])
            .filter_map(|s| nn[s].map(|b| (s, b)))
            .min_by(|x, y| key_cmp(&x.1, &y.1))
            .expect("at least two active clusters");
        let b = best.slot;
        let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
        let dab = best.dist;

        // merged cluster takes slot `a`
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let nc = sizes[c] as f64;
            let v = ((na + nc) * d[a * n + c] + (nb + nc) * d[b * n + c] - nc * dab) / (na + nb + nc);
            d[a * n + c] = v;
            d[c * n + a] = v;
        }
        let (left, right) = (best.lo, best.hi);
        let size = sizes[a] + sizes[b];
        merges.push(Merge {
            left,
            right,
            height: dab / 2.0,
            size,
        });
        active[b] = false;
        nn[b] = None;
        ids[a] = n + step;
        sizes[a] = size;

        // Ward is reducible: the merged cluster is never closer to c than
        // both halves were, so only neighbors that pointed at a or b change.
        // The new id is larger than every other id, so it can only replace
        // an unchanged neighbor on a strict improvement.
        for c in 0..n {
            if !active[c] || c == a {
                continue;
            }
            match nn[c] {
                Some(cur) if cur.slot == a || cur.slot == b => {
                    nn[c] = nearest_of(c, &d, &ids, &active);
                }
                Some(cur) => {
                    let dv = d[c * n + a];
                    if dv < cur.dist {
                        nn[c] = Some(Nearest {
                            dist: dv,
                            lo: ids[c],
                            hi: ids[a],
                            slot: a,
                        });
                    }
                }
                None => nn[c] = nearest_of(c, &d, &ids, &active),
            }
        }
        nn[a] = nearest_of(a, &d, &ids, &active);
    }
    Dendrogram { n, merges }
}

impl Dendrogram {
    pub fn from_merges(n: usize, merges: Vec<Merge>) -> Result<Self, ClusterError> {
        if n == 0 || merges.len() != n - 1 {
            return Err(ClusterError::Malformed(format!(
                "{} merges for {n} leaves",
                merges.len()
            )));
        }
        let mut size = vec![1usize; n];
        size.resize(2 * n - 1, 0);
        let mut used = vec![false; 2 * n - 1];
        for (s, m) in merges.iter().enumerate() {
            let new_id = n + s;
            for child in [m.left, m.right] {
                if child >= new_id || used[child] {
                    return Err(ClusterError::Malformed(format!(
                        "merge {s} reuses or forward-references cluster {child}"
                    )));
                }
                used[child] = true;
            }
            if m.left >= m.right || size[m.left] + size[m.right] != m.size || m.height.is_nan() || m.height < 0.0 {
                return Err(ClusterError::Malformed(format!("merge {s} is inconsistent")));
            }
            size[new_id] = m.size;
        }
        Ok(Dendrogram { n, merges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Undoes the last `k - 1` merges; the connected components are the
    /// clusters.
    pub fn cut(&self, k: usize) -> Result<ClusterAssignment, ClusterError> {
        if k == 0 || k > self.n {
            return Err(ClusterError::BadK { k, n: self.n });
        }
        let n = self.n;
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        for (s, m) in self.merges[..n - k].iter().enumerate() {
            parent[m.left] = n + s;
            parent[m.right] = n + s;
        }
        let root = |mut x: usize| {
            while parent[x] != x {
                x = parent[x];
            }
            x
        };
        let keys: Vec<usize> = (0..n).map(root).collect();
        Ok(ClusterAssignment::from_keys(&keys))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ClusterError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["left", "right", "height", "size"])?;
        for m in &self.merges {
            out.write_record([
                m.left.to_string(),
                m.right.to_string(),
                format!("{:e}", m.height),
                m.size.to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dendrogram, ClusterError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut merges = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or_default().trim().to_string();
            let bad = |e: String| ClusterError::Malformed(e);
            merges.push(Merge {
                left: field(0).parse().map_err(|_| bad(field(0)))?,
                right: field(1).parse().map_err(|_| bad(field(1)))?,
                height: field(2).parse().map_err(|_| bad(field(2)))?,
                size: field(3).parse().map_err(|_| bad(field(3)))?,
            });
        }
        let n = merges.len() + 1;
        Dendrogram::from_merges(n, merges)
    }

    /// Hash of the exact merge sequence, heights included bit for bit.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for m in &self.merges {
            h.update((m.left as u64).to_le_bytes());
            h.update((m.right as u64).to_le_bytes());
            h.update(m.height.to_bits().to_le_bytes());
            h.update((m.size as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

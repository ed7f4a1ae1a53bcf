//! Stepwise dendrograms: the merge history of a hierarchical clustering run.

use crate::error::{Error, Result};

use crate::partition::Partition;

/// One agglomeration step.
///
/// Cluster ids follow the usual convention: the `n` singletons are
/// `0..n`, and the cluster created at step `t` gets id `n + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    /// Step index, `0..n-1`.
    pub step: usize,
    /// Smaller id of the merged pair.
    pub left: usize,
    /// Larger id of the merged pair.
    pub right: usize,
    /// Exact increase of the error measure caused by this merge.
    pub delta_e: f64,
    /// Error measure of the partition after this merge (the all-singletons
    /// partition has error zero).
    pub error_after: f64,
    /// Member count of the newly created cluster.
    pub new_size: usize,
}

/// A sub-cluster extracted from a dendrogram level: its members (ascending)
/// and its cached self-sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    /// Member objects, ascending.
    pub members: Vec<usize>,
    /// Ordered-pair self-sum of the members.
    pub self_sum: f64,
}

impl Unit {
    /// Member count.
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// The full merge history of `n` objects: `n - 1` ordered steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    steps: Vec<MergeStep>,
}

impl Dendrogram {
    /// Builds a dendrogram from explicit steps, validating the id
    /// convention: step `t` creates cluster `n + t`, every id is merged at
    /// most once, and ids refer to already-existing clusters.
    pub fn new(n: usize, steps: Vec<MergeStep>) -> Result<Self> {
        if n < 2 || steps.len() != n - 1 {
            return Err(Error::InvalidParameter { what: "a dendrogram needs exactly n - 1 steps" });
        }
        let mut merged = vec![false; 2 * n - 1];
        for (t, s) in steps.iter().enumerate() {
            let created = n + t;
            if s.step != t || s.left >= s.right || s.right >= created {
                return Err(Error::InvalidParameter { what: "merge step violates the id convention" });
            }
            if merged[s.left] || merged[s.right] {
                return Err(Error::InvalidParameter { what: "cluster id merged twice" });
            }
            merged[s.left] = true;
            merged[s.right] = true;
        }
        Ok(Self { n, steps })
    }

    pub(crate) fn from_steps(n: usize, steps: Vec<MergeStep>) -> Self {
        debug_assert_eq!(steps.len(), n - 1);
        Self { n, steps }
    }

    /// Number of clustered objects.
    pub fn n_objects(&self) -> usize {
        self.n
    }

    /// The merge steps in order.
    pub fn steps(&self) -> &[MergeStep] {
        &self.steps
    }

    /// Replays merges until `k` clusters remain and returns that partition.
    ///
    /// Labels are assigned `0..k` in order of each cluster's smallest member.
    /// Cached cluster sums are derived from the recorded merge deltas, not by
    /// rescanning the matrix.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        let replay = self.replay(k)?;
        let mut assignment = vec![usize::MAX; self.n];
        let mut label_of_root = vec![usize::MAX; self.n + (self.n - k)];
        let mut sizes = Vec::with_capacity(k);
        let mut sums = Vec::with_capacity(k);
        let mut parent = replay.parent;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let root = find(&mut parent, i);
            if label_of_root[root] == usize::MAX {
                label_of_root[root] = sizes.len();
                sizes.push(replay.size[root]);
                sums.push(replay.energy[root] * replay.size[root] as f64);
            }
            *slot = label_of_root[root];
        }
        Ok(Partition::from_parts(assignment, sizes, sums))
    }

    /// The clusters of the level with `size` clusters, as refinement units
    /// ordered by smallest member.
    pub fn cut_units(&self, size: usize) -> Result<Vec<Unit>> {
        let replay = self.replay(size)?;
        let mut parent = replay.parent;
        let mut unit_of_root = vec![usize::MAX; self.n + (self.n - size)];
        let mut units: Vec<Unit> = Vec::with_capacity(size);
        for i in 0..self.n {
            let root = find(&mut parent, i);
            if unit_of_root[root] == usize::MAX {
                unit_of_root[root] = units.len();
                units.push(Unit {
                    members: Vec::with_capacity(replay.size[root]),
                    self_sum: replay.energy[root] * replay.size[root] as f64,
                });
            }
            units[unit_of_root[root]].members.push(i);
        }
        Ok(units)
    }

    fn replay(&self, k: usize) -> Result<Replay> {
        if k < 1 || k > self.n {
            return Err(Error::KOutOfRange { k, n: self.n });
        }
        let merges = self.n - k;
        let ids = self.n + merges;
        let mut parent: Vec<usize> = (0..ids).collect();
        let mut size = vec![1usize; ids];
        let mut energy = vec![0.0f64; ids];
        for step in &self.steps[..merges] {
            let created = self.n + step.step;
            parent[step.left] = created;
            parent[step.right] = created;
            size[created] = step.new_size;
            // Per-cluster error contribution e_C = S_C / |C| telescopes over
            // merges, which recovers each created cluster's self-sum without
            // touching the matrix.
            energy[created] = step.delta_e + energy[step.left] + energy[step.right];
        }
        Ok(Replay { parent, size, energy })
    }
}

struct Replay {
    parent: Vec<usize>,
    size: Vec<usize>,
    energy: Vec<f64>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    while parent[i] != root {
        let next = parent[i];
        parent[i] = root;
        i = next;
    }
    root
}

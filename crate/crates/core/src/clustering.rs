//! Single-linkage agglomerative clustering of scalar opinions.
//!
//! The dendrogram is built with the general minimum-spanning-tree
//! construction (Prim's algorithm over the full Manhattan distance matrix),
//! which yields exactly the single-linkage merge heights. It does not rely on
//! the values being one-dimensional; [`sorted_gap_oracle`] does, and serves as
//! the independent cross-check.

/// Cut height used for opinion clusters: one tenth of the opinion range.
pub const DEFAULT_CUT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Cluster ids. Leaves are `0..n`; the cluster created by merge `k` has
    /// id `n + k`.
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<f64>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaves(&self) -> &[f64] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Clusters left after refusing every merge taller than `cut`.
    pub fn count_clusters(&self, cut: f64) -> usize {
        if self.leaves.is_empty() {
            return 0;
        }
        1 + self.merges.iter().filter(|m| m.distance > cut).count()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    label: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            label: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize, new_label: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.label[big] = new_label;
        self.size[big]
    }
}

/// Builds the single-linkage dendrogram of `values`.
///
/// Merge heights come out non-decreasing. Equal heights are resolved by the
/// order in which Prim's algorithm discovered the spanning-tree edges, which
/// itself prefers lower point indices.
pub fn single_linkage(values: &[f64]) -> Dendrogram {
    let n = values.len();
    let mut tree_edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n.saturating_sub(1));

    if n > 1 {
        let mut in_tree = vec![false; n];
        let mut best = vec![f64::INFINITY; n];
        let mut link = vec![0usize; n];
        let mut current = 0;
        in_tree[0] = true;
        for _ in 1..n {
            let mut next = usize::MAX;
            let mut next_dist = f64::INFINITY;
            for j in 0..n {
                if in_tree[j] {
                    continue;
                }
                let d = (values[current] - values[j]).abs();
                if d < best[j] {
                    best[j] = d;
                    link[j] = current;
                }
                if best[j] < next_dist || next == usize::MAX {
                    next_dist = best[j];
                    next = j;
                }
            }
            in_tree[next] = true;
            tree_edges.push((next_dist, link[next].min(next), link[next].max(next)));
            current = next;
        }
    }

    // stable sort keeps discovery order among equal heights
    tree_edges.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut sets = DisjointSet::new(n);
    let merges = tree_edges
        .into_iter()
        .enumerate()
        .map(|(k, (distance, p, q))| {
            let (rp, rq) = (sets.find(p), sets.find(q));
            let (la, lb) = (sets.label[rp], sets.label[rq]);
            let size = sets.union(p, q, n + k);
            Merge {
                a: la.min(lb),
                b: la.max(lb),
                distance,
                size,
            }
        })
        .collect();

    Dendrogram {
        leaves: values.to_vec(),
        merges,
    }
}

pub fn count_clusters(dendrogram: &Dendrogram, cut: f64) -> usize {
    dendrogram.count_clusters(cut)
}

/// Cluster count of `values` at `cut` via the dendrogram.
pub fn cluster_count(values: &[f64], cut: f64) -> usize {
    single_linkage(values).count_clusters(cut)
}

/// One plus the number of adjacent sorted gaps strictly wider than `cut`.
pub fn sorted_gap_oracle(values: &[f64], cut: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    1 + sorted.windows(2).filter(|w| w[1] - w[0] > cut).count()
}

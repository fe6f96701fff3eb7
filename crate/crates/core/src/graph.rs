//! Undirected simple graphs with a two-group node partition, and the
//! Erdős–Rényi / two-block random generators used by the experiments.
//!
//! Adjacency is stored in compressed sparse row form with each neighbor list
//! sorted ascending. Graphs are immutable once built.

use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{check_probability, Error, Result};

/// Group membership of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Group {
    Minority = 0,
    Majority = 1,
}

impl Group {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Symmetric 2x2 edge probability matrix. Diagonal entries are the
/// within-group link probabilities, `h01` is shared by both off-diagonal cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatrix {
    h00: f64,
    h01: f64,
    h11: f64,
}

impl BlockMatrix {
    pub fn new(h00: f64, h01: f64, h11: f64) -> Result<Self> {
        Ok(BlockMatrix {
            h00: check_probability("h00", h00)?,
            h01: check_probability("h01", h01)?,
            h11: check_probability("h11", h11)?,
        })
    }

    /// A matrix with every entry equal to `p`.
    pub fn uniform(p: f64) -> Result<Self> {
        Self::new(p, p, p)
    }

    pub fn h00(&self) -> f64 {
        self.h00
    }

    pub fn h01(&self) -> f64 {
        self.h01
    }

    pub fn h11(&self) -> f64 {
        self.h11
    }

    pub fn get(&self, a: Group, b: Group) -> f64 {
        match (a, b) {
            (Group::Minority, Group::Minority) => self.h00,
            (Group::Majority, Group::Majority) => self.h11,
            _ => self.h01,
        }
    }
}

/// Share of nodes placed in the minority group.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MinorityFraction(f64);

impl MinorityFraction {
    pub fn new(f0: f64) -> Result<Self> {
        check_probability("f0", f0).map(MinorityFraction)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `round(f0 * n)`, halves rounded away from zero.
    pub fn minority_count(self, n: usize) -> usize {
        (self.0 * n as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    labels: Vec<Group>,
}

impl Graph {
    /// Builds a graph from node labels and an undirected edge list.
    ///
    /// Rejects self-loops, out-of-range endpoints and repeated pairs
    /// (in either orientation).
    pub fn from_edges(labels: Vec<Group>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::NodeOutOfRange {
                        index,
                        node_count: n,
                    });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a, b));
            }
        }
        let mut normalized: Vec<(usize, usize)> =
            edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(Self::from_sorted_pairs(labels, &normalized))
    }

    /// `pairs` must be valid, `i < j` and free of duplicates.
    fn from_sorted_pairs(labels: Vec<Group>, pairs: &[(usize, usize)]) -> Self {
        let n = labels.len();
        let mut degree = vec![0usize; n];
        for &(a, b) in pairs {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut targets = vec![0u32; offsets[n]];
        for &(a, b) in pairs {
            targets[cursor[a]] = b as u32;
            cursor[a] += 1;
            targets[cursor[b]] = a as u32;
            cursor[b] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Graph {
            offsets,
            targets,
            labels,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn label(&self, i: usize) -> Group {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Group] {
        &self.labels
    }

    /// Node counts as `(minority, majority)`.
    pub fn group_counts(&self) -> (usize, usize) {
        let minority = self
            .labels
            .iter()
            .filter(|&&g| g == Group::Minority)
            .count();
        (minority, self.labels.len() - minority)
    }

    /// Undirected edges, each reported once as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Edge counts per block pair: `[minority-minority, cross, majority-majority]`.
    pub fn block_edge_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for (i, j) in self.edges() {
            counts[self.labels[i].index() + self.labels[j].index()] += 1;
        }
        counts
    }

    /// Writes a `# labels:` header followed by one `i j` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "# labels:")?;
        for label in &self.labels {
            write!(out, " {label}")?;
        }
        writeln!(out)?;
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }
}

/// Free-function form of [`Graph::group_counts`].
pub fn group_counts(g: &Graph) -> (usize, usize) {
    g.group_counts()
}

/// Calls `hit` with every index in `0..len` that succeeds an independent
/// Bernoulli(p) trial, skipping runs of failures with geometric draws.
fn bernoulli_hits<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R, mut hit: impl FnMut(usize)) {
    if len == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..len).for_each(hit);
        return;
    }
    let gaps = Geometric::new(p).expect("p checked to lie in (0, 1)");
    let mut pos = 0usize;
    loop {
        let skip = gaps.sample(rng);
        pos = match usize::try_from(skip).ok().and_then(|s| pos.checked_add(s)) {
            Some(next) if next < len => next,
            _ => return,
        };
        hit(pos);
        pos += 1;
    }
}

/// Core two-block sampler. Nodes `0..minority` form group 0.
fn sample_two_block<R: Rng + ?Sized>(
    n: usize,
    minority: usize,
    h: &BlockMatrix,
    rng: &mut R,
) -> Graph {
    let mut labels = vec![Group::Minority; minority];
    labels.resize(n, Group::Majority);

    let mut pairs = Vec::new();
    for i in 0..minority {
        let start = i + 1;
        bernoulli_hits(minority - start, h.h00, rng, |k| pairs.push((i, start + k)));
        bernoulli_hits(n - minority, h.h01, rng, |k| pairs.push((i, minority + k)));
    }
    for i in minority..n {
        let start = i + 1;
        bernoulli_hits(n - start, h.h11, rng, |k| pairs.push((i, start + k)));
    }
    Graph::from_sorted_pairs(labels, &pairs)
}

/// Erdős–Rényi G(n, p). Every node is labeled majority.
pub fn generate_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let h = BlockMatrix::uniform(check_probability("p", p)?)?;
    Ok(sample_two_block(n, 0, &h, rng))
}

/// Two-block random graph: the first `round(f0 * n)` nodes are minority, each
/// pair links independently with probability `H[label_i][label_j]`.
pub fn generate_sbm<R: Rng + ?Sized>(
    n: usize,
    f0: MinorityFraction,
    h: &BlockMatrix,
    rng: &mut R,
) -> Result<Graph> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(sample_two_block(n, f0.minority_count(n), h, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_simple(g: &Graph) {
        for i in 0..g.node_count() {
            let nbrs = g.neighbors(i);
            assert!(
                nbrs.windows(2).all(|w| w[0] < w[1]),
                "unsorted or duplicate at {i}"
            );
            for &j in nbrs {
                assert_ne!(j as usize, i, "self-loop at {i}");
                assert!(g.neighbors(j as usize).binary_search(&(i as u32)).is_ok());
            }
        }
    }

    #[test]
    fn er_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(generate_er(5, 0.0, &mut rng).unwrap().edge_count(), 0);
        let full = generate_er(5, 1.0, &mut rng).unwrap();
        assert_eq!(full.edge_count(), 10);
        assert_simple(&full);
        assert_eq!(full.group_counts(), (0, 5));
    }

    #[test]
    fn er_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            generate_er(0, 0.5, &mut rng),
            Err(Error::EmptyGraph)
        ));
        assert!(matches!(
            generate_er(5, 1.5, &mut rng),
            Err(Error::InvalidParameter { name: "p", .. })
        ));
        assert!(generate_er(5, -0.1, &mut rng).is_err());
    }

    #[test]
    fn sbm_zero_matrix_has_no_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = BlockMatrix::new(0.0, 0.0, 0.0).unwrap();
        let g = generate_sbm(10, MinorityFraction::new(0.2).unwrap(), &h, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.group_counts(), (2, 8));
    }

    #[test]
    fn minority_rounding() {
        let h = BlockMatrix::uniform(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = generate_sbm(10, MinorityFraction::new(0.25).unwrap(), &h, &mut rng).unwrap();
        assert_eq!(group_counts(&g), (3, 7));
        let g = generate_sbm(1000, MinorityFraction::new(0.2).unwrap(), &h, &mut rng).unwrap();
        assert_eq!(group_counts(&g), (200, 800));
        let g = generate_er(100, 0.1, &mut rng).unwrap();
        assert_eq!(group_counts(&g), (0, 100));
    }

    #[test]
    fn invalid_block_entries() {
        assert!(BlockMatrix::new(0.1, 1.2, 0.1).is_err());
        assert!(BlockMatrix::new(f64::NAN, 0.1, 0.1).is_err());
        assert!(MinorityFraction::new(-0.01).is_err());
    }

    #[test]
    fn complete_sbm_blocks() {
        let h = BlockMatrix::new(1.0, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = generate_sbm(10, MinorityFraction::new(0.3).unwrap(), &h, &mut rng).unwrap();
        assert_eq!(g.block_edge_counts(), [3, 0, 21]);
    }

    #[test]
    fn from_edges_validation() {
        let labels = vec![Group::Majority; 3];
        assert!(matches!(
            Graph::from_edges(labels.clone(), &[(0, 0)]),
            Err(Error::SelfLoop(0, 0))
        ));
        assert!(matches!(
            Graph::from_edges(labels.clone(), &[(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(Graph::from_edges(labels.clone(), &[(0, 3)]).is_err());
        assert!(Graph::from_edges(vec![], &[]).is_err());
        let g = Graph::from_edges(labels, &[(2, 0), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(2), &[0, 1]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn edge_list_export() {
        let g = Graph::from_edges(
            vec![Group::Minority, Group::Majority, Group::Majority],
            &[(0, 1), (1, 2)],
        )
        .unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# labels: 0 1 1\n0 1\n1 2\n"
        );
    }

    proptest! {
        #[test]
        fn generated_graphs_are_simple(
            n in 1usize..60,
            f0 in 0.0f64..=1.0,
            h00 in 0.0f64..=1.0,
            h01 in 0.0f64..=1.0,
            h11 in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let h = BlockMatrix::new(h00, h01, h11).unwrap();
            let f0 = MinorityFraction::new(f0).unwrap();
            let g = generate_sbm(n, f0, &h, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_simple(&g);
            let (m, rest) = g.group_counts();
            prop_assert_eq!(m + rest, n);
            prop_assert!(g.labels()[..m].iter().all(|&l| l == Group::Minority));

            let again = generate_sbm(n, f0, &h, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(g, again);
        }
    }
}

use crate::error::{Error, Result};
use crate::numkernel::DataMatrix;

/// Undirected simple graph on nodes `0..n`, stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    /// Duplicate edges (in either orientation) collapse to one link.
    /// Self-links and out-of-range endpoints are errors.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::InvalidData(format!("{n} nodes exceed the supported range")));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidData(format!("edge ({a}, {b}) outside 0..{n}")));
            }
            if a == b {
                return Err(Error::InvalidData(format!("self-link at node {a}")));
            }
            adj[a].push(b as u32);
            adj[b].push(a as u32);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbours(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&(j as u32)).is_ok()
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().map(|&j| j as usize).filter(|&j| j > i).map(|j| (i, j)));
        }
        out
    }

    /// Node `i` becomes node `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::InvalidData("permutation length differs from node count".into()));
        }
        let edges: Vec<_> = self.edges().into_iter().map(|(a, b)| (perm[a], perm[b])).collect();
        Self::from_edges(self.n(), &edges)
    }
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Share of pairs of `i`'s neighbours that are themselves linked; 0 when
/// `i` has at most one link.
pub fn individual_clustering(g: &Graph, i: usize) -> f64 {
    let nb = g.neighbours(i);
    let deg = nb.len();
    if deg < 2 {
        return 0.0;
    }
    // each closed pair is seen from both endpoints
    let closed: usize = nb
        .iter()
        .map(|&j| sorted_intersection_len(nb, g.neighbours(j as usize)))
        .sum();
    closed as f64 / (deg * (deg - 1)) as f64
}

pub fn avg_clustering(g: &Graph) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    (0..g.n()).map(|i| individual_clustering(g, i)).sum::<f64>() / g.n() as f64
}

/// `X_i = Cl_i - (2 / (n - 1)) deg_i`.
pub fn clustering_contrast(g: &Graph) -> Result<DataMatrix> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidData("clustering contrast needs at least two nodes".into()));
    }
    let scale = 2.0 / (n - 1) as f64;
    let x: Vec<f64> = (0..n)
        .map(|i| individual_clustering(g, i) - scale * g.degree(i) as f64)
        .collect();
    DataMatrix::from_column(&x)
}

/// Parses a whitespace-separated edge list, one `a b` pair per line; blank
/// lines and lines starting with `#` or `%` are skipped. Ids are zero-based
/// when any id is 0 and one-based otherwise. The node count is one past the
/// largest zero-based id unless `n` is given.
pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Graph> {
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut id = || -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: expected two node ids", lineno + 1)))?;
            tok.parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {}: `{tok}` is not a node id", lineno + 1)))
        };
        let a = id()?;
        let b = id()?;
        if it.next().is_some() {
            return Err(Error::Parse(format!("line {}: more than two fields", lineno + 1)));
        }
        raw.push((a, b));
    }
    let zero_based = raw.iter().any(|&(a, b)| a == 0 || b == 0);
    let shift = usize::from(!zero_based);
    let edges: Vec<(usize, usize)> = raw.iter().map(|&(a, b)| (a - shift, b - shift)).collect();
    let needed = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let n = match n {
        Some(n) if n < needed => {
            return Err(Error::Parse(format!("edge list references {needed} nodes but n = {n}")))
        }
        Some(n) => n,
        None => needed,
    };
    Graph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::sample_mean;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    // Oracle: the ordered-triple sums over an adjacency matrix.
    fn dense_clustering(g: &Graph, i: usize) -> f64 {
        let n = g.n();
        let a = |p: usize, q: usize| g.has_edge(p, q) as u32 as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                if j != i && k != j && k != i {
                    num += a(i, j) * a(i, k) * a(j, k);
                    den += a(i, j) * a(i, k);
                }
            }
        }
        if g.degree(i) <= 1 {
            0.0
        } else {
            num / den
        }
    }

    #[test]
    fn triangle_is_fully_clustered() {
        let g = triangle();
        assert!((0..3).all(|i| individual_clustering(&g, i) == 1.0));
        assert_eq!(avg_clustering(&g), 1.0);
        assert_eq!(clustering_contrast(&g).unwrap().column(0), vec![-1.0; 3]);
    }

    #[test]
    fn star_has_no_clustering() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!((0..4).all(|i| individual_clustering(&g, i) == 0.0));
    }

    #[test]
    fn empty_graph_contrast_is_zero() {
        let x = clustering_contrast(&Graph::empty(5)).unwrap();
        assert!(x.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn agrees_with_dense_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let g = erdos_renyi(25, 0.25, &mut rng);
            for i in 0..g.n() {
                let c = individual_clustering(&g, i);
                assert!((c - dense_clustering(&g, i)).abs() < 1e-14);
                assert!((0.0..=1.0).contains(&c));
            }
        }
    }

    #[test]
    fn contrast_mean_identity_and_relabelling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = erdos_renyi(60, 0.1, &mut rng);
        let x = clustering_contrast(&g).unwrap();
        let mean_deg = g.degrees().iter().sum::<usize>() as f64 / 60.0;
        let want = avg_clustering(&g) - 2.0 / 59.0 * mean_deg;
        assert!((sample_mean(&x)[0] - want).abs() < 1e-12);
        let mut perm: Vec<usize> = (0..60).collect();
        perm.shuffle(&mut rng);
        let h = g.relabel(&perm).unwrap();
        assert!((avg_clustering(&g) - avg_clustering(&h)).abs() < 1e-12);
    }

    #[test]
    fn erdos_renyi_clustering_near_link_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let reps = 200;
        let vals: Vec<f64> = (0..reps).map(|_| avg_clustering(&erdos_renyi(50, 0.2, &mut rng))).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        // nodes with < 2 links contribute 0 (P ≈ 0.002 here), a negligible pull below p
        assert!((mean - 0.2).abs() < 4.0 * sd / (reps as f64).sqrt() + 1e-3, "mean {mean}");
    }

    #[test]
    fn parses_both_id_conventions() {
        let one = parse_edge_list("1 2\n2 3\n# comment\n\n3 1\n1 2\n", None).unwrap();
        assert_eq!(one, triangle());
        let zero = parse_edge_list("0 1\n1 2\n2 0\n2 1\n", None).unwrap();
        assert_eq!(zero, triangle());
        let padded = parse_edge_list("0 1\n", Some(4)).unwrap();
        assert_eq!(padded.n(), 4);
        assert_eq!(padded.edge_count(), 1);
    }

    #[test]
    fn malformed_edge_lists() {
        assert!(matches!(parse_edge_list("1 x\n", None), Err(Error::Parse(_))));
        assert!(matches!(parse_edge_list("1\n", None), Err(Error::Parse(_))));
        assert!(matches!(parse_edge_list("1 2 3\n", None), Err(Error::Parse(_))));
        assert!(matches!(parse_edge_list("0 5\n", Some(3)), Err(Error::Parse(_))));
        assert!(matches!(parse_edge_list("2 2\n", None), Err(Error::InvalidData(_))));
    }
}

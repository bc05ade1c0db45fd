//! Network topologies and gossip mixing matrices.
//!
//! Graphs are undirected and connected. The mixing matrix follows the
//! max-degree rule A_ij = 1 / max(d_i + 1, d_j + 1) on edges, with the
//! diagonal absorbing the remainder, which makes A symmetric and doubly
//! stochastic with a strictly positive diagonal. `spectral_gap` is
//! delta = 1 - |lambda_2| with eigenvalues ordered by modulus, and
//! `beta_norm` is ‖I - A‖_2.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Topology family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Path,
    Ring,
    /// r x c grid with wraparound, r the largest divisor of n at most sqrt(n).
    Torus,
    /// Edges sampled independently, resampled until connected.
    ErdosRenyi,
    Complete,
    /// Loaded from an edge-list file.
    Custom,
}

/// An undirected connected graph on nodes 0..n.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub n: usize,
    pub kind: GraphKind,
    /// Edges (i, j) with i < j, sorted lexicographically.
    pub edges: Vec<(usize, usize)>,
    /// Sampling probability, present for Erdos-Renyi graphs.
    pub er_probability: Option<f64>,
}

/// Maximum resampling attempts before a disconnected family is rejected.
const ER_MAX_ATTEMPTS: usize = 1000;

/// Builds a graph of the given family. `p` is consumed only by
/// `ErdosRenyi`, `rng` only when sampling; generated graphs are always
/// connected.
pub fn build_graph<R: Rng + ?Sized>(
    kind: GraphKind,
    n: usize,
    p: Option<f64>,
    rng: &mut R,
) -> Result<Topology> {
    if n < 2 {
        return Err(Error::TooFewNodes {
            kind: kind_name(kind),
            min: 2,
            n,
        });
    }
    let (edges, er_probability) = match kind {
        GraphKind::Path => (path_edges(n), None),
        GraphKind::Ring => {
            if n < 3 {
                return Err(Error::TooFewNodes {
                    kind: "ring",
                    min: 3,
                    n,
                });
            }
            let mut e = path_edges(n);
            e.push((0, n - 1));
            (dedup_edges(e), None)
        }
        GraphKind::Torus => (torus_edges(n)?, None),
        GraphKind::Complete => {
            let mut e = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    e.push((i, j));
                }
            }
            (e, None)
        }
        GraphKind::ErdosRenyi => {
            let p = p.ok_or(Error::BadEdgeProbability(f64::NAN))?;
            (erdos_renyi_edges(n, p, rng)?, Some(p))
        }
        GraphKind::Custom => {
            return Err(Error::TooFewNodes {
                kind: "custom (load from file instead)",
                min: usize::MAX,
                n,
            })
        }
    };
    Ok(Topology {
        n,
        kind,
        edges,
        er_probability,
    })
}

fn kind_name(kind: GraphKind) -> &'static str {
    match kind {
        GraphKind::Path => "path",
        GraphKind::Ring => "ring",
        GraphKind::Torus => "torus",
        GraphKind::ErdosRenyi => "erdos-renyi",
        GraphKind::Complete => "complete",
        GraphKind::Custom => "custom",
    }
}

fn path_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n - 1).map(|i| (i, i + 1)).collect()
}

fn dedup_edges(edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let set: BTreeSet<(usize, usize)> = edges
        .into_iter()
        .map(|(i, j)| (i.min(j), i.max(j)))
        .collect();
    set.into_iter().collect()
}

/// Largest divisor of n that is at most floor(sqrt(n)), at least 2.
fn torus_rows(n: usize) -> Option<usize> {
    let mut r = (n as f64).sqrt().floor() as usize;
    while r * r > n {
        r -= 1;
    }
    while r >= 2 {
        if n.is_multiple_of(r) {
            return Some(r);
        }
        r -= 1;
    }
    None
}

fn torus_edges(n: usize) -> Result<Vec<(usize, usize)>> {
    let r = torus_rows(n).ok_or(Error::TorusShape(n))?;
    let c = n / r;
    let mut edges = BTreeSet::new();
    for a in 0..r {
        for b in 0..c {
            let id = a * c + b;
            let down = ((a + 1) % r) * c + b;
            let right = a * c + (b + 1) % c;
            if id != down {
                edges.insert((id.min(down), id.max(down)));
            }
            if id != right {
                edges.insert((id.min(right), id.max(right)));
            }
        }
    }
    Ok(edges.into_iter().collect())
}

fn erdos_renyi_edges<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::BadEdgeProbability(p));
    }
    for _ in 0..ER_MAX_ATTEMPTS {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if is_connected(n, &edges) {
            return Ok(edges);
        }
    }
    Err(Error::ConnectivityRetriesExhausted {
        attempts: ER_MAX_ATTEMPTS,
        p,
    })
}

/// Breadth-first reachability from node 0.
pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut queue = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push(w);
            }
        }
    }
    count == n
}

impl Topology {
    /// Node degrees.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Writes the edge list, one "i j" pair per line, 0-based.
    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = String::new();
        for &(i, j) in &self.edges {
            writeln!(text, "{i} {j}").expect("string write cannot fail");
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    /// Reads an edge list written by `dump`. Node count is one past the
    /// largest mentioned index; the kind is recorded as `Custom`.
    pub fn load(path: impl AsRef<Path>) -> Result<Topology> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut edges = Vec::new();
        let mut n = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        path: name.clone(),
                        line: lineno + 1,
                        msg: format!("expected two node indices, got {line:?}"),
                    })
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    path: name,
                    line: lineno + 1,
                    msg: format!("expected two node indices, got {line:?}"),
                });
            }
            if i == j {
                return Err(Error::Parse {
                    path: name,
                    line: lineno + 1,
                    msg: format!("self-loop {i} {j} is not allowed"),
                });
            }
            n = n.max(i + 1).max(j + 1);
            edges.push((i, j));
        }
        if n < 2 {
            return Err(Error::TooFewNodes {
                kind: "custom",
                min: 2,
                n,
            });
        }
        Ok(Topology {
            n,
            kind: GraphKind::Custom,
            edges: dedup_edges(edges),
            er_probability: None,
        })
    }
}

/// A mixing matrix with its cached spectral quantities.
#[derive(Clone, Debug)]
pub struct MixingMatrix {
    pub n: usize,
    pub entries: DMatrix<f64>,
    /// Off-diagonal (neighbor, weight) lists per node.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    /// Diagonal weights.
    pub diag: Vec<f64>,
    /// delta = 1 - |lambda_2|.
    pub spectral_gap: f64,
    /// beta = ‖I - A‖_2 = max_i |1 - lambda_i|.
    pub beta: f64,
}

/// Builds the max-degree mixing matrix of a connected topology.
pub fn mixing_matrix(topology: &Topology) -> Result<MixingMatrix> {
    let n = topology.n;
    let degrees = topology.degrees();
    let mut entries = DMatrix::zeros(n, n);
    let mut neighbors = vec![Vec::new(); n];
    for &(i, j) in &topology.edges {
        let w = 1.0 / (degrees[i].max(degrees[j]) + 1) as f64;
        entries[(i, j)] = w;
        entries[(j, i)] = w;
        neighbors[i].push((j, w));
        neighbors[j].push((i, w));
    }
    let mut diag = vec![0.0; n];
    for i in 0..n {
        neighbors[i].sort_unstable_by_key(|&(j, _)| j);
        let off: f64 = neighbors[i].iter().map(|&(_, w)| w).sum();
        diag[i] = 1.0 - off;
        entries[(i, i)] = diag[i];
    }
    let spectral_gap = spectral_gap(&entries)?;
    let beta = beta_norm(&entries);
    Ok(MixingMatrix {
        n,
        entries,
        neighbors,
        diag,
        spectral_gap,
        beta,
    })
}

/// Eigenvalues of a symmetric matrix, sorted by decreasing modulus.
fn eigenvalues_by_modulus(mat: &DMatrix<f64>) -> Vec<f64> {
    let eig = mat.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_unstable_by(|a, b| b.abs().partial_cmp(&a.abs()).expect("finite eigenvalues"));
    vals
}

/// delta = 1 - |lambda_2|. Errors when a second eigenvalue sits at unit
/// modulus (disconnected graph or bipartite-degenerate consensus matrix).
pub fn spectral_gap(mat: &DMatrix<f64>) -> Result<f64> {
    let vals = eigenvalues_by_modulus(mat);
    if vals.len() < 2 {
        return Ok(1.0);
    }
    let second = vals[1].abs();
    if second >= 1.0 - 1e-12 {
        return Err(Error::Disconnected);
    }
    Ok(1.0 - second)
}

/// beta = ‖I - A‖_2 for symmetric A.
pub fn beta_norm(mat: &DMatrix<f64>) -> f64 {
    eigenvalues_by_modulus(mat)
        .into_iter()
        .map(|l| (1.0 - l).abs())
        .fold(0.0, f64::max)
}

/// The lazy consensus matrix B = (1 - gamma) I + gamma A.
pub fn lazy_matrix(matrix: &MixingMatrix, gamma: f64) -> DMatrix<f64> {
    let n = matrix.n;
    DMatrix::identity(n, n) * (1.0 - gamma) + &matrix.entries * gamma
}

//! Affinity assembly from cached correlation surfaces.
//!
//! Every correlation the optimizers can ask for lives on a lag window
//! `[-lag, lag]^2`, so the full window is computed once per graph pair and
//! both the free-offset and the fixed-delay affinities reduce to lookups.

use std::sync::Arc;

use crate::correlation::{argmax_lag, fft_size_for, xcorr1_surface, CorrConfig, CorrSurface, Fft2, Offset2D};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, ViewGraph};
use crate::matrix::Matrix;

use super::AffinityMatrix;

struct Storage {
    n_ego: usize,
    n_top: usize,
    lag: i64,
    alpha: f64,
    diagonal_nodes: bool,
    /// `U^GIST_i` against `U^IOU_k`, at `i * n_top + k`.
    node2d: Vec<CorrSurface>,
    /// Count series of ego `i` against viewer `k` over `[-lag, lag]`; NaN is inadmissible.
    node1d: Vec<Vec<f64>>,
    /// `B_ij` against `B_kl` for `i < j` and ordered `k != l`.
    edges: Vec<CorrSurface>,
}

impl Storage {
    fn ego_pair(&self, i: usize, j: usize) -> usize {
        let n = self.n_ego;
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    fn top_pair(&self, k: usize, l: usize) -> usize {
        k * (self.n_top - 1) + if l < k { l } else { l - 1 }
    }

    fn node2d(&self, i: usize, k: usize) -> &CorrSurface {
        &self.node2d[i * self.n_top + k]
    }

    fn node1d(&self, i: usize, k: usize) -> &[f64] {
        &self.node1d[i * self.n_top + k]
    }

    /// Surface of `B_ij` against `B_kl` for `i < j`.
    fn edge(&self, i: usize, j: usize, k: usize, l: usize) -> &CorrSurface {
        &self.edges[self.ego_pair(i, j) * self.n_top * (self.n_top - 1) + self.top_pair(k, l)]
    }

    /// Correlation of `B_ij` against `B_kl` at `(di, dj)` for any `i != j`.
    fn edge_at(&self, i: usize, j: usize, k: usize, l: usize, di: i64, dj: i64) -> Option<f64> {
        if i < j {
            self.edge(i, j, k, l).get(Offset2D::new(di, dj))
        } else {
            self.edge(j, i, l, k).get(Offset2D::new(dj, di))
        }
    }

    fn edge_argmax(&self, i: usize, j: usize, k: usize, l: usize) -> Option<(f64, Offset2D)> {
        if i < j {
            self.edge(i, j, k, l).argmax()
        } else {
            self.edge(j, i, l, k).transposed().argmax()
        }
    }

    fn count_at(&self, i: usize, k: usize, d: i64) -> Option<f64> {
        if d.abs() > self.lag {
            return None;
        }
        let v = self.node1d(i, k)[(d + self.lag) as usize];
        (!v.is_nan()).then_some(v)
    }
}

/// Cached correlations between one egocentric graph and one top-view graph.
///
/// A bank may be a view onto a subset of the egocentric nodes of a larger
/// bank; views share storage.
#[derive(Clone)]
pub struct CorrelationBank {
    store: Arc<Storage>,
    /// Storage index of each egocentric node of this view.
    ego: Vec<usize>,
}

impl std::fmt::Debug for CorrelationBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorrelationBank")
            .field("n_ego", &self.ego.len())
            .field("n_top", &self.store.n_top)
            .field("lag", &self.store.lag)
            .finish()
    }
}

impl CorrelationBank {
    pub fn new(ego: &ViewGraph, top: &ViewGraph, fcfg: &FeatureConfig, ccfg: &CorrConfig) -> Result<Self> {
        fcfg.validate()?;
        ccfg.validate()?;
        let (ne, nt) = (ego.n_nodes(), top.n_nodes());
        if ne > nt {
            return Err(Error::TooManyEgo { n_ego: ne, n_top: nt });
        }
        let lengths: Vec<usize> = (0..ne).map(|i| ego.frames(i)).chain((0..nt).map(|k| top.frames(k))).collect();
        let shortest = *lengths.iter().min().expect("graphs are non-empty");
        if shortest < 2 {
            return Err(Error::InvalidInput("streams need at least two frames".into()));
        }
        let lag = ccfg.lag_for(shortest);
        let frac = ccfg.min_overlap_fraction;
        let fft = Fft2::new(fft_size_for(&lengths, lag));
        let lag = lag as i64;

        let top_nodes: Vec<_> = top.nodes.iter().map(|n| fft.spectrum(&n.similarity)).collect();
        let mut node2d = Vec::with_capacity(ne * nt);
        let mut node1d = Vec::with_capacity(ne * nt);
        for e in &ego.nodes {
            let se = fft.spectrum(&e.similarity);
            for (k, st) in top_nodes.iter().enumerate() {
                node2d.push(fft.surface(&se, st, lag, frac));
                node1d.push(xcorr1_surface(&e.counts, &top.nodes[k].counts, lag, frac));
            }
        }
        drop(top_nodes);

        let mut edges = Vec::new();
        if ne >= 2 {
            let mut top_edges = Vec::with_capacity(nt * (nt - 1));
            for k in 0..nt {
                for l in (0..nt).filter(|&l| l != k) {
                    let m = if k < l { fft.spectrum(top.edge_ref(k, l)) } else { fft.spectrum(&top.edge_ref(l, k).transpose()) };
                    top_edges.push(m);
                }
            }
            edges.reserve(ne * (ne - 1) / 2 * top_edges.len());
            for i in 0..ne {
                for j in i + 1..ne {
                    let s = fft.spectrum(ego.edge_ref(i, j));
                    for t in &top_edges {
                        edges.push(fft.surface(&s, t, lag, frac));
                    }
                }
            }
        }

        let store = Storage {
            n_ego: ne,
            n_top: nt,
            lag,
            alpha: fcfg.alpha,
            diagonal_nodes: ccfg.diagonal_only_for_nodes,
            node2d,
            node1d,
            edges,
        };
        Ok(Self { store: Arc::new(store), ego: (0..ne).collect() })
    }

    pub fn n_ego(&self) -> usize {
        self.ego.len()
    }

    pub fn n_top(&self) -> usize {
        self.store.n_top
    }

    /// Largest absolute lag held by the bank.
    pub fn lag(&self) -> i64 {
        self.store.lag
    }

    /// View restricted to the listed egocentric nodes, in the listed order.
    pub fn subset(&self, keep: &[usize]) -> Self {
        Self { store: Arc::clone(&self.store), ego: keep.iter().map(|&a| self.ego[a]).collect() }
    }

    fn blend(&self, two: Option<f64>, one: Option<f64>) -> f64 {
        let a = self.store.alpha;
        (a * two.unwrap_or(0.0) + (1.0 - a) * one.unwrap_or(0.0)).max(0.0)
    }

    fn node_free(&self, a: usize, k: usize) -> (Option<f64>, Option<f64>) {
        let s = &self.store;
        let i = self.ego[a];
        let surf = s.node2d(i, k);
        let two = if s.diagonal_nodes { surf.argmax_diagonal().map(|x| x.0) } else { surf.argmax().map(|x| x.0) };
        let one = argmax_lag(s.node1d(i, k), s.lag).map(|x| x.0);
        (two, one)
    }

    fn node_fixed(&self, a: usize, k: usize, d: i64) -> (Option<f64>, Option<f64>) {
        let s = &self.store;
        let i = self.ego[a];
        (s.node2d(i, k).get(Offset2D::new(d, d)), s.count_at(i, k, d))
    }

    /// Node score from the 2D term alone, maximized over offsets.
    pub fn node_similarity_free(&self, a: usize, k: usize) -> f64 {
        self.node_free(a, k).0.unwrap_or(0.0).max(0.0)
    }

    /// Node score from the count series alone, maximized over lags.
    pub fn node_counts_free(&self, a: usize, k: usize) -> f64 {
        self.node_free(a, k).1.unwrap_or(0.0).max(0.0)
    }

    /// Blended node score maximized over offsets.
    pub fn node_free_value(&self, a: usize, k: usize) -> f64 {
        let (two, one) = self.node_free(a, k);
        self.blend(two, one)
    }

    /// Affinity with every correlation maximized over its own offsets.
    pub fn affinity_free(&self) -> AffinityMatrix {
        let (ne, nt) = (self.n_ego(), self.n_top());
        let n = ne * nt;
        let mut m = Matrix::zeros(n, n);
        let mut diagnostics = Vec::new();
        for a in 0..ne {
            for k in 0..nt {
                let (two, one) = self.node_free(a, k);
                if two.is_none() || one.is_none() {
                    diagnostics.push(format!("node ({a},{k}): no admissible offset"));
                }
                m.set(a * nt + k, a * nt + k, self.blend(two, one));
            }
        }
        for a in 0..ne {
            for b in a + 1..ne {
                let (i, j) = (self.ego[a], self.ego[b]);
                for k in 0..nt {
                    for l in (0..nt).filter(|&l| l != k) {
                        let v = match self.store.edge_argmax(i, j, k, l) {
                            Some((v, _)) => v.max(0.0),
                            None => {
                                diagnostics.push(format!("edge ({a},{k})-({b},{l}): no admissible offset"));
                                0.0
                            }
                        };
                        m.set(a * nt + k, b * nt + l, v);
                        m.set(b * nt + l, a * nt + k, v);
                    }
                }
            }
        }
        AffinityMatrix { n_ego: ne, n_top: nt, data: m, diagnostics }
    }

    fn fixed_row_pair(&self, m: &mut Matrix, diagnostics: &mut Vec<String>, a: usize, b: usize, t: &[i64]) {
        let nt = self.n_top();
        let (i, j) = (self.ego[a], self.ego[b]);
        for k in 0..nt {
            for l in (0..nt).filter(|&l| l != k) {
                let v = match self.store.edge_at(i, j, k, l, t[a], t[b]) {
                    Some(v) => v.max(0.0),
                    None => {
                        diagnostics.push(format!(
                            "edge ({a},{k})-({b},{l}): offset ({}, {}) inadmissible",
                            t[a], t[b]
                        ));
                        0.0
                    }
                };
                m.set(a * nt + k, b * nt + l, v);
                m.set(b * nt + l, a * nt + k, v);
            }
        }
    }

    fn fixed_node(&self, m: &mut Matrix, diagnostics: &mut Vec<String>, a: usize, t: &[i64]) {
        let nt = self.n_top();
        for k in 0..nt {
            let (two, one) = self.node_fixed(a, k, t[a]);
            if two.is_none() || one.is_none() {
                diagnostics.push(format!("node ({a},{k}): offset {} inadmissible", t[a]));
            }
            m.set(a * nt + k, a * nt + k, self.blend(two, one));
        }
    }

    /// Affinity with every correlation taken at the offsets implied by `t`.
    pub fn affinity_fixed(&self, t: &[i64]) -> Result<AffinityMatrix> {
        let (ne, nt) = (self.n_ego(), self.n_top());
        if t.len() != ne {
            return Err(Error::DimensionMismatch { expected: ne, got: t.len() });
        }
        let mut m = Matrix::zeros(ne * nt, ne * nt);
        let mut diagnostics = Vec::new();
        for a in 0..ne {
            self.fixed_node(&mut m, &mut diagnostics, a, t);
            for b in a + 1..ne {
                self.fixed_row_pair(&mut m, &mut diagnostics, a, b, t);
            }
        }
        Ok(AffinityMatrix { n_ego: ne, n_top: nt, data: m, diagnostics })
    }

    /// Recomputes in place only the rows and columns of egocentric node `a`
    /// after its delay changed; `t` holds the new delays.
    pub fn update_fixed(&self, aff: &mut AffinityMatrix, t: &[i64], a: usize) -> Result<()> {
        let ne = self.n_ego();
        if t.len() != ne || aff.n_ego != ne || aff.n_top != self.n_top() {
            return Err(Error::DimensionMismatch { expected: ne, got: t.len() });
        }
        let (node, edge, tail) = (format!("node ({a},"), format!("edge ({a},"), format!(")-({a},"));
        aff.diagnostics.retain(|d| !(d.starts_with(&node) || d.starts_with(&edge) || d.contains(&tail)));
        let mut diagnostics = Vec::new();
        self.fixed_node(&mut aff.data, &mut diagnostics, a, t);
        for b in (0..ne).filter(|&b| b != a) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.fixed_row_pair(&mut aff.data, &mut diagnostics, lo, hi, t);
        }
        aff.diagnostics.extend(diagnostics);
        Ok(())
    }

    /// Delay of egocentric node `a` suggested by each node and edge
    /// correlation involving it, as argmax offsets.
    pub fn delay_suggestions(&self, a: usize) -> Vec<i64> {
        let s = &self.store;
        let nt = self.n_top();
        let i = self.ego[a];
        let mut out = Vec::new();
        for k in 0..nt {
            let surf = s.node2d(i, k);
            let d = if s.diagonal_nodes { surf.argmax_diagonal().map(|x| x.1) } else { surf.argmax().map(|x| x.1.di) };
            out.extend(d);
        }
        for b in (0..self.n_ego()).filter(|&b| b != a) {
            let j = self.ego[b];
            for k in 0..nt {
                for l in (0..nt).filter(|&l| l != k) {
                    out.extend(s.edge_argmax(i, j, k, l).map(|x| x.1.di));
                }
            }
        }
        out
    }

    /// Correlation of the edge pair at a fixed offset, before clamping.
    pub fn edge_correlation(&self, a: usize, b: usize, k: usize, l: usize, off: Offset2D) -> Option<f64> {
        self.store.edge_at(self.ego[a], self.ego[b], k, l, off.di, off.dj)
    }

    /// Node correlations at diagonal offset `d`, before blending: `(2D, 1D)`.
    pub fn node_correlation(&self, a: usize, k: usize, d: i64) -> (Option<f64>, Option<f64>) {
        self.node_fixed(a, k, d)
    }
}

/// Free-offset affinity of one graph pair.
pub fn build_affinity_free(
    ego: &ViewGraph,
    top: &ViewGraph,
    fcfg: &FeatureConfig,
    ccfg: &CorrConfig,
) -> Result<AffinityMatrix> {
    Ok(CorrelationBank::new(ego, top, fcfg, ccfg)?.affinity_free())
}

/// Fixed-delay affinity of one graph pair.
pub fn build_affinity_fixed(
    ego: &ViewGraph,
    top: &ViewGraph,
    t: &[i64],
    fcfg: &FeatureConfig,
    ccfg: &CorrConfig,
) -> Result<AffinityMatrix> {
    CorrelationBank::new(ego, top, fcfg, ccfg)?.affinity_fixed(t)
}

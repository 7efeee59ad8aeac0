//! Minimum-norm point of the convex hull of a finite vertex set and the
//! dual maximum-gap direction.
//!
//! The minimum-norm point is found with Wolfe's method. Each minor cycle
//! minimizes the norm over the affine hull of the current corral through a
//! modified Gram-Schmidt factorization of the edge vectors `v_i - v_0`.

use log::warn;

use crate::error::{Error, Result};

/// Relative pivot threshold of the affine least-squares factorization.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

/// Vertices with caller-chosen identifiers, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ActiveSet {
    dim: usize,
    ids: Vec<usize>,
    vertices: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl ActiveSet {
    pub fn new(dim: usize) -> Self {
        ActiveSet { dim, ..Default::default() }
    }

    pub fn from_vertices(vertices: Vec<Vec<f64>>) -> Self {
        let dim = vertices.first().map_or(0, Vec::len);
        let mut set = ActiveSet::new(dim);
        for (i, v) in vertices.into_iter().enumerate() {
            set.push(i, v);
        }
        set
    }

    /// Appends a vertex; returns `false` (and ignores it) when the id is
    /// already present.
    pub fn push(&mut self, id: usize, vertex: Vec<f64>) -> bool {
        assert_eq!(vertex.len(), self.dim, "vertex dimension mismatch");
        if self.contains(id) {
            return false;
        }
        self.norms.push(norm(&vertex));
        self.ids.push(id);
        self.vertices.push(vertex);
        true
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn vertex(&self, k: usize) -> &[f64] {
        &self.vertices[k]
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub x_star: Vec<f64>,
    pub s_star: f64,
    pub w_star: Vec<f64>,
    /// Convex weights, one per active vertex in insertion order.
    pub lambda: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimum-norm point of `conv(active)`, with the dual pair `(s*, w*)`.
pub fn min_norm_point(active: &ActiveSet, tol: f64) -> Result<SubproblemSolution> {
    min_norm_point_warm(active, tol, None)
}

/// As [`min_norm_point`], starting from the convex weights `warm` (one
/// per active vertex, missing entries read as zero).
pub fn min_norm_point_warm(active: &ActiveSet, tol: f64, warm: Option<&[f64]>) -> Result<SubproblemSolution> {
    min_norm_point_with(active, tol, warm, PIVOT_THRESHOLD)
}

/// Maximum-gap direction: the unit `w` maximizing `min_k ⟨w, v_k⟩`, with
/// `w = 0` and `s = 0` when the hull contains the origin.
pub fn max_gap(active: &ActiveSet, tol: f64) -> Result<SubproblemSolution> {
    min_norm_point(active, tol)
}

pub fn min_norm_point_with(
    active: &ActiveSet,
    tol: f64,
    warm: Option<&[f64]>,
    pivot: f64,
) -> Result<SubproblemSolution> {
    if active.is_empty() {
        return Err(Error::Degenerate("empty active set".into()));
    }
    let m = active.len();
    let scale = active.max_norm();
    let dim = active.dim();
    if scale == 0.0 {
        let mut lambda = vec![0.0; m];
        lambda[0] = 1.0;
        return Ok(finish(active, vec![0.0; dim], lambda, tol, scale));
    }

    // corral positions (into the active set) and their weights
    let (mut corral, mut lam): (Vec<usize>, Vec<f64>) = match warm {
        Some(w) if w.iter().any(|&x| x > 0.0) => {
            let total: f64 = w.iter().filter(|&&x| x > 0.0).sum();
            w.iter()
                .enumerate()
                .filter(|(k, &x)| x > 0.0 && *k < m)
                .map(|(k, &x)| (k, x / total))
                .unzip()
        }
        _ => {
            let start = (0..m)
                .min_by(|&a, &b| active.norms[a].total_cmp(&active.norms[b]).then(active.ids[a].cmp(&active.ids[b])))
                .expect("nonempty");
            (vec![start], vec![1.0])
        }
    };
    let mut x = combine(active, &corral, &lam);

    let cap = 50 * (m + dim) + 100;
    let mut converged = false;
    minor_cycles(active, &mut corral, &mut lam, &mut x, pivot)?;
    for _ in 0..cap {
        let xn = norm(&x);
        if xn <= tol * scale {
            converged = true;
            break;
        }
        let (j, best) = (0..m)
            .map(|k| (k, dot(&x, active.vertex(k))))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(active.ids[a.0].cmp(&active.ids[b.0])))
            .expect("nonempty");
        if best >= xn * xn - tol * scale * xn || corral.contains(&j) {
            converged = true;
            break;
        }
        let saved = (corral.clone(), lam.clone(), x.clone());
        corral.push(j);
        lam.push(0.0);
        if let Err(e) = minor_cycles(active, &mut corral, &mut lam, &mut x, pivot) {
            // the entering vertex is numerically in the corral's affine hull
            log::debug!("stopping minimum-norm search: {e}");
            (corral, lam, x) = saved;
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("minimum-norm iteration cap reached with {} active vertices", m);
    }
    let mut lambda = vec![0.0; m];
    for (&k, &l) in corral.iter().zip(&lam) {
        lambda[k] = l;
    }
    Ok(finish(active, x, lambda, tol, scale))
}

fn finish(active: &ActiveSet, x: Vec<f64>, lambda: Vec<f64>, tol: f64, scale: f64) -> SubproblemSolution {
    let xn = norm(&x);
    if xn <= tol * scale || scale == 0.0 {
        let dim = x.len();
        return SubproblemSolution { x_star: x, s_star: 0.0, w_star: vec![0.0; dim], lambda };
    }
    let w: Vec<f64> = x.iter().map(|c| c / xn).collect();
    let s = (0..active.len()).map(|k| dot(&w, active.vertex(k))).fold(f64::INFINITY, f64::min);
    if s <= 0.0 {
        let dim = x.len();
        return SubproblemSolution { x_star: x, s_star: 0.0, w_star: vec![0.0; dim], lambda };
    }
    SubproblemSolution { x_star: x, s_star: s, w_star: w, lambda }
}

fn combine(active: &ActiveSet, corral: &[usize], lam: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; active.dim()];
    for (&k, &l) in corral.iter().zip(lam) {
        for (xi, vi) in x.iter_mut().zip(active.vertex(k)) {
            *xi += l * vi;
        }
    }
    x
}

/// Moves `lam` towards the affine minimizer of the corral, dropping
/// vertices until the minimizer lies inside the corral's hull.
fn minor_cycles(active: &ActiveSet, corral: &mut Vec<usize>, lam: &mut Vec<f64>, x: &mut Vec<f64>, pivot: f64) -> Result<()> {
    loop {
        let (y, alpha) = affine_minimizer(active, corral, pivot)?;
        if alpha.iter().all(|&a| a > 0.0) {
            *lam = alpha;
            *x = y;
            return Ok(());
        }
        // largest step from lam towards alpha staying in the simplex
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for i in 0..corral.len() {
            if alpha[i] <= 0.0 {
                let denom = lam[i] - alpha[i];
                let t = if denom > 0.0 { lam[i] / denom } else { 0.0 };
                let better = leave == usize::MAX
                    || t < theta
                    || (t == theta && active.ids[corral[i]] < active.ids[corral[leave]]);
                if better {
                    theta = t;
                    leave = i;
                }
            }
        }
        for i in 0..corral.len() {
            lam[i] = (1.0 - theta) * lam[i] + theta * alpha[i];
        }
        corral.remove(leave);
        lam.remove(leave);
        // clear numerical leftovers
        let mut i = 0;
        while i < corral.len() {
            if lam[i] <= 0.0 && corral.len() > 1 {
                corral.remove(i);
                lam.remove(i);
            } else {
                i += 1;
            }
        }
        let total: f64 = lam.iter().sum();
        for l in lam.iter_mut() {
            *l /= total;
        }
        *x = combine(active, corral, lam);
    }
}

/// Minimum-norm point of the affine hull of the corral and its affine
/// coordinates.
fn affine_minimizer(active: &ActiveSet, corral: &[usize], pivot: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let v0 = active.vertex(corral[0]);
    let n = corral.len();
    if n == 1 {
        return Ok((v0.to_vec(), vec![1.0]));
    }
    let scale = corral.iter().map(|&k| active.norms[k]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // Q columns orthonormal, R upper triangular: [v_i - v_0] = Q R
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    let mut r = vec![vec![0.0; n - 1]; n - 1];
    for i in 1..n {
        let mut d: Vec<f64> = active.vertex(corral[i]).iter().zip(v0).map(|(a, b)| a - b).collect();
        for _ in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let c = dot(qj, &d);
                r[j][i - 1] += c;
                for (di, qi) in d.iter_mut().zip(qj) {
                    *di -= c * qi;
                }
            }
        }
        let dn = norm(&d);
        if dn <= pivot * scale {
            return Err(Error::Degenerate(format!("affine hull of {n} vertices is rank deficient")));
        }
        r[i - 1][i - 1] = dn;
        q.push(d.iter().map(|x| x / dn).collect());
    }
    // minimize |v0 + Q R β|: R β = -Qᵀ v0
    let c: Vec<f64> = q.iter().map(|qj| -dot(qj, v0)).collect();
    let mut beta = vec![0.0; n - 1];
    for i in (0..n - 1).rev() {
        let mut s = c[i];
        for j in i + 1..n - 1 {
            s -= r[i][j] * beta[j];
        }
        beta[i] = s / r[i][i];
    }
    let mut y = v0.to_vec();
    for (qj, cj) in q.iter().zip(&c) {
        for (yi, qi) in y.iter_mut().zip(qj) {
            *yi += cj * qi;
        }
    }
    let mut alpha = Vec::with_capacity(n);
    alpha.push(1.0 - beta.iter().sum::<f64>());
    alpha.extend(beta);
    Ok((y, alpha))
}

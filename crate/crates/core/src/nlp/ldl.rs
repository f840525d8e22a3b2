//! Sparse `L D Lᵀ` factorization of symmetric quasi-definite matrices.
//!
//! Up-looking factorization on an elimination tree, without pivoting, after
//! an AMD fill-reducing permutation. Pivot signs give the inertia directly.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdlError {
    #[error("entry ({0}, {1}) outside a {2}x{2} matrix")]
    OutOfRange(usize, usize, usize),
    #[error("ordering failed")]
    Ordering,
    #[error("zero pivot at column {0}")]
    ZeroPivot(usize),
    #[error("non-finite pivot at column {0}")]
    NonFinite(usize),
    #[error("value array has length {0}, expected {1}")]
    Length(usize, usize),
}

/// Pivot sign counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    /// Pivots below the relative threshold, counted in neither of the above.
    pub zero: usize,
}

const NONE: usize = usize::MAX;

/// Symbolic analysis; reusable across factorizations with the same pattern.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    /// perm[k] = original index of the k-th pivot.
    perm: Vec<usize>,
    /// Upper-triangular CSC of the permuted matrix (diagonal included).
    ap: Vec<usize>,
    ai: Vec<usize>,
    /// Triplet index -> position in `ax`.
    map: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
}

impl LdlSymbolic {
    /// Analyses the pattern given as `(row, col)` triplets, either triangle,
    /// duplicates summed. `late` marks indices that should not be pivoted on
    /// before at least one of their neighbours.
    pub fn new(n: usize, entries: &[(usize, usize)], late: Option<&[bool]>) -> Result<Self, LdlError> {
        for &(i, j) in entries {
            if i >= n || j >= n {
                return Err(LdlError::OutOfRange(i, j, n));
            }
        }
        // adjacency without the diagonal
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in entries {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let perm = if n == 0 {
            Vec::new()
        } else {
            let mut cp = Vec::with_capacity(n + 1);
            let mut ci = Vec::new();
            cp.push(0i64);
            for (j, a) in adj.iter().enumerate() {
                let mut col: Vec<usize> = a.clone();
                col.push(j);
                col.sort_unstable();
                ci.extend(col.iter().map(|v| *v as i64));
                cp.push(ci.len() as i64);
            }
            let (p, _, _) =
                amd::order::<i64>(n as i64, &cp, &ci, &amd::Control::default()).map_err(|_| LdlError::Ordering)?;
            let p: Vec<usize> = p.into_iter().map(|v| v as usize).collect();
            match late {
                Some(flags) => postpone(&p, &adj, flags),
                None => p,
            }
        };
        let mut iperm = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            iperm[i] = k;
        }

        // permuted upper triangle, diagonal always present
        let mut cols: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let total = entries.len();
        for (t, &(i, j)) in entries.iter().enumerate() {
            let (pi, pj) = (iperm[i], iperm[j]);
            let (r, c) = if pi <= pj { (pi, pj) } else { (pj, pi) };
            cols[c].push((r, t));
        }
        for (c, col) in cols.iter_mut().enumerate() {
            col.push((c, total + c));
            col.sort_unstable();
        }
        let mut ap = Vec::with_capacity(n + 1);
        let mut ai = Vec::new();
        let mut map = vec![0; total + n];
        ap.push(0);
        for col in &cols {
            let mut last = NONE;
            for &(r, t) in col {
                if r != last {
                    ai.push(r);
                    last = r;
                }
                map[t] = ai.len() - 1;
            }
            ap.push(ai.len());
        }

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in ap[j]..ap[j + 1] {
                let mut i = ai[p];
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        map.truncate(total);
        Ok(Self { n, perm, ap, ai, map, etree, lp })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }
}

/// Moves each flagged index behind the first of its neighbours.
fn postpone(order: &[usize], adj: &[Vec<usize>], late: &[bool]) -> Vec<usize> {
    let n = order.len();
    let mut placed = vec![false; n];
    let mut waiting: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out = Vec::with_capacity(n);
    fn place(
        v: usize,
        out: &mut Vec<usize>,
        placed: &mut [bool],
        waiting: &mut [Vec<usize>],
    ) {
        let mut stack = vec![v];
        while let Some(v) = stack.pop() {
            if placed[v] {
                continue;
            }
            placed[v] = true;
            out.push(v);
            let w = std::mem::take(&mut waiting[v]);
            for d in w.into_iter().rev() {
                if !placed[d] {
                    stack.push(d);
                }
            }
        }
    }
    for &v in order {
        if placed[v] {
            continue;
        }
        if late[v] {
            let nb: Vec<usize> = adj[v].iter().copied().filter(|u| !late[*u]).collect();
            if !nb.is_empty() && !nb.iter().any(|u| placed[*u]) {
                for u in nb {
                    waiting[u].push(v);
                }
                continue;
            }
        }
        place(v, &mut out, &mut placed, &mut waiting);
    }
    // anything still waiting (neighbours never placed) goes last
    for &v in order {
        if !placed[v] {
            place(v, &mut out, &mut placed, &mut waiting);
        }
    }
    out
}

/// Numeric factor.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    sym: LdlSymbolic,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    ax: Vec<f64>,
    // workspace
    y_vals: Vec<f64>,
    y_idx: Vec<usize>,
    marker: Vec<bool>,
    elim: Vec<usize>,
    next: Vec<usize>,
}

impl LdlFactor {
    pub fn new(sym: LdlSymbolic) -> Self {
        let n = sym.n;
        let nnz = sym.lp[n];
        let nax = sym.ai.len();
        Self {
            sym,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            ax: vec![0.0; nax],
            y_vals: vec![0.0; n],
            y_idx: vec![0; n],
            marker: vec![false; n],
            elim: vec![0; n],
            next: vec![0; n],
        }
    }

    pub fn symbolic(&self) -> &LdlSymbolic {
        &self.sym
    }

    /// Factors the matrix whose triplet values are `values` (same order as the
    /// pattern passed to [`LdlSymbolic::new`]) plus `diag` on the diagonal.
    /// Pivots with magnitude below `pivot_tol` are counted as zero and, when
    /// `zero_pivot_fill` is set, replaced by that value with the given sign.
    pub fn factor(
        &mut self,
        values: &[f64],
        diag: &[f64],
        pivot_tol: f64,
    ) -> Result<Inertia, LdlError> {
        let s = &self.sym;
        let n = s.n;
        if values.len() != s.map.len() {
            return Err(LdlError::Length(values.len(), s.map.len()));
        }
        if diag.len() != n {
            return Err(LdlError::Length(diag.len(), n));
        }
        self.ax.fill(0.0);
        for (t, v) in values.iter().enumerate() {
            self.ax[s.map[t]] += v;
        }
        for k in 0..n {
            // diagonal is the last entry of each upper column
            let p = s.ap[k + 1] - 1;
            self.ax[p] += diag[s.perm[k]];
        }
        self.next[..n].copy_from_slice(&s.lp[..n]);
        let mut inertia = Inertia::default();
        for k in 0..n {
            let mut nnz_y = 0;
            let mut dk = 0.0;
            for p in s.ap[k]..s.ap[k + 1] {
                let b = s.ai[p];
                if b == k {
                    dk = self.ax[p];
                    continue;
                }
                self.y_vals[b] = self.ax[p];
                if !self.marker[b] {
                    self.marker[b] = true;
                    self.elim[0] = b;
                    let mut ne = 1;
                    let mut nx = s.etree[b];
                    while nx != NONE && nx < k {
                        if self.marker[nx] {
                            break;
                        }
                        self.marker[nx] = true;
                        self.elim[ne] = nx;
                        ne += 1;
                        nx = s.etree[nx];
                    }
                    while ne > 0 {
                        ne -= 1;
                        self.y_idx[nnz_y] = self.elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = self.y_idx[i];
                let tmp = self.next[c];
                let yc = self.y_vals[c];
                for j in s.lp[c]..tmp {
                    self.y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                let l = yc / self.d[c];
                self.lx[tmp] = l;
                dk -= yc * l;
                self.next[c] += 1;
                self.y_vals[c] = 0.0;
                self.marker[c] = false;
            }
            if !dk.is_finite() {
                return Err(LdlError::NonFinite(s.perm[k]));
            }
            if dk.abs() <= pivot_tol {
                inertia.zero += 1;
                if dk == 0.0 {
                    return Err(LdlError::ZeroPivot(s.perm[k]));
                }
            } else if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            self.d[k] = dk;
        }
        Ok(inertia)
    }

    /// Solves in place using the last factorization.
    pub fn solve(&self, b: &mut [f64]) {
        let s = &self.sym;
        let n = s.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[s.perm[k]]).collect();
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for j in s.lp[i]..s.lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in s.lp[i]..s.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for k in 0..n {
            b[s.perm[k]] = x[k];
        }
    }
}

/// Symmetric matrix-vector product from triplets (each unordered pair once
/// per triplet; off-diagonal triplets act on both triangles).
pub fn sym_matvec(n: usize, entries: &[(usize, usize)], values: &[f64], diag: &[f64], x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), n);
    for i in 0..n {
        out[i] = diag[i] * x[i];
    }
    for (&(i, j), v) in entries.iter().zip(values) {
        out[i] += v * x[j];
        if i != j {
            out[j] += v * x[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kkt(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> (Vec<(usize, usize)>, Vec<f64>, Vec<f64>) {
        let mut entries = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; n + m];
        for i in 0..n {
            diag[i] = 1.0 + rng.gen::<f64>() * 3.0;
            for j in 0..i {
                if rng.gen::<f64>() < density {
                    entries.push((i, j));
                    vals.push(rng.gen::<f64>() * 0.2 - 0.1);
                }
            }
        }
        for r in 0..m {
            diag[n + r] = -1e-4;
            // guarantee full row rank with a private column
            entries.push((n + r, r % n));
            vals.push(1.0 + rng.gen::<f64>());
            for j in 0..n {
                if rng.gen::<f64>() < density {
                    entries.push((n + r, j));
                    vals.push(rng.gen::<f64>() - 0.5);
                }
            }
        }
        (entries, vals, diag)
    }

    fn dense(n: usize, entries: &[(usize, usize)], vals: &[f64], diag: &[f64]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] += diag[i];
        }
        for (&(i, j), v) in entries.iter().zip(vals) {
            a[(i, j)] += v;
            if i != j {
                a[(j, i)] += v;
            }
        }
        a
    }

    #[test]
    fn solves_random_quasi_definite_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, m) in [(1, 0), (5, 2), (30, 12), (60, 40)] {
            let (entries, vals, diag) = random_kkt(&mut rng, n, m, 0.1);
            let late: Vec<bool> = (0..n + m).map(|i| i >= n).collect();
            let sym = LdlSymbolic::new(n + m, &entries, Some(&late)).unwrap();
            let mut f = LdlFactor::new(sym);
            let inertia = f.factor(&vals, &diag, 0.0).unwrap();
            assert_eq!(inertia, Inertia { positive: n, negative: m, zero: 0 });
            let a = dense(n + m, &entries, &vals, &diag);
            let b: Vec<f64> = (0..n + m).map(|_| rng.gen::<f64>()).collect();
            let mut x = b.clone();
            f.solve(&mut x);
            let r = &a * DVector::from_vec(x) - DVector::from_vec(b);
            assert!(r.amax() < 1e-9, "residual {}", r.amax());
        }
    }

    #[test]
    fn duplicates_are_summed_and_either_triangle_accepted() {
        let entries = [(0, 1), (1, 0), (1, 1), (0, 0)];
        let vals = [0.5, 0.5, 2.0, 3.0];
        let sym = LdlSymbolic::new(2, &entries, None).unwrap();
        let mut f = LdlFactor::new(sym);
        f.factor(&vals, &[0.0, 0.0], 0.0).unwrap();
        // [[3, 1], [1, 2]] x = [1, 0]
        let mut x = vec![1.0, 0.0];
        f.solve(&mut x);
        assert!((x[0] - 0.4).abs() < 1e-15 && (x[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn indefinite_inertia_is_counted() {
        let entries = [(0, 0), (1, 1), (2, 2)];
        let sym = LdlSymbolic::new(3, &entries, None).unwrap();
        let mut f = LdlFactor::new(sym);
        let i = f.factor(&[1.0, -2.0, 1e-14], &[0.0; 3], 1e-12).unwrap();
        assert_eq!(i, Inertia { positive: 1, negative: 1, zero: 1 });
        assert!(matches!(f.factor(&[1.0, 0.0, 1.0], &[0.0; 3], 0.0), Err(LdlError::ZeroPivot(1))));
    }

    #[test]
    fn postponement_keeps_every_index_once() {
        let adj = vec![vec![2], vec![2], vec![0, 1]];
        let out = postpone(&[2, 0, 1], &adj, &[false, false, true]);
        assert_eq!(out, vec![0, 2, 1]);
    }
}

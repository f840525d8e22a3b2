//! Finite-difference derivatives and sparsity probing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalResult, NlpProblem};

/// Central-difference step for a variable of magnitude `x`.
pub(crate) fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Greedy distance-2 coloring: columns sharing a row get different colors.
pub fn color_columns(n: usize, structure: &[(usize, usize)]) -> Vec<usize> {
    let nrows = structure.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut cols_of: Vec<Vec<usize>> = vec![Vec::new(); nrows];
    for &(r, c) in structure {
        rows_of[c].push(r);
        cols_of[r].push(c);
    }
    let mut color = vec![usize::MAX; n];
    let mut mark: Vec<usize> = Vec::new();
    for j in 0..n {
        mark.clear();
        for &r in &rows_of[j] {
            for &k in &cols_of[r] {
                if color[k] != usize::MAX {
                    mark.push(color[k]);
                }
            }
        }
        mark.sort_unstable();
        mark.dedup();
        let mut c = 0;
        for &used in &mark {
            if used == c {
                c += 1;
            } else if used > c {
                break;
            }
        }
        color[j] = c;
    }
    color
}

fn groups(colors: &[usize], active: Option<&[bool]>) -> Vec<Vec<usize>> {
    let nc = colors.iter().map(|c| c + 1).max().unwrap_or(0);
    let mut g = vec![Vec::new(); nc];
    for (j, &c) in colors.iter().enumerate() {
        if active.is_none_or(|a| a[j]) {
            g[c].push(j);
        }
    }
    g.retain(|v| !v.is_empty());
    g
}

/// Central-difference gradient. Entries with `active[j] == false` are zero.
pub fn fd_gradient<P: NlpProblem + ?Sized>(nlp: &P, z: &[f64], active: Option<&[bool]>) -> EvalResult<Vec<f64>> {
    let n = z.len();
    let mut g = vec![0.0; n];
    let mut w = z.to_vec();
    for j in 0..n {
        if active.is_some_and(|a| !a[j]) {
            continue;
        }
        let h = fd_step(z[j]);
        w[j] = z[j] + h;
        let fp = nlp.objective(&w)?;
        w[j] = z[j] - h;
        let fm = nlp.objective(&w)?;
        w[j] = z[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Central-difference Jacobian values on `structure`, one pair of
/// evaluations per color.
pub fn fd_jacobian<P: NlpProblem + ?Sized>(
    nlp: &P,
    z: &[f64],
    structure: &[(usize, usize)],
    colors: &[usize],
    active: Option<&[bool]>,
) -> EvalResult<Vec<f64>> {
    let m = nlp.num_constraints();
    let n = z.len();
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(_, c)) in structure.iter().enumerate() {
        by_col[c].push(k);
    }
    let mut vals = vec![0.0; structure.len()];
    let mut w = z.to_vec();
    let (mut gp, mut gm) = (vec![0.0; m], vec![0.0; m]);
    for group in groups(colors, active) {
        for &j in &group {
            w[j] = z[j] + fd_step(z[j]);
        }
        nlp.constraints(&w, &mut gp)?;
        for &j in &group {
            w[j] = z[j] - fd_step(z[j]);
        }
        nlp.constraints(&w, &mut gm)?;
        for &j in &group {
            w[j] = z[j];
            let h2 = 2.0 * fd_step(z[j]);
            for &k in &by_col[j] {
                let r = structure[k].0;
                vals[k] = (gp[r] - gm[r]) / h2;
            }
        }
    }
    Ok(vals)
}

/// Symmetric central-difference Hessian from a gradient-like callback on a
/// lower-triangle pattern. Each entry averages its two one-sided estimates.
pub(crate) struct FdHessian {
    pattern: Vec<(usize, usize)>,
    groups: Vec<Vec<usize>>,
    color: Vec<usize>,
}

impl FdHessian {
    pub(crate) fn new(n: usize, pattern: &[(usize, usize)]) -> Self {
        let mut sym: Vec<(usize, usize)> = Vec::with_capacity(2 * pattern.len() + n);
        for &(i, j) in pattern {
            sym.push((i, j));
            sym.push((j, i));
        }
        for j in 0..n {
            sym.push((j, j));
        }
        let color = color_columns(n, &sym);
        let groups = groups(&color, None);
        Self { pattern: pattern.to_vec(), groups, color }
    }

    pub(crate) fn eval<F>(&self, z: &[f64], mut lag_grad: F, vals: &mut [f64]) -> EvalResult<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> EvalResult<()>,
    {
        let n = z.len();
        let mut w = z.to_vec();
        let (mut gp, mut gm) = (vec![0.0; n], vec![0.0; n]);
        // diff[color][row] = (∇L(z + h) − ∇L(z − h)) over that color
        let mut diff = vec![vec![0.0; n]; self.groups.len()];
        let mut pos = vec![usize::MAX; self.color.iter().map(|c| c + 1).max().unwrap_or(0)];
        for (k, g) in self.groups.iter().enumerate() {
            pos[self.color[g[0]]] = k;
            for &j in g {
                w[j] = z[j] + fd_step(z[j]);
            }
            lag_grad(&w, &mut gp)?;
            for &j in g {
                w[j] = z[j] - fd_step(z[j]);
            }
            lag_grad(&w, &mut gm)?;
            for &j in g {
                w[j] = z[j];
            }
            for i in 0..n {
                diff[k][i] = gp[i] - gm[i];
            }
        }
        for (v, &(i, j)) in vals.iter_mut().zip(&self.pattern) {
            let a = diff[pos[self.color[j]]][i] / (2.0 * fd_step(z[j]));
            let b = diff[pos[self.color[i]]][j] / (2.0 * fd_step(z[i]));
            *v = 0.5 * (a + b);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub trials: usize,
    /// Entries with a nonzero difference quotient outside the declared pattern.
    pub undeclared: Vec<(usize, usize)>,
    /// Largest `|analytic − fd| / (1 + |fd|)` over declared entries.
    pub max_jacobian_error: f64,
    /// Same measure for the objective gradient.
    pub max_gradient_error: f64,
}

/// Perturbs `center` randomly `trials` times, differencing every column
/// separately, and compares against the declared pattern and analytic
/// derivatives.
pub fn probe_sparsity<P: NlpProblem + ?Sized>(
    nlp: &P,
    center: &[f64],
    trials: usize,
    spread: f64,
    seed: u64,
) -> EvalResult<SparsityReport> {
    let n = nlp.num_variables();
    let m = nlp.num_constraints();
    let structure = nlp.jacobian_structure();
    let (lo, hi) = nlp.variable_bounds();
    let mut declared = std::collections::BTreeSet::new();
    for &e in &structure {
        declared.insert(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut undeclared = std::collections::BTreeSet::new();
    let mut jerr: f64 = 0.0;
    let mut gerr: f64 = 0.0;
    let mut dense = vec![0.0; m * n];
    let (mut gp, mut gm) = (vec![0.0; m], vec![0.0; m]);
    for _ in 0..trials {
        let z: Vec<f64> = (0..n)
            .map(|j| {
                let d = spread * center[j].abs().max(1.0) * (2.0 * rng.gen::<f64>() - 1.0);
                (center[j] + d).clamp(lo[j], hi[j])
            })
            .collect();
        let mut w = z.clone();
        for j in 0..n {
            let h = fd_step(z[j]);
            w[j] = z[j] + h;
            nlp.constraints(&w, &mut gp)?;
            w[j] = z[j] - h;
            nlp.constraints(&w, &mut gm)?;
            w[j] = z[j];
            for i in 0..m {
                dense[i * n + j] = (gp[i] - gm[i]) / (2.0 * h);
                if gp[i] != gm[i] && !declared.contains(&(i, j)) {
                    undeclared.insert((i, j));
                }
            }
        }
        let mut vals = vec![0.0; structure.len()];
        nlp.jacobian_values(&z, &mut vals)?;
        // duplicates in the pattern are summed
        let mut acc = std::collections::BTreeMap::new();
        for (&(i, j), v) in structure.iter().zip(&vals) {
            *acc.entry((i, j)).or_insert(0.0) += v;
        }
        for ((i, j), v) in acc {
            let fd = dense[i * n + j];
            jerr = jerr.max((v - fd).abs() / (1.0 + fd.abs()));
        }
        let mut g = vec![0.0; n];
        nlp.gradient(&z, &mut g)?;
        let gfd = fd_gradient(nlp, &z, None)?;
        for j in 0..n {
            gerr = gerr.max((g[j] - gfd[j]).abs() / (1.0 + gfd[j].abs()));
        }
    }
    Ok(SparsityReport {
        trials,
        undeclared: undeclared.into_iter().collect(),
        max_jacobian_error: jerr,
        max_gradient_error: gerr,
    })
}

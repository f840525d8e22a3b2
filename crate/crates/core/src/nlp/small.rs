//! Dense small problems differentiated with dual numbers.

use crate::dual::{Dual, Scalar};

use super::{EvalError, EvalResult, NlpProblem};

pub const AUTODIFF_MAX_VARIABLES: usize = 16;

type D = Dual<AUTODIFF_MAX_VARIABLES>;

/// A problem written once, generically over the scalar type.
pub trait SmallProblem: Sync {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.num_variables();
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.num_constraints();
        (vec![0.0; m], vec![0.0; m])
    }
    /// Returns the objective and writes the constraints into `g`.
    fn eval<T: Scalar>(&self, z: &[T], g: &mut [T]) -> T;
}

/// [`NlpProblem`] adapter computing exact first derivatives of a
/// [`SmallProblem`] with forward-mode dual numbers.
pub struct AutoDiff<P> {
    pub problem: P,
    structure: Vec<(usize, usize)>,
}

impl<P: SmallProblem> AutoDiff<P> {
    /// Detects the Jacobian pattern from dual evaluations at a few fixed
    /// generic points.
    pub fn new(problem: P) -> Result<Self, EvalError> {
        let n = problem.num_variables();
        if n > AUTODIFF_MAX_VARIABLES {
            return Err(EvalError::new(format!("{n} variables exceed the dual width {AUTODIFF_MAX_VARIABLES}")));
        }
        let m = problem.num_constraints();
        let mut seen = vec![false; m * n];
        for t in 0..3 {
            let z: Vec<f64> = (0..n).map(|j| 0.3 + 0.2137 * (j as f64 + 1.0) * (t as f64 + 1.0).sqrt()).collect();
            let (_, g) = Self::dual_eval(&problem, &z);
            for (i, gi) in g.iter().enumerate() {
                for j in 0..n {
                    if gi.d[j] != 0.0 {
                        seen[i * n + j] = true;
                    }
                }
            }
        }
        let structure = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| seen[i * n + j]).collect();
        Ok(Self { problem, structure })
    }

    fn dual_eval(p: &P, z: &[f64]) -> (D, Vec<D>) {
        let zd: Vec<D> = z.iter().enumerate().map(|(j, v)| D::var(*v, j)).collect();
        let mut g = vec![D::constant(0.0); p.num_constraints()];
        let f = p.eval(&zd, &mut g);
        (f, g)
    }
}

fn finite(v: f64, what: &str) -> EvalResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::new(format!("non-finite {what}")))
    }
}

impl<P: SmallProblem> NlpProblem for AutoDiff<P> {
    fn num_variables(&self) -> usize {
        self.problem.num_variables()
    }
    fn num_constraints(&self) -> usize {
        self.problem.num_constraints()
    }
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.problem.variable_bounds()
    }
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.problem.constraint_bounds()
    }
    fn objective(&self, z: &[f64]) -> EvalResult<f64> {
        let mut g = vec![0.0; self.problem.num_constraints()];
        finite(self.problem.eval(z, &mut g), "objective")
    }
    fn gradient(&self, z: &[f64], grad: &mut [f64]) -> EvalResult<()> {
        let (f, _) = Self::dual_eval(&self.problem, z);
        for (j, g) in grad.iter_mut().enumerate() {
            *g = finite(f.d[j], "gradient")?;
        }
        Ok(())
    }
    fn constraints(&self, z: &[f64], g: &mut [f64]) -> EvalResult<()> {
        self.problem.eval(z, g);
        for v in g.iter() {
            finite(*v, "constraint")?;
        }
        Ok(())
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.structure.clone()
    }
    fn jacobian_values(&self, z: &[f64], vals: &mut [f64]) -> EvalResult<()> {
        let (_, g) = Self::dual_eval(&self.problem, z);
        for (v, &(i, j)) in vals.iter_mut().zip(&self.structure) {
            *v = finite(g[i].d[j], "jacobian")?;
        }
        Ok(())
    }
}

//! Small analytic NLPs with known optima, shared by test targets.

use mmt::dual::Scalar;
use mmt::nlp::{probe_sparsity, residuals, solve, AutoDiff, SmallProblem, SolverOptions};

pub const INF: f64 = f64::INFINITY;

pub struct Case {
    pub name: &'static str,
    pub z0: Vec<f64>,
    pub z_star: Vec<f64>,
    pub f_star: f64,
}

// Without strict complementarity the iterates approach the solution like
// the square root of the final barrier parameter.
pub fn argmin_tol(name: &str) -> f64 {
    if name == "degenerate" { 1e-4 } else { 1e-6 }
}

macro_rules! small {
    ($name:ident, n = $n:expr, m = $m:expr, bounds = $vb:expr, cbounds = $cb:expr, |$z:ident, $g:ident| $body:block) => {
        pub struct $name {
            pub scale: f64,
        }
        impl SmallProblem for $name {
            fn num_variables(&self) -> usize {
                $n
            }
            fn num_constraints(&self) -> usize {
                $m
            }
            fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
                $vb
            }
            fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
                $cb
            }
            fn eval<T: Scalar>(&self, $z: &[T], $g: &mut [T]) -> T {
                let f: T = $body;
                f * self.scale
            }
        }
    };
}

pub fn free(n: usize) -> (Vec<f64>, Vec<f64>) {
    (vec![-INF; n], vec![INF; n])
}

small!(Quadratic, n = 2, m = 0, bounds = free(2), cbounds = (vec![], vec![]), |z, _g| {
    (z[0] - 1.0).powi(2) + (z[1] - 2.0).powi(2)
});

small!(Rosenbrock, n = 2, m = 0, bounds = free(2), cbounds = (vec![], vec![]), |z, _g| {
    (T::cst(1.0) - z[0]).powi(2) + (z[1] - z[0] * z[0]).powi(2) * 100.0
});

small!(Disk, n = 2, m = 1, bounds = free(2), cbounds = (vec![-INF], vec![1.0]), |z, g| {
    g[0] = z[0] * z[0] + z[1] * z[1];
    -z[0] - z[1]
});

// min ½‖z‖² s.t. a·z = b with a = (1, 2, 3), b = 7
small!(EqualityQp, n = 3, m = 1, bounds = free(3), cbounds = (vec![7.0], vec![7.0]), |z, g| {
    g[0] = z[0] + z[1] * 2.0 + z[2] * 3.0;
    (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]) * 0.5
});

small!(BoxBounded, n = 2, m = 0, bounds = (vec![0.0, 0.0], vec![2.0, 2.0]), cbounds = (vec![], vec![]), |z, _g| {
    (z[0] + 1.0).powi(2) + (z[1] - 3.0).powi(2)
});

small!(Hs071, n = 4, m = 2, bounds = (vec![1.0; 4], vec![5.0; 4]), cbounds = (vec![25.0, 40.0], vec![INF, 40.0]), |z, g| {
    g[0] = z[0] * z[1] * z[2] * z[3];
    g[1] = z[0] * z[0] + z[1] * z[1] + z[2] * z[2] + z[3] * z[3];
    z[0] * z[3] * (z[0] + z[1] + z[2]) + z[2]
});

// degenerate: every constraint active at the solution with zero multipliers
small!(Degenerate, n = 2, m = 1, bounds = (vec![0.0, -INF], vec![INF, INF]), cbounds = (vec![0.0], vec![INF]), |z, g| {
    g[0] = z[0] + z[1];
    z[0] * z[0] + z[1] * z[1]
});

small!(Hs035, n = 3, m = 1, bounds = (vec![0.0; 3], vec![INF; 3]), cbounds = (vec![-INF], vec![3.0]), |z, g| {
    g[0] = z[0] + z[1] + z[2] * 2.0;
    T::cst(9.0) - z[0] * 8.0 - z[1] * 6.0 - z[2] * 4.0 + z[0] * z[0] * 2.0 + z[1] * z[1] * 2.0 + z[2] * z[2]
        + z[0] * z[1] * 2.0
        + z[0] * z[2] * 2.0
});

small!(Fixed, n = 2, m = 0, bounds = (vec![1.0, -INF], vec![1.0, INF]), cbounds = (vec![], vec![]), |z, _g| {
    (z[0] - 2.0).powi(2) + (z[1] - z[0]).powi(2)
});

small!(Hs006, n = 2, m = 1, bounds = free(2), cbounds = (vec![0.0], vec![0.0]), |z, g| {
    g[0] = (z[1] - z[0] * z[0]) * 10.0;
    (T::cst(1.0) - z[0]).powi(2)
});

// indefinite Hessian, positive definite on the constraint tangent
small!(Saddle, n = 2, m = 1, bounds = free(2), cbounds = (vec![2.0], vec![2.0]), |z, g| {
    g[0] = z[0] + z[1];
    -(z[0] * z[1])
});

small!(Range, n = 1, m = 1, bounds = free(1), cbounds = (vec![1.0], vec![4.0]), |z, g| {
    g[0] = z[0] * z[0];
    (z[0] - 5.0).powi(2)
});

small!(Hs039, n = 4, m = 2, bounds = free(4), cbounds = (vec![0.0, 0.0], vec![0.0, 0.0]), |z, g| {
    g[0] = z[1] - z[0].powi(3) - z[2] * z[2];
    g[1] = z[0] * z[0] - z[1] - z[3] * z[3];
    -z[0]
});

pub type Maker = Box<dyn Fn(f64) -> Box<dyn Solvable>>;

/// Small analytic problems with known optima.
pub fn cases() -> Vec<(Maker, Case)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        (mk(|k| Quadratic { scale: k }), Case { name: "quadratic", z0: vec![0.0, 0.0], z_star: vec![1.0, 2.0], f_star: 0.0 }),
        (mk(|k| Rosenbrock { scale: k }), Case { name: "rosenbrock", z0: vec![-1.2, 1.0], z_star: vec![1.0, 1.0], f_star: 0.0 }),
        (mk(|k| Disk { scale: k }), Case { name: "disk", z0: vec![0.0, 0.0], z_star: vec![s, s], f_star: -2.0 * s }),
        (
            mk(|k| EqualityQp { scale: k }),
            Case { name: "equality-qp", z0: vec![0.0; 3], z_star: vec![0.5, 1.0, 1.5], f_star: 1.75 },
        ),
        (mk(|k| BoxBounded { scale: k }), Case { name: "box", z0: vec![1.0, 1.0], z_star: vec![0.0, 2.0], f_star: 2.0 }),
        (
            mk(|k| Hs071 { scale: k }),
            Case {
                name: "hs071",
                z0: vec![1.0, 5.0, 5.0, 1.0],
                z_star: vec![1.0, 4.742999637, 3.821149980, 1.379408293],
                f_star: 17.0140172891,
            },
        ),
        (mk(|k| Degenerate { scale: k }), Case { name: "degenerate", z0: vec![1.0, 1.0], z_star: vec![0.0, 0.0], f_star: 0.0 }),
        (
            mk(|k| Hs035 { scale: k }),
            Case { name: "hs035", z0: vec![0.5; 3], z_star: vec![4.0 / 3.0, 7.0 / 9.0, 4.0 / 9.0], f_star: 1.0 / 9.0 },
        ),
        (mk(|k| Fixed { scale: k }), Case { name: "fixed", z0: vec![1.0, 0.0], z_star: vec![1.0, 1.0], f_star: 1.0 }),
        (mk(|k| Hs006 { scale: k }), Case { name: "hs006", z0: vec![-1.2, 1.0], z_star: vec![1.0, 1.0], f_star: 0.0 }),
        (mk(|k| Saddle { scale: k }), Case { name: "saddle", z0: vec![0.0, 2.0], z_star: vec![1.0, 1.0], f_star: -1.0 }),
        (mk(|k| Range { scale: k }), Case { name: "range", z0: vec![1.5], z_star: vec![2.0], f_star: 9.0 }),
        (mk(|k| Hs039 { scale: k }), Case { name: "hs039", z0: vec![2.0; 4], z_star: vec![1.0, 1.0, 0.0, 0.0], f_star: -1.0 }),
    ]
}

pub trait Solvable {
    fn run(&self, z0: &[f64], opts: &SolverOptions) -> mmt::nlp::NlpSolution;
    fn recheck(&self, sol: &mmt::nlp::NlpSolution) -> (f64, f64);
    fn probe(&self, z: &[f64]) -> mmt::nlp::SparsityReport;
}

impl<P: SmallProblem> Solvable for AutoDiff<P> {
    fn run(&self, z0: &[f64], opts: &SolverOptions) -> mmt::nlp::NlpSolution {
        solve(self, z0, opts).unwrap()
    }
    fn recheck(&self, sol: &mmt::nlp::NlpSolution) -> (f64, f64) {
        residuals(self, &sol.z, &sol.multipliers, sol.objective_scale).unwrap()
    }
    fn probe(&self, z: &[f64]) -> mmt::nlp::SparsityReport {
        probe_sparsity(self, z, 10, 0.5, 3).unwrap()
    }
}

fn mk<P: SmallProblem + 'static>(f: impl Fn(f64) -> P + 'static) -> Box<dyn Fn(f64) -> Box<dyn Solvable>> {
    Box::new(move |k| Box::new(AutoDiff::new(f(k)).unwrap()))
}

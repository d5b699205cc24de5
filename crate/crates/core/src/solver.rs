//! Direct solution of saddle-point source problems and shift-invert block
//! Lanczos for the constrained generalized eigenproblem
//! `A u + B^T p = lambda M u`, `B u = 0`, `int p = 0`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{MassMatrix, SaddleSystem};
use crate::error::{Error, Result};
use crate::spaces::{DiscreteField, DofMap, SpaceKind};
use crate::sparse::{dot, norm, CsrMatrix, SparseLu};

/// Relative residual accepted for direct source solves.
pub const SOURCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SourceSolution {
    /// Velocity (CR/ECR) or pseudostress (RT) on all dofs.
    pub primary: DiscreteField,
    /// Pressure (CR/ECR) or piecewise constant velocity (RT).
    pub constraint: DiscreteField,
    pub multiplier: f64,
    /// `|K x - b| / |b|`.
    pub residual: f64,
}

fn residual_of(k: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    k.mul_vec(x).iter().zip(b).map(|(kx, bi)| bi - kx).collect()
}

pub fn solve_source(sys: &SaddleSystem) -> Result<SourceSolution> {
    let k = sys.matrix();
    let b = sys.rhs();
    let lu = SparseLu::factor(&k).map_err(|e| {
        Error::Factorization(format!(
            "{e}; {} primary, {} constraint dofs, mean constraint on {:?}",
            sys.n_primary(),
            sys.n_constraint(),
            sys.mean_on
        ))
    })?;
    let mut x = lu.solve(&b);
    let r = residual_of(&k, &x, &b);
    for (xi, di) in x.iter_mut().zip(lu.solve(&r)) {
        *xi += di;
    }
    let bn = norm(&b);
    let rn = norm(&residual_of(&k, &x, &b));
    let residual = if bn > 0.0 { rn / bn } else { rn };
    if !residual.is_finite() || residual > SOURCE_TOLERANCE {
        return Err(Error::InaccurateSolve {
            residual,
            tolerance: SOURCE_TOLERANCE,
        });
    }
    let (n1, n2) = (sys.n_primary(), sys.n_constraint());
    Ok(SourceSolution {
        primary: DiscreteField::new(sys.primary, sys.free.expand(&x[..n1]))?,
        constraint: DiscreteField::new(sys.constraint, x[n1..n1 + n2].to_vec())?,
        multiplier: x[n1 + n2],
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    pub shift: f64,
    pub tolerance: f64,
    /// Budget of block operator applications.
    pub max_iterations: usize,
    /// Defaults to `k + 3`.
    pub block_size: Option<usize>,
    /// Krylov blocks per restart cycle.
    pub krylov_steps: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            shift: 1.0,
            tolerance: 1e-10,
            max_iterations: 500,
            block_size: None,
            krylov_steps: 8,
            seed: 20,
        }
    }
}

/// Eigenpair on the free velocity dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEigenPair {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// `|A u + B^T p - lambda M u| / |lambda M u|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub velocity: DiscreteField,
    pub pressure: DiscreteField,
    pub residual: f64,
}

/// Shift-inverted operator `u -> (w, q)` with
/// `(A - s M) w + B^T q = M u`, `B w + c mu = 0`, `c^T q = 0`.
struct ShiftInvert<'a> {
    m: &'a CsrMatrix,
    lu: SparseLu,
    nu: usize,
    np: usize,
}

impl ShiftInvert<'_> {
    fn apply(&self, block: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let rhs: Vec<Vec<f64>> = block
            .iter()
            .map(|u| {
                let mut r = self.m.mul_vec(u);
                r.resize(self.nu + self.np + 1, 0.0);
                r
            })
            .collect();
        self.lu
            .solve_many(&rhs)
            .into_iter()
            .map(|x| {
                (
                    x[..self.nu].to_vec(),
                    x[self.nu..self.nu + self.np].to_vec(),
                )
            })
            .collect()
    }
}

/// M-orthonormalizes `cand` against `basis` (with `mbasis = M basis`) and
/// itself; near-dependent vectors are dropped.
fn orthonormalize(
    m: &CsrMatrix,
    basis: &[Vec<f64>],
    mbasis: &[Vec<f64>],
    cand: Vec<Vec<f64>>,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for mut v in cand {
        let n0 = dot(&v, &m.mul_vec(&v)).sqrt();
        if n0 == 0.0 || !n0.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for (b, mb) in basis
                .iter()
                .zip(mbasis)
                .chain(out.iter().map(|(b, mb)| (b, mb)))
            {
                let c = dot(&v, mb);
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
            }
        }
        let mv = m.mul_vec(&v);
        let n = dot(&v, &mv).sqrt();
        if n > 1e-10 * n0 {
            out.push((
                v.iter().map(|x| x / n).collect(),
                mv.iter().map(|x| x / n).collect(),
            ));
        }
    }
    out
}

fn combine(vs: &[Vec<f64>], coeffs: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let n = vs.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (v, c) in vs.iter().zip(coeffs) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
    }
    out
}

/// Dimension of the discretely divergence-free velocity space, assuming `B`
/// has full rank on zero-mean pressures.
pub fn divergence_free_dimension(nu: usize, np: usize) -> usize {
    nu.saturating_sub(np.saturating_sub(1))
}

/// `k` smallest eigenpairs of the constrained pencil, computed on raw
/// free-dof operators.
pub fn solve_eigs_raw(
    a: &CsrMatrix,
    b: &CsrMatrix,
    mean: &[f64],
    m: &CsrMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<Vec<RawEigenPair>> {
    let (nu, np) = (a.nrows(), b.nrows());
    if k == 0 {
        return Err(Error::InvalidArgument(
            "at least one eigenpair must be requested".into(),
        ));
    }
    let available = divergence_free_dimension(nu, np);
    if k > available {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available,
        });
    }
    if b.ncols() != nu || m.nrows() != nu || mean.len() != np {
        return Err(Error::DimensionMismatch(
            "eigenproblem blocks have inconsistent sizes".into(),
        ));
    }
    let shifted = a.add(1.0, m, -opts.shift)?;
    let bt = b.transpose();
    let c: Vec<_> = mean.iter().enumerate().map(|(i, &v)| (i, 0, v)).collect();
    let c = CsrMatrix::from_triplets(np, 1, &c);
    let ct = c.transpose();
    let kmat = crate::sparse::block(
        nu + np + 1,
        nu + np + 1,
        &[
            (0, 0, &shifted),
            (0, nu, &bt),
            (nu, 0, b),
            (nu, nu + np, &c),
            (nu + np, nu, &ct),
        ],
    );
    let op = ShiftInvert {
        m,
        lu: SparseLu::factor(&kmat)?,
        nu,
        np,
    };

    let p = opts.block_size.unwrap_or(k + 3).max(k).min(available);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = vec![vec![1.0; nu]];
    start.extend((1..p).map(|_| {
        (0..nu)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    }));
    let mut x: Vec<Vec<f64>> = op.apply(&start).into_iter().map(|(w, _)| w).collect();
    let mut iterations = 1;
    loop {
        let mut basis = Vec::new();
        let mut mbasis = Vec::new();
        let mut images = Vec::new();
        let mut pressures = Vec::new();
        let mut blockv = x;
        for _ in 0..opts.krylov_steps.max(1) {
            let ortho = orthonormalize(m, &basis, &mbasis, blockv);
            if ortho.is_empty() {
                break;
            }
            let vs: Vec<Vec<f64>> = ortho.iter().map(|(v, _)| v.clone()).collect();
            let out = op.apply(&vs);
            iterations += 1;
            for (v, mv) in ortho {
                basis.push(v);
                mbasis.push(mv);
            }
            blockv = out.iter().map(|(w, _)| w.clone()).collect();
            for (w, q) in out {
                images.push(w);
                pressures.push(q);
            }
        }
        let dim = basis.len();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                h[(i, j)] = dot(&mbasis[i], &images[j]);
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| {
            eig.eigenvalues[j]
                .abs()
                .total_cmp(&eig.eigenvalues[i].abs())
        });

        let mut pairs = Vec::with_capacity(p);
        for &idx in order.iter().take(p) {
            let theta = eig.eigenvalues[idx];
            let s = eig.eigenvectors.column(idx);
            let u = combine(&basis, s.iter().copied());
            let q = combine(&pressures, s.iter().copied());
            let pr: Vec<f64> = q.iter().map(|v| v / theta).collect();
            let au = a.mul_vec(&u);
            let mu = m.mul_vec(&u);
            let lambda = dot(&u, &au) / dot(&u, &mu);
            let btp = bt.mul_vec(&pr);
            let r: Vec<f64> = (0..nu).map(|i| au[i] + btp[i] - lambda * mu[i]).collect();
            let residual = norm(&r) / (lambda.abs() * norm(&mu));
            pairs.push(RawEigenPair {
                lambda,
                u,
                p: pr,
                residual,
            });
        }
        pairs.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
        let last_residuals: Vec<f64> = pairs.iter().take(k).map(|p| p.residual).collect();
        if pairs.len() >= k && last_residuals.iter().all(|r| *r <= opts.tolerance) {
            pairs.truncate(k);
            return pairs
                .into_iter()
                .map(|pair| normalize_raw(pair, m))
                .collect();
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                residuals: last_residuals,
            });
        }
        x = pairs.into_iter().map(|pair| pair.u).collect();
        if x.is_empty() {
            return Err(Error::NotConverged {
                iterations,
                residuals: last_residuals,
            });
        }
    }
}

/// Mass-norm one and the largest-magnitude coefficient positive.
pub fn normalize_raw(pair: RawEigenPair, m: &CsrMatrix) -> Result<RawEigenPair> {
    let n = dot(&pair.u, &m.mul_vec(&pair.u)).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    let (imax, _) = pair
        .u
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| {
            if v.abs() > bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        });
    let s = pair.u[imax].signum() / n;
    Ok(RawEigenPair {
        u: pair.u.iter().map(|v| v * s).collect(),
        p: pair.p.iter().map(|v| v * s).collect(),
        ..pair
    })
}

/// Normalizes a velocity-pressure eigenpair in the mass norm.
pub fn normalize(pair: EigenPair, mass: &MassMatrix) -> Result<EigenPair> {
    let raw = RawEigenPair {
        lambda: pair.lambda,
        u: mass.free.restrict(pair.velocity.coeffs()),
        p: pair.pressure.coeffs().to_vec(),
        residual: pair.residual,
    };
    let raw = normalize_raw(raw, &mass.matrix)?;
    Ok(EigenPair {
        velocity: DiscreteField::new(*pair.velocity.dofs(), mass.free.expand(&raw.u))?,
        pressure: DiscreteField::new(*pair.pressure.dofs(), raw.p)?,
        ..pair
    })
}

pub fn solve_eigs(sys: &SaddleSystem, mass: &MassMatrix, k: usize) -> Result<Vec<EigenPair>> {
    solve_eigs_with(sys, mass, k, &EigenOptions::default())
}

pub fn solve_eigs_with(
    sys: &SaddleSystem,
    mass: &MassMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    if sys.constraint.kind() != SpaceKind::P0 || sys.free != mass.free {
        return Err(Error::DimensionMismatch(
            "eigenproblem needs a velocity-pressure system and its mass matrix".into(),
        ));
    }
    let raw = solve_eigs_raw(&sys.a, &sys.b, &sys.mean, &mass.matrix, k, opts)?;
    raw.into_iter()
        .map(|r| {
            Ok(EigenPair {
                lambda: r.lambda,
                velocity: DiscreteField::new(sys.primary, sys.free.expand(&r.u))?,
                pressure: DiscreteField::new(DofMap::clone(&sys.constraint), r.p)?,
                residual: r.residual,
            })
        })
        .collect()
}

/// All finite eigenvalues, ascending, by dense reduction onto a basis of
/// `ker B`. Intended for small meshes.
pub fn dense_eigenvalues(a: &CsrMatrix, b: &CsrMatrix, m: &CsrMatrix) -> Result<Vec<f64>> {
    let bd = b.to_dense();
    let btb = bd.transpose() * &bd;
    let eig = SymmetricEigen::new(btb);
    let max = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let kernel: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] <= 1e-10 * max)
        .collect();
    if kernel.is_empty() {
        return Ok(Vec::new());
    }
    let z = DMatrix::from_fn(a.nrows(), kernel.len(), |i, j| {
        eig.eigenvectors[(i, kernel[j])]
    });
    let az = z.transpose() * a.to_dense() * &z;
    let mz = z.transpose() * m.to_dense() * &z;
    let chol = mz.cholesky().ok_or_else(|| {
        Error::Factorization("reduced mass matrix is not positive definite".into())
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    let c = &linv * az * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

//! Minimal sparse linear algebra: CSR storage, preconditioned conjugate
//! gradients (plain, and deflated against a known null space), and a
//! K-orthogonal Lanczos iteration for generalized symmetric eigenproblems.
//!
//! Everything here is deterministic: no randomized pivoting, no
//! parallelism-dependent reduction order.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Square sparse matrix in compressed-sparse-row form.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds an `n` by `n` CSR matrix from (row, col, value) triplets,
    /// summing duplicates. Column indices within a row come out sorted.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                col_idx.push(c);
                vals.push(sum);
            }
            row_ptr.push(col_idx.len());
        }
        Csr {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.vals[k];
                }
            }
        }
        d
    }

    /// Entry (r, c), zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.vals[k];
            }
        }
        0.0
    }
}

/// Preconditioner for CG.
pub enum Precond {
    Identity,
    /// Inverse of the matrix diagonal.
    Jacobi(Vec<f64>),
    /// Inverses of the `bs` by `bs` diagonal blocks, packed row-major.
    BlockJacobi { bs: usize, inv: Vec<f64> },
}

impl Precond {
    pub fn jacobi(a: &Csr) -> Precond {
        Precond::Jacobi(
            a.diag()
                .into_iter()
                .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    }

    /// Block-Jacobi with blocks of size `bs`; `a.n` must be a multiple of
    /// `bs`. Singular blocks fall back to their diagonal.
    pub fn block_jacobi(a: &Csr, bs: usize) -> Precond {
        assert!(bs >= 1 && a.n % bs == 0);
        let nb = a.n / bs;
        let mut inv = vec![0.0; nb * bs * bs];
        for b in 0..nb {
            let base = b * bs;
            let mut block = DMatrix::<f64>::zeros(bs, bs);
            for i in 0..bs {
                for j in 0..bs {
                    block[(i, j)] = a.get(base + i, base + j);
                }
            }
            let inv_block = block.clone().try_inverse().unwrap_or_else(|| {
                let mut d = DMatrix::<f64>::zeros(bs, bs);
                for i in 0..bs {
                    let v = block[(i, i)];
                    d[(i, i)] = if v.abs() > 0.0 { 1.0 / v } else { 1.0 };
                }
                d
            });
            for i in 0..bs {
                for j in 0..bs {
                    inv[b * bs * bs + i * bs + j] = inv_block[(i, j)];
                }
            }
        }
        Precond::BlockJacobi { bs, inv }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(d) => {
                for i in 0..r.len() {
                    z[i] = d[i] * r[i];
                }
            }
            Precond::BlockJacobi { bs, inv } => {
                let bs = *bs;
                for b in 0..r.len() / bs {
                    let base = b * bs;
                    for i in 0..bs {
                        let mut acc = 0.0;
                        for j in 0..bs {
                            acc += inv[b * bs * bs + i * bs + j] * r[base + j];
                        }
                        z[base + i] = acc;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iters: usize,
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for SPD systems. Converges when
/// ||b - A x|| <= `tol_rel` ||b||; a zero right-hand side returns zero.
pub fn pcg(
    a: &Csr,
    b: &[f64],
    x0: Option<&[f64]>,
    m: &Precond,
    tol_rel: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, CgStats)> {
    pcg_impl(a, b, x0, m, tol_rel, max_iters, &[])
}

/// CG on a singular-but-consistent SPD system, deflated against an
/// orthonormal null-space basis: the right-hand side, start vector, and every
/// residual are projected onto the orthogonal complement of the basis.
pub fn pcg_deflated(
    a: &Csr,
    b: &[f64],
    x0: Option<&[f64]>,
    m: &Precond,
    tol_rel: f64,
    max_iters: usize,
    null_basis: &[Vec<f64>],
) -> Result<(Vec<f64>, CgStats)> {
    pcg_impl(a, b, x0, m, tol_rel, max_iters, null_basis)
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(v, q);
        for i in 0..v.len() {
            v[i] -= c * q[i];
        }
    }
}

fn pcg_impl(
    a: &Csr,
    b: &[f64],
    x0: Option<&[f64]>,
    m: &Precond,
    tol_rel: f64,
    max_iters: usize,
    null_basis: &[Vec<f64>],
) -> Result<(Vec<f64>, CgStats)> {
    let n = a.n;
    let mut b = b.to_vec();
    project_out(&mut b, null_basis);
    let b_norm = dot(&b, &b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgStats {
                iters: 0,
                rel_residual: 0.0,
            },
        ));
    }
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    project_out(&mut x, null_basis);
    let mut r = vec![0.0; n];
    a.matvec_into(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    project_out(&mut r, null_basis);
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    project_out(&mut z, null_basis);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / b_norm;
    if res <= tol_rel {
        return Ok((
            x,
            CgStats {
                iters: 0,
                rel_residual: res,
            },
        ));
    }
    for iter in 1..=max_iters {
        a.matvec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NoConvergence {
                what: "conjugate gradients (matrix not positive definite on the search space)",
                iters: iter,
                residual: res,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        project_out(&mut r, null_basis);
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol_rel {
            return Ok((
                x,
                CgStats {
                    iters: iter,
                    rel_residual: res,
                },
            ));
        }
        m.apply(&r, &mut z);
        project_out(&mut z, null_basis);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        what: "conjugate gradients",
        iters: max_iters,
        residual: res,
    })
}

/// Reverse Cuthill–McKee ordering of an undirected graph given as adjacency
/// lists. Returns `order` with `order[k]` = the original vertex placed at
/// position `k`; relabeling a sparse matrix by this order tends to shrink its
/// bandwidth. Deterministic: each component starts from the unvisited vertex
/// minimizing (degree, index) and neighbors enqueue in (degree, index) order.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    loop {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (deg[i], i));
        let Some(start) = start else { break };
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (deg[v], v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Lower-triangular Cholesky factor of a banded SPD matrix, stored as a dense
/// band (`bw + 1` entries per row).
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

/// Result of a banded Cholesky factorization attempt.
pub enum FactorOutcome {
    Factored(BandedCholesky),
    /// A diagonal pivot fell below `pivot_rel_tol * reference`: the matrix is
    /// singular (or indefinite) within tolerance. `row` is the offending row
    /// of the input matrix.
    SingularPivot {
        row: usize,
        pivot: f64,
        reference: f64,
    },
}

/// Cholesky factorization of a symmetric matrix whose nonzeros all satisfy
/// |r - c| <= `bw` (asserted). `reference` for the pivot test is the largest
/// absolute diagonal entry.
pub fn banded_cholesky(a: &Csr, bw: usize, pivot_rel_tol: f64) -> FactorOutcome {
    let n = a.n;
    let w = bw + 1;
    let mut l = vec![0.0; n * w];
    for r in 0..n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.col_idx[k];
            assert!(
                r.abs_diff(c) <= bw,
                "entry ({r}, {c}) outside the declared bandwidth {bw}"
            );
            if c <= r {
                l[r * w + (c + bw - r)] = a.vals[k];
            }
        }
    }
    let reference = a
        .diag()
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
        .max(f64::MIN_POSITIVE);
    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let mut d = l[j * w + bw];
        for k in lo..j {
            let v = l[j * w + (k + bw - j)];
            d -= v * v;
        }
        if !(d > pivot_rel_tol * reference) {
            return FactorOutcome::SingularPivot {
                row: j,
                pivot: d,
                reference,
            };
        }
        let dj = d.sqrt();
        l[j * w + bw] = dj;
        for i in j + 1..(j + bw + 1).min(n) {
            let mut s = l[i * w + (j + bw - i)];
            let klo = lo.max(i.saturating_sub(bw));
            for k in klo..j {
                s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
            }
            l[i * w + (j + bw - i)] = s / dj;
        }
    }
    FactorOutcome::Factored(BandedCholesky { n, bw, l })
}

impl BandedCholesky {
    /// Solves `A x = b` by forward and back substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut acc = y[i];
            for k in lo..i {
                acc -= self.l[i * w + (k + bw - i)] * y[k];
            }
            y[i] = acc / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut acc = y[i];
            for k in i + 1..hi {
                acc -= self.l[k * w + (i + bw - k)] * y[k];
            }
            y[i] = acc / self.l[i * w + bw];
        }
        y
    }
}

/// Lanczos iteration for the generalized symmetric problem `A x = theta K x`
/// where the caller supplies `apply(q) = K^{-1} A q` and the K-inner product.
/// The operator is self-adjoint in that inner product, so a tridiagonal
/// Rayleigh-Ritz approximation applies. Returns the Ritz values sorted
/// ascending. Full reorthogonalization keeps the basis K-orthonormal.
pub fn lanczos_generalized(
    n: usize,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    k_inner: impl Fn(&[f64], &[f64]) -> f64,
    max_steps: usize,
) -> Result<Vec<f64>> {
    // Deterministic start vector with all graph symmetries broken.
    let mut v0: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i as f64) * 0.7).sin()).collect();
    let norm0 = k_inner(&v0, &v0).sqrt();
    if !(norm0 > 0.0) {
        return Err(Error::Parameter {
            name: "lanczos",
            msg: "K-norm of start vector is zero".into(),
        });
    }
    for v in &mut v0 {
        *v /= norm0;
    }
    let steps = max_steps.min(n).max(1);
    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for j in 0..steps {
        let qj = basis[j].clone();
        let mut w = apply(&qj)?;
        let alpha = k_inner(&w, &qj);
        alphas.push(alpha);
        for (i, qi) in basis.iter().enumerate() {
            // Includes the alpha and beta terms: full reorthogonalization
            // against every stored basis vector.
            let c = k_inner(&w, qi);
            let _ = i;
            for t in 0..n {
                w[t] -= c * qi[t];
            }
        }
        let beta = k_inner(&w, &w).max(0.0).sqrt();
        if j + 1 == steps || beta < 1e-12 {
            break;
        }
        betas.push(beta);
        for t in 0..n {
            w[t] /= beta;
        }
        basis.push(w);
    }
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let mut eigs: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

//! Sparse 5-point Dirichlet Laplacian on a grid: assembly, preconditioned
//! conjugate-gradient solves, and discrete Dirichlet energies.
//!
//! The operator acts on interior nodes; boundary values enter through the
//! injection vector b_k = rhs_k + sum_{boundary neighbors} g_b / h^2.

use crate::domain::{Grid, NodeRef};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Scalar field sampled at the interior nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub vals: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: &Grid) -> Self {
        GridField { vals: vec![0.0; grid.n_interior()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(crate::geom::Point) -> f64) -> Self {
        GridField { vals: (0..grid.n_interior()).map(|k| f(grid.interior_pos(k))).collect() }
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }
}

/// Values carried by the boundary nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryValues {
    pub vals: Vec<f64>,
}

impl BoundaryValues {
    pub fn zeros(grid: &Grid) -> Self {
        BoundaryValues { vals: vec![0.0; grid.n_boundary()] }
    }

    /// Evaluates `f` at each boundary node's projected position.
    pub fn from_fn(grid: &Grid, f: impl Fn(&crate::domain::BoundaryNode) -> f64) -> Self {
        BoundaryValues { vals: grid.boundary_nodes().iter().map(f).collect() }
    }
}

/// Value of a field (interior + boundary data) at a node reference.
pub fn node_value(u: &GridField, b: &BoundaryValues, r: NodeRef) -> f64 {
    match r {
        NodeRef::Interior(k) => u.vals[k],
        NodeRef::Boundary(k) => b.vals[k],
    }
}

/// Incomplete Cholesky factors with the lower-triangular pattern of A.
struct IcFactors {
    low_ptr: Vec<usize>,
    low_col: Vec<usize>,
    low_val: Vec<f64>,
    diag: Vec<f64>,
    // transpose adjacency for the backward sweep: rows of L^T
    up_ptr: Vec<usize>,
    up_col: Vec<usize>,
    up_val: Vec<f64>,
}

/// Assembled 5-point Dirichlet operator over the interior nodes of a grid,
/// with a conjugate-gradient solver.
pub struct Poisson {
    n: usize,
    h: f64,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    ic: Option<IcFactors>,
    pub tol: f64,
}

const PAR_THRESHOLD: usize = 32_768;

impl Poisson {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n_interior();
        let h = grid.h;
        let inv_h2 = 1.0 / (h * h);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(5 * n);
        let mut vals = Vec::with_capacity(5 * n);
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
        for k in 0..n {
            row.clear();
            row.push((k, 4.0 * inv_h2));
            for nb in grid.neighbors(k) {
                if let NodeRef::Interior(m) = nb {
                    row.push((m, -inv_h2));
                }
            }
            row.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &row {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let mut p = Poisson { n, h, row_ptr, col_idx, vals, ic: None, tol: 1e-10 };
        p.ic = p.factor_ic0();
        p
    }

    fn factor_ic0(&self) -> Option<IcFactors> {
        let n = self.n;
        let mut low_ptr = Vec::with_capacity(n + 1);
        let mut low_col: Vec<usize> = Vec::new();
        let mut low_val: Vec<f64> = Vec::new();
        let mut diag = vec![0.0f64; n];
        low_ptr.push(0);
        for i in 0..n {
            let (rs, re) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut aii = 0.0;
            let start = low_col.len();
            for t in rs..re {
                let j = self.col_idx[t];
                if j < i {
                    // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
                    let mut s = self.vals[t];
                    // intersect lower row i (built so far) with lower row j
                    let (mut a, mut b) = (start, low_ptr[j]);
                    let (ae, be) = (low_col.len(), low_ptr[j + 1]);
                    while a < ae && b < be {
                        match low_col[a].cmp(&low_col[b]) {
                            std::cmp::Ordering::Less => a += 1,
                            std::cmp::Ordering::Greater => b += 1,
                            std::cmp::Ordering::Equal => {
                                s -= low_val[a] * low_val[b];
                                a += 1;
                                b += 1;
                            }
                        }
                    }
                    let lij = s / diag[j];
                    low_col.push(j);
                    low_val.push(lij);
                } else if j == i {
                    aii = self.vals[t];
                }
            }
            let mut d = aii;
            for t in start..low_col.len() {
                d -= low_val[t] * low_val[t];
            }
            if d <= 0.0 {
                return None; // fall back to plain CG
            }
            diag[i] = d.sqrt();
            low_ptr.push(low_col.len());
        }
        // transpose adjacency
        let mut counts = vec![0usize; n];
        for &c in &low_col {
            counts[c] += 1;
        }
        let mut up_ptr = vec![0usize; n + 1];
        for i in 0..n {
            up_ptr[i + 1] = up_ptr[i] + counts[i];
        }
        let mut fill = up_ptr.clone();
        let mut up_col = vec![0usize; low_col.len()];
        let mut up_val = vec![0.0f64; low_col.len()];
        for i in 0..n {
            for t in low_ptr[i]..low_ptr[i + 1] {
                let j = low_col[t];
                up_col[fill[j]] = i;
                up_val[fill[j]] = low_val[t];
                fill[j] += 1;
            }
        }
        Some(IcFactors { low_ptr, low_col, low_val, diag, up_ptr, up_col, up_val })
    }

    /// A * x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out);
        out
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let body = |i: usize, o: &mut f64| {
            let mut s = 0.0;
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[t] * x[self.col_idx[t]];
            }
            *o = s;
        };
        if self.n >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(i, o)| body(i, o));
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                body(i, o);
            }
        }
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        match &self.ic {
            Some(ic) => {
                // forward: L z = r
                for i in 0..self.n {
                    let mut s = r[i];
                    for t in ic.low_ptr[i]..ic.low_ptr[i + 1] {
                        s -= ic.low_val[t] * z[ic.low_col[t]];
                    }
                    z[i] = s / ic.diag[i];
                }
                // backward: L^T y = z (in place)
                for i in (0..self.n).rev() {
                    let mut s = z[i];
                    for t in ic.up_ptr[i]..ic.up_ptr[i + 1] {
                        s -= ic.up_val[t] * z[ic.up_col[t]];
                    }
                    z[i] = s / ic.diag[i];
                }
            }
            None => z.copy_from_slice(r),
        }
    }

    /// Right-hand side with boundary injection.
    pub fn rhs_with_injection(
        &self,
        grid: &Grid,
        rhs: &GridField,
        bdata: &BoundaryValues,
    ) -> Vec<f64> {
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut b = rhs.vals.clone();
        for k in 0..self.n {
            for nb in grid.neighbors(k) {
                if let NodeRef::Boundary(m) = nb {
                    b[k] += bdata.vals[m] * inv_h2;
                }
            }
        }
        b
    }

    pub fn solve(&self, grid: &Grid, rhs: &GridField, bdata: &BoundaryValues) -> Result<GridField> {
        self.solve_with_guess(grid, rhs, bdata, None)
    }

    /// PCG solve of A u = rhs + injection(bdata), optionally warm-started.
    pub fn solve_with_guess(
        &self,
        grid: &Grid,
        rhs: &GridField,
        bdata: &BoundaryValues,
        guess: Option<&GridField>,
    ) -> Result<GridField> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: rhs.len() });
        }
        if bdata.vals.len() != grid.n_boundary() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_boundary(),
                got: bdata.vals.len(),
            });
        }
        let b = self.rhs_with_injection(grid, rhs, bdata);
        let bnorm = norm2(&b);
        if bnorm == 0.0 {
            return Ok(GridField { vals: vec![0.0; self.n] });
        }
        let mut x = match guess {
            Some(g) if g.len() == self.n => g.vals.clone(),
            _ => vec![0.0; self.n],
        };
        let mut r = vec![0.0; self.n];
        self.apply_into(&x, &mut r);
        for i in 0..self.n {
            r[i] = b[i] - r[i];
        }
        let target = self.tol * bnorm;
        if norm2(&r) <= target {
            return Ok(GridField { vals: x });
        }
        let mut z = vec![0.0; self.n];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; self.n];
        let cap = 50 * (self.n as f64).sqrt().ceil() as usize + 20;
        for _it in 0..cap {
            self.apply_into(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            for i in 0..self.n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if norm2(&r) <= target {
                return Ok(GridField { vals: x });
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..self.n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolverDiverged { residual: norm2(&r) / bnorm, iterations: cap })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves -Δu = rhs with Dirichlet data `bdata` (one-shot convenience; for
/// repeated solves construct a [`Poisson`] once).
pub fn solve_dirichlet(grid: &Grid, rhs: &GridField, bdata: &BoundaryValues) -> Result<GridField> {
    Poisson::new(grid).solve(grid, rhs, bdata)
}

/// Discrete Dirichlet integral ∫|∇u|² by cell-averaged differences
/// (trapezoidal in the transverse direction). Exact for affine fields on
/// lattice-aligned rectangles. No 1/2 factor; callers apply their own.
pub fn dirichlet_energy(grid: &Grid, u: &GridField, bdata: &BoundaryValues) -> Result<f64> {
    if u.len() != grid.n_interior() {
        return Err(Error::DimensionMismatch { expected: grid.n_interior(), got: u.len() });
    }
    if bdata.vals.len() != grid.n_boundary() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_boundary(),
            got: bdata.vals.len(),
        });
    }
    let val = |i: i64, j: i64| grid.node_at(i, j).map(|r| node_value(u, bdata, r));
    let mut total = 0.0;
    for j in 0..grid.ny as i64 - 1 {
        for i in 0..grid.nx as i64 - 1 {
            let (c00, c10, c01, c11) =
                match (val(i, j), val(i + 1, j), val(i, j + 1), val(i + 1, j + 1)) {
                    (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                    _ => continue,
                };
            let dx0 = c10 - c00;
            let dx1 = c11 - c01;
            let dy0 = c01 - c00;
            let dy1 = c11 - c10;
            total += 0.5 * (dx0 * dx0 + dx1 * dx1) + 0.5 * (dy0 * dy0 + dy1 * dy1);
        }
    }
    Ok(total)
}

/// Operator-consistent bilinear Dirichlet form: sum over lattice edges with at
/// least one interior endpoint of (Δu)(Δv). This is the quadratic form of the
/// assembled 5-point operator, so discrete Green identities hold exactly.
pub fn energy_form(
    grid: &Grid,
    u: &GridField,
    ub: &BoundaryValues,
    v: &GridField,
    vb: &BoundaryValues,
) -> f64 {
    let mut total = 0.0;
    for k in 0..grid.n_interior() {
        let uk = u.vals[k];
        let vk = v.vals[k];
        for nb in grid.neighbors(k) {
            match nb {
                NodeRef::Interior(m) => {
                    if m > k {
                        let du = uk - u.vals[m];
                        let dv = vk - v.vals[m];
                        total += du * dv;
                    }
                }
                NodeRef::Boundary(m) => {
                    let du = uk - ub.vals[m];
                    let dv = vk - vb.vals[m];
                    total += du * dv;
                }
            }
        }
    }
    total
}

/// ∫∇u·∇u in the operator form, zero boundary values.
pub fn energy_form_zero_bc(grid: &Grid, u: &GridField) -> f64 {
    let zb = BoundaryValues::zeros(grid);
    energy_form(grid, u, &zb, u, &zb)
}

/// Discrete delta at the interior node nearest to `at`: value 1/h² at that
/// node so that Σ rhs·h² = 1.
pub fn delta_rhs(grid: &Grid, at: crate::geom::Point) -> Result<(usize, GridField)> {
    let k = grid
        .nearest_interior(at)
        .ok_or(Error::OutsideDomain(at.x1, at.x2))?;
    let mut f = GridField::zeros(grid);
    f.vals[k] = 1.0 / (grid.h * grid.h);
    Ok((k, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{discretize, make_domain, DomainKind};
    use crate::geom::Point;

    fn unit_square(h: f64) -> (crate::domain::Domain, Grid) {
        let d = make_domain(DomainKind::Rectangle { x_lo: 0.0, x_hi: 1.0, y_lo: 0.0, y_hi: 1.0 })
            .unwrap();
        let g = discretize(&d, h).unwrap();
        (d, g)
    }

    #[test]
    fn linear_functions_are_stencil_exact() {
        let (_d, g) = unit_square(0.125);
        let rhs = GridField::zeros(&g);
        let bdata = BoundaryValues::from_fn(&g, |n| n.pos.x1);
        let u = solve_dirichlet(&g, &rhs, &bdata).unwrap();
        for k in 0..g.n_interior() {
            let p = g.interior_pos(k);
            assert!((u.vals[k] - p.x1).abs() < 1e-9, "node {k}: {} vs {}", u.vals[k], p.x1);
        }
    }

    #[test]
    fn disc_uniform_rhs_center_value() {
        // -Δu = 1 on the unit disc, u = (1-r²)/4, u(0) = 0.25
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let g = discretize(&d, 0.02).unwrap();
        let rhs = GridField::from_fn(&g, |_| 1.0);
        let u = solve_dirichlet(&g, &rhs, &BoundaryValues::zeros(&g)).unwrap();
        let k0 = g.nearest_interior(Point::new(0.0, 0.0)).unwrap();
        assert!((u.vals[k0] - 0.25).abs() < 2e-3, "u(0) = {}", u.vals[k0]);
    }

    #[test]
    fn maximum_principle() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let g = discretize(&d, 0.05).unwrap();
        let rhs = GridField::from_fn(&g, |p| (p.x1 * 3.0).sin().abs());
        let bdata = BoundaryValues::from_fn(&g, |n| n.pos.x2.abs());
        let u = solve_dirichlet(&g, &rhs, &bdata).unwrap();
        assert!(u.vals.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn dirichlet_energy_linear_exact() {
        let (_d, g) = unit_square(0.25);
        let u = GridField::from_fn(&g, |p| p.x1);
        let bdata = BoundaryValues::from_fn(&g, |n| n.pos.x1);
        let e = dirichlet_energy(&g, &u, &bdata).unwrap();
        assert!((e - 1.0).abs() < 1e-12, "energy {e}");
        let z = GridField::zeros(&g);
        assert_eq!(dirichlet_energy(&g, &z, &BoundaryValues::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn second_order_interior_convergence() {
        // manufactured u = sin(pi x) sin(pi y), rhs = 2 pi^2 u
        let two_pi2 = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
        let exact = |p: Point| (std::f64::consts::PI * p.x1).sin() * (std::f64::consts::PI * p.x2).sin();
        let mut errs = Vec::new();
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let (_d, g) = unit_square(h);
            let rhs = GridField::from_fn(&g, |p| two_pi2 * exact(p));
            let u = solve_dirichlet(&g, &rhs, &BoundaryValues::zeros(&g)).unwrap();
            let err = (0..g.n_interior())
                .map(|k| (u.vals[k] - exact(g.interior_pos(k))).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn discrete_green_symmetry() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let g = discretize(&d, 0.1).unwrap();
        let p = Poisson::new(&g);
        let zb = BoundaryValues::zeros(&g);
        let (ki, ei) = delta_rhs(&g, Point::new(0.3, 0.2)).unwrap();
        let (kj, ej) = delta_rhs(&g, Point::new(-0.4, 0.1)).unwrap();
        let ui = p.solve(&g, &ei, &zb).unwrap();
        let uj = p.solve(&g, &ej, &zb).unwrap();
        assert!((ui.vals[kj] - uj.vals[ki]).abs() < 1e-8);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let (_d, g) = unit_square(0.25);
        let bad = GridField { vals: vec![0.0; 3] };
        assert!(matches!(
            solve_dirichlet(&g, &bad, &BoundaryValues::zeros(&g)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn annulus_capacitor_energy() {
        // u = log(R/r)/log(R/rho) on annulus(1, e): energy 2π/log(R/rho) = 2π
        let e = std::f64::consts::E;
        let d = make_domain(DomainKind::Annulus { rho_in: 1.0, r_out: e }).unwrap();
        let g = discretize(&d, 0.01).unwrap();
        let u = GridField::from_fn(&g, |p| (e / p.norm()).ln());
        let bdata = BoundaryValues::from_fn(&g, |n| (e / n.pos.norm().max(1e-12)).ln());
        let en = dirichlet_energy(&g, &u, &bdata).unwrap();
        let target = 2.0 * std::f64::consts::PI;
        assert!((en - target).abs() / target < 0.03, "energy {en} vs {target}");
    }
}

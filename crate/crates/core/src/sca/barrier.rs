//! Primal log-barrier interior-point solver for one surrogate subproblem.
//!
//! Decision variables are split into a small global block (slot positions and
//! `R`) and one local block per user holding its scaled auxiliaries
//! `u = c / c~`. Local blocks only touch globals, so the Newton system is
//! solved through a dense Schur complement on the global block, with each
//! local block inverted as block-diagonal plus rank one.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::subproblem::{LinkEnd, SlotRef, SubproblemSpec};
use crate::error::{Error, Result};
use crate::scenario::{Placement, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSettings {
    /// Initial barrier weight.
    pub mu0: f64,
    /// Barrier weight reduction per stage.
    pub mu_factor: f64,
    /// Barrier weight of the last stage. The duality gap is at most
    /// `m * mu_final` for `m` constraints; much smaller weights only add
    /// rounding noise to the rate slacks.
    pub mu_final: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    /// Stationarity target for the last centering step.
    pub stationarity_tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_newton: usize,
    pub max_newton_per_stage: usize,
    /// Squared Newton decrement below which a feasible full step is taken
    /// without the sufficient-decrease test.
    pub full_step_decrement: f64,
    /// `R` starts this far below the smallest rate at the starting point.
    pub rate_margin: f64,
    /// `u` starts at this fraction of its linearized upper limit.
    pub start_fraction: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_factor: 0.1,
            mu_final: 1e-9,
            newton_tol: 1e-8,
            stationarity_tol: 1e-7,
            armijo: 0.01,
            backtrack: 0.5,
            max_newton: 5000,
            max_newton_per_stage: 200,
            full_step_decrement: 1e-4,
            rate_margin: 1e-6,
            start_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDual {
    pub uav: usize,
    pub episode: usize,
    pub value: f64,
}

/// Multipliers in the units of the original constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    /// Rate constraints, per user.
    pub rate: Vec<f64>,
    /// Linearized distance constraints, `[n][u][m]`, in m^-2.
    pub distance: Vec<Vec<Vec<f64>>>,
    /// Lower bounds on `c`, `[n][u][m]`, in m^2.
    pub lower: Vec<Vec<Vec<f64>>>,
    /// Displacement constraints, in m^-2.
    pub displacement: Vec<LinkDual>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    /// Largest of the residuals that are driven to zero (complementarity is
    /// bounded by the final barrier weight instead).
    pub fn max_asserted(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    /// UAV positions of the window, `[n][m]`.
    pub positions: Placement,
    pub slot_positions: Vec<Point>,
    /// Auxiliaries `c`, `[n][u][m]`, moved onto their linearized limit.
    pub c: Vec<Vec<Vec<f64>>>,
    /// Smallest user rate implied by `c`.
    pub rate: f64,
    /// Epigraph variable at the last barrier iterate.
    pub barrier_rate: f64,
    /// The start (or the incumbent it was pulled from) has a higher true
    /// min-rate than the barrier iterate and is returned instead (duals and
    /// residuals still describe the iterate).
    pub kept_start: bool,
    pub duals: Duals,
    pub kkt: KktResiduals,
    pub newton_iterations: usize,
    pub barrier_stages: usize,
    pub final_mu: f64,
}

struct Problem<'a> {
    spec: &'a SubproblemSpec,
    n: usize,
    k: usize,
    m: usize,
    /// Global block length: `2 * slots + 1`.
    g: usize,
    r: usize,
    nm: usize,
    len: usize,
    ct: Vec<f64>,
    umin: Vec<f64>,
    /// Rate derivative scale `prefactor / ln 2`.
    pscale: f64,
    h2: f64,
}

/// Gradient and Hessian of the centering objective, kept in structured form.
struct System {
    grad: DVector<f64>,
    a: DMatrix<f64>,
    diag: Vec<f64>,
    /// Rate curvature blocks, `[j * n + n]`, each `M x M`.
    blocks: Vec<DMatrix<f64>>,
    /// Gradient of each user's rate with respect to its locals.
    ghat: Vec<f64>,
    /// Rate slack `rho_j - R` per user.
    h: Vec<f64>,
    /// Local gradient without the rate barrier.
    g0: Vec<f64>,
    /// Up to two position couplings per local.
    cpl: Vec<[(usize, f64); 2]>,
    t: f64,
}

const NONE: usize = usize::MAX;

impl<'a> Problem<'a> {
    fn new(spec: &'a SubproblemSpec) -> Self {
        let (n, k, m) = (spec.num_episodes(), spec.num_users(), spec.num_uavs);
        let g = 2 * spec.num_slots + 1;
        let nm = n * m;
        let mut ct = vec![0.0; k * nm];
        for j in 0..k {
            for e in 0..n {
                for i in 0..m {
                    ct[j * nm + e * m + i] = spec.lin_points[e][j][i];
                }
            }
        }
        let umin = ct.iter().map(|c| spec.c_min / c).collect();
        Self {
            spec,
            n,
            k,
            m,
            g,
            r: 2 * spec.num_slots,
            nm,
            len: g + k * nm,
            ct,
            umin,
            pscale: spec.prefactor / LN_2,
            h2: spec.altitude * spec.altitude,
        }
    }

    fn loc(&self, j: usize, e: usize, i: usize) -> usize {
        j * self.nm + e * self.m + i
    }

    fn pos(&self, z: &DVector<f64>, e: usize, i: usize) -> (f64, f64, Option<usize>) {
        match self.spec.slots[e][i] {
            SlotRef::Var(s) => (z[2 * s], z[2 * s + 1], Some(s)),
            SlotRef::Fixed(p) => (p.x, p.y, None),
        }
    }

    fn end(&self, z: &DVector<f64>, end: LinkEnd) -> (f64, f64, Option<usize>) {
        match end {
            LinkEnd::Slot(s) => (z[2 * s], z[2 * s + 1], Some(s)),
            LinkEnd::Anchor(p) => (p.x, p.y, None),
        }
    }

    fn sq_dist(&self, z: &DVector<f64>, e: usize, j: usize, i: usize) -> (f64, f64, f64, Option<usize>) {
        let (x, y, s) = self.pos(z, e, i);
        let a = self.spec.users[e][j];
        let (dx, dy) = (x - a.x, y - a.y);
        (dx * dx + dy * dy + self.h2, dx, dy, s)
    }

    /// Per-episode rate arguments `1 + gamma * sum_m c~ u` of user `j`.
    fn rate_args(&self, z: &DVector<f64>, j: usize) -> Vec<f64> {
        (0..self.n)
            .map(|e| {
                let base = self.g + self.loc(j, e, 0);
                let s: f64 = (0..self.m).map(|i| self.ct[self.loc(j, e, i)] * z[base + i]).sum();
                1.0 + self.spec.rate_gain * s
            })
            .collect()
    }

    fn rate_of(&self, args: &[f64]) -> f64 {
        self.pscale * args.iter().map(|a| a.ln()).sum::<f64>()
    }

    /// Slack of every constraint in a fixed order: distance, lower bound,
    /// rate, displacement. Returns false if any is not strictly positive.
    fn slacks(&self, z: &DVector<f64>, out: &mut Vec<f64>) -> bool {
        out.clear();
        for j in 0..self.k {
            for e in 0..self.n {
                for i in 0..self.m {
                    let l = self.loc(j, e, i);
                    let (d2, ..) = self.sq_dist(z, e, j, i);
                    out.push(2.0 - self.ct[l] * d2 - z[self.g + l]);
                }
            }
        }
        for l in 0..self.k * self.nm {
            out.push(z[self.g + l] - self.umin[l]);
        }
        for j in 0..self.k {
            let args = self.rate_args(z, j);
            if args.iter().any(|a| !(*a > 0.0)) {
                return false;
            }
            out.push(self.rate_of(&args) - z[self.r]);
        }
        for link in &self.spec.links {
            let (ax, ay, _) = self.end(z, link.from);
            let (bx, by) = (z[2 * link.to], z[2 * link.to + 1]);
            let d2 = (bx - ax).powi(2) + (by - ay).powi(2);
            out.push(1.0 - d2 / (link.budget * link.budget));
        }
        out.iter().all(|s| *s > 0.0 && s.is_finite())
    }

    fn assemble(&self, z: &DVector<f64>, t: f64) -> System {
        let (g, m) = (self.g, self.m);
        let nloc = self.k * self.nm;
        let mut grad = DVector::zeros(self.len);
        let mut a = DMatrix::zeros(g, g);
        let mut diag = vec![0.0; nloc];
        let mut blocks = vec![DMatrix::zeros(m, m); self.k * self.n];
        let mut ghat = vec![0.0; nloc];
        let mut hs = vec![0.0; self.k];
        let mut g0 = vec![0.0; nloc];
        let mut cpl = vec![[(NONE, 0.0); 2]; nloc];

        grad[self.r] = -t;

        for j in 0..self.k {
            for e in 0..self.n {
                for i in 0..m {
                    let l = self.loc(j, e, i);
                    let c = self.ct[l];
                    let (d2, dx, dy, s) = self.sq_dist(z, e, j, i);
                    let inv = 1.0 / (2.0 - c * d2 - z[g + l]);
                    let inv2 = inv * inv;
                    grad[g + l] += inv;
                    diag[l] += inv2;
                    if let Some(s) = s {
                        let (fx, fy) = (2.0 * c * dx, 2.0 * c * dy);
                        let (ix, iy) = (2 * s, 2 * s + 1);
                        grad[ix] += fx * inv;
                        grad[iy] += fy * inv;
                        a[(ix, ix)] += fx * fx * inv2 + 2.0 * c * inv;
                        a[(iy, iy)] += fy * fy * inv2 + 2.0 * c * inv;
                        a[(ix, iy)] += fx * fy * inv2;
                        a[(iy, ix)] += fx * fy * inv2;
                        cpl[l][0] = (ix, fx * inv2);
                        cpl[l][1] = (iy, fy * inv2);
                    }
                    // Lower bound.
                    let lo = 1.0 / (z[g + l] - self.umin[l]);
                    grad[g + l] -= lo;
                    diag[l] += lo * lo;
                    g0[l] = grad[g + l];
                }
            }
            // Rate barrier -log(rho_j(u) - R).
            let args = self.rate_args(z, j);
            let h = self.rate_of(&args) - z[self.r];
            let hinv = 1.0 / h;
            hs[j] = h;
            grad[self.r] += hinv;
            for (e, arg) in args.iter().enumerate() {
                let coef = self.pscale * hinv / (arg * arg);
                let v: Vec<f64> = (0..m).map(|i| self.spec.rate_gain * self.ct[self.loc(j, e, i)]).collect();
                let blk = &mut blocks[j * self.n + e];
                for r in 0..m {
                    for c in 0..m {
                        blk[(r, c)] += coef * v[r] * v[c];
                    }
                }
                for i in 0..m {
                    let l = self.loc(j, e, i);
                    let gh = self.pscale * v[i] / arg;
                    grad[g + l] -= gh * hinv;
                    ghat[l] = gh;
                }
            }
        }

        for link in &self.spec.links {
            let d2inv = 1.0 / (link.budget * link.budget);
            let (ax, ay, sa) = self.end(z, link.from);
            let sb = link.to;
            let (dx, dy) = (z[2 * sb] - ax, z[2 * sb + 1] - ay);
            let f = (dx * dx + dy * dy) * d2inv - 1.0;
            let inv = -1.0 / f;
            let inv2 = inv * inv;
            // Gradient of f with respect to the `to` end; the `from` end is its negative.
            let gb = [2.0 * dx * d2inv, 2.0 * dy * d2inv];
            let mut idx: Vec<(usize, f64, usize)> = vec![(2 * sb, 1.0, 0), (2 * sb + 1, 1.0, 1)];
            if let Some(sa) = sa {
                idx.push((2 * sa, -1.0, 0));
                idx.push((2 * sa + 1, -1.0, 1));
            }
            for &(p, sp, cp) in &idx {
                grad[p] += sp * gb[cp] * inv;
                for &(q2, sq, cq) in &idx {
                    let curv = if cp == cq { sp * sq * 2.0 * d2inv } else { 0.0 };
                    a[(p, q2)] += sp * gb[cp] * sq * gb[cq] * inv2 + curv * inv;
                }
            }
        }

        System {
            grad,
            a,
            diag,
            blocks,
            ghat,
            h: hs,
            g0,
            cpl,
            t,
        }
    }

    /// Newton direction for `sys` via the Schur complement on the globals.
    ///
    /// The rate barrier of user `j` contributes the rank-one term `w w^T`
    /// with `w = (ghat, -1) / h`, which dominates the Hessian near the
    /// boundary. It is eliminated in closed form so that only
    /// `h^2 + ghat^T P^-1 ghat` appears, never `1 / h` on its own.
    fn newton_direction(&self, sys: &System) -> Result<DVector<f64>> {
        let (g, m, n, nl, r) = (self.g, self.m, self.n, self.nm, self.r);
        let mut s = sys.a.clone();
        let mut rhs = -sys.grad.rows(0, g).into_owned();
        rhs[r] = sys.t;
        let mut users = Vec::with_capacity(self.k);

        for j in 0..self.k {
            let h = sys.h[j];
            let mut eps = Vec::with_capacity(n);
            let mut vt = DVector::zeros(g);
            vt[r] = -1.0;
            let mut gamma = 0.0;
            let mut a0 = 0.0;
            let mut p0s = Vec::with_capacity(n);
            for e in 0..n {
                let base = j * nl + e * m;
                let mut pe = sys.blocks[j * n + e].clone();
                for i in 0..m {
                    pe[(i, i)] += sys.diag[base + i];
                }
                let chol = pe
                    .cholesky()
                    .ok_or_else(|| Error::Internal("local Newton block is not positive definite".into()))?;
                // Columns touched by this episode's couplings.
                let mut cols: Vec<usize> = Vec::with_capacity(2 * m);
                for l in base..base + m {
                    for &(gi, _) in &sys.cpl[l] {
                        if gi != NONE && !cols.contains(&gi) {
                            cols.push(gi);
                        }
                    }
                }
                let mut b = DMatrix::zeros(m, cols.len());
                for i in 0..m {
                    for &(gi, bv) in &sys.cpl[base + i] {
                        if gi != NONE {
                            let c = cols.iter().position(|x| *x == gi).expect("column registered");
                            b[(i, c)] += bv;
                        }
                    }
                }
                let y = chol.solve(&b);
                let btpb = b.transpose() * &y;
                let gh = DVector::from_column_slice(&sys.ghat[base..base + m]);
                let y0 = chol.solve(&gh);
                let p0 = chol.solve(&DVector::from_column_slice(&sys.g0[base..base + m]));
                gamma += gh.dot(&y0);
                a0 += gh.dot(&p0);
                let bty0 = b.transpose() * &y0;
                for (ci, &gi) in cols.iter().enumerate() {
                    vt[gi] -= bty0[ci];
                    for (cj, &gj) in cols.iter().enumerate() {
                        s[(gi, gj)] -= btpb[(ci, cj)];
                    }
                }
                p0s.push(p0);
                eps.push((chol, cols, b, y0));
            }
            let den = h * h + gamma;
            s.ger(1.0 / den, &vt, &vt, 1.0);
            rhs[r] -= (h + a0) / den;
            for (e, (_, cols, b, y0)) in eps.iter().enumerate() {
                let x = &p0s[e] - y0 * ((a0 + h) / den);
                let btx = b.transpose() * x;
                for (ci, &gi) in cols.iter().enumerate() {
                    rhs[gi] += btx[ci];
                }
            }
            users.push((eps, den, h));
        }

        let dg = solve_spd(s, &rhs)?;
        let mut dir = DVector::zeros(self.len);
        dir.rows_mut(0, g).copy_from(&dg);
        for (j, (eps, den, h)) in users.iter().enumerate() {
            let mut p1s = Vec::with_capacity(n);
            let mut a1 = 0.0;
            for (e, (chol, cols, b, y0)) in eps.iter().enumerate() {
                let base = j * nl + e * m;
                let dgc = DVector::from_iterator(cols.len(), cols.iter().map(|&gi| dg[gi]));
                let v0 = -DVector::from_column_slice(&sys.g0[base..base + m]) - b * dgc;
                let p1 = chol.solve(&v0);
                a1 += DVector::from_column_slice(&sys.ghat[base..base + m]).dot(&p1);
                p1s.push((p1, y0));
            }
            let coef = (a1 - h - dg[r]) / den;
            for (e, (p1, y0)) in p1s.into_iter().enumerate() {
                let dl = p1 - y0 * coef;
                dir.rows_mut(g + j * nl + e * m, m).copy_from(&dl);
            }
        }
        Ok(dir)
    }

    /// Replaces `R` by the exact minimizer of the barrier over `R` alone,
    /// the root of `sum_j 1 / (rho_j - R) = t`.
    fn center_rate(&self, z: &mut DVector<f64>, t: f64) {
        let rates: Vec<f64> = (0..self.k).map(|j| self.rate_of(&self.rate_args(z, j))).collect();
        let rmin = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let gaps: Vec<f64> = rates.iter().map(|r| r - rmin).collect();
        // f(delta) = sum 1 / (gap + delta) - t is convex and decreasing;
        // Newton from the left end of [1/t, K/t] increases monotonically.
        let mut delta = 1.0 / t;
        for _ in 0..100 {
            let (f, df) = gaps.iter().fold((-t, 0.0), |(f, df), g| {
                let inv = 1.0 / (g + delta);
                (f + inv, df - inv * inv)
            });
            let next = delta - f / df;
            if !(next > delta) || (next - delta) <= 1e-15 * delta {
                break;
            }
            delta = next.min(self.k as f64 / t);
        }
        z[self.r] = rmin - delta;
    }

    /// Hessian-vector product using the structured representation.
    #[cfg(test)]
    fn hess_mul(&self, sys: &System, v: &DVector<f64>) -> DVector<f64> {
        let (g, m, n, nl, r) = (self.g, self.m, self.n, self.nm, self.r);
        let mut out = DVector::zeros(self.len);
        let vg = v.rows(0, g);
        out.rows_mut(0, g).copy_from(&(&sys.a * vg));
        for j in 0..self.k {
            let h = sys.h[j];
            let mut wv = -v[r];
            for l in j * nl..(j + 1) * nl {
                wv += sys.ghat[l] * v[g + l];
            }
            wv /= h * h;
            out[r] -= wv;
            for e in 0..n {
                let base = j * nl + e * m;
                let blk = &sys.blocks[j * n + e];
                for a in 0..m {
                    let la = base + a;
                    let mut acc = sys.diag[la] * v[g + la] + sys.ghat[la] * wv;
                    for b in 0..m {
                        acc += blk[(a, b)] * v[g + base + b];
                    }
                    for &(gi, bv) in &sys.cpl[la] {
                        if gi != NONE {
                            acc += bv * v[gi];
                            out[gi] += bv * v[g + la];
                        }
                    }
                    out[g + la] += acc;
                }
            }
        }
        out
    }

    fn slot_points(&self, z: &DVector<f64>) -> Vec<Point> {
        (0..self.spec.num_slots).map(|s| Point::new(z[2 * s], z[2 * s + 1])).collect()
    }

    fn native_c(&self, u: impl Fn(usize) -> f64) -> Vec<Vec<Vec<f64>>> {
        (0..self.n)
            .map(|e| {
                (0..self.k)
                    .map(|j| (0..self.m).map(|i| self.ct[self.loc(j, e, i)] * u(self.loc(j, e, i))).collect())
                    .collect()
            })
            .collect()
    }

    /// Moves every auxiliary onto its linearized limit and returns the
    /// resulting `c` and smallest user rate.
    fn polish(&self, z: &DVector<f64>) -> (Vec<Vec<Vec<f64>>>, f64) {
        let mut up = DVector::zeros(self.len);
        up.rows_mut(0, self.g).copy_from(&z.rows(0, self.g));
        for j in 0..self.k {
            for e in 0..self.n {
                for i in 0..self.m {
                    let l = self.loc(j, e, i);
                    let (d2, ..) = self.sq_dist(z, e, j, i);
                    up[self.g + l] = (2.0 - self.ct[l] * d2).max(z[self.g + l]);
                }
            }
        }
        let rate = (0..self.k)
            .map(|j| self.rate_of(&self.rate_args(&up, j)))
            .fold(f64::INFINITY, f64::min);
        (self.native_c(|l| up[self.g + l]), rate)
    }

    /// Largest violation of the original constraints in native units.
    fn native_violation(&self, z: &DVector<f64>, c: &[Vec<Vec<f64>>], rate: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for e in 0..self.n {
            for j in 0..self.k {
                for i in 0..self.m {
                    let ct = self.ct[self.loc(j, e, i)];
                    let (d2, ..) = self.sq_dist(z, e, j, i);
                    let g = 2.0 / ct - c[e][j][i] / (ct * ct);
                    // Relative to the natural scale of the constraint (m^2).
                    worst = worst.max((d2 - g) / g.abs().max(d2));
                    worst = worst.max((self.spec.c_min - c[e][j][i]) * ct.recip().min(1.0));
                }
            }
        }
        for j in 0..self.k {
            let rho = self.spec.user_rate(c, j);
            worst = worst.max(rate - rho);
        }
        for link in &self.spec.links {
            let (ax, ay, _) = self.end(z, link.from);
            let d = ((z[2 * link.to] - ax).powi(2) + (z[2 * link.to + 1] - ay).powi(2)).sqrt();
            worst = worst.max(d - link.budget);
        }
        worst
    }
}

fn solve_spd(mut s: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = s.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    for _ in 0..8 {
        if let Some(ch) = s.clone().cholesky() {
            return Ok(ch.solve(rhs));
        }
        let next = if ridge == 0.0 { scale * 1e-14 } else { ridge * 100.0 };
        for i in 0..s.nrows() {
            s[(i, i)] += next - ridge;
        }
        ridge = next;
    }
    Err(Error::Internal("Newton system is not positive definite".into()))
}

/// Strictly feasible starting point: positions from the spec, `u` at a fixed
/// fraction of its linearized limit, `R` just below the smallest rate.
fn initial_point(p: &Problem, settings: &BarrierSettings) -> Result<DVector<f64>> {
    let spec = p.spec;
    let mut z = DVector::zeros(p.len);
    for (s, pt) in spec.start.iter().enumerate() {
        z[2 * s] = pt.x;
        z[2 * s + 1] = pt.y;
    }
    for link in &spec.links {
        let (ax, ay, _) = p.end(&z, link.from);
        let d = ((z[2 * link.to] - ax).powi(2) + (z[2 * link.to + 1] - ay).powi(2)).sqrt();
        if !(d < link.budget) {
            return Err(Error::Infeasible(format!(
                "start position of UAV {} leaves its displacement budget {} m after episode {}",
                link.uav, link.budget, link.episode
            )));
        }
    }
    for j in 0..p.k {
        for e in 0..p.n {
            for i in 0..p.m {
                let l = p.loc(j, e, i);
                let (d2, _, _, slot) = p.sq_dist(&z, e, j, i);
                let cap = 2.0 - p.ct[l] * d2;
                if !(cap > p.umin[l]) {
                    return Err(infeasibility(p, e, j, i, slot, d2));
                }
                let u = settings.start_fraction * cap;
                z[p.g + l] = if u > p.umin[l] { u } else { 0.5 * (cap + p.umin[l]) };
            }
        }
    }
    let rmin = (0..p.k).map(|j| p.rate_of(&p.rate_args(&z, j))).fold(f64::INFINITY, f64::min);
    z[p.r] = rmin - settings.rate_margin;
    Ok(z)
}

fn infeasibility(p: &Problem, e: usize, j: usize, i: usize, slot: Option<usize>, d2: f64) -> Error {
    let ct = p.ct[p.loc(j, e, i)];
    let limit = (2.0 - p.umin[p.loc(j, e, i)]) / ct;
    let episode = p.spec.first_episode + e;
    if p.h2 >= limit {
        return Error::Infeasible(format!(
            "certificate: altitude^2 = {} m^2 exceeds the linearized limit {limit} m^2 \
             for user {j}, UAV {i}, episode {episode}",
            p.h2
        ));
    }
    match slot {
        None => Error::Infeasible(format!(
            "certificate: UAV {i} is fixed in episode {episode} at squared distance {d2} m^2 from user {j}, \
             beyond the linearized limit {limit} m^2"
        )),
        Some(_) => Error::Infeasible(format!(
            "no strictly feasible start: UAV {i} in episode {episode} is at squared distance {d2} m^2 \
             from user {j}, beyond the linearized limit {limit} m^2"
        )),
    }
}

pub fn solve_convex_subproblem(spec: &SubproblemSpec, settings: &BarrierSettings) -> Result<SubproblemSolution> {
    let p = Problem::new(spec);
    if spec.num_users() == 0 || spec.num_episodes() == 0 || spec.num_uavs == 0 {
        return Err(Error::domain("subproblem has no users, episodes or UAVs"));
    }
    if !(spec.rate_gain > 0.0) {
        return Err(Error::domain("rate gain must be positive (requires K < M)"));
    }
    let mut z = initial_point(&p, settings)?;
    let z0 = z.clone();
    let mut t = 1.0 / settings.mu0;
    let mut total = 0usize;
    let mut stages = 0usize;
    let mut old = Vec::new();
    let mut new = Vec::new();
    let mut zn = DVector::zeros(p.len);

    loop {
        p.center_rate(&mut z, t);
        stages += 1;
        let last_stage = 1.0 / t <= settings.mu_final * (1.0 + 1e-9);
        let mut inner = 0usize;
        let mut best_stat = f64::INFINITY;
        let mut stalled = 0usize;
        loop {
            if total >= settings.max_newton {
                let (_, rate) = p.polish(&z);
                return Err(Error::NonConvergence {
                    iterations: total,
                    best_objective: rate,
                    best_positions: Box::new(spec.placement(&p.slot_points(&z))),
                });
            }
            let sys = p.assemble(&z, t);
            let dir = p.newton_direction(&sys)?;
            let lam2 = -sys.grad.dot(&dir);
            let stat = sys.grad.amax() / t;
            if !(lam2 > 0.0) || inner >= settings.max_newton_per_stage {
                break;
            }
            if lam2 / 2.0 <= settings.newton_tol {
                // The last stage also polishes stationarity, while that
                // still makes progress.
                if !last_stage || stat <= settings.stationarity_tol {
                    break;
                }
                if stat < 0.5 * best_stat {
                    best_stat = stat;
                    stalled = 0;
                } else {
                    stalled += 1;
                    if stalled > 3 {
                        break;
                    }
                }
            }
            total += 1;
            inner += 1;
            p.slacks(&z, &mut old);
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-20 {
                zn.copy_from(&z);
                zn.axpy(step, &dir, 1.0);
                if p.slacks(&zn, &mut new) {
                    // Near the center the decrease is below rounding noise;
                    // a full feasible step is the Newton step itself.
                    if lam2 <= settings.full_step_decrement {
                        accepted = true;
                        break;
                    }
                    let df = -t * (zn[p.r] - z[p.r]) - old.iter().zip(&new).map(|(a, b)| (b / a).ln()).sum::<f64>();
                    if df <= -settings.armijo * step * lam2 {
                        accepted = true;
                        break;
                    }
                }
                step *= settings.backtrack;
            }
            if !accepted {
                break;
            }
            p.center_rate(&mut zn, t);
            std::mem::swap(&mut z, &mut zn);
        }
        if last_stage {
            break;
        }
        t /= settings.mu_factor;
    }

    let mu = 1.0 / t;
    let sys = p.assemble(&z, t);
    p.slacks(&z, &mut old);
    let duals = extract_duals(&p, &old, mu);
    let raw_c = p.native_c(|l| z[p.g + l]);
    let raw_violation = p.native_violation(&z, &raw_c, z[p.r]);
    // The start, and the given start it was pulled from, are feasible too;
    // when the subproblem is already solved to within the barrier accuracy
    // either can be the better point. Clamped linearization points make the
    // surrogate inexact, so the choice uses the true min-rate.
    let true_rate = |z: &DVector<f64>| spec.objective_at(&spec.placement(&p.slot_points(z)));
    let mut zi = z0.clone();
    if let Some(given) = &spec.incumbent {
        for (s, pt) in given.iter().enumerate() {
            zi[2 * s] = pt.x;
            zi[2 * s + 1] = pt.y;
        }
        for l in 0..p.k * p.nm {
            zi[p.g + l] = p.umin[l];
        }
    }
    let candidates = [&z, &z0, &zi];
    let best = (0..candidates.len())
        .map(|i| (i, true_rate(candidates[i])))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
        .0;
    let kept_start = best > 0;
    let zp = candidates[best];
    let (c, rate) = p.polish(zp);
    let primal = p.native_violation(zp, &c, rate).max(raw_violation).max(0.0);
    let kkt = KktResiduals {
        stationarity: sys.grad.amax() / t,
        primal,
        dual: 0.0,
        complementarity: old.iter().map(|s| (mu / s) * s).fold(0.0, f64::max),
    };
    let slots = p.slot_points(zp);
    Ok(SubproblemSolution {
        positions: spec.placement(&slots),
        slot_positions: slots,
        c,
        rate,
        barrier_rate: z[p.r],
        kept_start,
        duals,
        kkt,
        newton_iterations: total,
        barrier_stages: stages,
        final_mu: mu,
    })
}

fn extract_duals(p: &Problem, slacks: &[f64], mu: f64) -> Duals {
    let cnt = p.k * p.nm;
    let dist = &slacks[..cnt];
    let lower = &slacks[cnt..2 * cnt];
    let rate = &slacks[2 * cnt..2 * cnt + p.k];
    let links = &slacks[2 * cnt + p.k..];
    let grid = |vals: &[f64], scale: &dyn Fn(f64) -> f64| -> Vec<Vec<Vec<f64>>> {
        (0..p.n)
            .map(|e| {
                (0..p.k)
                    .map(|j| {
                        (0..p.m)
                            .map(|i| {
                                let l = p.loc(j, e, i);
                                scale(p.ct[l]) * mu / vals[l]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };
    Duals {
        rate: rate.iter().map(|s| mu / s).collect(),
        distance: grid(dist, &|ct| ct),
        lower: grid(lower, &|ct| 1.0 / ct),
        displacement: p
            .spec
            .links
            .iter()
            .zip(links)
            .map(|(l, s)| LinkDual {
                uav: l.uav,
                episode: l.episode,
                value: mu / s / (l.budget * l.budget),
            })
            .collect(),
    }
}

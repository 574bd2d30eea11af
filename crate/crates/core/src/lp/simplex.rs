//! Bounded-variable revised simplex over a dense LU basis with product-form
//! updates. Dantzig pricing, Harris ratio test, and Bland's rule once a run
//! of degenerate pivots suggests cycling.

use std::time::Instant;

use super::LpStatus;
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
pub(crate) const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 80;
const DEGENERATE_RUN: usize = 40;
/// Largest basis dimension the dense factorization accepts.
pub(crate) const MAX_DENSE_ROWS: usize = 8000;

/// `min c'x  s.t.  A x = b,  lower <= x <= upper`, column-wise.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Simplex multipliers of the rows at termination.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

struct DenseLu {
    m: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    fn factor(m: usize, dense: Vec<f64>) -> Option<DenseLu> {
        let mut lu = dense;
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let mut p = k;
            let mut best = lu[k * m + k].abs();
            for i in k + 1..m {
                let v = lu[i * m + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < 1e-12 {
                return None;
            }
            if p != k {
                for j in 0..m {
                    lu.swap(k * m + j, p * m + j);
                }
                perm.swap(k, p);
            }
            let piv = lu[k * m + k];
            for i in k + 1..m {
                let f = lu[i * m + k] / piv;
                if f != 0.0 {
                    lu[i * m + k] = f;
                    let (top, bottom) = lu.split_at_mut(i * m);
                    let row_k = &top[k * m + k + 1..k * m + m];
                    let row_i = &mut bottom[k + 1..m];
                    for (x, y) in row_i.iter_mut().zip(row_k) {
                        *x -= f * y;
                    }
                } else {
                    lu[i * m + k] = 0.0;
                }
            }
        }
        Some(DenseLu { m, lu, perm })
    }

    /// Solves `B x = r` in place.
    fn solve(&self, r: &mut [f64]) {
        let m = self.m;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| r[p]).collect();
        for i in 0..m {
            let row = &self.lu[i * m..i * m + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..m).rev() {
            let row = &self.lu[i * m + i + 1..i * m + m];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.lu[i * m + i];
        }
        r.copy_from_slice(&x);
    }

    /// Solves `B' y = c` in place.
    fn solve_transpose(&self, c: &mut [f64]) {
        let m = self.m;
        let mut z = c.to_vec();
        for i in 0..m {
            let zi = z[i] / self.lu[i * m + i];
            z[i] = zi;
            if zi != 0.0 {
                for j in i + 1..m {
                    z[j] -= self.lu[i * m + j] * zi;
                }
            }
        }
        for i in (0..m).rev() {
            let zi = z[i];
            if zi != 0.0 {
                for j in 0..i {
                    z[j] -= self.lu[i * m + j] * zi;
                }
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            c[p] = z[i];
        }
    }
}

struct Eta {
    r: usize,
    piv: f64,
    col: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum At {
    Basic,
    Lower,
    Upper,
    Zero,
}

struct Engine<'a> {
    sf: &'a StandardForm,
    n: usize,
    art_cols: Vec<(usize, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    at: Vec<At>,
    basis: Vec<usize>,
    lu: DenseLu,
    etas: Vec<Eta>,
    iterations: usize,
    max_iterations: usize,
    deadline: Option<Instant>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Engine<'a> {
    fn col(&self, j: usize) -> ColIter<'_> {
        if j < self.n {
            ColIter::Struct(self.sf.cols[j].iter())
        } else {
            ColIter::Art(std::iter::once(self.art_cols[j - self.n]))
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.sf.m;
        let mut dense = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.col(j) {
                dense[i * m + pos] = v;
            }
        }
        self.lu = DenseLu::factor(m, dense).ok_or_else(|| Error::Lp("singular basis".into()))?;
        self.etas.clear();
        // recompute basic values from scratch
        let mut r = self.sf.b.clone();
        for j in 0..self.x.len() {
            if self.at[j] != At::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, v) in self.col(j) {
                    r[i] -= v * xj;
                }
            }
        }
        self.ftran_lu_only(&mut r);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = r[pos];
        }
        Ok(())
    }

    fn ftran_lu_only(&self, r: &mut [f64]) {
        self.lu.solve(r);
    }

    fn ftran(&self, r: &mut [f64]) {
        self.lu.solve(r);
        for e in &self.etas {
            let xr = r[e.r] / e.piv;
            if xr != 0.0 {
                for &(i, v) in &e.col {
                    r[i] -= v * xr;
                }
            }
            r[e.r] = xr;
        }
    }

    fn btran(&self, c: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let s: f64 = e.col.iter().map(|&(i, v)| c[i] * v).sum();
            c[e.r] = (c[e.r] - s) / e.piv;
        }
        self.lu.solve_transpose(c);
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.btran(&mut y);
        y
    }

    fn run(&mut self, cost: &[f64]) -> Result<Outcome> {
        let total = self.x.len();
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(Error::Timeout);
                }
            }
            if self.iterations >= self.max_iterations {
                return Err(Error::Lp(format!("iteration limit {} reached", self.max_iterations)));
            }
            if self.etas.len() >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.duals(cost);

            // pricing
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                let status = self.at[j];
                if status == At::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let dj = cost[j] - self.col(j).map(|(i, v)| v * y[i]).sum::<f64>();
                let dir = match status {
                    At::Lower if dj < -OPT_TOL => 1.0,
                    At::Upper if dj > OPT_TOL => -1.0,
                    At::Zero if dj.abs() > OPT_TOL => -dj.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else { return Ok(Outcome::Optimal) };

            let mut d = vec![0.0; self.sf.m];
            for (i, v) in self.col(q) {
                d[i] = v;
            }
            self.ftran(&mut d);

            // Harris ratio test
            let flip = self.upper[q] - self.lower[q];
            let mut t_max = if flip.is_finite() { flip } else { f64::INFINITY };
            for (pos, &j) in self.basis.iter().enumerate() {
                let alpha = dir * d[pos];
                if alpha > PIVOT_TOL && self.lower[j].is_finite() {
                    t_max = t_max.min((self.x[j] - self.lower[j] + HARRIS_TOL) / alpha);
                } else if alpha < -PIVOT_TOL && self.upper[j].is_finite() {
                    t_max = t_max.min((self.upper[j] - self.x[j] + HARRIS_TOL) / -alpha);
                }
            }
            if t_max.is_infinite() {
                return Ok(Outcome::Unbounded);
            }
            let mut leave: Option<(usize, f64, f64)> = None; // (pos, ratio, |alpha|)
            for (pos, &j) in self.basis.iter().enumerate() {
                let alpha = dir * d[pos];
                let ratio = if alpha > PIVOT_TOL && self.lower[j].is_finite() {
                    (self.x[j] - self.lower[j]) / alpha
                } else if alpha < -PIVOT_TOL && self.upper[j].is_finite() {
                    (self.upper[j] - self.x[j]) / -alpha
                } else {
                    continue;
                };
                if ratio > t_max {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((p, r, a)) => {
                        if bland {
                            ratio < r - 1e-12 || (ratio <= r + 1e-12 && j < self.basis[p])
                        } else {
                            alpha.abs() > a * (1.0 + 1e-12) || (alpha.abs() >= a * (1.0 - 1e-12) && j < self.basis[p])
                        }
                    }
                };
                if better {
                    leave = Some((pos, ratio, alpha.abs()));
                }
            }

            let do_flip = flip.is_finite() && leave.is_none_or(|(_, r, _)| flip <= r.max(0.0));
            let t = if do_flip { flip } else { leave.map(|(_, r, _)| r.max(0.0)).unwrap() };

            self.x[q] += dir * t;
            for (pos, &j) in self.basis.iter().enumerate() {
                self.x[j] -= t * dir * d[pos];
            }
            if t <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.iterations += 1;

            if do_flip {
                self.at[q] = if dir > 0.0 { At::Upper } else { At::Lower };
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                continue;
            }
            let (r, _, _) = leave.unwrap();
            let out = self.basis[r];
            if dir * d[r] > 0.0 {
                self.at[out] = At::Lower;
                self.x[out] = self.lower[out];
            } else {
                self.at[out] = At::Upper;
                self.x[out] = self.upper[out];
            }
            self.basis[r] = q;
            self.at[q] = At::Basic;
            let piv = d[r];
            let col = d.iter().enumerate().filter(|&(i, &v)| i != r && v != 0.0).map(|(i, &v)| (i, v)).collect();
            self.etas.push(Eta { r, piv, col });
            if piv.abs() < 1e-7 {
                self.refactor()?;
            }
        }
    }
}

enum ColIter<'a> {
    Struct(std::slice::Iter<'a, (usize, f64)>),
    Art(std::iter::Once<(usize, f64)>),
}

impl<'a> Iterator for ColIter<'a> {
    type Item = (usize, f64);
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Struct(it) => it.next().copied(),
            ColIter::Art(it) => it.next(),
        }
    }
}

pub(crate) fn solve_standard(sf: &StandardForm, deadline: Option<Instant>, max_iterations: Option<usize>) -> Result<SimplexResult> {
    let m = sf.m;
    let n = sf.cols.len();
    if m > MAX_DENSE_ROWS {
        return Err(Error::Guard(format!("{m} rows exceed the dense basis limit of {MAX_DENSE_ROWS}")));
    }
    for j in 0..n {
        if sf.lower[j] > sf.upper[j] {
            return Ok(SimplexResult { status: LpStatus::Infeasible, x: vec![0.0; n], duals: vec![0.0; m], iterations: 0 });
        }
    }
    // nonbasic starting point
    let mut x = Vec::with_capacity(n + m);
    let mut at = Vec::with_capacity(n + m);
    for j in 0..n {
        let (l, u) = (sf.lower[j], sf.upper[j]);
        if l.is_finite() {
            x.push(l);
            at.push(At::Lower);
        } else if u.is_finite() {
            x.push(u);
            at.push(At::Upper);
        } else {
            x.push(0.0);
            at.push(At::Zero);
        }
    }
    let mut resid = sf.b.clone();
    for j in 0..n {
        if x[j] != 0.0 {
            for &(i, v) in &sf.cols[j] {
                resid[i] -= v * x[j];
            }
        }
    }
    // one artificial per row; sign chosen so it starts nonnegative
    let art_cols: Vec<(usize, f64)> = (0..m).map(|i| (i, if resid[i] < 0.0 { -1.0 } else { 1.0 })).collect();
    let mut lower = sf.lower.clone();
    let mut upper = sf.upper.clone();
    for i in 0..m {
        x.push(resid[i].abs());
        at.push(At::Basic);
        lower.push(0.0);
        upper.push(f64::INFINITY);
    }
    let basis: Vec<usize> = (n..n + m).collect();
    let lu = DenseLu::factor(0, vec![]).unwrap();
    let mut eng = Engine {
        sf,
        n,
        art_cols,
        lower,
        upper,
        x,
        at,
        basis,
        lu,
        etas: Vec::new(),
        iterations: 0,
        max_iterations: max_iterations.unwrap_or(50 * (m + n) + 10_000),
        deadline,
    };
    eng.refactor()?;

    let b_scale = sf.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let infeasibility: f64 = (n..n + m).map(|j| eng.x[j]).sum();
    if infeasibility > 0.0 {
        let mut phase1 = vec![0.0; n + m];
        for c in phase1.iter_mut().skip(n) {
            *c = 1.0;
        }
        match eng.run(&phase1)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => return Err(Error::Lp("phase one unbounded".into())),
        }
        eng.refactor()?;
        let infeasibility: f64 = (n..n + m).map(|j| eng.x[j].abs()).sum();
        if infeasibility > 1e-7 * b_scale {
            return Ok(SimplexResult { status: LpStatus::Infeasible, x: eng.x[..n].to_vec(), duals: vec![0.0; m], iterations: eng.iterations });
        }
    }
    for j in n..n + m {
        eng.upper[j] = 0.0;
        if eng.at[j] != At::Basic {
            eng.at[j] = At::Lower;
            eng.x[j] = 0.0;
        }
    }
    let mut cost = sf.c.clone();
    cost.extend(std::iter::repeat(0.0).take(m));
    let outcome = eng.run(&cost)?;
    eng.refactor()?;
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    if status == LpStatus::Optimal {
        let worst = (0..n + m)
            .map(|j| (eng.lower[j] - eng.x[j]).max(eng.x[j] - eng.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        if worst > 1e-6 * b_scale {
            return Err(Error::Lp(format!("numeric failure: bound violation {worst:e}")));
        }
    }
    let duals = eng.duals(&cost);
    Ok(SimplexResult { status, x: eng.x[..n].to_vec(), duals, iterations: eng.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_both_ways() {
        let m = 3;
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = DenseLu::factor(m, a.clone()).unwrap();
        let mut r = vec![3.0, 2.0, 4.0];
        lu.solve(&mut r);
        for i in 0..m {
            let s: f64 = (0..m).map(|j| a[i * m + j] * r[j]).sum();
            assert!((s - [3.0, 2.0, 4.0][i]).abs() < 1e-12);
        }
        let mut c = vec![1.0, -1.0, 2.0];
        lu.solve_transpose(&mut c);
        for j in 0..m {
            let s: f64 = (0..m).map(|i| a[i * m + j] * c[i]).sum();
            assert!((s - [1.0, -1.0, 2.0][j]).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_standard_form() {
        // min -x - y  s.t.  x + y + s = 4, x in [0, 3], y in [0, 3], s >= 0
        let sf = StandardForm {
            m: 1,
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0)], vec![(0, 1.0)]],
            b: vec![4.0],
            c: vec![-1.0, -2.0, 0.0],
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![3.0, 3.0, f64::INFINITY],
        };
        let r = solve_standard(&sf, None, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-9 && (r.x[1] - 3.0).abs() < 1e-9);
    }
}

//! Reductions on free variables: substitution through equality rows and
//! Fourier-Motzkin elimination when a variable is bounded by a single row
//! on one side. Both remove one row and one column at a time, so the
//! problem never grows.

use super::{Row, RowForm};

const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub(crate) enum Post {
    /// `x_var = (rhs - terms . x) / coef`
    Solve { var: usize, terms: Vec<(usize, f64)>, rhs: f64, coef: f64 },
    /// Only one-sided rows remained; pick the tightest bound they imply.
    Bound { var: usize, rows: Vec<Row> },
}

#[derive(Debug)]
pub(crate) struct Presolved {
    pub form: RowForm,
    /// Reduced variable index -> original index.
    pub var_map: Vec<usize>,
    pub post: Vec<Post>,
    pub infeasible: bool,
}

fn coef(row: &Row, k: usize) -> Option<f64> {
    row.terms.binary_search_by_key(&k, |t| t.0).ok().map(|i| row.terms[i].1)
}

/// `target + mult * src`, dropping `drop` and tiny coefficients.
fn combine(target: &Row, mult: f64, src: &Row, drop: usize) -> Vec<(usize, f64)> {
    let (a, b) = (&target.terms, &src.terms);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let scale = a.iter().chain(b.iter()).fold(0.0f64, |m, t| m.max(t.1.abs()));
    while i < a.len() || j < b.len() {
        let (k, v) = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            i += 1;
            a[i - 1]
        } else if i >= a.len() || b[j].0 < a[i].0 {
            j += 1;
            (b[j - 1].0, mult * b[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (a[i - 1].0, a[i - 1].1 + mult * b[j - 1].1)
        };
        if k != drop && v.abs() > DROP_TOL * scale.max(1.0) {
            out.push((k, v));
        }
    }
    out
}

pub(crate) fn presolve(mut f: RowForm) -> Presolved {
    let nv = f.lower.len();
    let mut alive = vec![true; f.rows.len()];
    let mut gone = vec![false; nv];
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (r, row) in f.rows.iter().enumerate() {
        for &(k, _) in &row.terms {
            occ[k].push(r);
        }
    }
    let free = |f: &RowForm, gone: &[bool], k: usize| !gone[k] && f.lower[k] == f64::NEG_INFINITY && f.upper[k] == f64::INFINITY;
    let mut post = Vec::new();

    let live_rows = |occ: &mut Vec<Vec<usize>>, rows: &[Row], alive: &[bool], k: usize| -> Vec<usize> {
        let mut v: Vec<usize> = occ[k].iter().copied().filter(|&r| alive[r] && coef(&rows[r], k).is_some()).collect();
        v.sort_unstable();
        v.dedup();
        occ[k] = v.clone();
        v
    };

    let mut changed = true;
    while changed {
        changed = false;

        // equality substitution
        for r in 0..f.rows.len() {
            if !alive[r] || !f.rows[r].eq {
                continue;
            }
            let maxc = f.rows[r].terms.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
            let pick = f.rows[r]
                .terms
                .iter()
                .filter(|&&(k, v)| free(&f, &gone, k) && v.abs() >= 0.1 * maxc)
                .min_by_key(|&&(k, _)| (occ[k].len(), k))
                .copied();
            let Some((k, a)) = pick else { continue };
            let src = f.rows[r].clone();
            for r2 in live_rows(&mut occ, &f.rows, &alive, k) {
                if r2 == r {
                    continue;
                }
                let a2 = coef(&f.rows[r2], k).unwrap();
                let mult = -a2 / a;
                let terms = combine(&f.rows[r2], mult, &src, k);
                for &(j, _) in &src.terms {
                    if j != k && coef(&f.rows[r2], j).is_none() {
                        occ[j].push(r2);
                    }
                }
                f.rows[r2].terms = terms;
                f.rows[r2].rhs += mult * src.rhs;
            }
            let ck = f.c[k];
            if ck != 0.0 {
                for &(j, v) in &src.terms {
                    if j != k {
                        f.c[j] -= ck * v / a;
                    }
                }
                f.c[k] = 0.0;
            }
            alive[r] = false;
            gone[k] = true;
            post.push(Post::Solve { var: k, terms: src.terms.iter().copied().filter(|t| t.0 != k).collect(), rhs: src.rhs, coef: a });
            changed = true;
        }

        // Fourier-Motzkin on single-sided free variables
        for k in 0..nv {
            if !free(&f, &gone, k) || f.c[k] != 0.0 {
                continue;
            }
            let rows = live_rows(&mut occ, &f.rows, &alive, k);
            if rows.iter().any(|&r| f.rows[r].eq) {
                continue;
            }
            let (pos, neg): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| coef(&f.rows[r], k).unwrap() > 0.0);
            if pos.is_empty() || neg.is_empty() {
                let kept = rows.iter().map(|&r| f.rows[r].clone()).collect();
                for &r in &rows {
                    alive[r] = false;
                }
                gone[k] = true;
                post.push(Post::Bound { var: k, rows: kept });
                changed = true;
                continue;
            }
            let (single, others) = if pos.len() == 1 {
                (pos[0], neg)
            } else if neg.len() == 1 {
                (neg[0], pos)
            } else {
                continue;
            };
            let s = f.rows[single].clone();
            let a_s = coef(&s, k).unwrap();
            for o in others {
                let a_o = coef(&f.rows[o], k).unwrap();
                // |a_s| * o + |a_o| * s cancels k
                let mut terms = combine(&f.rows[o], a_o.abs() / a_s.abs(), &s, k);
                let mut rhs = f.rows[o].rhs + a_o.abs() / a_s.abs() * s.rhs;
                let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
                if scale > 0.0 {
                    for t in terms.iter_mut() {
                        t.1 /= scale;
                    }
                    rhs /= scale;
                }
                for &(j, _) in &s.terms {
                    if j != k && coef(&f.rows[o], j).is_none() {
                        occ[j].push(o);
                    }
                }
                f.rows[o].terms = terms;
                f.rows[o].rhs = rhs;
            }
            alive[single] = false;
            gone[k] = true;
            post.push(Post::Solve { var: k, terms: s.terms.iter().copied().filter(|t| t.0 != k).collect(), rhs: s.rhs, coef: a_s });
            changed = true;
        }
    }

    let mut infeasible = false;
    let mut rows = Vec::new();
    for (r, row) in f.rows.iter().enumerate() {
        if !alive[r] {
            continue;
        }
        if row.terms.is_empty() {
            let tol = 1e-9 * (1.0 + row.rhs.abs());
            let ok = if row.eq { row.rhs.abs() <= tol } else { row.rhs <= tol };
            infeasible |= !ok;
            continue;
        }
        rows.push(row.clone());
    }
    let var_map: Vec<usize> = (0..nv).filter(|&k| !gone[k]).collect();
    let mut new_index = vec![usize::MAX; nv];
    for (i, &k) in var_map.iter().enumerate() {
        new_index[k] = i;
    }
    for row in rows.iter_mut() {
        for t in row.terms.iter_mut() {
            t.0 = new_index[t.0];
        }
    }
    let form = RowForm {
        lower: var_map.iter().map(|&k| f.lower[k]).collect(),
        upper: var_map.iter().map(|&k| f.upper[k]).collect(),
        c: var_map.iter().map(|&k| f.c[k]).collect(),
        rows,
    };
    Presolved { form, var_map, post, infeasible }
}

pub(crate) fn postsolve(p: &Presolved, reduced: &[f64], nv: usize) -> Vec<f64> {
    let mut x = vec![0.0; nv];
    for (i, &k) in p.var_map.iter().enumerate() {
        x[k] = reduced[i];
    }
    let rest = |terms: &[(usize, f64)], x: &[f64], skip: usize| -> f64 {
        terms.iter().filter(|t| t.0 != skip).map(|&(j, v)| v * x[j]).sum()
    };
    for step in p.post.iter().rev() {
        match step {
            Post::Solve { var, terms, rhs, coef } => x[*var] = (rhs - rest(terms, &x, *var)) / coef,
            Post::Bound { var, rows } => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for row in rows {
                    let a = coef(row, *var).unwrap();
                    let bound = (row.rhs - rest(&row.terms, &x, *var)) / a;
                    if a > 0.0 {
                        lo = lo.max(bound);
                    } else {
                        hi = hi.min(bound);
                    }
                }
                x[*var] = if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 };
            }
        }
    }
    x
}

//! Exhaustive search for the KL projection, independent of the closed form.

use super::MomentConstraint;
use crate::prob::ProbVector;
use crate::{Error, Result};

/// Coarse grid step of the oracle search before local refinement.
pub const ORACLE_GRID_STEP: f64 = 1e-3;

const REFINE_ROUNDS: usize = 4;
const REFINE_SPAN: i64 = 20;
const MAX_CLASSES: usize = 5;

/// Minimises `KL(q || p)` over distributions with `q(forget) = 0` and
/// `sum_y q(y) s_y = c` by grid search plus local refinement.
///
/// Classes where `p` is zero must also be zero in `q` (otherwise the KL is
/// infinite), so the search runs over the support of `p` minus the forget
/// class. Two coordinates are solved from the linear constraints and the
/// remaining ones (at most two, since `K <= 5`) are enumerated.
pub fn iproj_oracle(
    p: &ProbVector,
    forget_class: usize,
    scores: &[f64],
    constraint: MomentConstraint,
) -> Result<ProbVector> {
    let k = p.len();
    if k > MAX_CLASSES {
        return Err(Error::config(format!("oracle is exhaustive and limited to K <= 5, got {k}")));
    }
    if scores.len() != k {
        return Err(Error::Shape {
            expected: k,
            actual: scores.len(),
        });
    }
    if forget_class >= k {
        return Err(Error::usage(format!("forget class {forget_class} >= {k}")));
    }
    let support: Vec<usize> = (0..k)
        .filter(|&y| y != forget_class && p.get(y) > 0.0)
        .collect();
    if support.is_empty() {
        return Err(Error::InvalidInput("p has no retained mass".into()));
    }
    let c = constraint.c;
    let min = support.iter().map(|&y| scores[y]).fold(f64::INFINITY, f64::min);
    let max = support.iter().map(|&y| scores[y]).fold(f64::NEG_INFINITY, f64::max);
    if !(c >= min && c <= max) {
        return Err(Error::OutOfHull { target: c, min, max });
    }

    let mut out = vec![0.0; k];
    if min == max {
        // Every feasible q satisfies the constraint; the projection is p~.
        let total: f64 = support.iter().map(|&y| p.get(y)).sum();
        for &y in &support {
            out[y] = p.get(y) / total;
        }
        return ProbVector::new(out);
    }

    let lo_class = *support
        .iter()
        .min_by(|&&a, &&b| scores[a].total_cmp(&scores[b]))
        .expect("nonempty");
    let hi_class = *support
        .iter()
        .max_by(|&&a, &&b| scores[a].total_cmp(&scores[b]))
        .expect("nonempty");
    let free: Vec<usize> = support
        .iter()
        .copied()
        .filter(|&y| y != lo_class && y != hi_class)
        .collect();

    let problem = Problem {
        p: p.mass(),
        scores,
        c,
        lo: lo_class,
        hi: hi_class,
        free: &free,
    };
    let (best_t, best_kl) = problem.search();
    if !best_kl.is_finite() {
        return Err(Error::OutOfHull { target: c, min, max });
    }
    let q = problem.complete(&best_t).expect("best point is feasible");
    for (&y, &v) in free.iter().zip(&best_t) {
        out[y] = v;
    }
    out[lo_class] = q.0;
    out[hi_class] = q.1;
    ProbVector::from_weights(out)
}

struct Problem<'a> {
    p: &'a [f64],
    scores: &'a [f64],
    c: f64,
    lo: usize,
    hi: usize,
    free: &'a [usize],
}

impl Problem<'_> {
    /// Solves the two constrained coordinates given the free ones.
    fn complete(&self, t: &[f64]) -> Option<(f64, f64)> {
        let rest: f64 = t.iter().sum();
        if rest > 1.0 + 1e-12 {
            return None;
        }
        let r = (1.0 - rest).max(0.0);
        let m = self.c - self.free.iter().zip(t).map(|(&y, v)| self.scores[y] * v).sum::<f64>();
        let (s_lo, s_hi) = (self.scores[self.lo], self.scores[self.hi]);
        let q_hi = (m - s_lo * r) / (s_hi - s_lo);
        let q_lo = r - q_hi;
        const SLACK: f64 = 1e-12;
        if q_hi < -SLACK || q_lo < -SLACK {
            return None;
        }
        Some((q_lo.max(0.0), q_hi.max(0.0)))
    }

    fn kl(&self, t: &[f64]) -> f64 {
        let Some((q_lo, q_hi)) = self.complete(t) else {
            return f64::INFINITY;
        };
        let term = |q: f64, p: f64| if q > 0.0 { q * (q / p).ln() } else { 0.0 };
        let mut total = term(q_lo, self.p[self.lo]) + term(q_hi, self.p[self.hi]);
        for (&y, &v) in self.free.iter().zip(t) {
            total += term(v, self.p[y]);
        }
        total
    }

    fn search(&self) -> (Vec<f64>, f64) {
        let n = self.free.len();
        let steps = (1.0 / ORACLE_GRID_STEP).round() as i64;
        let mut best = (vec![0.0; n], self.kl(&vec![0.0; n]));
        let consider = |t: Vec<f64>, best: &mut (Vec<f64>, f64)| {
            let v = self.kl(&t);
            if v < best.1 {
                *best = (t, v);
            }
        };
        match n {
            0 => {}
            1 => {
                for i in 0..=steps {
                    consider(vec![i as f64 / steps as f64], &mut best);
                }
            }
            _ => {
                for i in 0..=steps {
                    for j in 0..=(steps - i) {
                        consider(vec![i as f64 / steps as f64, j as f64 / steps as f64], &mut best);
                    }
                }
            }
        }

        let mut h = ORACLE_GRID_STEP;
        for _ in 0..REFINE_ROUNDS {
            let centre = best.0.clone();
            let fine = h / 10.0;
            let offsets = || (-REFINE_SPAN..=REFINE_SPAN).map(move |o| o as f64 * fine);
            match n {
                0 => {}
                1 => {
                    for a in offsets() {
                        let t = centre[0] + a;
                        if (0.0..=1.0).contains(&t) {
                            consider(vec![t], &mut best);
                        }
                    }
                }
                _ => {
                    for a in offsets() {
                        for b in offsets() {
                            let t = vec![centre[0] + a, centre[1] + b];
                            if t.iter().all(|v| (0.0..=1.0).contains(v)) {
                                consider(t, &mut best);
                            }
                        }
                    }
                }
            }
            h = fine;
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trw::{moment, reweight, solve_beta, tilt_scores};

    #[test]
    fn matches_tilt_at_unit_beta() {
        let p = ProbVector::new(vec![0.3, 0.35, 0.2, 0.15]).unwrap();
        let s = [0.0, 0.1, 0.6, 0.3];
        let pt = reweight(&p, 0).unwrap();
        let c = moment(&pt, &s, 1.0).unwrap();
        let oracle = iproj_oracle(&p, 0, &s, MomentConstraint { c }).unwrap();
        let beta = solve_beta(&pt, &s, MomentConstraint { c }, 1e-12).unwrap();
        let closed = tilt_scores(&pt, &s, beta).unwrap();
        assert!(oracle.max_abs_diff(&closed) < 1e-3);
    }

    #[test]
    fn unconstrained_optimum_is_reweighted_p() {
        let p = ProbVector::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        let s = [0.0, 0.4, 0.1, 0.3, 0.2];
        let pt = reweight(&p, 0).unwrap();
        let c = moment(&pt, &s, 0.0).unwrap();
        let oracle = iproj_oracle(&p, 0, &s, MomentConstraint { c }).unwrap();
        assert!(oracle.max_abs_diff(&pt) < 1e-3);
    }

    #[test]
    fn point_mass_is_returned_when_feasible() {
        let p = ProbVector::new(vec![0.4, 0.0, 0.6, 0.0]).unwrap();
        let s = [0.0, 0.2, 0.5, 0.3];
        let q = iproj_oracle(&p, 0, &s, MomentConstraint { c: 0.5 }).unwrap();
        assert_eq!(q.mass(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            iproj_oracle(&p, 0, &s, MomentConstraint { c: 0.3 }),
            Err(Error::OutOfHull { .. })
        ));
    }

    #[test]
    fn infeasible_and_oversized_inputs() {
        let p = ProbVector::uniform(3);
        assert!(matches!(
            iproj_oracle(&p, 0, &[0.0, 0.2, 0.4], MomentConstraint { c: 0.5 }),
            Err(Error::OutOfHull { .. })
        ));
        assert!(matches!(
            iproj_oracle(&ProbVector::uniform(6), 0, &[0.0; 6], MomentConstraint { c: 0.0 }),
            Err(Error::Config(_))
        ));
    }
}

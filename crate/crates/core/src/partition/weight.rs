//! Body weights `w = l + α·r` and the search for `α`.
//!
//! `l` counts a body's interactions with sources on its own rank and `r`
//! those with remote sources. `α` is tuned across repartitioning epochs by a
//! golden-section search over `[0, ALPHA_MAX]` that is replayed from the
//! history of `(α, runtime)` measurements, so no search state needs to be
//! kept between calls.

use alloc::vec::Vec;

use crate::math;

pub const ALPHA_MAX: f64 = 2.0;
/// Number of runtime measurements the search may request.
pub const PROBE_BUDGET: usize = 12;

pub fn compute_weight(local: f64, remote: f64, alpha: f64) -> f64 {
    local + alpha * remote
}

/// Cost recorded for `alpha`, matched to within `1e-9`.
fn lookup(history: &[(f64, f64)], alpha: f64) -> Option<f64> {
    history.iter().find(|(a, _)| (a - alpha).abs() <= 1e-9).map(|&(_, c)| c)
}

/// The `α` to run next given all measurements so far.
///
/// Probes follow golden-section search on `[0, ALPHA_MAX]`. Once the budget
/// is used up, the best measured `α` is returned (earliest on ties).
pub fn update_alpha(history: &[(f64, f64)]) -> f64 {
    let g = (math::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, ALPHA_MAX);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut probes = 0;
    let best = || {
        history
            .iter()
            .fold(None, |acc: Option<(f64, f64)>, &(al, co)| match acc {
                Some((_, bc)) if bc <= co => acc,
                _ => Some((al, co)),
            })
            .map_or(1.0, |(al, _)| al)
    };
    let Some(mut fc) = lookup(history, c) else { return c };
    probes += 1;
    let Some(mut fd) = lookup(history, d) else { return d };
    probes += 1;
    loop {
        if probes >= PROBE_BUDGET {
            return best();
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            match lookup(history, c) {
                Some(v) => fc = v,
                None => return c,
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            match lookup(history, d) {
                Some(v) => fd = v,
                None => return d,
            }
        }
        probes += 1;
    }
}

/// Run the search to completion against `cost`, returning the history.
pub fn minimise_alpha(mut cost: impl FnMut(f64) -> f64) -> Vec<(f64, f64)> {
    let mut history = Vec::new();
    for _ in 0..PROBE_BUDGET {
        let a = update_alpha(&history);
        if lookup(&history, a).is_some() {
            break;
        }
        history.push((a, cost(a)));
    }
    history
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert_eq!(compute_weight(10.0, 5.0, 0.0), 10.0);
        assert_eq!(compute_weight(10.0, 5.0, 1.0), 15.0);
    }

    #[test]
    fn bootstrap_probe_brackets() {
        let a = update_alpha(&[(0.0, 3.0)]);
        assert!(a > 0.0 && a < ALPHA_MAX);
    }

    #[test]
    fn finds_unimodal_minimum() {
        let h = minimise_alpha(|a| (a - 0.7) * (a - 0.7) + 1.0);
        assert!(h.len() <= PROBE_BUDGET);
        let a = update_alpha(&h);
        assert!((a - 0.7).abs() < 0.05, "{a}");
    }

    #[test]
    fn flat_cost_is_stable() {
        let h = minimise_alpha(|_| 5.0);
        let a = update_alpha(&h);
        assert_eq!(a, update_alpha(&h));
        assert_eq!(a, h[0].0);
    }
}

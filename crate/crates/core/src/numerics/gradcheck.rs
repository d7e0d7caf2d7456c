use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamSet, Tape, Var};
use crate::{Error, Result};

/// Which coordinates of each parameter tensor to probe.
#[derive(Clone, Copy, Debug)]
pub enum CoordSample {
    All,
    /// Up to `per_param` coordinates per tensor, drawn with `seed`.
    PerParam {
        per_param: usize,
        seed: u64,
    },
}

/// Below this `|analytic| + |numeric|` a coordinate's gradient is treated as
/// zero: relative error is meaningless there, so it is judged by absolute
/// error instead.
pub const ZERO_GRADIENT: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Maximum relative error over coordinates with a nonzero gradient.
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// Coordinates under [`ZERO_GRADIENT`] and their largest absolute error.
    pub zero_coords: usize,
    pub max_abs_error_zero: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compares tape gradients of `loss_fn` against central differences.
///
/// Relative error per coordinate is
/// `|analytic − numeric| / (|analytic| + |numeric|)`; the report carries the
/// maximum over probed coordinates above [`ZERO_GRADIENT`].
pub fn grad_check<F>(
    params: &ParamSet,
    eps: f64,
    coords: CoordSample,
    loss_fn: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Check(format!("eps {eps} outside [1e-7, 1e-3]")));
    }
    let eval = |ps: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new(ps);
        let loss = loss_fn(&mut tape)?;
        Ok(tape.scalar(loss))
    };

    let analytic = {
        let mut tape = Tape::new(params);
        let loss = loss_fn(&mut tape)?;
        tape.backward(loss)?
    };
    let base_a = eval(params)?;
    let base_b = eval(params)?;
    if base_a.to_bits() != base_b.to_bits() {
        return Err(Error::Check(format!(
            "loss is not deterministic: {base_a} vs {base_b}"
        )));
    }

    let mut rng = match coords {
        CoordSample::PerParam { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        CoordSample::All => None,
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        zero_coords: 0,
        max_abs_error_zero: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    let mut probe = params.clone();
    for (id, name, tensor) in params.iter() {
        let n = tensor.len();
        let picks: Vec<usize> = match (coords, rng.as_mut()) {
            (CoordSample::PerParam { per_param, .. }, Some(rng)) if per_param < n => {
                let mut v = sample(rng, n, per_param).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for idx in picks {
            let orig = tensor.values()[idx];
            probe.get_mut(id).values_mut()[idx] = orig + eps;
            let up = eval(&probe)?;
            probe.get_mut(id).values_mut()[idx] = orig - eps;
            let down = eval(&probe)?;
            probe.get_mut(id).values_mut()[idx] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.get(id)[idx];
            let scale = a.abs() + numeric.abs();
            report.coords_checked += 1;
            if scale < ZERO_GRADIENT {
                report.zero_coords += 1;
                report.max_abs_error_zero = report.max_abs_error_zero.max((a - numeric).abs());
                continue;
            }
            let rel = (a - numeric).abs() / scale;
            if rel > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = rel;
                report.worst_param = name.to_string();
                report.worst_index = idx;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ParamId, Segment, Tensor};
    use rand::Rng;

    fn single(v: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.push("x", Tensor::scalar(v));
        ps
    }

    #[test]
    fn square_at_three() {
        let ps = single(3.0);
        let r = grad_check(&ps, 1e-5, CoordSample::All, |t| {
            let x = t.param(ParamId(0));
            let y = t.mul(x, x)?;
            Ok(t.sum(y))
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        assert!((r.worst_analytic - 6.0).abs() < 1e-12);
    }

    #[test]
    fn constant_fn_has_zero_error() {
        let ps = single(3.0);
        let r = grad_check(&ps, 1e-5, CoordSample::All, |t| {
            let x = t.param(ParamId(0));
            let s = t.sum(x);
            Ok(t.scale(s, 0.0))
        })
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.worst_analytic, 0.0);
        assert_eq!(r.worst_numeric, 0.0);
    }

    #[test]
    fn eps_range_enforced() {
        let ps = single(1.0);
        let f = |t: &mut Tape| Ok(t.param(ParamId(0)));
        assert!(matches!(
            grad_check(&ps, 1e-2, CoordSample::All, f),
            Err(Error::Check(_))
        ));
        assert!(grad_check(&ps, 1e-8, CoordSample::All, f).is_err());
    }

    #[test]
    fn nondeterministic_fn_is_rejected() {
        use std::cell::Cell;
        let ps = single(1.0);
        let calls = Cell::new(0u32);
        let r = grad_check(&ps, 1e-5, CoordSample::All, |t| {
            calls.set(calls.get() + 1);
            let x = t.param(ParamId(0));
            let c = t.constant(&Tensor::scalar(f64::from(calls.get())));
            let y = t.add(x, c)?;
            Ok(t.sum(y))
        });
        assert!(matches!(r, Err(Error::Check(_))));
    }

    fn random_params(seed: u64, shapes: &[(usize, usize)]) -> ParamSet {
        random_params_in(seed, 2.0, shapes)
    }

    // Composed checks keep pre-activations out of GELU's flat tail, where the
    // true derivative (~1e-11) sits below what central differences resolve.
    fn random_params_in(seed: u64, bound: f64, shapes: &[(usize, usize)]) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        for (i, &(r, c)) in shapes.iter().enumerate() {
            let v = (0..r * c)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            ps.push(format!("p{i}"), Tensor::matrix(r, c, v).unwrap());
        }
        ps
    }

    fn check(ps: &ParamSet, f: impl Fn(&mut Tape) -> Result<Var>) {
        check_within(ps, 1e-6, f)
    }

    fn check_within(ps: &ParamSet, tol: f64, f: impl Fn(&mut Tape) -> Result<Var>) {
        let r = grad_check(ps, 1e-5, CoordSample::All, f).unwrap();
        assert!(r.max_rel_error < tol, "{r:?}");
    }

    // Each primitive against central differences on inputs in [-2, 2].

    #[test]
    fn primitive_matmul_bias_gelu() {
        for seed in 0..3 {
            let ps = random_params_in(seed, 0.8, &[(3, 4), (4, 2), (1, 2)]);
            check(&ps, |t| {
                let a = t.param(ParamId(0));
                let b = t.param(ParamId(1));
                let c = t.param(ParamId(2));
                let h = t.matmul(a, b)?;
                let h = t.add_bias(h, c)?;
                let h = t.gelu(h);
                let h = t.mul(h, h)?;
                Ok(t.sum(h))
            });
        }
    }

    #[test]
    fn primitive_layer_norm() {
        for seed in 0..3 {
            let ps = random_params(seed, &[(3, 5), (1, 5), (1, 5), (3, 5)]);
            check(&ps, |t| {
                let x = t.param(ParamId(0));
                let g = t.param(ParamId(1));
                let b = t.param(ParamId(2));
                let w = t.param(ParamId(3));
                let y = t.layer_norm(x, g, b)?;
                let y = t.mul(y, w)?;
                Ok(t.sum(y))
            });
        }
    }

    #[test]
    fn primitive_attention_and_segment_mean() {
        for seed in 0..3 {
            let ps = random_params(seed, &[(5, 12), (5, 4)]);
            let segs = vec![Segment { start: 0, len: 3 }, Segment { start: 3, len: 2 }];
            check(&ps, |t| {
                let qkv = t.param(ParamId(0));
                let w = t.param(ParamId(1));
                let o = t.causal_attention(qkv, 2, segs.clone())?;
                let o = t.mul(o, w)?;
                let m = t.segment_mean(o, segs.clone())?;
                let m = t.mul(m, m)?;
                Ok(t.sum(m))
            });
        }
    }

    #[test]
    fn primitive_losses() {
        for seed in 0..3 {
            let ps = random_params(seed, &[(3, 4)]);
            check(&ps, |t| {
                let z = t.param(ParamId(0));
                let a = t.softmax_cross_entropy(z, vec![1, 0, 3])?;
                let b = t.bce_with_logits(z, (0..12).map(|i| f64::from(i % 3 == 0)).collect())?;
                let c = t.sigmoid_nll(z, vec![2, 2, 0])?;
                let ab = t.add(a, b)?;
                let ab = t.scale(ab, 0.5);
                t.add(ab, c)
            });
        }
    }

    #[test]
    fn primitive_gathers() {
        let ps = random_params(9, &[(6, 3), (3, 3)]);
        check(&ps, |t| {
            let g = t.gather(ParamId(0), vec![1, 4, 1])?;
            let m = t.gather_mean(ParamId(0), vec![vec![0, 2], vec![5], vec![]])?;
            let w = t.param(ParamId(1));
            let s = t.add(g, m)?;
            let s = t.mul(s, w)?;
            let s = t.gelu(s);
            Ok(t.sum(s))
        });
    }

    #[test]
    fn random_three_layer_composition() {
        let ps = random_params_in(11, 0.8, &[(2, 4), (4, 6), (1, 6), (6, 6), (1, 6), (6, 3)]);
        // Some composed gradients are ~1e-6, so the difference quotient's
        // roundoff alone is ~1e-6 relative there.
        check_within(&ps, 1e-5, |t| {
            let x = t.param(ParamId(0));
            let w1 = t.param(ParamId(1));
            let b1 = t.param(ParamId(2));
            let w2 = t.param(ParamId(3));
            let b2 = t.param(ParamId(4));
            let w3 = t.param(ParamId(5));
            let h = t.matmul(x, w1)?;
            let h = t.add_bias(h, b1)?;
            let h = t.gelu(h);
            let h = t.matmul(h, w2)?;
            let h = t.add_bias(h, b2)?;
            let h = t.gelu(h);
            let z = t.matmul(h, w3)?;
            t.softmax_cross_entropy(z, vec![2, 0])
        });
    }
}

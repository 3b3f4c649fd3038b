use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{Graph, Tensor, Var};

/// Compare reverse-mode gradients against central differences.
///
/// `build` receives a fresh graph and one leaf per entry of `inputs` and
/// returns the op's output. Non-scalar outputs are reduced with a fixed
/// random projection. Returns the maximum over all input coordinates of
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e−8)`.
pub fn grad_check<F>(inputs: &[Tensor], eps: f64, build: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let projection = {
        let mut g = Graph::new();
        let vars = leaves(&mut g, inputs)?;
        let out = build(&mut g, &vars)?;
        let shape = g.value(out).shape().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
        Tensor::from_fn(&shape, |_| rng.random_range(-1.0..1.0))
    };

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars = leaves(&mut g, values)?;
        let out = build(&mut g, &vars)?;
        let s = g.dot(out, projection.clone())?;
        Ok(g.value(s).data()[0])
    };

    let analytic: Vec<Tensor> = {
        let mut g = Graph::new();
        let vars = leaves(&mut g, inputs)?;
        let out = build(&mut g, &vars)?;
        let s = g.dot(out, projection.clone())?;
        let grads = g.backward(s)?;
        vars.iter()
            .zip(inputs)
            .map(|(&v, t)| {
                grads
                    .wrt(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(t.shape()))
            })
            .collect()
    };

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (i, a) in analytic.iter().enumerate() {
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + eps;
            let plus = eval(&probe)?;
            probe[i].data_mut()[j] = orig - eps;
            let minus = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = a.data()[j];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

fn leaves(g: &mut Graph, inputs: &[Tensor]) -> Result<Vec<Var>> {
    inputs.iter().map(|t| g.input(t.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn linear_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = [
            random(&[3, 5], &mut rng),
            random(&[4, 5], &mut rng),
            random(&[4], &mut rng),
        ];
        let err = grad_check(&inputs, 1e-6, |g, v| g.linear(v[0], v[1], v[2])).unwrap();
        assert!(err < 1e-6, "linear rel err {err}");
    }

    #[test]
    fn conv3d_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs = [
            random(&[2, 4, 5, 5], &mut rng),
            random(&[3, 2, 3, 3, 3], &mut rng),
            random(&[3], &mut rng),
        ];
        let err = grad_check(&inputs, 1e-6, |g, v| {
            g.conv3d(v[0], v[1], v[2], [1, 2, 2], [1, 1, 1])
        })
        .unwrap();
        assert!(err < 1e-5, "conv3d rel err {err}");
    }

    #[test]
    fn relu_away_from_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::from_fn(&[20], |_| {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        });
        let err = grad_check(&[x], 1e-6, |g, v| g.relu(v[0])).unwrap();
        assert!(err < 1e-6, "relu rel err {err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        use crate::nn::graph::CustomOp;
        struct Doubler;
        impl CustomOp for Doubler {
            fn name(&self) -> &'static str {
                "bad_double"
            }
            fn backward(&self, _inputs: &[&Tensor], grad_out: &Tensor) -> Result<Vec<Tensor>> {
                // deliberately wrong: true derivative is 2
                Ok(vec![grad_out.clone()])
            }
        }
        let x = Tensor::from_vec(&[3], vec![0.3, -0.2, 0.9]).unwrap();
        let err = grad_check(&[x], 1e-6, |g, v| {
            let out = g.value(v[0]).map(|a| 2.0 * a);
            g.custom(&[v[0]], out, Box::new(Doubler))
        })
        .unwrap();
        assert!(err > 0.4);
    }
}

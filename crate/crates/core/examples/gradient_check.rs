//! Compares reverse-mode gradients of a small classifier-shaped network with
//! central finite differences in 64-bit arithmetic.

use ocsr::nn::{softmax_cross_entropy, ConvSpec, Layer, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(net: &Network<f64>, x: &Tensor<f64>) -> f64 {
    softmax_cross_entropy(net.forward(x).unwrap().data(), 1).unwrap().0
}

fn main() -> ocsr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net: Network<f64> = Network::new(vec![
        Layer::conv("depthconv1", ConvSpec::separable3x3(2, 4), &mut rng)?,
        Layer::Relu,
        Layer::conv("conv2", ConvSpec::same3x3(4, 4, 2), &mut rng)?,
        Layer::Relu,
        Layer::GlobalMaxPool,
        Layer::conv("last", ConvSpec::pointwise(4, 3), &mut rng)?,
    ]);
    let x = Tensor::from_vec(&[2, 10, 10], (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect())?;

    let out = net.forward_record(&x)?;
    let (_, g) = softmax_cross_entropy(out.data(), 1)?;
    let mut grads = net.zero_gradients();
    net.backward(&Tensor::from_vec(out.dims(), g)?, &mut grads)?;

    let eps = 1e-4;
    let names: Vec<String> = net.params().into_iter().map(|(n, _)| n).collect();
    for (p, name) in names.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..grads[p].len() {
            let orig = net.params()[p].1.data()[i];
            net.params_mut()[p].data_mut()[i] = orig + eps;
            let up = loss(&net, &x);
            net.params_mut()[p].data_mut()[i] = orig - eps;
            let down = loss(&net, &x);
            net.params_mut()[p].data_mut()[i] = orig;
            let (a, n) = (grads[p].data()[i], (up - down) / (2.0 * eps));
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
        println!("{name:<28} {:>4} values  max relative error {worst:.2e}", grads[p].len());
    }
    Ok(())
}

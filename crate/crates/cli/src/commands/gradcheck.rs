use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stainscope::ae::{check_gradients, gradient_check, AeModel, GradCheckOptions, GradCheckReport, Layer, LayerSpec, Sequential, Tensor};

use crate::error::{CliError, CliResult};
use crate::pipeline::ensure_dir;
use crate::report::write_json;

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("nonzero shape")
}

#[derive(Serialize)]
struct Entry {
    name: &'static str,
    report: GradCheckReport,
}

fn layer_check(spec: LayerSpec, x: &Tensor<f64>, tol: f64, seed: u64, rng: &mut ChaCha8Rng) -> stainscope::Result<GradCheckReport> {
    let mut net = Sequential::<f64>::from_specs(&[spec], seed)?;
    if let Layer::BatchNorm { gamma, beta, .. } = &mut net.layers_mut()[0] {
        gamma.data_mut().iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
        beta.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let out = net.forward(x, stainscope::ae::Mode::Train)?;
    let target = uniform(out.shape(), -0.5, 0.5, rng);
    let opts = GradCheckOptions { seed, ..Default::default() };
    check_gradients(&net, x, &target, tol, &opts)
}

pub fn run(size: usize, tol: f64, out_dir: Option<&Path>, seed: u64) -> CliResult<()> {
    if size < 4 || !size.is_multiple_of(4) {
        return Err(CliError::Usage(format!("--size must be a positive multiple of 4, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x3 = uniform(&[2, 3, size, size], 0.0, 1.0, &mut rng);
    let half = uniform(&[2, 4, size / 2, size / 2], -1.0, 1.0, &mut rng);
    // Inputs at least 0.01 from the LeakyReLU kink, either sign.
    let mut kinky = uniform(&[2, 3, size, size], 0.01, 1.0, &mut rng);
    for v in kinky.data_mut() {
        if rng.random_bool(0.5) {
            *v = -*v;
        }
    }
    let wide = uniform(&[2, 3, size, size], -4.0, 4.0, &mut rng);

    let mut entries = vec![
        Entry { name: "conv", report: layer_check(LayerSpec::conv(3, 4, 1), &x3, tol, seed, &mut rng)? },
        Entry { name: "conv_stride2", report: layer_check(LayerSpec::conv(3, 4, 2), &x3, tol, seed, &mut rng)? },
        Entry { name: "tconv", report: layer_check(LayerSpec::tconv(4, 3), &half, tol, seed, &mut rng)? },
        Entry { name: "batchnorm", report: layer_check(LayerSpec::batch_norm(3), &wide, tol, seed, &mut rng)? },
        Entry { name: "leaky_relu", report: layer_check(LayerSpec::leaky_relu(0.01), &kinky, tol, seed, &mut rng)? },
        Entry { name: "sigmoid", report: layer_check(LayerSpec::sigmoid(), &wide, tol, seed, &mut rng)? },
    ];
    let model = AeModel::<f64>::new(seed);
    entries.push(Entry { name: "autoencoder", report: gradient_check(&model, &x3, tol)? });

    let mut worst = 0.0f64;
    let mut passed = true;
    for e in &entries {
        let checked: usize = e.report.blocks.iter().map(|b| b.checked).sum();
        println!(
            "{:<13} {}  max rel err {:.3e}  ({checked} entries, {} blocks)",
            e.name,
            if e.report.passed { "pass" } else { "FAIL" },
            e.report.max_rel_error,
            e.report.blocks.len()
        );
        worst = worst.max(e.report.max_rel_error);
        passed &= e.report.passed;
    }
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join("gradcheck.json"), &entries)?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::GradCheck { max: worst, tol })
    }
}

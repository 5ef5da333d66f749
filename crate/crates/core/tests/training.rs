use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stainscope::ae::{encode_net, train_on_images, AeModel, TrainConfig};
use stainscope::imaging::Image;
use stainscope::Error;

/// Smooth two-tone images with mild noise.
fn samples(n: usize, side: usize, seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: [f64; 3] = [rng.random_range(40.0..200.0), rng.random_range(40.0..200.0), rng.random_range(80.0..240.0)];
            let fx = rng.random_range(0.05..0.3);
            let mut data = Vec::with_capacity(side * side * 3);
            for y in 0..side {
                for x in 0..side {
                    let w = 0.5 + 0.5 * ((x as f64 * fx).sin() * (y as f64 * fx).cos());
                    for c in a {
                        let v = c * (0.6 + 0.4 * w) + rng.random_range(-4.0..4.0);
                        data.push(v.clamp(0.0, 255.0) as u8);
                    }
                }
            }
            Image::from_raw(side, side, 3, data).unwrap()
        })
        .collect()
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        batch_size: 3,
        max_epochs: 50,
        patience: 50,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn loss_falls_below_a_quarter_in_fifty_epochs() {
    let imgs = samples(10, 32, 1);
    let refs: Vec<&Image> = imgs.iter().collect();
    let (_, log) = train_on_images(&refs, &tiny_config()).unwrap();
    let last = log.epochs.last().unwrap().train_loss;
    println!("initial {:.5} final {:.5}", log.initial_train_loss, last);
    assert_eq!(log.epochs.len(), 50);
    assert!(last < 0.25 * log.initial_train_loss);
    assert_eq!((log.n_train, log.n_val), (9, 1));
    assert!(log.to_csv().starts_with("epoch,train_loss,val_loss,best\n1,"));
}

#[test]
fn fixed_seed_gives_identical_weights_for_any_worker_count() {
    let imgs = samples(6, 16, 2);
    let refs: Vec<&Image> = imgs.iter().collect();
    let cfg = TrainConfig {
        max_epochs: 4,
        patience: 4,
        ..tiny_config()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let (m, log) = train_on_images(&refs, &cfg).unwrap();
            (encode_net(m.net()), log)
        })
    };
    let (a, la) = run(1);
    let (b, lb) = run(1);
    let (c, lc) = run(4);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(la, lb);
    assert_eq!(la, lc);
}

#[test]
fn early_stopping_returns_best_epoch() {
    let imgs = samples(5, 16, 4);
    let refs: Vec<&Image> = imgs.iter().collect();
    let cfg = TrainConfig {
        max_epochs: 30,
        patience: 1,
        learning_rate: 0.05,
        ..tiny_config()
    };
    let (_, log) = train_on_images(&refs, &cfg).unwrap();
    let best = log.best().unwrap().val_loss;
    assert!(log.epochs.iter().all(|r| r.val_loss >= best));
    if log.stopped_early {
        assert_eq!(log.epochs.len(), log.best_epoch + 1);
    }
}

#[test]
fn rejects_empty_input_and_bad_config() {
    assert!(matches!(train_on_images(&[], &TrainConfig::default()), Err(Error::InvalidInput(_))));
    let img = Image::filled(16, 16, [10, 20, 30]);
    let bad = TrainConfig {
        val_fraction: 1.0,
        ..Default::default()
    };
    assert!(train_on_images(&[&img], &bad).is_err());
    let bad = TrainConfig {
        patience: 200,
        ..Default::default()
    };
    assert!(train_on_images(&[&img], &bad).is_err());
}

#[test]
fn untrained_model_outputs_are_finite() {
    let m = AeModel::<f32>::new(0);
    let imgs = samples(1, 256, 5);
    let x = stainscope::ae::images_to_tensor::<f32>(&[&imgs[0]]).unwrap();
    let y = m.reconstruct(&x).unwrap();
    assert!(y.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
}

use ndarray::{Array2, Array3};
use qdml::dataset::SampleSet;
use qdml::lstm::{finite_difference_check, train, Architecture, DropoutMask, LstmNetwork, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arch(hidden: Vec<usize>, l: usize, d: usize) -> Architecture {
    Architecture {
        input_dim: d,
        hidden,
        output_dim: d,
        window_length: l,
    }
}

fn random_set(n: usize, l: usize, d: usize, rng: &mut ChaCha8Rng) -> SampleSet {
    SampleSet {
        inputs: Array3::from_shape_fn((n, l, d), |_| rng.random_range(-1.0..1.0)),
        targets: Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0)),
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let net = LstmNetwork::new(arch(vec![8, 8], 5, 3), &mut rng).unwrap();
    let data = random_set(7, 5, 3, &mut rng);
    let check = finite_difference_check(&net, &data, 250, 1e-5, 1e-8, &mut rng).unwrap();
    assert_eq!(check.probed, 250);
    assert!(check.max_relative_error < 1e-4, "{check:?}");
}

#[test]
fn masked_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut net = LstmNetwork::new(arch(vec![6, 8], 4, 1), &mut rng).unwrap();
    net.set_mask(Some(DropoutMask::random(8, 0.5, &mut rng).unwrap())).unwrap();
    let data = random_set(5, 4, 1, &mut rng);
    // masked units have exactly zero gradient both ways, so the floor only
    // guards the 0/0 case
    let check = finite_difference_check(&net, &data, 200, 1e-5, 1e-8, &mut rng).unwrap();
    assert!(check.max_relative_error < 1e-4, "{check:?}");
}

#[test]
fn learns_a_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut net = LstmNetwork::new(arch(vec![8, 8], 4, 1), &mut rng).unwrap();
    let mut data = random_set(500, 4, 1, &mut rng);
    data.targets.fill(0.37);
    let val = data.select(&(0..30).collect::<Vec<_>>());
    let report = train(&mut net, &data, &val, &TrainConfig::default()).unwrap();
    let final_loss = net.loss(&data).unwrap();
    assert!(final_loss < 1e-6, "final loss {final_loss:e} after {} epochs", report.train_loss.len());
}

#[test]
fn full_batch_loss_does_not_increase() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut net = LstmNetwork::new(arch(vec![6, 6], 4, 2), &mut rng).unwrap();
    let data = random_set(50, 4, 2, &mut rng);
    let cfg = TrainConfig {
        learning_rate: 1e-4,
        max_epochs: 60,
        ..Default::default()
    };
    let report = train(&mut net, &data, &data, &cfg).unwrap();
    for w in report.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn identity_network_continues_a_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut net = LstmNetwork::new(arch(vec![16, 16], 3, 1), &mut rng).unwrap();
    let mut data = random_set(1000, 3, 1, &mut rng);
    for k in 0..data.len() {
        data.targets[[k, 0]] = data.inputs[[k, 2, 0]];
    }
    let val = random_set(100, 3, 1, &mut rng);
    let val = SampleSet {
        targets: val.inputs.slice(ndarray::s![.., 2, ..]).to_owned(),
        inputs: val.inputs,
    };
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        ..Default::default()
    };
    train(&mut net, &data, &val, &cfg).unwrap();
    for c in [-0.5, 0.1, 0.6] {
        let seed = Array2::from_elem((3, 1), c);
        let path = net.predict_autoregressive(seed.view(), 20).unwrap();
        let drift = path.iter().map(|y| (y - c).abs()).fold(0.0, f64::max);
        assert!(drift < 0.05, "constant {c}: drift {drift}");
    }
}

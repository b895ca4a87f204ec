mod support;

use pisa_core::data::SetBatch;
use pisa_core::model::{EncoderKind, PisaConfig, PisaModel};
use pisa_core::tape::{Tape, Var};
use pisa_core::train::ReconLoss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{model_gradcheck, op_gradcheck, random_tensor, weighted_sum, FD_REL_TOL};

const INSTANCES: u64 = 20;

fn check<F>(name: &str, mut instance: F)
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let err = instance(&mut rng);
        assert!(err < FD_REL_TOL, "{name}, instance {seed}: relative error {err:e}");
    }
}

/// A random matrix shape with at most 32 entries.
fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..=4), rng.random_range(1..=8))
}

#[test]
fn matmul_and_matvec() {
    check("matmul", |rng| {
        let (m, k) = dims(rng);
        let n = rng.random_range(1..=4);
        let ins = [random_tensor(rng, &[m, k]), random_tensor(rng, &[k, n])];
        op_gradcheck(&ins, |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            weighted_sum(t, y, 1)
        })
    });
    check("matvec", |rng| {
        let (m, k) = dims(rng);
        let ins = [random_tensor(rng, &[m, k]), random_tensor(rng, &[k])];
        op_gradcheck(&ins, |t, v| {
            let y = t.matvec(v[0], v[1]).unwrap();
            weighted_sum(t, y, 2)
        })
    });
}

#[test]
fn linear_with_and_without_bias() {
    check("linear", |rng| {
        let (rows, inp) = dims(rng);
        let out = rng.random_range(1..=4);
        let ins = [random_tensor(rng, &[rows, inp]), random_tensor(rng, &[out, inp]), random_tensor(rng, &[out])];
        op_gradcheck(&ins, |t, v| {
            let y = t.linear(v[0], v[1], Some(v[2])).unwrap();
            weighted_sum(t, y, 3)
        })
    });
    check("linear, vector input, no bias", |rng| {
        let (out, inp) = dims(rng);
        let ins = [random_tensor(rng, &[inp]), random_tensor(rng, &[out, inp])];
        op_gradcheck(&ins, |t, v| {
            let y = t.linear(v[0], v[1], None).unwrap();
            weighted_sum(t, y, 4)
        })
    });
}

#[test]
fn elementwise_ops() {
    type Binary = fn(&mut Tape<'_, f64>, Var, Var) -> Var;
    let binary: [(&str, Binary); 3] = [
        ("add", |t, a, b| t.add(a, b).unwrap()),
        ("sub", |t, a, b| t.sub(a, b).unwrap()),
        ("mul", |t, a, b| t.mul(a, b).unwrap()),
    ];
    for (name, op) in binary {
        check(name, |rng| {
            let (m, n) = dims(rng);
            let ins = [random_tensor(rng, &[m, n]), random_tensor(rng, &[m, n])];
            op_gradcheck(&ins, |t, v| {
                let y = op(t, v[0], v[1]);
                weighted_sum(t, y, 5)
            })
        });
    }
    type Unary = fn(&mut Tape<'_, f64>, Var) -> Var;
    let unary: [(&str, Unary); 5] = [
        ("scale", |t, a| t.scale(a, -1.7)),
        ("square", |t, a| t.square(a)),
        ("relu", |t, a| t.relu(a)),
        ("sigmoid", |t, a| t.sigmoid(a)),
        ("reshape", |t, a| {
            let n = t.shape(a).iter().product();
            t.reshape(a, vec![n]).unwrap()
        }),
    ];
    for (name, op) in unary {
        check(name, |rng| {
            let (m, n) = dims(rng);
            let ins = [random_tensor(rng, &[m, n])];
            op_gradcheck(&ins, |t, v| {
                let y = op(t, v[0]);
                weighted_sum(t, y, 6)
            })
        });
    }
}

#[test]
fn reductions() {
    check("sum", |rng| {
        let (m, n) = dims(rng);
        op_gradcheck(&[random_tensor(rng, &[m, n])], |t, v| {
            let sq = t.square(v[0]);
            t.sum(sq)
        })
    });
    check("mean", |rng| {
        let (m, n) = dims(rng);
        op_gradcheck(&[random_tensor(rng, &[m, n])], |t, v| {
            let sq = t.square(v[0]);
            t.mean(sq)
        })
    });
    check("reduce_sum", |rng| {
        let k = rng.random_range(1..=8);
        let count = rng.random_range(1..=4);
        let ins: Vec<_> = (0..count).map(|_| random_tensor(rng, &[k])).collect();
        op_gradcheck(&ins, |t, v| {
            // reuse the first input twice to exercise accumulation
            let mut xs = v.to_vec();
            xs.push(v[0]);
            let y = t.reduce_sum(&xs, &[k]).unwrap();
            weighted_sum(t, y, 7)
        })
    });
}

#[test]
fn indexing_ops() {
    check("gather_rows", |rng| {
        let (r, d) = dims(rng);
        let picks: Vec<usize> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(0..r)).collect();
        op_gradcheck(&[random_tensor(rng, &[r, d])], |t, v| {
            let y = t.gather_rows(v[0], &picks).unwrap();
            weighted_sum(t, y, 8)
        })
    });
    check("segment_sum", |rng| {
        let (r, d) = dims(rng);
        let segs = rng.random_range(1..=3);
        let ids: Vec<usize> = (0..r).map(|_| rng.random_range(0..segs)).collect();
        op_gradcheck(&[random_tensor(rng, &[r, d])], |t, v| {
            let y = t.segment_sum(v[0], &ids, segs).unwrap();
            weighted_sum(t, y, 9)
        })
    });
    check("embed_columns", |rng| {
        let (o, i) = dims(rng);
        let cols: Vec<usize> = (0..rng.random_range(1..=5)).map(|_| rng.random_range(0..i)).collect();
        op_gradcheck(&[random_tensor(rng, &[o, i])], |t, v| {
            let y = t.embed_columns(v[0], &cols).unwrap();
            weighted_sum(t, y, 10)
        })
    });
}

#[test]
fn binary_cross_entropy() {
    check("bce_with_logits", |rng| {
        let n = rng.random_range(1..=16);
        let targets: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<bool>())).collect();
        let mut logits = random_tensor(rng, &[n, 1]);
        logits.data_mut().iter_mut().for_each(|v| *v *= 3.0);
        op_gradcheck(&[logits], |t, v| t.bce_with_logits(v[0], &targets).unwrap())
    });
}

fn micro_model(rng: &mut ChaCha8Rng, encoder: EncoderKind) -> PisaModel<f64> {
    let dx = rng.random_range(1..=3);
    let mut cfg = PisaConfig::new(dx, rng.random_range(2..=5), 4).with_encoder(encoder);
    cfg.hidden = rng.random_range(2..=5);
    cfg.card_hidden = rng.random_range(2..=4);
    PisaModel::new(cfg, rng.random()).unwrap()
}

#[test]
fn full_training_loss() {
    let variants = [
        ("keyed, correspondence", EncoderKind::Keyed, ReconLoss::Correspondence),
        ("keyed, hungarian", EncoderKind::Keyed, ReconLoss::Hungarian),
        ("input order", EncoderKind::InputOrder, ReconLoss::Correspondence),
        ("deep set", EncoderKind::DeepSet, ReconLoss::Correspondence),
    ];
    for (name, encoder, recon) in variants {
        check(name, |rng| {
            let model = micro_model(rng, encoder);
            let batch = SetBatch::<f64>::generate(rng.random(), 3, model.config.dx, 0..=4);
            model_gradcheck(&model, &batch.refs(), recon, 6, rng)
        });
    }
}

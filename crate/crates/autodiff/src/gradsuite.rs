//! Seeded finite-difference checks for every kernel, shared by the unit tests
//! and the acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gradcheck::check_gradients;
use crate::graph::{DropoutMode, Graph, NodeId, OpKind};
use crate::tensor::Tensor;

pub const EPS: f64 = 1e-6;
pub const TOL: f64 = 1e-4;
pub const INSTANCES_MIN: u64 = 20;

/// Builds one random instance: inputs plus the op applied to them.
pub type CaseFn = fn(&mut ChaCha8Rng, u64) -> (Vec<Tensor<f64>>, OpKind);

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSummary {
    pub name: &'static str,
    pub instances: u64,
    pub worst: f64,
    /// First failing instance, if any.
    pub failure: Option<(u64, f64)>,
}

impl KernelSummary {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.worst <= TOL
    }
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape, &data).expect("shape matches")
}

/// Values bounded away from zero, for kinked kernels.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.5);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_f64(shape, &data).expect("shape matches")
}

/// Contracts `y` against a fixed random tensor so every output element matters.
fn project(g: &mut Graph<f64>, y: NodeId, seed: u64) -> Result<NodeId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let w = rand_tensor(&mut rng, g.shape(y), -1.0, 1.0);
    let w = g.constant(w);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn dims(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(1..5)).collect()
}

pub fn check_kernel(name: &'static str, case: CaseFn, instances: u64) -> Result<KernelSummary> {
    let mut s = KernelSummary {
        name,
        instances,
        worst: 0.0,
        failure: None,
    };
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 7919 + name.len() as u64);
        let (inputs, kind) = case(&mut rng, seed);
        let report = check_gradients(&inputs, EPS, |g, ids| {
            let y = g.apply(&kind, ids)?;
            if g.value(y).is_scalar() {
                Ok(y)
            } else {
                project(g, y, seed)
            }
        })?;
        s.worst = s.worst.max(report.max_rel_error);
        if report.max_rel_error > TOL && s.failure.is_none() {
            s.failure = Some((seed, report.max_rel_error));
        }
    }
    Ok(s)
}

fn unary(rng: &mut ChaCha8Rng, kind: OpKind) -> (Vec<Tensor<f64>>, OpKind) {
    let d = dims(rng, 2);
    (vec![rand_tensor(rng, &d, -2.0, 2.0)], kind)
}

fn kinked(rng: &mut ChaCha8Rng, kind: OpKind) -> (Vec<Tensor<f64>>, OpKind) {
    let d = dims(rng, 2);
    (vec![away_from_zero(rng, &d)], kind)
}

/// Every kernel, with its instance generator.
pub fn kernel_cases() -> Vec<(&'static str, CaseFn)> {
    vec![
        ("matmul", |rng, _| {
            let d = dims(rng, 3);
            (
                vec![rand_tensor(rng, &[d[0], d[1]], -1.0, 1.0), rand_tensor(rng, &[d[1], d[2]], -1.0, 1.0)],
                OpKind::MatMul,
            )
        }),
        ("matmul-batched", |rng, seed| {
            let d = dims(rng, 4);
            let a = rand_tensor(rng, &[d[0], d[1], d[2]], -1.0, 1.0);
            let b = if seed % 2 == 0 {
                rand_tensor(rng, &[d[0], d[2], d[3]], -1.0, 1.0)
            } else {
                rand_tensor(rng, &[d[2], d[3]], -1.0, 1.0)
            };
            (vec![a, b], OpKind::MatMul)
        }),
        ("add", |rng, seed| {
            let d = dims(rng, 3);
            let b = if seed % 2 == 0 { vec![d[2]] } else { vec![d[1], d[2]] };
            (vec![rand_tensor(rng, &d, -1.0, 1.0), rand_tensor(rng, &b, -1.0, 1.0)], OpKind::Add)
        }),
        ("mul", |rng, seed| {
            let d = dims(rng, 3);
            let b = if seed % 2 == 0 { d.clone() } else { vec![d[2]] };
            (vec![rand_tensor(rng, &d, -1.0, 1.0), rand_tensor(rng, &b, -1.0, 1.0)], OpKind::Mul)
        }),
        ("scale", |rng, _| unary(rng, OpKind::Scale(-1.7))),
        ("add-scalar", |rng, _| unary(rng, OpKind::AddScalar(0.3))),
        ("tanh", |rng, _| unary(rng, OpKind::Tanh)),
        ("sigmoid", |rng, _| unary(rng, OpKind::Sigmoid)),
        ("exp", |rng, _| unary(rng, OpKind::Exp)),
        ("mean", |rng, _| unary(rng, OpKind::Mean)),
        ("sum", |rng, _| unary(rng, OpKind::Sum)),
        ("abs", |rng, _| kinked(rng, OpKind::Abs)),
        ("relu", |rng, _| kinked(rng, OpKind::Relu)),
        ("log", |rng, _| {
            let d = dims(rng, 2);
            (vec![rand_tensor(rng, &d, 0.2, 3.0)], OpKind::Log)
        }),
        ("softmax", |rng, seed| {
            let d = dims(rng, 3);
            (vec![rand_tensor(rng, &d, -2.0, 2.0)], OpKind::Softmax { axis: seed as usize % 3 })
        }),
        ("concat", |rng, seed| {
            let d = dims(rng, 3);
            let axis = seed as usize % 3;
            let mut d2 = d.clone();
            d2[axis] += 1;
            (
                vec![rand_tensor(rng, &d, -1.0, 1.0), rand_tensor(rng, &d2, -1.0, 1.0)],
                OpKind::Concat { axis },
            )
        }),
        ("slice", |rng, seed| {
            let mut d = dims(rng, 3);
            let axis = seed as usize % 3;
            d[axis] += 2;
            let start = rng.random_range(0..2);
            let len = rng.random_range(1..=d[axis] - start);
            (vec![rand_tensor(rng, &d, -1.0, 1.0)], OpKind::Slice { axis, start, len })
        }),
        ("reshape", |rng, _| {
            let d = dims(rng, 3);
            let shape = vec![d[0] * d[1], d[2]];
            (vec![rand_tensor(rng, &d, -1.0, 1.0)], OpKind::Reshape { shape })
        }),
        ("transpose", |rng, _| {
            let d = dims(rng, 3);
            (vec![rand_tensor(rng, &d, -1.0, 1.0)], OpKind::Transpose)
        }),
        ("embedding", |rng, _| {
            let b = rng.random_range(1..4);
            let fields = rng.random_range(1..4);
            let mut ranges = Vec::new();
            let mut col = 0;
            for _ in 0..fields {
                let l = rng.random_range(2..4);
                ranges.push((col, col + l));
                col += l;
            }
            let e = rng.random_range(1..4);
            (
                vec![rand_tensor(rng, &[b, col], 0.0, 1.0), rand_tensor(rng, &[col, e], -0.5, 0.5)],
                OpKind::Embedding { ranges },
            )
        }),
        ("conv1d", |rng, seed| {
            let width = [1, 3, 5][seed as usize % 3];
            let (b, l, cin, cout) = (
                rng.random_range(1..3),
                rng.random_range(1..6),
                rng.random_range(1..4),
                rng.random_range(1..4),
            );
            (
                vec![
                    rand_tensor(rng, &[b, l, cin], -1.0, 1.0),
                    rand_tensor(rng, &[cout, cin, width], -1.0, 1.0),
                    rand_tensor(rng, &[cout], -1.0, 1.0),
                ],
                OpKind::Conv1d,
            )
        }),
        ("lstm-cell", |rng, _| {
            let (b, i, h) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
            (
                vec![
                    rand_tensor(rng, &[b, i], -1.0, 1.0),
                    rand_tensor(rng, &[b, h], -1.0, 1.0),
                    rand_tensor(rng, &[b, h], -1.0, 1.0),
                    rand_tensor(rng, &[i, 4 * h], -1.0, 1.0),
                    rand_tensor(rng, &[h, 4 * h], -1.0, 1.0),
                    rand_tensor(rng, &[4 * h], -1.0, 1.0),
                ],
                OpKind::LstmCell,
            )
        }),
        ("dropout", |rng, seed| {
            let d = dims(rng, 2);
            (
                vec![rand_tensor(rng, &d, -1.0, 1.0)],
                OpKind::Dropout {
                    rate: 0.3,
                    mode: DropoutMode::Train,
                    seed,
                },
            )
        }),
        ("layer-norm", |rng, _| {
            let (r, w) = (rng.random_range(1..4), rng.random_range(2..6));
            (
                vec![
                    rand_tensor(rng, &[r, w], -2.0, 2.0),
                    rand_tensor(rng, &[w], 0.5, 1.5),
                    rand_tensor(rng, &[w], -0.5, 0.5),
                ],
                OpKind::LayerNorm { eps: 1e-5 },
            )
        }),
        ("weighted-cross-entropy", |rng, _| {
            let b = rng.random_range(1..6);
            let targets: Vec<usize> = (0..b).map(|_| rng.random_range(0..3)).collect();
            let class_weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..2.5)).collect();
            (
                vec![rand_tensor(rng, &[b, 3], -2.0, 2.0)],
                OpKind::WeightedCrossEntropy { targets, class_weights },
            )
        }),
    ]
}

/// Runs every kernel case.
pub fn check_all_kernels(instances: u64) -> Result<Vec<KernelSummary>> {
    kernel_cases()
        .into_iter()
        .map(|(name, case)| check_kernel(name, case, instances))
        .collect()
}

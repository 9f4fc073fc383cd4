//! A minimal federated-learning substrate: synthetic linear regression,
//! full-batch local gradient descent, canonical update encoding and FedAvg.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("local training diverged (non-finite weight)")]
    Diverged,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("round mismatch: expected {expected}, got {actual}")]
    RoundMismatch { expected: u32, actual: u32 },
    #[error("nothing to aggregate")]
    Empty,
    #[error("aggregation weights are invalid: {0}")]
    BadWeights(&'static str),
    #[error("update encoding: {0}")]
    Format(&'static str),
}

/// Global or local model weights, tagged with the training round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVector {
    pub weights: Vec<f64>,
    pub round: u32,
}

impl ModelVector {
    pub fn zeros(dimension: usize) -> Self {
        ModelVector {
            weights: vec![0.0; dimension],
            round: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataShard {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub client_index: usize,
}

impl DataShard {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlConfig {
    pub rounds: u32,
    pub total_clients: usize,
    /// Clients selected per round.
    pub participation: usize,
    pub local_epochs: u32,
    pub learning_rate: f64,
    pub dimension: usize,
    pub points_per_client: usize,
    pub test_points: usize,
    pub noise_std: f64,
    pub data_seed: u64,
    /// Shift each client's feature mean so shards are not identically
    /// distributed.
    pub heterogeneous: bool,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            rounds: 50,
            total_clients: 10,
            participation: 10,
            local_epochs: 5,
            learning_rate: 0.05,
            dimension: 4,
            points_per_client: 100,
            test_points: 500,
            noise_std: 0.1,
            data_seed: 7,
            heterogeneous: false,
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<(), FlError> {
        let bad = |m: &str| Err(FlError::InvalidConfig(m.to_string()));
        if self.total_clients == 0 || self.participation == 0 {
            return bad("client counts must be positive");
        }
        if self.participation > self.total_clients {
            return bad("participation exceeds total clients");
        }
        if self.local_epochs == 0 || self.dimension == 0 || self.points_per_client == 0 || self.test_points == 0 {
            return bad("epochs, dimension and data sizes must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad("noise must be non-negative");
        }
        Ok(())
    }
}

/// Held-out evaluation data.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub shards: Vec<DataShard>,
    pub test: TestSet,
    pub true_weights: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds `y = w*.x + N(0, noise^2)` with standard-normal features split
/// evenly across clients.
pub fn make_task<R: Rng + ?Sized>(config: &FlConfig, rng: &mut R) -> Result<Task, FlError> {
    config.validate()?;
    let d = config.dimension;
    let true_weights: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let noise = Normal::new(0.0, config.noise_std).map_err(|_| FlError::InvalidConfig("noise".into()))?;

    let draw = |shift: f64, rng: &mut R| {
        let x: Vec<f64> = (0..d)
            .map(|_| shift + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        let y = dot(&true_weights, &x) + noise.sample(rng);
        (x, y)
    };

    let mut shards = Vec::with_capacity(config.total_clients);
    for client_index in 0..config.total_clients {
        let shift = if config.heterogeneous {
            client_index as f64 / config.total_clients as f64 - 0.5
        } else {
            0.0
        };
        let (features, targets) = (0..config.points_per_client).map(|_| draw(shift, rng)).unzip();
        shards.push(DataShard {
            features,
            targets,
            client_index,
        });
    }
    let (features, targets) = (0..config.test_points).map(|_| draw(0.0, rng)).unzip();
    Ok(Task {
        shards,
        test: TestSet { features, targets },
        true_weights,
    })
}

/// Gradient of the mean squared loss `(1/n) sum (w.x - y)^2`.
pub fn loss_gradient(weights: &[f64], shard: &DataShard) -> Vec<f64> {
    let n = shard.len() as f64;
    let mut grad = vec![0.0; weights.len()];
    for (x, y) in shard.features.iter().zip(&shard.targets) {
        let r = dot(weights, x) - y;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += 2.0 * r * xi / n;
        }
    }
    grad
}

pub fn shard_loss(weights: &[f64], shard: &DataShard) -> f64 {
    let n = shard.len() as f64;
    shard
        .features
        .iter()
        .zip(&shard.targets)
        .map(|(x, y)| (dot(weights, x) - y).powi(2))
        .sum::<f64>()
        / n
}

/// Runs `epochs` full-batch gradient steps and increments the round.
pub fn local_train(model: &ModelVector, shard: &DataShard, epochs: u32, lr: f64) -> Result<ModelVector, FlError> {
    if !model.is_finite() {
        return Err(FlError::Diverged);
    }
    if let Some(x) = shard.features.first() {
        if x.len() != model.dimension() {
            return Err(FlError::DimensionMismatch {
                expected: model.dimension(),
                actual: x.len(),
            });
        }
    }
    let mut w = model.weights.clone();
    for _ in 0..epochs {
        let grad = loss_gradient(&w, shard);
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= lr * gi;
        }
    }
    let out = ModelVector {
        weights: w,
        round: model.round + 1,
    };
    if !out.is_finite() {
        return Err(FlError::Diverged);
    }
    Ok(out)
}

/// `round (u32 LE) || count (u32 LE) || weights (f64 LE each)`.
pub fn encode_update(m: &ModelVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * m.weights.len());
    out.extend_from_slice(&m.round.to_le_bytes());
    out.extend_from_slice(&(m.weights.len() as u32).to_le_bytes());
    for w in &m.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn decode_update(bytes: &[u8]) -> Result<ModelVector, FlError> {
    if bytes.len() < 8 {
        return Err(FlError::Format("shorter than the header"));
    }
    let round = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if count.checked_mul(8) != Some(body.len()) {
        return Err(FlError::Format("length field does not match payload"));
    }
    let weights = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let m = ModelVector { weights, round };
    if !m.is_finite() {
        return Err(FlError::Format("non-finite weight"));
    }
    Ok(m)
}

/// Weighted arithmetic mean `sum(w_i u_i) / sum(w_i)`, round preserved.
pub fn aggregate(updates: &[ModelVector], weights: &[f64]) -> Result<ModelVector, FlError> {
    let first = updates.first().ok_or(FlError::Empty)?;
    if weights.len() != updates.len() {
        return Err(FlError::BadWeights("one weight per update required"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(FlError::BadWeights("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(FlError::BadWeights("weights are all zero"));
    }
    let d = first.dimension();
    let mut acc = vec![0.0; d];
    for (u, w) in updates.iter().zip(weights) {
        if u.dimension() != d {
            return Err(FlError::DimensionMismatch {
                expected: d,
                actual: u.dimension(),
            });
        }
        if u.round != first.round {
            return Err(FlError::RoundMismatch {
                expected: first.round,
                actual: u.round,
            });
        }
        for (a, x) in acc.iter_mut().zip(&u.weights) {
            *a += w * x;
        }
    }
    Ok(ModelVector {
        weights: acc.into_iter().map(|a| a / total).collect(),
        round: first.round,
    })
}

/// FedAvg with equal weights.
pub fn aggregate_uniform(updates: &[ModelVector]) -> Result<ModelVector, FlError> {
    aggregate(updates, &vec![1.0; updates.len()])
}

pub fn evaluate(model: &ModelVector, test: &TestSet) -> Result<f64, FlError> {
    if let Some(x) = test.features.first() {
        if x.len() != model.dimension() {
            return Err(FlError::DimensionMismatch {
                expected: model.dimension(),
                actual: x.len(),
            });
        }
    }
    if test.targets.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = test
        .features
        .iter()
        .zip(&test.targets)
        .map(|(x, y)| (dot(&model.weights, x) - y).powi(2))
        .sum();
    Ok(sse / test.targets.len() as f64)
}

/// Sorted uniform sample of `count` distinct client indices.
pub fn select_participants<R: Rng + ?Sized>(total: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut picked = sample(rng, total, count.min(total)).into_vec();
    picked.sort_unstable();
    picked
}

/// Least-squares fit on the union of all shards via the normal equations
/// `(X^T X) w = X^T y`, solved by Gaussian elimination with partial pivoting.
pub fn pooled_least_squares(shards: &[DataShard]) -> Result<Vec<f64>, FlError> {
    let d = shards
        .iter()
        .find_map(|s| s.features.first().map(Vec::len))
        .ok_or(FlError::Empty)?;
    let mut a = vec![vec![0.0; d + 1]; d];
    for s in shards {
        for (x, y) in s.features.iter().zip(&s.targets) {
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += x[i] * x[j];
                }
                a[i][d] += x[i] * y;
            }
        }
    }
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-12 {
            return Err(FlError::InvalidConfig("pooled design matrix is singular".into()));
        }
        a.swap(col, pivot);
        for row in 0..d {
            if row != col {
                let factor = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= factor * p;
                }
            }
        }
    }
    Ok((0..d).map(|i| a[i][d] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small_config() -> FlConfig {
        FlConfig {
            total_clients: 10,
            participation: 10,
            points_per_client: 100,
            ..FlConfig::default()
        }
    }

    #[test]
    fn task_shape_and_determinism() {
        let cfg = small_config();
        let t1 = make_task(&cfg, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let t2 = make_task(&cfg, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.shards.len(), 10);
        assert!(t1.shards.iter().all(|s| s.len() == 100 && s.features[0].len() == 4));
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let cfg = small_config();
        let task = make_task(&cfg, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        let m = ModelVector {
            weights: vec![0.3, -0.2, 0.1, 0.0],
            round: 4,
        };
        let out = local_train(&m, &task.shards[0], 3, 0.0).unwrap();
        assert_eq!(out.weights, m.weights);
        assert_eq!(out.round, 5);
    }

    #[test]
    fn divergence_is_reported() {
        let shard = DataShard {
            features: vec![vec![1e6]],
            targets: vec![1.0],
            client_index: 0,
        };
        let m = ModelVector {
            weights: vec![1.0],
            round: 0,
        };
        assert_eq!(local_train(&m, &shard, 100, 10.0), Err(FlError::Diverged));
        let nan = ModelVector {
            weights: vec![f64::NAN],
            round: 0,
        };
        assert_eq!(local_train(&nan, &shard, 1, 0.1), Err(FlError::Diverged));
    }

    #[test]
    fn update_encoding_layout() {
        let m = ModelVector {
            weights: vec![1.5, -2.0],
            round: 3,
        };
        let bytes = encode_update(&m);
        assert_eq!(bytes.len(), 24);
        assert_eq!(&bytes[..8], &[3, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(decode_update(&bytes).unwrap(), m);
        assert!(decode_update(&bytes[..23]).is_err());
        assert!(decode_update(&bytes[..4]).is_err());

        let mut flipped = m.clone();
        flipped.weights[1] = f64::from_bits(flipped.weights[1].to_bits() ^ 1);
        assert_ne!(encode_update(&flipped), bytes);
    }

    #[test]
    fn aggregate_examples() {
        let a = ModelVector {
            weights: vec![0.0, 0.0],
            round: 1,
        };
        let b = ModelVector {
            weights: vec![2.0, 4.0],
            round: 1,
        };
        assert_eq!(aggregate_uniform(&[a.clone(), b.clone()]).unwrap().weights, vec![1.0, 2.0]);
        assert_eq!(aggregate_uniform(&[b.clone(), b.clone(), b.clone()]).unwrap(), b);
        assert_eq!(aggregate(&[a.clone(), b.clone()], &[3.0, 1.0]).unwrap().weights, vec![0.5, 1.0]);

        let c = ModelVector {
            weights: vec![1.0],
            round: 1,
        };
        assert!(matches!(aggregate_uniform(&[a.clone(), c]), Err(FlError::DimensionMismatch { .. })));
        let d = ModelVector {
            weights: vec![1.0, 1.0],
            round: 2,
        };
        assert!(matches!(aggregate_uniform(&[a.clone(), d]), Err(FlError::RoundMismatch { .. })));
        assert!(aggregate(&[a.clone(), b.clone()], &[0.0, 0.0]).is_err());
        assert_eq!(aggregate_uniform(&[]), Err(FlError::Empty));
    }

    #[test]
    fn evaluate_examples() {
        let test = TestSet {
            features: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]],
            targets: vec![1.0, 1.0, 0.0],
        };
        let m = ModelVector {
            weights: vec![2.0, 1.0],
            round: 0,
        };
        // residuals 1, 1, 3
        assert!((evaluate(&m, &test).unwrap() - 11.0 / 3.0).abs() < 1e-12);
        let zero_targets = TestSet {
            features: vec![vec![1.0, 2.0]],
            targets: vec![0.0],
        };
        assert_eq!(evaluate(&ModelVector::zeros(2), &zero_targets).unwrap(), 0.0);
    }

    #[test]
    fn participant_selection() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let picked = select_participants(10, 4, &mut rng);
        assert_eq!(picked.len(), 4);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(select_participants(3, 3, &mut rng), vec![0, 1, 2]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FlConfig::default();
        cfg.participation = cfg.total_clients + 1;
        assert!(cfg.validate().is_err());
        let cfg = FlConfig {
            learning_rate: 0.0,
            ..FlConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}

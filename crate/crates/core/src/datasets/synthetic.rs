//! Synthetic benchmark datasets: two Gaussian clouds (balanced and unbalanced)
//! and the 2x2 XOR checkerboard.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Origin, MIN_PROTOCOL_SAMPLES};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;

/// Class-mean offset along the first axis: class 0 at `-CLOUD_OFFSET`, class 1 at `+CLOUD_OFFSET`.
pub const CLOUD_OFFSET: f64 = 1.2816;
pub const UNBALANCED_MAJORITY: f64 = 0.8;
pub const UNBALANCED_MINORITY_VARIANCE: f64 = 0.25;

/// Names of the built-in generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    GaussianBalanced,
    GaussianUnbalanced,
    Xor,
}

impl SyntheticKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gcloudb" | "gaussian_balanced" => Some(Self::GaussianBalanced),
            "gcloudub" | "gaussian_unbalanced" => Some(Self::GaussianUnbalanced),
            "xor" | "checkerboard" => Some(Self::Xor),
            _ => None,
        }
    }

    pub fn default_size(self) -> usize {
        match self {
            Self::GaussianBalanced | Self::GaussianUnbalanced => 1000,
            Self::Xor => 1600,
        }
    }

    pub fn canonical_name(self) -> &'static str {
        match self {
            Self::GaussianBalanced => "gcloudb",
            Self::GaussianUnbalanced => "gcloudub",
            Self::Xor => "xor",
        }
    }

    pub fn generate(self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            Self::GaussianBalanced => generate_gaussian_clouds(true, n, seed),
            Self::GaussianUnbalanced => generate_gaussian_clouds(false, n, seed),
            Self::Xor => generate_xor_checkerboard(n, seed),
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < MIN_PROTOCOL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "synthetic datasets need n >= {MIN_PROTOCOL_SAMPLES}, got {n}"
        )));
    }
    Ok(())
}

/// Two 2-D Gaussian classes with means `(-CLOUD_OFFSET, 0)` and `(CLOUD_OFFSET, 0)`.
///
/// Balanced: equal priors, unit isotropic variance. Unbalanced: priors
/// 0.8/0.2 and the minority class has variance 0.25. Class counts are exact
/// (`round(prior * n)`), rows are shuffled.
pub fn generate_gaussian_clouds(balanced: bool, n: usize, seed: u64) -> Result<Dataset> {
    check_size(n)?;
    let mut rng = rng_from_seed(seed);
    let (n0, sd1) = if balanced {
        ((n as f64 * 0.5).round() as usize, 1.0)
    } else {
        (
            (n as f64 * UNBALANCED_MAJORITY).round() as usize,
            UNBALANCED_MINORITY_VARIANCE.sqrt(),
        )
    };
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows: Vec<([f64; 2], usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let (class, mean, sd) = if i < n0 {
            (0, -CLOUD_OFFSET, 1.0)
        } else {
            (1, CLOUD_OFFSET, sd1)
        };
        let x = mean + sd * std_normal.sample(&mut rng);
        let y = sd * std_normal.sample(&mut rng);
        rows.push(([x, y], class));
    }
    rows.shuffle(&mut rng);
    let name = if balanced { "gcloudb" } else { "gcloudub" };
    build(name, rows)
}

/// Points uniform on `[0, 2)^2`, label `(floor(x1) + floor(x2)) mod 2`.
pub fn generate_xor_checkerboard(n: usize, seed: u64) -> Result<Dataset> {
    check_size(n)?;
    let mut rng = rng_from_seed(seed);
    let rows = (0..n)
        .map(|_| {
            let p = [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            (p, xor_label(p[0], p[1]))
        })
        .collect();
    build("xor", rows)
}

pub fn xor_label(x1: f64, x2: f64) -> usize {
    ((x1.floor() as i64 + x2.floor() as i64).rem_euclid(2)) as usize
}

fn build(name: &str, rows: Vec<([f64; 2], usize)>) -> Result<Dataset> {
    let labels = rows.iter().map(|r| r.1).collect();
    let data = rows.iter().flat_map(|r| r.0).collect();
    let features = Matrix::from_vec(rows.len(), 2, data)?;
    Dataset::new(name, features, labels, Origin::Synthetic)
}

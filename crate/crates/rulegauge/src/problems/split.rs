//! Train/validation/test splits and observation noise.
//!
//! Interpolation samples all three sets from the reference dataset without
//! replacement. Extrapolation restricts training (and validation) to the
//! problem's training region and testing to the held-out region; for the
//! multi-variable system the test region lies outside the reference grid
//! entirely, so its test rows are generated from the closed form.
//!
//! The validation set is additional data from the training region — one
//! tenth of the training volume, at least 10 points, none when there is no
//! training data — and is used only for plateau detection, never for the
//! reported test error.

use super::dataset::{Dataset, Source};
use super::generate::multivar_outputs;
use super::{ExtrapolationSplit, ProblemDef, ProblemId};
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    InDistribution,
    OutDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_volume: usize,
    pub test_volume: usize,
    /// Noise level epsilon applied to training outputs only.
    pub noise_level: f64,
    pub rng_seed: u64,
}

impl SplitSpec {
    pub fn validation_volume(&self) -> usize {
        if self.train_volume == 0 {
            0
        } else {
            (self.train_volume / 10).max(10)
        }
    }
}

/// Sidecar describing how a split was drawn.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub problem: String,
    pub mode: SplitMode,
    pub train_volume: usize,
    pub validation_volume: usize,
    pub test_volume: usize,
    pub noise_level: f64,
    pub rng_seed: u64,
    pub train_region: String,
    pub test_region: String,
}

#[derive(Debug, Clone)]
pub struct SplitData {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub manifest: SplitManifest,
}

fn region_predicate<'a>(
    problem: &'a ProblemDef,
    train_side: bool,
) -> Box<dyn Fn(&[f64]) -> bool + 'a> {
    match &problem.extrapolation {
        ExtrapolationSplit::AxisCut { axis, cut } => {
            let (axis, cut) = (*axis, *cut);
            if train_side {
                Box::new(move |p: &[f64]| p[axis] < cut)
            } else {
                Box::new(move |p: &[f64]| p[axis] >= cut)
            }
        }
        ExtrapolationSplit::InnerBox { intervals } => {
            let inside = move |p: &[f64]| {
                p.iter()
                    .zip(intervals)
                    .all(|(&v, [lo, hi])| v >= *lo && v <= *hi)
            };
            if train_side {
                Box::new(move |p: &[f64]| !inside(p))
            } else {
                Box::new(inside)
            }
        }
        ExtrapolationSplit::OuterBox { .. } => {
            // The reference dataset covers only the training domain.
            if train_side {
                Box::new(|_: &[f64]| true)
            } else {
                Box::new(|_: &[f64]| false)
            }
        }
    }
}

fn region_descriptions(problem: &ProblemDef, mode: SplitMode) -> (String, String) {
    if mode == SplitMode::InDistribution {
        return ("full domain".into(), "full domain".into());
    }
    match &problem.extrapolation {
        ExtrapolationSplit::AxisCut { axis, cut } => (
            format!("{} < {cut}", problem.input_names[*axis]),
            format!("{} >= {cut}", problem.input_names[*axis]),
        ),
        ExtrapolationSplit::InnerBox { intervals } => (
            format!("domain minus box {intervals:?}"),
            format!("box {intervals:?}"),
        ),
        ExtrapolationSplit::OuterBox { intervals } => (
            "full training domain".into(),
            format!("outer box {intervals:?}"),
        ),
    }
}

/// Draw disjoint train/validation/test sets, seeded and reproducible, and
/// apply observation noise to the training outputs.
pub fn split(dataset: &Dataset, spec: &SplitSpec, problem: &ProblemDef) -> Result<SplitData> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.rng_seed);
    let val_volume = spec.validation_volume();

    let (train_pool, test_pool): (Vec<usize>, Vec<usize>) = match spec.mode {
        SplitMode::InDistribution => {
            let all: Vec<usize> = (0..dataset.len()).collect();
            (all.clone(), all)
        }
        SplitMode::OutDistribution => {
            let train_pred = region_predicate(problem, true);
            let test_pred = region_predicate(problem, false);
            let mut train_pool = Vec::new();
            let mut test_pool = Vec::new();
            for (i, row) in dataset.inputs.outer_iter().enumerate() {
                let p = row.as_slice().expect("contiguous row");
                if train_pred(p) {
                    train_pool.push(i);
                }
                if test_pred(p) {
                    test_pool.push(i);
                }
            }
            (train_pool, test_pool)
        }
    };

    let analytic_test = matches!(
        (&problem.extrapolation, spec.mode),
        (ExtrapolationSplit::OuterBox { .. }, SplitMode::OutDistribution)
    );

    // Draw train + validation from the train pool, then test from whatever
    // remains eligible.
    let mut taken = vec![false; dataset.len()];
    let draw = |rng: &mut ChaCha12Rng,
                pool: &[usize],
                taken: &mut [bool],
                k: usize|
     -> Result<Vec<usize>> {
        let free: Vec<usize> = pool.iter().copied().filter(|&i| !taken[i]).collect();
        if free.len() < k {
            return Err(Error::SplitTooLarge {
                requested: k,
                available: free.len(),
            });
        }
        let picked = rand::seq::index::sample(rng, free.len(), k);
        let mut rows: Vec<usize> = picked.iter().map(|j| free[j]).collect();
        rows.sort_unstable();
        for &r in &rows {
            taken[r] = true;
        }
        Ok(rows)
    };

    let train_rows = draw(&mut rng, &train_pool, &mut taken, spec.train_volume)?;
    let val_rows = draw(&mut rng, &train_pool, &mut taken, val_volume)?;
    let test = if analytic_test {
        let ExtrapolationSplit::OuterBox { intervals } = &problem.extrapolation else {
            unreachable!();
        };
        analytic_test_set(problem, intervals, spec.test_volume, &mut rng)?
    } else {
        let rows = draw(&mut rng, &test_pool, &mut taken, spec.test_volume)?;
        dataset.select(&rows)
    };

    let mut train = dataset.select(&train_rows);
    if spec.noise_level > 0.0 {
        train = add_noise(&train, spec.noise_level, noise_seed(spec.rng_seed));
    }
    let validation = dataset.select(&val_rows);

    let (train_region, test_region) = region_descriptions(problem, spec.mode);
    Ok(SplitData {
        train,
        validation,
        test,
        manifest: SplitManifest {
            problem: problem.id.to_string(),
            mode: spec.mode,
            train_volume: spec.train_volume,
            validation_volume: val_volume,
            test_volume: spec.test_volume,
            noise_level: spec.noise_level,
            rng_seed: spec.rng_seed,
            train_region,
            test_region,
        },
    })
}

/// Noise draws use a seed derived from the split seed so the two streams
/// never alias.
pub fn noise_seed(split_seed: u64) -> u64 {
    split_seed ^ 0x9e37_79b9_7f4a_7c15
}

fn analytic_test_set(
    problem: &ProblemDef,
    intervals: &[[f64; 2]],
    volume: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Dataset> {
    if problem.id != ProblemId::MultiVar {
        return Err(Error::Data(format!(
            "no closed form for out-of-grid test data of {}",
            problem.id
        )));
    }
    let dist_a = rand::distributions::Uniform::new_inclusive(intervals[0][0], intervals[0][1]);
    let dist_b = rand::distributions::Uniform::new_inclusive(intervals[1][0], intervals[1][1]);
    let mut inputs = Array2::zeros((volume, 2));
    let mut outputs = Array2::zeros((volume, 4));
    for i in 0..volume {
        let a = dist_a.sample(rng);
        let b = dist_b.sample(rng);
        inputs[[i, 0]] = a;
        inputs[[i, 1]] = b;
        for (k, v) in multivar_outputs(a, b).iter().enumerate() {
            outputs[[i, k]] = *v;
        }
    }
    Dataset::new(inputs, outputs, Source::Analytic)
}

/// Gaussian observation noise: `u~ = u + eps * std(u) * z` with the standard
/// deviation taken per output channel over the given set. `eps = 0` returns
/// the data bit-identically.
pub fn add_noise(train: &Dataset, eps: f64, seed: u64) -> Dataset {
    if eps == 0.0 || train.is_empty() {
        return train.clone();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let n = train.len();
    let c = train.outputs.ncols();
    let mut stds = vec![0.0; c];
    for k in 0..c {
        let col = train.outputs.column(k);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        stds[k] = var.sqrt();
    }
    let mut outputs = train.outputs.clone();
    for mut row in outputs.outer_iter_mut() {
        for k in 0..c {
            let z: f64 = normal.sample(&mut rng);
            row[k] += eps * stds[k] * z;
        }
    }
    Dataset {
        inputs: train.inputs.clone(),
        outputs,
        source: train.source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::generate::{generate_multivar, solve_convdiff_fd};
    use crate::problems::ProblemDef;

    fn spec(mode: SplitMode, train: usize, test: usize, seed: u64) -> SplitSpec {
        SplitSpec {
            mode,
            train_volume: train,
            test_volume: test,
            noise_level: 0.0,
            rng_seed: seed,
        }
    }

    #[test]
    fn zero_volume_gives_empty_train_and_validation() {
        let p = ProblemDef::get(ProblemId::MultiVar);
        let ds = generate_multivar(&[30, 30]).unwrap();
        let s = split(&ds, &spec(SplitMode::InDistribution, 0, 100, 1), &p).unwrap();
        assert!(s.train.is_empty());
        assert!(s.validation.is_empty());
        assert_eq!(s.test.len(), 100);
    }

    #[test]
    fn sets_are_disjoint_and_sized() {
        let p = ProblemDef::get(ProblemId::MultiVar);
        let ds = generate_multivar(&[30, 30]).unwrap();
        let s = split(&ds, &spec(SplitMode::InDistribution, 50, 200, 2), &p).unwrap();
        assert_eq!(s.train.len(), 50);
        assert_eq!(s.validation.len(), 10);
        assert_eq!(s.test.len(), 200);
        let key = |r: ndarray::ArrayView1<f64>| (r[0].to_bits(), r[1].to_bits());
        let train: std::collections::BTreeSet<_> = s.train.inputs.outer_iter().map(key).collect();
        let test: std::collections::BTreeSet<_> = s.test.inputs.outer_iter().map(key).collect();
        assert!(train.is_disjoint(&test));
    }

    #[test]
    fn same_seed_reproduces_the_split() {
        let p = ProblemDef::get(ProblemId::MultiVar);
        let ds = generate_multivar(&[30, 30]).unwrap();
        let a = split(&ds, &spec(SplitMode::InDistribution, 40, 100, 7), &p).unwrap();
        let b = split(&ds, &spec(SplitMode::InDistribution, 40, 100, 7), &p).unwrap();
        assert_eq!(a.train.inputs, b.train.inputs);
        assert_eq!(a.test.inputs, b.test.inputs);
        let c = split(&ds, &spec(SplitMode::InDistribution, 40, 100, 8), &p).unwrap();
        assert_ne!(a.train.inputs, c.train.inputs);
    }

    #[test]
    fn extrapolation_respects_the_time_cut() {
        let p = ProblemDef::get(ProblemId::ConvDiff);
        let ds = solve_convdiff_fd(64, 60).unwrap();
        let s = split(&ds, &spec(SplitMode::OutDistribution, 100, 300, 3), &p).unwrap();
        assert!(s.train.inputs.outer_iter().all(|r| r[1] < 0.5));
        assert!(s.validation.inputs.outer_iter().all(|r| r[1] < 0.5));
        assert!(s.test.inputs.outer_iter().all(|r| r[1] >= 0.5));
    }

    #[test]
    fn multivar_extrapolation_tests_on_the_outer_box() {
        let p = ProblemDef::get(ProblemId::MultiVar);
        let ds = generate_multivar(&[30, 30]).unwrap();
        let s = split(&ds, &spec(SplitMode::OutDistribution, 50, 150, 4), &p).unwrap();
        let pi = std::f64::consts::PI;
        assert_eq!(s.test.len(), 150);
        for row in s.test.inputs.outer_iter() {
            assert!(row[0] >= pi && row[0] <= 2.0 * pi);
            assert!(row[1] >= pi && row[1] <= 2.0 * pi);
        }
        // Outputs still satisfy the closed form.
        for (xin, xout) in s.test.inputs.outer_iter().zip(s.test.outputs.outer_iter()) {
            let expect = multivar_outputs(xin[0], xin[1]);
            for k in 0..4 {
                assert!((xout[k] - expect[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pde2d_extrapolation_splits_around_the_inner_box() {
        let p = ProblemDef::get(ProblemId::Pde2d);
        let ds = crate::problems::generate_pde2d(&[41, 41]).unwrap();
        let s = split(&ds, &spec(SplitMode::OutDistribution, 80, 200, 5), &p).unwrap();
        let inside =
            |r: ndarray::ArrayView1<f64>| (0.25..=0.75).contains(&r[0]) && (0.25..=0.75).contains(&r[1]);
        assert!(s.train.inputs.outer_iter().all(|r| !inside(r)));
        assert!(s.test.inputs.outer_iter().all(inside));
    }

    #[test]
    fn oversized_requests_fail() {
        let p = ProblemDef::get(ProblemId::MultiVar);
        let ds = generate_multivar(&[10, 10]).unwrap();
        assert!(split(&ds, &spec(SplitMode::InDistribution, 90, 50, 1), &p).is_err());
    }

    #[test]
    fn zero_noise_is_bit_identical() {
        let ds = generate_multivar(&[20, 20]).unwrap();
        let noisy = add_noise(&ds, 0.0, 9);
        assert_eq!(noisy.outputs, ds.outputs);
    }

    #[test]
    fn noise_level_matches_the_requested_fraction() {
        // eps = 0.3 over 10^4 samples: empirical std(u~ - u)/std(u) within
        // [0.29, 0.31] per channel.
        let ds = generate_multivar(&[100, 100]).unwrap();
        let noisy = add_noise(&ds, 0.3, 11);
        for k in 0..4 {
            let col = ds.outputs.column(k);
            let mean = col.sum() / col.len() as f64;
            let std = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / col.len() as f64)
                .sqrt();
            let diff = &noisy.outputs.column(k) - &ds.outputs.column(k);
            let dvar = diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64;
            let ratio = dvar.sqrt() / std;
            assert!(
                (0.29..=0.31).contains(&ratio),
                "channel {k}: ratio {ratio}"
            );
        }
    }

    #[test]
    fn noise_is_reproducible() {
        let ds = generate_multivar(&[20, 20]).unwrap();
        let a = add_noise(&ds, 0.2, 5);
        let b = add_noise(&ds, 0.2, 5);
        assert_eq!(a.outputs, b.outputs);
    }
}

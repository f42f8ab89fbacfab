use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Example, FeatureSpec, Label, Schema, Value};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

/// Class name used for the positive (converter) class of generated cohorts.
pub const POSITIVE_CLASS: &str = "cMCI";
/// Class name used for the negative (stable) class of generated cohorts.
pub const NEGATIVE_CLASS: &str = "sMCI";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_examples: usize,
    pub n_features: usize,
    /// Fraction of examples labeled with the negative class.
    pub class_balance: f64,
    /// Distance between the two class means along every feature.
    pub separation: f64,
    /// Fraction of examples whose features are drawn from the other class.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_examples: 402,
            n_features: 41,
            class_balance: 0.56,
            separation: 1.0,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

/// Two-class Gaussian cohort with unit-variance numeric features.
///
/// The class set is `[cMCI, sMCI]`; `round(n * class_balance)` examples are
/// `sMCI`. Features of an example are drawn around `-separation/2` (sMCI) or
/// `+separation/2` (cMCI). Label noise swaps the generating class of an equal
/// number of examples in each class, so observed class counts never depend on
/// the seed.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.n_examples < 2 {
        return Err(Error::param(format!("n_examples must be at least 2, got {}", cfg.n_examples)));
    }
    if cfg.n_features == 0 {
        return Err(Error::param("n_features must be at least 1"));
    }
    if !(cfg.class_balance > 0.0 && cfg.class_balance < 1.0) {
        return Err(Error::param(format!("class_balance must be in (0, 1), got {}", cfg.class_balance)));
    }
    if !(0.0..=1.0).contains(&cfg.noise_rate) {
        return Err(Error::param(format!("noise_rate must be in [0, 1], got {}", cfg.noise_rate)));
    }
    if !(cfg.separation >= 0.0 && cfg.separation.is_finite()) {
        return Err(Error::param(format!("separation must be a non-negative number, got {}", cfg.separation)));
    }

    let n = cfg.n_examples;
    let n_negative = ((n as f64 * cfg.class_balance).round() as usize).clamp(1, n - 1);
    let positive = Label(0);
    let negative = Label(1);

    let mut rng = rng_for(cfg.seed, Stream::Synthetic, &[]);
    let mut labels: Vec<Label> = std::iter::repeat_n(negative, n_negative)
        .chain(std::iter::repeat_n(positive, n - n_negative))
        .collect();
    labels.shuffle(&mut rng);

    let mut latent = labels.clone();
    let per_class = ((cfg.noise_rate * n as f64 / 2.0).round() as usize)
        .min(n_negative)
        .min(n - n_negative);
    if per_class > 0 {
        for (from, to) in [(negative, positive), (positive, negative)] {
            let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == from).collect();
            members.shuffle(&mut rng);
            for &i in &members[..per_class] {
                latent[i] = to;
            }
        }
    }

    let half = cfg.separation / 2.0;
    let width = cfg.n_features.to_string().len();
    let schema = Schema::new(
        (1..=cfg.n_features)
            .map(|j| FeatureSpec::numeric(format!("f{j:0width$}")))
            .collect(),
    )?;

    let examples = (0..n)
        .map(|i| {
            let mean = if latent[i] == positive { half } else { -half };
            let values = (0..cfg.n_features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    Some(Value::Numeric(mean + z))
                })
                .collect();
            Example::new((i + 1).to_string(), values, Some(labels[i]))
        })
        .collect();

    Dataset::new(
        schema,
        vec![POSITIVE_CLASS.to_string(), NEGATIVE_CLASS.to_string()],
        examples,
    )
}

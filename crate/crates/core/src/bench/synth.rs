//! Synthetic spatio-textual data with Zipf-skewed keyword popularity.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, KeywordVocabulary, SpatioTextualObject};
use crate::error::{Result, StixError};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Uniform,
    /// Isotropic Gaussian blobs around uniformly placed centres, truncated to the unit square.
    GaussianClusters { clusters: usize, sigma: f64 },
}

impl FromStr for Distribution {
    type Err = StixError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Distribution::Uniform),
            "gaussian" | "gaussian-clusters" | "clusters" => Ok(Distribution::GaussianClusters {
                clusters: 20,
                sigma: 0.05,
            }),
            other => Err(StixError::InvalidParameter(format!(
                "unknown distribution {other:?}; expected uniform or gaussian"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub count: usize,
    pub distribution: Distribution,
    pub vocabulary: usize,
    /// Exponent of the keyword popularity law; keyword `i` (1-based) is drawn
    /// with weight `i^-s`.
    pub zipf_exponent: f64,
    /// Target mean of keywords per object; every object gets at least one.
    pub mean_keywords: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            count: 10_000,
            distribution: Distribution::Uniform,
            vocabulary: 300,
            zipf_exponent: 1.0,
            mean_keywords: 3.0,
            seed: 42,
        }
    }
}

/// Object ids are `0..count`, keyword `i` is named `kw{i}` and keyword ids
/// follow popularity rank.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.vocabulary == 0 {
        return Err(StixError::InvalidParameter("vocabulary must not be empty".into()));
    }
    if !(spec.mean_keywords >= 1.0 && spec.mean_keywords.is_finite()) {
        return Err(StixError::InvalidParameter(format!(
            "mean keywords per object must be at least 1, got {}",
            spec.mean_keywords
        )));
    }
    let zipf = Zipf::new(spec.vocabulary as u64, spec.zipf_exponent)
        .map_err(|e| StixError::InvalidParameter(format!("zipf exponent: {e}")))?;
    let extra = (spec.mean_keywords > 1.0)
        .then(|| Poisson::new(spec.mean_keywords - 1.0))
        .transpose()
        .map_err(|e| StixError::InvalidParameter(format!("keyword count: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut location: Box<dyn FnMut(&mut ChaCha8Rng) -> Point> = match spec.distribution {
        Distribution::Uniform => Box::new(|rng| Point::new(rng.gen(), rng.gen())),
        Distribution::GaussianClusters { clusters, sigma } => {
            if clusters == 0 || sigma.is_nan() || sigma <= 0.0 {
                return Err(StixError::InvalidParameter("clusters need a positive count and sigma".into()));
            }
            let centres: Vec<Point> = (0..clusters).map(|_| Point::new(rng.gen(), rng.gen())).collect();
            let noise = Normal::new(0.0, sigma).expect("sigma checked positive");
            Box::new(move |rng| {
                let c = centres[rng.gen_range(0..centres.len())];
                loop {
                    let p = Point::new(c.x + noise.sample(rng), c.y + noise.sample(rng));
                    if (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y) {
                        return p;
                    }
                }
            })
        }
    };

    let mut objects = Vec::with_capacity(spec.count);
    let mut kws = Vec::new();
    for id in 0..spec.count {
        let p = location(&mut rng);
        let wanted = 1 + extra.map_or(0, |d| d.sample(&mut rng) as usize);
        let wanted = wanted.min(spec.vocabulary);
        kws.clear();
        let mut attempts = 0;
        while kws.len() < wanted && attempts < 64 * wanted {
            let k = zipf.sample(&mut rng) as u32 - 1;
            if !kws.contains(&k) {
                kws.push(k);
            }
            attempts += 1;
        }
        objects.push(SpatioTextualObject::new(id as u64, p, kws.iter().copied()));
    }
    let vocab = KeywordVocabulary::from_words((0..spec.vocabulary).map(|i| format!("kw{i}")).collect())?;
    Dataset::new(objects, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mbr;

    #[test]
    fn uniform_data_is_in_unit_square_and_skewed() {
        let spec = SyntheticSpec {
            count: 20_000,
            vocabulary: 200,
            ..SyntheticSpec::default()
        };
        let d = generate(&spec).unwrap();
        assert_eq!(d.len(), 20_000);
        assert!(d.objects().iter().all(|o| Mbr::unit().contains_point(&o.location)));
        let mean = d.objects().iter().map(|o| o.keywords().len()).sum::<usize>() as f64 / d.len() as f64;
        assert!((mean - 3.0).abs() < 0.15, "mean keywords {mean}");
        let count = |k: u32| d.objects().iter().filter(|o| o.keywords().contains(&k)).count();
        assert!(count(0) > 5 * count(50));
    }

    #[test]
    fn clusters_and_determinism() {
        let spec = SyntheticSpec {
            count: 2_000,
            distribution: "gaussian".parse().unwrap(),
            seed: 9,
            ..SyntheticSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.objects(), b.objects());
        assert!(a.objects().iter().all(|o| Mbr::unit().contains_point(&o.location)));
        assert!(generate(&SyntheticSpec { mean_keywords: 0.5, ..spec }).is_err());
        assert!("hexagonal".parse::<Distribution>().is_err());
    }
}

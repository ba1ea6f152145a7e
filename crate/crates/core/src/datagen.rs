//! Synthetic patient-donor pairs.
//!
//! The default model uses US population ABO frequencies and a simple HLA
//! model: each donor carries each of `L` antigens independently, and a
//! patient's antibody density is chosen so that the fraction of random
//! donors they conflict with matches their sampled cpra. None of it is
//! fitted to registry data.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compat::{plain_compatible, BloodType, InputQuote, PrioAttrs, QuoteLayout};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{0} must sum to 1, got {1}")]
    NotNormalized(&'static str, f64),
    #[error("{0} must lie in [0, 1], got {1}")]
    OutOfRange(&'static str, f64),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// A cpra interval, its probability, and optionally a fixed antibody
/// density overriding the one derived from cpra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpraBand {
    pub lo: u8,
    pub hi: u8,
    pub weight: f64,
    #[serde(default)]
    pub antibody_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationModel {
    /// Frequencies of O, A, B, AB, used for donors and patients alike.
    pub blood: [f64; 4],
    pub layout: QuoteLayout,
    /// Probability that a donor carries a given antigen.
    pub antigen_freq: f64,
    pub cpra_bands: Vec<CpraBand>,
    pub pediatric_rate: f64,
    pub prior_living_donor_rate: f64,
    /// Keep only pairs whose own donor cannot give to their own patient.
    pub require_incompatible: bool,
    /// Upper bound on redraws per pair before accepting a compatible one.
    pub max_redraws: usize,
}

impl Default for PopulationModel {
    fn default() -> Self {
        PopulationModel {
            blood: [0.44, 0.42, 0.10, 0.04],
            layout: QuoteLayout::default(),
            antigen_freq: 0.1,
            cpra_bands: vec![
                CpraBand {
                    lo: 0,
                    hi: 0,
                    weight: 0.55,
                    antibody_density: None,
                },
                CpraBand {
                    lo: 1,
                    hi: 79,
                    weight: 0.30,
                    antibody_density: None,
                },
                CpraBand {
                    lo: 80,
                    hi: 100,
                    weight: 0.15,
                    antibody_density: None,
                },
            ],
            pediatric_rate: 0.05,
            prior_living_donor_rate: 0.02,
            require_incompatible: true,
            max_redraws: 1000,
        }
    }
}

impl PopulationModel {
    pub fn check(&self) -> Result<(), ModelError> {
        let sum: f64 = self.blood.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::NotNormalized("blood type frequencies", sum));
        }
        if self.blood.iter().any(|&p| p < 0.0) {
            return Err(ModelError::Invalid("negative blood type frequency".into()));
        }
        let sum: f64 = self.cpra_bands.iter().map(|b| b.weight).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::NotNormalized("cpra band weights", sum));
        }
        for (name, p) in [
            ("antigen frequency", self.antigen_freq),
            ("pediatric rate", self.pediatric_rate),
            ("prior living donor rate", self.prior_living_donor_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::OutOfRange(name, p));
            }
        }
        for b in &self.cpra_bands {
            if b.lo > b.hi || b.hi > 100 || b.weight < 0.0 {
                return Err(ModelError::Invalid(format!("bad cpra band {}..={}", b.lo, b.hi)));
            }
            if let Some(d) = b.antibody_density {
                if !(0.0..=1.0).contains(&d) {
                    return Err(ModelError::OutOfRange("antibody density", d));
                }
            }
        }
        if self.layout.regions == 0 || self.layout.regions > usize::from(u16::MAX) {
            return Err(ModelError::Invalid("region count out of range".into()));
        }
        Ok(())
    }

    /// Antibody density at which a patient conflicts with a fraction
    /// `cpra / 100` of random donors.
    pub fn density_for_cpra(&self, cpra: u8) -> f64 {
        let l = self.layout.antigens as f64;
        if cpra == 0 || self.antigen_freq == 0.0 || l == 0.0 {
            return 0.0;
        }
        let c = (f64::from(cpra) / 100.0).min(0.999);
        ((1.0 - (1.0 - c).powf(1.0 / l)) / self.antigen_freq).clamp(0.0, 1.0)
    }

    /// Samples one pair, ignoring the incompatibility requirement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InputQuote {
        let blood = WeightedIndex::new(self.blood).expect("checked weights");
        let bands = WeightedIndex::new(self.cpra_bands.iter().map(|b| b.weight)).expect("checked");
        let donor = BloodType::ALL[blood.sample(rng)];
        let patient = BloodType::ALL[blood.sample(rng)];
        let band = &self.cpra_bands[bands.sample(rng)];
        let cpra = rng.random_range(band.lo..=band.hi);
        let density = band
            .antibody_density
            .unwrap_or_else(|| self.density_for_cpra(cpra));
        let l = self.layout.antigens;
        let antigens = (0..l).map(|_| rng.random_bool(self.antigen_freq) as u8).collect();
        let antibodies = (0..l).map(|_| rng.random_bool(density) as u8).collect();
        let pediatric = rng.random_bool(self.pediatric_rate);
        let attrs = PrioAttrs {
            patient_age: if pediatric {
                rng.random_range(1..18)
            } else {
                rng.random_range(18..76)
            },
            pediatric: pediatric as u8,
            prior_living_donor: rng.random_bool(self.prior_living_donor_rate) as u8,
            region: rng.random_range(0..self.layout.regions) as u16,
            donor_age: rng.random_range(18..71),
        };
        InputQuote::new(donor, patient, antigens, antibodies, cpra, attrs)
    }

    /// Samples one enrolled pair: redrawn while the pair's own donor could
    /// give to its patient, up to `max_redraws` times.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> InputQuote {
        let mut q = self.sample(rng);
        if !self.require_incompatible {
            return q;
        }
        for _ in 0..self.max_redraws {
            if !plain_compatible(&q, &q) {
                return q;
            }
            q = self.sample(rng);
        }
        log::warn!("no internally incompatible pair after {} redraws", self.max_redraws);
        q
    }
}

/// `n` pairs, deterministic in `seed`.
pub fn gen_pairs(n: usize, model: &PopulationModel, seed: u64) -> Result<Vec<InputQuote>, ModelError> {
    model.check()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| model.sample_pair(&mut rng)).collect())
}

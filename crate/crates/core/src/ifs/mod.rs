//! Iterated function systems with probabilities on the circle and the
//! random orbits they generate.

mod minimality;
mod orbit;
pub mod rng;

pub use minimality::{minimality_certificate, MinimalityCertificate, DEFAULT_CERTIFICATE_GRID};
pub use orbit::{
    forward_orbit, forward_point, interval_image_length, inverse_forward_orbit,
    inverse_reversed_orbit, inverse_reversed_point, reversed_orbit, reversed_point, ForwardIter,
    OrbitMode, Trajectory,
};
pub use rng::{SplitMix64, SymbolStream};
pub(crate) use orbit::image_arc;

use crate::error::{Error, Result};
use crate::homeo::{CircleMap, HomeoDescriptor, Homeomorphism};
use serde::{Deserialize, Serialize};
use std::sync::Arc as Shared;

const PROB_SUM_TOL: f64 = 1e-12;

/// A finite family of circle homeomorphisms with a non-degenerate
/// probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsWithProbabilities {
    maps: Vec<Homeomorphism>,
    inverses: Vec<Homeomorphism>,
    probs: Vec<f64>,
    cumulative: Shared<[f64]>,
}

impl IfsWithProbabilities {
    pub fn new(maps: Vec<Homeomorphism>, probs: Vec<f64>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidArgument("an IFS needs at least one map".into()));
        }
        if maps.len() != probs.len() {
            return Err(Error::InvalidProbabilities(format!(
                "{} maps but {} probabilities",
                maps.len(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidProbabilities(format!(
                "every probability must be positive, got {p}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProbabilities(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cumulative.last_mut().expect("non-empty") = 1.0;
        let inverses = maps.iter().map(Homeomorphism::inverse).collect();
        Ok(IfsWithProbabilities {
            maps,
            inverses,
            probs,
            cumulative: cumulative.into(),
        })
    }

    pub fn uniform(maps: Vec<Homeomorphism>) -> Result<Self> {
        let n = maps.len().max(1);
        IfsWithProbabilities::new(maps, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[Homeomorphism] {
        &self.maps
    }

    pub fn map(&self, j: usize) -> &Homeomorphism {
        &self.maps[j]
    }

    pub fn inverse_map(&self, j: usize) -> &Homeomorphism {
        &self.inverses[j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `(F⁻¹, p)`.
    pub fn inverse_ifs(&self) -> IfsWithProbabilities {
        IfsWithProbabilities {
            maps: self.inverses.clone(),
            inverses: self.maps.clone(),
            probs: self.probs.clone(),
            cumulative: self.cumulative.clone(),
        }
    }

    /// Same probabilities, each map replaced by `op(map)`.
    pub fn map_each(&self, op: impl Fn(&Homeomorphism) -> Homeomorphism) -> Result<Self> {
        IfsWithProbabilities::new(self.maps.iter().map(op).collect(), self.probs.clone())
    }

    pub fn symbol_stream(&self, seed: u64, stream_id: u64) -> SymbolStream {
        SymbolStream::new(seed, stream_id, self.cumulative.clone())
    }

    pub fn is_isometric_family(&self) -> bool {
        self.maps
            .iter()
            .all(|m| matches!(m, Homeomorphism::Rotation(_) | Homeomorphism::Flip))
    }

    pub fn descriptor(&self) -> Option<IfsDescriptor> {
        Some(IfsDescriptor {
            maps: self
                .maps
                .iter()
                .map(Homeomorphism::descriptor)
                .collect::<Option<Vec<_>>>()?,
            probs: Some(self.probs.clone()),
        })
    }

    #[inline]
    pub(crate) fn apply(&self, j: usize, x: f64) -> f64 {
        self.maps[j].evaluate(x.into()).value()
    }

    #[inline]
    pub(crate) fn apply_inverse(&self, j: usize, y: f64) -> f64 {
        self.inverses[j].evaluate(y.into()).value()
    }
}

/// Serializable IFS: map descriptors plus an optional probability vector
/// (uniform when omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsDescriptor {
    pub maps: Vec<HomeoDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

impl TryFrom<&IfsDescriptor> for IfsWithProbabilities {
    type Error = Error;

    fn try_from(desc: &IfsDescriptor) -> Result<Self> {
        let maps = desc
            .maps
            .iter()
            .map(Homeomorphism::try_from)
            .collect::<Result<Vec<_>>>()?;
        match &desc.probs {
            Some(p) => IfsWithProbabilities::new(maps, p.clone()),
            None => IfsWithProbabilities::uniform(maps),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_probabilities() {
        let r = || Homeomorphism::rotation(0.1);
        assert!(IfsWithProbabilities::new(vec![r(), r()], vec![1.0, 0.0]).is_err());
        assert!(IfsWithProbabilities::new(vec![r(), r()], vec![1.2, -0.2]).is_err());
        assert!(IfsWithProbabilities::new(vec![r(), r()], vec![0.5, 0.4]).is_err());
        assert!(IfsWithProbabilities::new(vec![r()], vec![0.5, 0.5]).is_err());
        assert!(IfsWithProbabilities::new(vec![], vec![]).is_err());
        assert!(IfsWithProbabilities::new(vec![r(), r()], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn inverse_ifs_swaps_maps() {
        let f = IfsWithProbabilities::uniform(vec![
            Homeomorphism::rotation(0.1),
            Homeomorphism::projective(2.0, 0.0, 0.0, 0.5).unwrap(),
        ])
        .unwrap();
        let inv = f.inverse_ifs();
        for j in 0..2 {
            for i in 0..100 {
                let x = i as f64 / 100.0;
                let back = inv.apply(j, f.apply(j, x));
                assert!(crate::circle::dist(back.into(), x.into()).value() < 1e-12);
            }
        }
        assert_eq!(inv.inverse_ifs().maps(), f.maps());
    }

    #[test]
    fn descriptor_defaults_to_uniform() {
        let desc: IfsDescriptor = serde_json::from_str(
            r#"{"maps":[{"type":"rotation","angle":0.25},{"type":"flip"}]}"#,
        )
        .unwrap();
        let ifs = IfsWithProbabilities::try_from(&desc).unwrap();
        assert_eq!(ifs.probs(), &[0.5, 0.5]);
    }
}

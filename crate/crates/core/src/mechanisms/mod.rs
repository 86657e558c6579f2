//! Mechanisms under audit. Each one hands back only its final output.

mod analytic;
mod data;
mod dpsgd;

pub use analytic::{
    gaussian_delta, gaussian_reference_curve, gaussian_release, rr_release, rr_release_kary,
    GaussianCanaryMech, RandomizedResponseMech, TradeoffPoint,
};
pub use data::{make_synthetic, Example, Roles, SyntheticDataset, SyntheticSpec};
pub use dpsgd::{accuracy, dpsgd_train, DpSgdConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::smallnet::NetParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    Rr(RandomizedResponseMech),
    Gaussian(GaussianCanaryMech),
    Dpsgd(DpSgdConfig),
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Rr(_) => "rr",
            Mechanism::Gaussian(_) => "gaussian",
            Mechanism::Dpsgd(_) => "dpsgd",
        }
    }

    /// Exact ε when the mechanism has one.
    pub fn eps_true(&self) -> Option<f64> {
        match self {
            Mechanism::Rr(m) => Some(m.eps_true),
            _ => None,
        }
    }

    /// Run once for the binary game. The analytic mechanisms see only the
    /// canary membership bits; DP-SGD sees only the IN examples.
    pub fn release_binary<R: Rng + ?Sized>(&self, selection: &[i8], train: &[Example], rng: &mut R) -> Result<Release> {
        Ok(match self {
            Mechanism::Rr(m) => Release::Bits(rr_release(selection, m.eps_true, rng)?),
            Mechanism::Gaussian(m) => Release::Noisy(gaussian_release(selection, m.noise_sigma, rng)?),
            Mechanism::Dpsgd(cfg) => Release::Model(dpsgd_train(train, cfg, rng)?),
        })
    }

    /// Run once for the K-ary game. Randomized response reports one index per
    /// set (ε-DP per set); the Gaussian oracle perturbs every canary's `±1`
    /// membership, so a swap inside a set moves two coordinates.
    pub fn release_kary<R: Rng + ?Sized>(
        &self,
        chosen: &[usize],
        arity: usize,
        train: &[Example],
        rng: &mut R,
    ) -> Result<Release> {
        Ok(match self {
            Mechanism::Rr(m) => Release::Indices(rr_release_kary(chosen, arity, m.eps_true, rng)?),
            Mechanism::Gaussian(m) => {
                let bits: Vec<i8> = chosen
                    .iter()
                    .flat_map(|&u| (0..arity).map(move |j| if j == u { 1 } else { -1 }))
                    .collect();
                Release::Noisy(gaussian_release(&bits, m.noise_sigma, rng)?)
            }
            Mechanism::Dpsgd(cfg) => Release::Model(dpsgd_train(train, cfg, rng)?),
        })
    }
}

/// What an auditor gets to observe.
#[derive(Debug, Clone, PartialEq)]
pub enum Release {
    Bits(Vec<i8>),
    Indices(Vec<usize>),
    Noisy(Vec<f64>),
    Model(NetParams),
}

impl Release {
    /// Hex SHA-256 of the released bytes.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        match self {
            Release::Bits(b) => {
                h.update(b"bits");
                h.update(b.iter().map(|&v| v as u8).collect::<Vec<_>>());
            }
            Release::Indices(v) => {
                h.update(b"indices");
                for &i in v {
                    h.update((i as u64).to_le_bytes());
                }
            }
            Release::Noisy(v) => {
                h.update(b"noisy");
                for x in v {
                    h.update(x.to_le_bytes());
                }
            }
            Release::Model(p) => {
                h.update(b"model");
                h.update(p.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

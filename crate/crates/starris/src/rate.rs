//! Rate and energy-efficiency model for 1-layer rate splitting in the real
//! (widely-linear) domain.
//!
//! Every rate is `½ log2` of a determinant ratio of real-domain covariances;
//! the `½` compensates the doubled dimension of the real decomposition, so
//! with ideal transceivers and proper covariances these formulas reproduce
//! the familiar complex-domain `log2 det(I + H Q H^H / σ²)`.

use crate::channel::{effective_channel, end_to_end_real_channel, noise_covariance, ChannelSet, IqiParams, RisConfig};
use crate::wl::{PsdMatrix, RMat, WlError};

/// Transmit covariances (watts, real domain) and the common-rate allocation.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    /// `p_private[l][k]`: covariance of user (l,k)'s private stream, `2 n_bs` square.
    pub p_private: Vec<Vec<PsdMatrix>>,
    /// `p_common[l]`: covariance of cell l's common stream.
    pub p_common: Vec<PsdMatrix>,
    /// `r_common_alloc[l][k]`: share of the common rate allocated to user (l,k).
    pub r_common_alloc: Vec<Vec<f64>>,
}

pub const POWER_TOL: f64 = 1e-9;

impl CovarianceSet {
    pub fn zeros(cells: usize, users_per_cell: usize, n_bs: usize) -> Self {
        let zero = PsdMatrix::new(RMat::zeros(2 * n_bs, 2 * n_bs)).expect("zero is PSD");
        Self {
            p_private: vec![vec![zero.clone(); users_per_cell]; cells],
            p_common: vec![zero; cells],
            r_common_alloc: vec![vec![0.0; users_per_cell]; cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.p_private.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.p_private.first().map_or(0, |c| c.len())
    }

    /// Total transmit covariance of cell `i`: common plus all privates.
    pub fn cell_total(&self, i: usize) -> RMat {
        let mut total = self.p_common[i].matrix().clone();
        for p in &self.p_private[i] {
            total += p.matrix();
        }
        total
    }

    pub fn cell_power(&self, i: usize) -> f64 {
        self.p_common[i].trace() + self.p_private[i].iter().map(|p| p.trace()).sum::<f64>()
    }

    /// Checks the power budget and allocation nonnegativity.
    pub fn validate(&self, p_max: f64) -> Result<(), String> {
        for l in 0..self.cells() {
            let power = self.cell_power(l);
            if power > p_max + POWER_TOL {
                return Err(format!("cell {l} spends {power} W against a budget of {p_max} W"));
            }
            for (k, &rc) in self.r_common_alloc[l].iter().enumerate() {
                if rc < -POWER_TOL {
                    return Err(format!("common-rate allocation of user ({l},{k}) is negative"));
                }
            }
        }
        Ok(())
    }
}

/// Real-domain end-to-end channels and noise covariances of every user.
#[derive(Debug, Clone)]
pub struct RealChannelSet {
    /// `uh[l][k][i]`: real channel from BS i to user (l,k), `2 n_user x 2 n_bs`.
    pub uh: Vec<Vec<Vec<RMat>>>,
    /// `noise[l][k]`: real noise covariance after user (l,k)'s receive chain.
    pub noise: Vec<Vec<PsdMatrix>>,
}

impl RealChannelSet {
    /// Assembles effective channels through the surfaces and wraps them in
    /// the transceiver chains.
    pub fn assemble(
        channels: &ChannelSet,
        ris: &RisConfig,
        iqi: &IqiParams,
    ) -> Result<Self, WlError> {
        Self::assemble_scaled(channels, ris, iqi, 1.0, iqi.noise_power)
    }

    /// Same as [`RealChannelSet::assemble`] but with channels scaled by
    /// `1/sqrt(noise_power)` and unit noise power. Determinant-ratio rates
    /// are invariant to this common scaling; the optimizer uses it to keep
    /// matrix entries near unity.
    pub fn assemble_noise_normalized(
        channels: &ChannelSet,
        ris: &RisConfig,
        iqi: &IqiParams,
    ) -> Result<Self, WlError> {
        let scale = 1.0 / iqi.noise_power.sqrt();
        Self::assemble_scaled(channels, ris, iqi, scale, 1.0)
    }

    fn assemble_scaled(
        channels: &ChannelSet,
        ris: &RisConfig,
        iqi: &IqiParams,
        amp_scale: f64,
        noise_power: f64,
    ) -> Result<Self, WlError> {
        let cells = channels.cells();
        let users = channels.users_per_cell();
        let mut uh = vec![vec![Vec::with_capacity(cells); users]; cells];
        let mut noise = vec![Vec::with_capacity(users); cells];
        for l in 0..cells {
            for k in 0..users {
                let rx = iqi.rx_map(l, k);
                for i in 0..cells {
                    let h = effective_channel(channels, ris, l, k, i);
                    let tx = iqi.tx_map(i);
                    let real = end_to_end_real_channel(&h, &tx, &rx)?;
                    uh[l][k].push(real.into_inner() * amp_scale);
                }
                noise[l].push(noise_covariance(&rx, noise_power));
            }
        }
        Ok(Self { uh, noise })
    }

    pub fn cells(&self) -> usize {
        self.uh.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.uh.first().map_or(0, |c| c.len())
    }
}

fn congruence(h: &RMat, p: &RMat) -> RMat {
    h * p * h.transpose()
}

/// Interference-plus-noise covariance seen by user (l,k) when decoding its
/// private stream: intercell totals, intracell privates of other users, and
/// receiver noise.
pub fn interference_covariance(
    l: usize,
    k: usize,
    channels: &RealChannelSet,
    covs: &CovarianceSet,
) -> PsdMatrix {
    let mut d = channels.noise[l][k].matrix().clone();
    for i in 0..covs.cells() {
        if i == l {
            continue;
        }
        d += congruence(&channels.uh[l][k][i], &covs.cell_total(i));
    }
    for j in 0..covs.users_per_cell() {
        if j == k {
            continue;
        }
        d += congruence(&channels.uh[l][k][l], covs.p_private[l][j].matrix());
    }
    PsdMatrix::new(d).expect("sum of congruences of PSD matrices is PSD")
}

fn half_logdet_ratio(d: &RMat, s: &RMat) -> Result<f64, WlError> {
    let num = PsdMatrix::new(d + s)?.logdet2()?;
    let den = PsdMatrix::new(d.clone())?.logdet2()?;
    Ok((0.5 * (num - den)).max(0.0))
}

/// Achievable rate of user (l,k)'s private stream after the common stream is
/// decoded and cancelled, treating everything else as noise.
pub fn private_rate(
    l: usize,
    k: usize,
    channels: &RealChannelSet,
    covs: &CovarianceSet,
) -> Result<f64, WlError> {
    let d = interference_covariance(l, k, channels, covs);
    let s = congruence(&channels.uh[l][k][l], covs.p_private[l][k].matrix());
    half_logdet_ratio(d.matrix(), &s)
}

/// Maximum rate at which user (l,k) can decode its cell's common stream,
/// treating every private stream (its own included) as noise.
pub fn common_rate_bound(
    l: usize,
    k: usize,
    channels: &RealChannelSet,
    covs: &CovarianceSet,
) -> Result<f64, WlError> {
    let d = interference_covariance(l, k, channels, covs);
    let s_private = congruence(&channels.uh[l][k][l], covs.p_private[l][k].matrix());
    let d_common = d.matrix() + s_private;
    let s_common = congruence(&channels.uh[l][k][l], covs.p_common[l].matrix());
    half_logdet_ratio(&d_common, &s_common)
}

/// The common rate cell `l` can actually broadcast: the worst user's bound.
pub fn cell_common_rate(
    l: usize,
    channels: &RealChannelSet,
    covs: &CovarianceSet,
) -> Result<f64, WlError> {
    let mut min = f64::INFINITY;
    for k in 0..covs.users_per_cell() {
        min = min.min(common_rate_bound(l, k, channels, covs)?);
    }
    Ok(min)
}

/// Per-user rates of a full network state.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub r_private: Vec<Vec<f64>>,
    pub r_common_bound: Vec<Vec<f64>>,
    pub r_common_cell: Vec<f64>,
    /// `r_private + r_common_alloc`, the rate a user actually gets.
    pub r_total: Vec<Vec<f64>>,
}

/// Evaluates every rate of the network at the given covariances.
pub fn rate_report(channels: &RealChannelSet, covs: &CovarianceSet) -> Result<RateReport, WlError> {
    let cells = covs.cells();
    let users = covs.users_per_cell();
    let mut r_private = vec![vec![0.0; users]; cells];
    let mut r_common_bound = vec![vec![0.0; users]; cells];
    let mut r_common_cell = vec![0.0; cells];
    let mut r_total = vec![vec![0.0; users]; cells];
    for l in 0..cells {
        for k in 0..users {
            r_private[l][k] = private_rate(l, k, channels, covs)?;
            r_common_bound[l][k] = common_rate_bound(l, k, channels, covs)?;
            r_total[l][k] = r_private[l][k] + covs.r_common_alloc[l][k];
        }
        r_common_cell[l] = r_common_bound[l]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
    }
    Ok(RateReport {
        r_private,
        r_common_bound,
        r_common_cell,
        r_total,
    })
}

/// Energy-efficiency constants, fairness weights through which the per-user
/// efficiencies enter the objective, and rate thresholds.
#[derive(Debug, Clone)]
pub struct EeParams {
    /// Constant power consumed per served user, watts.
    pub p_const: f64,
    /// Inverse power-amplifier efficiency.
    pub eta: f64,
    /// `weights[l][k] > 0`: priority of user (l,k).
    pub weights: Vec<Vec<f64>>,
    /// `r_threshold[l][k] >= 0`: minimum rate, bits/s/Hz.
    pub r_threshold: Vec<Vec<f64>>,
}

impl EeParams {
    pub fn uniform(cells: usize, users_per_cell: usize, p_const: f64, eta: f64) -> Self {
        assert!(p_const > 0.0 && eta > 0.0);
        Self {
            p_const,
            eta,
            weights: vec![vec![1.0; users_per_cell]; cells],
            r_threshold: vec![vec![0.0; users_per_cell]; cells],
        }
    }

    /// `p_const + eta * (Tr(P_lk) + Tr(P_c,l)/K)`, the denominator of the EE.
    pub fn power_cost(&self, l: usize, k: usize, covs: &CovarianceSet) -> f64 {
        let k_users = covs.users_per_cell() as f64;
        self.p_const + self.eta * (covs.p_private[l][k].trace() + covs.p_common[l].trace() / k_users)
    }
}

/// Energy efficiency of user (l,k): its rate over the energy spent on it.
pub fn energy_efficiency(
    l: usize,
    k: usize,
    rate: f64,
    covs: &CovarianceSet,
    ee: &EeParams,
) -> f64 {
    let denom = ee.power_cost(l, k, covs);
    assert!(denom > 0.0, "energy denominator must be positive");
    rate / denom
}

/// The objective of the whole pipeline: the minimum weighted energy
/// efficiency `min_lk e_lk / α_lk`.
pub fn mwee_objective(report: &RateReport, covs: &CovarianceSet, ee: &EeParams) -> f64 {
    let mut min = f64::INFINITY;
    for l in 0..covs.cells() {
        for k in 0..covs.users_per_cell() {
            let e = energy_efficiency(l, k, report.r_total[l][k], covs, ee);
            min = min.min(e / ee.weights[l][k]);
        }
    }
    min
}

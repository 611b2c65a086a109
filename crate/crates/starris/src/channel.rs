//! Scenario generation and channel assembly for STAR-RIS-assisted multicell
//! downlinks: geometry, fading, effective channels through the surfaces, and
//! the I/Q-imbalanced transceiver chains that turn complex channels into
//! real-domain widely-linear ones.

use crate::wl::{
    real_decompose, CMat, CVec, PsdMatrix, RealBlockMatrix, WidelyLinearMap, WlError,
};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
}

/// Which propagation space of a STAR-RIS a user sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserSide {
    Reflect,
    Transmit,
}

/// Feasibility set for the per-element reflection/transmission coefficients.
///
/// `TU`: `|θr|² + |θt|² ≤ 1` (convex). `TI`: `|θr|² + |θt|² = 1`.
/// `TN`: the `TI` sphere plus `|θr ± θt|² ≤ 1`, which couples the phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsetKind {
    TU,
    TI,
    TN,
}

/// STAR-RIS operation mode: energy splitting (every element both reflects and
/// transmits) or mode switching (every element does exactly one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisMode {
    Es,
    Ms,
}

/// Per-element role under mode switching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsAssignment {
    ReflectOnly,
    TransmitOnly,
}

/// Diagonal reflection/transmission coefficients of every surface, together
/// with the feasibility set they must live in.
#[derive(Debug, Clone)]
pub struct RisConfig {
    pub theta_r: Vec<CVec>,
    pub theta_t: Vec<CVec>,
    pub set_kind: TsetKind,
    pub mode: RisMode,
    /// Per-element roles; present exactly when `mode == Ms`.
    pub ms_mask: Option<Vec<Vec<MsAssignment>>>,
}

pub const RIS_FEAS_TOL: f64 = 1e-9;

impl RisConfig {
    pub fn ris_count(&self) -> usize {
        self.theta_r.len()
    }

    pub fn elements_per_ris(&self) -> usize {
        self.theta_r.first().map_or(0, |v| v.len())
    }

    /// Checks the active feasibility-set invariants to `1e-9`.
    pub fn validate(&self) -> Result<(), String> {
        if self.theta_r.len() != self.theta_t.len() {
            return Err("theta_r and theta_t must cover the same surfaces".into());
        }
        if self.mode == RisMode::Ms && self.ms_mask.is_none() {
            return Err("mode switching requires an element mask".into());
        }
        for (m, (tr, tt)) in self.theta_r.iter().zip(&self.theta_t).enumerate() {
            if tr.len() != tt.len() {
                return Err(format!("surface {m} has mismatched coefficient lengths"));
            }
            for n in 0..tr.len() {
                let (r, t) = (tr[n], tt[n]);
                let power = r.norm_sqr() + t.norm_sqr();
                match self.set_kind {
                    TsetKind::TU => {
                        if power > 1.0 + RIS_FEAS_TOL {
                            return Err(format!("element ({m},{n}) exceeds the unit budget"));
                        }
                    }
                    TsetKind::TI => {
                        if (power - 1.0).abs() > RIS_FEAS_TOL {
                            return Err(format!("element ({m},{n}) is off the unit sphere"));
                        }
                    }
                    TsetKind::TN => {
                        if (power - 1.0).abs() > RIS_FEAS_TOL {
                            return Err(format!("element ({m},{n}) is off the unit sphere"));
                        }
                        if (r + t).norm_sqr() > 1.0 + RIS_FEAS_TOL
                            || (r - t).norm_sqr() > 1.0 + RIS_FEAS_TOL
                        {
                            return Err(format!(
                                "element ({m},{n}) violates the coupled-phase constraints"
                            ));
                        }
                    }
                }
                if let Some(mask) = &self.ms_mask {
                    match mask[m][n] {
                        MsAssignment::ReflectOnly if t != Complex64::ZERO => {
                            return Err(format!("element ({m},{n}) must not transmit"));
                        }
                        MsAssignment::TransmitOnly if r != Complex64::ZERO => {
                            return Err(format!("element ({m},{n}) must not reflect"));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }
}

/// Cell/user/surface counts and placement of a generated scenario.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    pub cells: usize,
    pub users_per_cell: usize,
    pub ris_count: usize,
    pub n_bs: usize,
    pub n_user: usize,
    pub n_ris: usize,
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<Vec<[f64; 2]>>,
    pub ris_positions: Vec<[f64; 2]>,
    /// `user_side[l][k][m]`: space of user (l,k) relative to surface m.
    pub user_side: Vec<Vec<Vec<UserSide>>>,
}

/// All complex channel matrices of a scenario plus the user side labels
/// needed to pick reflection or transmission coefficients per link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `g_user[l][k][m]`: surface m to user (l,k), `n_user x n_ris`.
    pub g_user: Vec<Vec<Vec<CMat>>>,
    /// `g_bs[m][i]`: BS i to surface m, `n_ris x n_bs`.
    pub g_bs: Vec<Vec<CMat>>,
    /// `f[l][k][i]`: direct link BS i to user (l,k), `n_user x n_bs`.
    pub f: Vec<Vec<Vec<CMat>>>,
    pub user_side: Vec<Vec<Vec<UserSide>>>,
}

impl ChannelSet {
    pub fn cells(&self) -> usize {
        self.f.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.f.first().map_or(0, |c| c.len())
    }

    pub fn ris_count(&self) -> usize {
        self.g_bs.len()
    }

    /// Zeroes every link through the surfaces, leaving direct links intact.
    pub fn without_ris_paths(mut self) -> Self {
        for per_cell in &mut self.g_user {
            for per_user in per_cell {
                for g in per_user {
                    g.fill(Complex64::ZERO);
                }
            }
        }
        for per_ris in &mut self.g_bs {
            for g in per_ris {
                g.fill(Complex64::ZERO);
            }
        }
        self
    }
}

/// Per-chain I/Q imbalance parameters and the receiver noise power.
#[derive(Debug, Clone)]
pub struct IqiParams {
    /// One `(gain, phase)` pair per BS transmit chain: `tx[i][antenna]`.
    pub tx: Vec<Vec<(f64, f64)>>,
    /// One `(gain, phase)` pair per user receive chain: `rx[l][k][antenna]`.
    pub rx: Vec<Vec<Vec<(f64, f64)>>>,
    /// Noise power at the antenna, watts.
    pub noise_power: f64,
}

impl IqiParams {
    /// Uniform parameters across every chain.
    pub fn uniform(
        cells: usize,
        users_per_cell: usize,
        n_bs: usize,
        n_user: usize,
        tx_gain: f64,
        tx_phase: f64,
        rx_gain: f64,
        rx_phase: f64,
        noise_power: f64,
    ) -> Self {
        assert!(tx_gain > 0.0 && rx_gain > 0.0, "imbalance gains must be positive");
        Self {
            tx: vec![vec![(tx_gain, tx_phase); n_bs]; cells],
            rx: vec![vec![vec![(rx_gain, rx_phase); n_user]; users_per_cell]; cells],
            noise_power,
        }
    }

    /// Ideal transceivers everywhere.
    pub fn ideal(cells: usize, users_per_cell: usize, n_bs: usize, n_user: usize, noise_power: f64) -> Self {
        Self::uniform(cells, users_per_cell, n_bs, n_user, 1.0, 0.0, 1.0, 0.0, noise_power)
    }

    pub fn tx_map(&self, i: usize) -> WidelyLinearMap {
        iqi_gammas_per_chain(&self.tx[i])
    }

    pub fn rx_map(&self, l: usize, k: usize) -> WidelyLinearMap {
        iqi_gammas_per_chain(&self.rx[l][k])
    }
}

/// Widely-linear map of an I/Q-imbalanced chain with amplitude imbalance `g`
/// and phase imbalance `phi` on every antenna:
/// `Γ1 = (I + g e^{jφ} I)/2`, `Γ2 = (I − g e^{−jφ} I)/2`.
///
/// Ideal at `(g, φ) = (1, 0)`, and `Γ1 + conj(Γ2) = I` always.
pub fn iqi_gammas(gain: f64, phase: f64, dim: usize) -> WidelyLinearMap {
    assert!(gain > 0.0, "amplitude imbalance must be positive");
    iqi_gammas_per_chain(&vec![(gain, phase); dim])
}

/// Per-chain variant of [`iqi_gammas`]; entry `n` of the diagonal uses the
/// n-th `(gain, phase)` pair.
pub fn iqi_gammas_per_chain(chains: &[(f64, f64)]) -> WidelyLinearMap {
    let dim = chains.len();
    let mut g1 = CMat::zeros(dim, dim);
    let mut g2 = CMat::zeros(dim, dim);
    for (n, &(g, phi)) in chains.iter().enumerate() {
        assert!(g > 0.0, "amplitude imbalance must be positive");
        g1[(n, n)] = (Complex64::ONE + g * Complex64::new(0.0, phi).exp()) * 0.5;
        g2[(n, n)] = (Complex64::ONE - g * Complex64::new(0.0, -phi).exp()) * 0.5;
    }
    WidelyLinearMap::new(g1, g2).expect("equal dims by construction")
}

/// Effective complex channel between BS `i` and user `(l,k)`:
/// the direct link plus every cascade through the surfaces, using the
/// reflection or transmission coefficients matching the user's side.
pub fn effective_channel(
    channels: &ChannelSet,
    ris: &RisConfig,
    l: usize,
    k: usize,
    i: usize,
) -> CMat {
    let mut h = channels.f[l][k][i].clone();
    for m in 0..channels.ris_count() {
        let theta = match channels.user_side[l][k][m] {
            UserSide::Reflect => &ris.theta_r[m],
            UserSide::Transmit => &ris.theta_t[m],
        };
        let g_user = &channels.g_user[l][k][m];
        let g_bs = &channels.g_bs[m][i];
        // g_user * diag(theta) * g_bs without forming the diagonal.
        for n in 0..theta.len() {
            let coeff = theta[n];
            if coeff != Complex64::ZERO {
                h += g_user.column(n) * (g_bs.row(n) * coeff);
            }
        }
    }
    h
}

/// Real-domain end-to-end channel `rx ∘ H ∘ tx` acting on `[Re x; Im x]`.
pub fn end_to_end_real_channel(
    h: &CMat,
    tx: &WidelyLinearMap,
    rx: &WidelyLinearMap,
) -> Result<RealBlockMatrix, WlError> {
    if tx.dims().0 != h.ncols() || h.nrows() != rx.dims().1 {
        return Err(WlError::DimensionMismatch(format!(
            "tx {:?} -> H {:?} -> rx {:?}",
            tx.dims(),
            h.shape(),
            rx.dims()
        )));
    }
    let composed = rx.real_decompose().matrix()
        * real_decompose(h).matrix()
        * tx.real_decompose().matrix();
    Ok(RealBlockMatrix::from_raw(composed, rx.dims().0, tx.dims().1))
}

/// Real-domain noise covariance seen after the receive chain.
///
/// The antenna noise is proper with power `σ²` (so `σ²/2` per real
/// dimension); impropriety enters only through the widely-linear receiver.
pub fn noise_covariance(rx: &WidelyLinearMap, noise_power: f64) -> PsdMatrix {
    assert!(noise_power > 0.0, "noise power must be positive");
    let w = rx.real_decompose();
    let cn = w.matrix() * w.matrix().transpose() * (noise_power / 2.0);
    PsdMatrix::new(cn).expect("congruence of a PSD matrix is PSD")
}

/// Declared default geometry, fading, and impairment parameters.
///
/// The sweep experiments reproduce trends, not absolute curves, so all
/// constants live here and in the experiment config rather than in code.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub cells: usize,
    pub users_per_cell: usize,
    pub ris_count: usize,
    pub n_bs: usize,
    pub n_user: usize,
    pub n_ris: usize,
    /// Cell radius in meters; BSs sit at cell centers.
    pub cell_radius_m: f64,
    /// Users fall uniformly in an annulus around their BS.
    pub user_min_dist_m: f64,
    pub user_max_dist_m: f64,
    /// Surfaces sit at this fraction of the radius from their cell's BS.
    pub ris_offset_fraction: f64,
    /// Path loss in dB at 1 m.
    pub pl_ref_db: f64,
    pub pl_exp_direct: f64,
    pub pl_exp_ris: f64,
    /// Rician K-factor on surface links, dB; direct links are Rayleigh.
    pub rician_k_db: f64,
    pub noise_dbm: f64,
    /// Fraction of each cell's users labeled transmit-side, rounded to a count.
    pub transmit_fraction: f64,
    pub iqi_tx_gain: f64,
    pub iqi_tx_phase_rad: f64,
    pub iqi_rx_gain: f64,
    pub iqi_rx_phase_rad: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cells: 2,
            users_per_cell: 2,
            ris_count: 2,
            n_bs: 2,
            n_user: 2,
            n_ris: 4,
            cell_radius_m: 100.0,
            user_min_dist_m: 10.0,
            user_max_dist_m: 100.0,
            ris_offset_fraction: 0.9,
            pl_ref_db: 30.0,
            pl_exp_direct: 3.5,
            pl_exp_ris: 2.2,
            rician_k_db: 3.0,
            noise_dbm: -94.0,
            transmit_fraction: 0.0,
            iqi_tx_gain: 0.95,
            iqi_tx_phase_rad: 0.0873,
            iqi_rx_gain: 0.95,
            iqi_rx_phase_rad: 0.0873,
        }
    }
}

impl ScenarioConfig {
    pub fn noise_power_watts(&self) -> f64 {
        10f64.powf((self.noise_dbm - 30.0) / 10.0)
    }

    pub fn iqi_params(&self) -> IqiParams {
        IqiParams::uniform(
            self.cells,
            self.users_per_cell,
            self.n_bs,
            self.n_user,
            self.iqi_tx_gain,
            self.iqi_tx_phase_rad,
            self.iqi_rx_gain,
            self.iqi_rx_phase_rad,
            self.noise_power_watts(),
        )
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("cells", self.cells),
            ("users_per_cell", self.users_per_cell),
            ("ris_count", self.ris_count),
            ("n_bs", self.n_bs),
            ("n_user", self.n_user),
            ("n_ris", self.n_ris),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ScenarioError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.cell_radius_m <= 0.0
            || self.user_min_dist_m < 0.0
            || self.user_max_dist_m <= self.user_min_dist_m
        {
            return Err(ScenarioError::InvalidConfig(
                "distances must be positive with max > min".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.transmit_fraction) {
            return Err(ScenarioError::InvalidConfig(
                "transmit_fraction must lie in [0, 1]".into(),
            ));
        }
        if self.iqi_tx_gain <= 0.0 || self.iqi_rx_gain <= 0.0 {
            return Err(ScenarioError::InvalidConfig(
                "imbalance gains must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn path_gain(pl_ref_db: f64, exponent: f64, dist_m: f64) -> f64 {
    let d = dist_m.max(1.0);
    let pl_db = pl_ref_db + 10.0 * exponent * d.log10();
    10f64.powf(-pl_db / 20.0)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Half-wavelength ULA steering vector toward `angle`.
fn steering(n: usize, angle: f64) -> CVec {
    CVec::from_fn(n, |i, _| Complex64::new(0.0, PI * i as f64 * angle.sin()).exp())
}

fn draw_cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) / 2f64.sqrt()
}

fn rayleigh_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, amp: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| draw_cn(rng) * amp)
}

/// Rician fading with a rank-one line-of-sight component built from steering
/// vectors at both ends; every entry has unit average power before `amp`.
fn rician_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    amp: f64,
    k_linear: f64,
    aoa: f64,
    aod: f64,
) -> CMat {
    let los = steering(rows, aoa) * steering(cols, aod).map(|z| z.conj()).transpose();
    let scatter = CMat::from_fn(rows, cols, |_, _| draw_cn(rng));
    let los_scale = Complex64::from((k_linear / (1.0 + k_linear)).sqrt());
    let nlos_scale = Complex64::from((1.0 / (1.0 + k_linear)).sqrt());
    (los * los_scale + scatter * nlos_scale) * Complex64::from(amp)
}

/// Draws a full scenario: placement, side labels, and every channel matrix.
/// Deterministic for a fixed `(seed, cfg)` pair.
pub fn generate_scenario(
    seed: u64,
    cfg: &ScenarioConfig,
) -> Result<(NetworkTopology, ChannelSet), ScenarioError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l_cells, k_users, m_ris) = (cfg.cells, cfg.users_per_cell, cfg.ris_count);

    let bs_positions: Vec<[f64; 2]> = (0..l_cells)
        .map(|l| [2.0 * cfg.cell_radius_m * l as f64, 0.0])
        .collect();
    let ris_positions: Vec<[f64; 2]> = (0..m_ris)
        .map(|m| {
            let home = bs_positions[m % l_cells];
            [home[0], home[1] + cfg.ris_offset_fraction * cfg.cell_radius_m]
        })
        .collect();

    let mut user_positions = vec![vec![[0.0; 2]; k_users]; l_cells];
    for (l, per_cell) in user_positions.iter_mut().enumerate() {
        for pos in per_cell.iter_mut() {
            let u: f64 = rng.random();
            let r = (u * (cfg.user_max_dist_m.powi(2) - cfg.user_min_dist_m.powi(2))
                + cfg.user_min_dist_m.powi(2))
            .sqrt();
            let phi: f64 = rng.random::<f64>() * 2.0 * PI;
            *pos = [
                bs_positions[l][0] + r * phi.cos(),
                bs_positions[l][1] + r * phi.sin(),
            ];
        }
    }

    let transmit_count = (cfg.transmit_fraction * k_users as f64).round() as usize;
    let user_side: Vec<Vec<Vec<UserSide>>> = (0..l_cells)
        .map(|_| {
            (0..k_users)
                .map(|k| {
                    let side = if k < transmit_count {
                        UserSide::Transmit
                    } else {
                        UserSide::Reflect
                    };
                    vec![side; m_ris]
                })
                .collect()
        })
        .collect();

    let k_linear = 10f64.powf(cfg.rician_k_db / 10.0);

    let mut g_bs = vec![Vec::with_capacity(l_cells); m_ris];
    for (m, per_ris) in g_bs.iter_mut().enumerate() {
        for i in 0..l_cells {
            let d = dist(ris_positions[m], bs_positions[i]);
            let amp = path_gain(cfg.pl_ref_db, cfg.pl_exp_ris, d);
            let dir = [
                bs_positions[i][0] - ris_positions[m][0],
                bs_positions[i][1] - ris_positions[m][1],
            ];
            let angle = dir[1].atan2(dir[0]);
            per_ris.push(rician_matrix(
                &mut rng, cfg.n_ris, cfg.n_bs, amp, k_linear, angle, angle + PI,
            ));
        }
    }

    let mut g_user = vec![vec![Vec::with_capacity(m_ris); k_users]; l_cells];
    for l in 0..l_cells {
        for k in 0..k_users {
            for m in 0..m_ris {
                let d = dist(user_positions[l][k], ris_positions[m]);
                let amp = path_gain(cfg.pl_ref_db, cfg.pl_exp_ris, d);
                let dir = [
                    ris_positions[m][0] - user_positions[l][k][0],
                    ris_positions[m][1] - user_positions[l][k][1],
                ];
                let angle = dir[1].atan2(dir[0]);
                g_user[l][k].push(rician_matrix(
                    &mut rng, cfg.n_user, cfg.n_ris, amp, k_linear, angle, angle + PI,
                ));
            }
        }
    }

    let mut f = vec![vec![Vec::with_capacity(l_cells); k_users]; l_cells];
    for l in 0..l_cells {
        for k in 0..k_users {
            for i in 0..l_cells {
                let d = dist(user_positions[l][k], bs_positions[i]);
                let amp = path_gain(cfg.pl_ref_db, cfg.pl_exp_direct, d);
                f[l][k].push(rayleigh_matrix(&mut rng, cfg.n_user, cfg.n_bs, amp));
            }
        }
    }

    let topology = NetworkTopology {
        cells: l_cells,
        users_per_cell: k_users,
        ris_count: m_ris,
        n_bs: cfg.n_bs,
        n_user: cfg.n_user,
        n_ris: cfg.n_ris,
        bs_positions,
        user_positions,
        ris_positions,
        user_side: user_side.clone(),
    };
    let channels = ChannelSet {
        g_user,
        g_bs,
        f,
        user_side,
    };
    Ok((topology, channels))
}

/// Sum of `|entry|²` over a complex matrix, used by the fading-law tests.
pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

//! Dynamic mode decomposition with optional Hankel (delay) embedding.
//!
//! Snapshots `x_0 .. x_{m-1}` sampled every `dt` are stacked into
//! `X1 = [x_0 .. x_{m-2}]`, `X2 = [x_1 .. x_{m-1}]`. The best-fit linear
//! propagator is projected onto the leading left singular vectors of `X1`,
//! `Ã = U^H X2 V Σ^{-1}`, whose eigenpairs `(λ, W)` give the exact DMD modes
//! `Φ = X2 V Σ^{-1} W` and continuous frequencies `ω = -i ln(λ) / dt`. The
//! forecast is `x(t0 + t) = Σ_l φ_l exp(i ω_l t) b_l`.
//!
//! With `delay = d > 1` every column is replaced by the stack
//! `[x_j; x_{j+1}; ..; x_{j+d-1}]`, which lifts the rank cap from the ambient
//! dimension `n` to `n·d`; forecasts return the leading `n` rows.

use std::path::Path;

use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_dense, lsq_solve, truncated_svd, CMatrix, RankPolicy};

/// Uniformly sampled state snapshots, one column per sample.
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    data: CMatrix,
    dt: f64,
    t0: f64,
}

impl SnapshotSet {
    pub fn new(data: CMatrix, dt: f64, t0: f64) -> Result<Self> {
        if data.cols() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 snapshots, got {}",
                data.cols()
            )));
        }
        if data.rows() == 0 {
            return Err(Error::InvalidInput(
                "snapshots have zero state dimension".into(),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "snapshot interval {dt} must be positive"
            )));
        }
        if !data.is_finite() {
            return Err(Error::InvalidInput("non-finite snapshot entry".into()));
        }
        Ok(Self { data, dt, t0 })
    }

    /// Builds from per-component time series of equal length.
    pub fn from_series(series: &[Vec<C64>], dt: f64, t0: f64) -> Result<Self> {
        let n = series.len();
        let m = series.first().map_or(0, Vec::len);
        if series.iter().any(|s| s.len() != m) {
            return Err(Error::Dimension("snapshot series lengths differ".into()));
        }
        Self::new(CMatrix::from_fn(n, m, |i, j| series[i][j]), dt, t0)
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn len(&self) -> usize {
        self.data.cols()
    }
    pub fn is_empty(&self) -> bool {
        self.data.cols() == 0
    }
    pub fn state_dim(&self) -> usize {
        self.data.rows()
    }

    /// Hankel-embedded snapshot matrix with `delay` stacked copies.
    pub fn hankel(&self, delay: usize) -> CMatrix {
        let n = self.data.rows();
        let cols = self.data.cols() + 1 - delay;
        CMatrix::from_fn(n * delay, cols, |i, j| self.data[(i % n, j + i / n)])
    }
}

/// How the mode amplitudes are determined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMethod {
    /// `b = Φ^+ x_0`.
    Project,
    /// Least-squares fit of `Φ Λ^i b` to every training snapshot.
    #[default]
    TrajectoryLsq,
}

/// A fitted DMD model.
#[derive(Clone, Debug)]
pub struct DmdModel {
    pub modes: CMatrix,
    pub disc_eigs: Vec<C64>,
    pub cont_freqs: Vec<C64>,
    pub amplitudes: Vec<C64>,
    pub dt: f64,
    pub t0: f64,
    pub delay: usize,
    pub base_dim: usize,
    /// Retained singular values of the embedded `X1`.
    pub singular_values: Vec<f64>,
}

impl DmdModel {
    /// A model with no modes; it predicts zero everywhere.
    pub fn empty(base_dim: usize, dt: f64, t0: f64, delay: usize) -> Self {
        Self {
            modes: CMatrix::zeros(base_dim * delay, 0),
            disc_eigs: Vec::new(),
            cont_freqs: Vec::new(),
            amplitudes: Vec::new(),
            dt,
            t0,
            delay,
            base_dim,
            singular_values: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.disc_eigs.len()
    }

    /// State at absolute time `t0 + t`.
    pub fn predict(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.base_dim];
        for (l, (&w, &b)) in self.cont_freqs.iter().zip(&self.amplitudes).enumerate() {
            let coeff = (C64::i() * w * t).exp() * b;
            for (o, &phi) in out.iter_mut().zip(self.modes.col(l)) {
                *o += phi * coeff;
            }
        }
        out
    }

    /// Predictions at `t0 + k·dt` for `k = 0..count`, one vector per time.
    pub fn predict_steps(&self, count: usize) -> Vec<Vec<C64>> {
        (0..count)
            .map(|k| self.predict(k as f64 * self.dt))
            .collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&DmdModelFile::from(self))?;
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DmdModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DmdModelFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// On-disk model layout; complex numbers are `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
struct DmdModelFile {
    dt: f64,
    t0: f64,
    delay: usize,
    base_dim: usize,
    rank: usize,
    mode_rows: usize,
    /// Column-major.
    modes: Vec<C64>,
    disc_eigs: Vec<C64>,
    cont_freqs: Vec<C64>,
    amplitudes: Vec<C64>,
    #[serde(default)]
    singular_values: Vec<f64>,
}

impl From<&DmdModel> for DmdModelFile {
    fn from(m: &DmdModel) -> Self {
        Self {
            dt: m.dt,
            t0: m.t0,
            delay: m.delay,
            base_dim: m.base_dim,
            rank: m.rank(),
            mode_rows: m.modes.rows(),
            modes: m.modes.as_slice().to_vec(),
            disc_eigs: m.disc_eigs.clone(),
            cont_freqs: m.cont_freqs.clone(),
            amplitudes: m.amplitudes.clone(),
            singular_values: m.singular_values.clone(),
        }
    }
}

impl TryFrom<DmdModelFile> for DmdModel {
    type Error = Error;

    fn try_from(f: DmdModelFile) -> Result<Self> {
        let modes = CMatrix::from_col_major(f.mode_rows, f.rank, f.modes)?;
        if f.disc_eigs.len() != f.rank
            || f.cont_freqs.len() != f.rank
            || f.amplitudes.len() != f.rank
        {
            return Err(Error::Dimension("model file: inconsistent rank".into()));
        }
        if f.mode_rows != f.base_dim * f.delay {
            return Err(Error::Dimension(
                "model file: mode rows != base_dim * delay".into(),
            ));
        }
        Ok(Self {
            modes,
            disc_eigs: f.disc_eigs,
            cont_freqs: f.cont_freqs,
            amplitudes: f.amplitudes,
            dt: f.dt,
            t0: f.t0,
            delay: f.delay,
            base_dim: f.base_dim,
            singular_values: f.singular_values,
        })
    }
}

/// Fits a DMD model to `snaps`.
pub fn fit(
    snaps: &SnapshotSet,
    policy: RankPolicy,
    amp_method: AmplitudeMethod,
    delay: usize,
) -> Result<DmdModel> {
    if delay == 0 {
        return Err(Error::InvalidInput("delay must be >= 1".into()));
    }
    if snaps.len() < delay + 2 {
        return Err(Error::InvalidInput(format!(
            "{} snapshots cannot support delay {delay} (need m - delay >= 2)",
            snaps.len()
        )));
    }
    let n = snaps.state_dim();
    let dt = snaps.dt();
    let x = snaps.hankel(delay);
    let m = x.cols();
    let x1 = x.column_range(0, m - 1);
    let x2 = x.column_range(1, m);

    let svd = truncated_svd(&x1, policy)?;
    let inv_sigma: Vec<C64> = svd.sigma.iter().map(|&s| C64::new(1.0 / s, 0.0)).collect();
    // X2 V Σ^{-1}
    let x2_v_sinv = x2.matmul(&svd.v).scale_columns(&inv_sigma);
    let a_tilde = svd.u.adjoint_matmul(&x2_v_sinv);
    let (lambdas, w) = eig_dense(&a_tilde)?;
    let phi_all = x2_v_sinv.matmul(&w);

    let mut keep = Vec::with_capacity(lambdas.len());
    for (l, lam) in lambdas.iter().enumerate() {
        if lam.norm() < f64::MIN_POSITIVE {
            warn!("dmd: eigenvalue {l} is zero; mode dropped");
        } else {
            keep.push(l);
        }
    }
    if keep.is_empty() {
        return Ok(DmdModel::empty(n, dt, snaps.t0(), delay));
    }
    let cols: Vec<Vec<C64>> = keep.iter().map(|&l| phi_all.col(l).to_vec()).collect();
    let modes = CMatrix::from_columns(phi_all.rows(), &cols);
    let disc_eigs: Vec<C64> = keep.iter().map(|&l| lambdas[l]).collect();
    let cont_freqs: Vec<C64> = disc_eigs.iter().map(|l| -C64::i() * l.ln() / dt).collect();

    let amplitudes = match amp_method {
        AmplitudeMethod::Project => lsq_solve(&modes, x.col(0))?,
        AmplitudeMethod::TrajectoryLsq => trajectory_amplitudes(&modes, &disc_eigs, &x)?,
    };

    Ok(DmdModel {
        modes,
        disc_eigs,
        cont_freqs,
        amplitudes,
        dt,
        t0: snaps.t0(),
        delay,
        base_dim: n,
        singular_values: svd.sigma,
    })
}

/// argmin_b Σ_i ‖Φ Λ^i b − x_i‖², reduced through an orthonormal basis of
/// range(Φ) so the stacked system has `rank(Φ)·m` rows instead of `rows(Φ)·m`.
fn trajectory_amplitudes(modes: &CMatrix, eigs: &[C64], x: &CMatrix) -> Result<Vec<C64>> {
    let r = modes.cols();
    let basis = truncated_svd(
        modes,
        RankPolicy::Threshold {
            rel: crate::numerics::svd::PINV_FLOOR,
        },
    )?;
    let q = &basis.u;
    let k = q.cols();
    // R = Σ V^H so that Φ = Q R
    let rmat = CMatrix::from_fn(k, r, |i, j| basis.v[(j, i)].conj() * basis.sigma[i]);

    let m = x.cols();
    let mut stacked = CMatrix::zeros(k * m, r);
    let mut rhs = Vec::with_capacity(k * m);
    let mut powers = vec![C64::new(1.0, 0.0); r];
    for i in 0..m {
        for j in 0..r {
            for row in 0..k {
                stacked[(i * k + row, j)] = rmat[(row, j)] * powers[j];
            }
        }
        rhs.extend(q.adjoint_mul_vec(x.col(i)));
        for (p, &lam) in powers.iter_mut().zip(eigs) {
            *p *= lam;
        }
    }
    lsq_solve(&stacked, &rhs)
}

/// Relative Frobenius error of the model over the snapshot window.
pub fn reconstruction_error(model: &DmdModel, snaps: &SnapshotSet) -> f64 {
    let data = snaps.data();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..data.cols() {
        let t = snaps.t0() + j as f64 * snaps.dt() - model.t0;
        let pred = model.predict(t);
        for (p, x) in pred.iter().zip(data.col(j)) {
            num += (p - x).norm_sqr();
            den += x.norm_sqr();
        }
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { 1.0 };
    }
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn real_series(f: impl Fn(f64) -> f64, dt: f64, m: usize) -> Vec<C64> {
        (0..m).map(|i| C64::new(f(i as f64 * dt), 0.0)).collect()
    }

    #[test]
    fn single_exponential() {
        let snaps =
            SnapshotSet::from_series(&[real_series(|t| (-t).exp(), 0.1, 50)], 0.1, 0.0).unwrap();
        let model = fit(
            &snaps,
            RankPolicy::default(),
            AmplitudeMethod::TrajectoryLsq,
            1,
        )
        .unwrap();
        assert_eq!(model.rank(), 1);
        assert!((model.disc_eigs[0] - C64::new((-0.1f64).exp(), 0.0)).norm() < 1e-12);
        assert!((model.cont_freqs[0] - C64::i()).norm() < 1e-10);
        assert!((model.predict(2.0)[0].re - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rotation_frequencies_and_periodicity() {
        let dt = 0.1;
        let snaps = SnapshotSet::from_series(
            &[
                real_series(f64::cos, dt, 100),
                real_series(f64::sin, dt, 100),
            ],
            dt,
            0.0,
        )
        .unwrap();
        let model = fit(
            &snaps,
            RankPolicy::default(),
            AmplitudeMethod::TrajectoryLsq,
            1,
        )
        .unwrap();
        assert_eq!(model.rank(), 2);
        let mut freqs: Vec<f64> = model.cont_freqs.iter().map(|w| w.re).collect();
        freqs.sort_by(f64::total_cmp);
        assert!((freqs[0] + 1.0).abs() < 1e-10 && (freqs[1] - 1.0).abs() < 1e-10);
        assert!(model.cont_freqs.iter().all(|w| w.im.abs() < 1e-10));
        for t in [0.3, 1.7, 5.0] {
            let a = model.predict(t);
            let b = model.predict(t + 2.0 * PI);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-8));
        }
    }

    #[test]
    fn frequency_branch_consistency() {
        let dt = 0.1;
        let snaps = SnapshotSet::from_series(
            &[real_series(|t| (3.0 * t).cos() * (-0.2 * t).exp(), dt, 60)],
            dt,
            0.0,
        )
        .unwrap();
        let model = fit(
            &snaps,
            RankPolicy::default(),
            AmplitudeMethod::TrajectoryLsq,
            4,
        )
        .unwrap();
        for (w, l) in model.cont_freqs.iter().zip(&model.disc_eigs) {
            assert!(((C64::i() * w * dt).exp() - l).norm() < 1e-12);
            assert!(w.re > -PI / dt && w.re <= PI / dt);
        }
    }

    #[test]
    fn delay_embedding_captures_damped_oscillation() {
        // a scalar damped cosine needs rank 2, impossible without embedding
        let dt = 0.05;
        let f = |t: f64| (2.0 * t).cos() * (-0.3 * t).exp();
        let snaps = SnapshotSet::from_series(&[real_series(f, dt, 80)], dt, 0.0).unwrap();
        let model = fit(
            &snaps,
            RankPolicy::default(),
            AmplitudeMethod::TrajectoryLsq,
            10,
        )
        .unwrap();
        assert_eq!(model.rank(), 2);
        for t in [0.0, 3.0, 12.0] {
            assert!((model.predict(t)[0].re - f(t)).abs() < 1e-9);
            assert!(model.predict(t)[0].im.abs() < 1e-9);
        }
    }

    #[test]
    fn empty_model_error_is_one() {
        let snaps =
            SnapshotSet::from_series(&[real_series(|t| t + 1.0, 0.1, 5)], 0.1, 0.0).unwrap();
        let model = DmdModel::empty(1, 0.1, 0.0, 1);
        assert_eq!(reconstruction_error(&model, &snaps), 1.0);
    }

    #[test]
    fn noisy_data_error_tracks_noise_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dt = 0.05;
        let sigma = 1e-3;
        let m = 200;
        let clean = |t: f64| (-0.5 * t).exp() * (1.5 * t).cos();
        let noisy: Vec<C64> = (0..m)
            .map(|i| {
                // Box-Muller
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen();
                let g = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
                C64::new(clean(i as f64 * dt) + sigma * g, 0.0)
            })
            .collect();
        let rms = (noisy.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64).sqrt();
        let snaps = SnapshotSet::from_series(&[noisy], dt, 0.0).unwrap();
        let model = fit(
            &snaps,
            RankPolicy::Fixed { rank: 2 },
            AmplitudeMethod::TrajectoryLsq,
            20,
        )
        .unwrap();
        let err = reconstruction_error(&model, &snaps);
        let rel_noise = sigma / rms;
        assert!(
            err < 10.0 * rel_noise && err > rel_noise / 10.0,
            "err {err} noise {rel_noise}"
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let one = CMatrix::zeros(1, 1);
        assert!(SnapshotSet::new(one, 0.1, 0.0).is_err());
        let snaps = SnapshotSet::from_series(&[real_series(|t| t, 0.1, 4)], 0.1, 0.0).unwrap();
        assert!(fit(&snaps, RankPolicy::default(), AmplitudeMethod::Project, 3).is_err());
        assert!(fit(&snaps, RankPolicy::default(), AmplitudeMethod::Project, 0).is_err());
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let dt = 0.1;
        let snaps = SnapshotSet::from_series(
            &[real_series(|t| (-0.3 * t).exp() * t.sin(), dt, 40)],
            dt,
            0.0,
        )
        .unwrap();
        let model = fit(&snaps, RankPolicy::default(), AmplitudeMethod::Project, 5).unwrap();
        let back = DmdModel::from_json(&model.to_json().unwrap()).unwrap();
        for t in [0.0, 1.3, 9.9] {
            let a = model.predict(t);
            let b = back.predict(t);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }
}

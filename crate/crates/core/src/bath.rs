//! Spectral densities and their sum-of-exponentials correlation expansions.
//!
//! The bath correlation function
//!
//! ```text
//! C(t) = (1/π) ∫ dω J(ω) e^{-iωt} / (1 - e^{-βω})
//! ```
//!
//! is evaluated for `t > 0` by closing the contour in the lower half plane.
//! Each lower-half-plane pole `p` of `J` contributes `η = -2i Res_p J / (1 - e^{-βp})`
//! with rate `γ = i p`; each Matsubara pole `ω = -iν_k`, `ν_k = 2πk/β`,
//! contributes `η_k = -2i J(-iν_k) / β` with rate `ν_k`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bath spectral density in units where ħ = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralDensity {
    /// `2λγω / (ω² + γ²)`.
    Drude { lambda: f64, gamma: f64 },
    /// `2λ'ω₀²ζω / ((ω² − ω₀²)² + ω²ζ²)`.
    Brownian { lambda: f64, omega0: f64, zeta: f64 },
}

impl SpectralDensity {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpectralDensity::Drude { lambda, gamma } => lambda > 0.0 && gamma > 0.0,
            SpectralDensity::Brownian {
                lambda,
                omega0,
                zeta,
            } => lambda > 0.0 && omega0 > 0.0 && zeta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "spectral density parameters must be positive: {self:?}"
            )))
        }
    }

    /// `J(ω)` on the real axis.
    pub fn eval(&self, omega: f64) -> f64 {
        self.eval_complex(C64::new(omega, 0.0)).re
    }

    /// Analytic continuation of `J` to complex frequency.
    pub fn eval_complex(&self, w: C64) -> C64 {
        match *self {
            SpectralDensity::Drude { lambda, gamma } => {
                2.0 * lambda * gamma * w / (w * w + gamma * gamma)
            }
            SpectralDensity::Brownian {
                lambda,
                omega0,
                zeta,
            } => {
                let w0sq = omega0 * omega0;
                let d = (w * w - w0sq) * (w * w - w0sq) + w * w * zeta * zeta;
                2.0 * lambda * w0sq * zeta * w / d
            }
        }
    }

    /// Lower-half-plane poles of `J` with the residue of `J` at each.
    fn lhp_poles(&self) -> Result<Vec<(C64, C64)>> {
        match *self {
            SpectralDensity::Drude { lambda, gamma } => {
                Ok(vec![(C64::new(0.0, -gamma), C64::new(lambda * gamma, 0.0))])
            }
            SpectralDensity::Brownian {
                lambda,
                omega0,
                zeta,
            } => {
                if zeta >= 2.0 * omega0 {
                    return Err(Error::UnsupportedRegime(format!(
                        "overdamped Brownian oscillator (zeta = {zeta} >= 2 omega0 = {})",
                        2.0 * omega0
                    )));
                }
                let w1 = (omega0 * omega0 - 0.25 * zeta * zeta).sqrt();
                let w0sq = omega0 * omega0;
                let residue = |p: C64| {
                    let dprime = 4.0 * p * (p * p - w0sq) + 2.0 * p * zeta * zeta;
                    2.0 * lambda * w0sq * zeta * p / dprime
                };
                let poles = [C64::new(w1, -0.5 * zeta), C64::new(-w1, -0.5 * zeta)];
                Ok(poles.iter().map(|&p| (p, residue(p))).collect())
            }
        }
    }
}

/// Which system operator a bath couples through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingChannel {
    /// `|A⟩⟨A|`, the donor-acceptor energy-gap fluctuation.
    DonorGap,
    /// `|D⟩⟨A| + |A⟩⟨D|`, the fluctuating bridge coupling.
    Bridge,
}

impl CouplingChannel {
    /// 2×2 coupling operator, row-major `[DD, DA, AD, AA]`.
    pub fn operator(&self) -> [C64; 4] {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        match self {
            CouplingChannel::DonorGap => [z, z, z, o],
            CouplingChannel::Bridge => [z, o, o, z],
        }
    }
}

/// One exponential `η e^{-γt}` of `C(t)`; `eta_bar` is the matching
/// prefactor of `C(t)^*` on the same exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub eta: C64,
    pub eta_bar: C64,
    pub gamma: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathExpansion {
    pub density: SpectralDensity,
    pub terms: Vec<ExpTerm>,
    pub n_matsubara: usize,
    pub beta: f64,
    pub coupling: CouplingChannel,
    /// Time-integrated weight of the neglected Matsubara tail, `Σ_{k>n} |η_k| / ν_k`.
    pub truncation_residual: f64,
}

impl BathExpansion {
    /// `Σ η_k e^{-γ_k t}` for `t ≥ 0`.
    pub fn correlation(&self, t: f64) -> C64 {
        self.terms
            .iter()
            .map(|term| term.eta * (-term.gamma * t).exp())
            .sum()
    }

    /// `C(t)` for `t < 0`, built independently from the upper-half-plane
    /// residues with the same Matsubara truncation.
    pub fn correlation_negative_time(&self, t: f64) -> C64 {
        assert!(t <= 0.0);
        let j = &self.density;
        let beta = self.beta;
        let mut acc = C64::new(0.0, 0.0);
        // poles of J in the upper half plane are the conjugates of the lower ones
        for (p, res) in j.lhp_poles().expect("expansion was built, poles exist") {
            let q = p.conj();
            let rq = res.conj();
            acc += 2.0 * C64::i() * rq / (1.0 - (-beta * q).exp()) * (-C64::i() * q * t).exp();
        }
        for k in 1..=self.n_matsubara {
            let nu = 2.0 * PI * k as f64 / beta;
            acc += 2.0 * C64::i() * j.eval_complex(C64::new(0.0, nu)) / beta * (nu * t).exp();
        }
        acc
    }
}

fn matsubara_term(j: &SpectralDensity, beta: f64, k: usize) -> (C64, f64) {
    let nu = 2.0 * PI * k as f64 / beta;
    let eta = -2.0 * C64::i() * j.eval_complex(C64::new(0.0, -nu)) / beta;
    (eta, nu)
}

fn matsubara_tail_weight(j: &SpectralDensity, beta: f64, n: usize) -> f64 {
    const EXTRA: usize = 20_000;
    let mut sum = 0.0;
    let mut last = 0.0;
    for k in n + 1..=n + EXTRA {
        let (eta, nu) = matsubara_term(j, beta, k);
        last = eta.norm() / nu;
        sum += last;
    }
    // terms fall off at least as 1/k^2; integrate the remainder
    sum + last * (n + EXTRA) as f64
}

/// Residue (pole + Matsubara) decomposition of the bath correlation function.
pub fn correlation_expansion(
    j: SpectralDensity,
    beta: f64,
    n_matsubara: usize,
    coupling: CouplingChannel,
) -> Result<BathExpansion> {
    j.validate()?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beta = {beta} must be positive"
        )));
    }
    let mut raw: Vec<(C64, C64)> = Vec::new();
    for (p, res) in j.lhp_poles()? {
        let eta = -2.0 * C64::i() * res / (1.0 - (-beta * p).exp());
        raw.push((eta, C64::i() * p));
    }
    for k in 1..=n_matsubara {
        let (eta, nu) = matsubara_term(&j, beta, k);
        if !(eta.re.is_finite() && eta.im.is_finite()) {
            return Err(Error::UnsupportedRegime(format!(
                "Matsubara frequency {nu} coincides with a pole of the spectral density"
            )));
        }
        raw.push((eta, C64::new(nu, 0.0)));
    }
    if raw.iter().any(|&(_, g)| {
        (raw.iter()
            .filter(|&&(_, h)| (g - h).norm() < 1e-12 * g.norm())
            .count())
            > 1
    }) {
        return Err(Error::UnsupportedRegime(
            "degenerate exponential rates in bath expansion".into(),
        ));
    }

    let terms = raw
        .iter()
        .map(|&(eta, gamma)| {
            let partner = raw
                .iter()
                .find(|&&(_, g)| (g - gamma.conj()).norm() <= 1e-12 * gamma.norm())
                .expect("pole set is closed under conjugation");
            ExpTerm {
                eta,
                eta_bar: partner.0.conj(),
                gamma,
            }
        })
        .collect();

    Ok(BathExpansion {
        density: j,
        terms,
        n_matsubara,
        beta,
        coupling,
        truncation_residual: matsubara_tail_weight(&j, beta, n_matsubara),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRUDE: SpectralDensity = SpectralDensity::Drude {
        lambda: 1.0,
        gamma: 1.0,
    };
    const BROWNIAN: SpectralDensity = SpectralDensity::Brownian {
        lambda: 0.2,
        omega0: 1.0,
        zeta: 1.0,
    };

    /// Adaptive Simpson on [a, b].
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let diff = left + right - whole;
            if depth == 0 || diff.abs() <= 15.0 * tol {
                left + right + diff / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    /// Re C(0) = (1/π) ∫_0^∞ J(ω) coth(βω/2) dω, via ω = tan θ.
    fn re_c0_quadrature(j: &SpectralDensity, beta: f64) -> f64 {
        let f = |theta: f64| {
            if theta <= 0.0 {
                // limit ω → 0: J(ω) coth(βω/2) → 2 J'(0) / β
                let h = 1e-8;
                return 2.0 * j.eval(h) / h / beta;
            }
            let w = theta.tan();
            let sec2 = 1.0 + w * w;
            j.eval(w) / (0.5 * beta * w).tanh() * sec2
        };
        simpson(&f, 0.0, 0.5 * PI - 1e-9, 1e-12) / PI
    }

    #[test]
    fn drude_value_at_unit_frequency() {
        assert!((DRUDE.eval(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn odd_in_frequency() {
        for j in [DRUDE, BROWNIAN] {
            assert_eq!(j.eval(0.0), 0.0);
            for w in [0.1, 1.0, 3.7, 50.0] {
                assert_eq!(j.eval(-w), -j.eval(w));
            }
        }
    }

    #[test]
    fn brownian_resonance() {
        assert!((BROWNIAN.eval(1.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn drude_pole_term() {
        let exp = correlation_expansion(DRUDE, 1.0, 0, CouplingChannel::DonorGap).unwrap();
        assert_eq!(exp.terms.len(), 1);
        let cot = 1.0 / 0.5f64.tan();
        assert!((exp.terms[0].eta - C64::new(cot, -1.0)).norm() < 1e-14);
        assert!((exp.terms[0].gamma - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((cot - 1.8305).abs() < 1e-4);
    }

    #[test]
    fn brownian_pole_rates() {
        let exp = correlation_expansion(BROWNIAN, 1.0, 0, CouplingChannel::Bridge).unwrap();
        let s3 = 3f64.sqrt() / 2.0;
        let mut rates: Vec<C64> = exp.terms.iter().map(|t| t.gamma).collect();
        rates.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((rates[0] - C64::new(0.5, -s3)).norm() < 1e-14);
        assert!((rates[1] - C64::new(0.5, s3)).norm() < 1e-14);
        // the two pole terms are each other's conjugation partners
        assert!((exp.terms[0].eta_bar - exp.terms[1].eta.conj()).norm() < 1e-15);
    }

    #[test]
    fn rates_have_positive_real_part() {
        for (j, ch) in [
            (DRUDE, CouplingChannel::DonorGap),
            (BROWNIAN, CouplingChannel::Bridge),
        ] {
            let exp = correlation_expansion(j, 0.7, 8, ch).unwrap();
            assert!(exp.terms.iter().all(|t| t.gamma.re > 0.0));
        }
    }

    #[test]
    fn overdamped_brownian_rejected() {
        let j = SpectralDensity::Brownian {
            lambda: 0.2,
            omega0: 1.0,
            zeta: 2.5,
        };
        assert!(matches!(
            correlation_expansion(j, 1.0, 2, CouplingChannel::Bridge),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let j = SpectralDensity::Drude {
            lambda: -1.0,
            gamma: 1.0,
        };
        assert!(correlation_expansion(j, 1.0, 0, CouplingChannel::DonorGap).is_err());
        assert!(correlation_expansion(DRUDE, 0.0, 0, CouplingChannel::DonorGap).is_err());
    }

    #[test]
    fn drude_pole_term_matches_quadrature() {
        // Drude C(0) diverges, so recover Re η_0 from Re C(t) at t = 0.5:
        // (1/π)∫_0^∞ J(ω) coth(βω/2) cos(ωt) dω, minus the Matsubara terms.
        let t = 0.5;
        let cutoff = 2000.0;
        let n = 400_000;
        let h = cutoff / n as f64;
        let f = |w: f64| {
            if w == 0.0 {
                2.0 * 2.0 // 2 J'(0) / β with J'(0) = 2λ/γ
            } else {
                DRUDE.eval(w) / (0.5 * w).tanh() * (w * t).cos()
            }
        };
        let mut body = f(0.0) + f(cutoff);
        for i in 1..n {
            body += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        body *= h / 3.0;
        // tail: J coth ≈ 2λγ/ω beyond the cutoff; ∫_W^∞ cos(ωt)/ω = -Ci(Wt)
        let x = cutoff * t;
        let ci = x.sin() / x - x.cos() / (x * x);
        let re_c = (body - 2.0 * ci) / PI;

        let exp = correlation_expansion(DRUDE, 1.0, 60, CouplingChannel::DonorGap).unwrap();
        let matsubara: f64 = exp.terms[1..]
            .iter()
            .map(|k| (k.eta * (-k.gamma * t).exp()).re)
            .sum();
        let re_eta0 = (re_c - matsubara) / (-t).exp();
        let expected = exp.terms[0].eta.re;
        assert!((re_eta0 - expected).abs() < 1e-3, "{re_eta0} vs {expected}");
    }

    #[test]
    fn brownian_c0_matches_quadrature() {
        let exact = re_c0_quadrature(&BROWNIAN, 1.0);
        let exp = correlation_expansion(BROWNIAN, 1.0, 3000, CouplingChannel::Bridge).unwrap();
        let sum: f64 = exp.terms.iter().map(|t| t.eta.re).sum();
        assert!((sum - exact).abs() < 1e-6, "{sum} vs {exact}");
        let im: f64 = exp.terms.iter().map(|t| t.eta.im).sum();
        assert!(im.abs() < 1e-12);
    }

    #[test]
    fn brownian_c0_error_decreases_with_matsubara_count() {
        let exact = re_c0_quadrature(&BROWNIAN, 1.0);
        let mut prev = f64::INFINITY;
        for n in 0..=10 {
            let exp = correlation_expansion(BROWNIAN, 1.0, n, CouplingChannel::Bridge).unwrap();
            let err = (exact - exp.terms.iter().map(|t| t.eta.re).sum::<f64>()).abs();
            assert!(err < prev, "n = {n}: {err} !< {prev}");
            prev = err;
        }
    }

    #[test]
    fn truncation_residual_decreases() {
        for j in [DRUDE, BROWNIAN] {
            let mut prev = f64::INFINITY;
            for n in 0..=10 {
                let ch = CouplingChannel::DonorGap;
                let r = correlation_expansion(j, 1.0, n, ch)
                    .unwrap()
                    .truncation_residual;
                assert!(r < prev && r > 0.0);
                prev = r;
            }
        }
    }

    #[test]
    fn detailed_balance_conjugation() {
        for j in [DRUDE, BROWNIAN] {
            let exp = correlation_expansion(j, 1.0, 6, CouplingChannel::DonorGap).unwrap();
            for i in 1..=50 {
                let t = 0.1 * i as f64;
                let lhs = exp.correlation_negative_time(-t);
                let rhs = exp.correlation(t).conj();
                assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()), "t = {t}");
            }
        }
    }
}

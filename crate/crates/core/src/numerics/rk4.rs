use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Reusable stage buffers for [`rk4_step_into`].
#[derive(Clone, Debug, Default)]
pub struct Rk4Workspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn ensure(&mut self, n: usize) {
        if self.k1.len() != n {
            *self = Self::new(n);
        }
    }
}

/// One classical Runge-Kutta step of `dy/dt = f(t, y)`, in place.
///
/// `f(t, y, dy)` writes the derivative into `dy`.
pub fn rk4_step_into<F>(
    f: &mut F,
    t: f64,
    y: &mut [C64],
    h: f64,
    ws: &mut Rk4Workspace,
) -> Result<()>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rk4 step size {h} must be positive"
        )));
    }
    let n = y.len();
    ws.ensure(n);
    let Rk4Workspace {
        k1,
        k2,
        k3,
        k4,
        tmp,
    } = ws;

    f(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + k1[i] * (0.5 * h);
    }
    f(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + k2[i] * (0.5 * h);
    }
    f(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + k3[i] * h;
    }
    f(t + h, tmp, k4);
    let w = h / 6.0;
    let mut finite = true;
    for i in 0..n {
        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        finite &= y[i].re.is_finite() && y[i].im.is_finite();
    }
    if !finite {
        return Err(Error::BlowUp { t: t + h });
    }
    Ok(())
}

/// Allocating convenience wrapper around [`rk4_step_into`].
pub fn rk4_step<F>(mut f: F, t: f64, y: &[C64], h: f64) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let mut out = y.to_vec();
    let mut ws = Rk4Workspace::new(y.len());
    rk4_step_into(&mut f, t, &mut out, h, &mut ws)?;
    Ok(out)
}

/// Integrates over `steps` uniform steps of size `h` starting at `t0`, calling
/// `observe(k, y)` at every grid point `k = 0..=steps` (including the start).
/// Each grid step is taken as `substeps` equal RK4 steps.
pub fn integrate_fixed<F, O>(
    f: &mut F,
    t0: f64,
    h: f64,
    steps: usize,
    substeps: usize,
    y: &mut [C64],
    mut observe: O,
) -> Result<()>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, &[C64]) -> Result<()>,
{
    let substeps = substeps.max(1);
    let hs = h / substeps as f64;
    let mut ws = Rk4Workspace::new(y.len());
    observe(0, y)?;
    for k in 0..steps {
        let tk = t0 + k as f64 * h;
        for s in 0..substeps {
            rk4_step_into(f, tk + s as f64 * hs, y, hs, &mut ws)?;
        }
        observe(k + 1, y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::testing::expm;
    use crate::numerics::CMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_rhs_is_identity() {
        let y = rk4_step(
            |_, _, dy: &mut [C64]| dy.fill(c(0., 0.)),
            0.0,
            &[c(1., 0.), c(0., 1.)],
            0.1,
        )
        .unwrap();
        assert_eq!(y, vec![c(1., 0.), c(0., 1.)]);
    }

    #[test]
    fn exponential_decay() {
        let mut y = vec![c(1., 0.)];
        let mut ws = Rk4Workspace::new(1);
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = -y[0];
        for k in 0..100 {
            rk4_step_into(&mut f, k as f64 * 0.01, &mut y, 0.01, &mut ws).unwrap();
        }
        assert!((y[0].re - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation_returns_to_start() {
        let steps = 10_000usize;
        let h = 2.0 * PI / steps as f64;
        let mut y = vec![c(1., 0.)];
        let mut ws = Rk4Workspace::new(1);
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = C64::i() * y[0];
        for k in 0..steps {
            rk4_step_into(&mut f, k as f64 * h, &mut y, h, &mut ws).unwrap();
        }
        assert!((y[0] - c(1., 0.)).norm() < 1e-6);
        assert!((y[0].norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn blow_up_reports_time() {
        let err = rk4_step(
            |_, _, dy: &mut [C64]| dy[0] = c(f64::INFINITY, 0.),
            2.0,
            &[c(1., 0.)],
            0.5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BlowUp { t } if (t - 2.5).abs() < 1e-15));
    }

    #[test]
    fn rejects_non_positive_step() {
        assert!(rk4_step(|_, _, _: &mut [C64]| {}, 0.0, &[c(1., 0.)], 0.0).is_err());
    }

    #[test]
    fn linear_system_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = CMatrix::from_fn(4, 4, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let y0: Vec<C64> = (0..4).map(|_| c(rng.gen(), rng.gen())).collect();
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let y1 = rk4_step(
                |_, y: &[C64], dy: &mut [C64]| dy.copy_from_slice(&a.mul_vec(y)),
                0.0,
                &y0,
                h,
            )
            .unwrap();
            let exact = expm(&a.scale(c(h, 0.))).mul_vec(&y0);
            let e: f64 = y1
                .iter()
                .zip(&exact)
                .map(|(p, q)| (p - q).norm_sqr())
                .sum::<f64>()
                .sqrt();
            errs.push(e);
        }
        // local error is O(h^5)
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.5, "local order {order}");
    }
}

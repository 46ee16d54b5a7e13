use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Heun predictor-corrector for `y'(t_n) = f(t_n, y_n) + ∫₀^{t_n} g(n, n−j, y_j)`,
/// with the memory integral taken by the trapezoid rule on the same grid.
///
/// `local(t, y, out)` writes `f`; `memory(n, lag, y, out)` adds the integrand
/// at `t_n` for a past state `y = y_{n−lag}` into `out`. Lags beyond `support`
/// contribute nothing and are skipped. Cost is `O(N·min(N, support))`.
pub(crate) fn volterra_heun<L, M>(
    y0: &[C64],
    t0: f64,
    dt: f64,
    len: usize,
    support: usize,
    mut local: L,
    mut memory: M,
) -> Result<Vec<Vec<C64>>>
where
    L: FnMut(f64, &[C64], &mut [C64]),
    M: FnMut(usize, usize, &[C64], &mut [C64]),
{
    let d = y0.len();
    let mut ys: Vec<Vec<C64>> = Vec::with_capacity(len);
    ys.push(y0.to_vec());
    let zero = C64::new(0.0, 0.0);
    let mut f_prev = vec![zero; d];
    let mut f_next = vec![zero; d];
    let mut history = vec![zero; d];
    let mut tmp = vec![zero; d];
    local(t0, y0, &mut f_prev);

    for n in 0..len.saturating_sub(1) {
        let m = n + 1;
        let tm = t0 + m as f64 * dt;
        // history part of the trapezoid sum at t_m: every j < m
        history.fill(zero);
        tmp.fill(zero);
        if m <= support {
            memory(m, m, &ys[0], &mut tmp);
            for k in 0..d {
                history[k] += 0.5 * tmp[k];
            }
        }
        for j in m.saturating_sub(support).max(1)..m {
            memory(m, m - j, &ys[j], &mut history);
        }

        let mut pred = ys[n].clone();
        for k in 0..d {
            pred[k] += dt * f_prev[k];
        }
        let eval = |y: &[C64], out: &mut [C64], local: &mut L, memory: &mut M, tmp: &mut Vec<C64>| {
            local(tm, y, out);
            tmp.fill(zero);
            memory(m, 0, y, tmp);
            for k in 0..d {
                out[k] += dt * (history[k] + 0.5 * tmp[k]);
            }
        };
        eval(&pred, &mut f_next, &mut local, &mut memory, &mut tmp);
        let mut corr = ys[n].clone();
        for k in 0..d {
            corr[k] += 0.5 * dt * (f_prev[k] + f_next[k]);
        }
        eval(&corr, &mut f_next, &mut local, &mut memory, &mut tmp);
        if corr.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::BlowUp { t: tm });
        }
        std::mem::swap(&mut f_prev, &mut f_next);
        ys.push(corr);
    }
    Ok(ys)
}

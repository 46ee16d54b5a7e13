use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use super::series::KernelSeries;

/// Frequency-domain kernel `F(ω) = dt Σ_n k(t_n) e^{−iωt_n}` on the DFT frequencies.
#[derive(Clone, Debug)]
pub struct KernelSpectrum {
    /// Ascending angular frequencies `2πj/(N·dt)`, `j = −⌊N/2⌋ .. ⌈N/2⌉−1`.
    pub omega: Vec<f64>,
    pub labels: Vec<String>,
    pub data: Vec<Vec<C64>>,
}

impl KernelSpectrum {
    pub fn get(&self, label: &str) -> Option<&[C64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.data[i].as_slice())
    }

    /// Index of `ω = 0`.
    pub fn dc_index(&self) -> usize {
        self.omega.len() / 2
    }
}

pub fn kernel_fft(series: &KernelSeries) -> KernelSpectrum {
    let n = series.len();
    let dt = series.grid.dt;
    let t0 = series.grid.t0;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2;
    let omega: Vec<f64> = (0..n)
        .map(|j| TAU * (j as f64 - half as f64) / (n as f64 * dt))
        .collect();
    let data = series
        .components()
        .map(|(_, s)| {
            let mut buf = s.to_vec();
            fft.process(&mut buf);
            // reorder so that ω ascends, and account for a grid not starting at 0
            (0..n)
                .map(|j| {
                    let src = (j + n - half) % n;
                    buf[src] * dt * C64::from_polar(1.0, -omega[j] * t0)
                })
                .collect()
        })
        .collect();
    KernelSpectrum {
        omega,
        labels: series.labels().to_vec(),
        data,
    }
}

/// `dt Σ_n k(t_n)`, the zero-frequency value of [`kernel_fft`].
pub fn dc_component(samples: &[C64], dt: f64) -> C64 {
    samples.iter().sum::<C64>() * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    fn series(dt: f64, vals: Vec<C64>) -> KernelSeries {
        let grid = TimeGrid::new(0.0, dt, vals.len()).unwrap();
        KernelSeries::new(grid, vec!["k".into()], vec![vals]).unwrap()
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let mut v = vec![C64::new(0.0, 0.0); 64];
        v[0] = C64::new(1.0, 0.0);
        let sp = kernel_fft(&series(0.05, v));
        for z in sp.get("k").unwrap() {
            assert!((z.norm() - 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_gives_lorentzian() {
        let dt = 1e-3;
        let n = 20_001;
        let v = (0..n).map(|k| C64::new((-(k as f64) * dt).exp(), 0.0)).collect();
        let sp = kernel_fft(&series(dt, v));
        let mut checked = 0;
        for (w, z) in sp.omega.iter().zip(sp.get("k").unwrap()) {
            if w.abs() <= 5.0 {
                let exact = 1.0 / C64::new(1.0, *w);
                assert!((z - exact).norm() < 1e-3, "ω={w}: {z} vs {exact}");
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn dc_bin_is_rectangle_sum() {
        let v: Vec<C64> = (0..33).map(|k| C64::new((k as f64 * 0.3).cos(), 0.2)).collect();
        let s = series(0.1, v.clone());
        let sp = kernel_fft(&s);
        assert_eq!(sp.omega[sp.dc_index()], 0.0);
        assert!((sp.get("k").unwrap()[sp.dc_index()] - dc_component(&v, 0.1)).norm() < 1e-13);
    }
}

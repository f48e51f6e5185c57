//! Adaptive 21-point Gauss–Kronrod quadrature for vector-valued integrands
//! with user-supplied breakpoints.
//!
//! The demand integrands are piecewise smooth with kinks wherever a `max`
//! switches branch, so callers pass those kinks as breakpoints and each piece
//! is integrated separately. Pieces are bisected until the Kronrod error
//! estimate (QUADPACK rescaling) falls below the tolerance share of the piece.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_064_998,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_depth: 30,
        }
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

struct Workspace {
    fv: Vec<f64>,
    gauss: Vec<f64>,
    kronrod: Vec<f64>,
    res_abs: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            fv: vec![0.0; 21 * dim],
            gauss: vec![0.0; dim],
            kronrod: vec![0.0; dim],
            res_abs: vec![0.0; dim],
        }
    }
}

/// One Gauss–Kronrod pass over `[a, b]`; returns the largest component error
/// and leaves the Kronrod estimate in `ws.kronrod`.
fn gk21<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, dim: usize, ws: &mut Workspace) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for (k, x) in XGK.iter().enumerate() {
        let (lo, hi) = ws.fv.split_at_mut((2 * k + 1) * dim);
        let dx = half * x;
        f(center - dx, &mut lo[2 * k * dim..]);
        if k < 10 {
            f(center + dx, &mut hi[..dim]);
        }
    }
    let mut worst = 0.0_f64;
    for d in 0..dim {
        let at = |slot: usize| ws.fv[slot * dim + d];
        let mid = at(20);
        let mut gauss = 0.0;
        let mut kron = WGK[10] * mid;
        let mut res_abs = (WGK[10] * mid).abs();
        for k in 0..10 {
            let sum = at(2 * k) + at(2 * k + 1);
            kron += WGK[k] * sum;
            res_abs += WGK[k] * (at(2 * k).abs() + at(2 * k + 1).abs());
            if k % 2 == 1 {
                gauss += WG[k / 2] * sum;
            }
        }
        let mean = 0.5 * kron;
        let mut res_asc = WGK[10] * (mid - mean).abs();
        for (k, w) in WGK[..10].iter().enumerate() {
            res_asc += w * ((at(2 * k) - mean).abs() + (at(2 * k + 1) - mean).abs());
        }
        ws.gauss[d] = gauss * half;
        ws.kronrod[d] = kron * half;
        ws.res_abs[d] = res_abs * half.abs();
        let err = rescale_error((kron - gauss) * half, res_abs * half.abs(), res_asc * half.abs());
        worst = worst.max(err);
    }
    worst
}

impl Quadrature {
    /// Integrates the `dim`-vector valued `f` over `[a, b]`, splitting first
    /// at every breakpoint strictly inside the interval. Returns an error
    /// carrying the summed error estimate of unresolved pieces.
    pub fn integrate_vec<F>(&self, dim: usize, a: f64, b: f64, breaks: &[f64], mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &mut [f64]),
    {
        let mut out = vec![0.0; dim];
        if !(b > a) {
            return Ok(out);
        }
        let mut points: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        points.push(a);
        points.push(b);
        points.sort_by(f64::total_cmp);
        points.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);

        let total = b - a;
        let mut ws = Workspace::new(dim);
        let mut unresolved = 0.0;
        let mut stack: Vec<(f64, f64, u32)> = Vec::new();
        for w in points.windows(2) {
            stack.push((w[0], w[1], 0));
            while let Some((lo, hi, depth)) = stack.pop() {
                if hi <= lo {
                    continue;
                }
                let err = gk21(&mut f, lo, hi, dim, &mut ws);
                let scale = ws.kronrod.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                let allowed = (self.abs_tol * (hi - lo) / total).max(self.rel_tol * scale);
                if err <= allowed || depth >= self.max_depth {
                    if err > allowed {
                        unresolved += err;
                    }
                    for (o, k) in out.iter_mut().zip(&ws.kronrod) {
                        *o += k;
                    }
                } else {
                    let mid = 0.5 * (lo + hi);
                    stack.push((mid, hi, depth + 1));
                    stack.push((lo, mid, depth + 1));
                }
            }
        }
        if unresolved > self.abs_tol {
            return Err(Error::Quadrature { residual: unresolved });
        }
        Ok(out)
    }

    pub fn integrate<F>(&self, a: f64, b: f64, breaks: &[f64], mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        self.integrate_vec(1, a, b, breaks, |x, out| out[0] = f(x))
            .map(|v| v[0])
    }
}

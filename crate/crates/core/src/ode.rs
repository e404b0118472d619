//! Embedded adaptive Runge-Kutta integration with continuous dense output.
//!
//! The stepper is Verner's efficient 6(5) pair: 9 stages, FSAL, plus one
//! extra stage evaluated at the step midpoint that lifts the interpolant to
//! 5th order. Dense output is what the rest of the crate builds on: event
//! localization, composite quadrature over trajectories and phase alignment
//! all evaluate the interpolant rather than re-integrating.

use crate::error::CoreError;

/// Number of stages retained per step for dense output.
pub const STAGES: usize = 10;

// Verner RKV65.IIIXb (efficient), with the 5th order interpolant.
const A: [[f64; 8]; 9] = [
    [0.0; 8],
    [6.0e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        1.9239962962962962e-2,
        7.669337037037037e-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [3.5975e-2, 0.0, 0.107925, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        1.3186834152331484,
        0.0,
        -5.042058063628562,
        4.220674648395414,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        -41.872591664327516,
        0.0,
        159.4325621631375,
        -122.11921356501003,
        5.531743066200054,
        0.0,
        0.0,
        0.0,
    ],
    [
        -54.430156935316504,
        0.0,
        207.06725136501848,
        -158.61081378459,
        6.991816585950242,
        -1.8597231062203234e-2,
        0.0,
        0.0,
    ],
    [
        -54.66374178728198,
        0.0,
        207.95280625538936,
        -159.2889574744995,
        7.018743740796944,
        -1.8338785905045722e-2,
        -5.119484997882099e-4,
        0.0,
    ],
    [
        3.438957868357036e-2,
        0.0,
        0.0,
        0.2582624555633503,
        0.4209371189673537,
        4.40539646966931,
        -176.48311902429865,
        172.36413340141507,
    ],
];

const B6: [f64; 9] = [
    3.438957868357036e-2,
    0.0,
    0.0,
    0.2582624555633503,
    0.4209371189673537,
    4.40539646966931,
    -176.48311902429865,
    172.36413340141507,
    0.0,
];

const B5: [f64; 9] = [
    4.90996764838249e-2,
    0.0,
    0.0,
    0.22511122295165242,
    0.4694682253029562,
    0.8065792249988868,
    0.0,
    -0.607119489177796,
    5.6861139440475696e-2,
];

const C: [f64; 9] = [
    0.0,
    6.0e-2,
    9.593333333333333e-2,
    0.1439,
    0.4973,
    0.9725,
    0.9995,
    1.0,
    1.0,
];

// One extra stage at the midpoint feeds the 5th order interpolant.
const A_DENSE: [f64; 9] = [
    1.6524159013572806e-2,
    0.0,
    0.0,
    0.3053128187514179,
    0.2071200938201979,
    -1.293879140655123,
    57.11988411588149,
    -55.87979207510932,
    2.4830028297766014e-2,
];
const C_DENSE: f64 = 0.5;

// b_i(theta) = theta * sum_j BD[i][j] theta^j; at theta = 1 this reduces to B6.
const BD: [[f64; 6]; 10] = [
    [
        1.0,
        -5.308169607103577,
        10.18168044895868,
        -7.520036991611715,
        0.9340485368631161,
        0.746867191577065,
    ],
    [0.0; 6],
    [0.0; 6],
    [
        0.0,
        6.272050253212501,
        -16.02618147467746,
        12.844356324519618,
        -1.1487945044767591,
        -1.6831681430145498,
    ],
    [
        0.0,
        6.876491702846304,
        -24.635767260846333,
        33.21078648379717,
        -17.49461528263644,
        2.4640414758066496,
    ],
    [
        0.0,
        -35.5444517105996,
        165.7016170190242,
        -385.4635395491143,
        442.43241370157017,
        -182.7206429912112,
    ],
    [
        0.0,
        1918.6548566980114,
        -9268.121508966042,
        20858.33702877255,
        -22645.82767158481,
        8960.474176055992,
    ],
    [
        0.0,
        -1883.0698021327182,
        9101.025187200634,
        -20473.188551959534,
        22209.765551256532,
        -8782.1682509635,
    ],
    [
        0.0,
        0.11902479635123643,
        -0.12502696705039376,
        1.7799569193949991,
        -4.660932123043763,
        2.886977374347921,
    ],
    [0.0, -8.0, 32.0, -40.0, 16.0, 0.0],
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const ERR_EXPONENT: f64 = -1.0 / 6.0;

/// Integration tolerances and limits.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; selected automatically when `None`.
    pub h_init: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 2_000_000,
            h_init: None,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

/// One accepted step with everything needed to evaluate the interpolant.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub k: [[f64; N]; STAGES],
}

impl<const N: usize> DenseStep<N> {
    /// Interpolant at fraction `theta` in [0, 1] of the step.
    pub fn eval(&self, theta: f64) -> [f64; N] {
        let mut powers = [0.0; 6];
        let mut p = theta;
        for q in powers.iter_mut() {
            *q = p;
            p *= theta;
        }
        let mut y = self.y0;
        for (i, bd) in BD.iter().enumerate() {
            let mut bi = 0.0;
            for j in 0..6 {
                bi += bd[j] * powers[j];
            }
            let w = self.h * bi;
            for n in 0..N {
                y[n] += w * self.k[i][n];
            }
        }
        y
    }

    pub fn eval_at(&self, t: f64) -> [f64; N] {
        self.eval((t - self.t0) / self.h)
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Dense forward solution over `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub t_end: f64,
    pub y_end: [f64; N],
    /// Set when a guard stopped the integration before the span end.
    pub stopped_at: Option<f64>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl<const N: usize> OdeSolution<N> {
    pub fn t0(&self) -> f64 {
        self.steps.first().map_or(self.t_end, |s| s.t0)
    }

    /// Evaluate the solution at `t`, clamped to the integrated span.
    pub fn eval(&self, t: f64) -> [f64; N] {
        if self.steps.is_empty() {
            return self.y_end;
        }
        let idx = self.step_index(t);
        self.steps[idx].eval_at(t)
    }

    fn step_index(&self, t: f64) -> usize {
        let n = self.steps.len();
        match self.steps.binary_search_by(|s| {
            if t < s.t0 {
                std::cmp::Ordering::Greater
            } else if t >= s.t0 + s.h {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(i) => i,
            Err(i) => i.min(n - 1),
        }
    }
}

fn error_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    opts: &OdeOptions,
) -> f64 {
    let mut acc = 0.0;
    for n in 0..N {
        let sc = opts.atol + opts.rtol * y0[n].abs().max(y1[n].abs());
        let e = err[n] / sc;
        acc += e * e;
    }
    (acc / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    span: f64,
    opts: &OdeOptions,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let d0 = norm_scaled(y0, &sc);
    let d1 = norm_scaled(f0, &sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span.abs());
    let mut y1 = *y0;
    for n in 0..N {
        y1[n] += h0 * f0[n];
    }
    let f1 = f(t0 + h0, &y1);
    let mut diff = [0.0; N];
    for n in 0..N {
        diff[n] = f1[n] - f0[n];
    }
    let d2 = norm_scaled(&diff, &sc) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 7.0)
    };
    (100.0 * h0).min(h1).min(span.abs())
}

fn norm_scaled<const N: usize>(v: &[f64; N], sc: &[f64]) -> f64 {
    let mut acc = 0.0;
    for n in 0..N {
        let e = v[n] / sc[n];
        acc += e * e;
    }
    (acc / N as f64).sqrt()
}

/// Integrate `dy/dt = f(t, y)` over `[t0, t_end]` (forward only).
///
/// `guard` is checked at every accepted step; returning `false` stops the
/// integration early with `stopped_at` set, keeping the solution so far.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    mut guard: Option<&mut dyn FnMut(f64, &[f64; N]) -> bool>,
) -> Result<OdeSolution<N>, CoreError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    assert!(t_end > t0, "integration span must be forward and nonempty");
    let span = t_end - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y);
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&f, t0, &y0, &k0, span, opts));
    let mut steps: Vec<DenseStep<N>> = Vec::new();
    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;

    loop {
        if t >= t_end {
            break;
        }
        if n_accepted + n_rejected > opts.max_steps {
            return Err(CoreError::IntegrationFailure {
                psi: t,
                detail: format!("step budget {} exhausted", opts.max_steps),
            });
        }
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            return Err(CoreError::IntegrationFailure {
                psi: t,
                detail: format!("step size underflow (h = {h:.3e})"),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        let mut k = [[0.0; N]; STAGES];
        k[0] = k0;
        for s in 1..9 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for n in 0..N {
                        ys[n] += h * a * kj[n];
                    }
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }

        let mut y1 = y;
        let mut err = [0.0; N];
        for (j, kj) in k.iter().enumerate().take(9) {
            let (b, db) = (B6[j], B6[j] - B5[j]);
            for n in 0..N {
                y1[n] += h * b * kj[n];
                err[n] += h * db * kj[n];
            }
        }
        let err_norm = error_norm(&err, &y, &y1, opts);

        if err_norm <= 1.0 || h <= h_floor * 2.0 {
            // Extra midpoint stage for the interpolant.
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(9) {
                let a = A_DENSE[j];
                if a != 0.0 {
                    for n in 0..N {
                        ys[n] += h * a * kj[n];
                    }
                }
            }
            k[9] = f(t + C_DENSE * h, &ys);

            steps.push(DenseStep { t0: t, h, y0: y, k });
            n_accepted += 1;
            t += h;
            y = y1;
            k0 = k[8]; // FSAL: stage 9 is f(t + h, y1)

            if let Some(g) = guard.as_mut() {
                if !g(t, &y) {
                    return Ok(OdeSolution {
                        steps,
                        t_end: t,
                        y_end: y,
                        stopped_at: Some(t),
                        n_accepted,
                        n_rejected,
                    });
                }
            }
            let fac = (SAFETY * err_norm.powf(ERR_EXPONENT)).clamp(FAC_MIN, FAC_MAX);
            h *= fac;
        } else {
            n_rejected += 1;
            let fac = (SAFETY * err_norm.powf(ERR_EXPONENT)).clamp(FAC_MIN, 1.0);
            h *= fac;
        }
    }

    Ok(OdeSolution {
        steps,
        t_end: t,
        y_end: y,
        stopped_at: None,
        n_accepted,
        n_rejected,
    })
}

/// Bisection root refinement of a scalar function on `[lo, hi]`.
///
/// Expects `g(lo)` and `g(hi)` to bracket a sign change; refines until
/// `|g| <= f_tol` or the interval shrinks below machine resolution.
pub fn bisect_root(g: impl Fn(f64) -> f64, lo: f64, hi: f64, f_tol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let mut g_lo = g(lo);
    if g_lo == 0.0 {
        return lo;
    }
    let g_hi = g(hi);
    if g_hi == 0.0 {
        return hi;
    }
    debug_assert!(
        g_lo * g_hi < 0.0,
        "bisect_root requires a bracketing interval"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let g_mid = g(mid);
        if g_mid.abs() <= f_tol {
            return mid;
        }
        if g_lo * g_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
    }
    0.5 * (lo + hi)
}

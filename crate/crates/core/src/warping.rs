//! Elastic phase analysis: square-root velocity functions, dynamic
//! programming alignment, Karcher mean templates, and distances between a
//! warping function and the identity.
//!
//! All warping happens on the unit interval. Functions observed on another
//! interval are relabelled onto `[0, 1]` first; the alignment objective is
//! invariant to that affine change of variable up to a constant factor.

use crate::error::{DepthError, Result};
use crate::grid::{derivative, integrate, lp_norm, FunctionalSample, Grid, GridFunction};
use crate::par;

/// Floor applied to warping derivatives before taking square roots.
pub const SLOPE_FLOOR: f64 = 1e-12;

/// Largest step (in grid cells) along either axis of the DP lattice, which
/// bounds local slopes to `[1/5, 5]`.
pub const MAX_STEP: usize = 5;

/// Default iteration cap for [`karcher_mean`].
pub const KARCHER_MAX_ITER: usize = 20;

/// Default tolerance on the SRVF template change for [`karcher_mean`].
pub const KARCHER_TOL: f64 = 1e-4;

/// Boundary-preserving, strictly increasing map of `[0, 1]` onto itself.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpingFunction {
    values: GridFunction,
}

impl WarpingFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.start() != 0.0 || grid.end() != 1.0 {
            return Err(DepthError::InvalidArgument("warpings live on the unit interval".into()));
        }
        let f = GridFunction::new(grid, values)?;
        let v = f.values();
        if v[0] != 0.0 || v[v.len() - 1] != 1.0 {
            return Err(DepthError::InvalidArgument("warping must fix 0 and 1".into()));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DepthError::InvalidArgument("warping must be strictly increasing".into()));
        }
        Ok(Self { values: f })
    }

    pub fn identity(m: usize) -> Result<Self> {
        let grid = Grid::unit(m)?;
        Ok(Self { values: GridFunction::from_fn(grid, |t| t) })
    }

    /// Builds a warping from a closed form, pinning the endpoints exactly.
    pub fn from_fn(m: usize, gamma: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = Grid::unit(m)?;
        let mut v: Vec<f64> = grid.points().into_iter().map(gamma).collect();
        v[0] = 0.0;
        v[m - 1] = 1.0;
        Self::new(grid, v)
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.values.values()
    }

    pub fn as_function(&self) -> &GridFunction {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.values.interpolate(t)
    }

    /// `gamma'` with the positivity floor applied.
    pub fn slope(&self) -> GridFunction {
        derivative(&self.values, 1)
            .expect("warping grids have at least three points")
            .map(|d| d.max(SLOPE_FLOOR))
    }

    /// Functional inverse, by linear interpolation of the swapped graph.
    pub fn inverse(&self) -> Self {
        let grid = *self.grid();
        let v = self.values();
        let m = v.len();
        let mut out = Vec::with_capacity(m);
        let mut seg = 0;
        for k in 0..m {
            let t = grid.point(k);
            while seg + 2 < m && v[seg + 1] < t {
                seg += 1;
            }
            let (a, b) = (v[seg], v[seg + 1]);
            let frac = ((t - a) / (b - a)).clamp(0.0, 1.0);
            out.push(grid.point(seg) + frac * grid.spacing());
        }
        out[0] = 0.0;
        out[m - 1] = 1.0;
        enforce_increasing(&mut out);
        Self { values: GridFunction::new(grid, out).expect("finite") }
    }

    /// Pointwise average of several warpings, itself a warping.
    pub fn mean(warps: &[WarpingFunction]) -> Result<Self> {
        let first = warps.first().ok_or(DepthError::InsufficientSample { required: 1, got: 0 })?;
        let grid = *first.grid();
        let m = grid.len();
        let mut acc = vec![0.0; m];
        for w in warps {
            grid.ensure_same(w.grid())?;
            for (a, v) in acc.iter_mut().zip(w.values()) {
                *a += v;
            }
        }
        let n = warps.len() as f64;
        let mut v: Vec<f64> = acc.into_iter().map(|a| a / n).collect();
        v[0] = 0.0;
        v[m - 1] = 1.0;
        Self::new(grid, v)
    }
}

fn enforce_increasing(v: &mut [f64]) {
    let m = v.len();
    for k in 1..m - 1 {
        if v[k] <= v[k - 1] {
            v[k] = v[k - 1] + 1e-12;
        }
    }
}

/// Square-root velocity function `sign(f') sqrt(|f'|)`.
pub fn srvf(f: &GridFunction) -> Result<GridFunction> {
    Ok(derivative(f, 1)?.map(|d| d.signum() * d.abs().sqrt()))
}

/// `f o gamma`, evaluated on the grid of `f`.
pub fn compose(f: &GridFunction, gamma: &WarpingFunction) -> Result<GridFunction> {
    if f.len() != gamma.values().len() {
        return Err(DepthError::GridMismatch);
    }
    let g = f.grid();
    let width = g.end() - g.start();
    Ok(GridFunction::from_fn(*g, |t| {
        let u = (t - g.start()) / width;
        f.interpolate(g.start() + gamma.eval(u) * width)
    }))
}

/// `(q o gamma) sqrt(gamma')`: the SRVF of `f o gamma` when `q` is the SRVF of `f`.
pub fn warp_srvf(q: &GridFunction, gamma: &WarpingFunction) -> Result<GridFunction> {
    let composed = compose(q, gamma)?;
    let slope = gamma.slope();
    let values = composed.values().iter().zip(slope.values()).map(|(a, s)| a * s.sqrt()).collect();
    GridFunction::new(*q.grid(), values)
}

/// Alignment objective `||(q_u o gamma) sqrt(gamma') - q_v||_2` on the unit interval.
pub fn alignment_cost(q_u: &GridFunction, q_v: &GridFunction, gamma: &WarpingFunction) -> Result<f64> {
    let warped = warp_srvf(&q_u.on_unit_interval(), gamma)?;
    lp_norm(&warped.sub(&q_v.on_unit_interval())?, 2.0)
}

/// Coprime lattice steps `(di, dj)` with both components in `1..=MAX_STEP`.
fn lattice_steps() -> Vec<(usize, usize)> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut steps = Vec::new();
    for di in 1..=MAX_STEP {
        for dj in 1..=MAX_STEP {
            if gcd(di, dj) == 1 {
                steps.push((di, dj));
            }
        }
    }
    steps
}

/// Linear interpolation at a fractional index.
#[inline]
fn at_index(v: &[f64], x: f64) -> f64 {
    let m = v.len();
    if x <= 0.0 {
        return v[0];
    }
    if x >= (m - 1) as f64 {
        return v[m - 1];
    }
    let k = x as usize;
    let frac = x - k as f64;
    v[k] + frac * (v[k + 1] - v[k])
}

/// Squared-error cost of the straight segment `(k, l) -> (i, j)`.
///
/// The segment is sampled at `max(di, dj)` sub-intervals and integrated
/// with the trapezoid rule; `fixed` is evaluated along the first axis and
/// `moving` along the second, scaled by the square root of the slope.
fn segment_cost(fixed: &[f64], moving: &[f64], k: usize, l: usize, di: usize, dj: usize, dt: f64) -> f64 {
    let sub = di.max(dj);
    let slope = dj as f64 / di as f64;
    let root = slope.sqrt();
    let hx = di as f64 / sub as f64;
    let hy = dj as f64 / sub as f64;
    let mut acc = 0.0;
    for s in 0..=sub {
        let x = k as f64 + s as f64 * hx;
        let y = l as f64 + s as f64 * hy;
        let e = at_index(fixed, x) - root * at_index(moving, y);
        let w = if s == 0 || s == sub { 0.5 } else { 1.0 };
        acc += w * e * e;
    }
    acc * hx * dt
}

/// Elastic alignment of `u` onto `v`.
///
/// Returns the warping `gamma` minimizing `||(q(u) o gamma) sqrt(gamma') - q(v)||`.
/// A dynamic program over lattice paths with local slopes in `[1/5, 5]`
/// finds the basin; node-wise line searches then remove the slope
/// quantization of the lattice. Among lattice paths whose cost agrees to
/// rounding, the one closest to the diagonal wins, so degenerate inputs
/// return the identity.
pub fn optimal_warping(u: &GridFunction, v: &GridFunction) -> Result<WarpingFunction> {
    if u.len() != v.len() {
        return Err(DepthError::GridMismatch);
    }
    let q_u = srvf(&u.on_unit_interval())?;
    let q_v = srvf(&v.on_unit_interval())?;
    optimal_warping_srvf(&q_u, &q_v)
}

/// [`optimal_warping`] on precomputed SRVFs (unit-interval grids).
pub fn optimal_warping_srvf(q_u: &GridFunction, q_v: &GridFunction) -> Result<WarpingFunction> {
    if q_u.len() != q_v.len() {
        return Err(DepthError::GridMismatch);
    }
    let m = q_u.len();
    let grid = Grid::unit(m)?;
    let dt = grid.spacing();
    let fixed = q_v.values();
    let moving = q_u.values();
    let steps = lattice_steps();

    let idx = |i: usize, j: usize| i * m + j;
    let mut cost = vec![f64::INFINITY; m * m];
    let mut dev = vec![f64::INFINITY; m * m];
    let mut pred = vec![u8::MAX; m * m];
    cost[0] = 0.0;
    dev[0] = 0.0;

    let last = m - 1;
    for i in 1..m {
        for j in 1..m {
            // cells no slope-limited path through both corners can visit
            if j > MAX_STEP * i || i > MAX_STEP * j || last - j > MAX_STEP * (last - i) || last - i > MAX_STEP * (last - j) {
                continue;
            }
            let mut best_cost = f64::INFINITY;
            let mut best_dev = f64::INFINITY;
            let mut best_step = u8::MAX;
            for (s, &(di, dj)) in steps.iter().enumerate() {
                if di > i || dj > j {
                    continue;
                }
                let (k, l) = (i - di, j - dj);
                let base = cost[idx(k, l)];
                if !base.is_finite() {
                    continue;
                }
                let c = base + segment_cost(fixed, moving, k, l, di, dj, dt);
                let slope = dj as f64 / di as f64;
                let seg_dev: f64 = (1..=di)
                    .map(|r| (l as f64 + slope * r as f64 - (k + r) as f64).abs())
                    .sum::<f64>()
                    * dt;
                let d = dev[idx(k, l)] + seg_dev;
                let tol = 1e-10 * (1.0 + best_cost.min(c).abs());
                let better = if c < best_cost - tol {
                    true
                } else {
                    (c - best_cost).abs() <= tol && d < best_dev
                };
                if better {
                    best_cost = c;
                    best_dev = d;
                    best_step = s as u8;
                }
            }
            cost[idx(i, j)] = best_cost;
            dev[idx(i, j)] = best_dev;
            pred[idx(i, j)] = best_step;
        }
    }

    // backtrack the node path from (m-1, m-1)
    let mut path = vec![(m - 1, m - 1)];
    let (mut i, mut j) = (m - 1, m - 1);
    while (i, j) != (0, 0) {
        let s = pred[idx(i, j)];
        if s == u8::MAX {
            return Err(DepthError::InvalidArgument("alignment lattice has no feasible path".into()));
        }
        let (di, dj) = steps[s as usize];
        i -= di;
        j -= dj;
        path.push((i, j));
    }
    path.reverse();

    let mut values = vec![0.0; m];
    for w in path.windows(2) {
        let ((k, l), (i, j)) = (w[0], w[1]);
        let slope = (j - l) as f64 / (i - k) as f64;
        for r in 0..=(i - k) {
            values[k + r] = (l as f64 + slope * r as f64) * dt;
        }
    }
    values[0] = 0.0;
    values[m - 1] = 1.0;
    let lattice = WarpingFunction::new(grid, values)?;

    // the lattice path has quantized slopes; a short moving average usually
    // lowers the objective, and is kept only when it does
    let c_lattice = alignment_cost(q_u, q_v, &lattice)?;
    let mut best = (c_lattice, lattice);
    for h in [MAX_STEP, 2 * MAX_STEP, 4 * MAX_STEP, 8 * MAX_STEP, 16 * MAX_STEP] {
        if 2 * h >= m {
            break;
        }
        let smoothed = smooth_warping(&best.1, h)?;
        let c = alignment_cost(q_u, q_v, &smoothed)?;
        if c < best.0 - 1e-10 * (1.0 + c_lattice) {
            best = (c, smoothed);
        }
    }
    refine_warping(q_u.values(), q_v.values(), best.1, REFINE_SWEEPS)
}

/// Coordinate-descent sweeps of [`refine_warping`] after the lattice search.
const REFINE_SWEEPS: usize = 40;

/// Golden-section steps per node; shrinks the bracket by `0.618^20`.
const GOLDEN_STEPS: usize = 20;

/// Residual `q_u(gamma_j) sqrt(gamma'_j) - q_v(t_j)` under the same
/// difference stencils as [`derivative`].
fn residual(q_u: &[f64], q_v: &[f64], g: &[f64], j: usize, h: f64) -> f64 {
    let m = g.len();
    let d = if j == 0 {
        (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
    } else if j == m - 1 {
        (3.0 * g[m - 1] - 4.0 * g[m - 2] + g[m - 3]) / (2.0 * h)
    } else {
        (g[j + 1] - g[j - 1]) / (2.0 * h)
    };
    at_index(q_u, g[j] * (m - 1) as f64) * d.max(SLOPE_FLOOR).sqrt() - q_v[j]
}

/// Polishes a warping node by node with golden-section searches on the
/// discrete objective, keeping every node strictly between its neighbours.
fn refine_warping(q_u: &[f64], q_v: &[f64], gamma: WarpingFunction, sweeps: usize) -> Result<WarpingFunction> {
    let grid = *gamma.grid();
    let m = grid.len();
    let h = grid.spacing();
    let mut g = gamma.values().to_vec();
    let local = |g: &[f64], k: usize| -> f64 {
        let mut nodes: Vec<usize> = (k.saturating_sub(1)..=(k + 1).min(m - 1)).collect();
        if k <= 2 {
            nodes.push(0);
        }
        if k + 3 >= m {
            nodes.push(m - 1);
        }
        nodes.sort_unstable();
        nodes.dedup();
        nodes
            .into_iter()
            .map(|j| {
                let e = residual(q_u, q_v, g, j, h);
                let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                w * e * e
            })
            .sum()
    };
    let ratio = 0.5 * (5.0_f64.sqrt() - 1.0);
    let min_gap = 1e-6 * h;
    for _ in 0..sweeps {
        let mut gain = 0.0;
        for k in 1..m - 1 {
            let (mut a, mut b) = (g[k - 1] + min_gap, g[k + 1] - min_gap);
            if b <= a {
                continue;
            }
            let start = g[k];
            let base = local(&g, k);
            let eval = |x: f64, g: &mut Vec<f64>| {
                g[k] = x;
                local(g, k)
            };
            let mut x1 = b - ratio * (b - a);
            let mut x2 = a + ratio * (b - a);
            let mut f1 = eval(x1, &mut g);
            let mut f2 = eval(x2, &mut g);
            for _ in 0..GOLDEN_STEPS {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - ratio * (b - a);
                    f1 = eval(x1, &mut g);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + ratio * (b - a);
                    f2 = eval(x2, &mut g);
                }
            }
            let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if fx < base {
                g[k] = x;
                gain += base - fx;
            } else {
                g[k] = start;
            }
        }
        if gain * h < 1e-14 {
            break;
        }
    }
    WarpingFunction::new(grid, g)
}

/// Centred moving average of half-width `h` with odd reflection at both ends,
/// which keeps the endpoints fixed and preserves strict monotonicity.
fn smooth_warping(gamma: &WarpingFunction, h: usize) -> Result<WarpingFunction> {
    let v = gamma.values();
    let m = v.len();
    let last = (m - 1) as isize;
    let ext = |k: isize| -> f64 {
        if k < 0 {
            -v[(-k) as usize]
        } else if k > last {
            2.0 - v[(2 * last - k) as usize]
        } else {
            v[k as usize]
        }
    };
    let h = h.min(m - 1) as isize;
    let width = (2 * h + 1) as f64;
    let mut out: Vec<f64> = (0..m as isize).map(|k| (-h..=h).map(|d| ext(k + d)).sum::<f64>() / width).collect();
    out[0] = 0.0;
    out[m - 1] = 1.0;
    WarpingFunction::new(*gamma.grid(), out)
}

/// `||gamma - gamma_id||_2`.
pub fn warp_l2_distance(gamma: &WarpingFunction) -> f64 {
    let id = GridFunction::from_fn(*gamma.grid(), |t| t);
    lp_norm(&gamma.as_function().sub(&id).expect("same grid"), 2.0).expect("p = 2 is valid")
}

/// Fisher–Rao distance to the identity, `arccos(integral sqrt(gamma'))`.
pub fn fisher_rao_distance(gamma: &WarpingFunction) -> f64 {
    let root = gamma.slope().map(f64::sqrt);
    integrate(&root).clamp(-1.0, 1.0).acos()
}

/// Output of [`karcher_mean`].
#[derive(Debug, Clone)]
pub struct KarcherMean {
    /// Template on the original grid of the sample.
    pub template: GridFunction,
    /// `warpings[i]` aligns observation `i` onto the template.
    pub warpings: Vec<WarpingFunction>,
    pub iterations: usize,
    pub converged: bool,
}

/// Karcher mean of a sample in SRVF space.
///
/// Each iteration aligns every observation to the current template, averages
/// the aligned SRVFs, and recentres the template so that the average warping
/// is the identity. A run that hits `max_iter` is returned with
/// `converged == false` rather than as an error.
pub fn karcher_mean(sample: &FunctionalSample, max_iter: usize, tol: f64) -> Result<KarcherMean> {
    let n = sample.len();
    if n < 2 {
        return Err(DepthError::InsufficientSample { required: 2, got: n });
    }
    let grid = *sample.grid();
    let m = grid.len();
    let unit = grid.to_unit();
    let fs: Vec<GridFunction> = sample.rows().iter().map(GridFunction::on_unit_interval).collect();
    let qs: Vec<GridFunction> = fs.iter().map(srvf).collect::<Result<_>>()?;

    let q_mean = FunctionalSample::new(qs.clone())?.mean();
    let start = (0..n)
        .map(|i| (i, lp_norm(&qs[i].sub(&q_mean).expect("same grid"), 2.0).expect("p = 2")))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("n >= 2");
    let mut template_q = qs[start].clone();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let warps = par::try_map_range(n, |i| optimal_warping_srvf(&qs[i], &template_q))?;
        let aligned = par::try_map_range(n, |i| warp_srvf(&qs[i], &warps[i]))?;
        let new_q = FunctionalSample::new(aligned)?.mean();
        let center = WarpingFunction::mean(&warps)?.inverse();
        let new_q = warp_srvf(&new_q, &center)?;
        let change = lp_norm(&new_q.sub(&template_q)?, 2.0)?;
        template_q = new_q;
        if change < tol {
            converged = true;
            break;
        }
    }

    // template function: average of observations aligned to the SRVF template,
    // recentred; final warpings are alignments onto that function
    let warps = par::try_map_range(n, |i| optimal_warping_srvf(&qs[i], &template_q))?;
    let aligned_f = par::try_map_range(n, |i| compose(&fs[i], &warps[i]))?;
    let center = WarpingFunction::mean(&warps)?.inverse();
    let template_unit = compose(&FunctionalSample::new(aligned_f)?.mean(), &center)?;
    let template = template_unit.with_grid(grid)?;
    let tq = srvf(&template_unit)?;
    let warpings = par::try_map_range(n, |i| optimal_warping_srvf(&qs[i], &tq))?;
    debug_assert!(warpings.iter().all(|w| w.values().len() == m && *w.grid() == unit));
    Ok(KarcherMean { template, warpings, iterations, converged })
}

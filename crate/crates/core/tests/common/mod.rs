#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use unfold_ipm::prox::{prox_affine, prox_ball, prox_box, prox_hyperslab, Affine, Ball, BoxBounds, Hyperslab, ProxResult};
use unfold_ipm::seeding::stream;

#[derive(Clone, Debug)]
pub enum Set {
    Affine(Affine<f64>),
    Slab(Hyperslab<f64>),
    Ball(Ball<f64>),
    Box(BoxBounds<f64>),
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

impl Set {
    pub fn random(kind: usize, n: usize, rng: &mut ChaCha8Rng) -> Self {
        match kind {
            0 => Set::Affine(Affine {
                a: normal_vec(rng, n, 1.0),
                b: rng.random_range(-2.0..2.0),
            }),
            1 => {
                let lo = rng.random_range(-2.0..1.0);
                Set::Slab(Hyperslab {
                    a: normal_vec(rng, n, 1.0),
                    b_min: lo,
                    b_max: lo + log_uniform(rng, 0.05, 4.0),
                })
            }
            2 => Set::Ball(Ball {
                center: normal_vec(rng, n, 1.0),
                alpha: log_uniform(rng, 0.01, 4.0),
            }),
            _ => {
                let lo = rng.random_range(-1.0..1.0);
                Set::Box(BoxBounds::new(lo, lo + log_uniform(rng, 0.05, 4.0)).unwrap())
            }
        }
    }

    pub fn prox(&self, x: &[f64], mu: f64, gamma: f64, derivs: bool) -> ProxResult<f64> {
        match self {
            Set::Affine(c) => prox_affine(x, c, mu, gamma, derivs),
            Set::Slab(c) => prox_hyperslab(x, c, mu, gamma, derivs),
            Set::Ball(c) => prox_ball(x, c, mu, gamma, derivs),
            Set::Box(c) => prox_box(x, c, mu, gamma, derivs),
        }
        .unwrap()
    }

    /// Constraint values `c_i(u)`; feasible iff all positive.
    pub fn slacks(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Set::Affine(c) => vec![c.b - dot(&c.a, u)],
            Set::Slab(c) => {
                let t = dot(&c.a, u);
                vec![c.b_max - t, t - c.b_min]
            }
            Set::Ball(c) => {
                let d: Vec<f64> = u.iter().zip(&c.center).map(|(a, b)| a - b).collect();
                vec![c.alpha - dot(&d, &d)]
            }
            Set::Box(c) => u.iter().flat_map(|&v| [c.x_max - v, v - c.x_min]).collect(),
        }
    }

    pub fn barrier(&self, u: &[f64]) -> f64 {
        let s = self.slacks(u);
        if s.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        -s.iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn barrier_grad(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Set::Affine(c) => {
                let s = c.b - dot(&c.a, u);
                c.a.iter().map(|a| a / s).collect()
            }
            Set::Slab(c) => {
                let t = dot(&c.a, u);
                let k = 1.0 / (c.b_max - t) - 1.0 / (t - c.b_min);
                c.a.iter().map(|a| a * k).collect()
            }
            Set::Ball(c) => {
                let d: Vec<f64> = u.iter().zip(&c.center).map(|(a, b)| a - b).collect();
                let s = c.alpha - dot(&d, &d);
                d.iter().map(|v| 2.0 * v / s).collect()
            }
            Set::Box(c) => u.iter().map(|&v| 1.0 / (c.x_max - v) - 1.0 / (v - c.x_min)).collect(),
        }
    }

    pub fn barrier_hessian(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let n = u.len();
        let mut h = vec![vec![0.0; n]; n];
        match self {
            Set::Affine(c) => {
                let s = c.b - dot(&c.a, u);
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] = c.a[i] * c.a[j] / (s * s);
                    }
                }
            }
            Set::Slab(c) => {
                let t = dot(&c.a, u);
                let k = 1.0 / (c.b_max - t).powi(2) + 1.0 / (t - c.b_min).powi(2);
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] = c.a[i] * c.a[j] * k;
                    }
                }
            }
            Set::Ball(c) => {
                let d: Vec<f64> = u.iter().zip(&c.center).map(|(a, b)| a - b).collect();
                let s = c.alpha - dot(&d, &d);
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] = 4.0 * d[i] * d[j] / (s * s) + if i == j { 2.0 / s } else { 0.0 };
                    }
                }
            }
            Set::Box(c) => {
                for (i, &v) in u.iter().enumerate() {
                    h[i][i] = 1.0 / (c.x_max - v).powi(2) + 1.0 / (v - c.x_min).powi(2);
                }
            }
        }
        h
    }

    /// Some strictly feasible point.
    pub fn interior_point(&self, n: usize) -> Vec<f64> {
        match self {
            Set::Affine(c) => {
                let k = (c.b - 1.0) / dot(&c.a, &c.a);
                c.a.iter().map(|a| a * k).collect()
            }
            Set::Slab(c) => {
                let k = 0.5 * (c.b_min + c.b_max) / dot(&c.a, &c.a);
                c.a.iter().map(|a| a * k).collect()
            }
            Set::Ball(c) => c.center.clone(),
            Set::Box(c) => vec![0.5 * (c.x_min + c.x_max); n],
        }
    }
}

pub fn objective(set: &Set, x: &[f64], u: &[f64], gm: f64) -> f64 {
    let d: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - b).collect();
    0.5 * dot(&d, &d) + gm * set.barrier(u)
}

pub fn solve_small(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    match g.len() {
        1 => vec![g[0] / h[0][0]],
        2 => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            vec![
                (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                (h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ]
        }
        _ => unreachable!(),
    }
}

/// Brute-force minimizer of `0.5 |x - u|^2 + gm B(u)` for `n <= 2`: best
/// point of a dense grid, refined by damped Newton with feasibility
/// backtracking.
pub fn brute_force(set: &Set, x: &[f64], gm: f64) -> Vec<f64> {
    let n = x.len();
    let start = set.interior_point(n);
    let radius = 2.0 + x.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let steps: usize = if n == 1 { 4001 } else { 401 };
    let mut best = start.clone();
    let mut best_f = objective(set, x, &start, gm);
    let mut u = vec![0.0; n];
    let total = steps.pow(n as u32);
    for idx in 0..total {
        let mut r = idx;
        for (d, ud) in u.iter_mut().enumerate() {
            let k = r % steps;
            r /= steps;
            *ud = start[d] - radius + 2.0 * radius * k as f64 / (steps - 1) as f64;
        }
        let f = objective(set, x, &u, gm);
        if f < best_f {
            best_f = f;
            best.clone_from(&u);
        }
    }
    let from_grid = newton(set, x, gm, best);
    // Homotopy on the barrier weight from a well-conditioned start.
    let mut u = start;
    let mut w = gm.max(1.0);
    loop {
        u = newton(set, x, w, u);
        if w == gm {
            break;
        }
        w = (0.5 * w).max(gm);
    }
    if objective(set, x, &from_grid, gm) < objective(set, x, &u, gm) {
        from_grid
    } else {
        u
    }
}

/// Damped Newton with Armijo backtracking that never leaves the domain.
pub fn newton(set: &Set, x: &[f64], gm: f64, mut u: Vec<f64>) -> Vec<f64> {
    let n = x.len();
    for _ in 0..100 {
        let bg = set.barrier_grad(&u);
        let g: Vec<f64> = (0..n).map(|i| u[i] - x[i] + gm * bg[i]).collect();
        if norm(&g) < 1e-14 * (1.0 + norm(x)) {
            break;
        }
        let mut h = set.barrier_hessian(&u);
        for (i, row) in h.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v *= gm;
            }
            row[i] += 1.0;
        }
        let step = solve_small(&h, &g);
        let f0 = objective(set, x, &u, gm);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = (0..n).map(|i| u[i] - t * step[i]).collect();
            let f = objective(set, x, &cand, gm);
            if f.is_finite() && f <= f0 - 1e-4 * t * dot(&g, &step) || t < 1e-20 {
                if f.is_finite() && f <= f0 {
                    u = cand;
                }
                break;
            }
            t *= 0.5;
        }
    }
    u
}

pub fn random_case(kind: usize, seed: u64, i: u64, max_n: usize) -> (Set, Vec<f64>, f64, f64) {
    let mut rng = stream(seed, i);
    let n = rng.random_range(1..=max_n);
    let set = Set::random(kind, n, &mut rng);
    let anchor = set.interior_point(n);
    let scale = log_uniform(&mut rng, 0.1, 5.0);
    let x: Vec<f64> = normal_vec(&mut rng, n, scale).iter().zip(&anchor).map(|(a, b)| a + b).collect();
    let mu = log_uniform(&mut rng, 1e-4, 10.0);
    let gamma = log_uniform(&mut rng, 1e-4, 10.0);
    (set, x, mu, gamma)
}

pub const NAMES: [&str; 4] = ["affine", "hyperslab", "ball", "box"];

/// Double-double value `hi + lo`, enough to evaluate constraint slacks of a
/// stored point without cancellation.
#[derive(Clone, Copy)]
pub struct Dd(pub f64, pub f64);

impl Dd {
    pub fn from(v: f64) -> Self {
        Dd(v, 0.0)
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let e = (self.0 - (s - bb)) + (o.0 - bb) + self.1 + o.1;
        let hi = s + e;
        Dd(hi, e - (hi - s))
    }

    pub fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p) + self.0 * o.1 + self.1 * o.0;
        let hi = p + e;
        Dd(hi, e - (hi - p))
    }

    pub fn value(self) -> f64 {
        self.0 + self.1
    }
}

pub fn dot_dd(a: &[f64], b: &[f64]) -> Dd {
    a.iter().zip(b).fold(Dd::from(0.0), |acc, (&x, &y)| acc.add(Dd::from(x).mul(Dd::from(y))))
}

impl Set {
    /// Barrier gradient with slacks evaluated in double-double.
    pub fn barrier_grad_exact(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Set::Affine(c) => {
                let s = Dd::from(c.b).add(dot_dd(&c.a, u).neg()).value();
                c.a.iter().map(|a| a / s).collect()
            }
            Set::Slab(c) => {
                let t = dot_dd(&c.a, u);
                let up = Dd::from(c.b_max).add(t.neg()).value();
                let dn = t.add(Dd::from(c.b_min).neg()).value();
                let k = 1.0 / up - 1.0 / dn;
                c.a.iter().map(|a| a * k).collect()
            }
            Set::Ball(c) => {
                let d: Vec<Dd> = u.iter().zip(&c.center).map(|(&a, &b)| Dd::from(a).add(Dd::from(b).neg())).collect();
                let nn = d.iter().fold(Dd::from(0.0), |acc, v| acc.add(v.mul(*v)));
                let s = Dd::from(c.alpha).add(nn.neg()).value();
                d.iter().map(|v| 2.0 * v.value() / s).collect()
            }
            Set::Box(c) => u
                .iter()
                .map(|&v| {
                    let up = Dd::from(c.x_max).add(Dd::from(v).neg()).value();
                    let dn = Dd::from(v).add(Dd::from(c.x_min).neg()).value();
                    1.0 / up - 1.0 / dn
                })
                .collect(),
        }
    }
}

/// Residual an exact minimizer rounded to double precision would show:
/// `gamma mu |hess B(phi)|` times one unit in the last place of `phi`.
pub fn rounding_floor(set: &Set, phi: &[f64], gm: f64) -> f64 {
    let h = set.barrier_hessian(phi);
    let hn = h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let scale = phi.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    gm * hn * f64::EPSILON * scale
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(norm(a)).max(1e-12)
}

/// Bisection on a sign change; the reference root for the cubic examples.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stationarity residual of `r.value` with naively evaluated slacks, the same
/// residual with exactly evaluated slacks, and the rounding floor.
pub fn stationarity(set: &Set, x: &[f64], mu: f64, gamma: f64, phi: &[f64]) -> (f64, f64, f64) {
    let gm = gamma * mu;
    let naive = set.barrier_grad(phi);
    let exact = set.barrier_grad_exact(phi);
    let res = |g: &[f64]| norm(&(0..x.len()).map(|j| phi[j] - x[j] + gm * g[j]).collect::<Vec<_>>());
    (res(&naive), res(&exact), rounding_floor(set, phi, gm))
}

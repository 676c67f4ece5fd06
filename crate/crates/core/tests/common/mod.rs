//! Independent oracles shared by the integration tests. They use only raw
//! coordinates and brute force, never the solvers under test.
#![allow(dead_code)]

use itertools::Itertools;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Great-circle distance on the unit sphere S² ⊂ R³.
pub fn unit_sphere_dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&cross(a, b)).atan2(dot(a, b))
}

pub fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Orthonormal basis of the tangent plane at p.
fn tangent_frame(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let seed = if p[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot(&seed, p);
    let mut e1 = [seed[0] - d * p[0], seed[1] - d * p[1], seed[2] - d * p[2]];
    let n = norm(&e1);
    e1.iter_mut().for_each(|c| *c /= n);
    (e1, cross(p, &e1))
}

fn sphere_chart(c: &[f64; 3], e1: &[f64; 3], e2: &[f64; 3], u: f64, v: f64) -> [f64; 3] {
    let rho = (u * u + v * v).sqrt();
    if rho == 0.0 {
        return *c;
    }
    let (s, co) = rho.sin_cos();
    [0, 1, 2].map(|i| co * c[i] + s * (u * e1[i] + v * e2[i]) / rho)
}

/// Zooming grid search for the minimizer of Σ w d(·, x)² on S².
pub fn sphere_barycenter_grid(atoms: &[[f64; 3]], weights: &[f64]) -> ([f64; 3], f64) {
    let f = |p: &[f64; 3]| -> f64 {
        atoms.iter().zip(weights).map(|(a, w)| w * unit_sphere_dist(p, a).powi(2)).sum()
    };
    let mut center = atoms[0];
    let mut half = atoms.iter().map(|a| unit_sphere_dist(&center, a)).fold(0.0, f64::max) + 1e-3;
    let steps = 40;
    let mut best = (center, f(&center));
    for _ in 0..60 {
        let (e1, e2) = tangent_frame(&center);
        let h = 2.0 * half / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                let p = sphere_chart(&center, &e1, &e2, -half + i as f64 * h, -half + j as f64 * h);
                let v = f(&p);
                if v < best.1 {
                    best = (p, v);
                }
            }
        }
        center = best.0;
        half = 3.0 * h;
        if half < 1e-13 {
            break;
        }
    }
    best
}

/// W₂ between uniform measures with equally many atoms: the best matching.
pub fn brute_force_w2(x: &[Vec<f64>], y: &[Vec<f64>], dist: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let n = x.len();
    assert_eq!(n, y.len());
    (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| dist(&x[i], &y[j]).powi(2)).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// min over the disc |v - o| ≤ r in R² of max_j |v - q_j| / s_j, by a
/// zooming grid that shrinks only once the best point is interior, so it can
/// follow narrow valleys; returns the smallest value found.
pub fn minimax_grid(anchors: &[[f64; 2]], scales: &[f64], o: [f64; 2], r: f64) -> f64 {
    let g = |v: [f64; 2]| -> f64 {
        anchors.iter().zip(scales).map(|(q, s)| euclid_dist(&v, q) / s).fold(0.0, f64::max)
    };
    // grid points outside the disc are pulled radially onto its boundary
    let clamp = |v: [f64; 2]| -> [f64; 2] {
        let d = euclid_dist(&v, &o);
        if d <= r { v } else { [o[0] + r * (v[0] - o[0]) / d, o[1] + r * (v[1] - o[1]) / d] }
    };
    let mut center = o;
    let mut half = r;
    let steps = 160;
    let mut best = (o, g(o));
    for _ in 0..20_000 {
        let h = 2.0 * half / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                let v = clamp([center[0] - half + i as f64 * h, center[1] - half + j as f64 * h]);
                let val = g(v);
                if val < best.1 {
                    best = (v, val);
                }
            }
        }
        let interior = (best.0[0] - center[0]).abs() < 0.5 * half && (best.0[1] - center[1]).abs() < 0.5 * half;
        center = best.0;
        if interior {
            half /= 2.0;
        }
        if half < 1e-12 {
            break;
        }
    }
    best.1
}

/// The same minimax problem solved exactly by enumerating active sets: the
/// optimum is pinned by at most three constraints among the anchors and the
/// disc boundary, so it is one of finitely many candidate points.
pub fn minimax_exact(anchors: &[[f64; 2]], scales: &[f64], o: [f64; 2], r: f64) -> f64 {
    let m = anchors.len();
    let a: Vec<f64> = scales.iter().map(|s| s.powi(-2)).collect();
    let g = |v: [f64; 2]| -> f64 {
        anchors.iter().zip(scales).map(|(q, s)| euclid_dist(&v, q) / s).fold(0.0, f64::max)
    };
    // f_i - f_j = α|v|² + β·v + γ
    let diff = |i: usize, j: usize| -> (f64, [f64; 2], f64) {
        let (qi, qj) = (anchors[i], anchors[j]);
        (
            a[i] - a[j],
            [-2.0 * (a[i] * qi[0] - a[j] * qj[0]), -2.0 * (a[i] * qi[1] - a[j] * qj[1])],
            a[i] * dot(&qi, &qi) - a[j] * dot(&qj, &qj),
        )
    };
    let mut cands: Vec<[f64; 2]> = Vec::new();
    let boundary = |q: [f64; 2]| -> [f64; 2] {
        let d = euclid_dist(&q, &o);
        if d == 0.0 {
            [o[0] + r, o[1]]
        } else {
            [o[0] + r * (q[0] - o[0]) / d, o[1] + r * (q[1] - o[1]) / d]
        }
    };
    for i in 0..m {
        cands.push(anchors[i]);
        cands.push(boundary(anchors[i]));
        for j in i + 1..m {
            let (si, sj) = (scales[i], scales[j]);
            let (qi, qj) = (anchors[i], anchors[j]);
            cands.push([(sj * qi[0] + si * qj[0]) / (si + sj), (sj * qi[1] + si * qj[1]) / (si + sj)]);
            // boundary point with f_i = f_j: v = o + r(cos θ, sin θ)
            let (al, be, ga) = diff(i, j);
            let cc = al * (dot(&o, &o) + r * r) + be[0] * o[0] + be[1] * o[1] + ga;
            let ac = 2.0 * al * r * o[0] + be[0] * r;
            let bs = 2.0 * al * r * o[1] + be[1] * r;
            let rho = ac.hypot(bs);
            if rho > 0.0 && (cc / rho).abs() <= 1.0 {
                let phase = bs.atan2(ac);
                let spread = (-cc / rho).acos();
                for th in [phase + spread, phase - spread] {
                    cands.push([o[0] + r * th.cos(), o[1] + r * th.sin()]);
                }
            }
            for k in j + 1..m {
                let (a1, b1, c1) = diff(i, j);
                let (a2, b2, c2) = diff(i, k);
                // eliminate |v|² to get a line n·v = c
                let n = [a2 * b1[0] - a1 * b2[0], a2 * b1[1] - a1 * b2[1]];
                let c = -(a2 * c1 - a1 * c2);
                let nn = dot(&n, &n);
                if nn == 0.0 {
                    continue;
                }
                let p0 = [c * n[0] / nn, c * n[1] / nn];
                let dir = [-n[1], n[0]];
                // substitute into whichever difference is quadratic-or-linear and nondegenerate
                for (al, be, ga) in [(a1, b1, c1), (a2, b2, c2)] {
                    let qa = al * dot(&dir, &dir);
                    let qb = 2.0 * al * dot(&p0, &dir) + dot(&be, &dir);
                    let qc = al * dot(&p0, &p0) + dot(&be, &p0) + ga;
                    let roots: Vec<f64> = if qa.abs() < 1e-300 {
                        if qb == 0.0 { vec![] } else { vec![-qc / qb] }
                    } else {
                        let disc = qb * qb - 4.0 * qa * qc;
                        if disc < 0.0 {
                            vec![]
                        } else {
                            vec![(-qb + disc.sqrt()) / (2.0 * qa), (-qb - disc.sqrt()) / (2.0 * qa)]
                        }
                    };
                    for t in roots {
                        cands.push([p0[0] + t * dir[0], p0[1] + t * dir[1]]);
                    }
                    if !(al == 0.0 && be == [0.0, 0.0]) {
                        break;
                    }
                }
            }
        }
    }
    cands
        .into_iter()
        .filter(|v| v.iter().all(|c| c.is_finite()) && euclid_dist(v, &o) <= r * (1.0 + 1e-12))
        .map(g)
        .fold(f64::INFINITY, f64::min)
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(n³)).
pub fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let (mut delta, mut col1) = (f64::INFINITY, 0);
            for c in 1..=n {
                if !used[c] {
                    let reduced = cost[r - 1][c - 1] - u[r] - v[c];
                    if reduced < minv[c] {
                        minv[c] = reduced;
                        way[c] = col0;
                    }
                    if minv[c] < delta {
                        delta = minv[c];
                        col1 = c;
                    }
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|c| cost[owner[c] - 1][c - 1]).sum()
}

/// W_p between uniform measures of any sizes: copy every atom so both sides
/// have lcm(m, n) equal masses and match them.
pub fn matching_wp(x: &[Vec<f64>], y: &[Vec<f64>], p: f64, dist: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let (m, n) = (x.len(), y.len());
    let gcd = (1..=m.min(n)).rev().find(|g| m % g == 0 && n % g == 0).unwrap();
    let l = m / gcd * n;
    let xs: Vec<&Vec<f64>> = (0..l).map(|i| &x[i / (l / m)]).collect();
    let ys: Vec<&Vec<f64>> = (0..l).map(|j| &y[j / (l / n)]).collect();
    let cost: Vec<Vec<f64>> = xs.iter().map(|a| ys.iter().map(|b| dist(a, b).powf(p)).collect()).collect();
    (hungarian(&cost) / l as f64).powf(1.0 / p)
}

pub fn matching_w2(x: &[Vec<f64>], y: &[Vec<f64>], dist: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    matching_wp(x, y, 2.0, dist)
}

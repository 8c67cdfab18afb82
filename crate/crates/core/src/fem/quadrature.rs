use super::FemError;

/// Highest polynomial degree a rule can be requested for.
pub const MAX_DEGREE: usize = 20;

/// Quadrature rule on the reference triangle; weights sum to 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Quadrature rule on [0, 1]; weights sum to 1.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> LineRule {
    assert!(n > 0);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.5;
    }
    LineRule { points, weights }
}

/// Rule on [0, 1] exact for polynomials of the given degree.
pub fn line_rule(degree: usize) -> Result<LineRule, FemError> {
    if degree > MAX_DEGREE {
        return Err(FemError::QuadratureDegree(degree));
    }
    Ok(gauss_legendre(degree / 2 + 1))
}

fn symmetric(groups: &[(&[f64], f64)]) -> TriangleRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &(bary, w) in groups {
        let mut add = |l: [f64; 3]| {
            points.push([l[1], l[2]]);
            weights.push(0.5 * w);
        };
        match *bary {
            [] => add([1.0 / 3.0; 3]),
            [a] => {
                let b = 1.0 - 2.0 * a;
                add([b, a, a]);
                add([a, b, a]);
                add([a, a, b]);
            }
            [a, b] => {
                let c = 1.0 - a - b;
                for l in [[a, b, c], [b, a, c], [c, a, b], [a, c, b], [b, c, a], [c, b, a]] {
                    add(l);
                }
            }
            _ => unreachable!(),
        }
    }
    TriangleRule { points, weights }
}

/// Collapsed tensor Gauss rule, used above the tabulated degrees.
fn collapsed(degree: usize) -> TriangleRule {
    let n = (degree + 2).div_ceil(2);
    let g = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (u, wu) in g.points.iter().zip(&g.weights) {
        for (v, wv) in g.points.iter().zip(&g.weights) {
            points.push([*u, (1.0 - u) * v]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

/// Rule on the reference triangle exact for polynomials of the given degree.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule, FemError> {
    Ok(match degree {
        0 | 1 => symmetric(&[(&[], 1.0)]),
        2 => symmetric(&[(&[1.0 / 6.0], 1.0 / 3.0)]),
        3 | 4 => symmetric(&[
            (&[0.445948490915965], 0.223381589678011),
            (&[0.091576213509771], 0.109951743655322),
        ]),
        5 => symmetric(&[
            (&[], 0.225),
            (&[0.470142064105115], 0.132394152788506),
            (&[0.101286507323456], 0.125939180544827),
        ]),
        6 => symmetric(&[
            (&[0.249286745170910], 0.116786275726379),
            (&[0.063089014491502], 0.050844906370207),
            (&[0.053145049844817, 0.310352451033784], 0.082851075618374),
        ]),
        d if d <= MAX_DEGREE => collapsed(d),
        d => return Err(FemError::QuadratureDegree(d)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn triangle_rules_are_exact_on_monomials() {
        for degree in 0..=MAX_DEGREE {
            let r = triangle_rule(degree).unwrap();
            let wsum: f64 = r.weights.iter().sum();
            assert!((wsum - 0.5).abs() < 1e-14, "degree {degree}");
            for p in 0..=degree {
                for q in 0..=(degree - p) {
                    let exact = factorial(p) * factorial(q) / factorial(p + q + 2);
                    let approx: f64 =
                        r.points.iter().zip(&r.weights).map(|(x, w)| w * x[0].powi(p as i32) * x[1].powi(q as i32)).sum();
                    // tabulated rules carry 15 significant digits
                    assert!((approx - exact).abs() < 1e-14, "degree {degree}: x^{p} y^{q}");
                }
            }
        }
        assert!(triangle_rule(MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn second_degree_rule_integrates_x_squared() {
        let r = triangle_rule(2).unwrap();
        let v: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x[0] * x[0]).sum();
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(triangle_rule(0).unwrap().points, vec![[1.0 / 3.0, 1.0 / 3.0]]);
    }

    #[test]
    fn line_rules_are_exact() {
        for degree in 0..=MAX_DEGREE {
            let r = line_rule(degree).unwrap();
            for p in 0..=degree {
                let approx: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((approx - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {degree} x^{p}");
            }
        }
    }
}

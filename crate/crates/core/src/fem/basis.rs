//! Lagrange shape functions of order 1 and 2 on the reference triangle (0,0), (1,0), (0,1).
//!
//! Local numbering: vertices 0, 1, 2, then (order 2) the midpoints of the edges
//! (1,2), (2,0), (0,1).

/// Vertex pairs of the local edges; edge k is opposite vertex k.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

/// Number of shape functions on a triangle.
pub fn local_count(order: usize) -> usize {
    match order {
        1 => 3,
        2 => 6,
        _ => panic!("unsupported element order {order}"),
    }
}

/// Shape function values and reference gradients at one point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeValues {
    pub n: usize,
    pub vals: [f64; 6],
    pub grads: [[f64; 2]; 6],
}

const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub fn shape_values(order: usize, xi: [f64; 2]) -> ShapeValues {
    let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
    let mut s = ShapeValues { n: local_count(order), vals: [0.0; 6], grads: [[0.0; 2]; 6] };
    if order == 1 {
        s.vals[..3].copy_from_slice(&l);
        s.grads[..3].copy_from_slice(&BARY_GRAD);
        return s;
    }
    for i in 0..3 {
        s.vals[i] = l[i] * (2.0 * l[i] - 1.0);
        let c = 4.0 * l[i] - 1.0;
        s.grads[i] = [c * BARY_GRAD[i][0], c * BARY_GRAD[i][1]];
    }
    for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
        s.vals[3 + k] = 4.0 * l[a] * l[b];
        s.grads[3 + k] = [
            4.0 * (l[b] * BARY_GRAD[a][0] + l[a] * BARY_GRAD[b][0]),
            4.0 * (l[b] * BARY_GRAD[a][1] + l[a] * BARY_GRAD[b][1]),
        ];
    }
    s
}

/// Reference coordinates of the local nodes.
pub fn local_nodes(order: usize) -> Vec<[f64; 2]> {
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut out = v.to_vec();
    if order == 2 {
        for [a, b] in LOCAL_EDGES {
            out.push([0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1])]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_basis_is_kronecker_and_partition_of_unity() {
        for order in [1, 2] {
            let nodes = local_nodes(order);
            for (i, p) in nodes.iter().enumerate() {
                let s = shape_values(order, *p);
                for j in 0..s.n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((s.vals[j] - expect).abs() < 1e-15);
                }
            }
            let s = shape_values(order, [0.21, 0.37]);
            let sum: f64 = s.vals[..s.n].iter().sum();
            let gsum = s.grads[..s.n].iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
            assert!((sum - 1.0).abs() < 1e-14);
            assert!(gsum[0].abs() < 1e-14 && gsum[1].abs() < 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = [0.3, 0.45];
        let h = 1e-6;
        for order in [1, 2] {
            let s = shape_values(order, p);
            let sx = shape_values(order, [p[0] + h, p[1]]);
            let sx0 = shape_values(order, [p[0] - h, p[1]]);
            let sy = shape_values(order, [p[0], p[1] + h]);
            let sy0 = shape_values(order, [p[0], p[1] - h]);
            for j in 0..s.n {
                assert!(((sx.vals[j] - sx0.vals[j]) / (2.0 * h) - s.grads[j][0]).abs() < 1e-8);
                assert!(((sy.vals[j] - sy0.vals[j]) / (2.0 * h) - s.grads[j][1]).abs() < 1e-8);
            }
        }
    }
}

//! Dense Cholesky solve for the small symmetric positive-definite systems
//! that appear in the LSFD weight computation (size `|M_t|`).

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn factor(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[[j, j]] = d;
            for i in j + 1..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut y = b.clone();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[[i, k]] * y[k];
            }
            y[i] /= self.l[[i, i]];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[[k, i]] * y[k];
            }
            y[i] /= self.l[[i, i]];
        }
        y
    }
}

pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(Cholesky::factor(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn solves_known_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let x = solve_spd(&a, &array![2.0, 1.0]).unwrap();
        // det = 8: x = [ (3*2 - 2*1)/8, (4*1 - 2*2)/8 ]
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!(x[1].abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            solve_spd(&a, &array![1.0, 1.0]),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        assert!(solve_spd(&array![[0.0]], &array![1.0]).is_err());
    }

    #[test]
    fn matches_nalgebra_on_random_spd() {
        let mut rng = crate::seed::rng(3);
        for n in 1..8 {
            let g = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() - 0.5);
            let a = g.t().dot(&g) + Array2::<f64>::eye(n);
            let b = Array1::from_shape_fn(n, |_| rng.random::<f64>());
            let x = solve_spd(&a, &b).unwrap();

            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
            let nb = nalgebra::DVector::from_fn(n, |i, _| b[i]);
            let want = na.cholesky().unwrap().solve(&nb);
            for i in 0..n {
                assert!((x[i] - want[i]).abs() < 1e-12 * (1.0 + want[i].abs()));
            }
        }
    }
}

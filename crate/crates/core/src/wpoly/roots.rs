use nalgebra::DMatrix;
use num_complex::Complex64;

use super::WPolyError;

/// Univariate real polynomial, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct UPoly {
    coeffs: Vec<f64>,
}

impl UPoly {
    /// Trailing (highest-order) zero coefficients are trimmed.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn eval_complex(&self, t: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> UPoly {
        UPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, order: usize) -> UPoly {
        (0..order).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// All complex roots with multiplicity (unpolished companion eigenvalues
    /// followed by two Newton steps). Conjugate pairs come out as exact
    /// conjugates.
    pub fn roots(&self) -> Result<Vec<Complex64>, WPolyError> {
        let deg = match self.degree() {
            None => return Err(WPolyError::RootFindingFailed("zero polynomial".into())),
            Some(d) => d,
        };
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(WPolyError::RootFindingFailed("non-finite coefficient".into()));
        }
        // Zero roots are split off exactly.
        let lead_zeros = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let mut out = vec![Complex64::new(0.0, 0.0); lead_zeros];
        let rest = &self.coeffs[lead_zeros..];
        let d = deg - lead_zeros;
        if d == 0 {
            return Ok(out);
        }
        let lead = rest[d];
        if d == 1 {
            out.push(Complex64::new(-rest[0] / lead, 0.0));
            return Ok(out);
        }

        // Companion matrix of the monic polynomial: ones on the subdiagonal,
        // last column -c_i / c_d.
        let mut comp = DMatrix::<f64>::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..d {
            comp[(i, d - 1)] = -rest[i] / lead;
        }
        balance(&mut comp);
        let eig = comp
            .try_schur(f64::EPSILON, 10_000)
            .ok_or_else(|| WPolyError::RootFindingFailed("Schur iteration did not converge".into()))?
            .complex_eigenvalues();

        let reduced = UPoly::new(rest.to_vec());
        let deriv = reduced.derivative();
        for z in eig.iter() {
            let mut z = *z;
            if z.im.abs() <= f64::EPSILON * z.re.abs() {
                z.im = 0.0;
            }
            for _ in 0..2 {
                z = newton_step(&reduced, &deriv, z);
            }
            out.push(z);
        }
        Ok(out)
    }

    /// Residual contract `|P(a)| <= tol * max|c| * (1+|a|)^deg`.
    pub fn residual_ok(&self, a: Complex64, tol: f64) -> bool {
        let deg = self.degree().unwrap_or(0) as i32;
        let r = self.eval_complex(a).norm();
        r <= tol * self.max_abs_coeff() * (1.0 + a.norm()).powi(deg)
    }
}

fn newton_step(p: &UPoly, dp: &UPoly, z: Complex64) -> Complex64 {
    let f = p.eval_complex(z);
    let df = dp.eval_complex(z);
    if df.norm() == 0.0 || !df.is_finite() {
        return z;
    }
    let next = z - f / df;
    // Only accept steps that don't make the residual worse.
    if next.is_finite() && p.eval_complex(next).norm() <= f.norm() {
        if z.im == 0.0 {
            Complex64::new(next.re, 0.0)
        } else {
            next
        }
    } else {
        z
    }
}

/// Parlett-Reinsch balancing by powers of two, in place.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0_f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

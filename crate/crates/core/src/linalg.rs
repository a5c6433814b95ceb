//! Dense complex linear algebra for operators of dimension 2..=8.
//!
//! Everything here is sized for small spin Hamiltonians: Hermitian
//! eigendecomposition by cyclic Jacobi sweeps, eigenphases of unitaries via
//! simultaneous diagonalization of the Hermitian/anti-Hermitian parts, and
//! exact matrix exponentials exp(-i s H) of Hermitian generators.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum allowed deviation from Hermiticity on input matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Maximum allowed deviation of `u† u` from the identity on input unitaries.
pub const UNITARY_TOL: f64 = 1e-9;

const MIN_DIM: usize = 2;
const MAX_DIM: usize = 8;

/// Dense complex matrix, row-major, dimension 2..=8.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "matrix dimension {dim} outside [{MIN_DIM}, {MAX_DIM}]"
            )));
        }
        Ok(Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Ok(m)
    }

    /// Build from a closure over (row, col); validates finiteness.
    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(dim: usize, mut f: F) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("matrix rows must be square".into()));
        }
        Self::from_fn(dim, |i, j| rows[i][j])
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("matrix contains non-finite entries".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Self { dim: d, data: vec![Complex64::new(0.0, 0.0); d * d] };
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.dim;
        debug_assert_eq!(d, other.dim);
        let mut out = Self { dim: d, data: vec![Complex64::new(0.0, 0.0); d * d] };
        for i in 0..d {
            for k in 0..d {
                let aik = self.data[i * d + k];
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += aik * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim;
        debug_assert_eq!(d, v.len());
        (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j] * v[j]).sum())
            .collect()
    }

    pub fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        let d = self.dim;
        debug_assert_eq!(d, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b * factor)
            .collect();
        Self { dim: d, data }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * factor).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -1.0)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest `|m[i][j] - conj(m[j][i])|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let defect = (self.at(i, j) - self.at(j, i).conj()).norm();
                worst = worst.max(defect);
            }
        }
        worst
    }

    /// Frobenius norm of u†u - I.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let gram = self.adjoint().mul(self);
        let id = Self::identity(d).expect("dim already validated");
        gram.sub(&id).frobenius_norm()
    }

    pub fn determinant(&self) -> Complex64 {
        // LU with partial pivoting; d <= 8 so this stays cheap.
        let d = self.dim;
        let mut a = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..d {
            let (pivot, _) = (col..d)
                .map(|r| (r, a[r * d + col].norm()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if a[pivot * d + col].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot != col {
                for j in 0..d {
                    a.swap(col * d + j, pivot * d + j);
                }
                det = -det;
            }
            let diag = a[col * d + col];
            det *= diag;
            for r in col + 1..d {
                let factor = a[r * d + col] / diag;
                for j in col..d {
                    let sub = factor * a[col * d + j];
                    a[r * d + j] -= sub;
                }
            }
        }
        det
    }
}

/// Normalized pure state.
#[derive(Clone, Debug)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Normalizes the given amplitudes; errors on zero or non-finite input.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&amplitudes.len()) {
            return Err(Error::InvalidArgument(format!(
                "state dimension {} outside [{MIN_DIM}, {MAX_DIM}]",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("state contains non-finite amplitudes".into()));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::InvalidArgument("cannot normalize zero state".into()));
        }
        let amplitudes = amplitudes.into_iter().map(|z| z / norm).collect();
        Ok(Self { amplitudes })
    }

    /// Basis state |index>.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} >= dim {dim}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self::new(amplitudes)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    #[inline]
    pub fn amp(&self, i: usize) -> Complex64 {
        self.amplitudes[i]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// <self|other>.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |<self|other>|^2.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// <self|op|self>, real part.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        let applied = op.apply(&self.amplitudes);
        self.amplitudes
            .iter()
            .zip(&applied)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Bloch vector (x, y, z) of a two-level state; basis index 0 is the
    /// sigma_z = +1 level.
    pub fn bloch(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(Error::InvalidArgument("bloch vector requires a two-level state".into()));
        }
        let a = self.amplitudes[0];
        let b = self.amplitudes[1];
        let cross = a.conj() * b;
        Ok([2.0 * cross.re, 2.0 * cross.im, a.norm_sqr() - b.norm_sqr()])
    }
}

/// Physical density matrix: Hermitian, unit trace, positive semi-definite.
#[derive(Clone, Debug)]
pub struct DensityState {
    matrix: ComplexMatrix,
}

impl DensityState {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if (matrix.trace().re - 1.0).abs() > 1e-10 || matrix.trace().im.abs() > 1e-10 {
            return Err(Error::ContractViolation(format!(
                "density matrix trace {} not 1 within 1e-10",
                matrix.trace()
            )));
        }
        if matrix.hermiticity_defect() > 1e-12 {
            return Err(Error::ContractViolation(
                "density matrix not Hermitian within 1e-12".into(),
            ));
        }
        let (eigs, _) = hermitian_eig(&matrix)?;
        if eigs.iter().any(|&e| e < -1e-10) {
            return Err(Error::ContractViolation(format!(
                "density matrix has negative eigenvalue {:.3e}",
                eigs[0]
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let d = state.dim();
        let matrix = ComplexMatrix::from_fn(d, |i, j| state.amp(i) * state.amp(j).conj())
            .expect("outer product of a valid state is finite");
        Self { matrix }
    }

    /// Diagonal state from a classical population distribution (must sum to 1).
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "populations sum to {total}, expected 1 within 1e-12"
            )));
        }
        if populations.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidArgument("negative population".into()));
        }
        let d = populations.len();
        let matrix = ComplexMatrix::from_fn(d, |i, j| {
            if i == j { Complex64::new(populations[i], 0.0) } else { Complex64::new(0.0, 0.0) }
        })?;
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::from_populations(&vec![1.0 / dim as f64; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn population(&self, i: usize) -> f64 {
        self.matrix.at(i, i).re
    }

    /// tr(rho op), real part.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        self.matrix.mul(op).trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.mul(&self.matrix).trace().re
    }

    /// u rho u†; does not re-validate the contract (unitaries preserve it).
    pub fn evolve(&self, u: &ComplexMatrix) -> Self {
        Self { matrix: u.mul(&self.matrix).mul(&u.adjoint()) }
    }

    /// Convex combination lambda*self + (1-lambda)*other.
    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        let matrix = self.matrix.scale(Complex64::new(lambda, 0.0)).add_scaled(
            &other.matrix,
            1.0 - lambda,
        );
        Self { matrix }
    }
}

/// Cyclic complex Jacobi on a Hermitian matrix. Returns eigenvalues ascending
/// and the matching orthonormal eigenvectors.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::ContractViolation(format!(
            "hermitian_eig input defect {defect:.3e} exceeds {HERMITIAN_TOL:.1e}"
        )));
    }
    let (values, vectors) = jacobi_hermitian(m);
    let vectors = vectors
        .into_iter()
        .map(StateVector::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((values, vectors))
}

/// Jacobi sweeps without the Hermiticity pre-check; input is symmetrized.
/// Returns (ascending eigenvalues, eigenvectors as Vec of columns).
fn jacobi_hermitian(m: &ComplexMatrix) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let d = m.dim();
    // Symmetrize so roundoff in the input cannot bias the iteration.
    let mut a: Vec<Complex64> = (0..d * d)
        .map(|idx| {
            let (i, j) = (idx / d, idx % d);
            (m.at(i, j) + m.at(j, i).conj()) * 0.5
        })
        .collect();
    let mut v: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        v[i * d + i] = Complex64::new(1.0, 0.0);
    }

    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let tol = scale * 1e-15;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in p + 1..d {
                off += a[p * d + q].norm_sqr();
            }
        }
        if off.sqrt() <= tol * d as f64 {
            break;
        }
        for p in 0..d - 1 {
            for q in p + 1..d {
                let apq = a[p * d + q];
                let b = apq.norm();
                if b <= scale * 1e-300 {
                    continue;
                }
                let phase = apq / b; // e^{i phi}
                let app = a[p * d + p].re;
                let aqq = a[q * d + q].re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // R: identity except R[p][p]=c, R[p][q]=s, R[q][p]=-s e^{-i phi},
                // R[q][q]=c e^{-i phi}; apply A <- R† A R, V <- V R.
                let e_m = phase.conj(); // e^{-i phi}
                let e_p = phase; // e^{+i phi}
                for i in 0..d {
                    let aip = a[i * d + p];
                    let aiq = a[i * d + q];
                    a[i * d + p] = aip * c - aiq * (e_m * s);
                    a[i * d + q] = aip * s + aiq * (e_m * c);
                }
                for j in 0..d {
                    let apj = a[p * d + j];
                    let aqj = a[q * d + j];
                    a[p * d + j] = apj * c - aqj * (e_p * s);
                    a[q * d + j] = apj * s + aqj * (e_p * c);
                }
                for i in 0..d {
                    let vip = v[i * d + p];
                    let viq = v[i * d + q];
                    v[i * d + p] = vip * c - viq * (e_m * s);
                    v[i * d + q] = vip * s + viq * (e_m * c);
                }
                // Clean the eliminated entries exactly.
                a[p * d + q] = Complex64::new(0.0, 0.0);
                a[q * d + p] = Complex64::new(0.0, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[i * d + i].re.total_cmp(&a[j * d + j].re));
    let values: Vec<f64> = order.iter().map(|&i| a[i * d + i].re).collect();
    let vectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&col| (0..d).map(|row| v[row * d + col]).collect())
        .collect();
    (values, vectors)
}

/// Eigenphases of a unitary, in [0, 2*pi), sorted ascending, with the
/// matching eigenvectors.
///
/// Uses the normality of u: diagonalize (u+u†)/2, then split clusters of
/// equal cosines by diagonalizing (u-u†)/(2i) restricted to each cluster.
pub fn unitary_eigenphases(u: &ComplexMatrix) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let defect = u.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::ContractViolation(format!(
            "unitary_eigenphases input defect {defect:.3e} exceeds {UNITARY_TOL:.1e}"
        )));
    }
    let d = u.dim();
    let ua = u.adjoint();
    let re_part = ComplexMatrix::from_fn(d, |i, j| (u.at(i, j) + ua.at(i, j)) * 0.5)?;
    let im_part =
        ComplexMatrix::from_fn(d, |i, j| (u.at(i, j) - ua.at(i, j)) * Complex64::new(0.0, -0.5))?;

    let (cos_vals, mut vecs) = jacobi_hermitian(&re_part);

    // Rotate within clusters of (numerically) equal cosines so the vectors
    // also diagonalize the sine part.
    const CLUSTER_TOL: f64 = 1e-6;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (cos_vals[end] - cos_vals[end - 1]).abs() < CLUSTER_TOL {
            end += 1;
        }
        let width = end - start;
        if width > 1 {
            let block = ComplexMatrix::from_fn(width, |bi, bj| {
                sandwich(&im_part, &vecs[start + bi], &vecs[start + bj])
            })?;
            let (_, w) = jacobi_hermitian(&block);
            let mut rotated: Vec<Vec<Complex64>> = Vec::with_capacity(width);
            for col in &w {
                let mut new_vec = vec![Complex64::new(0.0, 0.0); d];
                for (bi, coeff) in col.iter().enumerate() {
                    for row in 0..d {
                        new_vec[row] += vecs[start + bi][row] * coeff;
                    }
                }
                let norm = new_vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                for z in &mut new_vec {
                    *z /= norm;
                }
                rotated.push(new_vec);
            }
            vecs.splice(start..end, rotated);
        }
        start = end;
    }

    let mut pairs: Vec<(f64, Vec<Complex64>)> = vecs
        .into_iter()
        .map(|vec| {
            let cos_v = sandwich_re(&re_part, &vec);
            let sin_v = sandwich_re(&im_part, &vec);
            let mut phase = sin_v.atan2(cos_v);
            if phase < 0.0 {
                phase += std::f64::consts::TAU;
            }
            if phase >= std::f64::consts::TAU {
                phase = 0.0;
            }
            (phase, vec)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Residual check: u v = e^{i phase} v within the unitarity tolerance.
    for (phase, vec) in &pairs {
        let uv = u.apply(vec);
        let lambda = Complex64::from_polar(1.0, *phase);
        let residual: f64 = uv
            .iter()
            .zip(vec)
            .map(|(a, b)| (a - lambda * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual > UNITARY_TOL {
            return Err(Error::ContractViolation(format!(
                "eigenphase residual {residual:.3e} exceeds {UNITARY_TOL:.1e}"
            )));
        }
    }

    let phases = pairs.iter().map(|(p, _)| *p).collect();
    let vectors = pairs
        .into_iter()
        .map(|(_, v)| StateVector::new(v))
        .collect::<Result<Vec<_>>>()?;
    Ok((phases, vectors))
}

fn sandwich(op: &ComplexMatrix, left: &[Complex64], right: &[Complex64]) -> Complex64 {
    let applied = op.apply(right);
    left.iter().zip(&applied).map(|(a, b)| a.conj() * b).sum()
}

fn sandwich_re(op: &ComplexMatrix, vec: &[Complex64]) -> f64 {
    sandwich(op, vec, vec).re
}

/// exp(-i s h) for Hermitian h, computed by diagonalization (exact up to
/// roundoff, so the result is unitary for any step size).
pub fn expm_skew(h: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::ContractViolation(format!(
            "expm_skew generator defect {defect:.3e} exceeds {HERMITIAN_TOL:.1e}"
        )));
    }
    let d = h.dim();
    let (values, vectors) = jacobi_hermitian(h);
    let mut out = ComplexMatrix::zeros(d)?;
    for (lambda, vec) in values.iter().zip(&vectors) {
        let phase = Complex64::from_polar(1.0, -s * lambda);
        for i in 0..d {
            let left = vec[i] * phase;
            for (j, vj) in vec.iter().enumerate() {
                let term = left * vj.conj();
                let cur = out.at(i, j);
                out.set(i, j, cur + term);
            }
        }
    }
    Ok(out)
}

/// Brute-force reference implementations used only by tests; independent of
/// the Jacobi/diagonalization code paths they check.
#[cfg(test)]
pub(crate) mod test_oracles {
    use super::*;
    use crate::rng::SplitMix64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Eigenvalues by power iteration with deflation on a shifted
    /// positive-definite copy. Converges slowly for closely spaced levels,
    /// so each stage runs until the eigenpair residual (not the iterate
    /// motion) is small.
    pub fn power_iteration_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
        let d = m.dim();
        let shift = m.frobenius_norm() + 1.0;
        // work = m + shift*I, positive definite, same eigenvectors.
        let mut work = m.clone();
        for i in 0..d {
            work.set(i, i, work.at(i, i) + shift);
        }
        let scale = shift;
        let mut found: Vec<(f64, Vec<Complex64>)> = Vec::new();
        let mut rng = SplitMix64::new(0x9d_5eed);
        for _ in 0..d {
            let mut v: Vec<Complex64> =
                (0..d).map(|_| c(rng.next_f64() - 0.5, rng.next_f64() - 0.5)).collect();
            for iter in 0..1_000_000 {
                for (_, u) in &found {
                    let overlap: Complex64 =
                        u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vi, ui) in v.iter_mut().zip(u) {
                        *vi -= overlap * ui;
                    }
                }
                let w = work.apply(&v);
                let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v = w.into_iter().map(|z| z / norm).collect();
                if iter % 64 == 0 {
                    let wv = work.apply(&v);
                    let rq: f64 = v.iter().zip(&wv).map(|(a, b)| (a.conj() * b).re).sum();
                    let residual: f64 = wv
                        .iter()
                        .zip(&v)
                        .map(|(a, b)| (a - b * rq).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    if residual < 1e-10 * scale {
                        break;
                    }
                }
            }
            let wv = work.apply(&v);
            let lambda: f64 = v.iter().zip(&wv).map(|(a, b)| (a.conj() * b).re).sum();
            found.push((lambda, v));
        }
        let mut eigs: Vec<f64> = found.iter().map(|(l, _)| l - shift).collect();
        eigs.sort_by(f64::total_cmp);
        eigs
    }

    /// Scaling-and-squaring Taylor series for exp(-i s h).
    pub fn expm_taylor(h: &ComplexMatrix, s: f64) -> ComplexMatrix {
        let d = h.dim();
        let norm = h.max_abs() * s.abs() * d as f64;
        let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
        let factor = c(0.0, -s / f64::powi(2.0, squarings as i32));
        let scaled = h.scale(factor);
        let mut term = ComplexMatrix::identity(d).unwrap();
        let mut sum = ComplexMatrix::identity(d).unwrap();
        for order in 1..=24 {
            term = term.mul(&scaled).scale(c(1.0 / order as f64, 0.0));
            sum = sum.add_scaled(&term, 1.0);
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::test_oracles::{expm_taylor, power_iteration_eigenvalues};
    use super::*;
    use crate::rng::SplitMix64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]])
            .unwrap()
    }

    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]])
            .unwrap()
    }

    fn random_hermitian(dim: usize, rng: &mut SplitMix64) -> ComplexMatrix {
        ComplexMatrix::from_fn(dim, |_, _| c(0.0, 0.0)).map(|mut m| {
            for i in 0..dim {
                m.set(i, i, c(rng.next_f64() * 2.0 - 1.0, 0.0));
                for j in i + 1..dim {
                    let z = c(rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0);
                    m.set(i, j, z);
                    m.set(j, i, z.conj());
                }
            }
            m
        })
        .unwrap()
    }

    #[test]
    fn pauli_z_spectrum() {
        let (eigs, vecs) = hermitian_eig(&sigma_z()).unwrap();
        assert!((eigs[0] + 1.0).abs() < 1e-14);
        assert!((eigs[1] - 1.0).abs() < 1e-14);
        // ascending: first eigenvector is |1> (spin down).
        assert!((vecs[0].amp(1).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_spectrum() {
        let id = ComplexMatrix::identity(2).unwrap();
        let (eigs, vecs) = hermitian_eig(&id).unwrap();
        assert!(eigs.iter().all(|&e| (e - 1.0).abs() < 1e-14));
        assert!(vecs[0].inner(&vecs[1]).norm() < 1e-12);
    }

    #[test]
    fn random_hermitian_residuals_and_orthonormality() {
        let mut rng = SplitMix64::new(7);
        for dim in [2, 3, 5, 6, 8] {
            let m = random_hermitian(dim, &mut rng);
            let (eigs, vecs) = hermitian_eig(&m).unwrap();
            for (lambda, vec) in eigs.iter().zip(&vecs) {
                let mv = m.apply(vec.amplitudes());
                let residual: f64 = mv
                    .iter()
                    .zip(vec.amplitudes())
                    .map(|(a, b)| (a - b * *lambda).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(residual < 1e-10, "dim {dim} residual {residual:.2e}");
            }
            for i in 0..dim {
                for j in 0..dim {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    let overlap = vecs[i].inner(&vecs[j]).norm();
                    assert!((overlap - expected).abs() < 1e-10);
                }
            }
            let trace_sum: f64 = eigs.iter().sum();
            assert!((trace_sum - m.trace().re).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_match_power_iteration_oracle() {
        let mut rng = SplitMix64::new(41);
        let m = random_hermitian(6, &mut rng);
        let jacobi = hermitian_eig(&m).unwrap().0;
        let oracle = power_iteration_eigenvalues(&m);
        for (a, b) in jacobi.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "jacobi {a} vs power iteration {b}");
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.5, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn unitary_phases_identity_and_minus_identity() {
        let id = ComplexMatrix::identity(2).unwrap();
        let (phases, _) = unitary_eigenphases(&id).unwrap();
        assert!(phases.iter().all(|&p| p.abs() < 1e-12));

        let minus = id.scale(c(-1.0, 0.0));
        let (phases, vecs) = unitary_eigenphases(&minus).unwrap();
        assert!(phases.iter().all(|&p| (p - std::f64::consts::PI).abs() < 1e-12));
        assert!(vecs[0].inner(&vecs[1]).norm() < 1e-10);
    }

    #[test]
    fn unitary_phases_of_sigma_x_rotation() {
        // exp(-i theta sigma_x) has eigenphases {2pi - theta, theta}; the
        // cosine parts coincide so this exercises the cluster splitting.
        let theta = 0.3;
        let u = expm_skew(&sigma_x(), theta).unwrap();
        let (phases, vecs) = unitary_eigenphases(&u).unwrap();
        let mut sorted = phases.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - theta).abs() < 1e-12, "got {sorted:?}");
        assert!((sorted[1] - (std::f64::consts::TAU - theta)).abs() < 1e-12);
        for (phase, vec) in phases.iter().zip(&vecs) {
            let uv = u.apply(vec.amplitudes());
            let lambda = Complex64::from_polar(1.0, *phase);
            let res: f64 = uv
                .iter()
                .zip(vec.amplitudes())
                .map(|(a, b)| (a - lambda * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-12);
        }
    }

    #[test]
    fn unitary_phase_sum_matches_determinant() {
        let mut rng = SplitMix64::new(99);
        for dim in [2, 4, 6] {
            let h = random_hermitian(dim, &mut rng);
            let u = expm_skew(&h, 0.7).unwrap();
            let (phases, _) = unitary_eigenphases(&u).unwrap();
            let sum: f64 = phases.iter().sum();
            let det_arg = u.determinant().arg();
            let diff = (sum - det_arg).rem_euclid(std::f64::consts::TAU);
            let wrapped = diff.min(std::f64::consts::TAU - diff);
            assert!(wrapped < 1e-9, "dim {dim}: phase sum vs det arg differ by {wrapped:.2e}");
        }
    }

    #[test]
    fn rejects_non_unitary() {
        let m = sigma_z().scale(c(0.9, 0.0));
        assert!(matches!(unitary_eigenphases(&m), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn expm_zero_scale_is_identity() {
        let mut rng = SplitMix64::new(3);
        let h = random_hermitian(4, &mut rng);
        let u = expm_skew(&h, 0.0).unwrap();
        let id = ComplexMatrix::identity(4).unwrap();
        assert!(u.sub(&id).frobenius_norm() < 1e-14);
    }

    #[test]
    fn expm_sigma_x_quarter_turn() {
        // exp(-i (pi/2) sigma_x) = -i sigma_x.
        let u = expm_skew(&sigma_x(), std::f64::consts::FRAC_PI_2).unwrap();
        let expected = sigma_x().scale(c(0.0, -1.0));
        assert!(u.sub(&expected).frobenius_norm() < 1e-14);
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let mut rng = SplitMix64::new(123);
        let h = random_hermitian(6, &mut rng);
        let u = expm_skew(&h, 0.1).unwrap();
        let oracle = expm_taylor(&h, 0.1);
        assert!(u.sub(&oracle).frobenius_norm() < 1e-11);
        assert!(u.unitarity_defect() < 1e-11);
    }

    #[test]
    fn expm_forward_backward_is_identity() {
        let mut rng = SplitMix64::new(5);
        for dim in [2, 3, 6, 8] {
            let h = random_hermitian(dim, &mut rng);
            let s = rng.next_f64() * 3.0;
            let forward = expm_skew(&h, s).unwrap();
            let backward = expm_skew(&h, -s).unwrap();
            let prod = forward.mul(&backward);
            let id = ComplexMatrix::identity(dim).unwrap();
            assert!(prod.sub(&id).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn state_vector_normalizes() {
        let v = StateVector::new(vec![c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v.amp(0).re - 0.6).abs() < 1e-12);
    }

    #[test]
    fn state_vector_rejects_zero() {
        assert!(StateVector::new(vec![c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn bloch_of_ground_state() {
        let g = StateVector::basis(2, 1).unwrap();
        let b = g.bloch().unwrap();
        assert!((b[2] + 1.0).abs() < 1e-14);
        assert!(b[0].abs() < 1e-14 && b[1].abs() < 1e-14);
    }

    #[test]
    fn density_state_contracts() {
        let mixed = DensityState::maximally_mixed(6).unwrap();
        assert!((mixed.purity() - 1.0 / 6.0).abs() < 1e-12);

        let bad = ComplexMatrix::identity(2).unwrap();
        assert!(DensityState::new(bad).is_err()); // trace 2
    }

    #[test]
    fn matrix_dim_bounds() {
        assert!(ComplexMatrix::zeros(1).is_err());
        assert!(ComplexMatrix::zeros(9).is_err());
        assert!(ComplexMatrix::zeros(8).is_ok());
    }
}

//! PCA shape subspace and the coefficient-space domain coding.
//!
//! Shapes are normalized per axis to `[0, 1]`, projected onto the first `K`
//! principal axes, and the resulting coefficient vectors are assigned to one
//! of `M = 2^K + 1` sub-domains: the `2^K` orthants around the coefficient
//! mean (labels `1..=2^K`) plus the one-standard-deviation ellipse (label `M`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{shape_to_bbox, Shape};

const MIN_STD: f64 = 1e-12;
pub const MAX_K: usize = 8;

/// 1-based sub-domain label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DomainLabel(u32);

impl DomainLabel {
    pub fn new(label: u32) -> Self {
        assert!(label >= 1, "domain labels are 1-based");
        DomainLabel(label)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// 0-based index into per-domain tables.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl std::fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of sub-domains for a `k`-dimensional subspace.
pub fn domain_count(k: usize) -> usize {
    (1usize << k) + 1
}

/// Domains a training sample belongs to: always its orthant, plus the
/// ellipse domain when it lies inside the ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Memberships {
    pub orthant: DomainLabel,
    pub ellipse: Option<DomainLabel>,
}

impl Memberships {
    pub fn contains(&self, label: DomainLabel) -> bool {
        self.orthant == label || self.ellipse == Some(label)
    }

    pub fn len(&self) -> usize {
        1 + usize::from(self.ellipse.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> impl Iterator<Item = DomainLabel> {
        std::iter::once(self.orthant).chain(self.ellipse)
    }
}

/// Decreasing schedule `h(n)` of out-of-domain weights, one entry per
/// domain-specific stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FuzzySchedule(Vec<f64>);

impl FuzzySchedule {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.iter().any(|&v| !(v > 0.0 && v < 0.5)) {
            return Err(Error::InvalidConfig(format!(
                "fuzzy schedule values must lie in (0, 0.5): {h:?}"
            )));
        }
        if h.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::InvalidConfig(format!(
                "fuzzy schedule must be strictly decreasing: {h:?}"
            )));
        }
        Ok(FuzzySchedule(h))
    }

    /// Bypasses validation; only for symmetric-weight experiments.
    #[doc(hidden)]
    pub fn new_unchecked(h: Vec<f64>) -> Self {
        FuzzySchedule(h)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `h(n)` for the 1-based stage `n`.
    pub fn h(&self, stage: usize) -> f64 {
        self.0[stage - 1]
    }
}

impl Default for FuzzySchedule {
    fn default() -> Self {
        FuzzySchedule(vec![0.3, 0.2, 0.1])
    }
}

impl TryFrom<Vec<f64>> for FuzzySchedule {
    type Error = Error;

    fn try_from(h: Vec<f64>) -> Result<Self> {
        FuzzySchedule::new(h)
    }
}

impl From<FuzzySchedule> for Vec<f64> {
    fn from(s: FuzzySchedule) -> Self {
        s.0
    }
}

/// Maps each axis of the shape affinely onto `[0, 1]` using its own bounds.
pub fn normalize_shape(shape: &Shape) -> Result<Vec<f64>> {
    let b = shape_to_bbox(shape)?;
    let (w, h) = (b.width(), b.height());
    Ok(shape
        .iter_points()
        .flat_map(|(x, y)| [(x - b.x1) / w, (y - b.y1) / h])
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSubspace {
    mean_shape: DVector<f64>,
    /// `2L × K`, orthonormal columns ordered by descending eigenvalue.
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    coeff_mean: DVector<f64>,
    coeff_std: DVector<f64>,
}

impl ShapeSubspace {
    /// Principal component analysis of normalized shape vectors.
    pub fn fit(normalized_shapes: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = normalized_shapes.len();
        if k == 0 || k > MAX_K {
            return Err(Error::InvalidConfig(format!(
                "subspace dimension must be in 1..={MAX_K}, got {k}"
            )));
        }
        if n < k + 1 {
            return Err(Error::InsufficientSamples {
                needed: k + 1,
                actual: n,
            });
        }
        let dim = normalized_shapes[0].len();
        if k > dim {
            return Err(Error::InvalidConfig(format!(
                "subspace dimension {k} exceeds shape dimension {dim}"
            )));
        }
        if let Some(bad) = normalized_shapes.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "subspace training shape",
                expected: dim,
                actual: bad.len(),
            });
        }

        let data = DMatrix::from_row_iterator(n, dim, normalized_shapes.iter().flatten().copied());
        let mean = DVector::from_iterator(dim, data.column_iter().map(|c| c.mean()));
        let mut centered = data;
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.transpose() * &centered / n as f64;
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut eigvecs = DMatrix::zeros(dim, k);
        let mut eigvals = DVector::zeros(k);
        for (col, &src) in order.iter().take(k).enumerate() {
            let mut v = eig.eigenvectors.column(src).into_owned();
            let pivot = v
                .iter()
                .enumerate()
                .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
            if v[pivot] < 0.0 {
                v = -v;
            }
            eigvecs.set_column(col, &v);
            eigvals[col] = eig.eigenvalues[src].max(0.0);
        }

        let coeffs = &centered * &eigvecs; // n × k
        let coeff_mean = DVector::from_iterator(k, coeffs.column_iter().map(|c| c.mean()));
        let coeff_std = DVector::from_iterator(
            k,
            coeffs.column_iter().zip(coeff_mean.iter()).map(|(c, m)| {
                let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                var.sqrt().max(MIN_STD)
            }),
        );

        Ok(ShapeSubspace {
            mean_shape: mean,
            eigvecs,
            eigvals,
            coeff_mean,
            coeff_std,
        })
    }

    /// Reassembles a subspace from stored parts (model loading).
    pub fn from_parts(
        mean_shape: DVector<f64>,
        eigvecs: DMatrix<f64>,
        eigvals: DVector<f64>,
        coeff_mean: DVector<f64>,
        coeff_std: DVector<f64>,
    ) -> Result<Self> {
        let k = eigvecs.ncols();
        if eigvecs.nrows() != mean_shape.len()
            || eigvals.len() != k
            || coeff_mean.len() != k
            || coeff_std.len() != k
            || k == 0
            || k > MAX_K
        {
            return Err(Error::InvalidInput("inconsistent subspace dimensions".into()));
        }
        if coeff_std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidInput("coefficient std must be positive".into()));
        }
        Ok(ShapeSubspace {
            mean_shape,
            eigvecs,
            eigvals,
            coeff_mean,
            coeff_std,
        })
    }

    pub fn k(&self) -> usize {
        self.eigvecs.ncols()
    }

    pub fn dim(&self) -> usize {
        self.mean_shape.len()
    }

    pub fn domain_count(&self) -> usize {
        domain_count(self.k())
    }

    pub fn mean_shape(&self) -> &DVector<f64> {
        &self.mean_shape
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn coeff_mean(&self) -> &DVector<f64> {
        &self.coeff_mean
    }

    pub fn coeff_std(&self) -> &DVector<f64> {
        &self.coeff_std
    }

    /// `c = Vᵀ(x − mean)`.
    pub fn project(&self, normalized: &[f64]) -> Result<Vec<f64>> {
        if normalized.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "subspace projection",
                expected: self.dim(),
                actual: normalized.len(),
            });
        }
        let x = DVector::from_column_slice(normalized) - &self.mean_shape;
        Ok((self.eigvecs.transpose() * x).as_slice().to_vec())
    }

    /// `mean + V c`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_k(coeffs)?;
        let c = DVector::from_column_slice(coeffs);
        Ok((&self.mean_shape + &self.eigvecs * c).as_slice().to_vec())
    }

    /// Normalizes and projects a pixel-space shape.
    pub fn shape_coefficients(&self, shape: &Shape) -> Result<Vec<f64>> {
        self.project(&normalize_shape(shape)?)
    }

    fn check_k(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.k() {
            return Err(Error::DimensionMismatch {
                context: "coefficient vector",
                expected: self.k(),
                actual: c.len(),
            });
        }
        Ok(())
    }

    /// Orthant code `1 + Σ_k b_k 2^(k-1)` with `b_k = [c_k ≥ c̄_k]`.
    pub fn membership_word(&self, c: &[f64]) -> Result<DomainLabel> {
        self.check_k(c)?;
        let word = c
            .iter()
            .zip(self.coeff_mean.iter())
            .enumerate()
            .filter(|(_, (v, m))| v >= m)
            .fold(0u32, |acc, (k, _)| acc | (1 << k));
        Ok(DomainLabel(1 + word))
    }

    /// `Σ_k (c_k − c̄_k)² / σ_k²`.
    pub fn ellipse_distance(&self, c: &[f64]) -> Result<f64> {
        self.check_k(c)?;
        Ok(c
            .iter()
            .zip(self.coeff_mean.iter().zip(self.coeff_std.iter()))
            .map(|(v, (m, s))| (v - m) * (v - m) / (s * s))
            .sum())
    }

    pub fn in_ellipse(&self, c: &[f64]) -> Result<bool> {
        Ok(self.ellipse_distance(c)? <= 1.0)
    }

    pub fn ellipse_label(&self) -> DomainLabel {
        DomainLabel(self.domain_count() as u32)
    }

    /// Overlapping training-time domain assignment.
    pub fn training_memberships(&self, c: &[f64]) -> Result<Memberships> {
        Ok(Memberships {
            orthant: self.membership_word(c)?,
            ellipse: self.in_ellipse(c)?.then(|| self.ellipse_label()),
        })
    }

    /// Non-overlapping inference-time domain: the ellipse wins.
    pub fn predict_domain(&self, c: &[f64]) -> Result<DomainLabel> {
        if self.in_ellipse(c)? {
            Ok(self.ellipse_label())
        } else {
            self.membership_word(c)
        }
    }
}

/// `1 − h(n)` for members of `domain`, `h(n)` otherwise.
pub fn fuzzy_weight(
    memberships: &Memberships,
    domain: DomainLabel,
    stage: usize,
    schedule: &FuzzySchedule,
) -> f64 {
    let h = schedule.h(stage);
    if memberships.contains(domain) {
        1.0 - h
    } else {
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn subspace_with(mean: Vec<f64>, std: Vec<f64>) -> ShapeSubspace {
        let k = mean.len();
        ShapeSubspace::from_parts(
            DVector::zeros(2 * k.max(2)),
            DMatrix::identity(2 * k.max(2), k),
            DVector::from_element(k, 1.0),
            DVector::from_vec(mean),
            DVector::from_vec(std),
        )
        .unwrap()
    }

    #[test]
    fn normalization_endpoints() {
        let s = Shape::from_points(&[(10.0, 20.0), (30.0, 60.0), (20.0, 30.0)]).unwrap();
        let n = normalize_shape(&s).unwrap();
        assert_eq!(&n[..4], &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(&n[4..], &[0.5, 0.25]);
        let unit = Shape::from_points(&[(0.0, 0.0), (1.0, 1.0), (0.25, 0.5)]).unwrap();
        assert_eq!(normalize_shape(&unit).unwrap(), unit.as_slice());
        let flat = Shape::from_points(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert!(normalize_shape(&flat).is_err());
    }

    proptest! {
        #[test]
        fn normalization_ignores_axis_scale_and_shift(
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 4..12),
            sx in 0.1f64..10.0, sy in 0.1f64..10.0, tx in -50.0f64..50.0, ty in -50.0f64..50.0,
        ) {
            let mut pts = pts;
            pts.push((0.0, 0.0));
            pts.push((1.0, 1.0));
            let s = Shape::from_points(&pts).unwrap();
            let moved = Shape::from_points(
                &pts.iter().map(|&(x, y)| (x * sx + tx, y * sy + ty)).collect::<Vec<_>>(),
            ).unwrap();
            let a = normalize_shape(&s).unwrap();
            let b = normalize_shape(&moved).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn membership_words_from_the_coding_rule() {
        let s = subspace_with(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(s.membership_word(&[0.5, 0.5]).unwrap().get(), 4);
        assert_eq!(s.membership_word(&[-0.1, 0.2]).unwrap().get(), 3);
        assert_eq!(s.membership_word(&[0.0, -0.4]).unwrap().get(), 2);
        assert_eq!(s.membership_word(&[-1.0, -1.0]).unwrap().get(), 1);
        assert!(s.membership_word(&[1.0]).is_err());
    }

    #[test]
    fn ellipse_boundary_is_inclusive() {
        let s = subspace_with(vec![0.5, -1.0], vec![2.0, 0.5]);
        assert!(s.in_ellipse(&[0.5, -1.0]).unwrap());
        assert!(s.in_ellipse(&[2.5, -1.0]).unwrap());
        assert!(!s.in_ellipse(&[4.5, -1.0]).unwrap());
        assert_eq!(s.ellipse_distance(&[4.5, -1.0]).unwrap(), 4.0);
    }

    #[test]
    fn memberships_and_prediction() {
        let s = subspace_with(vec![0.0, 0.0], vec![1.0, 2.0]);
        let center = s.training_memberships(&[0.0, 0.0]).unwrap();
        assert_eq!(center.labels().map(|l| l.get()).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(s.predict_domain(&[0.0, 0.0]).unwrap().get(), 5);

        let far = s.training_memberships(&[-5.0, 9.0]).unwrap();
        assert_eq!(far.len(), 1);
        assert_eq!(far.orthant.get(), 3);
        assert_eq!(s.predict_domain(&[3.0, 6.0]).unwrap().get(), 4);
    }

    #[test]
    fn fuzzy_weights_follow_schedule() {
        let sched = FuzzySchedule::default();
        let m = Memberships {
            orthant: DomainLabel::new(2),
            ellipse: None,
        };
        assert!((fuzzy_weight(&m, DomainLabel::new(2), 1, &sched) - 0.7).abs() < 1e-15);
        assert!((fuzzy_weight(&m, DomainLabel::new(3), 3, &sched) - 0.1).abs() < 1e-15);
        assert!((fuzzy_weight(&m, DomainLabel::new(2), 3, &sched) - 0.9).abs() < 1e-15);
        for n in 1..=3 {
            assert!(
                fuzzy_weight(&m, DomainLabel::new(2), n, &sched)
                    > fuzzy_weight(&m, DomainLabel::new(1), n, &sched)
            );
        }
        for n in 1..3 {
            assert!(fuzzy_weight(&m, DomainLabel::new(2), n + 1, &sched) > fuzzy_weight(&m, DomainLabel::new(2), n, &sched));
            assert!(fuzzy_weight(&m, DomainLabel::new(1), n + 1, &sched) < fuzzy_weight(&m, DomainLabel::new(1), n, &sched));
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(FuzzySchedule::new(vec![0.3, 0.3]).is_err());
        assert!(FuzzySchedule::new(vec![0.5]).is_err());
        assert!(FuzzySchedule::new(vec![0.2, 0.0]).is_err());
        assert!(FuzzySchedule::new(vec![0.4, 0.2, 0.01]).is_ok());
    }

    fn random_shapes(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn fit_rejects_too_few_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ShapeSubspace::fit(&random_shapes(&mut rng, 2, 6), 2).is_err());
        assert!(ShapeSubspace::fit(&random_shapes(&mut rng, 3, 6), 2).is_ok());
    }

    #[test]
    fn eigvecs_are_orthonormal_and_sign_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_shapes(&mut rng, 40, 8);
        let s = ShapeSubspace::fit(&data, 3).unwrap();
        let gram = s.eigvecs().transpose() * s.eigvecs();
        assert!((gram - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-9);
        for col in s.eigvecs().column_iter() {
            let pivot = col.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            assert!(pivot > 0.0);
        }
        assert_eq!(s, ShapeSubspace::fit(&data, 3).unwrap());
        assert!(s.eigvals()[0] >= s.eigvals()[1] && s.eigvals()[1] >= s.eigvals()[2]);
    }

    #[test]
    fn symmetric_samples_have_zero_mean_coefficient() {
        // Points spread symmetrically along one direction around a center.
        let center = [0.5, 0.4, 0.2, 0.9, 0.7, 0.1];
        let dir = [0.6, 0.0, -0.8, 0.0, 0.0, 0.0];
        let data: Vec<Vec<f64>> = [-2.0, -1.0, 1.0, 2.0]
            .iter()
            .map(|t| center.iter().zip(&dir).map(|(c, d)| c + t * d * 0.1).collect())
            .collect();
        let s = ShapeSubspace::fit(&data, 1).unwrap();
        let v = s.eigvecs().column(0);
        assert!((v[0].abs() - 0.6).abs() < 1e-9 && (v[2].abs() - 0.8).abs() < 1e-9);
        assert!(s.coeff_mean()[0].abs() < 1e-9);
    }

    #[test]
    fn complete_basis_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_shapes(&mut rng, 30, 6);
        let s = ShapeSubspace::fit(&data, 6).unwrap();
        for x in &data {
            let r = s.reconstruct(&s.project(x).unwrap()).unwrap();
            for (a, b) in r.iter().zip(x) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projection_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_shapes(&mut rng, 20, 6);
        let s = ShapeSubspace::fit(&data, 2).unwrap();
        let mean = s.mean_shape().as_slice().to_vec();
        assert!(s.project(&mean).unwrap().iter().all(|v| v.abs() < 1e-12));
        let shifted: Vec<f64> = mean.iter().zip(s.eigvecs().column(1).iter()).map(|(m, v)| m + v).collect();
        let c = s.project(&shifted).unwrap();
        assert!(c[0].abs() < 1e-12 && (c[1] - 1.0).abs() < 1e-12);

        let x = &data[3];
        let c = s.project(x).unwrap();
        for k in 0..2 {
            let dot: f64 = (0..6).map(|j| s.eigvecs()[(j, k)] * (x[j] - mean[j])).sum();
            assert!((c[k] - dot).abs() < 1e-12);
        }
        assert!(s.project(&[0.0; 4]).is_err());
    }

    #[test]
    fn matches_covariance_eigen_oracle() {
        // Power iteration with deflation on the explicitly formed covariance.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dim = 10;
        let data: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let b: f64 = rng.gen_range(-1.0..1.0);
                (0..dim)
                    .map(|j| 0.5 + 0.3 * a * (j as f64 * 0.7).sin() + 0.1 * b * (j as f64 * 1.3).cos() + 0.01 * rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let s = ShapeSubspace::fit(&data, 2).unwrap();

        let n = data.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n).collect();
        let mut cov = vec![vec![0.0; dim]; dim];
        for x in &data {
            for a in 0..dim {
                for b in 0..dim {
                    cov[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]) / n;
                }
            }
        }
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for _ in 0..2 {
            let mut v = vec![1.0; dim];
            for _ in 0..5000 {
                let mut w: Vec<f64> = (0..dim).map(|a| (0..dim).map(|b| cov[a][b] * v[b]).sum()).collect();
                for u in &vecs {
                    let d: f64 = w.iter().zip(u).map(|(p, q)| p * q).sum();
                    w.iter_mut().zip(u).for_each(|(p, q)| *p -= d * q);
                }
                let norm = w.iter().map(|p| p * p).sum::<f64>().sqrt();
                v = w.into_iter().map(|p| p / norm).collect();
            }
            vecs.push(v);
        }
        for x in &data {
            let c = s.project(x).unwrap();
            for (k, u) in vecs.iter().enumerate() {
                let oc: f64 = (0..dim).map(|j| u[j] * (x[j] - mean[j])).sum();
                assert!((c[k].abs() - oc.abs()).abs() < 1e-8, "{} vs {}", c[k], oc);
            }
        }
    }

    #[test]
    fn two_label_fraction_equals_ellipse_rate() {
        let s = subspace_with(vec![0.1, -0.2], vec![0.8, 1.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let normal = rand_distr_normal();
        let (mut two, mut inside) = (0, 0);
        for _ in 0..10_000 {
            let c = [normal(&mut rng) * 1.2, normal(&mut rng) * 1.5];
            if s.training_memberships(&c).unwrap().len() == 2 {
                two += 1;
            }
            if s.in_ellipse(&c).unwrap() {
                inside += 1;
            }
            let p = s.predict_domain(&c).unwrap();
            assert!(s.training_memberships(&c).unwrap().contains(p));
        }
        assert_eq!(two, inside);
        assert!(inside > 0);
    }

    fn rand_distr_normal() -> impl Fn(&mut ChaCha8Rng) -> f64 {
        |rng| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }
    }
}

//! Point clouds, labeled/validation/test splits and label matrices.
//!
//! Class labels are stored 0-based (`0..c`); file loaders keep the original
//! class names so that the contiguous indices can be mapped back.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::math::ceil;
use crate::{rng, Error, Mat, Result};

/// Dense `n × d` point cloud with optional class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Mat,
    labels: Vec<Option<usize>>,
    classes: usize,
    class_names: Vec<String>,
    noise_columns: Vec<usize>,
}

impl Dataset {
    /// Validates and wraps a feature matrix and per-point labels in `0..classes`.
    pub fn new(features: Mat, labels: Vec<Option<usize>>, classes: usize) -> Result<Self> {
        let names = (1..=classes).map(|c| format!("{c}")).collect();
        Self::with_class_names(features, labels, names)
    }

    /// Like [`Dataset::new`] but keeps the original class names.
    pub fn with_class_names(
        features: Mat,
        labels: Vec<Option<usize>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = (features.rows(), features.cols());
        let classes = class_names.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 points, got {n}")));
        }
        if d < 1 {
            return Err(Error::InvalidData("need at least 1 feature".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidData(format!("need at least 2 classes, got {classes}")));
        }
        if labels.len() != n {
            return Err(Error::InvalidData(format!("{} labels for {n} points", labels.len())));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&y| y >= classes) {
            return Err(Error::InvalidData(format!("label {bad} outside 0..{classes}")));
        }
        if !features.is_finite() {
            return Err(Error::InvalidData("non-finite feature".into()));
        }
        Ok(Self { features, labels, classes, class_names, noise_columns: Vec::new() })
    }

    /// Number of points `n`.
    pub fn n(&self) -> usize {
        self.features.rows()
    }

    /// Dimensionality `d`.
    pub fn d(&self) -> usize {
        self.features.cols()
    }

    /// Number of classes `c`.
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Feature matrix.
    pub fn features(&self) -> &Mat {
        &self.features
    }

    /// Feature vector of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Per-point labels (`None` = unlabeled).
    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Label of point `i`.
    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    /// Original class names, indexed by contiguous class index.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Columns appended by [`inject_noise_features`].
    pub fn noise_columns(&self) -> &[usize] {
        &self.noise_columns
    }

    /// Marks columns as injected noise (used when reloading augmented files).
    pub fn set_noise_columns(&mut self, cols: Vec<usize>) -> Result<()> {
        if let Some(c) = cols.iter().find(|&&c| c >= self.d()) {
            return Err(Error::InvalidData(format!("noise column {c} out of range")));
        }
        self.noise_columns = cols;
        Ok(())
    }

    /// True when every point carries a label.
    pub fn fully_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }
}

/// Partition of the points into labeled (`L`), validation (`V ⊆ L`) and
/// unlabeled/test indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Labeled indices, sorted.
    pub labeled: Vec<usize>,
    /// Validation indices, sorted, subset of `labeled`.
    pub validation: Vec<usize>,
    /// Unlabeled (test) indices, sorted.
    pub unlabeled: Vec<usize>,
}

impl SplitSpec {
    /// Checks the split against a dataset: disjoint cover of `0..n`,
    /// `V ⊆ L`, every labeled point carries a label, every class labeled.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let n = dataset.n();
        let mut seen = alloc::vec![false; n];
        for &i in self.labeled.iter().chain(&self.unlabeled) {
            if i >= n {
                return Err(Error::InvalidData(format!("split index {i} out of range for n={n}")));
            }
            if seen[i] {
                return Err(Error::InvalidData(format!("split index {i} listed twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidData("split does not cover every point".into()));
        }
        let labeled: BTreeSet<usize> = self.labeled.iter().copied().collect();
        if let Some(v) = self.validation.iter().find(|v| !labeled.contains(v)) {
            return Err(Error::InvalidData(format!("validation index {v} is not labeled")));
        }
        let mut present = alloc::vec![false; dataset.classes()];
        for &i in &self.labeled {
            match dataset.label(i) {
                Some(y) => present[y] = true,
                None => return Err(Error::InvalidData(format!("labeled point {i} has no label"))),
            }
        }
        if let Some(c) = present.iter().position(|p| !p) {
            return Err(Error::InfeasibleSplit(format!("class {} has no labeled point", c + 1)));
        }
        Ok(())
    }

    /// Labeled points that seed the diffusion during search (`L ∖ V`).
    pub fn sources(&self) -> Vec<usize> {
        let v: BTreeSet<usize> = self.validation.iter().copied().collect();
        self.labeled.iter().copied().filter(|i| !v.contains(i)).collect()
    }
}

/// Samples `⌈labeled_fraction·n⌉` labeled points covering every class and a
/// validation subset of them.
///
/// One diffusion source per class is reserved before validation points are
/// drawn, so every class keeps a labeled seed outside `V`. When `|L| ≥ 2c`
/// a second point of every class is reserved for `V`. `V` has
/// `max(c, ⌈validation_fraction·|L|⌉)` points, capped at `|L| - c`.
pub fn sample_split(
    dataset: &Dataset,
    labeled_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<SplitSpec> {
    if !(labeled_fraction > 0.0 && labeled_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("labeled fraction {labeled_fraction} not in (0,1)")));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "validation fraction {validation_fraction} not in (0,1)"
        )));
    }
    if !dataset.fully_labeled() {
        return Err(Error::InvalidData("sampling a split needs a label for every point".into()));
    }
    let n = dataset.n();
    let c = dataset.classes();
    let l = ceil(labeled_fraction * n as f64) as usize;
    if l < c {
        return Err(Error::InfeasibleSplit(format!("{l} labeled points cannot cover {c} classes")));
    }
    if l >= n {
        return Err(Error::InfeasibleSplit(format!("{l} labeled points leave no test set")));
    }
    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); c];
    for i in 0..n {
        by_class[dataset.label(i).expect("fully labeled")].push(i);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::InfeasibleSplit(format!("class {} has no points", empty + 1)));
    }

    let mut rng = rng::from_seed(seed);
    let mut chosen = alloc::vec![false; n];
    let mut in_v = alloc::vec![false; n];
    let mut validation = Vec::new();
    for members in &by_class {
        let pick = members[rng.random_range(0..members.len())];
        chosen[pick] = true;
    }
    // one validation point per class when every class can spare one
    if l >= 2 * c {
        for members in &by_class {
            let spare: Vec<usize> = members.iter().copied().filter(|&i| !chosen[i]).collect();
            if let Some(&i) = spare.get(rng.random_range(0..spare.len().max(1))) {
                chosen[i] = true;
                in_v[i] = true;
                validation.push(i);
            }
        }
    }
    let taken = chosen.iter().filter(|&&b| b).count();
    let mut rest: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
    rest.shuffle(&mut rng);
    let mut pool: Vec<usize> = validation.clone();
    for &i in &rest[..l - taken] {
        chosen[i] = true;
        pool.push(i);
    }

    let target = (ceil(validation_fraction * l as f64) as usize).max(c).min(l - c);
    if target == 0 {
        return Err(Error::InfeasibleSplit(format!(
            "{l} labeled points leave no validation points after reserving one source per class"
        )));
    }
    let mut others: Vec<usize> = pool.iter().copied().filter(|&i| !in_v[i]).collect();
    others.shuffle(&mut rng);
    for &i in &others {
        if validation.len() >= target {
            break;
        }
        validation.push(i);
        in_v[i] = true;
    }

    let mut labeled: Vec<usize> = (0..n).filter(|&i| chosen[i]).collect();
    labeled.sort_unstable();
    validation.sort_unstable();
    let unlabeled = (0..n).filter(|&i| !chosen[i]).collect();
    Ok(SplitSpec { labeled, validation, unlabeled })
}

/// Appends `⌈noise_fraction·d⌉` i.i.d. standard normal columns.
pub fn inject_noise_features(dataset: &Dataset, noise_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(noise_fraction > 0.0) || !noise_fraction.is_finite() {
        return Err(Error::InvalidParameter(format!("noise fraction {noise_fraction} must be > 0")));
    }
    let (n, d) = (dataset.n(), dataset.d());
    let extra = ceil(noise_fraction * d as f64) as usize;
    let mut rng = rng::from_seed(seed);
    let mut out = Mat::zeros(n, d + extra);
    for i in 0..n {
        let row = out.row_mut(i);
        row[..d].copy_from_slice(dataset.point(i));
        for v in &mut row[d..] {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    let mut noise_columns = dataset.noise_columns.clone();
    noise_columns.extend(d..d + extra);
    Ok(Dataset {
        features: out,
        labels: dataset.labels.clone(),
        classes: dataset.classes,
        class_names: dataset.class_names.clone(),
        noise_columns,
    })
}

/// Binary `n × c` label matrix `Y`.
///
/// Rows of `L ∖ V` are one-hot; validation rows are one-hot only when
/// `include_validation` is set; all other rows are zero.
pub fn build_label_matrix(dataset: &Dataset, split: &SplitSpec, include_validation: bool) -> Mat {
    let mut y = Mat::zeros(dataset.n(), dataset.classes());
    let rows: Vec<usize> = if include_validation { split.labeled.clone() } else { split.sources() };
    for i in rows {
        if let Some(c) = dataset.label(i) {
            y[(i, c)] = 1.0;
        }
    }
    y
}

/// Synthetic Gaussian blobs for tests, benchmarks and demos.
pub mod synthetic {
    use super::*;

    /// Parameters of [`gaussian_blobs`].
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct BlobSpec {
        /// Point count.
        pub n: usize,
        /// Number of classes (one blob each).
        pub classes: usize,
        /// Dimensionality.
        pub dims: usize,
        /// Class centers are drawn uniformly from `[-center_scale, center_scale]^dims`.
        pub center_scale: f64,
        /// Per-coordinate standard deviation around the center.
        pub spread: f64,
    }

    /// Balanced labeled blobs; point `i` belongs to class `i mod classes`.
    pub fn gaussian_blobs(spec: &BlobSpec, seed: u64) -> Result<Dataset> {
        let mut rng = rng::from_seed(seed);
        let centers: Vec<Vec<f64>> = (0..spec.classes)
            .map(|_| {
                (0..spec.dims)
                    .map(|_| rng.random_range(-spec.center_scale..=spec.center_scale))
                    .collect()
            })
            .collect();
        let mut x = Mat::zeros(spec.n, spec.dims);
        let mut labels = Vec::with_capacity(spec.n);
        for i in 0..spec.n {
            let class = i % spec.classes;
            for (m, v) in x.row_mut(i).iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = centers[class][m] + spec.spread * z;
            }
            labels.push(Some(class));
        }
        Dataset::new(x, labels, spec.classes)
    }

    /// Uniform random points in the unit cube with random labels.
    pub fn uniform_cloud(n: usize, d: usize, classes: usize, seed: u64) -> Result<Dataset> {
        let mut rng = rng::from_seed(seed);
        let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
        let labels = (0..n).map(|i| Some(i % classes)).collect();
        Dataset::new(Mat::from_vec(n, d, data), labels, classes)
    }
}

#[cfg(test)]
mod tests {
    use super::synthetic::uniform_cloud;
    use super::*;
    use alloc::vec;

    fn toy(n: usize, classes: usize) -> Dataset {
        uniform_cloud(n, 3, classes, 11).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        let x = Mat::from_vec(2, 1, vec![0.0, f64::NAN]);
        assert!(matches!(Dataset::new(x, vec![Some(0), Some(1)], 2), Err(Error::InvalidData(m)) if m.contains("non-finite")));
        let x = Mat::from_vec(2, 1, vec![0.0, 1.0]);
        assert!(Dataset::new(x.clone(), vec![Some(0), Some(2)], 2).is_err());
        assert!(Dataset::new(x, vec![Some(0), None], 1).is_err());
    }

    #[test]
    fn split_sizes_and_coverage() {
        let ds = toy(100, 5);
        let s = sample_split(&ds, 0.1, 0.5, 3).unwrap();
        assert_eq!(s.labeled.len(), 10);
        assert_eq!(s.unlabeled.len(), 90);
        s.validate(&ds).unwrap();
        assert_eq!(s.validation.len(), 5);
        let classes: BTreeSet<_> = s.labeled.iter().map(|&i| ds.label(i).unwrap()).collect();
        assert_eq!(classes.len(), 5);
        let source_classes: BTreeSet<_> = s.sources().iter().map(|&i| ds.label(i).unwrap()).collect();
        assert_eq!(source_classes.len(), 5);
    }

    #[test]
    fn split_pigeonhole_error() {
        let ds = toy(100, 5);
        assert!(matches!(sample_split(&ds, 0.04, 0.5, 1), Err(Error::InfeasibleSplit(_))));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = toy(60, 3);
        assert_eq!(sample_split(&ds, 0.2, 0.5, 9).unwrap(), sample_split(&ds, 0.2, 0.5, 9).unwrap());
        assert_ne!(sample_split(&ds, 0.2, 0.5, 9).unwrap(), sample_split(&ds, 0.2, 0.5, 10).unwrap());
    }

    #[test]
    fn noise_injection_dims_and_prefix() {
        let ds = toy(10, 2);
        let noisy = inject_noise_features(&ds, 1.0, 5).unwrap();
        assert_eq!(noisy.d(), 6);
        assert_eq!(noisy.noise_columns(), &[3, 4, 5]);
        for i in 0..10 {
            assert_eq!(&noisy.point(i)[..3], ds.point(i));
        }
        assert_eq!(noisy, inject_noise_features(&ds, 1.0, 5).unwrap());

        let x = Mat::from_vec(2, 1, vec![0.0, 1.0]);
        let one = Dataset::new(x, vec![Some(0), Some(1)], 2).unwrap();
        assert_eq!(inject_noise_features(&one, 1.0, 0).unwrap().d(), 2);
        assert!(inject_noise_features(&one, 0.0, 0).is_err());
    }

    #[test]
    fn label_matrix_rows() {
        let x = Mat::from_vec(3, 1, vec![0.0, 1.0, 2.0]);
        let ds = Dataset::new(x, vec![Some(0), Some(1), Some(1)], 2).unwrap();
        let split = SplitSpec { labeled: vec![0, 1], validation: vec![1], unlabeled: vec![2] };
        let y = build_label_matrix(&ds, &split, false);
        assert_eq!(y.row(0), &[1.0, 0.0]);
        assert_eq!(y.row(1), &[0.0, 0.0]);
        assert_eq!(y.row(2), &[0.0, 0.0]);
        let y = build_label_matrix(&ds, &split, true);
        assert_eq!(y.row(1), &[0.0, 1.0]);
        assert_eq!(y.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn split_validation_catches_overlap() {
        let ds = toy(4, 2);
        let bad = SplitSpec { labeled: vec![0, 1], validation: vec![2], unlabeled: vec![2, 3] };
        assert!(bad.validate(&ds).is_err());
    }
}

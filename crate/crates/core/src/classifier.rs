//! Subgraph-signature classifiers.
//!
//! [`CentroidModel`] is the baseline: one mean image per class, trained on walks drawn from
//! single-class networks, predicting the class whose mean is nearest in squared Euclidean
//! distance. Anything implementing [`Classifier`] can be plugged into the lens pipeline.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::embedding::BitImage;
use crate::walk::{derive_seed, rng_from_seed};

const MODEL_MAGIC: &str = "netlens-centroid-model 1";

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("class catalog needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("class name {0:?} appears more than once")]
    DuplicateClass(String),
    #[error("class name {0:?} is empty or contains whitespace, ',' or ';'")]
    InvalidClassName(String),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("class {0:?} has no training samples")]
    EmptyClass(String),
    #[error("image side {found} does not match lens size {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("no model for lens size {0}")]
    NoModelForSize(usize),
    #[error("models disagree on the class catalog")]
    CatalogMismatch,
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Ordered, duplicate-free list of class names. Index order is fixed for a run.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClassCatalog {
    names: Vec<String>,
}

impl ClassCatalog {
    pub fn new<I, S>(names: I) -> Result<Self, ClassifierError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',' || c == ';') {
                return Err(ClassifierError::InvalidClassName(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(ClassifierError::DuplicateClass(name.clone()));
            }
        }
        if names.len() < 2 {
            return Err(ClassifierError::TooFewClasses(names.len()));
        }
        Ok(ClassCatalog { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ClassifierError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ClassifierError::UnknownClass(name.to_string()))
    }
}

/// Maps a lens-walk image to a class index.
pub trait Classifier: Sync {
    fn catalog(&self) -> &ClassCatalog;

    /// `walk_seed` is the derived seed of the walk that produced `image`; deterministic
    /// classifiers ignore it.
    fn classify(&self, image: &BitImage, walk_seed: u64) -> Result<usize, ClassifierError>;
}

/// Per-class mean of flattened training images for one lens size.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidModel {
    lens_size: usize,
    catalog: ClassCatalog,
    means: Vec<Vec<f64>>,
    sample_counts: Vec<usize>,
    norms: Vec<f64>,
}

impl CentroidModel {
    /// Averages the flattened bit vectors of each class.
    pub fn train(
        catalog: &ClassCatalog,
        samples: &[(BitImage, usize)],
        lens_size: usize,
    ) -> Result<Self, ClassifierError> {
        let c = catalog.len();
        let dim = lens_size * lens_size;
        let mut sums = vec![vec![0u64; dim]; c];
        let mut counts = vec![0usize; c];
        for (img, class) in samples {
            if img.side() != lens_size {
                return Err(ClassifierError::SizeMismatch {
                    expected: lens_size,
                    found: img.side(),
                });
            }
            if *class >= c {
                return Err(ClassifierError::ClassOutOfRange {
                    index: *class,
                    classes: c,
                });
            }
            counts[*class] += 1;
            for k in img.ones() {
                sums[*class][k] += 1;
            }
        }
        if let Some(empty) = counts.iter().position(|&n| n == 0) {
            return Err(ClassifierError::EmptyClass(catalog.name(empty).to_string()));
        }
        let means = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &n)| s.into_iter().map(|x| x as f64 / n as f64).collect())
            .collect();
        Ok(Self::from_parts(lens_size, catalog.clone(), means, counts))
    }

    fn from_parts(lens_size: usize, catalog: ClassCatalog, means: Vec<Vec<f64>>, sample_counts: Vec<usize>) -> Self {
        let norms = means.iter().map(|m| m.iter().map(|x| x * x).sum()).collect();
        CentroidModel {
            lens_size,
            catalog,
            means,
            sample_counts,
            norms,
        }
    }

    pub fn lens_size(&self) -> usize {
        self.lens_size
    }

    pub fn mean(&self, class: usize) -> &[f64] {
        &self.means[class]
    }

    pub fn sample_counts(&self) -> &[usize] {
        &self.sample_counts
    }

    /// Squared Euclidean distance from `img` to every class mean.
    pub fn distances(&self, img: &BitImage) -> Result<Vec<f64>, ClassifierError> {
        if img.side() != self.lens_size {
            return Err(ClassifierError::SizeMismatch {
                expected: self.lens_size,
                found: img.side(),
            });
        }
        let ones: Vec<usize> = img.ones().collect();
        let pop = ones.len() as f64;
        Ok(self
            .means
            .iter()
            .zip(&self.norms)
            .map(|(mean, norm)| {
                let dot: f64 = ones.iter().map(|&k| mean[k]).sum();
                norm - 2.0 * dot + pop
            })
            .collect())
    }

    /// Nearest class mean; exact ties go to the lowest class index.
    pub fn predict(&self, img: &BitImage) -> Result<usize, ClassifierError> {
        let d = self.distances(img)?;
        let mut best = 0;
        for (i, &x) in d.iter().enumerate().skip(1) {
            if x < d[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Plain-text model: magic line, `lens_size`, `classes`, `samples`, then one line per class
    /// holding the class name and its mean vector at six significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_MAGIC}");
        let _ = writeln!(out, "lens_size {}", self.lens_size);
        let _ = writeln!(out, "classes {}", self.catalog.names().join(" "));
        let counts: Vec<String> = self.sample_counts.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "samples {}", counts.join(" "));
        for (class, mean) in self.means.iter().enumerate() {
            out.push_str(self.catalog.name(class));
            for &x in mean {
                out.push(' ');
                out.push_str(&format_sig6(x));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ClassifierError> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| ClassifierError::Format {
                    line: 0,
                    message: format!("missing {what}"),
                })
                .map(|(i, l)| (i + 1, l))
        };
        let fmt_err = |line: usize, message: &str| ClassifierError::Format {
            line,
            message: message.to_string(),
        };
        let (ln, magic) = next("header")?;
        if magic.trim() != MODEL_MAGIC {
            return Err(fmt_err(ln, "not a centroid model file"));
        }
        let (ln, size_line) = next("lens_size")?;
        let lens_size: usize = size_line
            .strip_prefix("lens_size ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| fmt_err(ln, "expected `lens_size <n>`"))?;
        let (ln, class_line) = next("classes")?;
        let names: Vec<&str> = class_line
            .strip_prefix("classes ")
            .ok_or_else(|| fmt_err(ln, "expected `classes ...`"))?
            .split_whitespace()
            .collect();
        let catalog = ClassCatalog::new(names)?;
        let (ln, sample_line) = next("samples")?;
        let counts: Vec<usize> = sample_line
            .strip_prefix("samples ")
            .ok_or_else(|| fmt_err(ln, "expected `samples ...`"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| fmt_err(ln, "bad sample count")))
            .collect::<Result<_, _>>()?;
        if counts.len() != catalog.len() {
            return Err(fmt_err(ln, "sample count per class required"));
        }
        let dim = lens_size * lens_size;
        let mut means = Vec::with_capacity(catalog.len());
        for class in 0..catalog.len() {
            let (ln, line) = next("class mean")?;
            let mut tokens = line.split_whitespace();
            if tokens.next() != Some(catalog.name(class)) {
                return Err(fmt_err(ln, "class rows must follow the catalog order"));
            }
            let mean: Vec<f64> = tokens
                .map(|t| t.parse::<f64>().map_err(|_| fmt_err(ln, "bad mean value")))
                .collect::<Result<_, _>>()?;
            if mean.len() != dim {
                return Err(fmt_err(ln, "mean vector length must be lens_size squared"));
            }
            means.push(mean);
        }
        Ok(Self::from_parts(lens_size, catalog, means, counts))
    }
}

impl Classifier for CentroidModel {
    fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    fn classify(&self, image: &BitImage, _walk_seed: u64) -> Result<usize, ClassifierError> {
        self.predict(image)
    }
}

/// One [`CentroidModel`] per lens size, dispatching on the image side.
#[derive(Clone, Debug)]
pub struct CentroidEnsemble {
    catalog: ClassCatalog,
    models: BTreeMap<usize, CentroidModel>,
}

impl CentroidEnsemble {
    pub fn new(models: Vec<CentroidModel>) -> Result<Self, ClassifierError> {
        let catalog = models
            .first()
            .map(|m| m.catalog.clone())
            .ok_or(ClassifierError::TooFewClasses(0))?;
        let mut map = BTreeMap::new();
        for m in models {
            if m.catalog != catalog {
                return Err(ClassifierError::CatalogMismatch);
            }
            map.insert(m.lens_size, m);
        }
        Ok(CentroidEnsemble { catalog, models: map })
    }

    pub fn model(&self, lens_size: usize) -> Option<&CentroidModel> {
        self.models.get(&lens_size)
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.models.keys().copied()
    }

    pub fn models(&self) -> impl Iterator<Item = &CentroidModel> {
        self.models.values()
    }
}

impl Classifier for CentroidEnsemble {
    fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    fn classify(&self, image: &BitImage, _walk_seed: u64) -> Result<usize, ClassifierError> {
        self.models
            .get(&image.side())
            .ok_or(ClassifierError::NoModelForSize(image.side()))?
            .predict(image)
    }
}

/// Labels every walk uniformly at random, seeded by the walk. Serves as the chance baseline.
#[derive(Clone, Debug)]
pub struct UniformRandomClassifier {
    catalog: ClassCatalog,
    seed: u64,
}

impl UniformRandomClassifier {
    pub fn new(catalog: ClassCatalog, seed: u64) -> Self {
        UniformRandomClassifier { catalog, seed }
    }
}

impl Classifier for UniformRandomClassifier {
    fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    fn classify(&self, _image: &BitImage, walk_seed: u64) -> Result<usize, ClassifierError> {
        let mut rng = rng_from_seed(derive_seed(self.seed, &[walk_seed]));
        Ok(rng.gen_range(0..self.catalog.len()))
    }
}

/// Decimal rendering with at most six significant digits and no trailing zeros.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

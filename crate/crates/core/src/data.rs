//! Raw single-label feature datasets: a synthetic hierarchical Gaussian
//! generator for desk-scale runs, and a CSV loader for externally supplied
//! features.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use num_traits::Float;
use thiserror::Error;

use crate::hierarchy::{ClassId, Hierarchy};
use crate::rng::Xorshift64Star;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("line {0}: {1}")]
    ParseError(usize, String),
    #[error("line {0}: unknown label `{1}`")]
    UnknownLabel(usize, String),
    #[error("line {0}: expected {1} features")]
    DimensionMismatch(usize, usize),
    #[error("duplicate sample id {0}")]
    DuplicateId(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One raw feature vector with its single subclass label.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample<F> {
    pub id: u64,
    pub features: Vec<F>,
    pub subclass: ClassId,
}

/// Parameters of the synthetic hierarchical Gaussian generator.
///
/// Superclass centers are drawn from `N(0, sup_scale² I)`, each subclass
/// center from its parent center plus `N(0, sub_scale² I)` (standalone
/// classes draw a fresh `N(0, sup_scale² I)` center), and each sample from
/// its subclass center plus `N(0, noise_scale² I)`.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub dim: usize,
    pub samples_per_subclass: usize,
    pub sup_scale: f64,
    pub sub_scale: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Default desk-scale shape: d=16 with (10, 3, 1) scales.
    pub fn with_seed(seed: u64, samples_per_subclass: usize) -> Self {
        Self {
            dim: 16,
            samples_per_subclass,
            sup_scale: 10.0,
            sub_scale: 3.0,
            noise_scale: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if !(self.sup_scale > self.sub_scale
            && self.sub_scale > self.noise_scale
            && self.noise_scale > 0.0)
        {
            return Err(DataError::InvalidSpec(
                "scales must satisfy sup > sub > noise > 0".into(),
            ));
        }
        if self.samples_per_subclass < 1 {
            return Err(DataError::InvalidSpec("need at least one sample per subclass".into()));
        }
        if self.dim < 2 {
            return Err(DataError::InvalidSpec("dimension must be at least 2".into()));
        }
        Ok(())
    }
}

fn gaussian_vec<F: Float>(rng: &mut Xorshift64Star, dim: usize, scale: f64) -> Vec<F> {
    (0..dim)
        .map(|_| F::from(rng.next_gaussian() * scale).unwrap())
        .collect()
}

/// Generate `samples_per_subclass` samples for every non-superclass class.
///
/// Draw order is fixed: superclass centers in class-index order, then
/// subclass centers in class-index order, then samples per subclass in
/// class-index order. Sample ids are sequential from 0 in generation order.
pub fn generate_synthetic<F: Float>(
    hierarchy: &Hierarchy,
    spec: &SynthSpec,
) -> Result<Vec<RawSample<F>>, DataError> {
    spec.validate()?;
    let mut rng = Xorshift64Star::derived(spec.seed, "synth", 0);
    let mut centers: Vec<Option<Vec<f64>>> = vec![None; hierarchy.len()];
    for sup in hierarchy.superclasses() {
        centers[sup.0] = Some(gaussian_vec(&mut rng, spec.dim, spec.sup_scale));
    }
    for sub in hierarchy.subclasses() {
        let center = match hierarchy.parent(sub) {
            Some(p) => {
                let offset: Vec<f64> = gaussian_vec(&mut rng, spec.dim, spec.sub_scale);
                centers[p.0]
                    .as_ref()
                    .unwrap()
                    .iter()
                    .zip(&offset)
                    .map(|(c, o)| c + o)
                    .collect()
            }
            None => gaussian_vec(&mut rng, spec.dim, spec.sup_scale),
        };
        centers[sub.0] = Some(center);
    }
    let mut samples = Vec::new();
    let mut next_id = 0u64;
    for sub in hierarchy.subclasses() {
        let center = centers[sub.0].as_ref().unwrap();
        for _ in 0..spec.samples_per_subclass {
            let noise: Vec<f64> = gaussian_vec(&mut rng, spec.dim, spec.noise_scale);
            let features = center
                .iter()
                .zip(&noise)
                .map(|(c, n)| F::from(c + n).unwrap())
                .collect();
            samples.push(RawSample {
                id: next_id,
                features,
                subclass: sub,
            });
            next_id += 1;
        }
    }
    Ok(samples)
}

/// Load samples from CSV with header `id,label,f0,...,f{d-1}`. Labels must
/// name non-superclass classes of `hierarchy`.
pub fn load_external<F: Float, R: BufRead>(
    reader: R,
    hierarchy: &Hierarchy,
) -> Result<Vec<RawSample<F>>, DataError> {
    let mut samples = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if lineno == 1 {
            if !line.starts_with("id,label,") {
                return Err(DataError::ParseError(lineno, "bad header".into()));
            }
            dim = Some(line.split(',').count() - 2);
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let dim = dim.unwrap();
        if fields.len() != dim + 2 {
            return Err(DataError::DimensionMismatch(lineno, dim));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| DataError::ParseError(lineno, format!("bad id `{}`", fields[0])))?;
        if !seen_ids.insert(id) {
            return Err(DataError::DuplicateId(id));
        }
        let class = hierarchy
            .lookup(fields[1])
            .filter(|&c| !hierarchy.is_superclass(c))
            .ok_or_else(|| DataError::UnknownLabel(lineno, fields[1].to_string()))?;
        let features = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map(|v| F::from(v).unwrap())
                    .map_err(|_| DataError::ParseError(lineno, format!("bad float `{f}`")))
            })
            .collect::<Result<Vec<F>, _>>()?;
        samples.push(RawSample {
            id,
            features,
            subclass: class,
        });
    }
    Ok(samples)
}

/// Write samples in the same CSV format `load_external` reads.
pub fn write_csv<F: Float + std::fmt::Display, W: Write>(
    samples: &[RawSample<F>],
    hierarchy: &Hierarchy,
    mut out: W,
) -> Result<(), DataError> {
    let dim = samples.first().map_or(0, |s| s.features.len());
    write!(out, "id,label")?;
    for i in 0..dim {
        write!(out, ",f{i}")?;
    }
    writeln!(out)?;
    for s in samples {
        write!(out, "{},{}", s.id, hierarchy.name(s.subclass))?;
        for f in &s.features {
            write!(out, ",{f}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    fn small_hierarchy() -> Hierarchy {
        let recs: Vec<(String, Option<String>)> = vec![
            ("a1".into(), Some("A".into())),
            ("a2".into(), Some("A".into())),
            ("a3".into(), Some("A".into())),
            ("b1".into(), Some("B".into())),
            ("b2".into(), Some("B".into())),
            ("b3".into(), Some("B".into())),
            ("s1".into(), None),
            ("s2".into(), None),
        ];
        Hierarchy::build(&recs).unwrap()
    }

    #[test]
    fn sample_count_is_n_times_subclasses() {
        let h = small_hierarchy();
        let spec = SynthSpec::with_seed(3, 25);
        let samples: Vec<RawSample<f64>> = generate_synthetic(&h, &spec).unwrap();
        assert_eq!(samples.len(), 25 * 8);
        for sub in h.subclasses() {
            assert_eq!(samples.iter().filter(|s| s.subclass == sub).count(), 25);
        }
    }

    #[test]
    fn single_sample_single_class() {
        let h = Hierarchy::build(&[("only".into(), None)]).unwrap();
        let spec = SynthSpec::with_seed(0, 1);
        let samples: Vec<RawSample<f64>> = generate_synthetic(&h, &spec).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].subclass, h.lookup("only").unwrap());
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let h = small_hierarchy();
        let spec = SynthSpec::with_seed(11, 10);
        let a: Vec<RawSample<f64>> = generate_synthetic(&h, &spec).unwrap();
        let b: Vec<RawSample<f64>> = generate_synthetic(&h, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_spec_rejected() {
        let h = small_hierarchy();
        let mut spec = SynthSpec::with_seed(0, 10);
        spec.sub_scale = 20.0;
        assert!(matches!(
            generate_synthetic::<f64>(&h, &spec),
            Err(DataError::InvalidSpec(_))
        ));
    }

    #[test]
    fn nearest_mean_oracle_separates_classes() {
        let h = small_hierarchy();
        let spec = SynthSpec::with_seed(7, 100);
        let samples: Vec<RawSample<f64>> = generate_synthetic(&h, &spec).unwrap();
        // empirical per-class means as an independent classifier
        let mut means: Vec<Vec<f64>> = vec![vec![0.0; spec.dim]; h.len()];
        let mut counts = vec![0usize; h.len()];
        for s in &samples {
            counts[s.subclass.0] += 1;
            for (m, f) in means[s.subclass.0].iter_mut().zip(&s.features) {
                *m += f;
            }
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            if c > 0 {
                m.iter_mut().for_each(|v| *v /= c as f64);
            }
        }
        let correct = samples
            .iter()
            .filter(|s| {
                let best = h
                    .subclasses()
                    .min_by(|&a, &b| {
                        let da: f64 = means[a.0]
                            .iter()
                            .zip(&s.features)
                            .map(|(m, f)| (m - f).powi(2))
                            .sum();
                        let db: f64 = means[b.0]
                            .iter()
                            .zip(&s.features)
                            .map(|(m, f)| (m - f).powi(2))
                            .sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                best == s.subclass
            })
            .count();
        assert!(
            correct as f64 >= 0.99 * samples.len() as f64,
            "only {}/{} separable",
            correct,
            samples.len()
        );
    }

    #[test]
    fn csv_round_trip() {
        let h = small_hierarchy();
        let spec = SynthSpec::with_seed(2, 5);
        let samples: Vec<RawSample<f64>> = generate_synthetic(&h, &spec).unwrap();
        let mut buf = Vec::new();
        write_csv(&samples, &h, &mut buf).unwrap();
        let parsed: Vec<RawSample<f64>> =
            load_external(BufReader::new(buf.as_slice()), &h).unwrap();
        assert_eq!(samples, parsed);
    }

    #[test]
    fn loader_rejects_bad_rows() {
        let h = small_hierarchy();
        let csv = "id,label,f0,f1\n0,a1,1.0,2.0\n1,nope,1.0,2.0\n";
        let err = load_external::<f64, _>(BufReader::new(csv.as_bytes()), &h).unwrap_err();
        assert!(matches!(err, DataError::UnknownLabel(3, _)));

        let csv = "id,label,f0,f1\n0,a1,1.0\n";
        let err = load_external::<f64, _>(BufReader::new(csv.as_bytes()), &h).unwrap_err();
        assert!(matches!(err, DataError::DimensionMismatch(2, 2)));

        let csv = "id,label,f0,f1\n0,a1,1.0,2.0\n0,a2,1.0,2.0\n";
        let err = load_external::<f64, _>(BufReader::new(csv.as_bytes()), &h).unwrap_err();
        assert!(matches!(err, DataError::DuplicateId(0)));
    }
}

//! The self-taught training pipeline: learn a dictionary from unlabeled
//! data, encode the labeled examples as sparse activations, optionally
//! reduce them with PCA, and train the feed-forward classifier on the
//! result. Prediction replays exactly that chain.

use nalgebra::{DMatrix, DVector};

use crate::dict::{self, Dictionary, LearnParams};
use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::irls::{self, EncodeConfig};
use crate::lasso::{self, LassoProblem};
use crate::nn::{self, NeuralNet, TrainHyper};
use crate::pca::{self, PcaModel};
use crate::threads;

/// Examples without labels; every row must lie in the family's data domain.
#[derive(Debug, Clone)]
pub struct UnlabeledDataset {
    pub x: DMatrix<f64>,
    pub family: Family,
}

impl UnlabeledDataset {
    pub fn new(x: DMatrix<f64>, family: Family) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("unlabeled dataset must be nonempty"));
        }
        family.check_domain_all(x.as_slice())?;
        Ok(UnlabeledDataset { x, family })
    }
}

/// Examples with class labels in 1..=num_classes.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: DMatrix<f64>,
    pub y: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(x: DMatrix<f64>, y: Vec<usize>, num_classes: usize) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("labeled dataset must be nonempty"));
        }
        if y.len() != x.nrows() {
            return Err(Error::invalid(format!(
                "{} labels for {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if num_classes < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        if let Some(&bad) = y.iter().find(|&&v| v == 0 || v > num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside 1..={num_classes}"
            )));
        }
        Ok(LabeledDataset { x, y, num_classes })
    }

    /// Examples per class, indexed by class − 1.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &y in &self.y {
            counts[y - 1] += 1;
        }
        counts
    }
}

/// Everything the full training run needs; persisted with the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub family: Family,
    pub seed: u64,
    pub n_basis: usize,
    /// Dictionary-training penalty; also the default encoding penalty.
    pub beta: f64,
    /// Overrides `beta` for feature encoding when set.
    pub encode_beta: Option<f64>,
    /// Encoding stop threshold.
    pub epsilon: f64,
    pub norm_bound: f64,
    pub sweeps: usize,
    pub dict_tol: f64,
    /// Retained PCA components; None disables the reducer.
    pub pca: Option<usize>,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_scale: f64,
    pub l2_decay: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            family: Family::Gaussian,
            seed: 0,
            n_basis: 8,
            beta: 0.1,
            encode_beta: None,
            epsilon: 1e-6,
            norm_bound: 1.0,
            sweeps: 50,
            dict_tol: 1e-5,
            pca: None,
            hidden: 32,
            learning_rate: 0.5,
            epochs: 200,
            batch_size: 32,
            init_scale: 0.1,
            l2_decay: 0.0,
        }
    }
}

impl PipelineConfig {
    pub fn effective_encode_beta(&self) -> f64 {
        self.encode_beta.unwrap_or(self.beta)
    }

    fn learn_params(&self) -> LearnParams {
        LearnParams {
            n_basis: self.n_basis,
            beta: self.beta,
            norm_bound: self.norm_bound,
            family: self.family,
            sweeps: self.sweeps,
            seed: self.seed,
            tol: self.dict_tol,
            encode_epsilon: self.epsilon,
        }
    }

    fn train_hyper(&self) -> TrainHyper {
        TrainHyper {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            init_scale: self.init_scale,
            l2_decay: self.l2_decay,
            hidden: self.hidden,
        }
    }

    fn encode_config(&self) -> EncodeConfig {
        EncodeConfig {
            beta: self.effective_encode_beta(),
            epsilon: self.epsilon,
            ..EncodeConfig::default()
        }
    }
}

/// Dictionary, optional reducer, classifier, and the configuration that
/// produced them.
#[derive(Debug, Clone)]
pub struct SelfTaughtModel {
    pub dictionary: Dictionary,
    pub reducer: Option<PcaModel>,
    pub classifier: NeuralNet,
    pub config: PipelineConfig,
}

impl SelfTaughtModel {
    /// Verify the feature-dimension chain dictionary → reducer → classifier.
    pub fn validate(&self) -> Result<()> {
        let n = self.dictionary.n_basis();
        let classifier_in = self.classifier.dims()[0];
        match &self.reducer {
            Some(r) => {
                if r.mean.len() != n {
                    return Err(Error::invalid(format!(
                        "reducer expects dimension {} but the dictionary produces {n}",
                        r.mean.len()
                    )));
                }
                if classifier_in != r.retained {
                    return Err(Error::invalid(format!(
                        "classifier expects {classifier_in} inputs but the reducer keeps {}",
                        r.retained
                    )));
                }
            }
            None => {
                if classifier_in != n {
                    return Err(Error::invalid(format!(
                        "classifier expects {classifier_in} inputs but the dictionary produces {n}"
                    )));
                }
            }
        }
        self.classifier.validate()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.dims()[2]
    }
}

/// Encode the rows of `x` against a dictionary: the weighted-lasso solution
/// with unit weights for gaussian dictionaries, the reweighted encoding for
/// the discrete families. Row-level parallelism is capped by
/// `STLCODE_THREADS`.
pub fn encode_features(dictionary: &Dictionary, x: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    encode_features_opts(
        dictionary,
        x,
        &EncodeConfig::new(beta),
        threads::row_encode_threads(),
    )
}

/// [`encode_features`] with explicit encoding options and thread count.
pub fn encode_features_opts(
    dictionary: &Dictionary,
    x: &DMatrix<f64>,
    config: &EncodeConfig,
    threads: usize,
) -> Result<DMatrix<f64>> {
    if x.ncols() != dictionary.input_dim() {
        return Err(Error::invalid(format!(
            "examples have dimension {} but the dictionary expects {}",
            x.ncols(),
            dictionary.input_dim()
        )));
    }
    config.validate()?;
    dictionary.family.check_domain_all(x.as_slice())?;

    let n = dictionary.n_basis();
    let basis = dictionary.basis();
    let rows = threads::map_rows(x.nrows(), threads, |i| {
        let xi = x.row(i).transpose();
        match dictionary.family {
            Family::Gaussian => {
                let weights = DVector::from_element(basis.nrows(), 1.0);
                let problem = LassoProblem::new(basis.clone(), xi, weights, config.beta)?;
                lasso::solve_weighted_lasso(&problem, lasso::DEFAULT_TOL, lasso::default_max_steps(n))
                    .map(|sol| sol.s)
            }
            _ => irls::encode(dictionary.family, basis, &xi, config).map(|code| code.s),
        }
    })?;

    let mut features = DMatrix::zeros(x.nrows(), n);
    for (i, s) in rows.into_iter().enumerate() {
        features.row_mut(i).copy_from(&s.transpose());
    }
    Ok(features)
}

/// Run the whole pipeline. Errors carry the name of the stage that failed.
pub fn self_taught_train(
    unlabeled: &UnlabeledDataset,
    labeled: &LabeledDataset,
    config: &PipelineConfig,
) -> Result<SelfTaughtModel> {
    if labeled.x.ncols() != unlabeled.x.ncols() {
        return Err(Error::invalid(format!(
            "labeled examples have dimension {} but unlabeled have {}",
            labeled.x.ncols(),
            unlabeled.x.ncols()
        )));
    }
    unlabeled
        .family
        .check_domain_all(labeled.x.as_slice())
        .map_err(|e| e.in_stage("feature-encoding"))?;
    if let Some(missing) = labeled.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "class {} has no labeled examples",
            missing + 1
        )));
    }

    let (dictionary, _) = dict::learn_dictionary(&unlabeled.x, &config.learn_params())
        .map_err(|e| e.in_stage("dictionary-learning"))?;

    let features = encode_features_opts(
        &dictionary,
        &labeled.x,
        &config.encode_config(),
        threads::row_encode_threads(),
    )
    .map_err(|e| e.in_stage("feature-encoding"))?;

    let (reducer, reduced) = match config.pca {
        Some(r) => {
            let model = pca::pca_fit(&features, r).map_err(|e| e.in_stage("pca"))?;
            let mut out = DMatrix::zeros(features.nrows(), r);
            for i in 0..features.nrows() {
                let t = pca::pca_transform(&model, &features.row(i).transpose())
                    .map_err(|e| e.in_stage("pca"))?;
                out.row_mut(i).copy_from(&t.transpose());
            }
            (Some(model), out)
        }
        None => (None, features),
    };

    let classifier = nn::train_nn(
        &reduced,
        &labeled.y,
        labeled.num_classes,
        &config.train_hyper(),
    )
    .map_err(|e| e.in_stage("classifier-training"))?;

    let model = SelfTaughtModel {
        dictionary,
        reducer,
        classifier,
        config: config.clone(),
    };
    model.validate()?;
    Ok(model)
}

/// Class probabilities for one raw observation.
pub fn predict_proba(model: &SelfTaughtModel, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != model.dictionary.input_dim() {
        return Err(Error::invalid(format!(
            "input has length {} but the model expects {}",
            x.len(),
            model.dictionary.input_dim()
        )));
    }
    model.dictionary.family.check_domain_all(x.as_slice())?;

    let row = DMatrix::from_fn(1, x.len(), |_, j| x[j]);
    let features = encode_features_opts(&model.dictionary, &row, &model.config.encode_config(), 1)?;
    let code = features.row(0).transpose();
    let reduced = match &model.reducer {
        Some(r) => pca::pca_transform(r, &code)?,
        None => code,
    };
    nn::forward(&model.classifier, &reduced)
}

/// Predicted label (1-based, lowest index on exact probability ties) and
/// the full probability vector.
pub fn predict(model: &SelfTaughtModel, x: &DVector<f64>) -> Result<(usize, DVector<f64>)> {
    let probs = predict_proba(model, x)?;
    let mut best = 0;
    for c in 1..probs.len() {
        if probs[c] > probs[best] {
            best = c;
        }
    }
    Ok((best + 1, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Two-class synthetic task: class codes live on disjoint atom supports
    /// of a shared random dictionary, so the sparse features separate the
    /// classes by construction.
    pub(crate) fn two_class_task(
        seed: u64,
        unlabeled_m: usize,
        labeled_m: usize,
        test_m: usize,
    ) -> (UnlabeledDataset, LabeledDataset, LabeledDataset) {
        let k = 12;
        let n_atoms = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut basis = DMatrix::from_fn(k, n_atoms, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            v
        });
        for j in 0..n_atoms {
            let norm = basis.column(j).norm();
            basis.column_mut(j).scale_mut(1.0 / norm);
        }

        let sample_row = |rng: &mut ChaCha8Rng, class: Option<usize>| -> DVector<f64> {
            let support: Vec<usize> = match class {
                Some(1) => vec![0, 1, 2],
                Some(_) => vec![3, 4, 5],
                None => (0..n_atoms).collect(),
            };
            let mut code = DVector::zeros(n_atoms);
            // two active atoms from the support
            let a = support[rng.random_range(0..support.len())];
            let mut b = support[rng.random_range(0..support.len())];
            while b == a {
                b = support[rng.random_range(0..support.len())];
            }
            for &j in &[a, b] {
                let mag = 2.0 + 2.0 * rng.random::<f64>();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                code[j] = mag * sign;
            }
            let mean = &basis * code;
            DVector::from_fn(k, |d, _| {
                let noise: f64 = rng.sample(StandardNormal);
                mean[d] + 0.3 * noise
            })
        };

        let xu = DMatrix::from_fn(unlabeled_m, k, |_, _| 0.0);
        let mut xu = xu;
        for i in 0..unlabeled_m {
            let row = sample_row(&mut rng, None);
            xu.row_mut(i).copy_from(&row.transpose());
        }

        let make_labeled = |m: usize, rng: &mut ChaCha8Rng| {
            let mut x = DMatrix::zeros(m, k);
            let mut y = Vec::with_capacity(m);
            for i in 0..m {
                let class = i % 2 + 1;
                let row = sample_row(rng, Some(class));
                x.row_mut(i).copy_from(&row.transpose());
                y.push(class);
            }
            LabeledDataset::new(x, y, 2).unwrap()
        };
        let labeled = make_labeled(labeled_m, &mut rng);
        let test = make_labeled(test_m, &mut rng);

        (
            UnlabeledDataset::new(xu, Family::Gaussian).unwrap(),
            labeled,
            test,
        )
    }

    fn quick_config() -> PipelineConfig {
        PipelineConfig {
            n_basis: 6,
            beta: 0.2,
            sweeps: 12,
            epochs: 400,
            hidden: 12,
            seed: 3,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn zero_input_encodes_to_zero() {
        let (unlabeled, _, _) = two_class_task(81, 30, 10, 2);
        let params = dict::LearnParams {
            n_basis: 4,
            beta: 0.2,
            sweeps: 3,
            ..dict::LearnParams::default()
        };
        let (dictionary, _) = dict::learn_dictionary(&unlabeled.x, &params).unwrap();
        let zero = DMatrix::zeros(1, dictionary.input_dim());
        let feats = encode_features(&dictionary, &zero, 0.2).unwrap();
        assert!(feats.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn orthonormal_dictionary_encoding_is_soft_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let raw = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let q = raw.qr().q();
        let dictionary = Dictionary::new(
            q.clone(),
            1.0,
            Family::Gaussian,
            0.2,
            dict::DictMeta {
                iterations: 0,
                final_objective: 0.0,
                seed: 0,
                sweep_objectives: vec![],
            },
        )
        .unwrap();

        let x = DMatrix::from_fn(3, 5, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let beta = 0.2;
        let feats = encode_features(&dictionary, &x, beta).unwrap();
        for i in 0..3 {
            let corr = q.transpose() * x.row(i).transpose();
            for j in 0..5 {
                let expect = corr[j].signum() * (corr[j].abs() - beta / 2.0).max(0.0);
                assert!((feats[(i, j)] - expect).abs() <= 1e-10);
            }
        }

        // x = b₁ recovers a single soft-thresholded activation
        let first = DMatrix::from_fn(1, 5, |_, j| q[(j, 0)]);
        let mut first_x = DMatrix::zeros(1, 5);
        for j in 0..5 {
            first_x[(0, j)] = q.column(0)[j];
        }
        let _ = first;
        let feats = encode_features(&dictionary, &first_x, beta).unwrap();
        assert!((feats[(0, 0)] - 0.9).abs() <= 1e-10);
        for j in 1..5 {
            assert!(feats[(0, j)].abs() <= 1e-10);
        }
    }

    #[test]
    fn encoding_is_deterministic_and_thread_invariant() {
        let (unlabeled, labeled, _) = two_class_task(83, 40, 12, 2);
        let params = dict::LearnParams {
            n_basis: 5,
            beta: 0.2,
            sweeps: 4,
            ..dict::LearnParams::default()
        };
        let (dictionary, _) = dict::learn_dictionary(&unlabeled.x, &params).unwrap();
        let cfg = EncodeConfig::new(0.2);
        let serial = encode_features_opts(&dictionary, &labeled.x, &cfg, 1).unwrap();
        let serial2 = encode_features_opts(&dictionary, &labeled.x, &cfg, 1).unwrap();
        let threaded = encode_features_opts(&dictionary, &labeled.x, &cfg, 4).unwrap();
        assert_eq!(serial, serial2);
        assert_eq!(serial, threaded);
    }

    #[test]
    fn training_fits_the_separable_task() {
        let (unlabeled, labeled, _) = two_class_task(84, 60, 40, 2);
        let model = self_taught_train(&unlabeled, &labeled, &quick_config()).unwrap();
        let mut correct = 0;
        for i in 0..labeled.x.nrows() {
            let (label, probs) = predict(&model, &labeled.x.row(i).transpose()).unwrap();
            assert!((probs.sum() - 1.0).abs() <= 1e-9);
            assert!(label >= 1 && label <= 2);
            if label == labeled.y[i] {
                correct += 1;
            }
        }
        assert!(
            correct as f64 / labeled.x.nrows() as f64 >= 0.95,
            "training accuracy {correct}/{}",
            labeled.x.nrows()
        );
    }

    #[test]
    fn classifier_input_dimension_follows_the_reducer_switch() {
        let (unlabeled, labeled, _) = two_class_task(85, 40, 16, 2);
        let mut config = quick_config();
        config.sweeps = 3;
        config.epochs = 10;
        let model = self_taught_train(&unlabeled, &labeled, &config).unwrap();
        assert_eq!(model.classifier.dims()[0], config.n_basis);
        assert!(model.reducer.is_none());

        config.pca = Some(3);
        let model = self_taught_train(&unlabeled, &labeled, &config).unwrap();
        assert_eq!(model.classifier.dims()[0], 3);
        assert_eq!(model.reducer.as_ref().unwrap().retained, 3);
    }

    #[test]
    fn predict_equals_the_manual_stage_chain() {
        let (unlabeled, labeled, test) = two_class_task(86, 40, 16, 4);
        let mut config = quick_config();
        config.sweeps = 3;
        config.epochs = 15;
        config.pca = Some(4);
        let model = self_taught_train(&unlabeled, &labeled, &config).unwrap();

        for i in 0..test.x.nrows() {
            let x = test.x.row(i).transpose();
            let (_, probs) = predict(&model, &x).unwrap();

            let row = DMatrix::from_fn(1, x.len(), |_, j| x[j]);
            let feats =
                encode_features_opts(&model.dictionary, &row, &model.config.encode_config(), 1)
                    .unwrap();
            let reduced = pca::pca_transform(model.reducer.as_ref().unwrap(), &feats.row(0).transpose())
                .unwrap();
            let manual = nn::forward(&model.classifier, &reduced).unwrap();
            assert_eq!(probs, manual);
        }
    }

    #[test]
    fn identical_inputs_give_identical_predictions() {
        let (unlabeled, labeled, test) = two_class_task(87, 30, 12, 2);
        let mut config = quick_config();
        config.sweeps = 2;
        config.epochs = 5;
        let model = self_taught_train(&unlabeled, &labeled, &config).unwrap();
        let x = test.x.row(0).transpose();
        let a = predict(&model, &x).unwrap();
        let b = predict(&model, &x).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn missing_class_is_an_input_error() {
        let (unlabeled, labeled, _) = two_class_task(88, 20, 10, 2);
        let y = vec![1usize; labeled.x.nrows()];
        let broken = LabeledDataset {
            x: labeled.x.clone(),
            y,
            num_classes: 2,
        };
        let err = self_taught_train(&unlabeled, &broken, &quick_config()).unwrap_err();
        assert!(err.to_string().contains("class 2"));
    }

    #[test]
    fn stage_names_are_attached_to_failures() {
        let (unlabeled, labeled, _) = two_class_task(89, 20, 10, 2);
        let mut config = quick_config();
        config.pca = Some(100); // more components than features
        let err = self_taught_train(&unlabeled, &labeled, &config).unwrap_err();
        assert!(err.to_string().contains("pca"), "got: {err}");
    }

    #[test]
    fn degenerate_all_zero_dictionary_is_consistent() {
        // an all-zero basis is feasible; it must encode everything to zero
        // features and so predict one fixed label for any input, no crash
        let dictionary = Dictionary::new(
            DMatrix::zeros(4, 3),
            1.0,
            Family::Gaussian,
            0.2,
            dict::DictMeta {
                iterations: 0,
                final_objective: 0.0,
                seed: 0,
                sweep_objectives: vec![],
            },
        )
        .unwrap();
        let features = DMatrix::zeros(6, 3);
        let classifier =
            nn::train_nn(&features, &[1, 2, 1, 2, 1, 2], 2, &TrainHyper {
                epochs: 5,
                hidden: 4,
                ..TrainHyper::default()
            })
            .unwrap();
        let model = SelfTaughtModel {
            dictionary,
            reducer: None,
            classifier,
            config: PipelineConfig {
                n_basis: 3,
                ..PipelineConfig::default()
            },
        };
        model.validate().unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let mut labels = std::collections::BTreeSet::new();
        for _ in 0..5 {
            let x = DVector::from_fn(4, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let row = DMatrix::from_fn(1, 4, |_, j| x[j]);
            let feats = encode_features(&model.dictionary, &row, 0.2).unwrap();
            assert!(feats.iter().all(|&v| v == 0.0));
            let (label, _) = predict(&model, &x).unwrap();
            labels.insert(label);
        }
        assert_eq!(labels.len(), 1);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let (unlabeled, labeled, _) = two_class_task(91, 20, 10, 2);
        let mut config = quick_config();
        config.sweeps = 2;
        config.epochs = 5;
        let model = self_taught_train(&unlabeled, &labeled, &config).unwrap();
        let err = predict(&model, &DVector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn labeled_dataset_validation() {
        let x = DMatrix::zeros(3, 2);
        assert!(LabeledDataset::new(x.clone(), vec![1, 2, 3], 2).is_err()); // label 3 > C
        assert!(LabeledDataset::new(x.clone(), vec![1, 0, 1], 2).is_err()); // label 0
        assert!(LabeledDataset::new(x.clone(), vec![1, 2], 2).is_err()); // count mismatch
        assert!(LabeledDataset::new(x, vec![1, 1, 1], 1).is_err()); // C < 2
    }
}

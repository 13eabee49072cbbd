//! Plain-text persistence for dictionaries and trained models.
//!
//! The format is line-oriented and self-describing: a version line, `key
//! value` pairs, and `matrix`/`vector` records with explicit dimensions and
//! row-major values. Floats are written as the shortest decimal that parses
//! back to the identical bits, so a save/load round trip is exact. Writes go
//! through a temp file and rename.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dict::{DictMeta, Dictionary};
use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::nn::NeuralNet;
use crate::pca::PcaModel;
use crate::pipeline::{PipelineConfig, SelfTaughtModel};

const MODEL_HEADER: &str = "stlcode-model v1";
const DICT_HEADER: &str = "stlcode-dict v1";

/// Write `contents` to `path` atomically (temp file + rename).
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Either artifact kind, for commands that accept both.
#[derive(Debug, Clone)]
pub enum Artifact {
    Model(Box<SelfTaughtModel>),
    Dictionary(Dictionary),
}

impl Artifact {
    pub fn dictionary(&self) -> &Dictionary {
        match self {
            Artifact::Model(m) => &m.dictionary,
            Artifact::Dictionary(d) => d,
        }
    }
}

struct Writer {
    out: String,
}

impl Writer {
    fn new(header: &str) -> Self {
        Writer {
            out: format!("{header}\n"),
        }
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        self.out.push_str(&format!("{key} {value}\n"));
    }

    fn vector(&mut self, key: &str, v: &[f64]) {
        self.out.push_str(&format!("vector {key} {}\n", v.len()));
        let mut line = String::new();
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{x}"));
        }
        self.out.push_str(&line);
        self.out.push('\n');
    }

    fn matrix(&mut self, key: &str, m: &DMatrix<f64>) {
        self.out
            .push_str(&format!("matrix {key} {} {}\n", m.nrows(), m.ncols()));
        for i in 0..m.nrows() {
            let mut line = String::new();
            for j in 0..m.ncols() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{}", m[(i, j)]));
            }
            self.out.push_str(&line);
            self.out.push('\n');
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("end\n");
        self.out
    }
}

struct Reader<'a> {
    lines: std::str::Lines<'a>,
    peeked: Option<&'a str>,
    lineno: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            lines: text.lines(),
            peeked: None,
            lineno: 0,
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        self.lineno += 1;
        if let Some(line) = self.peeked.take() {
            return Ok(line);
        }
        self.lines.next().ok_or_else(|| {
            Error::ModelFormat(format!("unexpected end of file at line {}", self.lineno))
        })
    }

    fn peek_line(&mut self) -> Option<&'a str> {
        if self.peeked.is_none() {
            self.peeked = self.lines.next();
        }
        self.peeked
    }

    fn fail(&self, msg: impl std::fmt::Display) -> Error {
        Error::ModelFormat(format!("line {}: {msg}", self.lineno))
    }

    fn expect_kv(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| self.fail(format!("expected '{key} <value>', got '{line}'")))?;
        if k != key {
            return Err(self.fail(format!("expected key '{key}', got '{k}'")));
        }
        Ok(v.trim().to_string())
    }

    fn kv_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.expect_kv(key)?;
        v.parse::<T>()
            .map_err(|_| self.fail(format!("bad value '{v}' for {key}")))
    }

    fn kv_opt_usize(&mut self, key: &str) -> Result<Option<usize>> {
        let v = self.expect_kv(key)?;
        if v == "none" {
            return Ok(None);
        }
        v.parse::<usize>()
            .map(Some)
            .map_err(|_| self.fail(format!("bad value '{v}' for {key}")))
    }

    fn kv_opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        let v = self.expect_kv(key)?;
        if v == "none" {
            return Ok(None);
        }
        v.parse::<f64>()
            .map(Some)
            .map_err(|_| self.fail(format!("bad value '{v}' for {key}")))
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let mut out = Vec::with_capacity(expected);
        if expected == 0 {
            if !line.trim().is_empty() {
                return Err(self.fail("expected an empty value line"));
            }
            return Ok(out);
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| self.fail(format!("bad float '{tok}'")))?;
            if !v.is_finite() {
                return Err(self.fail(format!("non-finite value '{tok}'")));
            }
            out.push(v);
        }
        if out.len() != expected {
            return Err(self.fail(format!("expected {expected} values, got {}", out.len())));
        }
        Ok(out)
    }

    fn vector(&mut self, key: &str) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "vector" || parts[1] != key {
            return Err(self.fail(format!("expected 'vector {key} <len>', got '{line}'")));
        }
        let len: usize = parts[2]
            .parse()
            .map_err(|_| self.fail("bad vector length"))?;
        self.floats(len)
    }

    fn matrix(&mut self, key: &str) -> Result<DMatrix<f64>> {
        let line = self.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "matrix" || parts[1] != key {
            return Err(self.fail(format!("expected 'matrix {key} <rows> <cols>', got '{line}'")));
        }
        let rows: usize = parts[2].parse().map_err(|_| self.fail("bad row count"))?;
        let cols: usize = parts[3]
            .parse()
            .map_err(|_| self.fail("bad column count"))?;
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            let row = self.floats(cols)?;
            for (j, v) in row.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    fn expect_end(&mut self) -> Result<()> {
        let line = self.next_line()?;
        if line.trim() != "end" {
            return Err(self.fail(format!("expected 'end', got '{line}'")));
        }
        Ok(())
    }
}

fn write_run_config(w: &mut Writer, run_config: &[(String, String)]) {
    for (k, v) in run_config {
        w.kv("runconfig", format_args!("{k} {v}"));
    }
}

/// `runconfig` lines are free-form metadata; read past them.
fn skip_run_config(reader: &mut Reader<'_>) {
    while let Some(line) = reader.peek_line() {
        if line.starts_with("runconfig ") {
            let _ = reader.next_line();
        } else {
            break;
        }
    }
}

fn write_dictionary_body(w: &mut Writer, dict: &Dictionary) {
    w.kv("family", dict.family);
    w.kv("dict.norm_bound", dict.norm_bound);
    w.kv("dict.beta", dict.beta);
    w.kv("dict.meta_iterations", dict.meta.iterations);
    w.kv("dict.meta_final_objective", dict.meta.final_objective);
    w.kv("dict.meta_seed", dict.meta.seed);
    w.vector("dict.sweep_objectives", &dict.meta.sweep_objectives);
    w.matrix("dict.basis", dict.basis());
}

fn read_dictionary_body(reader: &mut Reader<'_>, family_value: String) -> Result<Dictionary> {
    let family: Family = family_value
        .parse()
        .map_err(|e: Error| Error::ModelFormat(e.to_string()))?;
    let norm_bound: f64 = reader.kv_parse("dict.norm_bound")?;
    let beta: f64 = reader.kv_parse("dict.beta")?;
    let iterations: usize = reader.kv_parse("dict.meta_iterations")?;
    let final_objective: f64 = reader.kv_parse("dict.meta_final_objective")?;
    let seed: u64 = reader.kv_parse("dict.meta_seed")?;
    let sweep_objectives = reader.vector("dict.sweep_objectives")?;
    let basis = reader.matrix("dict.basis")?;
    Dictionary::new(
        basis,
        norm_bound,
        family,
        beta,
        DictMeta {
            iterations,
            final_objective,
            seed,
            sweep_objectives,
        },
    )
    .map_err(|e| Error::ModelFormat(e.to_string()))
}

/// Serialize a dictionary artifact (the `train-dict` output).
pub fn dictionary_to_string(dict: &Dictionary, run_config: &[(String, String)]) -> String {
    let mut w = Writer::new(DICT_HEADER);
    write_run_config(&mut w, run_config);
    write_dictionary_body(&mut w, dict);
    w.finish()
}

pub fn dictionary_from_str(text: &str) -> Result<Dictionary> {
    let mut reader = Reader::new(text);
    let header = reader.next_line()?;
    if header != DICT_HEADER {
        return Err(Error::ModelFormat(format!(
            "unsupported version line '{header}' (expected '{DICT_HEADER}')"
        )));
    }
    skip_run_config(&mut reader);
    let family_value = reader.expect_kv("family")?;
    let dict = read_dictionary_body(&mut reader, family_value)?;
    reader.expect_end()?;
    Ok(dict)
}

/// Serialize a full trained model.
pub fn model_to_string(model: &SelfTaughtModel, run_config: &[(String, String)]) -> String {
    let mut w = Writer::new(MODEL_HEADER);
    write_run_config(&mut w, run_config);

    let c = &model.config;
    w.kv("config.family", c.family);
    w.kv("config.seed", c.seed);
    w.kv("config.n_basis", c.n_basis);
    w.kv("config.beta", c.beta);
    match c.encode_beta {
        Some(v) => w.kv("config.encode_beta", v),
        None => w.kv("config.encode_beta", "none"),
    }
    w.kv("config.epsilon", c.epsilon);
    w.kv("config.norm_bound", c.norm_bound);
    w.kv("config.sweeps", c.sweeps);
    w.kv("config.dict_tol", c.dict_tol);
    match c.pca {
        Some(r) => w.kv("config.pca", r),
        None => w.kv("config.pca", "none"),
    }
    w.kv("config.hidden", c.hidden);
    w.kv("config.learning_rate", c.learning_rate);
    w.kv("config.epochs", c.epochs);
    w.kv("config.batch_size", c.batch_size);
    w.kv("config.init_scale", c.init_scale);
    w.kv("config.l2_decay", c.l2_decay);

    write_dictionary_body(&mut w, &model.dictionary);

    match &model.reducer {
        Some(r) => {
            w.kv("pca.retained", r.retained);
            w.vector("pca.mean", r.mean.as_slice());
            w.matrix("pca.components", &r.components);
            w.vector("pca.explained_variance", &r.explained_variance);
        }
        None => w.kv("pca.retained", "none"),
    }

    let net = &model.classifier;
    let dims = net.dims();
    w.kv(
        "nn.dims",
        format_args!("{} {} {}", dims[0], dims[1], dims[2]),
    );
    w.matrix("nn.w1", &net.w1);
    w.vector("nn.b1", net.b1.as_slice());
    w.matrix("nn.w2", &net.w2);
    w.vector("nn.b2", net.b2.as_slice());

    w.finish()
}

pub fn model_from_str(text: &str) -> Result<SelfTaughtModel> {
    let mut reader = Reader::new(text);
    let header = reader.next_line()?;
    if header != MODEL_HEADER {
        return Err(Error::ModelFormat(format!(
            "unsupported version line '{header}' (expected '{MODEL_HEADER}')"
        )));
    }

    skip_run_config(&mut reader);
    let family_value = reader.expect_kv("config.family")?;
    let family: Family = family_value
        .parse()
        .map_err(|e: Error| Error::ModelFormat(e.to_string()))?;
    let config = PipelineConfig {
        family,
        seed: reader.kv_parse("config.seed")?,
        n_basis: reader.kv_parse("config.n_basis")?,
        beta: reader.kv_parse("config.beta")?,
        encode_beta: reader.kv_opt_f64("config.encode_beta")?,
        epsilon: reader.kv_parse("config.epsilon")?,
        norm_bound: reader.kv_parse("config.norm_bound")?,
        sweeps: reader.kv_parse("config.sweeps")?,
        dict_tol: reader.kv_parse("config.dict_tol")?,
        pca: reader.kv_opt_usize("config.pca")?,
        hidden: reader.kv_parse("config.hidden")?,
        learning_rate: reader.kv_parse("config.learning_rate")?,
        epochs: reader.kv_parse("config.epochs")?,
        batch_size: reader.kv_parse("config.batch_size")?,
        init_scale: reader.kv_parse("config.init_scale")?,
        l2_decay: reader.kv_parse("config.l2_decay")?,
    };

    let dict_family = reader.expect_kv("family")?;
    let dictionary = read_dictionary_body(&mut reader, dict_family)?;

    let reducer = match reader.kv_opt_usize("pca.retained")? {
        None => None,
        Some(retained) => {
            let mean = reader.vector("pca.mean")?;
            let components = reader.matrix("pca.components")?;
            let explained_variance = reader.vector("pca.explained_variance")?;
            if components.nrows() != retained
                || components.ncols() != mean.len()
                || explained_variance.len() != retained
            {
                return Err(Error::ModelFormat("pca block dimensions disagree".into()));
            }
            let gram = &components * components.transpose();
            for i in 0..retained {
                for j in 0..retained {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    if (gram[(i, j)] - expected).abs() > 1e-8 {
                        return Err(Error::ModelFormat(
                            "pca components are not orthonormal".into(),
                        ));
                    }
                }
            }
            Some(PcaModel {
                mean: DVector::from_vec(mean),
                components,
                retained,
                explained_variance,
            })
        }
    };

    let dims_line = reader.expect_kv("nn.dims")?;
    let dims: Vec<usize> = dims_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::ModelFormat(format!("bad nn.dims '{dims_line}'")))?;
    if dims.len() != 3 {
        return Err(Error::ModelFormat("nn.dims must have three entries".into()));
    }
    let w1 = reader.matrix("nn.w1")?;
    let b1 = reader.vector("nn.b1")?;
    let w2 = reader.matrix("nn.w2")?;
    let b2 = reader.vector("nn.b2")?;
    let classifier = NeuralNet {
        w1,
        b1: DVector::from_vec(b1),
        w2,
        b2: DVector::from_vec(b2),
    };
    if classifier.dims() != [dims[0], dims[1], dims[2]] {
        return Err(Error::ModelFormat(
            "network parameter shapes do not match nn.dims".into(),
        ));
    }

    reader.expect_end()?;

    let model = SelfTaughtModel {
        dictionary,
        reducer,
        classifier,
        config,
    };
    model
        .validate()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(model)
}

pub fn save_model(
    model: &SelfTaughtModel,
    path: &Path,
    run_config: &[(String, String)],
) -> Result<()> {
    model.validate()?;
    atomic_write(path, &model_to_string(model, run_config))
}

pub fn load_model(path: &Path) -> Result<SelfTaughtModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text)
}

pub fn save_dictionary(
    dict: &Dictionary,
    path: &Path,
    run_config: &[(String, String)],
) -> Result<()> {
    atomic_write(path, &dictionary_to_string(dict, run_config))
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    let text = std::fs::read_to_string(path)?;
    dictionary_from_str(&text)
}

/// Load whichever artifact the file holds, keyed on the version line.
pub fn load_artifact(path: &Path) -> Result<Artifact> {
    let text = std::fs::read_to_string(path)?;
    match text.lines().next() {
        Some(MODEL_HEADER) => model_from_str(&text).map(|m| Artifact::Model(Box::new(m))),
        Some(DICT_HEADER) => dictionary_from_str(&text).map(Artifact::Dictionary),
        Some(other) => Err(Error::ModelFormat(format!(
            "unsupported version line '{other}'"
        ))),
        None => Err(Error::ModelFormat("empty file".into())),
    }
}

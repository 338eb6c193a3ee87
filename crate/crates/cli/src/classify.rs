use std::fmt::Write as _;
use std::fs;
use std::str::FromStr;

use nalgebra::DVector;
use swag_core::data::load_dataset;
use swag_core::estimators::{bayes_stein_estimate, kron_mle, partial_pool_blend, pooled_mle, sample_mle};
use swag_core::eval::{qda_classify, ClassModel, ConfusionMatrix};
use swag_core::io::fmt_f64;
use swag_core::{run_chain, GroupedDataset, Result, SpdMatrix, SwagConfig, SwagError};

use crate::args::ClassifyArgs;
use crate::fit::write_text;
use crate::load_config;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifyMethod {
    Swag,
    Mle,
    Pooled,
    Kron,
    Blend,
}

impl ClassifyMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifyMethod::Swag => "swag",
            ClassifyMethod::Mle => "mle",
            ClassifyMethod::Pooled => "pooled",
            ClassifyMethod::Kron => "kron",
            ClassifyMethod::Blend => "blend",
        }
    }

    /// Covariance estimates on the preprocessed scale.
    pub fn estimate(&self, data: &GroupedDataset, config: &SwagConfig) -> Result<Vec<SpdMatrix>> {
        let result = match self {
            ClassifyMethod::Swag => bayes_stein_estimate(&run_chain(data, config)?)?,
            ClassifyMethod::Mle => sample_mle(data)?,
            ClassifyMethod::Pooled => pooled_mle(data)?,
            ClassifyMethod::Kron => kron_mle(data)?,
            ClassifyMethod::Blend => partial_pool_blend(data, None, None)?,
        };
        Ok(result.estimates)
    }
}

impl FromStr for ClassifyMethod {
    type Err = SwagError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "swag" => ClassifyMethod::Swag,
            "mle" => ClassifyMethod::Mle,
            "pooled" => ClassifyMethod::Pooled,
            "kron" => ClassifyMethod::Kron,
            "blend" => ClassifyMethod::Blend,
            other => return Err(SwagError::InvalidConfig(format!("unknown method '{other}'"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyOutcome {
    pub method: ClassifyMethod,
    pub confusion: ConfusionMatrix,
    pub rates: Vec<f64>,
}

/// Test rows grouped by the training class they belong to.
fn split_test(train: &GroupedDataset, test: &GroupedDataset) -> Result<Vec<Vec<DVector<f64>>>> {
    if train.shape() != test.shape() {
        return Err(SwagError::DimensionMismatch("train and test shapes differ".into()));
    }
    let labels = train.labels();
    let mut sets = vec![Vec::new(); labels.len()];
    for g in test.groups() {
        let idx = labels.iter().position(|l| *l == g.label).ok_or_else(|| {
            SwagError::InvalidData(format!("test class '{}' does not appear in the training data", g.label))
        })?;
        sets[idx].extend(g.data.row_iter().map(|r| r.transpose()));
    }
    Ok(sets)
}

fn confusion_csv(labels: &[&str], cm: &ConfusionMatrix) -> String {
    let mut s = String::from("# rows are true classes, columns are predictions\n");
    let _ = writeln!(s, "class,{}", labels.join(","));
    for (i, row) in cm.counts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "{},{}", labels[i], cells.join(","));
    }
    s
}

/// Fits each requested covariance method on the training data, classifies
/// the test data by quadratic discriminant scores with training-sample
/// means, and writes `confusion_<method>.csv` and `rates.csv`.
pub fn cmd_classify(args: &ClassifyArgs) -> Result<Vec<ClassifyOutcome>> {
    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    if train.num_groups() < 2 {
        return Err(SwagError::InvalidData("classification needs at least two classes".into()));
    }
    let test_sets = split_test(&train, &test)?;
    let methods = args
        .methods
        .iter()
        .filter(|m| !m.trim().is_empty())
        .map(|m| m.parse())
        .collect::<Result<Vec<ClassifyMethod>>>()?;
    if methods.is_empty() {
        return Err(SwagError::InvalidConfig("no classification methods requested".into()));
    }
    let config = load_config(&args.common, &args.schedule, train.shape())?;
    let (pre, record) = train.preprocess(!args.no_standardize)?;
    let out = args.common.out_dir();
    fs::create_dir_all(&out)?;
    let labels = train.labels();

    let mut outcomes = Vec::new();
    let mut written = Vec::new();
    let mut rates_csv = format!("method,{},average\n", labels.join(","));
    for method in methods {
        let models = method
            .estimate(&pre, &config)?
            .iter()
            .enumerate()
            .map(|(j, s)| {
                Ok(ClassModel {
                    mean: record.means[j].clone(),
                    cov: record.rescale(j, s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (confusion, rates) = qda_classify(&test_sets, &models)?;
        let present: Vec<f64> = rates.iter().copied().filter(|r| !r.is_nan()).collect();
        let average = present.iter().sum::<f64>() / present.len().max(1) as f64;
        let cells: Vec<String> = rates.iter().map(|r| fmt_f64(*r)).collect();
        let _ = writeln!(rates_csv, "{},{},{}", method.name(), cells.join(","), fmt_f64(average));
        written.push(write_text(&out, &format!("confusion_{}.csv", method.name()), &confusion_csv(&labels, &confusion))?);
        outcomes.push(ClassifyOutcome {
            method,
            confusion,
            rates,
        });
    }
    written.push(write_text(&out, "rates.csv", &rates_csv)?);

    let mut manifest = RunManifest::new("classify", config.seed, config.to_kv_text());
    manifest.add_input(&args.train)?;
    manifest.add_input(&args.test)?;
    for p in &written {
        manifest.add_output(&out, p)?;
    }
    manifest.write(&out)?;
    Ok(outcomes)
}

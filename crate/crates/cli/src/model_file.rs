//! Text serialization of a built model. Only the configuration, the oracle
//! description and the samples in insertion order are stored; the
//! triangulation and the local surrogates are rebuilt on load.
//!
//! ```text
//! SSCMODEL1
//! dim <d>
//! config p=<p> mode=<m> lec=<l> estimator=<e> mref=<k|fn> budget=<b> tol=<t> seed=<s> nmc-local=<k>
//! oracle <smooth-sine|fake-kink|clipped-sine> [threshold=<t>]
//! oracle gas qoi=<node>
//! network-lines <K>          (gas only, followed by K raw network lines)
//! oracle none                (samples of an unknown function)
//! samples <N>
//! <x_1> ... <x_d> <value> <label> <hierarchical error>   (N rows)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ssc_core::adaptive::{BuildConfig, SurrogateModel};
use ssc_core::estimators::EstimatorPolicy;
use ssc_core::samples::{RegionLabel, SampleSet};
use ssc_core::surrogate::{LecMode, Mode};
use ssc_core::testbed::functions::TestFunction;
use ssc_core::testbed::TestOracle;

use crate::settings::{estimator_name, format_mref, lec_name, mode_name, parse_mref, OracleSpec};
use crate::CliError;

pub const MAGIC: &str = "SSCMODEL1";

/// Contents of a model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub config: BuildConfig,
    pub oracle: Option<OracleSpec>,
    pub samples: SampleSet,
    pub hierarchical: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(model: &SurrogateModel, oracle: Option<OracleSpec>) -> Self {
        Self {
            config: model.config().clone(),
            oracle,
            samples: model.samples().clone(),
            hierarchical: model.hierarchical_errors().to_vec(),
        }
    }

    pub fn rebuild(&self) -> Result<SurrogateModel, CliError> {
        SurrogateModel::from_samples(self.config.clone(), self.samples.clone(), self.hierarchical.clone())
            .map_err(|e| CliError::Usage(format!("cannot rebuild model: {e}")))
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let d = self.samples.dim();
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "dim {d}").unwrap();
        writeln!(
            s,
            "config p={} mode={} lec={} estimator={} mref={} budget={} tol={} seed={} nmc-local={}",
            c.p_max,
            mode_name(c.mode),
            lec_name(c.lec),
            estimator_name(c.estimator),
            format_mref(c.m_ref),
            c.budget,
            c.tolerance,
            c.seed,
            c.n_mc_local
        )
        .unwrap();
        match &self.oracle {
            None => writeln!(s, "oracle none").unwrap(),
            Some(OracleSpec::Test(o)) => match o.kind {
                TestFunction::SmoothSine => writeln!(s, "oracle smooth-sine").unwrap(),
                TestFunction::SmoothSineFakeKink { threshold } => {
                    writeln!(s, "oracle fake-kink threshold={threshold}").unwrap()
                }
                TestFunction::ClippedSine { threshold } => {
                    writeln!(s, "oracle clipped-sine threshold={threshold}").unwrap()
                }
            },
            Some(OracleSpec::Gas { text, qoi, .. }) => {
                writeln!(s, "oracle gas qoi={qoi}").unwrap();
                let lines: Vec<&str> = text.lines().collect();
                writeln!(s, "network-lines {}", lines.len()).unwrap();
                for l in lines {
                    writeln!(s, "{l}").unwrap();
                }
            }
        }
        writeln!(s, "samples {}", self.samples.len()).unwrap();
        for i in 0..self.samples.len() {
            for x in self.samples.point(i) {
                write!(s, "{x:.16e} ").unwrap();
            }
            writeln!(
                s,
                "{:.16e} {} {:.16e}",
                self.samples.value(i),
                self.samples.label(i),
                self.hierarchical[i]
            )
            .unwrap();
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_text())
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|msg| CliError::Usage(format!("{}: {msg}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| lines.next().ok_or_else(|| format!("unexpected end of file, expected {what}"));

        let (_, magic) = next("header")?;
        if magic != MAGIC {
            return Err(format!("not a model file (header {magic:?}, expected {MAGIC})"));
        }
        let (ln, dim_line) = next("dim")?;
        let d: usize = keyword_value(dim_line, "dim").ok_or_else(|| format!("line {ln}: expected `dim <d>`"))?;

        let (ln, config_line) = next("config")?;
        let config = parse_config(config_line).map_err(|e| format!("line {ln}: {e}"))?;

        let (ln, oracle_line) = next("oracle")?;
        let mut words = oracle_line.split_whitespace();
        if words.next() != Some("oracle") {
            return Err(format!("line {ln}: expected `oracle ...`"));
        }
        let kind = words.next().ok_or_else(|| format!("line {ln}: missing oracle kind"))?;
        let params: Vec<(&str, &str)> = words
            .map(|w| w.split_once('=').ok_or_else(|| format!("line {ln}: expected key=value, got {w:?}")))
            .collect::<Result<_, _>>()?;
        let param = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let allow_only = |keys: &[&str]| -> Result<(), String> {
            match params.iter().find(|(k, _)| !keys.contains(k)) {
                Some((k, _)) => Err(format!("line {ln}: unknown oracle parameter {k:?}")),
                None => Ok(()),
            }
        };
        let threshold = || -> Result<f64, String> {
            let t: f64 = param("threshold")
                .ok_or_else(|| format!("line {ln}: missing threshold"))?
                .parse()
                .map_err(|_| format!("line {ln}: invalid threshold"))?;
            if t > 0.0 && t < 1.0 {
                Ok(t)
            } else {
                Err(format!("line {ln}: threshold must lie in (0,1)"))
            }
        };
        let oracle = match kind {
            "none" => {
                allow_only(&[])?;
                None
            }
            "smooth-sine" => {
                allow_only(&[])?;
                Some(OracleSpec::Test(TestOracle::smooth(d)))
            }
            "fake-kink" => {
                allow_only(&["threshold"])?;
                Some(OracleSpec::Test(TestOracle::fake_kink(d, threshold()?)))
            }
            "clipped-sine" => {
                allow_only(&["threshold"])?;
                Some(OracleSpec::Test(TestOracle::clipped(d, threshold()?)))
            }
            "gas" => {
                allow_only(&["qoi"])?;
                let qoi = param("qoi").ok_or_else(|| format!("line {ln}: missing qoi"))?.to_string();
                let (ln, count_line) = next("network-lines")?;
                let k: usize = keyword_value(count_line, "network-lines")
                    .ok_or_else(|| format!("line {ln}: expected `network-lines <K>`"))?;
                let mut net = String::new();
                for _ in 0..k {
                    let (_, l) = next("network line")?;
                    net.push_str(l);
                    net.push('\n');
                }
                let spec = OracleSpec::gas(net, Some(&qoi)).map_err(|e| format!("embedded network: {e}"))?;
                if spec.dimension() != d {
                    return Err(format!("embedded network has dimension {}, model has {d}", spec.dimension()));
                }
                Some(spec)
            }
            other => return Err(format!("line {ln}: unknown oracle {other:?}")),
        };

        let (ln, count_line) = next("samples")?;
        let n: usize = keyword_value(count_line, "samples").ok_or_else(|| format!("line {ln}: expected `samples <N>`"))?;
        let mut samples = SampleSet::new(d);
        let mut hierarchical = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, row) = next("sample row")?;
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != d + 3 {
                return Err(format!("line {ln}: expected {} fields, got {}", d + 3, fields.len()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| format!("line {ln}: invalid number {s:?}"));
            let x: Vec<f64> = fields[..d].iter().map(|s| num(s)).collect::<Result<_, _>>()?;
            if x.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(format!("line {ln}: sample outside the unit cube"));
            }
            let value = num(fields[d])?;
            let label: u64 = fields[d + 1]
                .parse()
                .map_err(|_| format!("line {ln}: invalid label {:?}", fields[d + 1]))?;
            hierarchical.push(num(fields[d + 2])?);
            samples.push(&x, value, RegionLabel(label));
        }
        if let Some((ln, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(format!("line {ln}: unexpected content {extra:?}"));
        }
        Ok(Self {
            config,
            oracle,
            samples,
            hierarchical,
        })
    }
}

fn keyword_value<T: std::str::FromStr>(line: &str, keyword: &str) -> Option<T> {
    let mut w = line.split_whitespace();
    if w.next() != Some(keyword) {
        return None;
    }
    let v = w.next()?.parse().ok()?;
    w.next().is_none().then_some(v)
}

fn parse_config(line: &str) -> Result<BuildConfig, String> {
    let mut words = line.split_whitespace();
    if words.next() != Some("config") {
        return Err("expected `config ...`".into());
    }
    let mut c = BuildConfig::default();
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| format!("expected key=value, got {w:?}"))?;
        let bad = || format!("invalid value {v:?} for {k}");
        match k {
            "p" => c.p_max = v.parse().map_err(|_| bad())?,
            "mode" => {
                c.mode = match v {
                    "original" => Mode::Original,
                    "improved" => Mode::Improved,
                    _ => return Err(bad()),
                }
            }
            "lec" => {
                c.lec = match v {
                    "off" => LecMode::Off,
                    "strict" => LecMode::Strict,
                    "delta" => LecMode::Delta,
                    _ => return Err(bad()),
                }
            }
            "estimator" => {
                c.estimator = match v {
                    "last-point" => EstimatorPolicy::LastPoint,
                    "mc-l1" => EstimatorPolicy::MonteCarloL1,
                    "vol-order" => EstimatorPolicy::VolumeOrder,
                    _ => return Err(bad()),
                }
            }
            "mref" => c.m_ref = parse_mref(v).map_err(|_| bad())?,
            "budget" => c.budget = v.parse().map_err(|_| bad())?,
            "tol" => c.tolerance = v.parse().map_err(|_| bad())?,
            "seed" => c.seed = v.parse().map_err(|_| bad())?,
            "nmc-local" => c.n_mc_local = v.parse().map_err(|_| bad())?,
            _ => return Err(format!("unknown config key {k:?}")),
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ssc_core::adaptive::{build, BatchSize};
    use ssc_core::testbed::gas::BUNDLED_NETWORK;

    fn roundtrip(oracle: OracleSpec, config: BuildConfig) {
        let model = build(&oracle.oracle(), config).unwrap();
        let file = ModelFile::from_model(&model, Some(oracle.clone()));
        let text = file.to_text();
        let back = ModelFile::parse(&text).unwrap();
        assert_eq!(back.config, *model.config());
        assert_eq!(back.oracle, Some(oracle));
        assert_eq!(back.samples.values(), model.samples().values());
        assert_eq!(back.samples.labels(), model.samples().labels());
        assert_eq!(back.hierarchical, model.hierarchical_errors());
        assert_eq!(back.to_text(), text);
        let rebuilt = back.rebuild().unwrap();
        for x in ssc_core::experiment::uniform_points(model.dim(), 500, 3).chunks(model.dim()) {
            assert_eq!(rebuilt.evaluate(x).unwrap(), model.evaluate(x).unwrap());
        }
    }

    #[test]
    fn test_oracle_models_roundtrip_bit_exactly() {
        let config = BuildConfig {
            p_max: 3,
            budget: 80,
            seed: 5,
            m_ref: BatchSize::Fraction(0.3),
            ..BuildConfig::default()
        };
        roundtrip(OracleSpec::Test(TestOracle::clipped(2, 0.7)), config);
    }

    #[test]
    fn gas_models_embed_their_network() {
        let config = BuildConfig {
            budget: 30,
            ..BuildConfig::default()
        };
        roundtrip(OracleSpec::gas(BUNDLED_NETWORK.to_string(), Some("D1")).unwrap(), config);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let good = "SSCMODEL1\ndim 1\nconfig p=1 mode=improved\noracle none\nsamples 3\n0 1 0 0\n1 1 0 0\n0.5 1 0 0\n";
        let f = ModelFile::parse(good).unwrap();
        assert!(f.oracle.is_none());
        assert!(f.rebuild().is_ok());
        for bad in [
            good.replace("SSCMODEL1", "SSCMODEL2"),
            good.replace("p=1", "q=1"),
            good.replace("oracle none", "oracle none threshold=0.5"),
            good.replace("oracle none", "oracle clipped-sine threshold=2"),
            good.replace("samples 3", "samples 4"),
            good.replace("0.5 1 0 0", "1.5 1 0 0"),
            good.replace("0.5 1 0 0", "0.5 1 x 0"),
            format!("{good}extra\n"),
        ] {
            assert!(ModelFile::parse(&bad).is_err(), "{bad}");
        }
    }
}

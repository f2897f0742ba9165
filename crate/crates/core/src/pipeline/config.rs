//! `key = value` run configuration.
//!
//! `#` starts a comment. Relative paths resolve against the config file's
//! directory. Any key can be overridden by an environment variable named
//! `CASCADET_` followed by the key in upper case, e.g. `CASCADET_THREADS=4`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::classifier::BackboneSpec;
use crate::detector::CascadeConfig;
use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "CASCADET_";

pub const KEYS: [&str; 19] = [
    "manifest",
    "output_dir",
    "cascade_weights",
    "classifier_weights",
    "threads",
    "log_name",
    "annotate",
    "min_face_size",
    "pyramid_factor",
    "threshold_proposal",
    "threshold_refine",
    "threshold_output",
    "nms_within_level",
    "nms_across_levels",
    "nms_refine",
    "nms_output",
    "classifier_input",
    "classifier_width",
    "classifier_hidden",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    pub cascade_weights: PathBuf,
    pub classifier_weights: PathBuf,
    pub cascade: CascadeConfig,
    pub backbone: BackboneSpec,
    /// Worker threads; frames are processed concurrently.
    pub threads: usize,
    pub log_name: String,
    /// Write annotated frames next to the log.
    pub annotate: bool,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {value:?} for `{key}`, expected true or false"))),
    }
}

impl RunConfig {
    /// Reads `path` and applies overrides from the process environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new("")), std::env::vars())
    }

    pub fn parse(text: &str, base: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        for (k, v) in env {
            if let Some(key) = k.strip_prefix(ENV_PREFIX) {
                pairs.push((key.to_ascii_lowercase(), v));
            }
        }

        let mut manifest = None;
        let mut output_dir = None;
        let mut cascade_weights = None;
        let mut classifier_weights = None;
        let mut cascade = CascadeConfig::default();
        let mut backbone = BackboneSpec::default();
        let mut threads = 1;
        let mut log_name = "detections.jsonl".to_string();
        let mut annotate = true;
        let resolve = |v: &str| base.join(v);

        for (key, value) in &pairs {
            let (k, v) = (key.as_str(), value.as_str());
            match k {
                "manifest" => manifest = Some(resolve(v)),
                "output_dir" => output_dir = Some(resolve(v)),
                "cascade_weights" => cascade_weights = Some(resolve(v)),
                "classifier_weights" => classifier_weights = Some(resolve(v)),
                "threads" => threads = parse(k, v)?,
                "log_name" => log_name = v.to_string(),
                "annotate" => annotate = parse_bool(k, v)?,
                "min_face_size" => cascade.min_face_size = parse(k, v)?,
                "pyramid_factor" => cascade.pyramid_factor = parse(k, v)?,
                "threshold_proposal" => cascade.thresholds[0] = parse(k, v)?,
                "threshold_refine" => cascade.thresholds[1] = parse(k, v)?,
                "threshold_output" => cascade.thresholds[2] = parse(k, v)?,
                "nms_within_level" => cascade.nms_within_level = parse(k, v)?,
                "nms_across_levels" => cascade.nms_across_levels = parse(k, v)?,
                "nms_refine" => cascade.nms_refine = parse(k, v)?,
                "nms_output" => cascade.nms_output = parse(k, v)?,
                "classifier_input" => backbone.input_extent = parse(k, v)?,
                "classifier_width" => backbone.width_multiplier = parse(k, v)?,
                "classifier_hidden" => backbone.head_hidden = parse(k, v)?,
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        let required = |v: Option<PathBuf>, key: &str| v.ok_or_else(|| Error::Config(format!("missing `{key}`")));
        let config = RunConfig {
            manifest: required(manifest, "manifest")?,
            output_dir: required(output_dir, "output_dir")?,
            cascade_weights: required(cascade_weights, "cascade_weights")?,
            classifier_weights: required(classifier_weights, "classifier_weights")?,
            cascade,
            backbone,
            threads,
            log_name,
            annotate,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.cascade.validate()?;
        self.backbone.validate()?;
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.log_name.is_empty() || self.log_name.contains(['/', '\\']) {
            return Err(Error::Config(format!("log_name must be a plain file name, got {:?}", self.log_name)));
        }
        Ok(())
    }

    /// Checks that the input files exist.
    pub fn check_paths(&self) -> Result<()> {
        for p in [&self.manifest, &self.cascade_weights, &self.classifier_weights] {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// The config as `key = value` text, parseable by [`RunConfig::parse`]
    /// with an empty base directory.
    pub fn to_text(&self) -> String {
        let c = &self.cascade;
        let b = &self.backbone;
        let values: [String; 19] = [
            self.manifest.display().to_string(),
            self.output_dir.display().to_string(),
            self.cascade_weights.display().to_string(),
            self.classifier_weights.display().to_string(),
            self.threads.to_string(),
            self.log_name.clone(),
            self.annotate.to_string(),
            c.min_face_size.to_string(),
            c.pyramid_factor.to_string(),
            c.thresholds[0].to_string(),
            c.thresholds[1].to_string(),
            c.thresholds[2].to_string(),
            c.nms_within_level.to_string(),
            c.nms_across_levels.to_string(),
            c.nms_refine.to_string(),
            c.nms_output.to_string(),
            b.input_extent.to_string(),
            b.width_multiplier.to_string(),
            b.head_hidden.to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "
        # paths
        manifest = frames/list.txt
        output_dir = out
        cascade_weights = /abs/cascade.cwts
        classifier_weights = clf.cwts   # trailing comment
    ";

    fn no_env() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn parses_and_resolves_paths() {
        let c = RunConfig::parse(BASE, Path::new("/cfg"), no_env()).unwrap();
        assert_eq!(c.manifest, PathBuf::from("/cfg/frames/list.txt"));
        assert_eq!(c.cascade_weights, PathBuf::from("/abs/cascade.cwts"));
        assert_eq!(c.classifier_weights, PathBuf::from("/cfg/clf.cwts"));
        assert_eq!(c.threads, 1);
        assert_eq!(c.cascade, CascadeConfig::default());
        assert!(c.annotate);
    }

    #[test]
    fn environment_overrides_file() {
        let text = format!("{BASE}\nthreads = 2\n");
        let env = vec![
            ("CASCADET_THREADS".to_string(), "4".to_string()),
            ("CASCADET_THRESHOLD_REFINE".to_string(), "0.8".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let c = RunConfig::parse(&text, Path::new(""), env).unwrap();
        assert_eq!(c.threads, 4);
        assert_eq!(c.cascade.thresholds[1], 0.8);
    }

    #[test]
    fn errors_are_config_errors() {
        let cases = [
            "manifest = a".to_string(),
            format!("{BASE}\nbogus = 1"),
            format!("{BASE}\nthreads = many"),
            format!("{BASE}\nthreads = 0"),
            format!("{BASE}\nno equals sign"),
            format!("{BASE}\npyramid_factor = 1.5"),
            format!("{BASE}\nannotate = maybe"),
        ];
        for text in cases {
            assert!(matches!(RunConfig::parse(&text, Path::new(""), no_env()), Err(Error::Config(_))), "{text}");
        }
        let env = vec![("CASCADET_NOPE".to_string(), "1".to_string())];
        assert!(RunConfig::parse(BASE, Path::new(""), env).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::parse(BASE, Path::new("/cfg"), no_env()).unwrap();
        c.threads = 3;
        c.cascade.nms_output = 0.6;
        c.backbone.width_multiplier = 0.5;
        let back = RunConfig::parse(&c.to_text(), Path::new(""), no_env()).unwrap();
        assert_eq!(back, c);
    }
}

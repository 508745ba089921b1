//! Flat `section.key=value` configuration for the ISP.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::color::{WbGains, DEFAULT_SATURATION_FRACTION, DEFAULT_WINDOW_FRACTION};
use crate::demosaic::DEFAULT_DIRECTION_MARGIN;
use crate::error::{Error, Result};

/// BM3D-scale σ = 50 on 8-bit data, in normalized units.
pub const DEFAULT_DENOISE_SIGMA: f64 = 50.0 / 255.0;
pub const DEFAULT_ACTIVITY_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiseMethod {
    None,
    Bilateral,
    Nlm,
}

impl DenoiseMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DenoiseMethod::None),
            "bilateral" => Ok(DenoiseMethod::Bilateral),
            "nlm" => Ok(DenoiseMethod::Nlm),
            other => Err(Error::config("denoise", format!("unknown method `{other}` (none, bilateral, nlm)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DenoiseMethod::None => "none",
            DenoiseMethod::Bilateral => "bilateral",
            DenoiseMethod::Nlm => "nlm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum WbMode {
    Checker,
    Fixed { gains: WbGains },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcmMode {
    Fit,
    File,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkConfig {
    pub enabled: bool,
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolesConfig {
    pub enabled: bool,
    pub guided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemosaicConfig {
    /// Event-gradient dominance needed to pin an interpolation axis.
    pub margin: f64,
    pub guided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WbConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub mode: WbMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightConfig {
    pub enabled: bool,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub method: DenoiseMethod,
    pub sigma: f64,
    pub event_weighted: bool,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcmConfig {
    pub enabled: bool,
    pub mode: CcmMode,
    pub file: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub white_preserve: bool,
    pub exposure_normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub window: f64,
}

/// Event window for activity maps; defaults to the frame exposure or the stream span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventWindowConfig {
    pub t0: Option<u64>,
    pub t1: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IspConfig {
    pub dark: DarkConfig,
    pub holes: HolesConfig,
    pub demosaic: DemosaicConfig,
    pub wb: WbConfig,
    pub highlight: HighlightConfig,
    pub denoise: DenoiseConfig,
    pub ccm: CcmConfig,
    pub gamma: GammaConfig,
    pub patches: PatchConfig,
    pub events: EventWindowConfig,
}

impl Default for IspConfig {
    fn default() -> Self {
        IspConfig {
            dark: DarkConfig {
                enabled: true,
                calibration: None,
            },
            holes: HolesConfig {
                enabled: true,
                guided: false,
            },
            demosaic: DemosaicConfig {
                margin: DEFAULT_DIRECTION_MARGIN,
                guided: false,
            },
            wb: WbConfig {
                enabled: true,
                mode: WbMode::Checker,
            },
            highlight: HighlightConfig {
                enabled: true,
                fraction: DEFAULT_SATURATION_FRACTION,
            },
            denoise: DenoiseConfig {
                method: DenoiseMethod::None,
                sigma: DEFAULT_DENOISE_SIGMA,
                event_weighted: false,
                lambda: DEFAULT_ACTIVITY_LAMBDA,
            },
            ccm: CcmConfig {
                enabled: true,
                mode: CcmMode::Fit,
                file: None,
                reference: None,
                white_preserve: false,
                exposure_normalize: true,
            },
            gamma: GammaConfig { enabled: true },
            patches: PatchConfig {
                window: DEFAULT_WINDOW_FRACTION,
            },
            events: EventWindowConfig { t0: None, t1: None },
        }
    }
}

fn parse_bool(stage: &str, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(Error::config(stage, format!("`{key}` expects true/false, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(stage: &str, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(stage, format!("`{key}` expects a number, got `{v}`")))
}

fn parse_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl IspConfig {
    /// Parse `key=value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = IspConfig::default();
        let mut wb_gains: Option<WbGains> = None;
        let mut wb_fixed = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config("config", format!("line {}: expected key=value", lineno + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            let stage = key.split('.').next().unwrap_or(key);
            let path = |v: &str| {
                parse_path(v).map(|p| match base_dir {
                    Some(base) if p.is_relative() => base.join(p),
                    _ => p,
                })
            };
            match key {
                "dark.enabled" => cfg.dark.enabled = parse_bool(stage, key, v)?,
                "dark.calibration" => cfg.dark.calibration = path(v),
                "holes.enabled" => cfg.holes.enabled = parse_bool(stage, key, v)?,
                "holes.guided" => cfg.holes.guided = parse_bool(stage, key, v)?,
                "demosaic.margin" => cfg.demosaic.margin = parse_num(stage, key, v)?,
                "demosaic.guided" => cfg.demosaic.guided = parse_bool(stage, key, v)?,
                "wb.enabled" => cfg.wb.enabled = parse_bool(stage, key, v)?,
                "wb.mode" => {
                    wb_fixed = match v {
                        "checker" => false,
                        "fixed" => true,
                        _ => return Err(Error::config(stage, format!("unknown wb.mode `{v}` (checker, fixed)"))),
                    }
                }
                "wb.gains" => {
                    let parts: Vec<f64> = v
                        .split(',')
                        .map(|p| parse_num(stage, key, p.trim()))
                        .collect::<Result<_>>()?;
                    let gains = match parts[..] {
                        [r, g, b] if g == 1.0 => WbGains::new(r, b),
                        [r, b] => WbGains::new(r, b),
                        _ => Err(Error::config(stage, "wb.gains expects `r,1,b` or `r,b`")),
                    }
                    .map_err(|e| Error::config(stage, e.to_string()))?;
                    wb_gains = Some(gains);
                }
                "highlight.enabled" => cfg.highlight.enabled = parse_bool(stage, key, v)?,
                "highlight.fraction" => cfg.highlight.fraction = parse_num(stage, key, v)?,
                "denoise.method" => cfg.denoise.method = DenoiseMethod::parse(v)?,
                "denoise.sigma" => cfg.denoise.sigma = parse_num(stage, key, v)?,
                "denoise.event_weighted" => cfg.denoise.event_weighted = parse_bool(stage, key, v)?,
                "denoise.lambda" => cfg.denoise.lambda = parse_num(stage, key, v)?,
                "ccm.enabled" => cfg.ccm.enabled = parse_bool(stage, key, v)?,
                "ccm.mode" => {
                    cfg.ccm.mode = match v {
                        "fit" => CcmMode::Fit,
                        "file" => CcmMode::File,
                        "identity" => CcmMode::Identity,
                        _ => return Err(Error::config(stage, format!("unknown ccm.mode `{v}` (fit, file, identity)"))),
                    }
                }
                "ccm.file" => cfg.ccm.file = path(v),
                "ccm.reference" => cfg.ccm.reference = path(v),
                "ccm.white_preserve" => cfg.ccm.white_preserve = parse_bool(stage, key, v)?,
                "ccm.exposure_normalize" => cfg.ccm.exposure_normalize = parse_bool(stage, key, v)?,
                "gamma.enabled" => cfg.gamma.enabled = parse_bool(stage, key, v)?,
                "patches.window" => cfg.patches.window = parse_num(stage, key, v)?,
                "events.t0" => cfg.events.t0 = Some(parse_num(stage, key, v)?),
                "events.t1" => cfg.events.t1 = Some(parse_num(stage, key, v)?),
                _ => return Err(Error::config(stage, format!("unknown key `{key}`"))),
            }
        }
        if wb_fixed {
            let gains = wb_gains.ok_or_else(|| Error::config("wb", "wb.mode=fixed requires wb.gains"))?;
            cfg.wb.mode = WbMode::Fixed { gains };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |stage: &str, name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(stage, format!("{name} = {v} must be finite and >= 0")))
            }
        };
        nonneg("denoise", "denoise.sigma", self.denoise.sigma)?;
        nonneg("denoise", "denoise.lambda", self.denoise.lambda)?;
        nonneg("demosaic", "demosaic.margin", self.demosaic.margin)?;
        if !(self.highlight.fraction > 0.0 && self.highlight.fraction <= 1.0) {
            return Err(Error::config("highlight", format!("fraction {} not in (0, 1]", self.highlight.fraction)));
        }
        if !(self.patches.window > 0.0 && self.patches.window.is_finite()) {
            return Err(Error::config("patches", format!("window {} must be > 0", self.patches.window)));
        }
        if let (Some(t0), Some(t1)) = (self.events.t0, self.events.t1) {
            if t1 <= t0 {
                return Err(Error::config("events", format!("window [{t0}, {t1}) is empty")));
            }
        }
        if let WbMode::Fixed { gains } = &self.wb.mode {
            gains.validate().map_err(|e| Error::config("wb", e.to_string()))?;
        }
        Ok(())
    }

    /// Render back to the `key=value` form accepted by [`IspConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = writeln!(s, "dark.enabled={}", self.dark.enabled);
        let _ = writeln!(s, "dark.calibration={}", path(&self.dark.calibration));
        let _ = writeln!(s, "holes.enabled={}", self.holes.enabled);
        let _ = writeln!(s, "holes.guided={}", self.holes.guided);
        let _ = writeln!(s, "demosaic.margin={}", self.demosaic.margin);
        let _ = writeln!(s, "demosaic.guided={}", self.demosaic.guided);
        let _ = writeln!(s, "wb.enabled={}", self.wb.enabled);
        match &self.wb.mode {
            WbMode::Checker => {
                let _ = writeln!(s, "wb.mode=checker");
            }
            WbMode::Fixed { gains } => {
                let _ = writeln!(s, "wb.mode=fixed\nwb.gains={},{},{}", gains.r, gains.g, gains.b);
            }
        }
        let _ = writeln!(s, "highlight.enabled={}", self.highlight.enabled);
        let _ = writeln!(s, "highlight.fraction={}", self.highlight.fraction);
        let _ = writeln!(s, "denoise.method={}", self.denoise.method.name());
        let _ = writeln!(s, "denoise.sigma={}", self.denoise.sigma);
        let _ = writeln!(s, "denoise.event_weighted={}", self.denoise.event_weighted);
        let _ = writeln!(s, "denoise.lambda={}", self.denoise.lambda);
        let _ = writeln!(s, "ccm.enabled={}", self.ccm.enabled);
        let mode = match self.ccm.mode {
            CcmMode::Fit => "fit",
            CcmMode::File => "file",
            CcmMode::Identity => "identity",
        };
        let _ = writeln!(s, "ccm.mode={mode}");
        let _ = writeln!(s, "ccm.file={}", path(&self.ccm.file));
        let _ = writeln!(s, "ccm.reference={}", path(&self.ccm.reference));
        let _ = writeln!(s, "ccm.white_preserve={}", self.ccm.white_preserve);
        let _ = writeln!(s, "ccm.exposure_normalize={}", self.ccm.exposure_normalize);
        let _ = writeln!(s, "gamma.enabled={}", self.gamma.enabled);
        let _ = writeln!(s, "patches.window={}", self.patches.window);
        if let Some(t0) = self.events.t0 {
            let _ = writeln!(s, "events.t0={t0}");
        }
        if let Some(t1) = self.events.t1 {
            let _ = writeln!(s, "events.t1={t1}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        assert_eq!(IspConfig::parse("", None).unwrap(), IspConfig::default());
    }

    #[test]
    fn parses_keys_and_comments() {
        let text = "# demo\n\ndenoise.method = bilateral\ndenoise.sigma=0.1\nwb.mode=fixed\nwb.gains=1.5,1,2\nccm.mode=identity\ngamma.enabled=false\n";
        let cfg = IspConfig::parse(text, None).unwrap();
        assert_eq!(cfg.denoise.method, DenoiseMethod::Bilateral);
        assert_eq!(cfg.denoise.sigma, 0.1);
        assert_eq!(cfg.wb.mode, WbMode::Fixed { gains: WbGains::new(1.5, 2.0).unwrap() });
        assert_eq!(cfg.ccm.mode, CcmMode::Identity);
        assert!(!cfg.gamma.enabled);
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let cfg = IspConfig::parse("dark.calibration=calib.json\nccm.reference=/abs/ref.json", Some(Path::new("/cfg"))).unwrap();
        assert_eq!(cfg.dark.calibration, Some(PathBuf::from("/cfg/calib.json")));
        assert_eq!(cfg.ccm.reference, Some(PathBuf::from("/abs/ref.json")));
    }

    #[test]
    fn errors_name_the_stage() {
        let stage_of = |text: &str| match IspConfig::parse(text, None) {
            Err(Error::Config { stage, .. }) => stage,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(stage_of("denoise.method=bm3d"), "denoise");
        assert_eq!(stage_of("denoise.sigma=-1"), "denoise");
        assert_eq!(stage_of("wb.mode=fixed"), "wb");
        assert_eq!(stage_of("wb.gains=1,2,3"), "wb");
        assert_eq!(stage_of("highlight.fraction=0"), "highlight");
        assert_eq!(stage_of("ccm.mode=magic"), "ccm");
        assert_eq!(stage_of("gamma.enabled=maybe"), "gamma");
        assert_eq!(stage_of("bogus.key=1"), "bogus");
        assert_eq!(stage_of("no equals sign"), "config");
    }

    #[test]
    fn text_round_trip() {
        let text = "dark.calibration=/tmp/c.json\nwb.mode=fixed\nwb.gains=1.25,1,0.8\ndenoise.method=nlm\nccm.mode=file\nccm.file=/tmp/m.json\nevents.t0=5\nevents.t1=900\n";
        let cfg = IspConfig::parse(text, None).unwrap();
        assert_eq!(IspConfig::parse(&cfg.to_text(), None).unwrap(), cfg);
    }
}

//! Run configuration: a TOML tree whose physical quantities carry unit
//! suffixes. Frequencies in Hz, kHz, MHz or GHz are cyclic and become rad/s;
//! bare numbers are taken as already in rad/s, rad or s, so setting
//! `kappa = 1` gives dimensionless runs.

use crate::error::{Error, Result};
use crate::herald::Axis;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dimension {
    Rate,
    Angle,
    Time,
}

fn unit_factor(dim: Dimension, unit: &str) -> Option<f64> {
    let two_pi = 2.0 * PI;
    match (dim, unit) {
        (Dimension::Rate, "Hz") => Some(two_pi),
        (Dimension::Rate, "kHz") => Some(two_pi * 1e3),
        (Dimension::Rate, "MHz") => Some(two_pi * 1e6),
        (Dimension::Rate, "GHz") => Some(two_pi * 1e9),
        (Dimension::Rate, "rad/s") => Some(1.0),
        (Dimension::Angle, "rad") => Some(1.0),
        (Dimension::Angle, "deg") => Some(PI / 180.0),
        (Dimension::Time, "s") => Some(1.0),
        (Dimension::Time, "ms") => Some(1e-3),
        (Dimension::Time, "us" | "µs") => Some(1e-6),
        (Dimension::Time, "ns") => Some(1e-9),
        _ => None,
    }
}

/// Parses `"2.5 MHz"`, `"0.3rad"`, `"10 ns"` or a bare number.
fn parse_quantity(text: &str, dim: Dimension) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            let exponent = matches!(c, 'e' | 'E') && text[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+');
            c.is_alphabetic() && !exponent
        })
        .map_or(text.len(), |(i, _)| i);
    let (num, unit) = text.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| format!("`{text}` is not a number with a unit"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    unit_factor(dim, unit).map(|f| value * f).ok_or_else(|| format!("unit `{unit}` does not fit a {dim:?} quantity"))
}

macro_rules! quantity {
    ($name:ident, $dim:expr) => {
        #[derive(Clone, Copy, Debug, Default, PartialEq)]
        pub struct $name(pub f64);

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = f64;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "a number or a string with a {:?} unit", $dim)
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
                        Ok(v)
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
                        Ok(v as f64)
                    }
                    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
                        Ok(v as f64)
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
                        parse_quantity(v, $dim).map_err(E::custom)
                    }
                }
                d.deserialize_any(V).map($name)
            }
        }
    };
}

quantity!(Rate, Dimension::Rate);
quantity!(Angle, Dimension::Angle);
quantity!(Time, Dimension::Time);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    CatSpin,
    CatMech,
    Dicke,
    Fock,
    MechQubit,
    Paint,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::CatSpin => "cat-spin",
            Preset::CatMech => "cat-mech",
            Preset::Dicke => "dicke",
            Preset::Fock => "fock",
            Preset::MechQubit => "mech-qubit",
            Preset::Paint => "paint",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Spin { n_atoms: usize, omega_s: Rate },
    Mech { omega_m: Rate, g0: Rate, n_ph_max: usize },
}

/// Absorption broadening from the single-atom cooperativity, either given
/// directly or from the atom-cavity coupling and the atomic linewidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_rabi: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Rate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub kappa: Rate,
    pub kappa_loss: Rate,
    pub n_c_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorption: Option<AbsorptionConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Drive strength `ε/Ω` when not swept.
    pub eps_over_omega: f64,
    /// Cat branch separation `Φ`.
    pub phi: Angle,
    pub rel_phase: Angle,
    /// Detection time; for window-averaged presets, the window midpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_d: Option<Time>,
    /// Averaging window length (zero: a single detection time).
    pub window: Time,
    pub window_points: usize,
    /// Target level: Dicke `m` or displaced Fock number.
    pub m: f64,
    /// `f(φ)` samples as `[re, im]`, uniform on `[0, phi_max]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<[f64; 2]>,
    pub phi_max: Angle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub q: f64,
    pub r_d: Rate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub system: SystemConfig,
    pub cavity: CavityConfig,
    pub drive: DriveConfig,
    pub detector: DetectorConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub axis: Vec<Axis>,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

fn axis(name: &str, values: Vec<f64>) -> Axis {
    Axis { name: name.into(), values }
}

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powi(k)).collect()
}

impl RunConfig {
    /// Built-in defaults of each scenario, in units of `κ` except for the
    /// mechanical qubit, which uses laboratory rates.
    pub fn preset(preset: Preset) -> Self {
        let spin = |n| SystemConfig::Spin { n_atoms: n, omega_s: Rate(1.0) };
        let cavity = |kappa| CavityConfig { kappa: Rate(kappa), kappa_loss: Rate(0.0), n_c_max: 3, absorption: None };
        let drive = DriveConfig {
            eps_over_omega: 1e-3,
            phi: Angle(2.0 * PI / 3.0),
            rel_phase: Angle(0.0),
            t_d: None,
            window: Time(0.0),
            window_points: 64,
            m: 0.0,
            weights: Vec::new(),
            phi_max: Angle(2.0 * PI),
        };
        let mut cfg = RunConfig {
            preset,
            system: spin(30),
            cavity: cavity(1.0),
            drive,
            detector: DetectorConfig { q: 1.0, r_d: Rate(0.0) },
            output: OutputConfig { directory: PathBuf::from(format!("out/{}", preset.name())), formats: vec![Format::Csv, Format::Json] },
            axis: Vec::new(),
        };
        match preset {
            Preset::CatSpin => {
                cfg.axis = vec![axis("eps_over_omega", log_space(1e-2, 1.0, 9)), axis("rd_over_qkappa", decades(-5, -2))];
            }
            Preset::CatMech => {
                cfg.system = SystemConfig::Mech { omega_m: Rate(0.125), g0: Rate(1.0), n_ph_max: 160 };
                cfg.drive.phi = Angle(0.375);
                cfg.drive.window = Time(2.0);
                cfg.axis = vec![axis("eps_over_omega", log_space(1e-2, 0.3, 7)), axis("rd_over_qkappa", decades(-6, -3))];
            }
            Preset::Dicke => {
                cfg.system = spin(8);
                cfg.drive.m = 2.0;
                cfg.axis = vec![axis("eps_over_omega", vec![1e-3, 0.1, 0.3, 0.5])];
            }
            Preset::Fock => {
                cfg.system = SystemConfig::Mech { omega_m: Rate(1.0), g0: Rate(0.5), n_ph_max: 40 };
                cfg.drive.m = 1.0;
                cfg.axis = vec![axis("eps_over_omega", vec![1e-3, 0.1])];
            }
            Preset::MechQubit => {
                let mhz = 2.0 * PI * 1e6;
                cfg.system = SystemConfig::Mech { omega_m: Rate(4000.0 * mhz), g0: Rate(mhz), n_ph_max: 8 };
                cfg.cavity = cavity(500.0 * mhz);
                cfg.drive.eps_over_omega = 1e-5;
                cfg.axis = vec![axis("eps_over_omega", log_space(1e-6, 1e-3, 7)), axis("rd_over_qkappa", decades(-10, -7))];
            }
            Preset::Paint => {
                cfg.system = spin(8);
                cfg.drive.weights = (0..65).map(|k| [(2.0 * PI * 2.0 * k as f64 / 64.0).cos() / (2.0 * PI), (2.0 * PI * 2.0 * k as f64 / 64.0).sin() / (2.0 * PI)]).collect();
                cfg.axis = vec![axis("eps_over_omega", vec![1e-3])];
            }
        }
        cfg
    }

    /// Preset defaults overlaid with a user TOML document. Tables merge key
    /// by key, except `system` and arrays, which replace the default whole.
    pub fn from_toml(preset: Option<Preset>, text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let preset = match (user.get("preset"), preset) {
            (_, Some(p)) => p,
            (Some(v), None) => Preset::deserialize(v.clone()).map_err(|e| Error::Config(format!("preset: {e}")))?,
            (None, None) => Preset::CatSpin,
        };
        let mut base = toml::Table::try_from(Self::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, user);
        base.insert("preset".into(), toml::Value::String(preset.name().into()));
        let cfg: RunConfig = toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match &self.system {
            SystemConfig::Spin { n_atoms, omega_s } => {
                if *n_atoms == 0 || !positive(omega_s.0) {
                    return bad("spin system needs n_atoms >= 1 and omega_s > 0".into());
                }
            }
            SystemConfig::Mech { omega_m, g0, n_ph_max } => {
                if !positive(omega_m.0) || !positive(g0.0) || *n_ph_max == 0 {
                    return bad("mechanical system needs omega_m > 0, g0 > 0 and n_ph_max >= 1".into());
                }
            }
        }
        let c = &self.cavity;
        if !positive(c.kappa.0) || !(c.kappa_loss.0 >= 0.0) || c.n_c_max == 0 {
            return bad("cavity needs kappa > 0, kappa_loss >= 0 and n_c_max >= 1".into());
        }
        if let Some(a) = &c.absorption {
            if c.kappa_loss.0 > 0.0 {
                return bad("give either cavity.kappa_loss or cavity.absorption, not both".into());
            }
            if !matches!(self.system, SystemConfig::Spin { .. }) {
                return bad("cavity.absorption applies to spin systems only".into());
            }
            match (a.eta, a.g_rabi, a.gamma) {
                (Some(e), None, None) if positive(e) => {}
                (None, Some(g), Some(gm)) if positive(g.0) && positive(gm.0) => {}
                _ => return bad("cavity.absorption needs eta > 0, or both g_rabi > 0 and gamma > 0".into()),
            }
        }
        let d = &self.drive;
        if !d.eps_over_omega.is_finite() || d.eps_over_omega < 0.0 {
            return bad("drive.eps_over_omega must be >= 0".into());
        }
        if !(d.window.0 >= 0.0) || (d.window.0 > 0.0 && d.window_points < 2) {
            return bad("drive.window must be >= 0 with at least 2 window_points".into());
        }
        if !(self.detector.q > 0.0 && self.detector.q <= 1.0) || !(self.detector.r_d.0 >= 0.0) {
            return bad("detector needs 0 < q <= 1 and r_d >= 0".into());
        }
        if self.preset == Preset::Paint && d.weights.len() < 2 {
            return bad("paint needs a drive.weights table of at least two [re, im] samples".into());
        }
        crate::herald::validate_axes(&self.axis)
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if k != "system" => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sweep plan: an optional preset and the axes, in declared order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub axis: Vec<Axis>,
}

impl SweepPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn units_convert_to_angular_rates() {
        assert_eq!(parse_quantity("1 Hz", Dimension::Rate).unwrap(), 2.0 * PI);
        approx::assert_relative_eq!(parse_quantity("2.5MHz", Dimension::Rate).unwrap(), 2.0 * PI * 2.5e6, max_relative = 1e-15);
        assert_eq!(parse_quantity("1e3 rad/s", Dimension::Rate).unwrap(), 1e3);
        approx::assert_relative_eq!(parse_quantity("10 ns", Dimension::Time).unwrap(), 1e-8, max_relative = 1e-15);
        assert_eq!(parse_quantity("0.5", Dimension::Angle).unwrap(), 0.5);
        assert_eq!(parse_quantity("180 deg", Dimension::Angle).unwrap(), PI);
        assert!(parse_quantity("3 ms", Dimension::Rate).is_err());
        assert!(parse_quantity("fast", Dimension::Rate).is_err());
    }

    #[test]
    fn user_tables_overlay_preset_defaults() {
        let cfg = RunConfig::from_toml(Some(Preset::CatSpin), "[cavity]\nkappa = \"1 MHz\"\n[system.spin]\nn_atoms = 10\nomega_s = \"1 MHz\"\n").unwrap();
        assert_eq!(cfg.cavity.kappa.0, 2.0 * PI * 1e6);
        assert_eq!(cfg.cavity.n_c_max, 3);
        assert_eq!(cfg.system, SystemConfig::Spin { n_atoms: 10, omega_s: Rate(2.0 * PI * 1e6) });
        assert_eq!(cfg.axis.len(), 2);
    }

    #[test]
    fn rejects_malformed_configs() {
        assert!(RunConfig::from_toml(None, "[cavity]\nkappa = -1.0\n").is_err());
        assert!(RunConfig::from_toml(None, "[cavity]\nkapa = 1.0\n").is_err());
        assert!(RunConfig::from_toml(None, "[system.spin]\nn_atoms = 4\nomega_s = 1.0\n[system.mech]\nomega_m = 1.0\ng0 = 1.0\nn_ph_max = 5\n").is_err());
        assert!(RunConfig::from_toml(None, "[[axis]]\nname = \"bogus\"\nvalues = [1.0]\n").is_err());
        assert!(RunConfig::from_toml(Some(Preset::Fock), "[cavity.absorption]\neta = 5.0\n").is_err());
    }

    #[test]
    fn every_preset_round_trips() {
        for p in [Preset::CatSpin, Preset::CatMech, Preset::Dicke, Preset::Fock, Preset::MechQubit, Preset::Paint] {
            let cfg = RunConfig::preset(p);
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(None, &text).unwrap(), cfg);
        }
    }

    proptest! {
        #[test]
        fn resolved_configs_round_trip(kappa in 1e-3f64..1e10, q in 0.01f64..1.0, eps in 0.0f64..1.0, n in 1usize..200) {
            let mut cfg = RunConfig::preset(Preset::CatSpin);
            cfg.cavity.kappa = Rate(kappa);
            cfg.detector.q = q;
            cfg.drive.eps_over_omega = eps;
            cfg.system = SystemConfig::Spin { n_atoms: n, omega_s: Rate(kappa / 3.0) };
            let back = RunConfig::from_toml(None, &cfg.to_toml().unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}

//! System parameters, node geometry and per-link channel variances.
//!
//! Everything inside the crate is linear. dB values are only accepted at the
//! configuration boundary through keys ending in `_db`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relay operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Full-duplex relay, loop self-interference present.
    #[serde(rename = "fd", alias = "FD")]
    FullDuplex,
    /// Half-duplex relay, two time slots and no self-interference.
    #[serde(rename = "hd", alias = "HD")]
    HalfDuplex,
    /// Direct links only. The source transmits with the relay's power as well.
    #[serde(rename = "noncoop", alias = "non-cooperative", alias = "NonCooperative")]
    NonCooperative,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::FullDuplex, Mode::HalfDuplex, Mode::NonCooperative];

    pub fn label(self) -> &'static str {
        match self {
            Mode::FullDuplex => "fd",
            Mode::HalfDuplex => "hd",
            Mode::NonCooperative => "noncoop",
        }
    }
}

/// How a link distance turns into a channel variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceModel {
    /// `β = Ω / √(1 + d^α)`.
    #[serde(rename = "sqrt")]
    SqrtPathLoss,
    /// `β = Ω / (1 + d^α)`.
    #[serde(rename = "power")]
    PowerPathLoss,
}

impl VarianceModel {
    pub fn variance(self, omega_var: f64, alpha: f64, d: f64) -> f64 {
        let loss = 1.0 + d.powf(alpha);
        match self {
            VarianceModel::SqrtPathLoss => omega_var / loss.sqrt(),
            VarianceModel::PowerPathLoss => omega_var / loss,
        }
    }
}

/// Scenario constants. Powers are linear and share the unit of `n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub a_f: f64,
    pub a_n: f64,
    pub p_com: f64,
    pub p_sen: f64,
    pub p_max: f64,
    pub gamma_th_f: f64,
    pub gamma_th_n: f64,
    /// Power reflection factor of the target.
    pub delta: f64,
    /// Duplex switch: 1 for full duplex, 0 for half duplex.
    pub omega: f64,
    pub n0: f64,
    /// Mean loop self-interference gain.
    pub rho_li_mean: f64,
    /// Channel variance scale Ω.
    pub omega_var: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Sensing SINR floor of the communication-centric design.
    pub kappa: f64,
    pub mode: Mode,
    pub variance_model: VarianceModel,
}

/// Node distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub d_sr: f64,
    pub d_sdf: f64,
    pub d_sdn: f64,
    pub d_rdf: f64,
    pub d_rdn: f64,
    pub d_rt: f64,
    pub d_tr: f64,
}

/// Per-link channel variances. `beta_rr` is the variance of the one-way
/// relay–target gain whose square is the echo gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkVariances {
    pub beta_sr: f64,
    pub beta_sdf: f64,
    pub beta_sdn: f64,
    pub beta_rdf: f64,
    pub beta_rdn: f64,
    pub beta_rr: f64,
    pub beta_li: f64,
}

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10·log10(x)`.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

impl SystemParams {
    /// Checks every invariant.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("a_f", self.a_f),
            ("a_n", self.a_n),
            ("p_com", self.p_com),
            ("p_sen", self.p_sen),
            ("p_max", self.p_max),
            ("gamma_th_f", self.gamma_th_f),
            ("gamma_th_n", self.gamma_th_n),
            ("delta", self.delta),
            ("omega", self.omega),
            ("n0", self.n0),
            ("rho_li_mean", self.rho_li_mean),
            ("omega_var", self.omega_var),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if ((self.a_f + self.a_n) - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("a_f + a_n must equal 1, got {}", self.a_f + self.a_n)));
        }
        if !(self.a_n > 0.0 && self.a_n < self.a_f && self.a_f < 1.0) {
            return Err(invalid(format!(
                "need 0 < a_n < a_f < 1, got a_n={}, a_f={}",
                self.a_n, self.a_f
            )));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid(format!("delta must lie in [0,1], got {}", self.delta)));
        }
        if self.omega != 0.0 && self.omega != 1.0 {
            return Err(invalid(format!("omega must be 0 or 1, got {}", self.omega)));
        }
        match self.mode {
            Mode::FullDuplex if self.omega != 1.0 => return Err(invalid("full-duplex mode requires omega = 1")),
            Mode::HalfDuplex if self.omega != 0.0 => return Err(invalid("half-duplex mode requires omega = 0")),
            _ => {}
        }
        if self.p_com < 0.0 || self.p_sen < 0.0 || self.p_max < 0.0 {
            return Err(invalid("powers must be non-negative"));
        }
        let slack = 1.0 + 1e-12;
        if self.p_com > self.p_max * slack || self.p_sen > self.p_max * slack {
            return Err(invalid(format!(
                "p_com={} and p_sen={} must not exceed p_max={}",
                self.p_com, self.p_sen, self.p_max
            )));
        }
        if !(self.gamma_th_f > 0.0 && self.gamma_th_n > 0.0) {
            return Err(invalid("outage thresholds must be positive"));
        }
        if !(self.n0 > 0.0) {
            return Err(invalid("n0 must be positive"));
        }
        if !(self.rho_li_mean > 0.0) {
            return Err(invalid("rho_li_mean must be positive"));
        }
        if !(self.omega_var > 0.0) || self.alpha < 0.0 || self.kappa < 0.0 {
            return Err(invalid("need omega_var > 0, alpha >= 0, kappa >= 0"));
        }
        Ok(())
    }

    /// Transmit SNR of the source, `P_com / N0`.
    pub fn gamma_c(&self) -> f64 {
        self.p_com / self.n0
    }

    /// Transmit SNR of the relay, `P_sen / N0`.
    pub fn gamma_r(&self) -> f64 {
        self.p_sen / self.n0
    }

    /// Source SNR used on the direct links. Without a relay the source also
    /// spends the relay's share so that all modes use the same total power.
    pub fn gamma_direct(&self) -> f64 {
        match self.mode {
            Mode::NonCooperative => (self.p_com + self.p_sen) / self.n0,
            _ => self.gamma_c(),
        }
    }

    /// Same parameters in another mode, with `omega` switched to match.
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self.omega = match mode {
            Mode::FullDuplex => 1.0,
            Mode::HalfDuplex => 0.0,
            Mode::NonCooperative => self.omega,
        };
        self
    }

    /// Sets `P_com = P_sen = N0·10^(db/10)`, raising `p_max` when needed.
    pub fn with_snr_db(mut self, db: f64) -> Self {
        let p = self.n0 * db_to_linear(db);
        self.p_com = p;
        self.p_sen = p;
        self.p_max = self.p_max.max(p);
        self
    }

    /// Sets the two transmit powers, raising `p_max` when needed.
    pub fn with_powers(mut self, p_com: f64, p_sen: f64) -> Self {
        self.p_com = p_com;
        self.p_sen = p_sen;
        self.p_max = self.p_max.max(p_com).max(p_sen);
        self
    }

    /// Sets the power split, keeping `a_f = 1 − a_n`.
    pub fn with_a_n(mut self, a_n: f64) -> Self {
        self.a_n = a_n;
        self.a_f = 1.0 - a_n;
        self
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d_sr, self.d_sdf, self.d_sdn, self.d_rdf, self.d_rdn, self.d_rt, self.d_tr,
        ];
        if all.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid(format!("distances must be finite and positive: {self:?}")));
        }
        if self.d_rt != self.d_tr {
            return Err(invalid(format!(
                "relay-target distance must be reciprocal: d_rt={}, d_tr={}",
                self.d_rt, self.d_tr
            )));
        }
        Ok(())
    }

    /// Relay on the straight line from the source to the near device, far
    /// device at angle `phi` from that line.
    pub fn relay_on_line(d_sr: f64, d_sdn: f64, d_sdf: f64, phi: f64, d_rt: f64) -> Result<Self> {
        if !(d_sr > 0.0 && d_sr < d_sdn) {
            return Err(invalid(format!(
                "relay must sit strictly between S and D_n: d_sr={d_sr}, d_sdn={d_sdn}"
            )));
        }
        let d_rdf = (d_sr * d_sr + d_sdf * d_sdf - 2.0 * d_sr * d_sdf * phi.cos()).sqrt();
        let geo = Self {
            d_sr,
            d_sdf,
            d_sdn,
            d_rdf,
            d_rdn: d_sdn - d_sr,
            d_rt,
            d_tr: d_rt,
        };
        geo.validate()?;
        Ok(geo)
    }
}

impl LinkVariances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.beta_sr,
            self.beta_sdf,
            self.beta_sdn,
            self.beta_rdf,
            self.beta_rdn,
            self.beta_rr,
            self.beta_li,
        ];
        if all.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(invalid(format!("variances must be finite and positive: {self:?}")));
        }
        Ok(())
    }

    /// The same value on every link, handy for tests.
    pub fn uniform(beta: f64) -> Self {
        Self {
            beta_sr: beta,
            beta_sdf: beta,
            beta_sdn: beta,
            beta_rdf: beta,
            beta_rdn: beta,
            beta_rr: beta,
            beta_li: beta,
        }
    }
}

/// Per-link variances from distances.
pub fn derive_variances(params: &SystemParams, geo: &Geometry) -> Result<LinkVariances> {
    params.validate()?;
    geo.validate()?;
    let v = |d: f64| params.variance_model.variance(params.omega_var, params.alpha, d);
    let vars = LinkVariances {
        beta_sr: v(geo.d_sr),
        beta_sdf: v(geo.d_sdf),
        beta_sdn: v(geo.d_sdn),
        beta_rdf: v(geo.d_rdf),
        beta_rdn: v(geo.d_rdn),
        beta_rr: v(geo.d_rt),
        beta_li: params.rho_li_mean,
    };
    vars.validate()?;
    Ok(vars)
}

/// Reference scenario: 20 dB transmit SNRs, 30 dB budget, full duplex.
pub fn paper_defaults() -> (SystemParams, Geometry) {
    let params = SystemParams {
        a_f: 0.7,
        a_n: 0.3,
        p_com: 100.0,
        p_sen: 100.0,
        p_max: 1000.0,
        gamma_th_f: 1.0,
        gamma_th_n: 2.0,
        delta: 0.2,
        omega: 1.0,
        n0: 1.0,
        rho_li_mean: db_to_linear(-25.0),
        omega_var: 5.0,
        alpha: 4.0,
        kappa: 0.01,
        mode: Mode::FullDuplex,
        variance_model: VarianceModel::SqrtPathLoss,
    };
    let geo = Geometry {
        d_sr: 10.0,
        d_sdf: 25.0,
        d_sdn: 20.0,
        d_rdf: 20.0,
        d_rdn: 15.0,
        d_rt: 12.0,
        d_tr: 12.0,
    };
    (params, geo)
}

/// On-disk scenario document. Missing keys keep their default value.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    a_f: Option<f64>,
    a_n: Option<f64>,
    p_com: Option<f64>,
    p_com_db: Option<f64>,
    p_sen: Option<f64>,
    p_sen_db: Option<f64>,
    p_max: Option<f64>,
    p_max_db: Option<f64>,
    gamma_th_f: Option<f64>,
    gamma_th_n: Option<f64>,
    delta: Option<f64>,
    omega: Option<f64>,
    n0: Option<f64>,
    rho_li_mean: Option<f64>,
    rho_li_mean_db: Option<f64>,
    omega_var: Option<f64>,
    alpha: Option<f64>,
    kappa: Option<f64>,
    kappa_db: Option<f64>,
    mode: Option<Mode>,
    variance_model: Option<VarianceModel>,
    d_sr: Option<f64>,
    d_sdf: Option<f64>,
    d_sdn: Option<f64>,
    d_rdf: Option<f64>,
    d_rdn: Option<f64>,
    d_rt: Option<f64>,
    d_tr: Option<f64>,
}

fn pick(name: &str, linear: Option<f64>, db: Option<f64>) -> Result<Option<f64>> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(Error::Config(format!("both {name} and {name}_db given"))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(d)) => Ok(Some(db_to_linear(d))),
        (None, None) => Ok(None),
    }
}

/// Parses a JSON scenario on top of [`paper_defaults`].
pub fn config_from_json(text: &str) -> Result<(SystemParams, Geometry)> {
    let cfg: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let (mut p, mut g) = paper_defaults();

    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    match (cfg.a_f, cfg.a_n) {
        (Some(f), Some(n)) => {
            p.a_f = f;
            p.a_n = n;
        }
        (Some(f), None) => p = p.with_a_n(1.0 - f),
        (None, Some(n)) => p = p.with_a_n(n),
        (None, None) => {}
    }
    set!(p.p_com, pick("p_com", cfg.p_com, cfg.p_com_db)?);
    set!(p.p_sen, pick("p_sen", cfg.p_sen, cfg.p_sen_db)?);
    let p_max = pick("p_max", cfg.p_max, cfg.p_max_db)?;
    match p_max {
        Some(v) => p.p_max = v,
        None => p.p_max = p.p_max.max(p.p_com).max(p.p_sen),
    }
    set!(p.gamma_th_f, cfg.gamma_th_f);
    set!(p.gamma_th_n, cfg.gamma_th_n);
    set!(p.delta, cfg.delta);
    set!(p.n0, cfg.n0);
    set!(p.rho_li_mean, pick("rho_li_mean", cfg.rho_li_mean, cfg.rho_li_mean_db)?);
    set!(p.omega_var, cfg.omega_var);
    set!(p.alpha, cfg.alpha);
    set!(p.kappa, pick("kappa", cfg.kappa, cfg.kappa_db)?);
    set!(p.variance_model, cfg.variance_model);
    match (cfg.mode, cfg.omega) {
        (Some(m), Some(w)) => {
            p.mode = m;
            p.omega = w;
        }
        (Some(m), None) => p = p.with_mode(m),
        (None, Some(w)) => {
            p.omega = w;
            p.mode = if w == 0.0 { Mode::HalfDuplex } else { Mode::FullDuplex };
        }
        (None, None) => {}
    }
    set!(g.d_sr, cfg.d_sr);
    set!(g.d_sdf, cfg.d_sdf);
    set!(g.d_sdn, cfg.d_sdn);
    set!(g.d_rdf, cfg.d_rdf);
    set!(g.d_rdn, cfg.d_rdn);
    match (cfg.d_rt, cfg.d_tr) {
        (Some(a), Some(b)) => {
            g.d_rt = a;
            g.d_tr = b;
        }
        (Some(a), None) | (None, Some(a)) => {
            g.d_rt = a;
            g.d_tr = a;
        }
        (None, None) => {}
    }
    p.validate()?;
    g.validate()?;
    Ok((p, g))
}

/// Reads a JSON scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<(SystemParams, Geometry)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_model() -> SystemParams {
        let (mut p, _) = paper_defaults();
        p.variance_model = VarianceModel::PowerPathLoss;
        p
    }

    #[test]
    fn power_model_single_link() {
        let p = power_model();
        let b = p.variance_model.variance(5.0, 4.0, 10.0);
        assert_eq!(b, 5.0 / 10001.0);
        assert!((b - 4.99950e-4).abs() < 1e-9);
    }

    #[test]
    fn zero_exponent_is_distance_free() {
        for d in [0.5, 3.0, 1e3] {
            assert_eq!(VarianceModel::PowerPathLoss.variance(5.0, 0.0, d), 2.5);
            assert_eq!(VarianceModel::SqrtPathLoss.variance(5.0, 0.0, d), 5.0 / 2f64.sqrt());
        }
    }

    #[test]
    fn reference_geometry_variances() {
        let (p, g) = paper_defaults();
        let v = derive_variances(&p, &g).unwrap();
        let close = |a: f64, b: f64| ((a - b) / b).abs() < 1e-14;
        assert!(close(v.beta_sr, 0.049_997_500_187_484_376));
        assert!(close(v.beta_sdf, 0.007_999_989_760_019_66));
        assert!(close(v.beta_sdn, 0.012_499_960_937_683_104));
        assert!(close(v.beta_rdf, 0.012_499_960_937_683_104));
        assert!(close(v.beta_rdn, 0.022_222_002_746_735_71));
        assert!(close(v.beta_rr, 0.034_721_385_007_561_605));
        assert!(close(v.beta_li, 0.003_162_277_660_168_379_4));

        let v = derive_variances(&power_model(), &g).unwrap();
        assert!(close(v.beta_sr, 0.000_499_950_004_999_5));
        assert!(close(v.beta_sdf, 1.279_996_723_208_388_6e-5));
        assert!(close(v.beta_rdn, 9.876_348_121_518_588e-5));
        assert!(close(v.beta_rr, 0.000_241_114_915_368_664_7));
    }

    #[test]
    fn reference_values() {
        let (p, g) = paper_defaults();
        assert_eq!((p.a_f, p.a_n), (0.7, 0.3));
        assert_eq!(p.delta, 0.2);
        assert!((linear_to_db(p.rho_li_mean) + 25.0).abs() < 1e-12);
        assert_eq!((g.d_sr, g.d_rt, g.d_tr), (10.0, 12.0, 12.0));
        p.validate().unwrap();
    }

    #[test]
    fn variances_monotone_in_distance_and_scale() {
        for model in [VarianceModel::SqrtPathLoss, VarianceModel::PowerPathLoss] {
            for i in 0..50 {
                let d = 1.0 + i as f64;
                let w = 1.0 + 0.2 * i as f64;
                assert!(model.variance(5.0, 4.0, d + 1.0) < model.variance(5.0, 4.0, d));
                assert!(model.variance(w + 0.2, 4.0, 10.0) > model.variance(w, 4.0, 10.0));
            }
        }
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let (p, g) = paper_defaults();
        assert!(SystemParams {
            a_n: 0.5,
            a_f: 0.5,
            ..p
        }
        .validate()
        .is_err());
        assert!(SystemParams {
            a_n: 0.6,
            a_f: 0.4,
            ..p
        }
        .validate()
        .is_err());
        assert!(SystemParams { delta: 1.2, ..p }.validate().is_err());
        assert!(SystemParams { delta: -0.1, ..p }.validate().is_err());
        assert!(SystemParams { omega: 0.5, ..p }.validate().is_err());
        assert!(SystemParams { omega: 0.0, ..p }.validate().is_err());
        assert!(SystemParams { p_com: 2e3, ..p }.validate().is_err());
        assert!(Geometry { d_tr: 11.0, ..g }.validate().is_err());
        assert!(Geometry { d_sr: 0.0, ..g }.validate().is_err());
        assert!(LinkVariances {
            beta_sr: 0.0,
            ..LinkVariances::uniform(1.0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn mode_switch_sets_omega() {
        let (p, _) = paper_defaults();
        let hd = p.with_mode(Mode::HalfDuplex);
        assert_eq!(hd.omega, 0.0);
        hd.validate().unwrap();
        assert_eq!(hd.with_mode(Mode::FullDuplex).omega, 1.0);
        let nc = p.with_mode(Mode::NonCooperative);
        assert_eq!(nc.gamma_direct(), 200.0);
        assert_eq!(p.gamma_direct(), 100.0);
    }

    #[test]
    fn line_geometry() {
        let g = Geometry::relay_on_line(2.0, 5.0, 6.0, std::f64::consts::FRAC_PI_3, 12.0).unwrap();
        assert_eq!(g.d_rdn, 3.0);
        assert!((g.d_rdf - (4.0f64 + 36.0 - 12.0).sqrt()).abs() < 1e-12);
        assert!(Geometry::relay_on_line(5.0, 5.0, 6.0, 0.5, 12.0).is_err());
    }

    #[test]
    fn json_config_roundtrip() {
        let (p, g) = config_from_json(
            r#"{"p_com_db": 30, "p_sen": 10, "rho_li_mean_db": -20, "mode": "hd", "d_sr": 8, "variance_model": "power"}"#,
        )
        .unwrap();
        assert!((p.p_com - 1000.0).abs() < 1e-9);
        assert_eq!(p.p_sen, 10.0);
        assert!((p.rho_li_mean - 0.01).abs() < 1e-15);
        assert_eq!(p.mode, Mode::HalfDuplex);
        assert_eq!(p.omega, 0.0);
        assert_eq!(p.variance_model, VarianceModel::PowerPathLoss);
        assert_eq!(g.d_sr, 8.0);

        let (p, _) = config_from_json(r#"{"a_n": 0.2}"#).unwrap();
        assert_eq!((p.a_n, p.a_f), (0.2, 0.8));
    }

    #[test]
    fn json_config_errors() {
        assert!(matches!(config_from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        assert!(matches!(
            config_from_json(r#"{"p_com": 1, "p_com_db": 0}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            config_from_json(r#"{"delta": 3}"#),
            Err(Error::InvalidParams(_))
        ));
        assert!(config_from_json("not json").is_err());
    }
}

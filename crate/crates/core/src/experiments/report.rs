use std::fmt::Write as _;

use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::sweep::{DecayFitResult, SweepConfig};
use super::ExperimentError;
use crate::predict::exact::ExactJson;

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CsvHeader {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl CsvHeader {
    pub fn for_config<T: Serialize>(config: &T, seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: config_hash(config),
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# oscillab {} seed={} config_sha256={}",
            self.version, self.seed, self.config_hash
        )
    }
}

/// SHA-256 of the compact JSON form, lowercase hex.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Per-`lambda` CSV with a provenance comment line.
pub fn sweep_csv(config: &SweepConfig, result: &DecayFitResult) -> Result<String, ExperimentError> {
    let header = CsvHeader::for_config(config, config.seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| ExperimentError::InvalidConfig(format!("csv: {e}"));
    w.write_record(["lambda", "norm_lower", "norm_upper", "grid_mx", "grid_my", "wall_ms"])
        .map_err(io)?;
    for p in &result.points {
        w.write_record([
            p.lambda.to_string(),
            format!("{:e}", p.bracket.lower),
            format!("{:e}", p.bracket.upper),
            p.grid_mx.to_string(),
            p.grid_my.to_string(),
            format!("{:.3}", p.wall_ms),
        ])
        .map_err(io)?;
    }
    let body = w.into_inner().map_err(|e| ExperimentError::InvalidConfig(format!("csv: {e}")))?;
    Ok(format!("{}\n{}", header.comment_line(), String::from_utf8_lossy(&body)))
}

/// JSON report; its `config` member re-reads as a [`SweepConfig`].
pub fn sweep_json(config: &SweepConfig, result: &DecayFitResult) -> Value {
    let header = CsvHeader::for_config(config, config.seed);
    json!({
        "tool": "oscillab",
        "version": header.version,
        "seed": header.seed,
        "config_hash": header.config_hash,
        "config": config,
        "predictions": {
            "p": ExactJson::from(config.p),
            "decay": ExactJson::from(result.predicted_decay),
            "slope": ExactJson::from(-result.predicted_decay),
        },
        "fit": {
            "fit_from": result.fit_from,
            "slope_lower": result.lower.slope,
            "slope_upper": result.upper.slope,
            "intercept_lower": result.lower.intercept,
            "intercept_upper": result.upper.intercept,
            "r2_lower": result.lower.r2,
            "r2_upper": result.upper.r2,
            "tolerance": result.tolerance,
            "lower_within": result.lower_within,
            "upper_within": result.upper_within,
        },
        "points": result.points,
        "under_resolved": result.under_resolved,
        "verdict": result.verdict,
    })
}

/// Self-contained log-log chart of the norm brackets with a guide line of
/// the predicted slope.
pub fn sweep_svg(result: &DecayFitResult) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 56.0;
    let xs: Vec<f64> = result.points.iter().map(|p| p.lambda.log2()).collect();
    let lo: Vec<f64> = result.points.iter().map(|p| p.bracket.lower.max(f64::MIN_POSITIVE).log2()).collect();
    let up: Vec<f64> = result.points.iter().map(|p| p.bracket.upper.max(f64::MIN_POSITIVE).log2()).collect();
    let slope = -result.predicted_decay.to_f64().unwrap_or(0.0);
    let anchor = result.fit_from.min(xs.len().saturating_sub(1));
    let guide: Vec<f64> = xs
        .iter()
        .map(|x| up.get(anchor).copied().unwrap_or(0.0) + slope * (x - xs.get(anchor).copied().unwrap_or(0.0)))
        .collect();
    let all_y = lo.iter().chain(&up).chain(&guide).copied();
    let (ymin, ymax) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |x: f64| PAD + (x - xmin) / span(xmin, xmax) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - ymin) / span(ymin, ymax) * (H - 2.0 * PAD);
    let path = |ys: &[f64]| -> String {
        xs.iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (&x, &y))| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(x), py(y)))
            .collect()
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<path d="M{PAD},{PAD} L{PAD},{b} L{r},{b}" fill="none" stroke="#333"/>"##,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, path(&up));
    let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#2ca02c" stroke-width="2"/>"##, path(&lo));
    let _ = writeln!(
        s,
        r##"<path d="{}" fill="none" stroke="#d62728" stroke-dasharray="6 4"/>"##,
        path(&guide)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">log2 lambda</text>"#,
        W / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" transform="rotate(-90 16 {})" text-anchor="middle">log2 norm</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12">upper (blue), lower (green), slope {:.4} (red)</text>"#,
        PAD,
        PAD - 16.0,
        slope
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_hex() {
        let h = config_hash(&json!({"a": 1}));
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&json!({"a": 1})));
        assert_ne!(h, config_hash(&json!({"a": 2})));
        // sha256 of the bytes {"a":1}
        assert_eq!(h, "015abd7f5cc57a2dd94b7590f04ad8084273905ee33ec5cebeae62276a97f862");
    }
}

//! Fixed-schema CSV output and the matching reader used by the fit command.
//! UTF-8, LF line ends, comma separated, string fields quoted, floats with
//! 17 significant digits.

pub const MOMENT_HEADER: &str = "method,equation,d,family,h,a1,a2,spatial,spatial_param,t,order,estimate,stderr,log_estimate,n_rep,quad_steps,seed,wall_ms,config_hash";

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse17(s: &str) -> Result<f64, String> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse::<f64>().map_err(|e| format!("bad float `{s}`: {e}")),
    }
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub method: String,
    pub equation: String,
    pub d: usize,
    pub family: String,
    pub h: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub spatial: String,
    pub spatial_param: Option<f64>,
    pub t: f64,
    pub order: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub log_estimate: f64,
    pub n_rep: usize,
    pub quad_steps: usize,
    pub seed: u64,
    pub wall_ms: u64,
    pub config_hash: String,
}

impl MomentRow {
    pub fn to_line(&self) -> String {
        format!(
            "\"{}\",\"{}\",{},\"{}\",{},{},{},\"{}\",{},{},{},{},{},{},{},{},{},{},\"{}\"",
            self.method,
            self.equation,
            self.d,
            self.family,
            fmt17(self.h),
            opt17(self.a1),
            opt17(self.a2),
            self.spatial,
            opt17(self.spatial_param),
            fmt17(self.t),
            self.order,
            fmt17(self.estimate),
            fmt17(self.stderr),
            fmt17(self.log_estimate),
            self.n_rep,
            self.quad_steps,
            self.seed,
            self.wall_ms,
            self.config_hash,
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields = split_line(line);
        if fields.len() != 19 {
            return Err(format!("expected 19 columns, got {}", fields.len()));
        }
        let opt = |s: &str| -> Result<Option<f64>, String> {
            if s.is_empty() { Ok(None) } else { parse17(s).map(Some) }
        };
        Ok(MomentRow {
            method: fields[0].clone(),
            equation: fields[1].clone(),
            d: fields[2].parse().map_err(|e| format!("d: {e}"))?,
            family: fields[3].clone(),
            h: parse17(&fields[4])?,
            a1: opt(&fields[5])?,
            a2: opt(&fields[6])?,
            spatial: fields[7].clone(),
            spatial_param: opt(&fields[8])?,
            t: parse17(&fields[9])?,
            order: fields[10].parse().map_err(|e| format!("order: {e}"))?,
            estimate: parse17(&fields[11])?,
            stderr: parse17(&fields[12])?,
            log_estimate: parse17(&fields[13])?,
            n_rep: fields[14].parse().map_err(|e| format!("n_rep: {e}"))?,
            quad_steps: fields[15].parse().map_err(|e| format!("quad_steps: {e}"))?,
            seed: fields[16].parse().map_err(|e| format!("seed: {e}"))?,
            wall_ms: fields[17].parse().map_err(|e| format!("wall_ms: {e}"))?,
            config_hash: fields[18].clone(),
        })
    }
}

/// Splits a CSV line; fields contain no embedded commas or quotes, so the
/// only work is stripping the quoting of string columns.
fn split_line(line: &str) -> Vec<String> {
    line.split(',')
        .map(|f| f.trim_matches('"').to_string())
        .collect()
}

/// Parses a whole moment CSV document (header required).
pub fn parse_moment_csv(text: &str) -> Result<Vec<MomentRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MOMENT_HEADER => {}
        Some(h) => return Err(format!("unexpected header: {h}")),
        None => return Err("empty CSV".to_string()),
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| MomentRow::parse_line(l).map_err(|e| format!("row {}: {e}", i + 2)))
        .collect()
}

pub const FIT_HEADER: &str =
    "mode,config_hash,group_key,rho_hat,c_hat,r_squared,points_used,predicted_rho,tol,pass";

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub mode: String,
    pub config_hash: String,
    /// Fixed order for time fits, fixed time for order fits.
    pub group_key: f64,
    pub rho_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub predicted_rho: Option<f64>,
    pub tol: Option<f64>,
    pub pass: Option<bool>,
}

impl FitRow {
    pub fn to_line(&self) -> String {
        format!(
            "\"{}\",\"{}\",{},{},{},{},{},{},{},{}",
            self.mode,
            self.config_hash,
            fmt17(self.group_key),
            fmt17(self.rho_hat),
            fmt17(self.c_hat),
            fmt17(self.r_squared),
            self.points_used,
            opt17(self.predicted_rho),
            opt17(self.tol),
            self.pass.map(|p| p.to_string()).unwrap_or_default(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_has_17_significant_digits() {
        assert_eq!(fmt17(std::f64::consts::E), "2.7182818284590451e0");
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn moment_row_round_trip() {
        let row = MomentRow {
            method: "poisson".into(),
            equation: "heat".into(),
            d: 1,
            family: "do".into(),
            h: 0.5,
            a1: None,
            a2: None,
            spatial: "bounded-constant".into(),
            spatial_param: Some(1.0),
            t: 1.0,
            order: 2,
            estimate: std::f64::consts::E,
            stderr: 0.001,
            log_estimate: 1.0,
            n_rep: 1000,
            quad_steps: 256,
            seed: 42,
            wall_ms: 17,
            config_hash: "abc123".into(),
        };
        let parsed = MomentRow::parse_line(&row.to_line()).unwrap();
        assert_eq!(parsed, row);
        let doc = format!("{MOMENT_HEADER}\n{}\n", row.to_line());
        assert_eq!(parse_moment_csv(&doc).unwrap(), vec![row]);
    }
}

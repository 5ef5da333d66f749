use stainscope::stats::roc_sample_size;

use crate::error::{CliError, CliResult};

/// `p:n` or a plain positive number.
pub fn parse_ratio(s: &str) -> CliResult<f64> {
    let bad = || CliError::Usage(format!("ratio must be `p:n` or a positive number, got `{s}`"));
    let r = match s.split_once(':') {
        Some((p, n)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            p / n
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if r.is_finite() && r > 0.0 {
        Ok(r)
    } else {
        Err(bad())
    }
}

pub fn run(auc_null: f64, auc_alt: f64, power: f64, alpha: f64, ratio: &str) -> CliResult<()> {
    let r = parse_ratio(ratio)?;
    let n = roc_sample_size(auc_null, auc_alt, power, alpha, r)?;
    println!("{}", serde_json::to_string_pretty(&n).expect("sample size serializes"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(parse_ratio("128:117").unwrap(), 128.0 / 117.0);
        assert_eq!(parse_ratio("2").unwrap(), 2.0);
        assert!(parse_ratio("1:0").is_err());
        assert!(parse_ratio("x").is_err());
    }
}

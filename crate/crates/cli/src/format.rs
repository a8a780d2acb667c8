//! C-style `%.5e` formatting for CSV output.

/// `1.00000e+00`, `-2.22045e-16`, `inf`, `nan`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.5e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// One CSV line from already formatted fields.
pub fn csv_line<S: AsRef<str>>(fields: &[S]) -> String {
    let mut line = fields.iter().map(|f| f.as_ref()).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        assert_eq!(sci(1.0), "1.00000e+00");
        assert_eq!(sci(2.220446049250313e-16), "2.22045e-16");
        assert_eq!(sci(-98.875), "-9.88750e+01");
        assert_eq!(sci(1.5e300), "1.50000e+300");
        assert_eq!(sci(0.0), "0.00000e+00");
        assert_eq!(sci(f64::INFINITY), "inf");
    }

    #[test]
    fn joins_fields() {
        assert_eq!(csv_line(&["N", "LU"]), "N,LU\n");
    }
}

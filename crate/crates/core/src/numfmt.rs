//! Deterministic number rendering for CSV artifacts.

/// Significant digits used for report CSVs.
pub const REPORT_DIGITS: usize = 12;

/// Renders `x` rounded to `digits` significant digits, using the fewest
/// digits that still reproduce that rounded value.
///
/// Positional notation is used for decimal exponents in `-5..16`, scientific
/// notation otherwise. Negative zero prints as `0`.
pub fn format_sig(x: f64, digits: usize) -> String {
    assert!((1..=17).contains(&digits));
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", digits - 1, x).parse().unwrap();
    let mut repr = format!("{:.*e}", digits - 1, rounded);
    for p in 1..digits {
        let candidate = format!("{:.*e}", p - 1, rounded);
        if candidate.parse::<f64>().unwrap() == rounded {
            repr = candidate;
            break;
        }
    }
    render(&repr)
}

/// Shortest string that parses back to exactly `x`.
pub fn format_exact(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x}")
}

/// Report formatting at [`REPORT_DIGITS`].
pub fn fmt(x: f64) -> String {
    format_sig(x, REPORT_DIGITS)
}

/// Report formatting with missing values as empty cells.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

// `repr` is Rust's `{:e}` output: `-d.ddde-7`.
fn render(repr: &str) -> String {
    let (mantissa, exp) = repr.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if !(-5..16).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    let n = digits.len() as i32;
    if exp < 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else if exp + 1 >= n {
        format!("{sign}{digits}{}", "0".repeat((exp + 1 - n) as usize))
    } else {
        let (int, frac) = digits.split_at((exp + 1) as usize);
        format!("{sign}{int}.{frac}")
    }
}

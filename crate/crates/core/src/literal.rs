//! Text format for a single state: eight reals, the interleaved real and
//! imaginary parts of `a₀..a₃`. Fields may be separated by whitespace or
//! commas and spread over several lines; `#` starts a comment.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::quantum::PureState;
use crate::scalar::{lit, to_f64, Real};

pub fn parse_state<T: Real>(text: &str) -> Result<PureState<T>> {
    let mut values = Vec::with_capacity(8);
    let mut last_line = 1;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = line.split('#').next().unwrap_or("");
        for tok in content
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let field = values.len() + 1;
            if field > 8 {
                return Err(Error::Parse {
                    line: line_no,
                    field,
                    message: "more than 8 fields".into(),
                });
            }
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                field,
                message: format!("`{tok}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    field,
                    message: format!("`{tok}` is not finite"),
                });
            }
            values.push(v);
            last_line = line_no;
        }
    }
    if values.len() != 8 {
        return Err(Error::Parse {
            line: last_line,
            field: values.len() + 1,
            message: format!("expected 8 fields, found {}", values.len()),
        });
    }
    let raw: [Complex<T>; 4] =
        std::array::from_fn(|i| Complex::new(lit(values[2 * i]), lit(values[2 * i + 1])));
    PureState::normalize(raw).map_err(|_| Error::Parse {
        line: last_line,
        field: 8,
        message: "all amplitudes are zero".into(),
    })
}

pub fn format_state<T: Real>(state: &PureState<T>) -> String {
    state
        .amplitudes()
        .iter()
        .flat_map(|a| [to_f64(a.re), to_f64(a.im)])
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bell_literal() {
        let s: PureState<f64> = parse_state("# bell\n1 0, 0 0\n0 0 1 0\n").unwrap();
        assert!((s.amplitudes()[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn reports_line_and_field() {
        let e = parse_state::<f64>("1 0 0 0\n0 x 1 0").unwrap_err();
        assert_eq!(
            e,
            Error::Parse {
                line: 2,
                field: 6,
                message: "`x` is not a number".into()
            }
        );
        assert!(matches!(
            parse_state::<f64>("1 0 0"),
            Err(Error::Parse { field: 4, .. })
        ));
        assert!(matches!(
            parse_state::<f64>("1 0 0 0 0 0 0 0 0"),
            Err(Error::Parse { field: 9, .. })
        ));
        assert!(matches!(
            parse_state::<f64>("0 0 0 0 0 0 0 0"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn format_round_trip() {
        let s = PureState::<f64>::from_polar([0.3, 0.5, 0.6, 0.55], [0.1, 2.0, 4.0, 5.5]).unwrap();
        let back: PureState<f64> = parse_state(&format_state(&s)).unwrap();
        for i in 0..4 {
            assert!((back.amplitudes()[i] - s.amplitudes()[i]).norm() < 1e-15);
        }
    }
}

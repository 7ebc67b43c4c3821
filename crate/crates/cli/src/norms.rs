use certree::Norm;

/// Parses a norm name: `l0`, `l1`, `l2`, `linf`, or `lp:<p>` with p > 0.
pub fn parse_norm(text: &str) -> Result<Norm, String> {
    match text {
        "l0" => return Ok(Norm::Zero),
        "l1" => return Ok(Norm::Finite(1.0)),
        "l2" => return Ok(Norm::Finite(2.0)),
        "linf" => return Ok(Norm::Infinity),
        _ => {}
    }
    if let Some(raw) = text.strip_prefix("lp:") {
        let p: f64 = raw
            .parse()
            .map_err(|_| format!("invalid exponent in {text:?}"))?;
        if p.is_finite() && p > 0.0 {
            return Ok(Norm::Finite(p));
        }
        return Err(format!("exponent must be finite and positive, got {p}"));
    }
    Err(format!(
        "unknown norm {text:?}; expected l0, l1, l2, linf, or lp:<p>"
    ))
}

pub fn norm_label(norm: Norm) -> String {
    match norm {
        Norm::Zero => "l0".to_owned(),
        Norm::Infinity => "linf".to_owned(),
        Norm::Finite(p) => {
            if p == 1.0 {
                "l1".to_owned()
            } else if p == 2.0 {
                "l2".to_owned()
            } else {
                format!("lp:{p}")
            }
        }
    }
}

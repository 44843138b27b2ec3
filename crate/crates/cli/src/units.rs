//! Quantity parsing for command-line values. Bare angles are degrees, bare
//! lengths are meters and bare times are seconds.

fn split(s: &str) -> (&str, &str) {
    let s = s.trim();
    let at = s
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_alphabetic())
        .last()
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    (&s[..at], &s[at..])
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// Angle in radians from `12`, `12deg` or `0.2rad`.
pub fn angle(s: &str) -> Result<f64, String> {
    let (num, unit) = split(s);
    let v = number(num)?;
    match unit {
        "" | "deg" => Ok(v.to_radians()),
        "rad" => Ok(v),
        u => Err(format!("unknown angle unit '{u}' (use deg or rad)")),
    }
}

/// Length in meters from `0.2`, `0.2m`, `20cm` or `200mm`.
pub fn length(s: &str) -> Result<f64, String> {
    let (num, unit) = split(s);
    let v = number(num)?;
    match unit {
        "" | "m" => Ok(v),
        "cm" => Ok(v * 1e-2),
        "mm" => Ok(v * 1e-3),
        u => Err(format!("unknown length unit '{u}' (use m, cm or mm)")),
    }
}

/// Time in seconds from `10`, `10s` or `250ms`.
pub fn time(s: &str) -> Result<f64, String> {
    let (num, unit) = split(s);
    let v = number(num)?;
    let t = match unit {
        "" | "s" => v,
        "ms" => v * 1e-3,
        u => return Err(format!("unknown time unit '{u}' (use s or ms)")),
    };
    if t < 0.0 {
        return Err(format!("time '{s}' is negative"));
    }
    Ok(t)
}

pub fn lengths3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated lengths, got '{s}'"));
    }
    Ok([length(parts[0])?, length(parts[1])?, length(parts[2])?])
}

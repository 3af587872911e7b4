//! Spectrum, histogram and phase-trace CSV files.
//!
//! Every file starts with `# key: value` comment lines describing units and
//! provenance, followed by a header row and numeric data. Floats use the
//! shortest representation that parses back to the same value.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::extraction::PhaseDifference;
use crate::spectrometer::{SpectrometerConfig, TimeDelayHistogram};
use crate::synthesis::{Interferogram, InterferogramMeta};
use crate::units::{omega_from_wavelength, wavelength_from_omega};

pub type Header = BTreeMap<String, String>;

fn write_header(out: &mut String, header: &[(&str, String)]) {
    for (k, v) in header {
        out.push_str("# ");
        out.push_str(k);
        out.push_str(": ");
        out.push_str(v);
        out.push('\n');
    }
}

fn rows_to_string(columns: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

struct Parsed {
    header: Header,
    columns: Vec<String>,
    /// (line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

fn parse(text: &str, source_name: &str) -> Result<Parsed> {
    let mut header = Header::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = rest.split_once(':') {
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec
            .map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Parsed {
        header,
        columns,
        rows,
    })
}

fn number(source_name: &str, line: usize, column: &str, text: &str) -> Result<f64> {
    text.parse::<f64>().map_err(|_| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: format!("column '{column}': '{text}' is not a number"),
    })
}

fn expect_columns(p: &Parsed, source_name: &str, required: &[&str]) -> Result<()> {
    if p.columns.len() < required.len() || p.columns.iter().zip(required).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: p.header.len() + 1,
            message: format!(
                "expected columns {}, found {}",
                required.join(","),
                p.columns.join(",")
            ),
        });
    }
    Ok(())
}

/// Spectrum file contents: the samples plus the free-form header.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFile {
    pub spectrum: Interferogram,
    pub header: Header,
}

impl SpectrumFile {
    pub fn pump_nm(&self) -> Option<f64> {
        self.header.get("pump_nm").and_then(|v| v.parse().ok())
    }
}

pub const SPECTRUM_COLUMNS: [&str; 4] = ["detuning_radps", "wavelength_nm", "intensity", "sigma"];

/// Renders a spectrum. `extra` header entries follow the standard ones.
pub fn spectrum_to_csv(s: &Interferogram, pump_nm: f64, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let mut header = vec![
        ("format", "spectrum".to_string()),
        ("tool_version", crate::VERSION.to_string()),
        (
            "units",
            "detuning rad/ps, wavelength nm (signal), intensity per rad/ps".to_string(),
        ),
        ("pump_nm", pump_nm.to_string()),
        ("omega_deg_radps", s.omega_deg.to_string()),
        (
            "lambda_deg_nm",
            wavelength_from_omega(s.omega_deg).to_string(),
        ),
        ("setup_hash", s.meta.setup_hash.clone()),
        ("with_fut", s.meta.with_fut.to_string()),
        ("coherence_ok", s.meta.coherence_ok.to_string()),
    ];
    header.extend(extra.iter().cloned());
    write_header(&mut out, &header);
    let cols: &[&str] = if s.sigma.is_some() {
        &SPECTRUM_COLUMNS
    } else {
        &SPECTRUM_COLUMNS[..3]
    };
    let rows = (0..s.len()).map(|i| {
        let mut r = vec![
            s.detuning[i].to_string(),
            wavelength_from_omega(s.omega_deg + s.detuning[i]).to_string(),
            s.values[i].to_string(),
        ];
        if let Some(sig) = &s.sigma {
            r.push(sig[i].to_string());
        }
        r
    });
    out.push_str(&rows_to_string(cols, rows));
    out
}

pub fn spectrum_from_csv(text: &str, source_name: &str) -> Result<SpectrumFile> {
    let p = parse(text, source_name)?;
    expect_columns(&p, source_name, &SPECTRUM_COLUMNS[..3])?;
    let with_sigma = p.columns.len() >= 4 && p.columns[3] == SPECTRUM_COLUMNS[3];
    let mut det = Vec::with_capacity(p.rows.len());
    let mut wl = Vec::with_capacity(p.rows.len());
    let mut val = Vec::with_capacity(p.rows.len());
    let mut sig = Vec::new();
    for (line, r) in &p.rows {
        det.push(number(source_name, *line, "detuning_radps", &r[0])?);
        wl.push(number(source_name, *line, "wavelength_nm", &r[1])?);
        val.push(number(source_name, *line, "intensity", &r[2])?);
        if with_sigma {
            let s = r.get(3).ok_or_else(|| Error::Parse {
                source_name: source_name.to_string(),
                line: *line,
                message: "missing sigma".into(),
            })?;
            sig.push(number(source_name, *line, "sigma", s)?);
        }
    }
    if det.is_empty() {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: p.header.len() + 2,
            message: "no data rows".into(),
        });
    }
    let omega_deg = match p.header.get("omega_deg_radps") {
        Some(v) => number(source_name, 0, "omega_deg_radps", v)?,
        None => omega_from_wavelength(wl[0]) - det[0],
    };
    let mut spectrum =
        Interferogram::new(omega_deg, det, val, with_sigma.then_some(sig)).map_err(|e| {
            Error::Parse {
                source_name: source_name.to_string(),
                line: 0,
                message: e.to_string(),
            }
        })?;
    spectrum.meta = InterferogramMeta {
        setup_hash: p.header.get("setup_hash").cloned().unwrap_or_default(),
        with_fut: p.header.get("with_fut").is_some_and(|v| v == "true"),
        coherence_ok: p.header.get("coherence_ok").is_none_or(|v| v == "true"),
    };
    Ok(SpectrumFile {
        spectrum,
        header: p.header,
    })
}

pub fn read_spectrum(path: &Path) -> Result<SpectrumFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    spectrum_from_csv(&text, &path.display().to_string())
}

pub fn histogram_to_csv(h: &TimeDelayHistogram, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let mut header = vec![
        ("format", "histogram".to_string()),
        ("tool_version", crate::VERSION.to_string()),
        (
            "units",
            "bin center ps (signal minus idler arrival), counts".to_string(),
        ),
        ("bin_width_ps", h.bin_width_ps.to_string()),
        ("first_bin", h.first_bin.to_string()),
        ("total_counts", h.total_counts.to_string()),
        ("pump_nm", h.pump_wavelength_nm.to_string()),
        ("source_hash", h.source_hash.clone()),
        (
            "spectrometer",
            serde_json::to_string(&h.config).expect("config serializes"),
        ),
    ];
    header.extend(extra.iter().cloned());
    write_header(&mut out, &header);
    let rows = h
        .bin_centers_ps()
        .into_iter()
        .zip(&h.counts)
        .map(|(t, c)| vec![t.to_string(), c.to_string()]);
    out.push_str(&rows_to_string(&["bin_center_ps", "counts"], rows));
    out
}

pub fn histogram_from_csv(text: &str, source_name: &str) -> Result<TimeDelayHistogram> {
    let p = parse(text, source_name)?;
    expect_columns(&p, source_name, &["bin_center_ps", "counts"])?;
    let get = |k: &str| {
        p.header.get(k).ok_or_else(|| Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            message: format!("missing header '{k}'"),
        })
    };
    let bad = |k: &str| Error::Parse {
        source_name: source_name.to_string(),
        line: 0,
        message: format!("malformed header '{k}'"),
    };
    let config: SpectrometerConfig =
        serde_json::from_str(get("spectrometer")?).map_err(|_| bad("spectrometer"))?;
    let first_bin: i64 = get("first_bin")?.parse().map_err(|_| bad("first_bin"))?;
    let bin_width_ps: f64 = get("bin_width_ps")?
        .parse()
        .map_err(|_| bad("bin_width_ps"))?;
    let pump: f64 = get("pump_nm")?.parse().map_err(|_| bad("pump_nm"))?;
    let mut counts = Vec::with_capacity(p.rows.len());
    for (line, r) in &p.rows {
        let c: u64 = r[1].parse().map_err(|_| Error::Parse {
            source_name: source_name.to_string(),
            line: *line,
            message: format!("'{}' is not a count", r[1]),
        })?;
        counts.push(c);
    }
    Ok(TimeDelayHistogram {
        bin_width_ps,
        first_bin,
        total_counts: counts.iter().sum(),
        counts,
        config,
        pump_wavelength_nm: pump,
        source_hash: p.header.get("source_hash").cloned().unwrap_or_default(),
    })
}

/// FUT phase on the measurement grid: the fitted polynomial and, when
/// available, the pointwise trace.
pub fn phase_trace_to_csv(
    detuning: &[f64],
    omega_deg: f64,
    parametric: &PhaseDifference,
    pointwise: Option<&PhaseDifference>,
    extra: &[(&str, String)],
) -> String {
    let mut out = String::new();
    let mut header = vec![
        ("format", "fut-phase".to_string()),
        ("tool_version", crate::VERSION.to_string()),
        (
            "units",
            "detuning rad/ps, wavelength nm, phase rad".to_string(),
        ),
        ("omega_deg_radps", omega_deg.to_string()),
        ("delta_c2_rad_ps2", parametric.delta_c2.to_string()),
        ("delta_c4_rad_ps4", parametric.delta_c4.to_string()),
    ];
    header.extend(extra.iter().cloned());
    write_header(&mut out, &header);
    let trace = pointwise.and_then(|p| p.trace.as_ref());
    let rows = detuning.iter().enumerate().map(|(i, &d)| {
        let mut r = vec![
            d.to_string(),
            wavelength_from_omega(omega_deg + d).to_string(),
            parametric.phase_at(d).to_string(),
        ];
        match trace {
            Some(t) if t.detuning.get(i) == Some(&d) && t.mask[i] => {
                r.push(t.phase[i].to_string());
                r.push(t.sigma[i].to_string());
            }
            _ => {
                r.push(String::new());
                r.push(String::new());
            }
        }
        r
    });
    out.push_str(&rows_to_string(
        &[
            "detuning_radps",
            "wavelength_nm",
            "phase_fit_rad",
            "phase_pointwise_rad",
            "sigma_pointwise_rad",
        ],
        rows,
    ));
    out
}

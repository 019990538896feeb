//! Artifact serialization: certificate JSON (17 significant digits, exact
//! round-trip), the flat CSV table (12 significant digits), and plot-ready
//! data. Every artifact embeds the resolved run configuration, and identical
//! configurations produce byte-identical files.

use crate::certify::BoundCertificate;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use serde::Serialize;
use std::io;

/// JSON pretty-printer that renders every finite float with 17 significant
/// digits (`{:.16e}`), which round-trips `f64` exactly. Non-finite values
/// follow the JSON convention and serialize as `null`; vacuous-bound flags in
/// the certificate carry that information explicitly.
struct SigFigFormatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl SigFigFormatter {
    fn new() -> Self {
        SigFigFormatter {
            pretty: serde_json::ser::PrettyFormatter::new(),
        }
    }
}

macro_rules! delegate {
    ($($name:ident),* $(,)?) => {
        $(
            fn $name<W>(&mut self, writer: &mut W) -> io::Result<()>
            where
                W: ?Sized + io::Write,
            {
                serde_json::ser::Formatter::$name(&mut self.pretty, writer)
            }
        )*
    };
}

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    delegate!(begin_array, end_array, begin_object, end_object);

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        serde_json::ser::Formatter::begin_array_value(&mut self.pretty, writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        serde_json::ser::Formatter::end_array_value(&mut self.pretty, writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        serde_json::ser::Formatter::begin_object_key(&mut self.pretty, writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        serde_json::ser::Formatter::begin_object_value(&mut self.pretty, writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        serde_json::ser::Formatter::end_object_value(&mut self.pretty, writer)
    }
}

/// Serialize any document with the 17-digit float convention.
pub fn to_json_17<T: Serialize>(doc: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter::new());
    doc.serialize(&mut ser)
        .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::invalid(format!("non-utf8 serialization: {e}")))
}

/// Certificate document: the resolved configuration plus the certificate.
#[derive(Serialize)]
pub struct CertificateDocument<'a> {
    pub schema: &'static str,
    pub config: &'a RunConfig,
    pub certificate: &'a BoundCertificate,
}

pub fn certificate_json(config: &RunConfig, cert: &BoundCertificate) -> Result<String> {
    to_json_17(&CertificateDocument {
        schema: "enbound-certificate-v1",
        config,
        certificate: cert,
    })
}

fn provenance_comment(config: &RunConfig) -> Result<String> {
    let compact = serde_json::to_string(config)
        .map_err(|e| Error::invalid(format!("config serialization failed: {e}")))?;
    Ok(format!(
        "# enbound certificate table\n# config = {compact}\n"
    ))
}

/// Flat per-cell table. Column order is fixed and documented:
/// `n, eta, empirical_sup, theoretical_Cn, corollary_bound, margin` where
/// `empirical_sup` and `margin` refer to the physical picture. Numbers carry
/// 12 significant digits; infinite bounds print as `inf`.
pub fn certificate_csv(config: &RunConfig, cert: &BoundCertificate) -> Result<String> {
    let mut out = provenance_comment(config)?;
    out.push_str("n,eta,empirical_sup,theoretical_Cn,corollary_bound,margin\n");
    for c in &cert.cells {
        out.push_str(&format!(
            "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}\n",
            c.n, c.eta, c.sup_physical, c.theoretical, c.corollary, c.margin_theorem
        ));
    }
    Ok(out)
}

/// Plot-ready long table: one row per `(n, eta)` cell with both pictures and
/// both bounds; the time scale is the abscissa (log scale intended), one
/// series per order.
pub fn plot_data(config: &RunConfig, cert: &BoundCertificate) -> Result<String> {
    let mut out = provenance_comment(config)?;
    out.push_str(
        "eta,n,empirical_sup_physical,empirical_sup_interaction,theoretical_Cn,corollary_bound\n",
    );
    for c in &cert.cells {
        out.push_str(&format!(
            "{:.11e},{},{:.11e},{:.11e},{:.11e},{:.11e}\n",
            c.eta, c.n, c.sup_physical, c.sup_interaction, c.theoretical, c.corollary
        ));
    }
    Ok(out)
}

/// One parsed row of the certificate CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub n: i32,
    pub eta: f64,
    pub empirical_sup: f64,
    pub theoretical: f64,
    pub corollary: f64,
    pub margin: f64,
}

/// Parse the certificate CSV back (comments and header skipped); used by the
/// round-trip checks.
pub fn parse_certificate_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with('n') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::invalid(format!("bad CSV row: {line}")));
        }
        let f = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad CSV number {:?}: {e}", fields[i])))
        };
        rows.push(CsvRow {
            n: fields[0]
                .parse()
                .map_err(|e| Error::invalid(format!("bad CSV order: {e}")))?,
            eta: f(1)?,
            empirical_sup: f(2)?,
            theoretical: f(3)?,
            corollary: f(4)?,
            margin: f(5)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_floats_have_17_digits_and_roundtrip() {
        #[derive(Serialize)]
        struct Doc {
            x: f64,
            y: f64,
        }
        let x = std::f64::consts::PI;
        let y = 0.1f64;
        let s = to_json_17(&Doc { x, y }).unwrap();
        assert!(s.contains("3.1415926535897931e0"), "{s}");
        let parsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["x"].as_f64().unwrap(), x);
        assert_eq!(parsed["y"].as_f64().unwrap(), y);
    }

    #[test]
    fn non_finite_serializes_as_null() {
        #[derive(Serialize)]
        struct Doc {
            x: f64,
        }
        let s = to_json_17(&Doc { x: f64::INFINITY }).unwrap();
        assert!(s.contains("null"), "{s}");
    }

    #[test]
    fn csv_roundtrip_keeps_12_digits() {
        let text = "# comment\nn,eta,empirical_sup,theoretical_Cn,corollary_bound,margin\n\
                    -2,2.50000000000e-1,1.03657188012e0,5.21720092243e0,inf,4.18062904231e0\n";
        let rows = parse_certificate_csv(text).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n, -2);
        assert!(rows[0].corollary.is_infinite());
        let reprinted = format!("{:.11e}", rows[0].empirical_sup);
        assert_eq!(reprinted, "1.03657188012e0");
    }
}
